#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>

#include "argex/params.hpp"
#include "argex/tensor.hpp"

using namespace argex;

namespace {

// Central finite differences over every element of every listed parameter.
// The builder must construct the same scalar loss from scratch on each call.
double max_rel_grad_error(const std::function<Tensor(Graph&)>& build,
                          std::vector<Parameter*> params,
                          double h = 1e-5) {
  std::map<std::string, std::vector<Scalar>> analytic;
  {
    Graph g;
    Tensor loss = build(g);
    g.backward(loss);
    for (Parameter* p : params) analytic[p->name] = p->grad;
  }
  auto eval = [&]() {
    Graph g;
    return static_cast<double>(build(g).item());
  };
  double worst = 0.0;
  for (Parameter* p : params) {
    const std::vector<Scalar>& an = analytic[p->name];
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const Scalar keep = p->value[i];
      p->value[i] = keep + static_cast<Scalar>(h);
      const double fp = eval();
      p->value[i] = keep - static_cast<Scalar>(h);
      const double fm = eval();
      p->value[i] = keep;
      const double fd = (fp - fm) / (2.0 * h);
      const double a = an.empty() ? 0.0 : static_cast<double>(an[i]);
      const double denom = std::max({1.0, std::abs(a), std::abs(fd)});
      worst = std::max(worst, std::abs(a - fd) / denom);
    }
    p->zero_grad();
  }
  return worst;
}

Parameter* rand_param(ParameterStore& ps, const std::string& name, Shape shape,
                      Rng& rng, double lo = -1.0, double hi = 1.0) {
  return &ps.add(name, std::move(shape),
                 [&] { return static_cast<Scalar>(rng.uniform(lo, hi)); });
}

// Mixes a [n x m] tensor into a scalar with fixed non-uniform weights so that
// gradient errors cannot hide behind symmetric reductions.
Tensor weighted_scalar(Graph& g, const Tensor& x, Rng& rng) {
  const std::size_t n = x.rows(), m = x.cols();
  std::vector<Scalar> wr(n), wc(m);
  for (Scalar& v : wr) v = static_cast<Scalar>(rng.uniform(0.5, 1.5));
  for (Scalar& v : wc) v = static_cast<Scalar>(rng.uniform(0.5, 1.5));
  Tensor row = g.constant({1, n}, wr);
  Tensor col = g.constant({1, m}, wc);
  return sum(matmul_nt(matmul(row, x), col));
}

constexpr double kGradTol = 1e-4;

}  // namespace

// ---------------------------------------------------------------------------
// Frozen trivial cases
// ---------------------------------------------------------------------------

TEST(ForwardOps, MaskedSoftmaxSymmetryAndExactZero) {
  Graph g;
  Tensor logits = g.constant({1, 3}, {1.0, 1.0, 1.0});
  Mask mask{{3}, {1, 0, 1}};
  Tensor p = masked_softmax(logits, mask);
  EXPECT_DOUBLE_EQ(p.value()[0], 0.5);
  EXPECT_EQ(p.value()[1], 0.0);  // exactly zero on the masked slot
  EXPECT_DOUBLE_EQ(p.value()[2], 0.5);
}

TEST(ForwardOps, MaskedSoftmaxRowsSumToOne) {
  Rng rng(7);
  Graph g;
  const std::size_t n = 6, m = 9;
  std::vector<Scalar> logits(n * m);
  for (Scalar& v : logits) v = static_cast<Scalar>(rng.uniform(-4, 4));
  Mask mask{{n, m}, std::vector<std::uint8_t>(n * m, 0)};
  for (std::size_t i = 0; i < n; ++i) {
    mask.keep[i * m + static_cast<std::size_t>(rng.uniform_int(0, m - 1))] = 1;
    for (std::size_t j = 0; j < m; ++j)
      if (rng.bernoulli(0.5)) mask.keep[i * m + j] = 1;
  }
  Tensor p = masked_softmax(g.constant({n, m}, logits), mask);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!mask.keep[i * m + j]) EXPECT_EQ(p.value()[i * m + j], 0.0);
      row += p.value()[i * m + j];
    }
    EXPECT_NEAR(row, 1.0, 1e-9);
  }
}

TEST(ForwardOps, MaskedSoftmaxDegenerateRowThrows) {
  Graph g;
  Tensor logits = g.constant({2, 2}, {1.0, 2.0, 3.0, 4.0});
  Mask mask{{2, 2}, {1, 1, 0, 0}};
  EXPECT_THROW(masked_softmax(logits, mask), DegenerateMaskError);
}

TEST(ForwardOps, DropoutEvalIsIdentity) {
  Rng rng(3);
  Graph g;
  Tensor x = g.constant({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor y = dropout(x, 0.1, /*train=*/false, rng);
  EXPECT_EQ(x.node(), y.node());
  EXPECT_THROW(dropout(x, 0.0, false, rng), ValueError);
  EXPECT_THROW(dropout(x, 1.0, true, rng), ValueError);
}

TEST(ForwardOps, SigmoidAtZero) {
  Graph g;
  Tensor y = sigmoid(g.constant({1}, {0.0}));
  EXPECT_DOUBLE_EQ(y.item(), 0.5);
}

TEST(ForwardOps, ShapeMismatchNamesBothShapes) {
  Graph g;
  Tensor a = g.constant({2, 3}, std::vector<Scalar>(6, 1.0));
  Tensor b = g.constant({2, 2}, std::vector<Scalar>(4, 1.0));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("[2x2]"), std::string::npos);
  }
}

TEST(Backward, LinearLossGradEqualsInput) {
  // loss = sum(W . x) with constant x: dW[i][j] == x[j].
  ParameterStore ps;
  Rng rng(11);
  Parameter* w = rand_param(ps, "w", {3, 4}, rng);
  const std::vector<Scalar> xv = {0.5, -1.25, 2.0, 0.75};
  Graph g;
  Tensor x = g.constant({4, 1}, xv);
  Tensor loss = sum(matmul(g.leaf(*w), x));
  g.backward(loss);
  ASSERT_TRUE(w->has_grad());
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      EXPECT_DOUBLE_EQ(w->grad[i * 4 + j], xv[j]);
}

TEST(Backward, ConstantsGetNoGradient) {
  Graph g;
  Tensor a = g.constant({2, 2}, {1, 2, 3, 4});
  Tensor b = g.constant({2, 2}, {1, 1, 1, 1});
  Tensor loss = sum(matmul(a, b));
  g.backward(loss);  // no requires_grad leaf anywhere
  EXPECT_FALSE(a.has_grad());
  EXPECT_FALSE(b.has_grad());
}

TEST(Backward, NonScalarLossRejected) {
  Graph g;
  Tensor a = g.input({2, 2}, {1, 2, 3, 4});
  EXPECT_THROW(g.backward(a), NonScalarLossError);
}

TEST(Backward, SecondBackwardAccumulates) {
  ParameterStore ps;
  Rng rng(5);
  Parameter* w = rand_param(ps, "w", {2, 2}, rng);
  Graph g;
  Tensor loss = sum(g.leaf(*w));
  g.backward(loss);
  const std::vector<Scalar> once = w->grad;
  g.backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i)
    EXPECT_DOUBLE_EQ(w->grad[i], 2.0 * once[i]);
}

// ---------------------------------------------------------------------------
// Finite-difference oracle, per op, over random small shapes
// ---------------------------------------------------------------------------

TEST(GradCheck, MatmulAndTransposed) {
  Rng rng(101);
  for (int it = 0; it < 20; ++it) {
    ParameterStore ps;
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 4));
    const std::size_t k = static_cast<std::size_t>(rng.uniform_int(1, 4));
    const std::size_t m = static_cast<std::size_t>(rng.uniform_int(1, 4));
    Parameter* a = rand_param(ps, "a", {n, k}, rng);
    Parameter* b = rand_param(ps, "b", {k, m}, rng);
    Parameter* bt = rand_param(ps, "bt", {m, k}, rng);
    Rng mix(1000 + it);
    auto build = [&](Graph& g) {
      Rng r = mix;
      Tensor y = matmul(g.leaf(*a), g.leaf(*b));
      Tensor z = matmul_nt(g.leaf(*a), g.leaf(*bt));
      return add(weighted_scalar(g, y, r), weighted_scalar(g, z, r));
    };
    EXPECT_LT(max_rel_grad_error(build, {a, b, bt}), kGradTol);
  }
}

TEST(GradCheck, AddScaleConcat) {
  Rng rng(102);
  for (int it = 0; it < 20; ++it) {
    ParameterStore ps;
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 4));
    const std::size_t m = static_cast<std::size_t>(rng.uniform_int(1, 4));
    Parameter* a = rand_param(ps, "a", {n, m}, rng);
    Parameter* b = rand_param(ps, "b", {n, m}, rng);
    Parameter* bias = rand_param(ps, "bias", {m}, rng);
    Rng mix(2000 + it);
    auto build = [&](Graph& g) {
      Rng r = mix;
      Tensor s = add(add(g.leaf(*a), g.leaf(*b)), g.leaf(*bias));
      Tensor c = concat({s, scale(g.leaf(*a), Scalar(0.7))}, 0);
      Tensor c2 = concat({s, g.leaf(*b)}, 1);
      return add(weighted_scalar(g, c, r), weighted_scalar(g, c2, r));
    };
    EXPECT_LT(max_rel_grad_error(build, {a, b, bias}), kGradTol);
  }
}

TEST(GradCheck, LookupGatherTile) {
  Rng rng(103);
  for (int it = 0; it < 20; ++it) {
    ParameterStore ps;
    const std::size_t v = static_cast<std::size_t>(rng.uniform_int(3, 6));
    const std::size_t d = static_cast<std::size_t>(rng.uniform_int(1, 4));
    Parameter* table = rand_param(ps, "table", {v, d}, rng);
    Parameter* row = rand_param(ps, "row", {1, d}, rng);
    std::vector<int> ids;
    for (int i = 0; i < 5; ++i)
      ids.push_back(rng.uniform_int(0, static_cast<int>(v) - 1));
    Rng mix(3000 + it);
    auto build = [&](Graph& g) {
      Rng r = mix;
      Tensor e = embedding_lookup(g.leaf(*table), ids);
      Tensor gg = gather_rows(e, {0, 2, 2, 4});
      Tensor t = tile_rows(g.leaf(*row), 3);
      return add(weighted_scalar(g, gg, r), weighted_scalar(g, t, r));
    };
    EXPECT_LT(max_rel_grad_error(build, {table, row}), kGradTol);
  }
}

TEST(GradCheck, MaskedSoftmax) {
  Rng rng(104);
  for (int it = 0; it < 20; ++it) {
    ParameterStore ps;
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 4));
    const std::size_t m = static_cast<std::size_t>(rng.uniform_int(2, 5));
    Parameter* a = rand_param(ps, "a", {n, m}, rng, -2.0, 2.0);
    Mask mask{{n, m}, std::vector<std::uint8_t>(n * m, 0)};
    for (std::size_t i = 0; i < n; ++i) {
      mask.keep[i * m + static_cast<std::size_t>(
                            rng.uniform_int(0, static_cast<int>(m) - 1))] = 1;
      for (std::size_t j = 0; j < m; ++j)
        if (rng.bernoulli(0.6)) mask.keep[i * m + j] = 1;
    }
    Rng mix(4000 + it);
    auto build = [&](Graph& g) {
      Rng r = mix;
      return weighted_scalar(g, masked_softmax(g.leaf(*a), mask), r);
    };
    EXPECT_LT(max_rel_grad_error(build, {a}), kGradTol);
  }
}

TEST(GradCheck, LayerNorm) {
  Rng rng(105);
  for (int it = 0; it < 20; ++it) {
    ParameterStore ps;
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 4));
    const std::size_t d = static_cast<std::size_t>(rng.uniform_int(2, 6));
    Parameter* x = rand_param(ps, "x", {n, d}, rng);
    Parameter* gamma = rand_param(ps, "gamma", {d}, rng, 0.5, 1.5);
    Parameter* beta = rand_param(ps, "beta", {d}, rng);
    Rng mix(5000 + it);
    auto build = [&](Graph& g) {
      Rng r = mix;
      return weighted_scalar(
          g, layer_norm(g.leaf(*x), g.leaf(*gamma), g.leaf(*beta)), r);
    };
    EXPECT_LT(max_rel_grad_error(build, {x, gamma, beta}), kGradTol);
  }
}

TEST(GradCheck, PointwiseAndPooling) {
  Rng rng(106);
  for (int it = 0; it < 20; ++it) {
    ParameterStore ps;
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 5));
    const std::size_t d = static_cast<std::size_t>(rng.uniform_int(1, 4));
    // Keep relu inputs away from the kink.
    Parameter* x = &ps.add("x", Shape{n, d}, [&] {
      const double v = rng.uniform(0.05, 1.0);
      return static_cast<Scalar>(rng.bernoulli(0.5) ? v : -v);
    });
    const std::size_t a = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(n) - 1));
    const std::size_t b = static_cast<std::size_t>(
        rng.uniform_int(static_cast<int>(a), static_cast<int>(n) - 1));
    Rng mix(6000 + it);
    auto build = [&](Graph& g) {
      Rng r = mix;
      Tensor lx = g.leaf(*x);
      Tensor s1 = add(weighted_scalar(g, relu(lx), r),
                      weighted_scalar(g, sigmoid(lx), r));
      Tensor s2 = add(weighted_scalar(g, max_pool_over_positions(lx, a, b), r),
                      weighted_scalar(g, mean_pool_over_positions(lx, a, b), r));
      return add(s1, s2);
    };
    EXPECT_LT(max_rel_grad_error(build, {x}), kGradTol);
  }
}

TEST(GradCheck, DropoutWithReplayedMask) {
  Rng rng(107);
  for (int it = 0; it < 20; ++it) {
    ParameterStore ps;
    Parameter* x = rand_param(ps, "x", {3, 4}, rng);
    Rng drop_seed(9000 + it);
    auto build = [&](Graph& g) {
      Rng r = drop_seed;  // identical mask on every rebuild
      Rng mix(10);
      return weighted_scalar(g, dropout(g.leaf(*x), 0.3, true, r), mix);
    };
    EXPECT_LT(max_rel_grad_error(build, {x}), kGradTol);
  }
}

TEST(GradCheck, Losses) {
  Rng rng(108);
  for (int it = 0; it < 20; ++it) {
    ParameterStore ps;
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 4));
    const std::size_t k = static_cast<std::size_t>(rng.uniform_int(2, 5));
    Parameter* logits = rand_param(ps, "logits", {n, k}, rng, -2.0, 2.0);
    std::vector<int> targets;
    for (std::size_t i = 0; i < n; ++i)
      targets.push_back(rng.uniform_int(0, static_cast<int>(k) - 1));
    std::vector<Scalar> bce_targets(n * k);
    for (Scalar& v : bce_targets)
      v = rng.bernoulli(0.5) ? Scalar(1) : Scalar(0);
    const Reduction red = it % 2 ? Reduction::Mean : Reduction::Sum;
    auto build = [&](Graph& g) {
      Tensor l = g.leaf(*logits);
      return add(cross_entropy(l, targets, red),
                 binary_cross_entropy_with_logits(l, bce_targets, red));
    };
    EXPECT_LT(max_rel_grad_error(build, {logits}), kGradTol);
  }
}

TEST(GradCheck, CompositeNetwork) {
  // A chain exercising most ops together, as the model does.
  Rng rng(109);
  for (int it = 0; it < 5; ++it) {
    ParameterStore ps;
    Parameter* emb = rand_param(ps, "emb", {6, 4}, rng);
    Parameter* w1 = rand_param(ps, "w1", {4, 4}, rng);
    Parameter* b1 = rand_param(ps, "b1", {4}, rng);
    Parameter* gamma = rand_param(ps, "gamma", {4}, rng, 0.5, 1.5);
    Parameter* beta = rand_param(ps, "beta", {4}, rng);
    Parameter* w2 = rand_param(ps, "w2", {4, 3}, rng);
    std::vector<int> ids = {0, 3, 5, 1};
    std::vector<int> targets = {2, 0, 1, 1};
    auto build = [&](Graph& g) {
      Tensor h = embedding_lookup(g.leaf(*emb), ids);
      h = relu(add(matmul(h, g.leaf(*w1)), g.leaf(*b1)));
      h = layer_norm(h, g.leaf(*gamma), g.leaf(*beta));
      Tensor att = softmax_rows(matmul_nt(h, h));
      h = add(matmul(att, h), h);
      return cross_entropy(matmul(h, g.leaf(*w2)), targets);
    };
    EXPECT_LT(max_rel_grad_error(build, {emb, w1, b1, gamma, beta, w2}),
              kGradTol);
  }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

TEST(Adam, ZeroGradLeavesParamsUnchanged) {
  ParameterStore ps;
  Rng rng(21);
  Parameter* w = rand_param(ps, "w", {2, 3}, rng);
  const std::vector<Scalar> before = w->value;
  ps.ensure_grads();
  AdamState adam(AdamConfig{0.1, 0.9, 0.999, 1e-8});
  adam.step(ps);
  EXPECT_EQ(w->value, before);
}

TEST(Adam, FirstStepMatchesHandComputation) {
  // g = 1, lr = 0.1: bias-corrected m-hat = v-hat = 1, so the update is
  // -0.1 / (1 + eps).
  ParameterStore ps;
  Parameter& w = ps.add("w", {1});
  w.value[0] = 1.0;
  w.grad = {1.0};
  AdamState adam(AdamConfig{0.1, 0.9, 0.999, 1e-8});
  adam.step(ps);
  const double expected = 1.0 - 0.1 * 1.0 / (std::sqrt(1.0) + 1e-8);
  EXPECT_DOUBLE_EQ(w.value[0], expected);
  EXPECT_NEAR(w.value[0], 0.9, 1e-8);
  EXPECT_EQ(w.grad[0], 0.0);  // zeroed after the step
  EXPECT_EQ(adam.step_count(), 1);
}

TEST(Adam, StepCounterIncrementsByOne) {
  ParameterStore ps;
  Parameter& w = ps.add("w", {1});
  AdamState adam;
  for (int t = 1; t <= 2; ++t) {
    w.grad = {1.0};
    adam.step(ps);
    EXPECT_EQ(adam.step_count(), t);
  }
}

TEST(Adam, MissingGradNamesParameter) {
  ParameterStore ps;
  ps.add("embedder.tok", {2, 2});
  AdamState adam;
  try {
    adam.step(ps);
    FAIL() << "expected MissingGradError";
  } catch (const MissingGradError& e) {
    EXPECT_NE(std::string(e.what()).find("embedder.tok"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// Determinism & checkpointing
// ---------------------------------------------------------------------------

TEST(Determinism, SameSeedBitwiseIdentical) {
  auto run = [](std::uint64_t seed) {
    ParameterStore ps;
    Rng rng(seed);
    Parameter* w1 = rand_param(ps, "w1", {5, 5}, rng);
    Parameter* w2 = rand_param(ps, "w2", {5, 5}, rng);
    Graph g;
    Rng drop(seed + 1);
    Tensor h = relu(matmul(g.leaf(*w1), g.leaf(*w2)));
    h = dropout(h, 0.2, true, drop);
    Tensor loss = sum(h);
    g.backward(loss);
    std::vector<Scalar> out = w1->grad;
    out.push_back(loss.item());
    return out;
  };
  const std::vector<Scalar> a = run(42), b = run(42);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), a.size() * sizeof(Scalar)));
}

TEST(Checkpoint, RoundTripAndShapeValidation) {
  namespace fs = std::filesystem;
  const std::string path =
      (fs::temp_directory_path() / "argex_ckpt_test.bin").string();
  ParameterStore ps;
  Rng rng(33);
  rand_param(ps, "a.w", {3, 4}, rng);
  rand_param(ps, "b.bias", {7}, rng);
  save_checkpoint(ps, path);

  ParameterStore same;
  same.add("a.w", {3, 4});
  same.add("b.bias", {7});
  load_checkpoint(same, path);
  EXPECT_EQ(same.at("a.w").value, ps.at("a.w").value);
  EXPECT_EQ(same.at("b.bias").value, ps.at("b.bias").value);

  ParameterStore wrong;
  wrong.add("a.w", {4, 3});
  wrong.add("b.bias", {7});
  try {
    load_checkpoint(wrong, path);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("a.w"), std::string::npos);
    EXPECT_NE(msg.find("[3x4]"), std::string::npos);
    EXPECT_NE(msg.find("[4x3]"), std::string::npos);
  }
  fs::remove(path);
}
