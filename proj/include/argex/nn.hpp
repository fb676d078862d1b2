#pragma once

// Small reusable blocks shared by the token embedder and the syntax
// transformer: linear maps, layer norm wrappers, scaled-dot attention heads
// and the position-wise feed-forward.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "argex/params.hpp"
#include "argex/tensor.hpp"

namespace argex::nn {

struct Linear {
  Parameter* w = nullptr;  // [in x out]
  Parameter* b = nullptr;  // [out], optional

  // init_scale < 1 shrinks the weight range; block output projections use
  // 0.1 so every residual block starts near the identity, which post-norm
  // stacks need to train quickly from scratch.
  static Linear create(ParameterStore& ps, const std::string& prefix,
                       std::size_t in, std::size_t out, Rng& rng,
                       bool bias = true, double init_scale = 1.0) {
    Linear l;
    l.w = &init::glorot(ps, prefix + ".w", in, out, rng, init_scale);
    if (bias) l.b = &init::zeros(ps, prefix + ".b", Shape{out});
    return l;
  }

  Tensor operator()(Graph& g, const Tensor& x) const {
    Tensor y = matmul(x, g.leaf(*w));
    if (b) y = add(y, g.leaf(*b));
    return y;
  }
};

struct LayerNorm {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;

  static LayerNorm create(ParameterStore& ps, const std::string& prefix,
                          std::size_t d) {
    LayerNorm n;
    n.gamma = &init::ones(ps, prefix + ".g", Shape{d});
    n.beta = &init::zeros(ps, prefix + ".b", Shape{d});
    return n;
  }

  Tensor operator()(Graph& g, const Tensor& x) const {
    return layer_norm(x, g.leaf(*gamma), g.leaf(*beta));
  }
};

// One scaled-dot attention head. A null mask means full self-attention; the
// optional probs_out captures the [T x T] attention matrix.
struct AttentionHead {
  Parameter* wq = nullptr;  // [d_model x d_head]
  Parameter* wk = nullptr;
  Parameter* wv = nullptr;

  static AttentionHead create(ParameterStore& ps, const std::string& prefix,
                              std::size_t d_model, std::size_t d_head,
                              Rng& rng) {
    AttentionHead h;
    h.wq = &init::glorot(ps, prefix + ".wq", d_model, d_head, rng);
    h.wk = &init::glorot(ps, prefix + ".wk", d_model, d_head, rng);
    h.wv = &init::glorot(ps, prefix + ".wv", d_model, d_head, rng);
    return h;
  }

  Tensor operator()(Graph& g, const Tensor& x, const Mask* mask,
                    std::vector<Scalar>* probs_out = nullptr) const {
    const std::size_t d_head = wq->shape[1];
    Tensor q = matmul(x, g.leaf(*wq));
    Tensor k = matmul(x, g.leaf(*wk));
    Tensor v = matmul(x, g.leaf(*wv));
    Tensor scores = scale(matmul_nt(q, k),
                          Scalar(1) / std::sqrt(static_cast<Scalar>(d_head)));
    Tensor probs = mask ? masked_softmax(scores, *mask) : softmax_rows(scores);
    if (probs_out) *probs_out = probs.value();
    return matmul(probs, v);
  }
};

struct FeedForward {
  Linear expand;
  Linear contract;

  static FeedForward create(ParameterStore& ps, const std::string& prefix,
                            std::size_t d, std::size_t d_ff, Rng& rng) {
    FeedForward f;
    f.expand = Linear::create(ps, prefix + ".w1", d, d_ff, rng);
    f.contract =
        Linear::create(ps, prefix + ".w2", d_ff, d, rng, true, 0.1);
    return f;
  }

  Tensor operator()(Graph& g, const Tensor& x) const {
    return contract(g, relu(expand(g, x)));
  }
};

inline Tensor maybe_dropout(const Tensor& x, double p, bool train, Rng& rng) {
  return p > 0.0 && train ? dropout(x, p, true, rng) : x;
}

// Standard post-attention processing: residual + norm, feed-forward,
// residual + norm.
struct BlockTail {
  LayerNorm ln1;
  FeedForward ff;
  LayerNorm ln2;

  static BlockTail create(ParameterStore& ps, const std::string& prefix,
                          std::size_t d, std::size_t d_ff, Rng& rng) {
    BlockTail t;
    t.ln1 = LayerNorm::create(ps, prefix + ".ln1", d);
    t.ff = FeedForward::create(ps, prefix + ".ff", d, d_ff, rng);
    t.ln2 = LayerNorm::create(ps, prefix + ".ln2", d);
    return t;
  }

  Tensor operator()(Graph& g, const Tensor& x, const Tensor& attn,
                    double drop, bool train, Rng& rng) const {
    Tensor h = ln1(g, add(x, maybe_dropout(attn, drop, train, rng)));
    Tensor f = maybe_dropout(ff(g, h), drop, train, rng);
    return ln2(g, add(h, f));
  }
};

}  // namespace argex::nn
