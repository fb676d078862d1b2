#pragma once

// Minimal reverse-mode autodiff engine. A Graph is a define-by-run arena of
// nodes, rebuilt for every training step; Tensor is a cheap handle into it.
// Parameters live outside the graph and are attached as leaf nodes that share
// their storage, so backward() accumulates straight into Parameter::grad.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "argex/errors.hpp"
#include "argex/rng.hpp"

namespace argex {

#ifdef ARGEX_FAST_FLOAT
using Scalar = float;
#else
using Scalar = double;
#endif

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

// A named learnable tensor. Gradient storage is empty until the first
// backward pass touches it.
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<Scalar> value;
  std::vector<Scalar> grad;

  std::size_t numel() const { return shape_numel(shape); }
  bool has_grad() const { return !grad.empty(); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), Scalar(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), Scalar(0)); }
};

// Boolean attention/selection mask; shape is either equal to the logits it
// gates or a single row broadcast over all logit rows.
struct Mask {
  Shape shape;
  std::vector<std::uint8_t> keep;

  static Mask full(std::size_t rows, std::size_t cols) {
    return Mask{{rows, cols}, std::vector<std::uint8_t>(rows * cols, 1)};
  }
};

class Graph;

namespace detail {

struct Node {
  Graph* graph = nullptr;
  int id = -1;
  Shape shape;
  bool requires_grad = false;
  std::vector<Scalar> vbuf;                     // interior value storage
  const std::vector<Scalar>* val = nullptr;     // -> vbuf or Parameter::value
  std::vector<Scalar> gbuf;                     // interior grad storage
  std::vector<Scalar>* gsink = nullptr;         // -> gbuf or Parameter::grad
  std::vector<Node*> parents;
  std::function<void(Node&)> backward_fn;

  std::size_t numel() const { return shape_numel(shape); }
  const std::vector<Scalar>& value() const { return *val; }
  std::vector<Scalar>& grad() { return *gsink; }
  void ensure_grad_alloc() {
    if (gsink->empty()) gsink->assign(numel(), Scalar(0));
  }
};

}  // namespace detail

// Handle to a node; valid while its Graph is alive.
class Tensor {
 public:
  Tensor() = default;

  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->numel(); }
  std::size_t rows() const { return node_->shape.at(0); }
  std::size_t cols() const { return node_->shape.at(1); }
  bool requires_grad() const { return node_->requires_grad; }
  const std::vector<Scalar>& value() const { return node_->value(); }

  Scalar item() const {
    if (numel() != 1)
      throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->value()[0];
  }

  bool has_grad() const { return node_->gsink && !node_->gsink->empty(); }
  const std::vector<Scalar>& grad() const {
    if (!has_grad()) throw MissingGradError("tensor has no gradient");
    return *node_->gsink;
  }

  detail::Node* node() const { return node_; }

 private:
  friend class Graph;
  explicit Tensor(detail::Node* n) : node_(n) {}
  detail::Node* node_ = nullptr;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Constant leaf; never receives gradient.
  Tensor constant(Shape shape, std::vector<Scalar> values) {
    return make_leaf(std::move(shape), std::move(values), false);
  }

  // Non-parameter leaf that collects gradient (for tests and probes).
  Tensor input(Shape shape, std::vector<Scalar> values,
               bool requires_grad = true) {
    return make_leaf(std::move(shape), std::move(values), requires_grad);
  }

  // Leaf sharing the parameter's storage; repeated attachment of the same
  // parameter within one graph returns the same node.
  Tensor leaf(Parameter& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Tensor(it->second);
    detail::Node& n = new_node();
    n.shape = p.shape;
    n.requires_grad = true;
    n.val = &p.value;
    n.gsink = &p.grad;
    param_nodes_.emplace(&p, &n);
    return Tensor(&n);
  }

  // Reverse-mode sweep from a scalar loss. Gradients accumulate into every
  // requires_grad leaf reachable from it; calling twice accumulates again.
  void backward(const Tensor& loss) {
    detail::Node* root = loss.node();
    if (root->numel() != 1)
      throw NonScalarLossError("backward() needs a scalar loss, got shape " +
                               shape_str(root->shape));
    if (!root->requires_grad) return;  // no differentiable leaf upstream
    // Reachability over parents.
    std::vector<char> reach(nodes_.size(), 0);
    std::vector<detail::Node*> stack{root};
    reach[static_cast<std::size_t>(root->id)] = 1;
    while (!stack.empty()) {
      detail::Node* n = stack.back();
      stack.pop_back();
      for (detail::Node* p : n->parents) {
        if (!reach[static_cast<std::size_t>(p->id)]) {
          reach[static_cast<std::size_t>(p->id)] = 1;
          stack.push_back(p);
        }
      }
    }
    // Prepare gradient buffers. Interior scratch restarts at zero, parameter
    // sinks keep accumulating across calls.
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      detail::Node& n = nodes_[i];
      if (!reach[i] || !n.requires_grad) continue;
      if (n.gsink == &n.gbuf) {
        n.gbuf.assign(n.numel(), Scalar(0));
      } else {
        n.ensure_grad_alloc();
      }
    }
    root->grad()[0] += Scalar(1);
    // Creation order is topological, so one reverse pass suffices.
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      detail::Node& n = nodes_[i];
      if (!reach[i] || !n.requires_grad || !n.backward_fn) continue;
      n.backward_fn(n);
    }
  }

  std::size_t size() const { return nodes_.size(); }

  detail::Node& new_node() {
    nodes_.emplace_back();
    detail::Node& n = nodes_.back();
    n.graph = this;
    n.id = static_cast<int>(nodes_.size()) - 1;
    n.gsink = &n.gbuf;
    return n;
  }

  Tensor make_op(Shape shape, std::vector<Scalar> values,
                 std::vector<detail::Node*> parents,
                 std::function<void(detail::Node&)> backward_fn) {
    detail::Node& n = new_node();
    n.shape = std::move(shape);
    n.vbuf = std::move(values);
    n.val = &n.vbuf;
    n.parents = std::move(parents);
    for (detail::Node* p : n.parents)
      if (p->requires_grad) n.requires_grad = true;
    if (n.requires_grad) n.backward_fn = std::move(backward_fn);
    return Tensor(&n);
  }

 private:
  Tensor make_leaf(Shape shape, std::vector<Scalar> values, bool req) {
    if (shape_numel(shape) != values.size())
      throw ShapeError("leaf value count " + std::to_string(values.size()) +
                       " does not match shape " + shape_str(shape));
    detail::Node& n = new_node();
    n.shape = std::move(shape);
    n.vbuf = std::move(values);
    n.val = &n.vbuf;
    n.requires_grad = req;
    return Tensor(&n);
  }

  std::deque<detail::Node> nodes_;
  std::unordered_map<const Parameter*, detail::Node*> param_nodes_;
};

enum class Reduction { Sum, Mean };

namespace detail {

inline void accumulate(Node* p, const std::vector<Scalar>& delta) {
  if (!p->requires_grad) return;
  p->ensure_grad_alloc();
  std::vector<Scalar>& g = p->grad();
  for (std::size_t i = 0; i < delta.size(); ++i) g[i] += delta[i];
}

inline void require_2d(const Tensor& t, const char* op) {
  if (t.shape().size() != 2)
    throw ShapeError(std::string(op) + ": expected 2-d tensor, got " +
                     shape_str(t.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward ops
// ---------------------------------------------------------------------------

// [n x k] . [k x m] -> [n x m]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_2d(a, "matmul");
  detail::require_2d(b, "matmul");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k)
    throw ShapeError("matmul: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  std::vector<Scalar> out(n * m, Scalar(0));
  const Scalar* av = a.value().data();
  const Scalar* bv = b.value().data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t kk = 0; kk < k; ++kk) {
      const Scalar aik = av[i * k + kk];
      if (aik == Scalar(0)) continue;
      const Scalar* brow = bv + kk * m;
      Scalar* crow = out.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aik * brow[j];
    }
  detail::Node* na = a.node();
  detail::Node* nb = b.node();
  Graph* g = na->graph;
  return g->make_op(
      {n, m}, std::move(out), {na, nb}, [n, k, m](detail::Node& node) {
        detail::Node* pa = node.parents[0];
        detail::Node* pb = node.parents[1];
        const Scalar* dc = node.grad().data();
        if (pa->requires_grad) {
          pa->ensure_grad_alloc();
          Scalar* da = pa->grad().data();
          const Scalar* bv = pb->value().data();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
              const Scalar d = dc[i * m + j];
              if (d == Scalar(0)) continue;
              const Scalar* brow = bv + j;
              Scalar* arow = da + i * k;
              for (std::size_t kk = 0; kk < k; ++kk)
                arow[kk] += d * brow[kk * m];
            }
        }
        if (pb->requires_grad) {
          pb->ensure_grad_alloc();
          Scalar* db = pb->grad().data();
          const Scalar* av = pa->value().data();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t kk = 0; kk < k; ++kk) {
              const Scalar aik = av[i * k + kk];
              if (aik == Scalar(0)) continue;
              const Scalar* drow = dc + i * m;
              Scalar* brow = db + kk * m;
              for (std::size_t j = 0; j < m; ++j) brow[j] += aik * drow[j];
            }
        }
      });
}

// [n x k] . [m x k]^T -> [n x m]
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  detail::require_2d(a, "matmul_nt");
  detail::require_2d(b, "matmul_nt");
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  if (b.cols() != k)
    throw ShapeError("matmul_nt: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  std::vector<Scalar> out(n * m, Scalar(0));
  const Scalar* av = a.value().data();
  const Scalar* bv = b.value().data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      Scalar acc = 0;
      const Scalar* arow = av + i * k;
      const Scalar* brow = bv + j * k;
      for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      out[i * m + j] = acc;
    }
  detail::Node* na = a.node();
  detail::Node* nb = b.node();
  Graph* g = na->graph;
  return g->make_op(
      {n, m}, std::move(out), {na, nb}, [n, k, m](detail::Node& node) {
        detail::Node* pa = node.parents[0];
        detail::Node* pb = node.parents[1];
        const Scalar* dc = node.grad().data();
        if (pa->requires_grad) {
          pa->ensure_grad_alloc();
          Scalar* da = pa->grad().data();
          const Scalar* bv = pb->value().data();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
              const Scalar d = dc[i * m + j];
              if (d == Scalar(0)) continue;
              const Scalar* brow = bv + j * k;
              Scalar* arow = da + i * k;
              for (std::size_t kk = 0; kk < k; ++kk) arow[kk] += d * brow[kk];
            }
        }
        if (pb->requires_grad) {
          pb->ensure_grad_alloc();
          Scalar* db = pb->grad().data();
          const Scalar* av = pa->value().data();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
              const Scalar d = dc[i * m + j];
              if (d == Scalar(0)) continue;
              const Scalar* arow = av + i * k;
              Scalar* brow = db + j * k;
              for (std::size_t kk = 0; kk < k; ++kk) brow[kk] += d * arow[kk];
            }
        }
      });
}

// Same-shape elementwise add, or [n x m] + [m] with the vector broadcast
// over rows (the only broadcast the model needs).
inline Tensor add(const Tensor& a, const Tensor& b) {
  const bool same = a.shape() == b.shape();
  const bool row_bcast = a.shape().size() == 2 && b.shape().size() == 1 &&
                         b.shape()[0] == a.shape()[1];
  if (!same && !row_bcast)
    throw ShapeError("add: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  std::vector<Scalar> out(a.value());
  const std::vector<Scalar>& bv = b.value();
  if (same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  } else {
    const std::size_t m = b.shape()[0];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % m];
  }
  detail::Node* na = a.node();
  detail::Node* nb = b.node();
  Graph* g = na->graph;
  return g->make_op(a.shape(), std::move(out), {na, nb},
                    [same](detail::Node& node) {
                      detail::Node* pa = node.parents[0];
                      detail::Node* pb = node.parents[1];
                      const std::vector<Scalar>& dg = node.grad();
                      detail::accumulate(pa, dg);
                      if (!pb->requires_grad) return;
                      pb->ensure_grad_alloc();
                      std::vector<Scalar>& db = pb->grad();
                      if (same) {
                        for (std::size_t i = 0; i < dg.size(); ++i)
                          db[i] += dg[i];
                      } else {
                        const std::size_t m = db.size();
                        for (std::size_t i = 0; i < dg.size(); ++i)
                          db[i % m] += dg[i];
                      }
                    });
}

inline Tensor scale(const Tensor& a, Scalar c) {
  std::vector<Scalar> out(a.value());
  for (Scalar& v : out) v *= c;
  Graph* g = a.node()->graph;
  return g->make_op(a.shape(), std::move(out), {a.node()},
                    [c](detail::Node& node) {
                      detail::Node* p = node.parents[0];
                      if (!p->requires_grad) return;
                      p->ensure_grad_alloc();
                      const std::vector<Scalar>& dg = node.grad();
                      std::vector<Scalar>& dp = p->grad();
                      for (std::size_t i = 0; i < dg.size(); ++i)
                        dp[i] += c * dg[i];
                    });
}

// Concatenate 2-d tensors along rows (axis 0) or columns (axis 1).
inline Tensor concat(const std::vector<Tensor>& xs, std::size_t axis) {
  if (xs.empty()) throw ValueError("concat: no inputs");
  if (axis > 1) throw ValueError("concat: axis must be 0 or 1");
  for (const Tensor& t : xs) detail::require_2d(t, "concat");
  const std::size_t fixed =
      axis == 0 ? xs.front().cols() : xs.front().rows();
  std::size_t total = 0;
  for (const Tensor& t : xs) {
    const std::size_t f = axis == 0 ? t.cols() : t.rows();
    if (f != fixed)
      throw ShapeError("concat: " + shape_str(xs.front().shape()) + " vs " +
                       shape_str(t.shape()));
    total += axis == 0 ? t.rows() : t.cols();
  }
  const std::size_t rows = axis == 0 ? total : fixed;
  const std::size_t cols = axis == 0 ? fixed : total;
  std::vector<Scalar> out(rows * cols);
  std::vector<detail::Node*> parents;
  std::vector<std::size_t> extents;
  parents.reserve(xs.size());
  for (const Tensor& t : xs) {
    parents.push_back(t.node());
    extents.push_back(axis == 0 ? t.rows() : t.cols());
  }
  if (axis == 0) {
    std::size_t r0 = 0;
    for (const Tensor& t : xs) {
      std::copy(t.value().begin(), t.value().end(), out.begin() + r0 * cols);
      r0 += t.rows();
    }
  } else {
    std::size_t c0 = 0;
    for (const Tensor& t : xs) {
      const std::size_t w = t.cols();
      for (std::size_t i = 0; i < rows; ++i)
        std::copy(t.value().begin() + i * w, t.value().begin() + (i + 1) * w,
                  out.begin() + i * cols + c0);
      c0 += w;
    }
  }
  Graph* g = xs.front().node()->graph;
  return g->make_op(
      {rows, cols}, std::move(out), std::move(parents),
      [axis, extents, rows, cols](detail::Node& node) {
        const std::vector<Scalar>& dg = node.grad();
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < node.parents.size(); ++pi) {
          detail::Node* p = node.parents[pi];
          const std::size_t ext = extents[pi];
          if (p->requires_grad) {
            p->ensure_grad_alloc();
            std::vector<Scalar>& dp = p->grad();
            if (axis == 0) {
              for (std::size_t i = 0; i < ext * cols; ++i)
                dp[i] += dg[off * cols + i];
            } else {
              for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < ext; ++j)
                  dp[i * ext + j] += dg[i * cols + off + j];
            }
          }
          off += ext;
        }
      });
}

// table [V x d], ids -> [ids.size() x d]
inline Tensor embedding_lookup(const Tensor& table,
                               const std::vector<int>& ids) {
  detail::require_2d(table, "embedding_lookup");
  const std::size_t v = table.rows(), d = table.cols();
  std::vector<Scalar> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= v)
      throw ValueError("embedding_lookup: id " + std::to_string(id) +
                       " outside table " + shape_str(table.shape()));
    std::copy(table.value().begin() + id * d,
              table.value().begin() + (id + 1) * d, out.begin() + i * d);
  }
  Graph* g = table.node()->graph;
  return g->make_op({ids.size(), d}, std::move(out), {table.node()},
                    [ids, d](detail::Node& node) {
                      detail::Node* p = node.parents[0];
                      if (!p->requires_grad) return;
                      p->ensure_grad_alloc();
                      const std::vector<Scalar>& dg = node.grad();
                      std::vector<Scalar>& dp = p->grad();
                      for (std::size_t i = 0; i < ids.size(); ++i) {
                        const std::size_t r =
                            static_cast<std::size_t>(ids[i]);
                        for (std::size_t j = 0; j < d; ++j)
                          dp[r * d + j] += dg[i * d + j];
                      }
                    });
}

// x [n x d], row indices (repeats allowed) -> [rows.size() x d]
inline Tensor gather_rows(const Tensor& x, const std::vector<int>& rows) {
  detail::require_2d(x, "gather_rows");
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<Scalar> out(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int r = rows[i];
    if (r < 0 || static_cast<std::size_t>(r) >= n)
      throw ValueError("gather_rows: row " + std::to_string(r) +
                       " outside " + shape_str(x.shape()));
    std::copy(x.value().begin() + r * d, x.value().begin() + (r + 1) * d,
              out.begin() + i * d);
  }
  Graph* g = x.node()->graph;
  return g->make_op({rows.size(), d}, std::move(out), {x.node()},
                    [rows, d](detail::Node& node) {
                      detail::Node* p = node.parents[0];
                      if (!p->requires_grad) return;
                      p->ensure_grad_alloc();
                      const std::vector<Scalar>& dg = node.grad();
                      std::vector<Scalar>& dp = p->grad();
                      for (std::size_t i = 0; i < rows.size(); ++i) {
                        const std::size_t r =
                            static_cast<std::size_t>(rows[i]);
                        for (std::size_t j = 0; j < d; ++j)
                          dp[r * d + j] += dg[i * d + j];
                      }
                    });
}

// [1 x d] -> [n x d]
inline Tensor tile_rows(const Tensor& row, std::size_t n) {
  detail::require_2d(row, "tile_rows");
  if (row.rows() != 1)
    throw ShapeError("tile_rows: expected [1 x d], got " +
                     shape_str(row.shape()));
  const std::size_t d = row.cols();
  std::vector<Scalar> out(n * d);
  for (std::size_t i = 0; i < n; ++i)
    std::copy(row.value().begin(), row.value().end(), out.begin() + i * d);
  Graph* g = row.node()->graph;
  return g->make_op({n, d}, std::move(out), {row.node()},
                    [n, d](detail::Node& node) {
                      detail::Node* p = node.parents[0];
                      if (!p->requires_grad) return;
                      p->ensure_grad_alloc();
                      const std::vector<Scalar>& dg = node.grad();
                      std::vector<Scalar>& dp = p->grad();
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < d; ++j)
                          dp[j] += dg[i * d + j];
                    });
}

// Row-wise softmax over unmasked positions; masked positions get exactly 0
// probability. Every row must keep at least one position.
inline Tensor masked_softmax(const Tensor& logits, const Mask& mask) {
  detail::require_2d(logits, "masked_softmax");
  const std::size_t n = logits.rows(), m = logits.cols();
  const bool bcast = mask.shape.size() == 1;
  if (bcast ? mask.shape[0] != m
            : (mask.shape.size() != 2 || mask.shape[0] != n ||
               mask.shape[1] != m))
    throw ShapeError("masked_softmax: logits " + shape_str(logits.shape()) +
                     " vs mask " + shape_str(mask.shape));
  std::vector<Scalar> out(n * m, Scalar(0));
  const Scalar* lv = logits.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* krow = bcast ? mask.keep.data() : mask.keep.data() + i * m;
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    std::size_t kept = 0;
    for (std::size_t j = 0; j < m; ++j)
      if (krow[j]) {
        ++kept;
        mx = std::max(mx, lv[i * m + j]);
      }
    if (kept == 0)
      throw DegenerateMaskError("masked_softmax: row " + std::to_string(i) +
                                " has no unmasked position");
    Scalar z = 0;
    for (std::size_t j = 0; j < m; ++j)
      if (krow[j]) {
        const Scalar e = std::exp(lv[i * m + j] - mx);
        out[i * m + j] = e;
        z += e;
      }
    for (std::size_t j = 0; j < m; ++j)
      if (krow[j]) out[i * m + j] /= z;
  }
  Graph* g = logits.node()->graph;
  return g->make_op(
      {n, m}, std::move(out), {logits.node()}, [n, m](detail::Node& node) {
        detail::Node* p = node.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad_alloc();
        const std::vector<Scalar>& pv = node.value();
        const std::vector<Scalar>& dg = node.grad();
        std::vector<Scalar>& dp = p->grad();
        for (std::size_t i = 0; i < n; ++i) {
          Scalar dot = 0;
          for (std::size_t j = 0; j < m; ++j)
            dot += pv[i * m + j] * dg[i * m + j];
          for (std::size_t j = 0; j < m; ++j)
            dp[i * m + j] += pv[i * m + j] * (dg[i * m + j] - dot);
        }
      });
}

inline Tensor softmax_rows(const Tensor& logits) {
  return masked_softmax(logits, Mask::full(logits.rows(), logits.cols()));
}

// Per-row normalization with learned gain/bias of width d.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain,
                         const Tensor& bias, Scalar eps = Scalar(1e-5)) {
  detail::require_2d(x, "layer_norm");
  const std::size_t n = x.rows(), d = x.cols();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d})
    throw ShapeError("layer_norm: x " + shape_str(x.shape()) + " gain " +
                     shape_str(gain.shape()) + " bias " +
                     shape_str(bias.shape()));
  std::vector<Scalar> out(n * d), xhat(n * d), inv_std(n);
  const Scalar* xv = x.value().data();
  const Scalar* gv = gain.value().data();
  const Scalar* bv = bias.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    Scalar mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += xv[i * d + j];
    mu /= static_cast<Scalar>(d);
    Scalar var = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const Scalar c = xv[i * d + j] - mu;
      var += c * c;
    }
    var /= static_cast<Scalar>(d);
    const Scalar is = Scalar(1) / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const Scalar h = (xv[i * d + j] - mu) * is;
      xhat[i * d + j] = h;
      out[i * d + j] = gv[j] * h + bv[j];
    }
  }
  Graph* g = x.node()->graph;
  return g->make_op(
      {n, d}, std::move(out), {x.node(), gain.node(), bias.node()},
      [n, d, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](detail::Node& node) {
        detail::Node* px = node.parents[0];
        detail::Node* pg = node.parents[1];
        detail::Node* pb = node.parents[2];
        const std::vector<Scalar>& dy = node.grad();
        const std::vector<Scalar>& gv = pg->value();
        if (pg->requires_grad) {
          pg->ensure_grad_alloc();
          std::vector<Scalar>& dg = pg->grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
              dg[j] += dy[i * d + j] * xhat[i * d + j];
        }
        if (pb->requires_grad) {
          pb->ensure_grad_alloc();
          std::vector<Scalar>& db = pb->grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) db[j] += dy[i * d + j];
        }
        if (px->requires_grad) {
          px->ensure_grad_alloc();
          std::vector<Scalar>& dx = px->grad();
          for (std::size_t i = 0; i < n; ++i) {
            Scalar s1 = 0, s2 = 0;
            for (std::size_t j = 0; j < d; ++j) {
              const Scalar dxh = dy[i * d + j] * gv[j];
              s1 += dxh;
              s2 += dxh * xhat[i * d + j];
            }
            s1 /= static_cast<Scalar>(d);
            s2 /= static_cast<Scalar>(d);
            for (std::size_t j = 0; j < d; ++j) {
              const Scalar dxh = dy[i * d + j] * gv[j];
              dx[i * d + j] +=
                  (dxh - s1 - xhat[i * d + j] * s2) * inv_std[i];
            }
          }
        }
      });
}

inline Tensor relu(const Tensor& x) {
  std::vector<Scalar> out(x.value());
  for (Scalar& v : out) v = v > Scalar(0) ? v : Scalar(0);
  Graph* g = x.node()->graph;
  return g->make_op(x.shape(), std::move(out), {x.node()},
                    [](detail::Node& node) {
                      detail::Node* p = node.parents[0];
                      if (!p->requires_grad) return;
                      p->ensure_grad_alloc();
                      const std::vector<Scalar>& xv = p->value();
                      const std::vector<Scalar>& dg = node.grad();
                      std::vector<Scalar>& dp = p->grad();
                      for (std::size_t i = 0; i < dg.size(); ++i)
                        if (xv[i] > Scalar(0)) dp[i] += dg[i];
                    });
}

inline Tensor sigmoid(const Tensor& x) {
  std::vector<Scalar> out(x.value());
  for (Scalar& v : out) v = Scalar(1) / (Scalar(1) + std::exp(-v));
  Graph* g = x.node()->graph;
  return g->make_op(x.shape(), std::move(out), {x.node()},
                    [](detail::Node& node) {
                      detail::Node* p = node.parents[0];
                      if (!p->requires_grad) return;
                      p->ensure_grad_alloc();
                      const std::vector<Scalar>& sv = node.value();
                      const std::vector<Scalar>& dg = node.grad();
                      std::vector<Scalar>& dp = p->grad();
                      for (std::size_t i = 0; i < dg.size(); ++i)
                        dp[i] += dg[i] * sv[i] * (Scalar(1) - sv[i]);
                    });
}

// Columnwise max over rows [first, last] (inclusive) of x [n x d] -> [1 x d].
// Gradient routes to the first maximizing row of each column.
inline Tensor max_pool_over_positions(const Tensor& x, std::size_t first,
                                      std::size_t last) {
  detail::require_2d(x, "max_pool_over_positions");
  const std::size_t n = x.rows(), d = x.cols();
  if (first > last || last >= n)
    throw ValueError("max_pool_over_positions: span [" +
                     std::to_string(first) + "," + std::to_string(last) +
                     "] outside " + shape_str(x.shape()));
  std::vector<Scalar> out(d);
  std::vector<std::size_t> arg(d);
  const Scalar* xv = x.value().data();
  for (std::size_t j = 0; j < d; ++j) {
    Scalar best = xv[first * d + j];
    std::size_t bi = first;
    for (std::size_t i = first + 1; i <= last; ++i)
      if (xv[i * d + j] > best) {
        best = xv[i * d + j];
        bi = i;
      }
    out[j] = best;
    arg[j] = bi;
  }
  Graph* g = x.node()->graph;
  return g->make_op({1, d}, std::move(out), {x.node()},
                    [d, arg = std::move(arg)](detail::Node& node) {
                      detail::Node* p = node.parents[0];
                      if (!p->requires_grad) return;
                      p->ensure_grad_alloc();
                      const std::vector<Scalar>& dg = node.grad();
                      std::vector<Scalar>& dp = p->grad();
                      for (std::size_t j = 0; j < d; ++j)
                        dp[arg[j] * d + j] += dg[j];
                    });
}

inline Tensor mean_pool_over_positions(const Tensor& x, std::size_t first,
                                       std::size_t last) {
  detail::require_2d(x, "mean_pool_over_positions");
  const std::size_t n = x.rows(), d = x.cols();
  if (first > last || last >= n)
    throw ValueError("mean_pool_over_positions: span [" +
                     std::to_string(first) + "," + std::to_string(last) +
                     "] outside " + shape_str(x.shape()));
  const std::size_t w = last - first + 1;
  std::vector<Scalar> out(d, Scalar(0));
  const Scalar* xv = x.value().data();
  for (std::size_t i = first; i <= last; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += xv[i * d + j];
  for (Scalar& v : out) v /= static_cast<Scalar>(w);
  Graph* g = x.node()->graph;
  return g->make_op({1, d}, std::move(out), {x.node()},
                    [d, first, last, w](detail::Node& node) {
                      detail::Node* p = node.parents[0];
                      if (!p->requires_grad) return;
                      p->ensure_grad_alloc();
                      const std::vector<Scalar>& dg = node.grad();
                      std::vector<Scalar>& dp = p->grad();
                      const Scalar inv = Scalar(1) / static_cast<Scalar>(w);
                      for (std::size_t i = first; i <= last; ++i)
                        for (std::size_t j = 0; j < d; ++j)
                          dp[i * d + j] += dg[j] * inv;
                    });
}

// Inverted dropout; identity when train is false. Mask bits are drawn from
// the run's generator in index order.
inline Tensor dropout(const Tensor& x, double p, bool train, Rng& rng) {
  if (p <= 0.0 || p >= 1.0)
    throw ValueError("dropout: rate must be in (0, 1), got " +
                     std::to_string(p));
  if (!train) return x;
  const Scalar keep_scale = Scalar(1.0 / (1.0 - p));
  std::vector<Scalar> out(x.value());
  std::vector<std::uint8_t> keep(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    keep[i] = rng.uniform() >= p ? 1 : 0;
    out[i] = keep[i] ? out[i] * keep_scale : Scalar(0);
  }
  Graph* g = x.node()->graph;
  return g->make_op(x.shape(), std::move(out), {x.node()},
                    [keep = std::move(keep), keep_scale](detail::Node& node) {
                      detail::Node* pn = node.parents[0];
                      if (!pn->requires_grad) return;
                      pn->ensure_grad_alloc();
                      const std::vector<Scalar>& dg = node.grad();
                      std::vector<Scalar>& dp = pn->grad();
                      for (std::size_t i = 0; i < dg.size(); ++i)
                        if (keep[i]) dp[i] += dg[i] * keep_scale;
                    });
}

// logits [n x k], integer targets of length n -> scalar.
inline Tensor cross_entropy(const Tensor& logits,
                            const std::vector<int>& targets,
                            Reduction red = Reduction::Mean) {
  detail::require_2d(logits, "cross_entropy");
  const std::size_t n = logits.rows(), k = logits.cols();
  if (targets.size() != n)
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                     " targets for " + shape_str(logits.shape()));
  const Scalar* lv = logits.value().data();
  std::vector<Scalar> probs(n * k);
  Scalar loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int t = targets[i];
    if (t < 0 || static_cast<std::size_t>(t) >= k)
      throw ValueError("cross_entropy: target " + std::to_string(t) +
                       " outside " + std::to_string(k) + " classes");
    Scalar mx = lv[i * k];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, lv[i * k + j]);
    Scalar z = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const Scalar e = std::exp(lv[i * k + j] - mx);
      probs[i * k + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] /= z;
    loss += std::log(z) + mx - lv[i * k + static_cast<std::size_t>(t)];
  }
  const Scalar norm =
      red == Reduction::Mean ? Scalar(1) / static_cast<Scalar>(n) : Scalar(1);
  loss *= norm;
  Graph* g = logits.node()->graph;
  return g->make_op(
      {1}, {loss}, {logits.node()},
      [n, k, targets, norm, probs = std::move(probs)](detail::Node& node) {
        detail::Node* p = node.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad_alloc();
        const Scalar go = node.grad()[0] * norm;
        std::vector<Scalar>& dp = p->grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            Scalar d = probs[i * k + j];
            if (j == static_cast<std::size_t>(targets[i])) d -= Scalar(1);
            dp[i * k + j] += go * d;
          }
      });
}

// Elementwise stable BCE on raw logits against 0/1 targets -> scalar.
inline Tensor binary_cross_entropy_with_logits(
    const Tensor& logits, const std::vector<Scalar>& targets,
    Reduction red = Reduction::Sum) {
  const std::size_t n = logits.numel();
  if (targets.size() != n)
    throw ShapeError("binary_cross_entropy_with_logits: " +
                     std::to_string(targets.size()) + " targets for " +
                     shape_str(logits.shape()));
  const Scalar* lv = logits.value().data();
  Scalar loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar x = lv[i];
    loss += std::max(x, Scalar(0)) - x * targets[i] +
            std::log1p(std::exp(-std::abs(x)));
  }
  const Scalar norm =
      red == Reduction::Mean ? Scalar(1) / static_cast<Scalar>(n) : Scalar(1);
  loss *= norm;
  Graph* g = logits.node()->graph;
  return g->make_op({1}, {loss}, {logits.node()},
                    [targets, norm](detail::Node& node) {
                      detail::Node* p = node.parents[0];
                      if (!p->requires_grad) return;
                      p->ensure_grad_alloc();
                      const Scalar go = node.grad()[0] * norm;
                      const std::vector<Scalar>& xv = p->value();
                      std::vector<Scalar>& dp = p->grad();
                      for (std::size_t i = 0; i < dp.size(); ++i) {
                        const Scalar s =
                            Scalar(1) / (Scalar(1) + std::exp(-xv[i]));
                        dp[i] += go * (s - targets[i]);
                      }
                    });
}

inline Tensor sum(const Tensor& x) {
  Scalar s = std::accumulate(x.value().begin(), x.value().end(), Scalar(0));
  Graph* g = x.node()->graph;
  return g->make_op({1}, {s}, {x.node()}, [](detail::Node& node) {
    detail::Node* p = node.parents[0];
    if (!p->requires_grad) return;
    p->ensure_grad_alloc();
    const Scalar go = node.grad()[0];
    for (Scalar& v : p->grad()) v += go;
  });
}

}  // namespace argex
