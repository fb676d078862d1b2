#pragma once

// L-layer Transformer in which head 0 of every layer is a dependency-based
// attention head: its keys and values are restricted to each token's parse
// neighbors (head and children). The head output is the concatenation of the
// attention sum and the token's own linearly projected representation,
// projected back to the common head width. The remaining heads and the
// post-attention sublayers are standard.

#include <string>
#include <vector>

#include "argex/nn.hpp"
#include "argex/params.hpp"

namespace argex {

struct NeighborSets {
  std::vector<std::vector<int>> nbr;  // sorted, unique, never empty

  std::size_t size() const { return nbr.size(); }

  // nbr(i) = {head(i)} union children(i); the root contributes children
  // only; a token with no neighbor (single-token sentence) falls back to
  // itself.
  static NeighborSets from_heads(const std::vector<int>& dep_heads) {
    const std::size_t t = dep_heads.size();
    NeighborSets s;
    s.nbr.assign(t, {});
    for (std::size_t i = 0; i < t; ++i) {
      const int h = dep_heads[i];
      if (h < 0) continue;
      s.nbr[i].push_back(h);
      s.nbr[static_cast<std::size_t>(h)].push_back(static_cast<int>(i));
    }
    s.normalize();
    return s;
  }

  // Piece-level sets from the subword projection.
  static NeighborSets from_sets(std::vector<std::vector<int>> sets) {
    NeighborSets s;
    s.nbr = std::move(sets);
    s.normalize();
    return s;
  }

  Mask to_mask() const {
    const std::size_t t = nbr.size();
    Mask m{{t, t}, std::vector<std::uint8_t>(t * t, 0)};
    for (std::size_t i = 0; i < t; ++i)
      for (int j : nbr[i]) m.keep[i * t + static_cast<std::size_t>(j)] = 1;
    return m;
  }

 private:
  void normalize() {
    for (std::size_t i = 0; i < nbr.size(); ++i) {
      auto& v = nbr[i];
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      if (v.empty()) v.push_back(static_cast<int>(i));
    }
  }
};

struct SyntaxConfig {
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_model = 64;
  std::size_t d_ff = 128;
  double dropout = 0.1;
  bool use_d_head = true;  // ablation: false turns layer 0's slot into a
                           // standard head, giving a vanilla Transformer
};

// Per-layer attention matrices captured in eval mode for the support
// invariant test and the debug JSON dump. probs[l][h] is row-major T x T.
struct AttentionTrace {
  std::vector<std::vector<std::vector<Scalar>>> probs;
};

class SyntaxTransformer {
 public:
  SyntaxTransformer(ParameterStore& ps, const SyntaxConfig& cfg, Rng& rng)
      : cfg_(cfg) {
    if (cfg_.n_heads == 0 || cfg_.d_model % cfg_.n_heads != 0)
      throw ConfigError("syntax: d_model must be divisible by n_heads");
    const std::size_t d_head = cfg_.d_model / cfg_.n_heads;
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      const std::string prefix = "syntax.l" + std::to_string(l);
      Layer layer;
      for (std::size_t h = 0; h < cfg_.n_heads; ++h)
        layer.heads.push_back(nn::AttentionHead::create(
            ps, prefix + ".h" + std::to_string(h), cfg_.d_model, d_head, rng));
      if (cfg_.use_d_head) {
        layer.own_proj = nn::Linear::create(ps, prefix + ".dhead.w1",
                                            cfg_.d_model, d_head, rng,
                                            /*bias=*/false);
        layer.out_proj = nn::Linear::create(ps, prefix + ".dhead.w2",
                                            2 * d_head, d_head, rng,
                                            /*bias=*/false);
      }
      layer.attn_out = nn::Linear::create(ps, prefix + ".attn_out",
                                          cfg_.d_model, cfg_.d_model, rng,
                                          true, 0.1);
      layer.tail =
          nn::BlockTail::create(ps, prefix, cfg_.d_model, cfg_.d_ff, rng);
      layers_.push_back(std::move(layer));
    }
  }

  const SyntaxConfig& config() const { return cfg_; }

  // U^L; with zero layers this is the identity.
  Tensor forward(Graph& g, const Tensor& u0, const NeighborSets& nbrs,
                 bool train, Rng& rng, AttentionTrace* trace = nullptr) const {
    if (u0.rows() != nbrs.size())
      throw ShapeError("syntax forward: " + std::to_string(u0.rows()) +
                       " rows vs " + std::to_string(nbrs.size()) +
                       " neighbor sets");
    Tensor u = u0;
    const Mask nbr_mask =
        layers_.empty() || !cfg_.use_d_head ? Mask{} : nbrs.to_mask();
    if (trace) trace->probs.assign(layers_.size(), {});
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& layer = layers_[l];
      std::vector<Tensor> head_out;
      head_out.reserve(layer.heads.size());
      if (trace) (*trace).probs[l].resize(layer.heads.size());
      for (std::size_t h = 0; h < layer.heads.size(); ++h) {
        std::vector<Scalar>* capture =
            trace ? &(*trace).probs[l][h] : nullptr;
        if (h == 0 && cfg_.use_d_head) {
          // Attention restricted to parse neighbors, concatenated with the
          // token's own projected representation.
          Tensor att = layer.heads[h](g, u, &nbr_mask, capture);
          Tensor own = layer.own_proj(g, u);
          head_out.push_back(layer.out_proj(g, concat({own, att}, 1)));
        } else {
          head_out.push_back(layer.heads[h](g, u, nullptr, capture));
        }
      }
      Tensor attn = layer.attn_out(g, concat(head_out, 1));
      u = layer.tail(g, u, attn, cfg_.dropout, train, rng);
    }
    return u;
  }

 private:
  struct Layer {
    std::vector<nn::AttentionHead> heads;
    nn::Linear own_proj;  // W1
    nn::Linear out_proj;  // W2 over [own ; attended]
    nn::Linear attn_out;
    nn::BlockTail tail;
  };

  SyntaxConfig cfg_;
  std::vector<Layer> layers_;
};

}  // namespace argex
