#pragma once

// Trigger-aware token representation: every row t is the concatenation of
// the contextual embedding b_t, the trigger-type embedding, the in/out
// trigger indicator embedding, and the max-pooled trigger embedding shared
// by all rows. A learned linear map reconciles the concatenation width with
// the syntax transformer width. Ablation flags drop individual blocks.

#include <string>

#include "argex/embedder.hpp"
#include "argex/nn.hpp"
#include "argex/params.hpp"

namespace argex {

struct TriggerEncoderConfig {
  std::size_t d_type = 50;
  std::size_t d_ind = 50;
  std::size_t d_model = 64;
  bool use_trigger_type = true;       // TT: type embedding block
  bool use_trigger_indicator = true;  // TI: indicator embedding block
  bool use_trigger_embedding = true;  // TE: pooled trigger block
  bool proj_bias = true;
};

class TriggerEncoder {
 public:
  TriggerEncoder(ParameterStore& ps, const TriggerEncoderConfig& cfg,
                 std::size_t n_trigger_types, std::size_t d_tok, Rng& rng)
      : cfg_(cfg), n_types_(n_trigger_types), d_tok_(d_tok) {
    if (cfg_.use_trigger_type)
      p_table_ = &init::gaussian_table(ps, "trigenc.type_table", n_types_,
                                       cfg_.d_type, rng);
    if (cfg_.use_trigger_indicator)
      l_table_ = &init::gaussian_table(ps, "trigenc.ind_table", 2, cfg_.d_ind,
                                       rng);
    proj_ = nn::Linear::create(ps, "trigenc.proj", concat_width(),
                               cfg_.d_model, rng, cfg_.proj_bias);
  }

  std::size_t concat_width() const {
    std::size_t d = d_tok_;
    if (cfg_.use_trigger_type) d += cfg_.d_type;
    if (cfg_.use_trigger_indicator) d += cfg_.d_ind;
    if (cfg_.use_trigger_embedding) d += d_tok_;
    return d;
  }

  const TriggerEncoderConfig& config() const { return cfg_; }

  // C: row t = [b_t ; p_type ; l_(t in trigger) ; h_trigger].
  Tensor encode(Graph& g, const Tensor& b, Span trigger, int type_idx) const {
    const std::size_t t = b.rows();
    if (type_idx < 0 || static_cast<std::size_t>(type_idx) >= n_types_)
      throw ValueError("encode: unknown event type index " +
                       std::to_string(type_idx));
    if (trigger.start > trigger.end || trigger.end >= t)
      throw ValueError("encode: trigger span outside sentence");
    std::vector<Tensor> blocks{b};
    if (cfg_.use_trigger_type)
      blocks.push_back(
          tile_rows(embedding_lookup(g.leaf(*p_table_), {type_idx}), t));
    if (cfg_.use_trigger_indicator) {
      std::vector<int> ind(t, 0);
      for (std::size_t i = trigger.start; i <= trigger.end; ++i) ind[i] = 1;
      blocks.push_back(embedding_lookup(g.leaf(*l_table_), ind));
    }
    if (cfg_.use_trigger_embedding)
      blocks.push_back(tile_rows(
          max_pool_over_positions(b, trigger.start, trigger.end), t));
    return blocks.size() == 1 ? blocks[0] : concat(blocks, 1);
  }

  // U0: learned width reconciliation into the syntax transformer.
  Tensor project(Graph& g, const Tensor& c) const { return proj_(g, c); }

 private:
  TriggerEncoderConfig cfg_;
  std::size_t n_types_;
  std::size_t d_tok_;
  Parameter* p_table_ = nullptr;
  Parameter* l_table_ = nullptr;
  nn::Linear proj_;
};

}  // namespace argex
