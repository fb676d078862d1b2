#pragma once

// Role-specific argument decoding in both settings. With entities: one
// independent binary classifier per permissible role over pooled entity
// spans (multi-label, so one span can carry several roles). Without: one
// 3-way BIO tagger per role. Plus the auxiliary trigger tagger over the
// shared embedder output.

#include <string>
#include <vector>

#include "argex/data.hpp"
#include "argex/nn.hpp"
#include "argex/params.hpp"

namespace argex {

enum class Pooling { Max, Mean };

struct DecoderConfig {
  std::size_t d_model = 64;
  std::size_t d_tok = 64;
  double threshold = 0.5;  // emit when sigmoid score >= threshold
  Pooling entity_pooling = Pooling::Max;
  std::vector<std::string> entity_type_filter;  // empty = no filtering
};

struct RolePrediction {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string role;
  double score = 0.0;
  std::string source;  // "entity-mode" | "tagger-mode"
  bool operator==(const RolePrediction&) const = default;
};

struct TriggerPrediction {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;
};

// B/I/O indices used by the per-role taggers.
enum : int { kTagB = 0, kTagI = 1, kTagO = 2 };

// Relaxed BIO decoding: B always opens a span, I continues one and opens its
// own when none is open (orphan I), O closes. Spans are inclusive.
inline std::vector<std::pair<std::size_t, std::size_t>> decode_bio(
    const std::vector<int>& tags) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  long open = -1;
  for (std::size_t t = 0; t < tags.size(); ++t) {
    switch (tags[t]) {
      case kTagB:
        if (open >= 0) spans.push_back({static_cast<std::size_t>(open), t - 1});
        open = static_cast<long>(t);
        break;
      case kTagI:
        if (open < 0) open = static_cast<long>(t);
        break;
      case kTagO:
        if (open >= 0) spans.push_back({static_cast<std::size_t>(open), t - 1});
        open = -1;
        break;
      default:
        throw ValueError("decode_bio: bad tag " + std::to_string(tags[t]));
    }
  }
  if (open >= 0)
    spans.push_back({static_cast<std::size_t>(open), tags.size() - 1});
  return spans;
}

class ArgumentDecoder {
 public:
  ArgumentDecoder(ParameterStore& ps, const RoleSchema& schema,
                  const DecoderConfig& cfg, Rng& rng)
      : schema_(schema), cfg_(cfg) {
    for (std::size_t r = 0; r < schema_.roles.size(); ++r) {
      role_cls_.push_back(nn::Linear::create(
          ps, "decoder.role" + std::to_string(r), cfg_.d_model, 1, rng));
      role_tag_.push_back(nn::Linear::create(
          ps, "decoder.tag" + std::to_string(r), cfg_.d_model, 3, rng));
    }
    trig_tag_ = nn::Linear::create(
        ps, "decoder.trig", cfg_.d_tok,
        2 * schema_.trigger_types.size() + 1, rng);
  }

  const DecoderConfig& config() const { return cfg_; }

  // ------------------------------------------------------------------
  // Entity mode
  // ------------------------------------------------------------------

  // Candidate entity indices after the optional type filter.
  std::vector<std::size_t> candidates(
      const std::vector<EntitySpan>& entities, std::size_t t) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entities.size(); ++i) {
      const EntitySpan& e = entities[i];
      if (e.start > e.end || e.end >= t)
        throw ValueError("entity span [" + std::to_string(e.start) + "," +
                         std::to_string(e.end) + "] outside sentence of " +
                         std::to_string(t) + " tokens");
      if (!cfg_.entity_type_filter.empty() &&
          std::find(cfg_.entity_type_filter.begin(),
                    cfg_.entity_type_filter.end(),
                    e.entity_type) == cfg_.entity_type_filter.end())
        continue;
      out.push_back(i);
    }
    return out;
  }

  std::vector<RolePrediction> classify_with_entities(
      Graph& g, const Tensor& u, const std::vector<EntitySpan>& entities,
      const std::string& event_type) const {
    std::vector<RolePrediction> out;
    const std::vector<std::size_t> cand = candidates(entities, u.rows());
    if (cand.empty()) return out;
    const auto& perm = schema_.permissible_roles(event_type);
    Tensor reps = pooled_reps(g, u, entities, cand);
    for (const std::string& role : perm) {
      const std::size_t r = static_cast<std::size_t>(schema_.role_index(role));
      Tensor scores = sigmoid(role_cls_[r](g, reps));
      for (std::size_t c = 0; c < cand.size(); ++c) {
        const double s = scores.value()[c];
        if (s >= cfg_.threshold) {
          const EntitySpan& e = entities[cand[c]];
          out.push_back({e.start, e.end, role, s, "entity-mode"});
        }
      }
    }
    return out;
  }

  // Binary cross-entropy summed over all permissible (candidate, role)
  // pairs; every non-gold pair is a negative.
  Tensor entity_mode_loss(Graph& g, const Tensor& u,
                          const std::vector<EntitySpan>& entities,
                          const EventRecord& gold) const {
    const std::vector<std::size_t> cand = candidates(entities, u.rows());
    const auto& perm = schema_.permissible_roles(gold.event_type);
    if (cand.empty() || perm.empty())
      return g.constant({1}, {Scalar(0)});
    Tensor reps = pooled_reps(g, u, entities, cand);
    std::vector<Tensor> logit_cols;
    std::vector<Scalar> targets;
    targets.reserve(cand.size() * perm.size());
    for (const std::string& role : perm) {
      const std::size_t r = static_cast<std::size_t>(schema_.role_index(role));
      logit_cols.push_back(role_cls_[r](g, reps));
    }
    Tensor logits = logit_cols.size() == 1 ? logit_cols[0]
                                           : concat(logit_cols, 1);
    // Row-major targets over [candidate x role].
    for (std::size_t c = 0; c < cand.size(); ++c) {
      const EntitySpan& e = entities[cand[c]];
      for (const std::string& role : perm) {
        bool is_gold = false;
        for (const ArgumentRecord& a : gold.arguments)
          if (a.start == e.start && a.end == e.end && a.role == role) {
            is_gold = true;
            break;
          }
        targets.push_back(is_gold ? Scalar(1) : Scalar(0));
      }
    }
    // concat(axis 1) lays rows out candidate-major per role column; rebuild
    // target order to match: targets above are candidate-major over roles,
    // logits are [cand x role] as well.
    return binary_cross_entropy_with_logits(logits, targets, Reduction::Sum);
  }

  // ------------------------------------------------------------------
  // Tagger mode
  // ------------------------------------------------------------------

  std::vector<RolePrediction> tag_without_entities(
      Graph& g, const Tensor& u, const std::string& event_type) const {
    std::vector<RolePrediction> out;
    for (const std::string& role : schema_.permissible_roles(event_type)) {
      const std::size_t r = static_cast<std::size_t>(schema_.role_index(role));
      Tensor probs = softmax_rows(role_tag_[r](g, u));
      const std::size_t t = u.rows();
      std::vector<int> tags(t);
      for (std::size_t i = 0; i < t; ++i) {
        const Scalar* row = probs.value().data() + i * 3;
        tags[i] = row[kTagB] >= row[kTagI] && row[kTagB] >= row[kTagO]
                      ? kTagB
                      : (row[kTagI] >= row[kTagO] ? kTagI : kTagO);
      }
      for (const auto& [s, e] : decode_bio(tags)) {
        double score = 0.0;
        for (std::size_t i = s; i <= e; ++i)
          score += probs.value()[i * 3 + static_cast<std::size_t>(tags[i])];
        score /= static_cast<double>(e - s + 1);
        out.push_back({s, e, role, score, "tagger-mode"});
      }
    }
    return out;
  }

  // Token-level cross-entropy summed over the permissible role taggers.
  Tensor tagger_mode_loss(Graph& g, const Tensor& u,
                          const EventRecord& gold) const {
    const std::size_t t = u.rows();
    std::optional<Tensor> loss;
    for (const std::string& role :
         schema_.permissible_roles(gold.event_type)) {
      const std::size_t r = static_cast<std::size_t>(schema_.role_index(role));
      std::vector<int> tags(t, kTagO);
      for (const ArgumentRecord& a : gold.arguments) {
        if (a.role != role) continue;
        tags[a.start] = kTagB;
        for (std::size_t i = a.start + 1; i <= a.end; ++i) tags[i] = kTagI;
      }
      Tensor l = cross_entropy(role_tag_[r](g, u), tags, Reduction::Sum);
      loss = loss ? add(*loss, l) : l;
    }
    return loss ? *loss : g.constant({1}, {Scalar(0)});
  }

  // ------------------------------------------------------------------
  // Auxiliary trigger tagging (shared embedder output)
  // ------------------------------------------------------------------

  // Tag layout: 0 = O, 1 + 2e = B of type e, 2 + 2e = I of type e.
  std::vector<int> gold_trigger_tags(
      std::size_t t, const std::vector<EventRecord>& events) const {
    std::vector<int> tags(t, 0);
    for (const EventRecord& ev : events) {
      const int e = schema_.trigger_index(ev.event_type);
      tags[ev.trigger_start] = 1 + 2 * e;
      for (std::size_t i = ev.trigger_start + 1; i <= ev.trigger_end; ++i)
        tags[i] = 2 + 2 * e;
    }
    return tags;
  }

  Tensor trigger_aux_loss(Graph& g, const Tensor& b,
                          const std::vector<EventRecord>& events) const {
    return cross_entropy(trig_tag_(g, b),
                         gold_trigger_tags(b.rows(), events),
                         Reduction::Mean);
  }

  std::vector<TriggerPrediction> tag_triggers(Graph& g,
                                              const Tensor& b) const {
    Tensor logits = trig_tag_(g, b);
    const std::size_t t = b.rows();
    const std::size_t k = logits.cols();
    std::vector<TriggerPrediction> out;
    long open = -1;
    int open_type = -1;
    auto close = [&](std::size_t end) {
      if (open >= 0)
        out.push_back({static_cast<std::size_t>(open), end,
                       schema_.trigger_types[static_cast<std::size_t>(
                           open_type)]});
      open = -1;
      open_type = -1;
    };
    for (std::size_t i = 0; i < t; ++i) {
      const Scalar* row = logits.value().data() + i * k;
      std::size_t best = 0;
      for (std::size_t j = 1; j < k; ++j)
        if (row[j] > row[best]) best = j;
      if (best == 0) {
        close(i == 0 ? 0 : i - 1);
        continue;
      }
      const int type = static_cast<int>((best - 1) / 2);
      const bool is_b = (best - 1) % 2 == 0;
      if (is_b || open < 0 || type != open_type) {
        close(i == 0 ? 0 : i - 1);
        open = static_cast<long>(i);
        open_type = type;
      }
    }
    close(t - 1);
    return out;
  }

 private:
  Tensor pooled_reps(Graph& g, const Tensor& u,
                     const std::vector<EntitySpan>& entities,
                     const std::vector<std::size_t>& cand) const {
    std::vector<Tensor> rows;
    rows.reserve(cand.size());
    for (std::size_t i : cand) {
      const EntitySpan& e = entities[i];
      rows.push_back(cfg_.entity_pooling == Pooling::Max
                         ? max_pool_over_positions(u, e.start, e.end)
                         : mean_pool_over_positions(u, e.start, e.end));
    }
    return rows.size() == 1 ? rows[0] : concat(rows, 0);
  }

  RoleSchema schema_;
  DecoderConfig cfg_;
  std::vector<nn::Linear> role_cls_;
  std::vector<nn::Linear> role_tag_;
  nn::Linear trig_tag_;
};

}  // namespace argex
