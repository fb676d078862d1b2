#pragma once

// Argument Identification / Role Classification scoring. An argument is
// AI-correct when its span matches a gold argument of the same event
// instance (doc, sentence, trigger span, event type); RC-correct when the
// role matches too. Matching is one-to-one. score_reference() recomputes
// both counts by exhaustive enumeration over injective assignments and must
// agree exactly with score().

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "argex/data.hpp"
#include "argex/errors.hpp"
#include "argex/synth.hpp"
#include <json.hpp>

namespace argex {

enum class MatchMode { ExactSpan, HeadToken };

struct ScoreReport {
  double ai_p = 0, ai_r = 0, ai_f1 = 0;
  double rc_p = 0, rc_r = 0, rc_f1 = 0;
  std::size_t n_gold = 0, n_pred = 0;
  std::size_t ai_correct = 0, rc_correct = 0;
};

namespace detail_eval {

struct Item {
  std::size_t start, end;
  std::string role;
};

using InstanceKey =
    std::tuple<std::string, std::string, std::size_t, std::size_t,
               std::string>;

inline void prf(std::size_t correct, std::size_t pred, std::size_t gold,
                double& p, double& r, double& f1) {
  p = pred ? static_cast<double>(correct) / static_cast<double>(pred) : 0.0;
  r = gold ? static_cast<double>(correct) / static_cast<double>(gold) : 0.0;
  f1 = (p + r) > 0 ? 2 * p * r / (p + r) : 0.0;
}

struct Instances {
  std::map<InstanceKey, std::vector<Item>> gold;
  std::map<InstanceKey, std::vector<Item>> pred;
  std::size_t n_gold = 0, n_pred = 0;
};

// Span identity under the chosen mode; head-token matching reduces a span to
// the token whose head lies outside it.
inline std::pair<std::size_t, std::size_t> span_id(
    const SentenceRecord& rec, std::size_t s, std::size_t e, MatchMode mode) {
  if (mode == MatchMode::ExactSpan) return {s, e};
  const std::size_t h = static_cast<std::size_t>(
      synth::span_head_token(rec, s, e));
  return {h, h};
}

inline Instances collect(const std::vector<PredictionLine>& preds,
                         const Corpus& gold, MatchMode mode) {
  std::map<std::pair<std::string, std::string>, const SentenceRecord*> index;
  for (const SentenceRecord& rec : gold.sentences)
    index[{rec.doc_id, rec.sent_id}] = &rec;
  Instances out;
  for (const SentenceRecord& rec : gold.sentences)
    for (const EventRecord& ev : rec.events) {
      InstanceKey key{rec.doc_id, rec.sent_id, ev.trigger_start,
                      ev.trigger_end, ev.event_type};
      auto& items = out.gold[key];
      for (const ArgumentRecord& a : ev.arguments) {
        const auto [s, e] = span_id(rec, a.start, a.end, mode);
        items.push_back({s, e, a.role});
        ++out.n_gold;
      }
    }
  for (const PredictionLine& p : preds) {
    auto it = index.find({p.doc_id, p.sent_id});
    if (it == index.end())
      throw ValueError("prediction references unknown sentence " + p.doc_id +
                       "/" + p.sent_id);
    InstanceKey key{p.doc_id, p.sent_id, p.trigger_start, p.trigger_end,
                    p.event_type};
    auto& items = out.pred[key];
    for (const PredArg& a : p.arguments) {
      const auto [s, e] = span_id(*it->second, a.start, a.end, mode);
      items.push_back({s, e, a.role});
      ++out.n_pred;
    }
  }
  return out;
}

inline ScoreReport finalize(std::size_t ai, std::size_t rc, std::size_t gold,
                            std::size_t pred) {
  ScoreReport r;
  r.n_gold = gold;
  r.n_pred = pred;
  r.ai_correct = ai;
  r.rc_correct = rc;
  prf(ai, pred, gold, r.ai_p, r.ai_r, r.ai_f1);
  prf(rc, pred, gold, r.rc_p, r.rc_r, r.rc_f1);
  return r;
}

}  // namespace detail_eval

inline ScoreReport score(const std::vector<PredictionLine>& preds,
                         const Corpus& gold,
                         MatchMode mode = MatchMode::ExactSpan) {
  using namespace detail_eval;
  Instances inst = collect(preds, gold, mode);
  std::size_t ai = 0, rc = 0;
  for (const auto& [key, pitems] : inst.pred) {
    auto git = inst.gold.find(key);
    if (git == inst.gold.end()) continue;
    const auto& gitems = git->second;
    // Greedy one-to-one matching in input order, separately for the span
    // criterion and the span+role criterion.
    std::vector<char> ai_used(gitems.size(), 0), rc_used(gitems.size(), 0);
    for (const Item& p : pitems) {
      for (std::size_t i = 0; i < gitems.size(); ++i)
        if (!ai_used[i] && gitems[i].start == p.start &&
            gitems[i].end == p.end) {
          ai_used[i] = 1;
          ++ai;
          break;
        }
      for (std::size_t i = 0; i < gitems.size(); ++i)
        if (!rc_used[i] && gitems[i].start == p.start &&
            gitems[i].end == p.end && gitems[i].role == p.role) {
          rc_used[i] = 1;
          ++rc;
          break;
        }
    }
  }
  return finalize(ai, rc, inst.n_gold, inst.n_pred);
}

// Exhaustive one-to-one matching reference: per event instance, enumerate
// every injective prediction-to-gold assignment and keep the maximum span
// match count and (span, role) match count.
inline ScoreReport score_reference(const std::vector<PredictionLine>& preds,
                                   const Corpus& gold,
                                   MatchMode mode = MatchMode::ExactSpan) {
  using namespace detail_eval;
  Instances inst = collect(preds, gold, mode);
  std::size_t ai = 0, rc = 0;
  for (const auto& [key, pitems] : inst.pred) {
    auto git = inst.gold.find(key);
    if (git == inst.gold.end()) continue;
    const auto& gitems = git->second;
    std::size_t best_ai = 0, best_rc = 0;
    std::vector<char> used(gitems.size(), 0);
    // Assign predictions in order to any unused gold item or to nothing.
    auto recurse = [&](auto&& self, std::size_t pi, std::size_t cur_ai,
                       std::size_t cur_rc, bool count_roles) -> void {
      std::size_t& best = count_roles ? best_rc : best_ai;
      if (pi == pitems.size()) {
        best = std::max(best, count_roles ? cur_rc : cur_ai);
        return;
      }
      self(self, pi + 1, cur_ai, cur_rc, count_roles);  // leave unmatched
      for (std::size_t i = 0; i < gitems.size(); ++i) {
        if (used[i]) continue;
        const bool span_ok = gitems[i].start == pitems[pi].start &&
                             gitems[i].end == pitems[pi].end;
        if (!span_ok) continue;
        const bool role_ok = gitems[i].role == pitems[pi].role;
        if (count_roles && !role_ok) continue;
        used[i] = 1;
        self(self, pi + 1, cur_ai + 1, cur_rc + (role_ok ? 1 : 0),
             count_roles);
        used[i] = 0;
      }
    };
    recurse(recurse, 0, 0, 0, false);
    recurse(recurse, 0, 0, 0, true);
    ai += best_ai;
    rc += best_rc;
  }
  return finalize(ai, rc, inst.n_gold, inst.n_pred);
}

// Informational trigger identification/classification score.
struct TriggerScore {
  double id_p = 0, id_r = 0, id_f1 = 0;
  double cls_p = 0, cls_r = 0, cls_f1 = 0;
};

inline TriggerScore score_triggers(const std::vector<PredictionLine>& preds,
                                   const Corpus& gold) {
  using namespace detail_eval;
  std::map<std::pair<std::string, std::string>,
           std::vector<std::tuple<std::size_t, std::size_t, std::string>>>
      gold_by_sent;
  std::size_t n_gold = 0;
  for (const SentenceRecord& rec : gold.sentences)
    for (const EventRecord& ev : rec.events) {
      gold_by_sent[{rec.doc_id, rec.sent_id}].push_back(
          {ev.trigger_start, ev.trigger_end, ev.event_type});
      ++n_gold;
    }
  std::map<std::pair<std::string, std::string>, std::vector<char>> id_used,
      cls_used;
  std::size_t id_ok = 0, cls_ok = 0, n_pred = 0;
  for (const PredictionLine& p : preds) {
    ++n_pred;
    auto it = gold_by_sent.find({p.doc_id, p.sent_id});
    if (it == gold_by_sent.end()) continue;
    auto& iu = id_used[it->first];
    auto& cu = cls_used[it->first];
    iu.resize(it->second.size(), 0);
    cu.resize(it->second.size(), 0);
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      const auto& [s, e, ty] = it->second[i];
      if (!iu[i] && s == p.trigger_start && e == p.trigger_end) {
        iu[i] = 1;
        ++id_ok;
        break;
      }
    }
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      const auto& [s, e, ty] = it->second[i];
      if (!cu[i] && s == p.trigger_start && e == p.trigger_end &&
          ty == p.event_type) {
        cu[i] = 1;
        ++cls_ok;
        break;
      }
    }
  }
  TriggerScore t;
  prf(id_ok, n_pred, n_gold, t.id_p, t.id_r, t.id_f1);
  prf(cls_ok, n_pred, n_gold, t.cls_p, t.cls_r, t.cls_f1);
  return t;
}

inline nlohmann::json report_json(const ScoreReport& r) {
  return {{"ai", {{"p", r.ai_p}, {"r", r.ai_r}, {"f1", r.ai_f1}}},
          {"rc", {{"p", r.rc_p}, {"r", r.rc_r}, {"f1", r.rc_f1}}},
          {"counts",
           {{"gold", r.n_gold},
            {"predicted", r.n_pred},
            {"ai_correct", r.ai_correct},
            {"rc_correct", r.rc_correct}}}};
}

// Aligned text table in the AI P/R/F1, RC P/R/F1 column order.
inline std::string report_table(const ScoreReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%-10s %6s %6s %6s   %6s %6s %6s\n"
                "%-10s %6.1f %6.1f %6.1f   %6.1f %6.1f %6.1f\n",
                "", "AI-P", "AI-R", "AI-F1", "RC-P", "RC-R", "RC-F1", "score",
                100 * r.ai_p, 100 * r.ai_r, 100 * r.ai_f1, 100 * r.rc_p,
                100 * r.rc_r, 100 * r.rc_f1);
  return buf;
}

}  // namespace argex
