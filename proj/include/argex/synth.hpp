#pragma once

// Synthetic corpus generator and its hand-written role rule. Sentences are
// built as projective dependency trees from templates in which the role of an
// argument is a deterministic function of (cue word, structural relation to
// the trigger, event type):
//
//   rel A: the entity's head token and the trigger token share an edge.
//   rel B: they are two edges apart through a connector word.
//
// Cue word index 0 of each family is "dual" and carries two roles, which is
// what produces the role-overlap instances. Entities whose head attaches
// anywhere else (decoys) carry no role at all, so lexical identity alone can
// never decide the label. The generator derives gold annotations by running
// the rule itself, which makes the rule a guaranteed-perfect oracle on every
// generated corpus.

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "argex/data.hpp"
#include "argex/errors.hpp"
#include "argex/rng.hpp"

namespace argex::synth {

struct GenConfig {
  std::size_t vocab_size = 120;
  std::size_t n_event_types = 5;
  std::size_t n_roles = 8;
  std::size_t n_sentences = 800;   // gold corpus
  std::size_t n_unlabeled = 800;   // pool (annotations stripped)
  std::size_t min_len = 6;
  std::size_t max_len = 18;
  double overlap_rate = 0.10;      // fraction of arguments with >= 2 roles
  double long_range_rate = 0.15;   // fraction of argument slots placed far
  std::size_t long_range_k = 8;    // "far" means > k tokens from the trigger
  double two_trigger_rate = 0.35;
  double eventless_rate = 0.10;
  double dev_fraction = 0.25;
  std::size_t sentences_per_doc = 10;
};

inline constexpr std::size_t kFamilies = 8;
inline constexpr std::size_t kCuesPerFamily = 3;

// ---------------------------------------------------------------------------
// Schema and lexicon, both deterministic functions of the config
// ---------------------------------------------------------------------------

inline RoleSchema default_schema(const GenConfig& cfg) {
  static const std::vector<std::string> kEventNames = {
      "ATTACK", "TRANSPORT", "TRADE", "MEET", "ARREST"};
  static const std::vector<std::string> kRoleNames = {
      "Agent",  "Target",      "Victim", "Instrument",
      "Origin", "Destination", "Time",   "Place"};
  if (cfg.n_roles < 2) throw ConfigError("schema needs at least 2 roles");
  RoleSchema s;
  for (std::size_t i = 0; i < cfg.n_event_types; ++i)
    s.trigger_types.push_back(i < kEventNames.size()
                                  ? kEventNames[i]
                                  : "EVENT" + std::to_string(i));
  for (std::size_t i = 0; i < cfg.n_roles; ++i)
    s.roles.push_back(i < kRoleNames.size() ? kRoleNames[i]
                                            : "Role" + std::to_string(i));
  const std::size_t window = std::min<std::size_t>(5, cfg.n_roles);
  for (std::size_t e = 0; e < cfg.n_event_types; ++e) {
    std::vector<std::string> perm;
    for (std::size_t j = 0; j < window; ++j)
      perm.push_back(s.roles[(e + j) % cfg.n_roles]);
    s.permissible[s.trigger_types[e]] = std::move(perm);
  }
  return s;
}

struct Lexicon {
  std::vector<std::vector<std::string>> trigger_words;  // [etype][variant]
  std::vector<std::string> trigger_tails;               // 2nd token of 2-token triggers
  std::vector<std::string> connectors;
  std::vector<std::vector<std::string>> cues;           // [family][k]
  std::vector<std::string> modifiers;
  std::vector<std::string> fillers;
  std::vector<std::string> entity_types;                // per family

  std::map<std::string, int> trigger_etype;
  std::map<std::string, std::pair<int, int>> cue_info;  // word -> (family, k)
  std::map<std::string, int> connector_set;

  bool is_connector(const std::string& w) const {
    return connector_set.count(w) > 0;
  }
  const std::pair<int, int>* cue_lookup(const std::string& w) const {
    auto it = cue_info.find(w);
    return it == cue_info.end() ? nullptr : &it->second;
  }

  // Full token list: specials first, then every lexicon word.
  std::vector<std::string> vocab() const {
    std::vector<std::string> v = {"[PAD]", "[UNK]", "[MASK]"};
    for (const auto& tw : trigger_words) v.insert(v.end(), tw.begin(), tw.end());
    v.insert(v.end(), trigger_tails.begin(), trigger_tails.end());
    v.insert(v.end(), connectors.begin(), connectors.end());
    for (const auto& cw : cues) v.insert(v.end(), cw.begin(), cw.end());
    v.insert(v.end(), modifiers.begin(), modifiers.end());
    v.insert(v.end(), fillers.begin(), fillers.end());
    return v;
  }
};

inline Lexicon build_lexicon(const GenConfig& cfg, const RoleSchema& schema) {
  static const std::vector<std::string> kEntityTypes = {
      "PER", "ORG", "WEA", "VEH", "LOC", "FAC", "TIM", "VAL"};
  Lexicon lex;
  for (std::size_t e = 0; e < schema.trigger_types.size(); ++e) {
    std::string base = schema.trigger_types[e];
    for (char& c : base) c = static_cast<char>(std::tolower(c));
    lex.trigger_words.push_back({base + "ed", base + "ing"});
    for (const std::string& w : lex.trigger_words.back())
      lex.trigger_etype[w] = static_cast<int>(e);
  }
  lex.trigger_tails = {"over", "down"};
  lex.connectors = {"onto", "via", "amid"};
  for (std::size_t f = 0; f < kFamilies; ++f) {
    std::vector<std::string> words;
    for (std::size_t k = 0; k < kCuesPerFamily; ++k) {
      words.push_back("c" + std::to_string(f) + "w" + std::to_string(k));
      lex.cue_info[words.back()] = {static_cast<int>(f),
                                    static_cast<int>(k)};
    }
    lex.cues.push_back(std::move(words));
    lex.entity_types.push_back(kEntityTypes[f % kEntityTypes.size()]);
  }
  lex.modifiers = {"grim", "stray", "new"};
  for (const std::string& c : lex.connectors) lex.connector_set[c] = 1;
  std::size_t fixed = 3 + lex.trigger_tails.size() + lex.connectors.size() +
                      kFamilies * kCuesPerFamily + lex.modifiers.size();
  for (const auto& tw : lex.trigger_words) fixed += tw.size();
  if (cfg.vocab_size < fixed + 8)
    throw ConfigError("vocab_size " + std::to_string(cfg.vocab_size) +
                      " too small; needs at least " +
                      std::to_string(fixed + 8));
  for (std::size_t i = 0; i < cfg.vocab_size - fixed; ++i)
    lex.fillers.push_back("w" + std::to_string(i));
  return lex;
}

// ---------------------------------------------------------------------------
// The role rule
// ---------------------------------------------------------------------------

// Deterministic role assignment for a (family, rel, event-type) cell; dual
// cues carry a second distinct role.
inline std::vector<std::string> rule_roles(const RoleSchema& schema,
                                           int etype_idx, int family, int rel,
                                           bool dual) {
  const std::string& et =
      schema.trigger_types[static_cast<std::size_t>(etype_idx)];
  const auto& perm = schema.permissible_roles(et);
  const int p = static_cast<int>(perm.size());
  const int primary = (2 * family + rel + etype_idx) % p;
  std::vector<std::string> roles{perm[static_cast<std::size_t>(primary)]};
  if (dual) {
    if (p < 2)
      throw ConfigError("overlap requires >= 2 permissible roles for " + et);
    const int delta = 1 + ((family + rel) % (p - 1));
    roles.push_back(perm[static_cast<std::size_t>((primary + delta) % p)]);
  }
  return roles;
}

// Token inside [s, e] whose head lies outside the span.
inline int span_head_token(const SentenceRecord& rec, std::size_t s,
                           std::size_t e) {
  for (std::size_t i = s; i <= e; ++i) {
    const int h = rec.dep_heads[i];
    if (h == -1 || h < static_cast<int>(s) || h > static_cast<int>(e))
      return static_cast<int>(i);
  }
  return static_cast<int>(s);
}

// Hand-written argument extraction for one (sentence, trigger) pair. Runs
// from the record alone; the generator uses it to derive gold annotations,
// and the oracle tests use it as the perfect scorer baseline.
inline std::vector<ArgumentRecord> rule_extract(const SentenceRecord& rec,
                                                const Lexicon& lex,
                                                const RoleSchema& schema,
                                                std::size_t trig_start,
                                                std::size_t trig_end,
                                                const std::string& etype) {
  const int trig_tok = span_head_token(rec, trig_start, trig_end);
  const int e = schema.trigger_index(etype);
  auto adjacent = [&](int a, int b) {
    return rec.dep_heads[static_cast<std::size_t>(a)] == b ||
           rec.dep_heads[static_cast<std::size_t>(b)] == a;
  };
  std::vector<ArgumentRecord> out;
  for (std::size_t i = 0; i < rec.entities.size(); ++i) {
    const EntitySpan& ent = rec.entities[i];
    if (ent.start <= trig_end && trig_start <= ent.end) continue;
    const int eh = span_head_token(rec, ent.start, ent.end);
    const auto* info = lex.cue_lookup(rec.tokens[static_cast<std::size_t>(eh)]);
    if (!info) continue;
    const auto [family, k] = *info;
    int rel = -1;
    if (adjacent(eh, trig_tok)) {
      rel = 0;
    } else {
      for (std::size_t m = 0; m < rec.tokens.size(); ++m) {
        if (!lex.is_connector(rec.tokens[m])) continue;
        if (adjacent(eh, static_cast<int>(m)) &&
            adjacent(static_cast<int>(m), trig_tok)) {
          rel = 1;
          break;
        }
      }
    }
    if (rel < 0) continue;
    for (const std::string& role :
         rule_roles(schema, e, family, rel, k == 0)) {
      ArgumentRecord a;
      a.start = ent.start;
      a.end = ent.end;
      a.role = role;
      a.entity_index = i;
      out.push_back(std::move(a));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tree-template sentence construction
// ---------------------------------------------------------------------------

namespace detail {

struct TNode {
  std::string word;
  std::string label;
  std::vector<TNode*> left;   // left[0] is outermost
  std::vector<TNode*> right;  // right[0] is innermost
  int pos = -1;
};

class SentenceBuilder {
 public:
  TNode* node(std::string word, std::string label) {
    arena_.push_back(TNode{std::move(word), std::move(label), {}, {}, -1});
    ++count_;
    return &arena_.back();
  }
  std::size_t count() const { return count_; }

  static void left_inner(TNode* p, TNode* c) { p->left.push_back(c); }
  static void left_outer(TNode* p, TNode* c) {
    p->left.insert(p->left.begin(), c);
  }
  static void right_inner(TNode* p, TNode* c) {
    p->right.insert(p->right.begin(), c);
  }
  static void right_outer(TNode* p, TNode* c) { p->right.push_back(c); }

  // In-order linearization: every subtree occupies a contiguous block, so
  // the resulting tree is projective by construction.
  void finalize(TNode* root, SentenceRecord& rec) {
    std::vector<TNode*> order;
    walk(root, order);
    for (std::size_t i = 0; i < order.size(); ++i)
      order[i]->pos = static_cast<int>(i);
    rec.tokens.resize(order.size());
    rec.dep_heads.assign(order.size(), -1);
    rec.dep_labels.resize(order.size());
    for (TNode* n : order) {
      rec.tokens[static_cast<std::size_t>(n->pos)] = n->word;
      rec.dep_labels[static_cast<std::size_t>(n->pos)] = n->label;
      for (TNode* c : n->left)
        rec.dep_heads[static_cast<std::size_t>(c->pos)] = n->pos;
      for (TNode* c : n->right)
        rec.dep_heads[static_cast<std::size_t>(c->pos)] = n->pos;
    }
  }

 private:
  static void walk(TNode* n, std::vector<TNode*>& order) {
    for (TNode* c : n->left) walk(c, order);
    order.push_back(n);
    for (TNode* c : n->right) walk(c, order);
  }
  std::deque<TNode> arena_;
  std::size_t count_ = 0;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

struct SynthResult {
  Corpus gold;
  Corpus pool;
};

namespace detail {

struct PendingEntity {
  TNode* cue = nullptr;
  TNode* modifier = nullptr;  // optional left neighbor of the cue
  int family = 0;
};

struct PendingTrigger {
  TNode* head = nullptr;
  TNode* tail = nullptr;  // optional second trigger token
  int etype = 0;
};

class Generator {
 public:
  Generator(const GenConfig& cfg, const RoleSchema& schema, const Lexicon& lex)
      : cfg_(cfg), schema_(schema), lex_(lex) {}

  SentenceRecord sentence(Rng& rng, const std::string& doc_id,
                          const std::string& sent_id) {
    builder_ = SentenceBuilder();
    entities_.clear();
    triggers_.clear();
    const bool want_events = !rng.bernoulli(cfg_.eventless_rate);
    TNode* root = nullptr;
    if (!want_events) {
      root = filler(rng);
      const int extra = rng.uniform_int(2, 4);
      for (int i = 0; i < extra; ++i)
        (i % 2 ? SentenceBuilder::left_outer : SentenceBuilder::right_outer)(
            root, filler(rng));
      if (rng.bernoulli(0.5)) attach_decoy(rng, root->right.empty() ? root : root->right.back());
    } else {
      root = build_events(rng);
    }
    while (builder_.count() < cfg_.min_len)
      (builder_.count() % 2 ? SentenceBuilder::left_outer
                            : SentenceBuilder::right_outer)(root, filler(rng));

    SentenceRecord rec;
    rec.doc_id = doc_id;
    rec.sent_id = sent_id;
    builder_.finalize(root, rec);
    emit_entities(rec);
    emit_events(rec);
    return rec;
  }

 private:
  TNode* filler(Rng& rng) {
    return builder_.node(
        lex_.fillers[static_cast<std::size_t>(rng.uniform_int(
            0, static_cast<int>(lex_.fillers.size()) - 1))],
        "fill");
  }

  // Entity span: optional modifier token directly left of the cue.
  PendingEntity make_entity(Rng& rng, int family, bool dual) {
    PendingEntity ent;
    ent.family = family;
    const int k = dual ? 0 : rng.uniform_int(1, kCuesPerFamily - 1);
    ent.cue = builder_.node(
        lex_.cues[static_cast<std::size_t>(family)][static_cast<std::size_t>(k)],
        "cue");
    if (rng.bernoulli(0.4)) {
      ent.modifier = builder_.node(
          lex_.modifiers[static_cast<std::size_t>(
              rng.uniform_int(0, static_cast<int>(lex_.modifiers.size()) - 1))],
          "mod");
      SentenceBuilder::left_inner(ent.cue, ent.modifier);
    }
    entities_.push_back(ent);
    return ent;
  }

  int random_family(Rng& rng) {
    return rng.uniform_int(0, static_cast<int>(kFamilies) - 1);
  }

  // A cue-family span hanging off a filler; the rule assigns it no role.
  void attach_decoy(Rng& rng, TNode* filler_host) {
    PendingEntity d = make_entity(rng, random_family(rng), false);
    SentenceBuilder::right_inner(filler_host, d.cue);
  }

  PendingTrigger make_trigger(Rng& rng, int etype) {
    PendingTrigger t;
    t.etype = etype;
    const auto& words = lex_.trigger_words[static_cast<std::size_t>(etype)];
    t.head = builder_.node(
        words[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(words.size()) - 1))],
        "trig");
    if (rng.bernoulli(0.1)) {
      t.tail = builder_.node(
          lex_.trigger_tails[static_cast<std::size_t>(rng.uniform_int(
              0, static_cast<int>(lex_.trigger_tails.size()) - 1))],
          "tmod");
      SentenceBuilder::right_inner(t.head, t.tail);
    }
    triggers_.push_back(t);
    return t;
  }

  // Short-range slot: entity within a couple of tokens of the trigger,
  // attached directly (rel A) or through a connector (rel B).
  void short_slot(Rng& rng, TNode* trig) {
    const bool dual = rng.bernoulli(cfg_.overlap_rate);
    PendingEntity ent = make_entity(rng, random_family(rng), dual);
    const bool rel_b = rng.bernoulli(0.4);
    const bool left = rng.bernoulli(0.45);
    TNode* attach_point = ent.cue;
    if (rel_b) {
      TNode* conn = connector_node(rng);
      // Connector sits between trigger and cue in linear order.
      if (left)
        SentenceBuilder::right_outer(conn, ent.cue);
      else
        SentenceBuilder::right_inner(conn, ent.cue);
      attach_point = conn;
    }
    if (left)
      SentenceBuilder::left_inner(trig, attach_point);
    else
      SentenceBuilder::right_outer(trig, attach_point);
  }

  TNode* connector_node(Rng& rng) {
    return builder_.node(
        lex_.connectors[static_cast<std::size_t>(rng.uniform_int(
            0, static_cast<int>(lex_.connectors.size()) - 1))],
        "conn");
  }

  // Long-range slot: a filler chain of >= k tokens separates trigger and
  // entity, which stays 1-2 parse edges away. Same-family decoys attach to
  // chain fillers (sometimes behind a dead connector), and a quarter of the
  // slots place only a far decoy and no argument at all, so neither surface
  // distance nor lexical adjacency can substitute for the parse.
  void long_slot(Rng& rng, TNode* trig) {
    const std::size_t k = cfg_.long_range_k;
    const bool dual = rng.bernoulli(cfg_.overlap_rate);
    const bool rel_b = rng.bernoulli(0.4);
    const bool arg_present = !rng.bernoulli(0.25);
    const int family = random_family(rng);
    const std::size_t chain_len = rel_b ? k - 1 : k + 1;
    TNode* top = filler(rng);
    TNode* cur = top;
    for (std::size_t i = 1; i < chain_len; ++i) {
      TNode* next = filler(rng);
      SentenceBuilder::right_outer(cur, next);
      cur = next;
    }
    SentenceBuilder::right_outer(trig, top);
    // Near decoy, left or right of the trigger.
    TNode* decoy_host = top;
    if (!rng.bernoulli(0.6)) {
      TNode* lf = filler(rng);
      SentenceBuilder::left_outer(trig, lf);
      decoy_host = lf;
    }
    PendingEntity near_decoy =
        make_entity(rng, family, rng.bernoulli(cfg_.overlap_rate));
    if (rel_b) {
      // Dead connector: adjacent to the decoy but not to the trigger.
      TNode* dconn = connector_node(rng);
      SentenceBuilder::right_inner(dconn, near_decoy.cue);
      SentenceBuilder::right_inner(decoy_host, dconn);
    } else {
      SentenceBuilder::right_inner(decoy_host, near_decoy.cue);
    }
    if (arg_present) {
      PendingEntity ent = make_entity(rng, family, dual);
      if (rel_b) {
        TNode* conn = connector_node(rng);
        SentenceBuilder::right_inner(conn, ent.cue);
        SentenceBuilder::right_outer(trig, conn);
      } else {
        SentenceBuilder::right_outer(trig, ent.cue);
      }
    } else {
      // Far decoy at the chain tail, exactly where an argument would sit.
      PendingEntity far_decoy =
          make_entity(rng, family, rng.bernoulli(cfg_.overlap_rate));
      if (rel_b) {
        TNode* dconn = connector_node(rng);
        SentenceBuilder::right_inner(dconn, far_decoy.cue);
        SentenceBuilder::right_outer(cur, dconn);
      } else {
        SentenceBuilder::right_outer(cur, far_decoy.cue);
      }
    }
  }

  TNode* build_events(Rng& rng) {
    const bool two =
        cfg_.max_len >= 12 && rng.bernoulli(cfg_.two_trigger_rate);
    const int e1 =
        rng.uniform_int(0, static_cast<int>(schema_.trigger_types.size()) - 1);
    PendingTrigger t1 = make_trigger(rng, e1);
    if (!two) {
      const bool lr = cfg_.long_range_rate > 0 &&
                      cfg_.max_len >= cfg_.long_range_k + 9 &&
                      rng.bernoulli(cfg_.long_range_rate);
      if (lr) {
        long_slot(rng, t1.head);
      } else {
        short_slot(rng, t1.head);
        if (builder_.count() + 4 <= cfg_.max_len && rng.bernoulli(0.6))
          short_slot(rng, t1.head);
      }
      if (builder_.count() + 3 <= cfg_.max_len && rng.bernoulli(0.25)) {
        TNode* f = filler(rng);
        SentenceBuilder::right_outer(t1.head, f);
        attach_decoy(rng, f);
      }
      return t1.head;
    }
    // Two triggers; the second usually has a different type, and with a
    // shared argument the entity is adjacent to both trigger tokens.
    int e2 =
        rng.uniform_int(0, static_cast<int>(schema_.trigger_types.size()) - 1);
    if (e2 == e1 && schema_.trigger_types.size() > 1 && rng.bernoulli(0.8))
      e2 = (e1 + 1) % static_cast<int>(schema_.trigger_types.size());
    const bool shared = rng.bernoulli(0.7);
    short_slot(rng, t1.head);
    PendingTrigger t2 = make_trigger(rng, e2);
    if (shared) {
      const bool dual = rng.bernoulli(cfg_.overlap_rate);
      PendingEntity shared_ent = make_entity(rng, random_family(rng), dual);
      SentenceBuilder::right_outer(t1.head, shared_ent.cue);
      SentenceBuilder::right_outer(shared_ent.cue, t2.head);
    } else {
      SentenceBuilder::right_outer(t1.head, t2.head);
    }
    short_slot(rng, t2.head);
    return t1.head;
  }

  void emit_entities(SentenceRecord& rec) {
    std::vector<std::pair<std::size_t, EntitySpan>> spans;
    for (const PendingEntity& pe : entities_) {
      EntitySpan e;
      e.start = static_cast<std::size_t>(
          pe.modifier ? pe.modifier->pos : pe.cue->pos);
      e.end = static_cast<std::size_t>(pe.cue->pos);
      e.entity_type = lex_.entity_types[static_cast<std::size_t>(pe.family)];
      spans.push_back({e.start, e});
    }
    std::sort(spans.begin(), spans.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [_, e] : spans) rec.entities.push_back(std::move(e));
  }

  void emit_events(SentenceRecord& rec) {
    std::sort(triggers_.begin(), triggers_.end(),
              [](const PendingTrigger& a, const PendingTrigger& b) {
                return a.head->pos < b.head->pos;
              });
    for (const PendingTrigger& pt : triggers_) {
      EventRecord ev;
      ev.trigger_start = static_cast<std::size_t>(pt.head->pos);
      ev.trigger_end = static_cast<std::size_t>(
          pt.tail ? pt.tail->pos : pt.head->pos);
      ev.event_type =
          schema_.trigger_types[static_cast<std::size_t>(pt.etype)];
      ev.arguments = rule_extract(rec, lex_, schema_, ev.trigger_start,
                                  ev.trigger_end, ev.event_type);
      rec.events.push_back(std::move(ev));
    }
  }

  const GenConfig& cfg_;
  const RoleSchema& schema_;
  const Lexicon& lex_;
  SentenceBuilder builder_;
  std::vector<PendingEntity> entities_;
  std::vector<PendingTrigger> triggers_;
};

}  // namespace detail

inline void validate_config(const GenConfig& cfg, const RoleSchema& schema) {
  if (cfg.min_len < 4 || cfg.max_len < cfg.min_len)
    throw ConfigError("bad sentence length range");
  if (cfg.overlap_rate < 0 || cfg.overlap_rate >= 1)
    throw ConfigError("overlap_rate must be in [0, 1)");
  if (cfg.overlap_rate > 0)
    for (const auto& [t, perm] : schema.permissible)
      if (perm.size() < 2)
        throw ConfigError("overlap_rate > 0 needs >= 2 permissible roles, "
                          "but " + t + " has " + std::to_string(perm.size()));
  if (cfg.long_range_rate > 0 && cfg.max_len < cfg.long_range_k + 9)
    throw ConfigError("max_len too small for long_range_k=" +
                      std::to_string(cfg.long_range_k));
}

inline SynthResult generate(const GenConfig& cfg, std::uint64_t seed) {
  const RoleSchema schema = default_schema(cfg);
  validate_config(cfg, schema);
  const Lexicon lex = build_lexicon(cfg, schema);
  detail::Generator gen(cfg, schema, lex);
  Rng rng(seed);
  SynthResult out;
  out.gold.schema = schema;
  out.pool.schema = schema;
  for (std::size_t i = 0; i < cfg.n_sentences; ++i) {
    SentenceRecord rec = gen.sentence(
        rng, "gd" + std::to_string(i / cfg.sentences_per_doc),
        "s" + std::to_string(i));
    validate_record(rec, schema);
    out.gold.sentences.push_back(std::move(rec));
  }
  for (std::size_t i = 0; i < cfg.n_unlabeled; ++i) {
    SentenceRecord rec = gen.sentence(
        rng, "pd" + std::to_string(i / cfg.sentences_per_doc),
        "u" + std::to_string(i));
    rec.events.clear();  // annotations stripped; entities and parses stay
    validate_record(rec, schema);
    out.pool.sentences.push_back(std::move(rec));
  }
  return out;
}

// Deterministic train/dev split on document boundaries.
inline std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus,
                                              double dev_fraction) {
  if (dev_fraction <= 0 || dev_fraction >= 1)
    throw ConfigError("dev_fraction must be in (0, 1)");
  const std::size_t ideal = corpus.sentences.size() -
                            static_cast<std::size_t>(
                                static_cast<double>(corpus.sentences.size()) *
                                dev_fraction);
  auto at_boundary = [&](std::size_t c) {
    return c == 0 || c == corpus.sentences.size() ||
           corpus.sentences[c].doc_id != corpus.sentences[c - 1].doc_id;
  };
  std::size_t cut = ideal;
  while (!at_boundary(cut)) ++cut;
  if (cut == corpus.sentences.size()) {
    cut = ideal;
    while (cut > 0 && !at_boundary(cut)) --cut;
  }
  Corpus train, dev;
  train.schema = corpus.schema;
  dev.schema = corpus.schema;
  train.sentences.assign(corpus.sentences.begin(),
                         corpus.sentences.begin() +
                             static_cast<std::ptrdiff_t>(cut));
  dev.sentences.assign(corpus.sentences.begin() +
                           static_cast<std::ptrdiff_t>(cut),
                       corpus.sentences.end());
  if (train.sentences.empty() || dev.sentences.empty())
    throw ConfigError("split produced an empty train or dev set");
  return {std::move(train), std::move(dev)};
}

}  // namespace argex::synth
