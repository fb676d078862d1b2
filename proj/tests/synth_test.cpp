#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "argex/synth.hpp"

using namespace argex;
using namespace argex::synth;

namespace {

// Projectivity: for every edge (h, d), all tokens strictly between them must
// be descendants of h.
bool is_projective(const std::vector<int>& heads) {
  const int t = static_cast<int>(heads.size());
  auto is_descendant_of = [&](int node, int anc) {
    int cur = node;
    for (int steps = 0; steps <= t; ++steps) {
      if (cur == anc) return true;
      if (cur == -1) return false;
      cur = heads[static_cast<std::size_t>(cur)];
    }
    return false;
  };
  for (int d = 0; d < t; ++d) {
    const int h = heads[static_cast<std::size_t>(d)];
    if (h == -1) continue;
    const int lo = std::min(h, d), hi = std::max(h, d);
    for (int m = lo + 1; m < hi; ++m)
      if (!is_descendant_of(m, h)) return false;
  }
  return true;
}

std::string serialize(const Corpus& c) {
  std::ostringstream os;
  serialize_corpus_stream(c, os);
  return os.str();
}

}  // namespace

TEST(Generator, DeterministicAcrossRuns) {
  GenConfig cfg;
  cfg.n_sentences = 100;
  cfg.n_unlabeled = 50;
  SynthResult a = generate(cfg, 7);
  SynthResult b = generate(cfg, 7);
  EXPECT_EQ(serialize(a.gold), serialize(b.gold));
  EXPECT_EQ(serialize(a.pool), serialize(b.pool));
  SynthResult c = generate(cfg, 8);
  EXPECT_NE(serialize(a.gold), serialize(c.gold));
}

TEST(Generator, EveryParseIsAValidProjectiveTree) {
  GenConfig cfg;
  cfg.n_sentences = 200;
  cfg.n_unlabeled = 100;
  SynthResult r = generate(cfg, 13);
  for (const Corpus* c : {&r.gold, &r.pool})
    for (const SentenceRecord& rec : c->sentences) {
      EXPECT_TRUE(is_valid_tree(rec.dep_heads)) << rec.sent_id;
      EXPECT_TRUE(is_projective(rec.dep_heads)) << rec.sent_id;
      EXPECT_GE(rec.size(), cfg.min_len);
    }
}

TEST(Generator, RolesAlwaysPermissibleAndArgsAreEntities) {
  GenConfig cfg;
  cfg.n_sentences = 200;
  SynthResult r = generate(cfg, 99);
  for (const SentenceRecord& rec : r.gold.sentences)
    for (const EventRecord& ev : rec.events)
      for (const ArgumentRecord& a : ev.arguments) {
        EXPECT_TRUE(r.gold.schema.is_permissible(ev.event_type, a.role));
        ASSERT_TRUE(a.entity_index.has_value());
        const EntitySpan& e = rec.entities[*a.entity_index];
        EXPECT_EQ(e.start, a.start);
        EXPECT_EQ(e.end, a.end);
      }
}

TEST(Generator, OverlapRateWithinTolerance) {
  GenConfig cfg;
  cfg.n_sentences = 1000;
  cfg.n_unlabeled = 0;
  cfg.overlap_rate = 0.10;
  SynthResult r = generate(cfg, 21);
  std::size_t args = 0, overlapping = 0;
  for (const SentenceRecord& rec : r.gold.sentences)
    for (const EventRecord& ev : rec.events) {
      std::map<std::pair<std::size_t, std::size_t>, std::size_t> roles_per_span;
      for (const ArgumentRecord& a : ev.arguments)
        ++roles_per_span[{a.start, a.end}];
      for (const auto& [span, n] : roles_per_span) {
        ++args;
        if (n >= 2) ++overlapping;
      }
    }
  ASSERT_GT(args, 0u);
  const double measured =
      static_cast<double>(overlapping) / static_cast<double>(args);
  EXPECT_NEAR(measured, 0.10, 0.02);
}

TEST(Generator, LongRangeArgsAreFarInSurfaceButCloseInParse) {
  GenConfig cfg;
  cfg.n_sentences = 300;
  cfg.long_range_rate = 0.6;
  cfg.two_trigger_rate = 0.0;
  SynthResult r = generate(cfg, 5);
  const Lexicon lex = build_lexicon(cfg, r.gold.schema);
  std::size_t far = 0;
  for (const SentenceRecord& rec : r.gold.sentences)
    for (const EventRecord& ev : rec.events) {
      const int trig = span_head_token(rec, ev.trigger_start, ev.trigger_end);
      for (const ArgumentRecord& a : ev.arguments) {
        const int eh = span_head_token(rec, a.start, a.end);
        const int dist = std::abs(eh - trig);
        if (dist <= static_cast<int>(cfg.long_range_k)) continue;
        ++far;
        // 1 edge (head is trigger) or 2 edges via a connector.
        const int h = rec.dep_heads[static_cast<std::size_t>(eh)];
        if (h == trig) continue;
        ASSERT_GE(h, 0);
        EXPECT_TRUE(lex.is_connector(rec.tokens[static_cast<std::size_t>(h)]));
        EXPECT_EQ(rec.dep_heads[static_cast<std::size_t>(h)], trig);
      }
    }
  EXPECT_GT(far, 50u);
}

TEST(Generator, InfeasibleOverlapConfigRejected) {
  GenConfig cfg;
  cfg.n_roles = 8;
  cfg.overlap_rate = 0.1;
  RoleSchema schema = default_schema(cfg);
  schema.permissible[schema.trigger_types[0]] = {schema.roles[0]};
  EXPECT_THROW(validate_config(cfg, schema), ConfigError);
}

TEST(Generator, PoolHasParsesAndEntitiesButNoEvents) {
  GenConfig cfg;
  cfg.n_sentences = 10;
  cfg.n_unlabeled = 60;
  SynthResult r = generate(cfg, 3);
  EXPECT_EQ(r.pool.sentences.size(), 60u);
  bool saw_entity = false;
  for (const SentenceRecord& rec : r.pool.sentences) {
    EXPECT_TRUE(rec.events.empty());
    EXPECT_EQ(rec.dep_heads.size(), rec.size());
    saw_entity |= !rec.entities.empty();
  }
  EXPECT_TRUE(saw_entity);
}

TEST(RuleOracle, ReconstructsGoldExactly) {
  // The generator derives gold with the rule, so an independent rerun of the
  // rule over the serialized corpus must reproduce every argument set.
  GenConfig cfg;
  cfg.n_sentences = 150;
  SynthResult r = generate(cfg, 31);
  std::istringstream in(serialize(r.gold));
  Corpus parsed = parse_corpus_stream(in);
  const Lexicon lex = build_lexicon(cfg, parsed.schema);
  for (const SentenceRecord& rec : parsed.sentences)
    for (const EventRecord& ev : rec.events) {
      auto args = rule_extract(rec, lex, parsed.schema, ev.trigger_start,
                               ev.trigger_end, ev.event_type);
      EXPECT_EQ(args, ev.arguments) << rec.sent_id;
    }
}

TEST(SplitCorpus, DocAlignedAndNonEmpty) {
  GenConfig cfg;
  cfg.n_sentences = 100;
  cfg.sentences_per_doc = 10;
  SynthResult r = generate(cfg, 17);
  auto [train, dev] = split_corpus(r.gold, 0.25);
  EXPECT_EQ(train.sentences.size() + dev.sentences.size(), 100u);
  EXPECT_FALSE(train.sentences.empty());
  EXPECT_FALSE(dev.sentences.empty());
  EXPECT_NE(train.sentences.back().doc_id, dev.sentences.front().doc_id);
}
