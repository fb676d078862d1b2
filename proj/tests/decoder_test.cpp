#include <gtest/gtest.h>

#include "argex/decoder.hpp"

using namespace argex;

namespace {

RoleSchema schema() {
  RoleSchema s;
  s.trigger_types = {"ATTACK", "MEET"};
  s.roles = {"Agent", "Target", "Victim", "Place"};
  s.permissible = {{"ATTACK", {"Agent", "Target", "Victim"}},
                   {"MEET", {"Agent", "Place"}}};
  return s;
}

DecoderConfig small_cfg() {
  DecoderConfig c;
  c.d_model = 8;
  c.d_tok = 8;
  return c;
}

Tensor random_u(Graph& g, std::size_t t, Rng& rng) {
  std::vector<Scalar> v(t * 8);
  for (Scalar& x : v) x = static_cast<Scalar>(rng.uniform(-1, 1));
  return g.input({t, 8}, std::move(v), false);
}

// Independent reference: a span [s, e] is decoded iff all its tags are
// non-O, every tag after the first is I, it cannot be extended right by an
// I, and it starts legally (B anywhere; I only at position 0 or after O).
std::vector<std::pair<std::size_t, std::size_t>> bio_reference(
    const std::vector<int>& tags) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t t = tags.size();
  for (std::size_t s = 0; s < t; ++s)
    for (std::size_t e = s; e < t; ++e) {
      bool ok = tags[s] != kTagO;
      for (std::size_t i = s + 1; ok && i <= e; ++i) ok = tags[i] == kTagI;
      if (!ok) continue;
      if (e + 1 < t && tags[e + 1] == kTagI) continue;
      if (tags[s] == kTagI && s != 0 && tags[s - 1] != kTagO) continue;
      out.push_back({s, e});
    }
  return out;
}

}  // namespace

TEST(DecodeBio, StatedExamples) {
  using SpanList = std::vector<std::pair<std::size_t, std::size_t>>;
  EXPECT_EQ(decode_bio({kTagB, kTagI, kTagO}), (SpanList{{0, 1}}));
  EXPECT_EQ(decode_bio({kTagO, kTagI, kTagO}), (SpanList{{1, 1}}));
  EXPECT_EQ(decode_bio({kTagB, kTagB, kTagO}), (SpanList{{0, 0}, {1, 1}}));
  EXPECT_EQ(decode_bio({kTagO, kTagO, kTagO}), (SpanList{}));
}

TEST(DecodeBio, MatchesBruteForceOnAllSequencesUpToLength8) {
  for (std::size_t t = 1; t <= 8; ++t) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < t; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<int> tags(t);
      std::size_t c = code;
      for (std::size_t i = 0; i < t; ++i) {
        tags[i] = static_cast<int>(c % 3);
        c /= 3;
      }
      ASSERT_EQ(decode_bio(tags), bio_reference(tags))
          << "t=" << t << " code=" << code;
    }
  }
}

TEST(EntityMode, ZeroLogitsEmitEveryPermissiblePairAtThreshold) {
  ParameterStore ps;
  Rng rng(3);
  ArgumentDecoder dec(ps, schema(), small_cfg(), rng);
  for (auto& [name, p] : ps)
    std::fill(p.value.begin(), p.value.end(), Scalar(0));
  Graph g;
  Rng dr(5);
  Tensor u = random_u(g, 5, dr);
  const std::vector<EntitySpan> ents = {{0, 1, "PER"}, {3, 3, "LOC"}};
  auto preds = dec.classify_with_entities(g, u, ents, "ATTACK");
  // sigmoid(0) = 0.5 >= threshold 0.5: every (entity, permissible role).
  EXPECT_EQ(preds.size(), 2u * 3u);
  for (const RolePrediction& p : preds) {
    EXPECT_DOUBLE_EQ(p.score, 0.5);
    EXPECT_EQ(p.source, "entity-mode");
  }
}

TEST(EntityMode, NonPermissibleRolesNeverEmitted) {
  ParameterStore ps;
  Rng rng(3);
  ArgumentDecoder dec(ps, schema(), small_cfg(), rng);
  for (auto& [name, p] : ps)
    std::fill(p.value.begin(), p.value.end(), Scalar(0));
  Graph g;
  Rng dr(5);
  Tensor u = random_u(g, 4, dr);
  auto preds =
      dec.classify_with_entities(g, u, {{0, 0, "PER"}}, "MEET");
  EXPECT_EQ(preds.size(), 2u);
  for (const RolePrediction& p : preds)
    EXPECT_TRUE(p.role == "Agent" || p.role == "Place");
}

TEST(EntityMode, MultiLabelCapacityIsConstructive) {
  // There exists a parameter setting emitting two roles for one entity and
  // one trigger; the zero setting does exactly that.
  ParameterStore ps;
  Rng rng(3);
  ArgumentDecoder dec(ps, schema(), small_cfg(), rng);
  for (auto& [name, p] : ps)
    std::fill(p.value.begin(), p.value.end(), Scalar(0));
  Graph g;
  Rng dr(7);
  Tensor u = random_u(g, 3, dr);
  auto preds = dec.classify_with_entities(g, u, {{1, 1, "PER"}}, "ATTACK");
  EXPECT_GE(preds.size(), 2u);
}

TEST(EntityMode, EntityOutsideSentenceRejected) {
  ParameterStore ps;
  Rng rng(3);
  ArgumentDecoder dec(ps, schema(), small_cfg(), rng);
  Graph g;
  Rng dr(5);
  Tensor u = random_u(g, 3, dr);
  EXPECT_THROW(dec.classify_with_entities(g, u, {{2, 3, "PER"}}, "ATTACK"),
               ValueError);
}

TEST(EntityMode, TypeFilterDropsCandidates) {
  ParameterStore ps;
  Rng rng(3);
  DecoderConfig cfg = small_cfg();
  cfg.entity_type_filter = {"PER"};
  ArgumentDecoder dec(ps, schema(), cfg, rng);
  for (auto& [name, p] : ps)
    std::fill(p.value.begin(), p.value.end(), Scalar(0));
  Graph g;
  Rng dr(5);
  Tensor u = random_u(g, 4, dr);
  auto preds = dec.classify_with_entities(
      g, u, {{0, 0, "PER"}, {2, 2, "LOC"}}, "MEET");
  for (const RolePrediction& p : preds) EXPECT_EQ(p.start, 0u);
}

TEST(EntityMode, HeadIndependencePerRole) {
  ParameterStore ps;
  Rng rng(3);
  ArgumentDecoder dec(ps, schema(), small_cfg(), rng);
  Graph g;
  Rng dr(11);
  Tensor u = random_u(g, 4, dr);
  const std::vector<EntitySpan> ents = {{0, 1, "PER"}, {3, 3, "LOC"}};
  auto collect = [&](const std::string& role) {
    std::vector<std::pair<std::size_t, double>> out;
    for (const auto& p : dec.classify_with_entities(g, u, ents, "ATTACK"))
      if (p.role == role) out.push_back({p.start, p.score});
    return out;
  };
  auto agent_before = collect("Agent");
  auto target_before = collect("Target");
  Parameter& w = ps.at("decoder.role1.w");  // Target head
  std::fill(w.value.begin(), w.value.end(), Scalar(0));
  Parameter& b = ps.at("decoder.role1.b");
  std::fill(b.value.begin(), b.value.end(), Scalar(-5));
  EXPECT_EQ(collect("Agent"), agent_before);
  EXPECT_NE(collect("Target"), target_before);
  EXPECT_TRUE(collect("Target").empty());
}

TEST(TaggerMode, SpansFromDifferentRoleTaggersMayOverlap) {
  ParameterStore ps;
  Rng rng(3);
  ArgumentDecoder dec(ps, schema(), small_cfg(), rng);
  // Force Agent tagger to B at every token and Target tagger to I at every
  // token via bias-only parameters.
  for (auto& [name, p] : ps)
    std::fill(p.value.begin(), p.value.end(), Scalar(0));
  ps.at("decoder.tag0.b").value = {5, 0, 0};   // Agent: B
  ps.at("decoder.tag1.b").value = {0, 5, 0};   // Target: I
  Graph g;
  Rng dr(5);
  Tensor u = random_u(g, 3, dr);
  auto preds = dec.tag_without_entities(g, u, "ATTACK");
  std::size_t agent_spans = 0, target_spans = 0;
  for (const auto& p : preds) {
    if (p.role == "Agent") ++agent_spans;
    if (p.role == "Target") {
      ++target_spans;
      EXPECT_EQ(p.start, 0u);
      EXPECT_EQ(p.end, 2u);  // orphan-I run forms one span
    }
    EXPECT_EQ(p.source, "tagger-mode");
  }
  EXPECT_EQ(agent_spans, 3u);  // B B B decodes to three singleton spans
  EXPECT_EQ(target_spans, 1u);
}

TEST(TaggerMode, LossCoversPermissibleRolesOnly) {
  ParameterStore ps;
  Rng rng(3);
  ArgumentDecoder dec(ps, schema(), small_cfg(), rng);
  Graph g;
  Rng dr(5);
  Tensor u = random_u(g, 4, dr);
  EventRecord ev;
  ev.trigger_start = 0;
  ev.trigger_end = 0;
  ev.event_type = "MEET";
  ev.arguments = {{2, 3, "Place", std::nullopt}};
  Tensor loss = dec.tagger_mode_loss(g, u, ev);
  g.backward(loss);
  EXPECT_TRUE(ps.at("decoder.tag3.w").has_grad());   // Place
  EXPECT_FALSE(ps.at("decoder.tag1.w").has_grad());  // Target not permissible
}

TEST(TriggerTagger, GoldTagsEncodeOneBPerTrigger) {
  ParameterStore ps;
  Rng rng(3);
  ArgumentDecoder dec(ps, schema(), small_cfg(), rng);
  EventRecord ev;
  ev.trigger_start = 1;
  ev.trigger_end = 2;
  ev.event_type = "MEET";
  auto tags = dec.gold_trigger_tags(4, {ev});
  // O, B-MEET, I-MEET, O with MEET at type index 1.
  EXPECT_EQ(tags, (std::vector<int>{0, 3, 4, 0}));
  std::size_t b_count = 0;
  for (int t : tags) b_count += (t == 3);
  EXPECT_EQ(b_count, 1u);
}

TEST(TriggerTagger, AllOGoldSequenceHasFiniteLoss) {
  ParameterStore ps;
  Rng rng(3);
  ArgumentDecoder dec(ps, schema(), small_cfg(), rng);
  Graph g;
  Rng dr(5);
  Tensor b = random_u(g, 5, dr);
  Tensor loss = dec.trigger_aux_loss(g, b, {});
  EXPECT_TRUE(std::isfinite(loss.item()));
  EXPECT_GT(loss.item(), 0.0);
}

TEST(TriggerTagger, DecodesSpansWithTypes) {
  ParameterStore ps;
  Rng rng(3);
  ArgumentDecoder dec(ps, schema(), small_cfg(), rng);
  // Weights route b's first five features straight to the tag logits, so
  // one-hot rows pick tags directly. Tag order: O, B-ATTACK, I-ATTACK,
  // B-MEET, I-MEET.
  for (auto& [name, p] : ps)
    std::fill(p.value.begin(), p.value.end(), Scalar(0));
  Parameter& w = ps.at("decoder.trig.w");
  for (std::size_t c = 0; c < 5; ++c) w.value[c * 5 + c] = Scalar(1);
  auto one_hot = [](std::size_t idx) {
    std::vector<Scalar> row(8, Scalar(0));
    row[idx] = Scalar(3);
    return row;
  };
  std::vector<Scalar> rows;
  for (std::size_t tag : {0u, 1u, 2u, 0u, 4u}) {  // O B-A I-A O I-MEET
    auto r = one_hot(tag);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  Graph g;
  Tensor b = g.input({5, 8}, rows, false);
  auto triggers = dec.tag_triggers(g, b);
  ASSERT_EQ(triggers.size(), 2u);
  EXPECT_EQ(triggers[0].start, 1u);
  EXPECT_EQ(triggers[0].end, 2u);
  EXPECT_EQ(triggers[0].type, "ATTACK");
  // Orphan I-MEET opens its own span under the relaxed rule.
  EXPECT_EQ(triggers[1].start, 4u);
  EXPECT_EQ(triggers[1].end, 4u);
  EXPECT_EQ(triggers[1].type, "MEET");
}
