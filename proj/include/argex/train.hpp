#pragma once

// Supervised training with main/auxiliary batch alternation and early
// stopping on dev role-classification F1; the four-stage self-training
// regime; end-to-end prediction with gold or tagger-supplied triggers.

#include <chrono>
#include <cstdio>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "argex/eval.hpp"
#include "argex/model.hpp"
#include "argex/params.hpp"

namespace argex {

struct TrainConfig {
  std::size_t batch_size = 32;
  double main_prob = 0.9;  // auxiliary batches drawn with 1 - main_prob
  bool auxiliary = true;
  double lr = 3e-3;
  double grad_clip = 5.0;  // global-norm ceiling; 0 disables
  std::size_t patience = 20;
  std::size_t max_epochs = 60;
  std::uint64_t seed = 1;
  double silver_confidence = 0.0;  // 0 keeps every silver prediction

  void validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (main_prob < 0 || main_prob > 1)
      throw ConfigError("main_prob must lie in [0, 1]");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  }
};

struct EpochRow {
  std::size_t epoch = 0;
  ScoreReport dev;
};

struct RunRecord {
  std::vector<EpochRow> epochs;
  std::size_t best_epoch = 0;
  double best_dev_rc_f1 = 0.0;
  std::string best_checkpoint_id;
  std::uint64_t seed = 0;
  std::string config_hash;
  double wall_seconds = 0.0;
};

struct TrainResult {
  std::unique_ptr<Model> model;
  RunRecord record;
};

inline bool draw_auxiliary(Rng& rng, double aux_prob) {
  return rng.uniform() < aux_prob;
}

// Scales every gradient so their global L2 norm stays below max_norm.
inline void clip_gradients(ParameterStore& params, double max_norm) {
  double sq = 0;
  for (const auto& [name, p] : params)
    for (Scalar g : p.grad) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const Scalar s = static_cast<Scalar>(max_norm / norm);
  for (auto& [name, p] : params)
    for (Scalar& g : p.grad) g *= s;
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

enum class TriggerSource { Gold, Tagger };

inline void require_parses(const SentenceRecord& rec) {
  if (rec.dep_heads.size() != rec.size())
    throw ValueError("sentence " + rec.doc_id + "/" + rec.sent_id +
                     " lacks a dependency parse");
}

inline std::vector<PredictionLine> predict_sentence(
    const Model& model, const EncodedSentence& sent, TriggerSource source) {
  std::vector<PredictionLine> out;
  const SentenceRecord& rec = *sent.rec;
  auto emit = [&](Span trig, const std::string& type,
                  const std::string& src) {
    PredictionLine line;
    line.doc_id = rec.doc_id;
    line.sent_id = rec.sent_id;
    line.trigger_start = trig.start;
    line.trigger_end = trig.end;
    line.event_type = type;
    line.trigger_source = src;
    for (const RolePrediction& rp :
         model.predict_arguments(sent, trig, type))
      line.arguments.push_back({rp.start, rp.end, rp.role, rp.score});
    out.push_back(std::move(line));
  };
  if (source == TriggerSource::Gold) {
    for (const EventRecord& ev : rec.events)
      emit({ev.trigger_start, ev.trigger_end}, ev.event_type, "gold");
  } else {
    for (const TriggerPrediction& tp : model.predict_triggers(sent))
      emit({tp.start, tp.end}, tp.type, "predicted");
  }
  return out;
}

// One decoder pass per (sentence, trigger); deterministic in eval mode.
// Sharding across threads keeps the output in sentence order.
inline std::vector<PredictionLine> predict_corpus(
    const Model& model, const Corpus& corpus, const Vocabulary& vocab,
    TriggerSource source, std::size_t threads = 1) {
  const std::size_t n = corpus.sentences.size();
  for (const SentenceRecord& rec : corpus.sentences) require_parses(rec);
  std::vector<std::vector<PredictionLine>> per_sentence(n);
  threads = std::max<std::size_t>(1, std::min(threads, n == 0 ? 1 : n));
  auto work = [&](std::size_t shard) {
    for (std::size_t i = shard; i < n; i += threads) {
      EncodedSentence sent = encode_sentence(corpus.sentences[i], vocab);
      per_sentence[i] = predict_sentence(model, sent, source);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t s = 0; s < threads; ++s) pool.emplace_back(work, s);
    for (std::thread& t : pool) t.join();
  }
  std::vector<PredictionLine> out;
  for (std::vector<PredictionLine>& v : per_sentence)
    for (PredictionLine& p : v) out.push_back(std::move(p));
  return out;
}

// ---------------------------------------------------------------------------
// Training core
// ---------------------------------------------------------------------------

namespace detail_train {

inline void write_tsv_row(std::ostream& os, std::size_t epoch,
                          const char* split, const ScoreReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%zu\t%s\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\n", epoch, split,
                r.ai_p, r.ai_r, r.ai_f1, r.rc_p, r.rc_r, r.rc_f1);
  os << buf;
}

}  // namespace detail_train

// Fits an existing model in place (used for self-training fine-tuning);
// restores the best-epoch parameters before returning.
inline RunRecord fit(Model& model, const Corpus& train_c, const Corpus& dev_c,
                     const Vocabulary& vocab, const TrainConfig& cfg,
                     std::ostream* metrics_tsv = nullptr,
                     const std::string& config_hash = "") {
  cfg.validate();
  if (train_c.sentences.empty() || dev_c.sentences.empty())
    throw ValueError("train and dev splits must be non-empty");
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<EncodedSentence> enc;
  enc.reserve(train_c.sentences.size());
  for (const SentenceRecord& rec : train_c.sentences) {
    require_parses(rec);
    enc.push_back(encode_sentence(rec, vocab));
  }
  std::vector<std::pair<std::size_t, std::size_t>> instances;
  for (std::size_t i = 0; i < train_c.sentences.size(); ++i)
    for (std::size_t j = 0; j < train_c.sentences[i].events.size(); ++j)
      instances.push_back({i, j});
  if (instances.empty())
    throw ValueError("train split has no event instances");

  model.params().ensure_grads();
  AdamState adam(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  Rng rng(cfg.seed ^ 0xa5a5a5a55a5a5a5aull);
  const double aux_prob = cfg.auxiliary ? 1.0 - cfg.main_prob : 0.0;
  const int n_train = static_cast<int>(train_c.sentences.size());

  RunRecord record;
  record.seed = cfg.seed;
  record.config_hash = config_hash;
  ParameterStore::Snapshot best;
  std::size_t since_best = 0;
  if (metrics_tsv)
    *metrics_tsv << "epoch\tsplit\tai_p\tai_r\tai_f1\trc_p\trc_r\trc_f1\n";

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(instances);
    std::size_t cursor = 0;
    while (cursor < instances.size()) {
      Graph g;
      std::optional<Tensor> loss;
      std::size_t count = 0;
      if (draw_auxiliary(rng, aux_prob)) {
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
          const std::size_t si =
              static_cast<std::size_t>(rng.uniform_int(0, n_train - 1));
          Tensor l = model.auxiliary_loss(g, enc[si], true, rng);
          loss = loss ? add(*loss, l) : l;
          ++count;
        }
      } else {
        for (std::size_t b = 0; b < cfg.batch_size && cursor < instances.size();
             ++b) {
          const auto [si, ei] = instances[cursor++];
          Tensor l = model.instance_loss(
              g, enc[si], train_c.sentences[si].events[ei], true, rng);
          loss = loss ? add(*loss, l) : l;
          ++count;
        }
      }
      if (!count) continue;
      Tensor total = scale(*loss, Scalar(1) / static_cast<Scalar>(count));
      g.backward(total);
      if (cfg.grad_clip > 0) clip_gradients(model.params(), cfg.grad_clip);
      adam.step(model.params());
    }

    std::vector<PredictionLine> preds =
        predict_corpus(model, dev_c, vocab, TriggerSource::Gold);
    const ScoreReport rep = score(preds, dev_c);
    record.epochs.push_back({epoch, rep});
    if (metrics_tsv) detail_train::write_tsv_row(*metrics_tsv, epoch, "dev", rep);
    if (rep.rc_f1 > record.best_dev_rc_f1 || best.empty()) {
      record.best_dev_rc_f1 = rep.rc_f1;
      record.best_epoch = epoch;
      best = model.params().snapshot();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  if (!best.empty()) model.params().restore(best);
  record.best_checkpoint_id = "epoch_" + std::to_string(record.best_epoch);
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return record;
}

inline TrainResult train_model(const Corpus& train_c, const Corpus& dev_c,
                               const Vocabulary& vocab,
                               const ModelConfig& mcfg, const TrainConfig& cfg,
                               std::ostream* metrics_tsv = nullptr,
                               const std::string& config_hash = "") {
  auto model = std::make_unique<Model>(mcfg, train_c.schema, cfg.seed);
  RunRecord record =
      fit(*model, train_c, dev_c, vocab, cfg, metrics_tsv, config_hash);
  return {std::move(model), std::move(record)};
}

// ---------------------------------------------------------------------------
// Self-training
// ---------------------------------------------------------------------------

struct SelfTrainRecord {
  RunRecord stage1_gold;
  std::size_t silver_sentences = 0;
  std::size_t silver_events = 0;
  std::size_t silver_arguments = 0;
  RunRecord stage3_silver;
  RunRecord stage4_finetune;
};

struct SelfTrainResult {
  std::unique_ptr<Model> model;
  SelfTrainRecord record;
  Corpus silver;
};

// Pool sentences annotated with tagger-predicted events; arguments below the
// confidence floor are dropped.
inline Corpus build_silver(const Corpus& pool,
                           const std::vector<PredictionLine>& preds,
                           double confidence) {
  Corpus silver;
  silver.schema = pool.schema;
  std::map<std::pair<std::string, std::string>, std::vector<const PredictionLine*>>
      by_sent;
  for (const PredictionLine& p : preds)
    by_sent[{p.doc_id, p.sent_id}].push_back(&p);
  for (const SentenceRecord& rec : pool.sentences) {
    SentenceRecord out = rec;
    out.events.clear();
    out.provenance = "silver";
    for (const PredictionLine* p : by_sent[{rec.doc_id, rec.sent_id}]) {
      EventRecord ev;
      ev.trigger_start = p->trigger_start;
      ev.trigger_end = p->trigger_end;
      ev.event_type = p->event_type;
      for (const PredArg& a : p->arguments) {
        if (a.score < confidence) continue;
        ArgumentRecord ar;
        ar.start = a.start;
        ar.end = a.end;
        ar.role = a.role;
        for (std::size_t i = 0; i < out.entities.size(); ++i)
          if (out.entities[i].start == a.start &&
              out.entities[i].end == a.end) {
            ar.entity_index = i;
            break;
          }
        ev.arguments.push_back(std::move(ar));
      }
      out.events.push_back(std::move(ev));
    }
    validate_record(out, silver.schema);
    silver.sentences.push_back(std::move(out));
  }
  return silver;
}

// Four stages: train on gold, tag the pool into silver, train a fresh model
// on silver, fine-tune on gold. Early stopping always monitors the gold dev
// split.
inline SelfTrainResult self_train(const Corpus& gold_train,
                                  const Corpus& gold_dev, const Corpus& pool,
                                  const Vocabulary& vocab,
                                  const ModelConfig& mcfg,
                                  const TrainConfig& cfg,
                                  std::size_t tagging_threads = 1,
                                  const std::string& config_hash = "") {
  if (pool.sentences.empty())
    throw ValueError("self-train: empty unlabeled pool");
  auto wrap = [](int stage, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      throw Error("self-train stage " + std::to_string(stage) + ": " +
                  e.what());
    }
  };
  SelfTrainResult result;
  TrainResult s1 = wrap(1, [&] {
    return train_model(gold_train, gold_dev, vocab, mcfg, cfg, nullptr,
                       config_hash);
  });
  result.record.stage1_gold = s1.record;
  result.silver = wrap(2, [&] {
    std::vector<PredictionLine> preds = predict_corpus(
        *s1.model, pool, vocab, TriggerSource::Tagger, tagging_threads);
    return build_silver(pool, preds, cfg.silver_confidence);
  });
  result.record.silver_sentences = result.silver.sentences.size();
  for (const SentenceRecord& rec : result.silver.sentences) {
    result.record.silver_events += rec.events.size();
    for (const EventRecord& ev : rec.events)
      result.record.silver_arguments += ev.arguments.size();
  }
  TrainConfig c3 = cfg;
  c3.seed = cfg.seed + 1;  // fresh initialization, independent stream
  TrainResult s3 = wrap(3, [&] {
    return train_model(result.silver, gold_dev, vocab, mcfg, c3, nullptr,
                       config_hash);
  });
  result.record.stage3_silver = s3.record;
  TrainConfig c4 = cfg;
  c4.seed = cfg.seed + 2;
  result.record.stage4_finetune = wrap(4, [&] {
    return fit(*s3.model, gold_train, gold_dev, vocab, c4, nullptr,
               config_hash);
  });
  result.model = std::move(s3.model);
  return result;
}

// ---------------------------------------------------------------------------
// Run record serialization
// ---------------------------------------------------------------------------

inline nlohmann::json run_record_json(const RunRecord& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const EpochRow& e : r.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"dev", report_json(e.dev)}});
  return {{"epochs", std::move(epochs)},
          {"best_epoch", r.best_epoch},
          {"best_dev_rc_f1", r.best_dev_rc_f1},
          {"best_checkpoint_id", r.best_checkpoint_id},
          {"seed", r.seed},
          {"config_hash", r.config_hash},
          {"wall_seconds", r.wall_seconds}};
}

inline nlohmann::json self_train_record_json(const SelfTrainRecord& r) {
  return {{"stage1_gold", run_record_json(r.stage1_gold)},
          {"stage2_silver",
           {{"sentences", r.silver_sentences},
            {"events", r.silver_events},
            {"arguments", r.silver_arguments}}},
          {"stage3_silver", run_record_json(r.stage3_silver)},
          {"stage4_finetune", run_record_json(r.stage4_finetune)}};
}

}  // namespace argex
