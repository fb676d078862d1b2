#pragma once

// Flat key/value run configuration (JSON object syntax). One namespace of
// keys covers generation, model, and training; the CLI layers file values
// and --set overrides on top of the defaults below.

#include <fstream>
#include <set>
#include <string>

#include "argex/embedder.hpp"
#include "argex/model.hpp"
#include "argex/synth.hpp"
#include "argex/train.hpp"
#include <json.hpp>

namespace argex {

inline constexpr char kVersion[] = "argex 0.3.0";

using FlatConfig = nlohmann::json;

inline FlatConfig default_flat_config() {
  return {
      {"seed", 1},
      {"mode", "entities"},
      {"trigger_source", "gold"},
      // synthetic generation
      {"gen_vocab_size", 120},
      {"gen_event_types", 5},
      {"gen_roles", 8},
      {"gen_sentences", 800},
      {"gen_unlabeled", 800},
      {"gen_min_len", 6},
      {"gen_max_len", 18},
      {"gen_overlap_rate", 0.10},
      {"gen_long_range_rate", 0.15},
      {"gen_long_range_k", 8},
      {"gen_two_trigger_rate", 0.35},
      {"gen_eventless_rate", 0.10},
      {"gen_dev_fraction", 0.25},
      {"gen_sentences_per_doc", 10},
      // embedder
      {"emb_d_tok", 64},
      {"emb_layers", 2},
      {"emb_heads", 2},
      {"emb_d_ff", 128},
      {"emb_max_position", 128},
      {"emb_dropout", 0.1},
      // trigger encoder + syntax transformer
      {"d_type", 50},
      {"d_ind", 50},
      {"d_model", 64},
      {"syn_layers", 2},
      {"syn_heads", 2},
      {"syn_d_ff", 128},
      {"syn_dropout", 0.1},
      // ablation switches
      {"use_ti", true},
      {"use_tt", true},
      {"use_te", true},
      {"use_auxiliary", true},
      {"use_d_head", true},
      // decoder
      {"threshold", 0.5},
      {"entity_pooling", "max"},
      {"entity_type_filter", nlohmann::json::array()},
      // training
      {"batch_size", 32},
      {"main_prob", 0.9},
      {"lr", 3e-3},
      {"grad_clip", 5.0},
      {"patience", 20},
      {"max_epochs", 60},
      {"silver_confidence", 0.0},
      // pretraining
      {"pre_steps", 200},
      {"pre_batch", 8},
      {"pre_lr", 1e-3},
      {"pre_select_prob", 0.15},
      {"pre_nsp", false},
  };
}

inline void check_known_keys(const FlatConfig& cfg) {
  static const FlatConfig defaults = default_flat_config();
  for (const auto& [key, _] : cfg.items())
    if (!defaults.contains(key))
      throw ConfigError("unknown config key: " + key);
}

inline FlatConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  FlatConfig cfg;
  try {
    in >> cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
  check_known_keys(cfg);
  return cfg;
}

inline void merge_config(FlatConfig& base, const FlatConfig& over) {
  for (const auto& [key, value] : over.items()) base[key] = value;
}

// --set key=value; the value is JSON when it parses as such, else a string.
inline void apply_set_override(FlatConfig& cfg, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key=value, got: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  static const FlatConfig defaults = default_flat_config();
  if (!defaults.contains(key)) throw ConfigError("unknown config key: " + key);
  FlatConfig value = FlatConfig::parse(raw, nullptr, false);
  cfg[key] = value.is_discarded() ? FlatConfig(raw) : value;
}

inline std::string config_hash(const FlatConfig& cfg) {
  const std::string text = cfg.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Typed views
// ---------------------------------------------------------------------------

inline synth::GenConfig to_gen_config(const FlatConfig& cfg) {
  synth::GenConfig g;
  g.vocab_size = cfg.at("gen_vocab_size").get<std::size_t>();
  g.n_event_types = cfg.at("gen_event_types").get<std::size_t>();
  g.n_roles = cfg.at("gen_roles").get<std::size_t>();
  g.n_sentences = cfg.at("gen_sentences").get<std::size_t>();
  g.n_unlabeled = cfg.at("gen_unlabeled").get<std::size_t>();
  g.min_len = cfg.at("gen_min_len").get<std::size_t>();
  g.max_len = cfg.at("gen_max_len").get<std::size_t>();
  g.overlap_rate = cfg.at("gen_overlap_rate").get<double>();
  g.long_range_rate = cfg.at("gen_long_range_rate").get<double>();
  g.long_range_k = cfg.at("gen_long_range_k").get<std::size_t>();
  g.two_trigger_rate = cfg.at("gen_two_trigger_rate").get<double>();
  g.eventless_rate = cfg.at("gen_eventless_rate").get<double>();
  g.dev_fraction = cfg.at("gen_dev_fraction").get<double>();
  g.sentences_per_doc = cfg.at("gen_sentences_per_doc").get<std::size_t>();
  return g;
}

inline Mode to_mode(const FlatConfig& cfg) {
  const std::string m = cfg.at("mode").get<std::string>();
  if (m == "entities") return Mode::Entities;
  if (m == "plain") return Mode::Plain;
  throw ConfigError("mode must be 'entities' or 'plain', got: " + m);
}

inline ModelConfig to_model_config(const FlatConfig& cfg,
                                   std::size_t vocab_size) {
  ModelConfig m;
  const bool ti = cfg.at("use_ti").get<bool>();
  m.embedder.vocab_size = vocab_size;
  m.embedder.d_tok = cfg.at("emb_d_tok").get<std::size_t>();
  m.embedder.n_layers = cfg.at("emb_layers").get<std::size_t>();
  m.embedder.n_heads = cfg.at("emb_heads").get<std::size_t>();
  m.embedder.d_ff = cfg.at("emb_d_ff").get<std::size_t>();
  m.embedder.max_position = cfg.at("emb_max_position").get<std::size_t>();
  m.embedder.dropout = cfg.at("emb_dropout").get<double>();
  m.embedder.use_segment = ti;
  m.embedder.use_nsp_head = cfg.at("pre_nsp").get<bool>();
  m.trig.d_type = cfg.at("d_type").get<std::size_t>();
  m.trig.d_ind = cfg.at("d_ind").get<std::size_t>();
  m.trig.d_model = cfg.at("d_model").get<std::size_t>();
  m.trig.use_trigger_indicator = ti;
  m.trig.use_trigger_type = cfg.at("use_tt").get<bool>();
  m.trig.use_trigger_embedding = cfg.at("use_te").get<bool>();
  m.syntax.n_layers = cfg.at("syn_layers").get<std::size_t>();
  m.syntax.n_heads = cfg.at("syn_heads").get<std::size_t>();
  m.syntax.d_model = cfg.at("d_model").get<std::size_t>();
  m.syntax.d_ff = cfg.at("syn_d_ff").get<std::size_t>();
  m.syntax.dropout = cfg.at("syn_dropout").get<double>();
  m.syntax.use_d_head = cfg.at("use_d_head").get<bool>();
  m.decoder.d_model = m.trig.d_model;
  m.decoder.d_tok = m.embedder.d_tok;
  m.decoder.threshold = cfg.at("threshold").get<double>();
  const std::string pooling = cfg.at("entity_pooling").get<std::string>();
  if (pooling == "max")
    m.decoder.entity_pooling = Pooling::Max;
  else if (pooling == "mean")
    m.decoder.entity_pooling = Pooling::Mean;
  else
    throw ConfigError("entity_pooling must be 'max' or 'mean'");
  m.decoder.entity_type_filter =
      cfg.at("entity_type_filter").get<std::vector<std::string>>();
  m.mode = to_mode(cfg);
  return m;
}

inline TrainConfig to_train_config(const FlatConfig& cfg) {
  TrainConfig t;
  t.batch_size = cfg.at("batch_size").get<std::size_t>();
  t.main_prob = cfg.at("main_prob").get<double>();
  t.auxiliary = cfg.at("use_auxiliary").get<bool>();
  t.lr = cfg.at("lr").get<double>();
  t.grad_clip = cfg.at("grad_clip").get<double>();
  t.patience = cfg.at("patience").get<std::size_t>();
  t.max_epochs = cfg.at("max_epochs").get<std::size_t>();
  t.seed = cfg.at("seed").get<std::uint64_t>();
  t.silver_confidence = cfg.at("silver_confidence").get<double>();
  t.validate();
  return t;
}

inline PretrainConfig to_pretrain_config(const FlatConfig& cfg) {
  PretrainConfig p;
  p.steps = cfg.at("pre_steps").get<std::size_t>();
  p.batch_size = cfg.at("pre_batch").get<std::size_t>();
  p.lr = cfg.at("pre_lr").get<double>();
  p.select_prob = cfg.at("pre_select_prob").get<double>();
  p.next_sentence = cfg.at("pre_nsp").get<bool>();
  p.seed = cfg.at("seed").get<std::uint64_t>();
  return p;
}

}  // namespace argex
