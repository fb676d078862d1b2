#pragma once

// Full model assembly: embedder -> trigger-aware encoder -> syntax
// transformer -> role-specific decoder, with one forward pass per
// (sentence, trigger) instance.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "argex/data.hpp"
#include "argex/decoder.hpp"
#include "argex/embedder.hpp"
#include "argex/syntax_transformer.hpp"
#include "argex/trigger_encoder.hpp"
#include "argex/vocab.hpp"

namespace argex {

enum class Mode { Entities, Plain };

struct ModelConfig {
  EmbedderConfig embedder;
  TriggerEncoderConfig trig;
  SyntaxConfig syntax;
  DecoderConfig decoder;
  Mode mode = Mode::Entities;

  void validate() const {
    embedder.validate();
    if (trig.d_model != syntax.d_model || decoder.d_model != syntax.d_model)
      throw ConfigError("d_model must agree across encoder, syntax, decoder");
    if (decoder.d_tok != embedder.d_tok)
      throw ConfigError("decoder d_tok must match embedder d_tok");
  }
};

// A sentence prepared for the model: token ids and parse neighbor sets are
// computed once and shared by every trigger instance.
struct EncodedSentence {
  const SentenceRecord* rec = nullptr;
  std::vector<int> token_ids;
  NeighborSets nbrs;
};

inline EncodedSentence encode_sentence(const SentenceRecord& rec,
                                       const Vocabulary& vocab) {
  EncodedSentence s;
  s.rec = &rec;
  s.token_ids = vocab.encode(rec.tokens);
  s.nbrs = NeighborSets::from_heads(rec.dep_heads);
  return s;
}

class Model {
 public:
  Model(const ModelConfig& cfg, const RoleSchema& schema,
        std::uint64_t init_seed)
      : cfg_(cfg), schema_(schema) {
    cfg_.validate();
    Rng rng(init_seed);
    embedder_ = std::make_unique<TokenEmbedder>(params_, cfg_.embedder, rng);
    trig_enc_ = std::make_unique<TriggerEncoder>(
        params_, cfg_.trig, schema_.trigger_types.size(), cfg_.embedder.d_tok,
        rng);
    syntax_ = std::make_unique<SyntaxTransformer>(params_, cfg_.syntax, rng);
    decoder_ = std::make_unique<ArgumentDecoder>(params_, schema_,
                                                 cfg_.decoder, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  const RoleSchema& schema() const { return schema_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  TokenEmbedder& embedder() { return *embedder_; }
  ArgumentDecoder& decoder() { return *decoder_; }

  // U^L for one (sentence, trigger) pair.
  Tensor encode_instance(Graph& g, const EncodedSentence& sent, Span trigger,
                         int type_idx, bool train, Rng& rng,
                         AttentionTrace* trace = nullptr) const {
    Tensor b = embedder_->embed(g, sent.token_ids, trigger, train, rng);
    Tensor c = trig_enc_->encode(g, b, trigger, type_idx);
    Tensor u0 = trig_enc_->project(g, c);
    return syntax_->forward(g, u0, sent.nbrs, train, rng, trace);
  }

  // Supervised loss for one gold event instance, in the configured mode.
  Tensor instance_loss(Graph& g, const EncodedSentence& sent,
                       const EventRecord& gold, bool train, Rng& rng) const {
    const Span trigger{gold.trigger_start, gold.trigger_end};
    Tensor u = encode_instance(g, sent, trigger,
                               schema_.trigger_index(gold.event_type), train,
                               rng);
    return cfg_.mode == Mode::Entities
               ? decoder_->entity_mode_loss(g, u, sent.rec->entities, gold)
               : decoder_->tagger_mode_loss(g, u, gold);
  }

  // Auxiliary trigger-detection loss over the shared embedder output; the
  // trigger-conditioned tables and the syntax stack are not on this path.
  Tensor auxiliary_loss(Graph& g, const EncodedSentence& sent, bool train,
                        Rng& rng) const {
    Tensor b = embedder_->embed(g, sent.token_ids, std::nullopt, train, rng);
    return decoder_->trigger_aux_loss(g, b, sent.rec->events);
  }

  std::vector<RolePrediction> predict_arguments(
      const EncodedSentence& sent, Span trigger,
      const std::string& event_type, AttentionTrace* trace = nullptr) const {
    Graph g;
    Rng rng(0);  // eval mode draws nothing
    Tensor u = encode_instance(g, sent, trigger,
                               schema_.trigger_index(event_type), false, rng,
                               trace);
    return cfg_.mode == Mode::Entities
               ? decoder_->classify_with_entities(g, u, sent.rec->entities,
                                                  event_type)
               : decoder_->tag_without_entities(g, u, event_type);
  }

  std::vector<TriggerPrediction> predict_triggers(
      const EncodedSentence& sent) const {
    Graph g;
    Rng rng(0);
    Tensor b = embedder_->embed(g, sent.token_ids, std::nullopt, false, rng);
    return decoder_->tag_triggers(g, b);
  }

 private:
  ModelConfig cfg_;
  RoleSchema schema_;
  ParameterStore params_;
  std::unique_ptr<TokenEmbedder> embedder_;
  std::unique_ptr<TriggerEncoder> trig_enc_;
  std::unique_ptr<SyntaxTransformer> syntax_;
  std::unique_ptr<ArgumentDecoder> decoder_;
};

}  // namespace argex
