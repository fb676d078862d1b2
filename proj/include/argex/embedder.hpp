#pragma once

// Desk-scale stand-in for the BERT encoder: token + position + trigger
// segment embeddings through a small Transformer stack. The interface the
// rest of the model depends on is (token ids, trigger span) -> T x d_tok,
// so a real pretrained encoder could be substituted behind it.
//
// Also hosts domain-adaptive pretraining: the masked-token objective, plus
// an optional next-sentence pair loss behind a flag (off by default).

#include <optional>
#include <string>
#include <vector>

#include "argex/data.hpp"
#include "argex/nn.hpp"
#include "argex/params.hpp"
#include "argex/vocab.hpp"

namespace argex {

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
};

struct EmbedderConfig {
  std::size_t vocab_size = 0;
  std::size_t d_tok = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_ff = 128;
  std::size_t max_position = 128;
  double dropout = 0.1;
  int mask_token_id = 2;
  int unk_token_id = 1;
  int pad_token_id = 0;
  bool use_segment = true;   // trigger segment added into the input sum
  bool use_nsp_head = false;

  void validate() const {
    if (vocab_size == 0) throw ConfigError("embedder: vocab_size unset");
    if (d_tok == 0 || n_heads == 0 || d_tok % n_heads != 0)
      throw ConfigError("embedder: d_tok must be divisible by n_heads");
    if (mask_token_id == unk_token_id || mask_token_id == pad_token_id ||
        unk_token_id == pad_token_id)
      throw ConfigError("embedder: special token ids must be distinct");
    for (int id : {mask_token_id, unk_token_id, pad_token_id})
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size)
        throw ConfigError("embedder: special token id outside vocabulary");
  }
};

class TokenEmbedder {
 public:
  TokenEmbedder(ParameterStore& ps, const EmbedderConfig& cfg, Rng& rng)
      : cfg_(cfg) {
    cfg_.validate();
    tok_ = &init::gaussian_table(ps, "embedder.tok", cfg_.vocab_size,
                                 cfg_.d_tok, rng);
    pos_ = &init::gaussian_table(ps, "embedder.pos", cfg_.max_position,
                                 cfg_.d_tok, rng);
    if (cfg_.use_segment)
      seg_ = &init::gaussian_table(ps, "embedder.seg", 2, cfg_.d_tok, rng);
    const std::size_t d_head = cfg_.d_tok / cfg_.n_heads;
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      Block blk;
      const std::string prefix = "embedder.l" + std::to_string(l);
      for (std::size_t h = 0; h < cfg_.n_heads; ++h)
        blk.heads.push_back(nn::AttentionHead::create(
            ps, prefix + ".h" + std::to_string(h), cfg_.d_tok, d_head, rng));
      blk.attn_out = nn::Linear::create(ps, prefix + ".attn_out", cfg_.d_tok,
                                        cfg_.d_tok, rng, true, 0.1);
      blk.tail = nn::BlockTail::create(ps, prefix, cfg_.d_tok, cfg_.d_ff, rng);
      blocks_.push_back(std::move(blk));
    }
    mlm_ = nn::Linear::create(ps, "embedder.mlm", cfg_.d_tok, cfg_.vocab_size,
                              rng);
    if (cfg_.use_nsp_head)
      nsp_ = nn::Linear::create(ps, "embedder.nsp", 2 * cfg_.d_tok, 1, rng);
  }

  const EmbedderConfig& config() const { return cfg_; }

  // B = contextual embeddings for one sentence. The segment id of token t is
  // 1 iff t lies inside the trigger span; no span means all zeros (the
  // pretraining setting).
  Tensor embed(Graph& g, const std::vector<int>& ids,
               const std::optional<Span>& trigger, bool train,
               Rng& rng) const {
    const std::size_t t = ids.size();
    if (t == 0) throw ValueError("embed: empty sentence");
    if (t > cfg_.max_position)
      throw ValueError("embed: sentence length " + std::to_string(t) +
                       " exceeds max_position " +
                       std::to_string(cfg_.max_position));
    if (trigger && (trigger->start > trigger->end || trigger->end >= t))
      throw ValueError("embed: trigger span [" +
                       std::to_string(trigger->start) + "," +
                       std::to_string(trigger->end) + "] outside " +
                       std::to_string(t) + " tokens");
    std::vector<int> positions(t);
    for (std::size_t i = 0; i < t; ++i) positions[i] = static_cast<int>(i);
    Tensor x = add(embedding_lookup(g.leaf(*tok_), ids),
                   embedding_lookup(g.leaf(*pos_), positions));
    if (seg_) {
      std::vector<int> seg_ids(t, 0);
      if (trigger)
        for (std::size_t i = trigger->start; i <= trigger->end; ++i)
          seg_ids[i] = 1;
      x = add(x, embedding_lookup(g.leaf(*seg_), seg_ids));
    }
    x = nn::maybe_dropout(x, cfg_.dropout, train, rng);
    for (const Block& blk : blocks_) {
      std::vector<Tensor> head_out;
      head_out.reserve(blk.heads.size());
      for (const nn::AttentionHead& h : blk.heads)
        head_out.push_back(h(g, x, nullptr));
      Tensor attn = blk.attn_out(g, concat(head_out, 1));
      x = blk.tail(g, x, attn, cfg_.dropout, train, rng);
    }
    return x;
  }

  // Vocabulary logits for selected rows of B (the masked positions).
  Tensor mlm_logits(Graph& g, const Tensor& b_rows) const {
    return mlm_(g, b_rows);
  }

  // Binary is-next logit for a sentence pair, each encoded separately.
  Tensor nsp_logit(Graph& g, const Tensor& b_a, const Tensor& b_b) const {
    if (!nsp_.w) throw ConfigError("nsp head disabled in config");
    Tensor pooled =
        concat({mean_pool_over_positions(b_a, 0, b_a.rows() - 1),
                mean_pool_over_positions(b_b, 0, b_b.rows() - 1)},
               1);
    return nsp_(g, pooled);
  }

 private:
  struct Block {
    std::vector<nn::AttentionHead> heads;
    nn::Linear attn_out;
    nn::BlockTail tail;
  };

  EmbedderConfig cfg_;
  Parameter* tok_ = nullptr;
  Parameter* pos_ = nullptr;
  Parameter* seg_ = nullptr;
  std::vector<Block> blocks_;
  nn::Linear mlm_;
  nn::Linear nsp_;
};

// ---------------------------------------------------------------------------
// Domain-adaptive pretraining
// ---------------------------------------------------------------------------

struct PretrainConfig {
  std::size_t steps = 200;
  std::size_t batch_size = 8;
  double lr = 1e-3;  // scaled up from the warm-start value; see README
  double select_prob = 0.15;
  bool next_sentence = false;
  std::uint64_t seed = 1;
};

struct PretrainRecord {
  std::vector<double> step_losses;
  std::size_t positions_seen = 0;
  std::size_t positions_selected = 0;
  bool next_sentence = false;
};

// Masked-token objective over an unlabeled pool: 15% of positions selected;
// of those 80% become the mask token, 10% a random token, 10% stay. Loss is
// cross-entropy over the selected positions only, with trigger segments all
// zero.
inline PretrainRecord pretrain_mlm(TokenEmbedder& embedder,
                                   ParameterStore& ps, const Corpus& pool,
                                   const Vocabulary& vocab,
                                   const PretrainConfig& cfg) {
  if (pool.sentences.empty())
    throw ValueError("pretrain: empty unlabeled corpus");
  if (cfg.steps < 1) throw ValueError("pretrain: steps must be >= 1");
  const EmbedderConfig& ecfg = embedder.config();
  const int first_regular = 3;  // random replacements avoid special ids
  if (ecfg.vocab_size <= static_cast<std::size_t>(first_regular))
    throw ConfigError("pretrain: vocabulary has no regular tokens");
  Rng rng(cfg.seed);
  ps.ensure_grads();
  AdamState adam(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  PretrainRecord record;
  record.next_sentence = cfg.next_sentence;
  const int n_sent = static_cast<int>(pool.sentences.size());
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Graph g;
    std::optional<Tensor> loss;
    std::size_t contributions = 0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const SentenceRecord& rec =
          pool.sentences[static_cast<std::size_t>(rng.uniform_int(0, n_sent - 1))];
      std::vector<int> ids = vocab.encode(rec.tokens);
      std::vector<int> selected_rows;
      std::vector<int> targets;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        ++record.positions_seen;
        if (!rng.bernoulli(cfg.select_prob)) continue;
        ++record.positions_selected;
        selected_rows.push_back(static_cast<int>(i));
        targets.push_back(ids[i]);
        const double u = rng.uniform();
        if (u < 0.8)
          ids[i] = ecfg.mask_token_id;
        else if (u < 0.9)
          ids[i] = rng.uniform_int(first_regular,
                                   static_cast<int>(ecfg.vocab_size) - 1);
        // else: keep the original token
      }
      if (selected_rows.empty()) continue;
      Tensor b_out = embedder.embed(g, ids, std::nullopt, true, rng);
      Tensor logits =
          embedder.mlm_logits(g, gather_rows(b_out, selected_rows));
      Tensor l = cross_entropy(logits, targets, Reduction::Mean);
      if (cfg.next_sentence) {
        const int a_idx = rng.uniform_int(0, n_sent - 1);
        const bool is_next = rng.bernoulli(0.5) && a_idx + 1 < n_sent &&
                             pool.sentences[static_cast<std::size_t>(a_idx)]
                                     .doc_id ==
                                 pool.sentences[static_cast<std::size_t>(
                                                    a_idx + 1)]
                                     .doc_id;
        const int b_idx = is_next ? a_idx + 1 : rng.uniform_int(0, n_sent - 1);
        Tensor ea = embedder.embed(
            g, vocab.encode(pool.sentences[static_cast<std::size_t>(a_idx)].tokens),
            std::nullopt, true, rng);
        Tensor eb = embedder.embed(
            g, vocab.encode(pool.sentences[static_cast<std::size_t>(b_idx)].tokens),
            std::nullopt, true, rng);
        Tensor nsp = binary_cross_entropy_with_logits(
            embedder.nsp_logit(g, ea, eb),
            {is_next ? Scalar(1) : Scalar(0)}, Reduction::Sum);
        l = add(l, nsp);
      }
      loss = loss ? add(*loss, l) : l;
      ++contributions;
    }
    if (!loss) {
      record.step_losses.push_back(0.0);
      continue;
    }
    Tensor total = scale(*loss, Scalar(1) / static_cast<Scalar>(contributions));
    record.step_losses.push_back(total.item());
    g.backward(total);
    adam.step(ps);
  }
  return record;
}

}  // namespace argex
