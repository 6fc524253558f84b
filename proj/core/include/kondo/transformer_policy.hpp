#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kondo/rng.hpp"
#include "kondo/tape.hpp"

namespace kondo {

struct TransformerConfig {
  std::size_t vocab = 2;  // output symbols; inputs add one SEP symbol when `separator` is set
  bool separator = true;
  std::size_t max_len = 32;
  std::size_t d_model = 64;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t ff = 256;
  double init_std = 0.02;
};

class TransformerDecoder;

/// Decoder-only pre-layernorm transformer with learned positions and an
/// untied output head.
///
/// Parameter order (also the checkpoint order): tok_emb, pos_emb, then per
/// block ln1.g, ln1.b, attn.w_qkv, attn.b_qkv, attn.w_o, attn.b_o, ln2.g,
/// ln2.b, ff.w1, ff.b1, ff.w2, ff.b2, and finally lnf.g, lnf.b, head.w,
/// head.b.
class TransformerPolicy {
 public:
  TransformerPolicy(TransformerConfig config, Rng& init);

  struct Output {
    Var logits;     // [rows, vocab]
    Var log_probs;  // [rows, vocab]
  };

  /// Teacher-forced pass over consecutive sequences of length seq_len packed
  /// in `tokens`. Only the packed rows listed in `out_rows` reach the head.
  /// Adds out_rows.size() forward samples to `meter`.
  Output forward(Tape& tape, std::span<const std::uint32_t> tokens, std::size_t seq_len,
                 std::span<const std::uint32_t> out_rows, ComputeMeter* meter = nullptr);

  /// Logits at every position (tape-free convenience over forward()).
  Tensor logits(std::span<const std::uint32_t> tokens, std::size_t seq_len);

  /// Incremental decoder with a key/value cache for n_seq sequences.
  TransformerDecoder decoder(std::size_t n_seq) const;

  std::size_t input_vocab() const { return config_.vocab + (config_.separator ? 1 : 0); }
  std::uint32_t sep_token() const { return static_cast<std::uint32_t>(config_.vocab); }
  const TransformerConfig& config() const { return config_; }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

 private:
  friend class TransformerDecoder;

  struct Block {
    Parameter ln1_g, ln1_b, w_qkv, b_qkv, w_o, b_o, ln2_g, ln2_b, w1, b1, w2, b2;
  };

  TransformerConfig config_;
  Parameter tok_emb_, pos_emb_;
  std::vector<Block> blocks_;
  Parameter lnf_g_, lnf_b_, head_w_, head_b_;
};

/// Feeds one token per sequence per call; reuses cached keys and values so a
/// position is never recomputed.
class TransformerDecoder {
 public:
  TransformerDecoder(const TransformerPolicy& policy, std::size_t n_seq);

  /// Appends tokens[i] to sequence i; returns next-token logits [n_seq, vocab].
  Tensor feed(std::span<const std::uint32_t> tokens);
  /// Replaces each sequence by `times` copies (sequence i becomes rows
  /// i*times .. i*times+times-1), sharing the prefix computed so far.
  void repeat_each(std::size_t times);

  std::size_t n_seq() const { return n_seq_; }
  std::size_t position() const { return pos_; }

 private:
  const TransformerPolicy* policy_;
  std::size_t n_seq_;
  std::size_t pos_ = 0;
  std::vector<Tensor> keys_;    // per layer [n_seq * max_len, d]
  std::vector<Tensor> values_;  // per layer [n_seq * max_len, d]
};

}  // namespace kondo
