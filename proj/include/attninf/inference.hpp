#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "attninf/checkpoint.hpp"
#include "attninf/config.hpp"
#include "attninf/tokenizer.hpp"

namespace attninf {

/// Post-mask attention summary of one forward pass: for every layer, head and
/// query position, the argmax-attended key position and its weight. Full
/// probability rows are stored only when requested.
class AttentionTrace {
 public:
  AttentionTrace() = default;
  AttentionTrace(std::size_t n_layers, std::size_t n_heads, std::size_t seq_len, bool full_rows);

  std::size_t n_layers() const { return n_layers_; }
  std::size_t n_heads() const { return n_heads_; }
  std::size_t seq_len() const { return seq_len_; }
  bool has_full_rows() const { return !full_rows_.empty(); }

  std::uint32_t argmax_pos(HeadId head, std::size_t t) const { return argmax_pos_[index(head, t)]; }
  float argmax_weight(HeadId head, std::size_t t) const { return argmax_weight_[index(head, t)]; }
  // Probabilities over positions 0..t. Requires has_full_rows().
  std::span<const float> row(HeadId head, std::size_t t) const;

  // Per-layer slices handed to the attention kernel.
  std::span<std::uint32_t> layer_argmax_pos(std::size_t layer);
  std::span<float> layer_argmax_weight(std::size_t layer);
  std::span<float> layer_full_rows(std::size_t layer);

 private:
  std::size_t index(HeadId head, std::size_t t) const {
    return (head.layer * n_heads_ + head.head) * seq_len_ + t;
  }

  std::size_t n_layers_ = 0;
  std::size_t n_heads_ = 0;
  std::size_t seq_len_ = 0;
  std::vector<std::uint32_t> argmax_pos_;
  std::vector<float> argmax_weight_;
  std::vector<float> full_rows_;
};

enum class Backend { serial, parallel };

struct ForwardOptions {
  bool capture_full_rows = false;
  Backend backend = Backend::parallel;
};

struct ForwardResult {
  std::size_t seq_len = 0;
  std::size_t vocab_size = 0;
  std::vector<float> logits;  // seq_len x vocab_size
  AttentionTrace trace;

  std::span<const float> logits_at(std::size_t t) const {
    return std::span<const float>(logits).subspan(t * vocab_size, vocab_size);
  }
};

/// Teacher-forced pass over the whole sequence. Heads in `mask` attend
/// uniformly (1/(t+1)) over the visible prefix. Deterministic bit-for-bit for
/// fixed inputs, independent of backend and thread count.
ForwardResult forward_with_trace(const ModelCheckpoint& checkpoint, std::span<const TokenId> tokens,
                                 const HeadMask& mask, ForwardOptions options = {});

/// Half-open range of target positions [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

// -log softmax(logits)[target] computed in float32 with max subtraction.
float token_nll(std::span<const float> logits, TokenId target);

// Mean NLL of tokens[i] given logits row i-1, over target positions in span.
double mean_nll_from_logits(const ForwardResult& forward, std::span<const TokenId> tokens, Span span);

/// Mean token-level cross-entropy over target positions 1..n-1 (natural log).
double mean_ce_loss(const ModelCheckpoint& checkpoint, std::span<const TokenId> tokens,
                    const HeadMask& mask, Backend backend = Backend::parallel);

/// Mean NLL restricted to target positions inside span, span within [1, n).
double ce_loss_over_span(const ModelCheckpoint& checkpoint, std::span<const TokenId> tokens,
                         const HeadMask& mask, Span span, Backend backend = Backend::parallel);

}  // namespace attninf
