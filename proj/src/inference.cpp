#include "attninf/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "attninf/kernels.hpp"

namespace attninf {

AttentionTrace::AttentionTrace(std::size_t n_layers, std::size_t n_heads, std::size_t seq_len,
                               bool full_rows)
    : n_layers_(n_layers),
      n_heads_(n_heads),
      seq_len_(seq_len),
      argmax_pos_(n_layers * n_heads * seq_len),
      argmax_weight_(n_layers * n_heads * seq_len) {
  if (full_rows) full_rows_.resize(n_layers * n_heads * kernels::tri_offset(seq_len));
}

std::span<const float> AttentionTrace::row(HeadId head, std::size_t t) const {
  if (full_rows_.empty()) throw std::logic_error("attention trace captured without full rows");
  const std::size_t block = (head.layer * n_heads_ + head.head) * kernels::tri_offset(seq_len_);
  return std::span<const float>(full_rows_).subspan(block + kernels::tri_offset(t), t + 1);
}

std::span<std::uint32_t> AttentionTrace::layer_argmax_pos(std::size_t layer) {
  return std::span<std::uint32_t>(argmax_pos_).subspan(layer * n_heads_ * seq_len_, n_heads_ * seq_len_);
}

std::span<float> AttentionTrace::layer_argmax_weight(std::size_t layer) {
  return std::span<float>(argmax_weight_).subspan(layer * n_heads_ * seq_len_, n_heads_ * seq_len_);
}

std::span<float> AttentionTrace::layer_full_rows(std::size_t layer) {
  if (full_rows_.empty()) return {};
  const std::size_t block = n_heads_ * kernels::tri_offset(seq_len_);
  return std::span<float>(full_rows_).subspan(layer * block, block);
}

ForwardResult forward_with_trace(const ModelCheckpoint& checkpoint, std::span<const TokenId> tokens,
                                 const HeadMask& mask, ForwardOptions options) {
  const ModelConfig& c = checkpoint.config();
  const std::size_t n = tokens.size();
  if (n == 0) throw std::invalid_argument("empty token sequence");
  if (n > c.max_seq_len) {
    throw std::invalid_argument("sequence too long: " + std::to_string(n) + " > max_seq_len " +
                                std::to_string(c.max_seq_len));
  }
  for (TokenId id : tokens) {
    if (id >= c.vocab_size) {
      throw std::invalid_argument("token id " + std::to_string(id) + " out of range for vocab " +
                                  std::to_string(c.vocab_size));
    }
  }
  const std::vector<std::uint8_t> masked = mask.dense(c);

  const bool par = options.backend == Backend::parallel;
  auto matmul = [par](std::span<const float> in, std::span<const float> w, std::span<float> out,
                      std::size_t rows, std::size_t in_dim, std::size_t out_dim) {
    if (par) {
      kernels::parallel::matmul(in, w, out, rows, in_dim, out_dim);
    } else {
      kernels::serial::matmul(in, w, out, rows, in_dim, out_dim);
    }
  };

  const std::size_t hidden = c.hidden_size;
  const std::size_t q_dim = c.n_heads * c.head_dim();
  const std::size_t kv_dim = c.kv_dim();
  const auto eps = static_cast<float>(c.norm_eps);

  std::vector<float> x(n * hidden);
  const auto emb = checkpoint.token_embedding();
  for (std::size_t t = 0; t < n; ++t) {
    std::copy_n(emb.data() + tokens[t] * hidden, hidden, x.data() + t * hidden);
  }

  ForwardResult result;
  result.seq_len = n;
  result.vocab_size = c.vocab_size;
  result.trace = AttentionTrace(c.n_layers, c.n_heads, n, options.capture_full_rows);

  std::vector<float> normed(n * hidden), q(n * q_dim), k(n * kv_dim), v(n * kv_dim), attn(n * q_dim),
      proj(n * hidden), gate(n * c.ffn_inner), up(n * c.ffn_inner);

  for (std::size_t l = 0; l < c.n_layers; ++l) {
    const LayerWeights w = checkpoint.layer(l);

    for (std::size_t t = 0; t < n; ++t) {
      kernels::rmsnorm(x.data() + t * hidden, w.attn_norm.data(), normed.data() + t * hidden, hidden, eps);
    }
    matmul(normed, w.wq, q, n, hidden, q_dim);
    matmul(normed, w.wk, k, n, hidden, kv_dim);
    matmul(normed, w.wv, v, n, hidden, kv_dim);
    for (std::size_t t = 0; t < n; ++t) {
      kernels::rope(q.data() + t * q_dim, c.n_heads, c.head_dim(), t, c.rope_theta);
      kernels::rope(k.data() + t * kv_dim, c.n_kv_heads, c.head_dim(), t, c.rope_theta);
    }

    kernels::AttentionArgs args;
    args.q = q;
    args.k = k;
    args.v = v;
    args.out = attn;
    args.seq_len = n;
    args.n_heads = c.n_heads;
    args.n_kv_heads = c.n_kv_heads;
    args.head_dim = c.head_dim();
    args.masked = std::span<const std::uint8_t>(masked).subspan(l * c.n_heads, c.n_heads);
    args.argmax_pos = result.trace.layer_argmax_pos(l);
    args.argmax_weight = result.trace.layer_argmax_weight(l);
    args.full_rows = result.trace.layer_full_rows(l);
    if (par) {
      kernels::parallel::attention(args);
    } else {
      kernels::serial::attention(args);
    }

    matmul(attn, w.wo, proj, n, q_dim, hidden);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += proj[i];

    for (std::size_t t = 0; t < n; ++t) {
      kernels::rmsnorm(x.data() + t * hidden, w.ffn_norm.data(), normed.data() + t * hidden, hidden, eps);
    }
    matmul(normed, w.w_gate, gate, n, hidden, c.ffn_inner);
    matmul(normed, w.w_up, up, n, hidden, c.ffn_inner);
    kernels::swiglu(gate.data(), up.data(), gate.size());
    matmul(gate, w.w_down, proj, n, c.ffn_inner, hidden);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += proj[i];
  }

  for (std::size_t t = 0; t < n; ++t) {
    kernels::rmsnorm(x.data() + t * hidden, checkpoint.final_norm().data(), normed.data() + t * hidden,
                     hidden, eps);
  }
  result.logits.resize(n * c.vocab_size);
  matmul(normed, checkpoint.lm_head(), result.logits, n, hidden, c.vocab_size);
  return result;
}

float token_nll(std::span<const float> logits, TokenId target) {
  const float m = *std::max_element(logits.begin(), logits.end());
  float sum = 0.0f;
  for (float z : logits) sum += std::exp(z - m);
  return std::log(sum) + m - logits[target];
}

double mean_nll_from_logits(const ForwardResult& forward, std::span<const TokenId> tokens, Span span) {
  if (span.begin < 1 || span.end > tokens.size() || span.begin >= span.end) {
    throw std::invalid_argument("loss span [" + std::to_string(span.begin) + ", " +
                                std::to_string(span.end) + ") must be nonempty within [1, " +
                                std::to_string(tokens.size()) + ")");
  }
  double total = 0.0;
  for (std::size_t i = span.begin; i < span.end; ++i) {
    total += static_cast<double>(token_nll(forward.logits_at(i - 1), tokens[i]));
  }
  return total / static_cast<double>(span.size());
}

double mean_ce_loss(const ModelCheckpoint& checkpoint, std::span<const TokenId> tokens,
                    const HeadMask& mask, Backend backend) {
  if (tokens.size() < 2) throw std::invalid_argument("cross-entropy needs at least 2 tokens");
  return ce_loss_over_span(checkpoint, tokens, mask, {1, tokens.size()}, backend);
}

double ce_loss_over_span(const ModelCheckpoint& checkpoint, std::span<const TokenId> tokens,
                         const HeadMask& mask, Span span, Backend backend) {
  if (span.begin < 1 || span.end > tokens.size() || span.begin >= span.end) {
    throw std::invalid_argument("loss span must be nonempty within [1, n)");
  }
  // Positions past span.end never influence the logits we need (causality).
  const auto result = forward_with_trace(checkpoint, tokens.first(span.end), mask, {false, backend});
  return mean_nll_from_logits(result, tokens, span);
}

}  // namespace attninf
