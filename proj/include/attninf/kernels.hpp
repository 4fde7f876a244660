#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace attninf::kernels {

// Every reduction runs in a fixed order (eight interleaved lanes, then a
// fixed combine tree), so the serial and parallel variants produce identical
// bits: the parallel kernels only distribute independent output elements.

float dot(const float* a, const float* b, std::size_t n);

// y[i] = x[i] / sqrt(mean(x^2) + eps) * weight[i], one row of width n.
void rmsnorm(const float* x, const float* weight, float* y, std::size_t n, float eps);

// Rotary embedding on interleaved pairs (x[2i], x[2i+1]) of every head in a
// row of n_heads * head_dim values at sequence position pos.
void rope(float* row, std::size_t n_heads, std::size_t head_dim, std::size_t pos, double theta);

// gate[i] = silu(gate[i]) * up[i]
void swiglu(float* gate, const float* up, std::size_t n);

// Numerically stable in-place softmax over n values.
void softmax(float* x, std::size_t n);

struct AttentionArgs {
  std::span<const float> q;  // seq x (n_heads * head_dim), rotary already applied
  std::span<const float> k;  // seq x (n_kv_heads * head_dim)
  std::span<const float> v;  // seq x (n_kv_heads * head_dim)
  std::span<float> out;      // seq x (n_heads * head_dim)
  std::size_t seq_len = 0;
  std::size_t n_heads = 0;
  std::size_t n_kv_heads = 0;
  std::size_t head_dim = 0;
  std::span<const std::uint8_t> masked;  // n_heads flags; masked rows become 1/(t+1)
  std::span<std::uint32_t> argmax_pos;   // n_heads x seq
  std::span<float> argmax_weight;        // n_heads x seq
  std::span<float> full_rows;            // empty, or n_heads x seq(seq+1)/2
};

// Offset of row t inside one head's lower-triangular block.
constexpr std::size_t tri_offset(std::size_t t) { return t * (t + 1) / 2; }

namespace serial {

// out[r, o] = sum_i in[r, i] * w[o, i]
void matmul(std::span<const float> in, std::span<const float> w, std::span<float> out,
            std::size_t rows, std::size_t in_dim, std::size_t out_dim);

void attention(const AttentionArgs& args);

}  // namespace serial

namespace parallel {

void matmul(std::span<const float> in, std::span<const float> w, std::span<float> out,
            std::size_t rows, std::size_t in_dim, std::size_t out_dim);

void attention(const AttentionArgs& args);

}  // namespace parallel

}  // namespace attninf::kernels
