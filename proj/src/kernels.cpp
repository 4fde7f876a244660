#include "attninf/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace attninf::kernels {

float dot(const float* a, const float* b, std::size_t n) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  }
  for (int l = 0; i < n; ++i, ++l) acc[l] += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

void rmsnorm(const float* x, const float* weight, float* y, std::size_t n, float eps) {
  const float ms = dot(x, x, n) / static_cast<float>(n);
  const float inv = 1.0f / std::sqrt(ms + eps);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * inv * weight[i];
}

void rope(float* row, std::size_t n_heads, std::size_t head_dim, std::size_t pos, double theta) {
  const std::size_t half = head_dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::pow(theta, -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
    const double angle = static_cast<double>(pos) * freq;
    const float c = static_cast<float>(std::cos(angle));
    const float s = static_cast<float>(std::sin(angle));
    for (std::size_t h = 0; h < n_heads; ++h) {
      float* p = row + h * head_dim + 2 * i;
      const float x0 = p[0];
      const float x1 = p[1];
      p[0] = x0 * c - x1 * s;
      p[1] = x0 * s + x1 * c;
    }
  }
}

void swiglu(float* gate, const float* up, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const float g = gate[i];
    gate[i] = g / (1.0f + std::exp(-g)) * up[i];
  }
}

void softmax(float* x, std::size_t n) {
  const float m = *std::max_element(x, x + n);
  float sum = 0.0f;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - m);
    sum += x[i];
  }
  const float inv = 1.0f / sum;
  for (std::size_t i = 0; i < n; ++i) x[i] *= inv;
}

namespace {

// One (head, query position) cell of causal attention. scratch holds >= t+1 floats.
void attention_cell(const AttentionArgs& a, std::size_t h, std::size_t t, float* scratch) {
  const std::size_t hd = a.head_dim;
  const std::size_t q_stride = a.n_heads * hd;
  const std::size_t kv_stride = a.n_kv_heads * hd;
  const std::size_t kv_head = h / (a.n_heads / a.n_kv_heads);
  const float* q = a.q.data() + t * q_stride + h * hd;
  const std::size_t n = t + 1;

  if (a.masked[h]) {
    std::fill(scratch, scratch + n, 1.0f / static_cast<float>(n));
  } else {
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
    for (std::size_t j = 0; j < n; ++j) {
      scratch[j] = dot(q, a.k.data() + j * kv_stride + kv_head * hd, hd) * scale;
    }
    softmax(scratch, n);
  }

  // First maximal position wins ties.
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (scratch[j] > scratch[best]) best = j;
  }
  a.argmax_pos[h * a.seq_len + t] = static_cast<std::uint32_t>(best);
  a.argmax_weight[h * a.seq_len + t] = scratch[best];
  if (!a.full_rows.empty()) {
    std::copy(scratch, scratch + n, a.full_rows.data() + h * tri_offset(a.seq_len) + tri_offset(t));
  }

  float* out = a.out.data() + t * q_stride + h * hd;
  std::fill(out, out + hd, 0.0f);
  for (std::size_t j = 0; j < n; ++j) {
    const float w = scratch[j];
    const float* v = a.v.data() + j * kv_stride + kv_head * hd;
    for (std::size_t d = 0; d < hd; ++d) out[d] += w * v[d];
  }
}

}  // namespace

namespace serial {

void matmul(std::span<const float> in, std::span<const float> w, std::span<float> out,
            std::size_t rows, std::size_t in_dim, std::size_t out_dim) {
  for (std::size_t r = 0; r < rows; ++r) {
    const float* x = in.data() + r * in_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
      out[r * out_dim + o] = dot(x, w.data() + o * in_dim, in_dim);
    }
  }
}

void attention(const AttentionArgs& args) {
  std::vector<float> scratch(args.seq_len);
  for (std::size_t h = 0; h < args.n_heads; ++h) {
    for (std::size_t t = 0; t < args.seq_len; ++t) attention_cell(args, h, t, scratch.data());
  }
}

}  // namespace serial

namespace parallel {

void matmul(std::span<const float> in, std::span<const float> w, std::span<float> out,
            std::size_t rows, std::size_t in_dim, std::size_t out_dim) {
  const auto total = static_cast<std::int64_t>(rows * out_dim);
#pragma omp parallel for schedule(static)
  for (std::int64_t idx = 0; idx < total; ++idx) {
    const auto r = static_cast<std::size_t>(idx) / out_dim;
    const auto o = static_cast<std::size_t>(idx) % out_dim;
    out[static_cast<std::size_t>(idx)] = dot(in.data() + r * in_dim, w.data() + o * in_dim, in_dim);
  }
}

void attention(const AttentionArgs& args) {
  const auto total = static_cast<std::int64_t>(args.n_heads * args.seq_len);
#pragma omp parallel
  {
    std::vector<float> scratch(args.seq_len);
#pragma omp for schedule(dynamic, 16)
    for (std::int64_t idx = 0; idx < total; ++idx) {
      const auto h = static_cast<std::size_t>(idx) / args.seq_len;
      const auto t = static_cast<std::size_t>(idx) % args.seq_len;
      attention_cell(args, h, t, scratch.data());
    }
  }
}

}  // namespace parallel

}  // namespace attninf::kernels
