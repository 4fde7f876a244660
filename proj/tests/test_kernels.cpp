#include <cmath>
#include <complex>
#include <cstring>
#include <tuple>
#include <vector>

#include "doctest.h"

#include "attninf/kernels.hpp"
#include "attninf/rng.hpp"

using namespace attninf;
namespace k = attninf::kernels;

namespace {

std::vector<float> gaussian(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal() * scale);
  return v;
}

bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

struct AttnBuffers {
  std::size_t seq, nh, nkv, hd;
  std::vector<float> q, kk, v, out, weight, rows;
  std::vector<std::uint32_t> pos;
  std::vector<std::uint8_t> masked;

  AttnBuffers(std::size_t seq_, std::size_t nh_, std::size_t nkv_, std::size_t hd_, std::uint64_t seed)
      : seq(seq_), nh(nh_), nkv(nkv_), hd(hd_) {
    q = gaussian(seq * nh * hd, seed);
    kk = gaussian(seq * nkv * hd, seed + 1);
    v = gaussian(seq * nkv * hd, seed + 2);
    out.assign(seq * nh * hd, 0.0f);
    weight.assign(nh * seq, 0.0f);
    rows.assign(nh * k::tri_offset(seq), 0.0f);
    pos.assign(nh * seq, 0);
    masked.assign(nh, 0);
  }

  k::AttentionArgs args() {
    k::AttentionArgs a;
    a.q = q;
    a.k = kk;
    a.v = v;
    a.out = out;
    a.seq_len = seq;
    a.n_heads = nh;
    a.n_kv_heads = nkv;
    a.head_dim = hd;
    a.masked = masked;
    a.argmax_pos = pos;
    a.argmax_weight = weight;
    a.full_rows = rows;
    return a;
  }
};

}  // namespace

TEST_CASE("dot matches a double accumulation for every tail length") {
  for (std::size_t n = 0; n <= 37; ++n) {
    const auto a = gaussian(n, 10 + n);
    const auto b = gaussian(n, 100 + n);
    double ref = 0;
    for (std::size_t i = 0; i < n; ++i) ref += static_cast<double>(a[i]) * b[i];
    CHECK(k::dot(a.data(), b.data(), n) == doctest::Approx(ref).epsilon(1e-5));
  }
}

TEST_CASE("rmsnorm of a constant row is the weight") {
  std::vector<float> x(16, 3.0f), w = gaussian(16, 7), y(16);
  k::rmsnorm(x.data(), w.data(), y.data(), 16, 0.0f);
  for (std::size_t i = 0; i < 16; ++i) CHECK(y[i] == doctest::Approx(w[i]).epsilon(1e-6));
}

TEST_CASE("rope is a rotation: position 0 is identity and norms are kept") {
  auto row = gaussian(2 * 8, 3);
  auto orig = row;
  k::rope(row.data(), 2, 8, 0, 10000.0);
  CHECK(bitwise_equal(row, orig));

  k::rope(row.data(), 2, 8, 17, 10000.0);
  for (std::size_t p = 0; p < 8; ++p) {
    const double n0 = std::hypot(orig[2 * p], orig[2 * p + 1]);
    const double n1 = std::hypot(row[2 * p], row[2 * p + 1]);
    CHECK(n1 == doctest::Approx(n0).epsilon(1e-5));
  }
  // pair 0 rotates by exactly pos radians
  const std::complex<double> z = std::complex<double>(orig[0], orig[1]) * std::polar(1.0, 17.0);
  CHECK(row[0] == doctest::Approx(z.real()).epsilon(1e-5));
  CHECK(row[1] == doctest::Approx(z.imag()).epsilon(1e-5));
}

TEST_CASE("softmax sums to one and survives large logits") {
  std::vector<float> x = {1000.0f, 1000.0f, -1000.0f, 999.0f};
  k::softmax(x.data(), x.size());
  double s = 0;
  for (float v : x) {
    CHECK(std::isfinite(v));
    s += v;
  }
  CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(x[0] == x[1]);
  CHECK(x[2] == 0.0f);
}

TEST_CASE("swiglu matches silu(g) * u") {
  auto g = gaussian(20, 1), u = gaussian(20, 2);
  auto out = g;
  k::swiglu(out.data(), u.data(), 20);
  for (std::size_t i = 0; i < 20; ++i) {
    const double ref = g[i] / (1.0 + std::exp(-static_cast<double>(g[i]))) * u[i];
    CHECK(out[i] == doctest::Approx(ref).epsilon(1e-5));
  }
}

TEST_CASE("serial and parallel matmul agree bitwise") {
  using Shape = std::tuple<std::size_t, std::size_t, std::size_t>;
  for (auto [rows, in, out] : {Shape{1, 1, 1}, Shape{7, 13, 5}, Shape{33, 64, 48}}) {
    const auto x = gaussian(rows * in, 21), w = gaussian(out * in, 22);
    std::vector<float> a(rows * out), b(rows * out);
    k::serial::matmul(x, w, a, rows, in, out);
    k::parallel::matmul(x, w, b, rows, in, out);
    CHECK(bitwise_equal(a, b));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t o = 0; o < out; ++o) {
        double ref = 0;
        for (std::size_t i = 0; i < in; ++i) ref += static_cast<double>(x[r * in + i]) * w[o * in + i];
        CHECK(a[r * out + o] == doctest::Approx(ref).epsilon(1e-4).scale(1.0));
      }
    }
  }
}

TEST_CASE("serial and parallel attention agree bitwise, with and without masks") {
  for (std::size_t nkv : {1u, 2u, 4u}) {
    AttnBuffers s(23, 4, nkv, 8, 5), p(23, 4, nkv, 8, 5);
    s.masked[1] = p.masked[1] = 1;
    k::serial::attention(s.args());
    k::parallel::attention(p.args());
    CHECK(bitwise_equal(s.out, p.out));
    CHECK(bitwise_equal(s.weight, p.weight));
    CHECK(bitwise_equal(s.rows, p.rows));
    CHECK(s.pos == p.pos);
  }
}

TEST_CASE("attention rows are causal distributions and match a double oracle") {
  AttnBuffers b(12, 2, 1, 4, 9);
  k::serial::attention(b.args());
  for (std::size_t h = 0; h < 2; ++h) {
    for (std::size_t t = 0; t < 12; ++t) {
      std::vector<double> ref(t + 1);
      double mx = -1e300;
      for (std::size_t j = 0; j <= t; ++j) {
        double s = 0;
        for (std::size_t d = 0; d < 4; ++d) s += static_cast<double>(b.q[t * 8 + h * 4 + d]) * b.kk[j * 4 + d];
        ref[j] = s / 2.0;
        mx = std::max(mx, ref[j]);
      }
      double z = 0;
      for (auto& r : ref) z += (r = std::exp(r - mx));
      const float* row = b.rows.data() + h * k::tri_offset(12) + k::tri_offset(t);
      std::size_t best = 0;
      for (std::size_t j = 0; j <= t; ++j) {
        CHECK(row[j] == doctest::Approx(ref[j] / z).epsilon(1e-5).scale(1.0));
        if (row[j] > row[best]) best = j;
      }
      CHECK(b.pos[h * 12 + t] == best);
      CHECK(b.weight[h * 12 + t] == row[best]);
    }
  }
}

TEST_CASE("masked rows are uniform over the visible prefix and argmax takes the first position") {
  AttnBuffers b(9, 2, 2, 4, 11);
  b.masked[0] = 1;
  k::parallel::attention(b.args());
  for (std::size_t t = 0; t < 9; ++t) {
    const float* row = b.rows.data() + k::tri_offset(t);
    for (std::size_t j = 0; j <= t; ++j) CHECK(row[j] == doctest::Approx(1.0 / (t + 1)).epsilon(1e-7));
    CHECK(b.pos[t] == 0);
  }
  // masked output is the running mean of v for the head's kv group
  for (std::size_t d = 0; d < 4; ++d) {
    double mean = 0;
    for (std::size_t j = 0; j < 9; ++j) mean += b.v[j * 8 + d];
    CHECK(b.out[8 * 8 + d] == doctest::Approx(mean / 9).epsilon(1e-5).scale(1.0));
  }
}
