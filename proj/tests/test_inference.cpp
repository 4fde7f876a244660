#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "doctest.h"

#include "attninf/hashing.hpp"
#include "attninf/inference.hpp"
#include "attninf/rng.hpp"
#include "support/reference_model.hpp"
#include "support/test_util.hpp"

using namespace attninf;
using namespace attninf::testing;

namespace {

TokenSeq random_tokens(std::size_t n, std::size_t vocab, std::uint64_t seed) {
  Rng rng(seed);
  TokenSeq t(n);
  for (auto& x : t) x = static_cast<TokenId>(rng.below(vocab));
  return t;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("forward logits match the double oracle across random configs") {
  Rng rng(2024);
  for (int trial = 0; trial < 12; ++trial) {
    const ModelConfig c = random_toy_config(rng);
    const auto ckpt = random_checkpoint(c, 1000 + trial);
    const auto tokens = random_tokens(1 + rng.below(24), c.vocab_size, trial);
    const auto ref = reference_forward(ckpt, tokens);
    for (Backend b : {Backend::serial, Backend::parallel}) {
      const auto got = forward_with_trace(ckpt, tokens, {}, {false, b});
      CAPTURE(trial);
      CHECK(max_relative_error(got.logits, c.vocab_size, ref.logits) < 1e-4);
    }
  }
}

TEST_CASE("plain multi-head attention (kv heads == heads) matches the oracle") {
  auto c = tiny_config();
  c.n_kv_heads = c.n_heads;
  const auto ckpt = random_checkpoint(c, 3);
  const auto tokens = random_tokens(20, c.vocab_size, 4);
  const auto got = forward_with_trace(ckpt, tokens, {});
  CHECK(max_relative_error(got.logits, c.vocab_size, reference_forward(ckpt, tokens).logits) < 1e-4);
}

TEST_CASE("serial and parallel backends are bitwise identical") {
  const auto ckpt = random_checkpoint(tiny_config(), 8);
  const auto tokens = random_tokens(40, 258, 9);
  const HeadMask mask({{0, 1}, {1, 3}});
  const auto a = forward_with_trace(ckpt, tokens, mask, {true, Backend::serial});
  const auto b = forward_with_trace(ckpt, tokens, mask, {true, Backend::parallel});
  CHECK(same_bits(a.logits, b.logits));
  for (std::size_t l = 0; l < 2; ++l) {
    for (std::size_t h = 0; h < 4; ++h) {
      for (std::size_t t = 0; t < 40; ++t) {
        CHECK(a.trace.argmax_pos({l, h}, t) == b.trace.argmax_pos({l, h}, t));
      }
    }
  }
}

TEST_CASE("causality: logits at t ignore tokens after t") {
  const auto ckpt = random_checkpoint(tiny_config(), 12);
  auto tokens = random_tokens(30, 258, 13);
  const auto a = forward_with_trace(ckpt, tokens, {});
  for (std::size_t i = 15; i < 30; ++i) tokens[i] = (tokens[i] + 7) % 258;
  const auto b = forward_with_trace(ckpt, tokens, {});
  CHECK(std::memcmp(a.logits.data(), b.logits.data(), 15 * 258 * sizeof(float)) == 0);
}

TEST_CASE("masked heads attend uniformly and unmasked heads are untouched in the same layer") {
  const auto ckpt = random_checkpoint(tiny_config(), 21);
  const auto tokens = random_tokens(16, 258, 22);
  const HeadMask mask({{1, 2}});
  const auto masked = forward_with_trace(ckpt, tokens, mask, {true});
  const auto plain = forward_with_trace(ckpt, tokens, {}, {true});
  for (std::size_t t = 0; t < 16; ++t) {
    for (float w : masked.trace.row({1, 2}, t)) CHECK(w == doctest::Approx(1.0 / (t + 1)).epsilon(1e-6));
    // layer 0 precedes the mask; layer 1 head 0 shares inputs with the unmasked run
    const auto r0 = masked.trace.row({0, 2}, t), p0 = plain.trace.row({0, 2}, t);
    CHECK(std::equal(r0.begin(), r0.end(), p0.begin()));
    const auto r1 = masked.trace.row({1, 0}, t), p1 = plain.trace.row({1, 0}, t);
    CHECK(std::equal(r1.begin(), r1.end(), p1.begin()));
  }
  CHECK(masked.trace.row({1, 2}, 3)[2] == doctest::Approx(0.25).epsilon(1e-7));

  const auto dense = mask.dense(ckpt.config());
  CHECK(max_relative_error(masked.logits, 258, reference_forward(ckpt, tokens, dense).logits) < 1e-4);
}

TEST_CASE("empty mask is bitwise identical to an unmasked pass; masking is idempotent") {
  const auto ckpt = random_checkpoint(tiny_config(), 31);
  const auto tokens = random_tokens(25, 258, 32);
  const auto a = forward_with_trace(ckpt, tokens, HeadMask{});
  const auto b = forward_with_trace(ckpt, tokens, HeadMask(std::vector<HeadId>{}));
  CHECK(same_bits(a.logits, b.logits));

  HeadMask twice;
  twice.insert({0, 0});
  twice.insert({0, 0});
  CHECK(twice.size() == 1);
  CHECK(same_bits(forward_with_trace(ckpt, tokens, twice).logits,
                  forward_with_trace(ckpt, tokens, HeadMask({{0, 0}})).logits));
}

TEST_CASE("token_nll on hand-computed logits") {
  const std::vector<float> logits = {0.0f, std::log(3.0f)};
  CHECK(token_nll(logits, 1) == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-6));
  CHECK(token_nll(logits, 0) == doctest::Approx(std::log(4.0)).epsilon(1e-6));
  const std::vector<float> big = {1000.0f, 0.0f};
  CHECK(std::isfinite(token_nll(big, 1)));
  CHECK(token_nll(big, 1) == doctest::Approx(1000.0).epsilon(1e-6));
}

TEST_CASE("a zero output head yields uniform loss ln(vocab)") {
  auto c = tiny_config();
  auto ckpt = random_checkpoint(c, 41);
  auto tensors = ckpt.tensors();
  for (auto& t : tensors) {
    if (t.name == "lm_head") std::fill(t.values.begin(), t.values.end(), 0.0f);
  }
  const ModelCheckpoint zero(c, tensors);
  const auto tokens = random_tokens(10, 258, 42);
  CHECK(mean_ce_loss(zero, tokens, {}) == doctest::Approx(std::log(258.0)).epsilon(1e-6));
  CHECK(std::log(258.0) == doctest::Approx(5.5530).epsilon(1e-4));
}

TEST_CASE("span losses compose") {
  const auto ckpt = random_checkpoint(tiny_config(), 51);
  const auto tokens = random_tokens(21, 258, 52);
  const double whole = mean_ce_loss(ckpt, tokens, {});
  CHECK(ce_loss_over_span(ckpt, tokens, {}, {1, 21}) == doctest::Approx(whole).epsilon(1e-12));

  const auto fwd = forward_with_trace(ckpt, tokens, {});
  CHECK(ce_loss_over_span(ckpt, tokens, {}, {7, 8}) ==
        doctest::Approx(token_nll(fwd.logits_at(6), tokens[7])).epsilon(1e-6));

  const double left = ce_loss_over_span(ckpt, tokens, {}, {1, 9});
  const double right = ce_loss_over_span(ckpt, tokens, {}, {9, 21});
  CHECK((8 * left + 12 * right) / 20 == doctest::Approx(whole).epsilon(1e-6));
}

TEST_CASE("forward rejects bad input") {
  const auto ckpt = random_checkpoint(tiny_config(16), 61);
  CHECK_THROWS_AS(forward_with_trace(ckpt, TokenSeq{}, {}), std::invalid_argument);
  CHECK_THROWS_AS(forward_with_trace(ckpt, TokenSeq(17, 1), {}), std::invalid_argument);
  CHECK_THROWS_AS(forward_with_trace(ckpt, TokenSeq{1, 258}, {}), std::invalid_argument);
  CHECK_THROWS_AS(forward_with_trace(ckpt, TokenSeq{1, 2}, HeadMask({{2, 0}})), std::invalid_argument);
  CHECK_THROWS_AS(forward_with_trace(ckpt, TokenSeq{1, 2}, HeadMask({{0, 4}})), std::invalid_argument);
  CHECK_THROWS_AS(mean_ce_loss(ckpt, TokenSeq{1}, {}), std::invalid_argument);
  CHECK_THROWS_AS(ce_loss_over_span(ckpt, TokenSeq{1, 2, 3}, {}, {0, 2}), std::invalid_argument);
  CHECK_THROWS_AS(ce_loss_over_span(ckpt, TokenSeq{1, 2, 3}, {}, {2, 4}), std::invalid_argument);
  CHECK_NOTHROW(forward_with_trace(ckpt, TokenSeq(16, 1), {}));
}

TEST_CASE("trace without full rows refuses row access") {
  const auto ckpt = random_checkpoint(tiny_config(), 71);
  const auto r = forward_with_trace(ckpt, TokenSeq{256, 1, 2}, {});
  CHECK_FALSE(r.trace.has_full_rows());
  CHECK_THROWS(r.trace.row({0, 0}, 1));
}

TEST_CASE("frozen logits fingerprint") {
  // Guards against silent numeric drift in the kernels.
  const auto ckpt = random_checkpoint(tiny_config(), 7);
  TokenSeq tokens(32);
  std::iota(tokens.begin(), tokens.end(), 60);
  const auto r = forward_with_trace(ckpt, tokens, HeadMask({{1, 1}}));
  CHECK(sha256_hex(std::span<const float>(r.logits)) == "c3022c0a5bbd24c4bbb8e3cdd74c76e6e44c107e6ee5fae9c96c30c9e29e32c4");
}
