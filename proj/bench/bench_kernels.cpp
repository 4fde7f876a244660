// Serial reference vs OpenMP kernels, plus end-to-end corpus scoring by
// worker count. Both kernel variants produce identical bits; only speed differs.

#include <sstream>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "attninf/influence.hpp"
#include "attninf/kernels.hpp"
#include "attninf/rng.hpp"

namespace {

namespace k = attninf::kernels;

std::vector<float> gaussian(std::size_t n, std::uint64_t seed) {
  attninf::Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t in = 256, out = 704;
  const auto x = gaussian(rows * in, 1), w = gaussian(out * in, 2);
  std::vector<float> y(rows * out);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::matmul(x, w, y, rows, in, out);
    } else {
      k::serial::matmul(x, w, y, rows, in, out);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * rows * in * out));
}

template <bool Parallel>
void BM_Attention(benchmark::State& state) {
  const auto seq = static_cast<std::size_t>(state.range(0));
  const std::size_t nh = 8, nkv = 4, hd = 32;
  const auto q = gaussian(seq * nh * hd, 1), kk = gaussian(seq * nkv * hd, 2), v = gaussian(seq * nkv * hd, 3);
  std::vector<float> out(seq * nh * hd), weight(nh * seq);
  std::vector<std::uint32_t> pos(nh * seq);
  std::vector<std::uint8_t> masked(nh, 0);
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
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::attention(a);
    } else {
      k::serial::attention(a);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_ScoreCorpus(benchmark::State& state) {
  attninf::ModelConfig c;
  c.hidden_size = 64;
  c.ffn_inner = 96;
  c.n_layers = 2;
  c.max_seq_len = 256;
  const auto ckpt = attninf::random_checkpoint(c, 1);
  const attninf::HeadMask mask({{0, 1}, {1, 2}});
  attninf::Rng rng(3);
  std::string corpus;
  for (int i = 0; i < 64; ++i) {
    std::string text;
    for (int w = 0; w < 40; ++w) text += "w" + std::to_string(rng.below(50)) + " ";
    corpus += R"({"id": ")" + std::to_string(i) + R"(", "domain": "web", "text": ")" + text + "\"}\n";
  }
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    std::istringstream in(corpus);
    attninf::CorpusReader reader(in, "bench", true);
    std::size_t n = 0;
    attninf::score_corpus(ckpt, mask, attninf::Tokenizer::byte_level(), reader, workers,
                          [&](const attninf::ScoredDocument&) { ++n; });
    benchmark::DoNotOptimize(n);
  }
  state.SetItemsProcessed(state.iterations() * 64);
}

}  // namespace

BENCHMARK(BM_Matmul<false>)->Name("matmul/serial")->Arg(64)->Arg(512);
BENCHMARK(BM_Matmul<true>)->Name("matmul/parallel")->Arg(64)->Arg(512);
BENCHMARK(BM_Attention<false>)->Name("attention/serial")->Arg(256)->Arg(1024);
BENCHMARK(BM_Attention<true>)->Name("attention/parallel")->Arg(256)->Arg(1024);
BENCHMARK(BM_ScoreCorpus)->Name("score_corpus/workers")->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
