#include "attninf/head_detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "attninf/errors.hpp"
#include "attninf/parallel.hpp"
#include "attninf/rng.hpp"

namespace attninf {

std::size_t top_count(double fraction, std::size_t n) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("fraction must lie in (0, 1]");
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n, 1));
}

std::vector<HeadSampleScore> retrieval_scores_from_trace(const AttentionTrace& trace,
                                                         std::span<const TokenId> tokens, Span needle,
                                                         std::size_t answer_begin, std::size_t sample_index) {
  if (answer_begin < 1 || answer_begin >= tokens.size()) throw std::invalid_argument("empty answer");
  if (needle.size() == 0 || needle.end > answer_begin) throw std::invalid_argument("needle must precede the answer");
  const std::set<TokenId> needle_tokens(tokens.begin() + needle.begin, tokens.begin() + needle.end);

  std::vector<HeadSampleScore> scores;
  for (std::size_t l = 0; l < trace.n_layers(); ++l) {
    for (std::size_t h = 0; h < trace.n_heads(); ++h) {
      const HeadId id{l, h};
      std::set<std::size_t> copied;
      for (std::size_t p = answer_begin; p < tokens.size(); ++p) {
        const TokenId w = tokens[p];
        if (!needle_tokens.count(w)) continue;
        const std::size_t j = trace.argmax_pos(id, p - 1);
        if (j >= needle.begin && j < needle.end && tokens[j] == w) copied.insert(j);
      }
      HeadSampleScore s;
      s.head = id;
      s.sample = sample_index;
      s.copied_positions.assign(copied.begin(), copied.end());
      s.needle_len = needle.size();
      s.score = static_cast<double>(copied.size()) / static_cast<double>(needle.size());
      scores.push_back(std::move(s));
    }
  }
  return scores;
}

std::vector<HeadSampleScore> score_heads_on_sample(const ModelCheckpoint& checkpoint, const ProxySample& sample,
                                                   std::size_t sample_index) {
  if (sample.answer_tokens.empty()) throw std::invalid_argument("empty answer");
  const TokenSeq tokens = sample.full_tokens();
  // The last answer token is never a query; drop it from the pass.
  const auto forward = forward_with_trace(checkpoint, std::span<const TokenId>(tokens).first(tokens.size() - 1), {},
                                          {false, Backend::serial});
  return retrieval_scores_from_trace(forward.trace, tokens, sample.needle_span, sample.prompt_tokens.size(),
                                     sample_index);
}

HeadScoreTable build_score_table(std::size_t n_layers, std::size_t n_heads,
                                 const std::vector<std::vector<double>>& per_sample, double top_fraction) {
  if (per_sample.empty()) throw std::invalid_argument("empty dataset");
  HeadScoreTable table;
  table.n_layers = n_layers;
  table.n_heads = n_heads;
  table.top_fraction = top_fraction;
  const std::size_t total = n_layers * n_heads;
  table.mean_scores.assign(total, 0.0);
  std::vector<double> column(per_sample.size());
  for (std::size_t k = 0; k < total; ++k) {
    for (std::size_t s = 0; s < per_sample.size(); ++s) column[s] = per_sample[s].at(k);
    // Summing in sorted order makes the mean independent of dataset order.
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double v : column) sum += v;
    table.mean_scores[k] = sum / static_cast<double>(column.size());
  }
  for (std::size_t k = 0; k < total; ++k) table.ranking.push_back({{k / n_heads, k % n_heads}, table.mean_scores[k]});
  std::stable_sort(table.ranking.begin(), table.ranking.end(), [](const HeadRank& a, const HeadRank& b) {
    if (a.mean_score != b.mean_score) return a.mean_score > b.mean_score;
    return a.head < b.head;
  });
  const std::size_t n_selected = top_count(top_fraction, total);
  for (std::size_t i = 0; i < n_selected; ++i) table.selected.insert(table.ranking[i].head);
  return table;
}

HeadScoreTable detect_retrieval_heads(const ModelCheckpoint& checkpoint, const std::vector<ProxySample>& dataset,
                                      double top_fraction, int threads) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) throw std::invalid_argument("top_fraction must lie in (0, 1]");
  const ModelConfig& c = checkpoint.config();
  std::vector<std::vector<double>> per_sample(dataset.size());
  parallel_for_index(dataset.size(), threads, [&](std::size_t i) {
    const auto scores = score_heads_on_sample(checkpoint, dataset[i], i);
    per_sample[i].resize(scores.size());
    for (std::size_t k = 0; k < scores.size(); ++k) per_sample[i][k] = scores[k].score;
  });
  return build_score_table(c.n_layers, c.n_heads, per_sample, top_fraction);
}

HeadMask random_control_mask(const HeadScoreTable& table, std::size_t count, double exclude_top,
                             std::uint64_t seed) {
  if (exclude_top < 0.0 || exclude_top > 1.0) throw std::invalid_argument("exclude_top must lie in [0, 1]");
  const std::size_t excluded = exclude_top > 0.0 ? top_count(exclude_top, table.total_heads()) : 0;
  std::vector<HeadId> pool;
  for (std::size_t i = excluded; i < table.ranking.size(); ++i) pool.push_back(table.ranking[i].head);
  if (count > pool.size()) {
    throw std::invalid_argument("count " + std::to_string(count) + " exceeds the " + std::to_string(pool.size()) +
                                " non-excluded heads");
  }
  // Canonical pool order keeps the draw a function of the seed and the pool set only.
  std::sort(pool.begin(), pool.end());
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  pool.resize(count);
  return HeadMask(std::move(pool));
}

ProxyAccuracy eval_proxy_accuracy(const ModelCheckpoint& checkpoint, const std::vector<ProxySample>& dataset,
                                  const HeadMask& mask, int threads) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  mask.validate(checkpoint.config());
  std::vector<std::uint8_t> exact(dataset.size());
  std::vector<double> nll(dataset.size());
  parallel_for_index(dataset.size(), threads, [&](std::size_t i) {
    const ProxySample& s = dataset[i];
    if (s.answer_tokens.empty()) throw std::invalid_argument("empty answer");
    const TokenSeq tokens = s.full_tokens();
    const auto forward = forward_with_trace(checkpoint, tokens, mask, {false, Backend::serial});
    bool all = true;
    for (std::size_t p = s.prompt_tokens.size(); p < tokens.size(); ++p) {
      const auto row = forward.logits_at(p - 1);
      const auto best = static_cast<TokenId>(std::max_element(row.begin(), row.end()) - row.begin());
      all = all && best == tokens[p];
    }
    exact[i] = all ? 1 : 0;
    nll[i] = mean_nll_from_logits(forward, tokens, s.answer_span());
  });
  ProxyAccuracy acc;
  acc.exact_match_rate =
      static_cast<double>(std::accumulate(exact.begin(), exact.end(), std::size_t{0})) / static_cast<double>(dataset.size());
  acc.mean_answer_nll = std::accumulate(nll.begin(), nll.end(), 0.0) / static_cast<double>(dataset.size());
  return acc;
}

nlohmann::ordered_json heads_to_json(const HeadScoreTable& table, const std::string& config_fp,
                                     const std::string& model_fp, const std::string& proxy_fp) {
  nlohmann::ordered_json j;
  j["config_fingerprint"] = config_fp;
  j["model_fingerprint"] = model_fp;
  j["proxy_fingerprint"] = proxy_fp;
  j["n_layers"] = table.n_layers;
  j["n_heads"] = table.n_heads;
  j["top_fraction"] = table.top_fraction;
  auto scores = nlohmann::ordered_json::array();
  for (const auto& r : table.ranking) {
    scores.push_back({{"layer", r.head.layer}, {"head", r.head.head}, {"mean_score", r.mean_score}});
  }
  j["scores"] = scores;
  auto selected = nlohmann::ordered_json::array();
  for (const auto& h : table.selected.heads()) selected.push_back({h.layer, h.head});
  j["selected"] = selected;
  return j;
}

HeadScoreTable heads_from_json(const nlohmann::json& j) {
  HeadScoreTable t;
  try {
    t.n_layers = j.at("n_layers");
    t.n_heads = j.at("n_heads");
    t.top_fraction = j.at("top_fraction");
    t.mean_scores.assign(t.n_layers * t.n_heads, 0.0);
    std::vector<std::uint8_t> seen(t.mean_scores.size(), 0);
    for (const auto& s : j.at("scores")) {
      HeadRank r{{s.at("layer"), s.at("head")}, s.at("mean_score")};
      if (r.head.layer >= t.n_layers || r.head.head >= t.n_heads) throw DataError("score entry out of range");
      const std::size_t k = r.head.layer * t.n_heads + r.head.head;
      if (seen[k]++) throw DataError("duplicate score entry");
      t.mean_scores[k] = r.mean_score;
      t.ranking.push_back(r);
    }
    if (t.ranking.size() != t.mean_scores.size()) throw DataError("scores must cover every head");
    for (const auto& s : j.at("selected")) {
      const HeadId h{s.at(0), s.at(1)};
      if (h.layer >= t.n_layers || h.head >= t.n_heads) throw DataError("selected head out of range");
      t.selected.insert(h);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed heads file: ") + e.what());
  }
  return t;
}

}  // namespace attninf
