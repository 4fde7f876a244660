#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "attninf/checkpoint.hpp"
#include "attninf/inference.hpp"
#include "attninf/proxy_task.hpp"

namespace attninf {

struct HeadSampleScore {
  HeadId head;
  std::size_t sample = 0;
  std::vector<std::size_t> copied_positions;  // sorted needle positions
  std::size_t needle_len = 0;
  double score = 0.0;  // copied_positions.size() / needle_len
};

struct HeadRank {
  HeadId head;
  double mean_score = 0.0;
};

/// Per-head mean retrieval scores, descending ranking, and the selected top
/// fraction.
struct HeadScoreTable {
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  double top_fraction = 0.05;
  std::vector<double> mean_scores;  // layer-major
  std::vector<HeadRank> ranking;    // mean desc, then layer asc, then head asc
  HeadMask selected;

  std::size_t total_heads() const { return n_layers * n_heads; }
  double mean_score(HeadId h) const { return mean_scores[h.layer * n_heads + h.head]; }
};

// max(1, floor(fraction * n)), tolerant of binary rounding in fraction * n.
std::size_t top_count(double fraction, std::size_t n);

/// Copy-paste events read off an attention trace of prompt ++ answer. For the
/// answer token w at position p, the query sits at p - 1; head h copies when w
/// occurs in the needle and h's argmax position j (j <= p - 1) lies inside the
/// needle span with tokens[j] == w.
std::vector<HeadSampleScore> retrieval_scores_from_trace(const AttentionTrace& trace,
                                                         std::span<const TokenId> tokens, Span needle,
                                                         std::size_t answer_begin, std::size_t sample_index = 0);

std::vector<HeadSampleScore> score_heads_on_sample(const ModelCheckpoint& checkpoint, const ProxySample& sample,
                                                   std::size_t sample_index = 0);

/// Ranks heads from a samples x heads matrix of per-sample scores (layer-major).
HeadScoreTable build_score_table(std::size_t n_layers, std::size_t n_heads,
                                 const std::vector<std::vector<double>>& per_sample, double top_fraction);

HeadScoreTable detect_retrieval_heads(const ModelCheckpoint& checkpoint, const std::vector<ProxySample>& dataset,
                                      double top_fraction, int threads = 0);

/// Uniform draw of `count` heads from those ranked below the top exclude_top
/// fraction (top_count(exclude_top) heads are excluded; none when 0).
HeadMask random_control_mask(const HeadScoreTable& table, std::size_t count, double exclude_top,
                             std::uint64_t seed);

struct ProxyAccuracy {
  double exact_match_rate = 0.0;
  double mean_answer_nll = 0.0;
};

ProxyAccuracy eval_proxy_accuracy(const ModelCheckpoint& checkpoint, const std::vector<ProxySample>& dataset,
                                  const HeadMask& mask, int threads = 0);

// heads.json
nlohmann::ordered_json heads_to_json(const HeadScoreTable& table, const std::string& config_fp,
                                     const std::string& model_fp, const std::string& proxy_fp);
HeadScoreTable heads_from_json(const nlohmann::json& j);

}  // namespace attninf
