#pragma once

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "attninf/corpus_io.hpp"
#include "attninf/head_detect.hpp"

namespace attninf {

enum class WeightMethod { tf, tfidf };

WeightMethod parse_weight_method(const std::string& name);
std::string to_string(WeightMethod method);

struct WordStats {
  WeightMethod method = WeightMethod::tf;
  std::size_t top_k = 1000;
  std::vector<std::pair<std::string, double>> words;  // weight desc, then word asc
};

// Lowercased words split on non-alphanumeric ASCII bytes (bytes >= 0x80 are
// word characters); pure numbers and words under 2 characters are dropped.
std::vector<std::string> extract_words(std::string_view text);

/// Bag-of-words accumulator: term frequency across the selection and the
/// number of documents containing each word. Merging is commutative.
class WordCounter {
 public:
  void add_document(std::string_view text);
  void merge(const WordCounter& other);

  std::size_t documents() const { return documents_; }
  // tf: raw frequency. tfidf: tf * ln((1 + N) / (1 + df)) + tf.
  WordStats top_words(WeightMethod method, std::size_t top_k) const;

 private:
  std::size_t documents_ = 0;
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> counts_;  // word -> (tf, df)
};

WordStats top_words(const std::vector<std::string>& selection, WeightMethod method, std::size_t top_k,
                    int threads = 0);

/// |words(a) ∩ words(b)| / max(|words(a)|, |words(b)|); the denominator is
/// top_k whenever both selections have at least top_k distinct words.
double word_overlap(const WordStats& a, const WordStats& b);

struct StabilityReport {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> jaccard;      // selected sets
  std::vector<std::vector<double>> rank_corr;    // Spearman over mean scores
};

StabilityReport head_stability(const std::vector<HeadScoreTable>& tables, std::vector<std::string> labels = {});

double jaccard(const HeadMask& a, const HeadMask& b);
// Spearman correlation with average ranks for ties; 1 when both inputs are constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct DomainSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // population
  double p01 = 0.0, p25 = 0.0, p50 = 0.0, p75 = 0.0, p99 = 0.0;
};

// Linear interpolation between closest ranks over sorted values.
double percentile(const std::vector<double>& sorted, double q);

std::map<std::string, DomainSummary> score_summary(const std::vector<ScoredDocument>& scored);

nlohmann::ordered_json to_json(const WordStats& stats);
nlohmann::ordered_json to_json(const StabilityReport& report);
nlohmann::ordered_json to_json(const std::map<std::string, DomainSummary>& summary);

std::string format_table(const StabilityReport& report);
std::string format_table(const std::map<std::string, DomainSummary>& summary);

}  // namespace attninf
