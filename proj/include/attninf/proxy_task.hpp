#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "attninf/inference.hpp"
#include "attninf/rng.hpp"
#include "attninf/tokenizer.hpp"

namespace attninf {

inline constexpr std::size_t kKeyLength = 32;
inline constexpr std::size_t kMaxValueTokens = 30;
inline constexpr std::size_t kMinContextPairs = 5;

struct ContextPair {
  std::string key;    // 32 chars over [a-z0-9]
  std::string value;  // at most kMaxValueTokens tokens
  bool operator==(const ContextPair&) const = default;
};

/// One synthetic few-shot key-value retrieval instance.
struct ProxySample {
  std::uint64_t sample_seed = 0;
  std::vector<ContextPair> context_pairs;
  std::vector<std::string> shot_keys;
  std::string query_key;
  std::string prompt_text;
  std::string answer_text;
  TokenSeq prompt_tokens;  // starts with BOS
  TokenSeq answer_tokens;
  Span needle_span;  // positions of the queried value inside prompt_tokens
  std::size_t total_tokens = 0;

  TokenSeq full_tokens() const;
  Span answer_span() const { return {prompt_tokens.size(), total_tokens}; }
};

/// Supplies candidate text values. Must be a pure function of the rng state.
class ValueSource {
 public:
  virtual ~ValueSource() = default;
  virtual std::string sentence(Rng& rng) const = 0;
  virtual std::string description() const = 0;
};

// Seeded synthesizer of short declarative sentences.
std::unique_ptr<ValueSource> synthetic_value_source();

// Sentences split from the "text" field of a JSONL corpus; values are drawn
// uniformly from the pool.
std::unique_ptr<ValueSource> corpus_value_source(const std::filesystem::path& jsonl_path);

struct ProxyConfig {
  std::size_t n_samples = 800;
  std::size_t max_len = 4096;
  std::size_t n_shots = 3;
  std::uint64_t seed = 0;
  int threads = 0;
};

std::vector<ProxySample> generate_proxy_dataset(const Tokenizer& tokenizer, const ProxyConfig& config,
                                                const ValueSource& values);

// Builds sample `index` of a dataset; generate_proxy_dataset is this over all indices.
ProxySample generate_proxy_sample(const Tokenizer& tokenizer, const ProxyConfig& config,
                                  const ValueSource& values, std::size_t index);

/// Fills the fixed prompt template from a sample's pairs and keys.
struct RenderedSample {
  std::string prompt_text;
  std::string answer_text;
};
RenderedSample render_sample(const ProxySample& sample);

// Trims to at most max_tokens tokens, dropping whole trailing words first.
std::string cap_value(const Tokenizer& tokenizer, std::string value, std::size_t max_tokens);

// Checks every ProxySample invariant; throws DataError describing the first violation.
void validate_sample(const Tokenizer& tokenizer, const ProxySample& sample, std::size_t max_len);

void write_proxy_jsonl(const std::vector<ProxySample>& samples, std::ostream& out);
void write_proxy_jsonl(const std::vector<ProxySample>& samples, const std::filesystem::path& path);
// Re-tokenizes prompt/answer and validates needle bookkeeping.
std::vector<ProxySample> read_proxy_jsonl(const Tokenizer& tokenizer, const std::filesystem::path& path);

}  // namespace attninf
