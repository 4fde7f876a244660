#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "attninf/tokenizer.hpp"

namespace attninf {

// Field names shared by corpus, scored and selection JSONL files.
namespace schema {
inline constexpr const char* kId = "id";
inline constexpr const char* kDomain = "domain";
inline constexpr const char* kText = "text";
inline constexpr const char* kNTokens = "n_tokens";
inline constexpr const char* kTruncated = "truncated";
inline constexpr const char* kLossBase = "loss_base";
inline constexpr const char* kLossRef = "loss_ref";
inline constexpr const char* kScore = "score";
inline constexpr const char* kRankInDomain = "rank_in_domain";
inline constexpr const char* kSelected = "selected";
}  // namespace schema

struct Document {
  std::string id;
  std::string domain;
  std::string text;
  TokenSeq token_ids;     // filled at scoring time
  std::size_t line = 0;   // 1-based source line, 0 when not file-backed
};

struct ScoredDocument {
  std::string id;
  std::string domain;
  std::size_t n_tokens = 0;
  bool truncated = false;
  double loss_base = 0.0;
  double loss_ref = 0.0;
  double score = 0.0;
  std::optional<std::size_t> rank_in_domain;  // 1-based once ranked
  bool selected = false;

  bool operator==(const ScoredDocument&) const = default;
};

struct SkippedRecord {
  std::size_t line = 0;
  std::string reason;
};

bool valid_utf8(std::string_view s);

/// Streaming JSONL reader of {"id", "domain", "text"} records. Holds one record
/// at a time plus the set of ids seen. Strict mode throws DataError on the
/// first malformed line; lenient mode skips and records it.
class CorpusReader {
 public:
  CorpusReader(const std::filesystem::path& path, bool strict);
  CorpusReader(std::istream& in, std::string name, bool strict);

  // Returns false at end of input.
  bool next(Document& doc);

  std::size_t line_count() const { return line_; }
  std::size_t skip_count() const { return skipped_.size(); }
  const std::vector<SkippedRecord>& skipped() const { return skipped_; }
  const std::string& name() const { return name_; }

 private:
  std::ifstream file_;
  std::istream* in_;
  std::string name_;
  bool strict_;
  std::size_t line_ = 0;
  std::unordered_set<std::string> seen_ids_;
  std::vector<SkippedRecord> skipped_;
};

std::vector<Document> read_corpus(const std::filesystem::path& path, bool strict,
                                  std::vector<SkippedRecord>* skipped = nullptr);

// "%.9g"; throws DataError on non-finite values.
std::string format_real(double v);

std::string scored_to_json_line(const ScoredDocument& doc);
ScoredDocument scored_from_json_line(std::string_view line);

/// Writes scored documents as JSONL, optionally only those marked selected.
void write_selection(const std::vector<ScoredDocument>& scored, std::ostream& out, bool selected_only);
void write_selection(const std::vector<ScoredDocument>& scored, const std::filesystem::path& path,
                     bool selected_only);
std::vector<ScoredDocument> read_scored(const std::filesystem::path& path);

}  // namespace attninf
