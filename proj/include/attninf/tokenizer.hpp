#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace attninf {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

/// Byte-level (ids 0..255 are bytes, 256 = BOS, 257 = EOS) or a greedy
/// longest-match tokenizer over a JSON vocabulary file. Immutable after
/// construction.
class Tokenizer {
 public:
  enum class Mode { byte_level, vocab_file };

  static Tokenizer byte_level();

  // vocab maps token string -> id; ids must be dense in [0, n). Entries named
  // "<bos>" / "<eos>" become the special tokens, otherwise BOS = n, EOS = n + 1.
  static Tokenizer from_vocab(const std::map<std::string, TokenId>& vocab);
  static Tokenizer from_vocab_file(const std::filesystem::path& path);

  // "byte" selects byte-level mode; anything else is a vocab file path.
  static Tokenizer from_name(const std::string& entry);

  Mode mode() const { return mode_; }
  std::size_t vocab_size() const { return vocab_size_; }
  TokenId bos() const { return bos_; }
  TokenId eos() const { return eos_; }
  // Stable identifier for manifests and fingerprints.
  std::string description() const;

  // [BOS] ++ pieces(text)
  TokenSeq encode(std::string_view text) const;
  // Pieces only, no BOS. Throws DataError on an unmatchable prefix.
  TokenSeq encode_pieces(std::string_view text) const;
  // BOS/EOS render as nothing. Throws DataError on an out-of-range id.
  std::string decode(const TokenSeq& ids) const;
  std::string decode(const TokenId* begin, const TokenId* end) const;

 private:
  Mode mode_ = Mode::byte_level;
  std::size_t vocab_size_ = 258;
  TokenId bos_ = 256;
  TokenId eos_ = 257;
  std::unordered_map<std::string, TokenId> piece_to_id_;
  std::vector<std::string> id_to_piece_;
  std::size_t max_piece_len_ = 0;
  std::string source_;
};

}  // namespace attninf
