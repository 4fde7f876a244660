#include "attninf/tokenizer.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"

#include "attninf/errors.hpp"
#include "attninf/hashing.hpp"

namespace attninf {
namespace {

constexpr std::string_view kBosName = "<bos>";
constexpr std::string_view kEosName = "<eos>";

}  // namespace

Tokenizer Tokenizer::byte_level() { return Tokenizer{}; }

Tokenizer Tokenizer::from_vocab(const std::map<std::string, TokenId>& vocab) {
  Tokenizer tok;
  tok.mode_ = Mode::vocab_file;
  std::optional<TokenId> bos, eos;
  std::vector<bool> seen(vocab.size(), false);
  for (const auto& [piece, id] : vocab) {
    if (id >= vocab.size() || seen[id]) {
      throw DataError("vocab ids must be dense and unique in [0, " + std::to_string(vocab.size()) + ")");
    }
    seen[id] = true;
  }
  tok.id_to_piece_.assign(vocab.size(), {});
  for (const auto& [piece, id] : vocab) {
    tok.id_to_piece_[id] = piece;
    if (piece == kBosName) {
      bos = id;
    } else if (piece == kEosName) {
      eos = id;
    } else {
      if (piece.empty()) throw DataError("vocab contains an empty token string");
      tok.piece_to_id_.emplace(piece, id);
      tok.max_piece_len_ = std::max(tok.max_piece_len_, piece.size());
    }
  }
  std::size_t n = vocab.size();
  tok.bos_ = bos ? *bos : static_cast<TokenId>(n++);
  tok.eos_ = eos ? *eos : static_cast<TokenId>(n++);
  tok.id_to_piece_.resize(n);
  tok.vocab_size_ = n;
  nlohmann::json j = vocab;
  tok.source_ = "vocab:" + sha256_hex(j.dump()).substr(0, 16);
  return tok;
}

Tokenizer Tokenizer::from_vocab_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocab file " + path.string());
  std::map<std::string, TokenId> vocab;
  try {
    const auto j = nlohmann::json::parse(in);
    if (!j.is_object()) throw DataError("vocab file must be a JSON object");
    for (const auto& [piece, id] : j.items()) vocab.emplace(piece, id.get<TokenId>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed vocab: " + e.what());
  }
  return from_vocab(vocab);
}

Tokenizer Tokenizer::from_name(const std::string& entry) {
  if (entry == "byte" || entry == "byte-level") return byte_level();
  return from_vocab_file(entry);
}

std::string Tokenizer::description() const {
  return mode_ == Mode::byte_level ? std::string("byte-level") : source_;
}

TokenSeq Tokenizer::encode(std::string_view text) const {
  TokenSeq ids{bos_};
  const TokenSeq pieces = encode_pieces(text);
  ids.insert(ids.end(), pieces.begin(), pieces.end());
  return ids;
}

TokenSeq Tokenizer::encode_pieces(std::string_view text) const {
  TokenSeq ids;
  ids.reserve(text.size());
  if (mode_ == Mode::byte_level) {
    for (unsigned char c : text) ids.push_back(c);
    return ids;
  }
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t len = std::min(max_piece_len_, text.size() - pos);
    for (; len > 0; --len) {
      auto it = piece_to_id_.find(std::string(text.substr(pos, len)));
      if (it != piece_to_id_.end()) {
        ids.push_back(it->second);
        break;
      }
    }
    if (len == 0) {
      throw DataError("unmatchable input at byte " + std::to_string(pos) + " for vocab tokenizer");
    }
    pos += len;
  }
  return ids;
}

std::string Tokenizer::decode(const TokenSeq& ids) const {
  return decode(ids.data(), ids.data() + ids.size());
}

std::string Tokenizer::decode(const TokenId* begin, const TokenId* end) const {
  std::string out;
  for (const TokenId* p = begin; p != end; ++p) {
    const TokenId id = *p;
    if (id >= vocab_size_) throw DataError("token id " + std::to_string(id) + " out of range");
    if (id == bos_ || id == eos_) continue;
    if (mode_ == Mode::byte_level) {
      out.push_back(static_cast<char>(id));
    } else {
      out += id_to_piece_[id];
    }
  }
  return out;
}

}  // namespace attninf
