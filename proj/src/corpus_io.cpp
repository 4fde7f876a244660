#include "attninf/corpus_io.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"

#include "attninf/errors.hpp"

namespace attninf {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates, beyond U+10FFFF.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

CorpusReader::CorpusReader(const std::filesystem::path& path, bool strict)
    : file_(path, std::ios::binary), in_(&file_), name_(path.string()), strict_(strict) {
  if (!file_) throw DataError("cannot open corpus " + path.string());
}

CorpusReader::CorpusReader(std::istream& in, std::string name, bool strict)
    : in_(&in), name_(std::move(name)), strict_(strict) {}

bool CorpusReader::next(Document& doc) {
  std::string line;
  while (std::getline(*in_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string reason;
    if (!valid_utf8(line)) {
      reason = "invalid UTF-8";
    } else {
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) {
        reason = "not a JSON object";
      } else {
        auto field = [&](const char* name) -> const nlohmann::json* {
          auto it = j.find(name);
          return it != j.end() && it->is_string() ? &*it : nullptr;
        };
        const auto* id = field(schema::kId);
        const auto* domain = field(schema::kDomain);
        const auto* text = field(schema::kText);
        if (!id || !domain || !text) {
          reason = std::string("missing or non-string field \"") +
                   (!id ? schema::kId : !domain ? schema::kDomain : schema::kText) + "\"";
        } else if (id->get_ref<const std::string&>().empty()) {
          reason = "empty id";
        } else if (domain->get_ref<const std::string&>().empty()) {
          reason = "empty domain";
        } else if (text->get_ref<const std::string&>().empty()) {
          reason = "empty text";
        } else if (seen_ids_.count(id->get_ref<const std::string&>())) {
          reason = "duplicate id \"" + id->get<std::string>() + "\"";
        } else {
          doc.id = id->get<std::string>();
          doc.domain = domain->get<std::string>();
          doc.text = text->get<std::string>();
          doc.token_ids.clear();
          doc.line = line_;
          seen_ids_.insert(doc.id);
          return true;
        }
      }
    }
    if (strict_) throw DataError(name_ + ":" + std::to_string(line_) + ": " + reason);
    skipped_.push_back({line_, reason});
  }
  return false;
}

std::vector<Document> read_corpus(const std::filesystem::path& path, bool strict,
                                  std::vector<SkippedRecord>* skipped) {
  CorpusReader reader(path, strict);
  std::vector<Document> docs;
  Document doc;
  while (reader.next(doc)) docs.push_back(doc);
  if (skipped) *skipped = reader.skipped();
  return docs;
}

std::string format_real(double v) {
  if (!std::isfinite(v)) throw DataError("cannot serialize non-finite value");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string scored_to_json_line(const ScoredDocument& d) {
  std::string s = "{";
  s += "\"id\":" + nlohmann::json(d.id).dump();
  s += ",\"domain\":" + nlohmann::json(d.domain).dump();
  s += ",\"n_tokens\":" + std::to_string(d.n_tokens);
  s += std::string(",\"truncated\":") + (d.truncated ? "true" : "false");
  s += ",\"loss_base\":" + format_real(d.loss_base);
  s += ",\"loss_ref\":" + format_real(d.loss_ref);
  s += ",\"score\":" + format_real(d.score);
  s += ",\"rank_in_domain\":" + (d.rank_in_domain ? std::to_string(*d.rank_in_domain) : std::string("null"));
  s += std::string(",\"selected\":") + (d.selected ? "true" : "false");
  return s + "}";
}

ScoredDocument scored_from_json_line(std::string_view line) {
  ScoredDocument d;
  try {
    const auto j = nlohmann::json::parse(line);
    d.id = j.at(schema::kId).get<std::string>();
    d.domain = j.at(schema::kDomain).get<std::string>();
    d.n_tokens = j.at(schema::kNTokens).get<std::size_t>();
    d.truncated = j.at(schema::kTruncated).get<bool>();
    d.loss_base = j.at(schema::kLossBase).get<double>();
    d.loss_ref = j.at(schema::kLossRef).get<double>();
    d.score = j.at(schema::kScore).get<double>();
    const auto& rank = j.at(schema::kRankInDomain);
    if (!rank.is_null()) d.rank_in_domain = rank.get<std::size_t>();
    d.selected = j.at(schema::kSelected).get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed scored record: ") + e.what());
  }
  return d;
}

void write_selection(const std::vector<ScoredDocument>& scored, std::ostream& out, bool selected_only) {
  for (const auto& d : scored) {
    if (selected_only && !d.selected) continue;
    out << scored_to_json_line(d) << '\n';
  }
}

void write_selection(const std::vector<ScoredDocument>& scored, const std::filesystem::path& path,
                     bool selected_only) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_selection(scored, out, selected_only);
  out.flush();
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<ScoredDocument> read_scored(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open scored file " + path.string());
  std::vector<ScoredDocument> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(scored_from_json_line(line));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace attninf
