#include "attninf/proxy_task.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "attninf/errors.hpp"
#include "attninf/parallel.hpp"

namespace attninf {
namespace {

constexpr std::string_view kInstruction =
    "Please extract the value corresponding to the specified key from the following JSON object. "
    "Output only the value of the corresponding key and nothing else. The JSON data is as follows:";
constexpr std::string_view kKeyAlphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
constexpr int kMaxDrawAttempts = 1000;

std::string question(const std::string& key) {
  return "question: What is the value of key \"" + key + "\"?";
}

// The prompt as an ordered list of text pieces, each tokenized on its own so
// the needle lands on exact token boundaries.
struct Piece {
  std::string text;
  bool needle = false;
};

std::vector<Piece> prompt_pieces(const std::vector<ContextPair>& pairs, const std::vector<std::string>& shot_keys,
                                 const std::string& query_key) {
  std::vector<Piece> pieces;
  pieces.push_back({std::string(kInstruction) + "\n"});
  pieces.push_back({"{"});
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i > 0) pieces.push_back({", "});
    pieces.push_back({"\"" + pairs[i].key + "\": \""});
    pieces.push_back({pairs[i].value, pairs[i].key == query_key});
    pieces.push_back({"\""});
  }
  pieces.push_back({"}\n\n"});
  for (const auto& key : shot_keys) {
    const auto it = std::find_if(pairs.begin(), pairs.end(), [&](const ContextPair& p) { return p.key == key; });
    pieces.push_back({question(key) + "\n"});
    pieces.push_back({"answer: " + it->value + "\n"});
  }
  pieces.push_back({question(query_key) + "\n\nanswer:\n"});
  return pieces;
}

std::string random_key(Rng& rng) {
  std::string key(kKeyLength, ' ');
  for (auto& ch : key) ch = kKeyAlphabet[rng.below(kKeyAlphabet.size())];
  return key;
}

// Replace characters that would need JSON escaping, collapse whitespace.
std::string sanitize(std::string_view text) {
  std::string out;
  bool space = false;
  for (unsigned char c : text) {
    const bool blank = c < 0x20 || c == '"' || c == '\\' || c == ' ' || c == 0x7F;
    if (blank) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

std::size_t utf8_boundary(const std::string& s, std::size_t pos) {
  while (pos > 0 && pos < s.size() && (static_cast<unsigned char>(s[pos]) & 0xC0) == 0x80) --pos;
  return pos;
}

class SyntheticSentences final : public ValueSource {
 public:
  std::string sentence(Rng& rng) const override {
    static constexpr std::array<std::string_view, 24> kAdjectives = {
        "quiet", "brave", "small", "old", "red", "calm", "wild", "pale", "warm", "cold", "dark", "bright",
        "tall", "soft", "keen", "slow", "swift", "gray", "young", "lucky", "shy", "bold", "neat", "odd"};
    static constexpr std::array<std::string_view, 24> kNouns = {
        "fox", "river", "owl", "baker", "ship", "garden", "poet", "lamp", "horse", "cloud", "miner", "bell",
        "tiger", "clock", "nurse", "moth", "bridge", "crow", "pilot", "stone", "king", "wolf", "seed", "monk"};
    static constexpr std::array<std::string_view, 20> kVerbs = {
        "sings", "waits", "runs", "sleeps", "drifts", "glows", "hums", "falls", "reads", "turns",
        "wakes", "grows", "hides", "rests", "swims", "paints", "shines", "dreams", "walks", "counts"};
    static constexpr std::array<std::string_view, 16> kAdverbs = {
        "slowly", "alone", "today", "again", "softly", "early", "late", "well",
        "inside", "often", "twice", "gladly", "nearby", "above", "below", "still"};
    auto pick = [&rng](const auto& list) { return std::string(list[rng.below(list.size())]); };
    std::string s = pick(kAdjectives);
    s[0] = static_cast<char>(s[0] - 'a' + 'A');
    s += " " + pick(kNouns) + " " + pick(kVerbs);
    if (rng.below(2) == 0) s += " " + pick(kAdverbs);
    return s + ".";
  }
  std::string description() const override { return "synthetic"; }
};

class CorpusSentences final : public ValueSource {
 public:
  CorpusSentences(std::vector<std::string> pool, std::string source)
      : pool_(std::move(pool)), source_(std::move(source)) {}

  std::string sentence(Rng& rng) const override { return pool_[rng.below(pool_.size())]; }
  std::string description() const override { return source_; }

 private:
  std::vector<std::string> pool_;
  std::string source_;
};

}  // namespace

TokenSeq ProxySample::full_tokens() const {
  TokenSeq all = prompt_tokens;
  all.insert(all.end(), answer_tokens.begin(), answer_tokens.end());
  return all;
}

std::unique_ptr<ValueSource> synthetic_value_source() { return std::make_unique<SyntheticSentences>(); }

std::unique_ptr<ValueSource> corpus_value_source(const std::filesystem::path& jsonl_path) {
  std::ifstream in(jsonl_path);
  if (!in) throw DataError("cannot open value corpus " + jsonl_path.string());
  std::vector<std::string> pool;
  std::string line;
  while (std::getline(in, line)) {
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      continue;
    }
    if (!record.is_object() || !record.contains("text") || !record["text"].is_string()) continue;
    const std::string text = record["text"].get<std::string>();
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
      const bool end = i == text.size() ||
                       ((text[i] == '.' || text[i] == '!' || text[i] == '?') &&
                        (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]))));
      if (!end) continue;
      const std::size_t stop = std::min(i + 1, text.size());
      std::string s = sanitize(std::string_view(text).substr(start, stop - start));
      if (s.size() >= 8) pool.push_back(std::move(s));
      start = stop;
    }
  }
  if (pool.empty()) throw DataError("value corpus " + jsonl_path.string() + " yields no sentences");
  return std::make_unique<CorpusSentences>(std::move(pool), "corpus:" + jsonl_path.filename().string());
}

std::string cap_value(const Tokenizer& tokenizer, std::string value, std::size_t max_tokens) {
  while (tokenizer.encode_pieces(value).size() > max_tokens) {
    const auto cut = value.find_last_of(' ');
    if (cut != std::string::npos && cut > 0) {
      value.resize(cut);
      continue;
    }
    // A single over-long word: cut at a token boundary, then back off to a UTF-8 boundary.
    TokenSeq ids = tokenizer.encode_pieces(value);
    ids.resize(max_tokens);
    std::string cut_text = tokenizer.decode(ids);
    cut_text.resize(utf8_boundary(cut_text, cut_text.size()));
    if (cut_text.size() >= value.size()) cut_text.resize(value.size() - 1);
    value = cut_text;
  }
  return value;
}

RenderedSample render_sample(const ProxySample& sample) {
  RenderedSample out;
  for (const auto& piece : prompt_pieces(sample.context_pairs, sample.shot_keys, sample.query_key)) {
    out.prompt_text += piece.text;
  }
  const auto it = std::find_if(sample.context_pairs.begin(), sample.context_pairs.end(),
                               [&](const ContextPair& p) { return p.key == sample.query_key; });
  out.answer_text = it == sample.context_pairs.end() ? std::string() : it->value;
  return out;
}

ProxySample generate_proxy_sample(const Tokenizer& tokenizer, const ProxyConfig& config,
                                  const ValueSource& values, std::size_t index) {
  ProxySample sample;
  sample.sample_seed = derive_seed(config.seed, index);
  Rng rng(sample.sample_seed);

  std::set<std::string> used_keys;
  std::set<std::string> used_values;
  auto draw_pair = [&]() {
    ContextPair pair;
    do {
      pair.key = random_key(rng);
    } while (!used_keys.insert(pair.key).second);
    for (int attempt = 0;; ++attempt) {
      if (attempt == kMaxDrawAttempts) {
        throw DataError("value source exhausted: no fresh nonempty value after " +
                        std::to_string(kMaxDrawAttempts) + " draws");
      }
      pair.value = cap_value(tokenizer, sanitize(values.sentence(rng)), kMaxValueTokens);
      if (!pair.value.empty() && used_values.insert(pair.value).second) break;
    }
    return pair;
  };
  auto count = [&](const std::string& text) { return tokenizer.encode_pieces(text).size(); };
  auto pair_cost = [&](const ContextPair& p, bool first) {
    return count("\"" + p.key + "\": \"") + count(p.value) + count("\"") + (first ? 0 : count(", "));
  };

  // Shot and query pairs are drawn first so their exact token cost is known
  // before the context is filled.
  std::vector<ContextPair> special;
  for (std::size_t i = 0; i < config.n_shots + 1; ++i) special.push_back(draw_pair());
  for (std::size_t i = 0; i < config.n_shots; ++i) sample.shot_keys.push_back(special[i].key);
  sample.query_key = special.back().key;
  const std::string& answer = special.back().value;

  std::size_t total = 1 + count(std::string(kInstruction) + "\n") + count("{") + count("}\n\n");
  for (std::size_t i = 0; i < config.n_shots; ++i) {
    total += count(question(special[i].key) + "\n") + count("answer: " + special[i].value + "\n");
  }
  total += count(question(sample.query_key) + "\n\nanswer:\n") + count(answer);
  for (std::size_t i = 0; i < special.size(); ++i) total += pair_cost(special[i], i == 0);
  if (total > config.max_len) {
    throw std::invalid_argument("budget too small: shots and query alone need " + std::to_string(total) +
                                " tokens > max_len " + std::to_string(config.max_len));
  }

  std::vector<ContextPair> pairs = special;
  while (true) {
    ContextPair next = draw_pair();
    const std::size_t cost = pair_cost(next, false);
    if (total + cost > config.max_len) break;
    total += cost;
    pairs.push_back(std::move(next));
  }
  if (pairs.size() < kMinContextPairs) {
    throw std::invalid_argument("budget too small: max_len " + std::to_string(config.max_len) +
                                " leaves room for only " + std::to_string(pairs.size()) + " context pairs");
  }
  for (std::size_t i = pairs.size() - 1; i > 0; --i) std::swap(pairs[i], pairs[rng.below(i + 1)]);
  sample.context_pairs = std::move(pairs);

  sample.prompt_tokens = {tokenizer.bos()};
  for (const auto& piece : prompt_pieces(sample.context_pairs, sample.shot_keys, sample.query_key)) {
    const TokenSeq ids = tokenizer.encode_pieces(piece.text);
    if (piece.needle) sample.needle_span = {sample.prompt_tokens.size(), sample.prompt_tokens.size() + ids.size()};
    sample.prompt_tokens.insert(sample.prompt_tokens.end(), ids.begin(), ids.end());
    sample.prompt_text += piece.text;
  }
  sample.answer_text = answer;
  sample.answer_tokens = tokenizer.encode_pieces(answer);
  sample.total_tokens = sample.prompt_tokens.size() + sample.answer_tokens.size();
  if (tokenizer.encode(sample.prompt_text) != sample.prompt_tokens) {
    throw DataError("tokenizer merges across prompt template boundaries; needle span would be ambiguous");
  }
  return sample;
}

std::vector<ProxySample> generate_proxy_dataset(const Tokenizer& tokenizer, const ProxyConfig& config,
                                                const ValueSource& values) {
  if (config.n_samples == 0) throw std::invalid_argument("n_samples must be >= 1");
  if (config.n_shots == 0) throw std::invalid_argument("n_shots must be >= 1");
  std::vector<ProxySample> samples(config.n_samples);
  parallel_for_index(config.n_samples, config.threads, [&](std::size_t i) {
    samples[i] = generate_proxy_sample(tokenizer, config, values, i);
  });
  return samples;
}

void validate_sample(const Tokenizer& tokenizer, const ProxySample& s, std::size_t max_len) {
  auto fail = [](const std::string& what) { throw DataError("invalid proxy sample: " + what); };
  std::set<std::string> keys;
  for (const auto& p : s.context_pairs) {
    if (p.key.size() != kKeyLength ||
        p.key.find_first_not_of(kKeyAlphabet) != std::string::npos) {
      fail("key '" + p.key + "' is not 32 chars over [a-z0-9]");
    }
    if (!keys.insert(p.key).second) fail("duplicate key " + p.key);
    if (tokenizer.encode_pieces(p.value).size() > kMaxValueTokens) fail("value exceeds token cap");
  }
  if (s.context_pairs.size() < kMinContextPairs) fail("fewer than 5 context pairs");
  std::set<std::string> shots(s.shot_keys.begin(), s.shot_keys.end());
  if (shots.size() != s.shot_keys.size()) fail("shot keys not distinct");
  for (const auto& k : s.shot_keys) {
    if (!keys.count(k)) fail("shot key not in context");
  }
  if (!keys.count(s.query_key) || shots.count(s.query_key)) fail("query key missing or reused as a shot");
  const RenderedSample r = render_sample(s);
  if (r.prompt_text != s.prompt_text || r.answer_text != s.answer_text) fail("text disagrees with template");
  if (s.total_tokens != s.prompt_tokens.size() + s.answer_tokens.size()) fail("total_tokens mismatch");
  if (s.total_tokens > max_len) fail("exceeds token budget");
  if (s.needle_span.end > s.prompt_tokens.size() || s.needle_span.size() != s.answer_tokens.size() ||
      !std::equal(s.answer_tokens.begin(), s.answer_tokens.end(), s.prompt_tokens.begin() + s.needle_span.begin)) {
    fail("needle span does not hold the answer tokens");
  }
  if (tokenizer.decode(s.prompt_tokens.data() + s.needle_span.begin, s.prompt_tokens.data() + s.needle_span.end) !=
      s.answer_text) {
    fail("needle span does not decode to the answer");
  }
}

void write_proxy_jsonl(const std::vector<ProxySample>& samples, std::ostream& out) {
  for (const auto& s : samples) {
    nlohmann::ordered_json j;
    auto pairs = nlohmann::ordered_json::array();
    for (const auto& p : s.context_pairs) pairs.push_back({p.key, p.value});
    j["context_pairs"] = pairs;
    j["shot_keys"] = s.shot_keys;
    j["query_key"] = s.query_key;
    j["prompt_text"] = s.prompt_text;
    j["answer_text"] = s.answer_text;
    j["needle_span"] = {s.needle_span.begin, s.needle_span.end};
    j["total_tokens"] = s.total_tokens;
    j["sample_seed"] = s.sample_seed;
    out << j.dump() << '\n';
  }
}

void write_proxy_jsonl(const std::vector<ProxySample>& samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_proxy_jsonl(samples, out);
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<ProxySample> read_proxy_jsonl(const Tokenizer& tokenizer, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open proxy dataset " + path.string());
  std::vector<ProxySample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ProxySample s;
      for (const auto& p : j.at("context_pairs")) s.context_pairs.push_back({p.at(0), p.at(1)});
      s.shot_keys = j.at("shot_keys").get<std::vector<std::string>>();
      s.query_key = j.at("query_key");
      s.prompt_text = j.at("prompt_text");
      s.answer_text = j.at("answer_text");
      s.needle_span = {j.at("needle_span").at(0).get<std::size_t>(), j.at("needle_span").at(1).get<std::size_t>()};
      s.total_tokens = j.at("total_tokens");
      s.sample_seed = j.at("sample_seed");
      s.prompt_tokens = tokenizer.encode(s.prompt_text);
      s.answer_tokens = tokenizer.encode_pieces(s.answer_text);
      validate_sample(tokenizer, s, s.total_tokens);
      samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (samples.empty()) throw DataError("proxy dataset " + path.string() + " is empty");
  return samples;
}

}  // namespace attninf
