#include "cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>

#include "CLI11.hpp"
#include "json.hpp"

#include "attninf/analysis.hpp"
#include "attninf/checkpoint.hpp"
#include "attninf/corpus_io.hpp"
#include "attninf/errors.hpp"
#include "attninf/hashing.hpp"
#include "attninf/head_detect.hpp"
#include "attninf/influence.hpp"
#include "attninf/proxy_task.hpp"
#include "attninf/tokenizer.hpp"

namespace attninf::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

class Manifest {
 public:
  explicit Manifest(std::string subcommand) : start_(std::chrono::steady_clock::now()) {
    body_["subcommand"] = std::move(subcommand);
    body_["tool_version"] = kToolVersion;
    body_["parameters"] = ojson::object();
    body_["inputs"] = ojson::object();
  }

  template <typename T>
  void param(const std::string& name, const T& value) { body_["parameters"][name] = value; }
  void input(const std::string& path) { body_["inputs"][path] = sha256_file(path); }
  void seed(std::uint64_t s) { body_["seed"] = s; }

  // Writes <output>.manifest.json next to the output file.
  void write_for(const fs::path& output) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    body_["outputs"] = {{output.string(), sha256_file(output)}};
    body_["timings"] = {{"wall_seconds", secs}};
    fs::path path = output;
    path += ".manifest.json";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write manifest " + path.string());
    out << body_.dump(2) << '\n';
  }

 private:
  ojson body_;
  std::chrono::steady_clock::time_point start_;
};

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

// Accepts a heads.json (uses "selected") or a mask.json (uses "heads").
HeadMask load_mask(const fs::path& path, const ModelCheckpoint& model) {
  const auto j = read_json_file(path);
  const std::string expected = config_fingerprint(model.config());
  if (!j.contains("config_fingerprint") || j["config_fingerprint"] != expected) {
    throw DataError(path.string() + ": config fingerprint does not match checkpoint");
  }
  HeadMask mask;
  try {
    const auto& list = j.contains("heads") ? j.at("heads") : j.at("selected");
    for (const auto& h : list) mask.insert({h.at(0).get<std::size_t>(), h.at(1).get<std::size_t>()});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed head list: " + e.what());
  }
  try {
    mask.validate(model.config());
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (j.contains("model_fingerprint") && j["model_fingerprint"] != model.weights_fingerprint()) {
    std::cerr << "warning: " << path.string() << " was computed on different weights of the same shape\n";
  }
  return mask;
}

struct InitModelOpts {
  ModelConfig config;
  std::uint64_t seed = 0;
  std::string out;
};

struct GenProxyOpts {
  std::string tokenizer = "byte";
  ProxyConfig proxy;
  std::string value_corpus;
  std::string out;
};

struct DetectOpts {
  std::string model, proxy, out, tokenizer = "byte";
  double top_frac = 0.05;
  int threads = 0;
};

struct MaskRandomOpts {
  std::string heads, out;
  std::size_t count = 0;
  double exclude_top = 0.05;
  std::uint64_t seed = 0;
};

struct EvalOpts {
  std::string model, proxy, heads, out, tokenizer = "byte";
  int threads = 0;
};

struct ScoreOpts {
  std::string model, heads, corpus, out, tokenizer = "byte";
  int workers = 1;
  bool strict = false;
};

struct SelectOpts {
  std::string scored, out;
  double top_frac = 0.2;
  bool per_domain = false;
  bool selected_only = false;
};

struct OverlapOpts {
  std::string a, b, corpus, out, method = "tf";
  std::size_t top_k = 1000;
};

struct StabilityOpts {
  std::vector<std::string> heads, labels;
  std::string checkpoints, proxy, tokenizer = "byte";
  double top_frac = 0.05;
  int threads = 0;
  std::string out;
};

struct SummaryOpts {
  std::string scored, out;
};

void cmd_init_model(const InitModelOpts& o, std::ostream& out) {
  Manifest m("init-model");
  m.param("config", to_json(o.config));
  m.seed(o.seed);
  const auto model = random_checkpoint(o.config, o.seed);
  save_checkpoint(model, o.out);
  m.write_for(o.out);
  out << "wrote " << o.out << " (" << model.config().total_heads() << " heads)\n";
}

void cmd_gen_proxy(const GenProxyOpts& o, std::ostream& out) {
  Manifest m("gen-proxy");
  const auto tokenizer = Tokenizer::from_name(o.tokenizer);
  if (tokenizer.mode() == Tokenizer::Mode::vocab_file) m.input(o.tokenizer);
  std::unique_ptr<ValueSource> values;
  if (o.value_corpus.empty()) {
    values = synthetic_value_source();
  } else {
    values = corpus_value_source(o.value_corpus);
    m.input(o.value_corpus);
  }
  m.param("tokenizer", tokenizer.description());
  m.param("n", o.proxy.n_samples);
  m.param("max_len", o.proxy.max_len);
  m.param("shots", o.proxy.n_shots);
  m.param("value_source", values->description());
  m.seed(o.proxy.seed);
  const auto samples = generate_proxy_dataset(tokenizer, o.proxy, *values);
  write_proxy_jsonl(samples, o.out);
  m.write_for(o.out);
  out << "wrote " << samples.size() << " samples to " << o.out << "\n";
}

void cmd_detect_heads(const DetectOpts& o, std::ostream& out) {
  Manifest m("detect-heads");
  m.input(o.model);
  m.input(o.proxy);
  m.param("top_frac", o.top_frac);
  const auto model = load_checkpoint(o.model);
  const auto tokenizer = Tokenizer::from_name(o.tokenizer);
  m.param("tokenizer", tokenizer.description());
  const auto dataset = read_proxy_jsonl(tokenizer, o.proxy);
  const auto table = detect_retrieval_heads(model, dataset, o.top_frac, o.threads);
  const auto j = heads_to_json(table, config_fingerprint(model.config()), model.weights_fingerprint(),
                               sha256_file(o.proxy));
  write_text(o.out, j.dump(2) + "\n");
  m.write_for(o.out);
  out << "selected " << table.selected.size() << " of " << table.total_heads() << " heads:";
  for (const auto& h : table.selected.heads()) out << " L" << h.layer << "H" << h.head;
  out << "\n";
}

void cmd_mask_random(const MaskRandomOpts& o, std::ostream& out) {
  Manifest m("mask-random");
  m.input(o.heads);
  m.param("count", o.count);
  m.param("exclude_top", o.exclude_top);
  m.seed(o.seed);
  const auto j = read_json_file(o.heads);
  const auto table = heads_from_json(j);
  HeadMask mask;
  try {
    mask = random_control_mask(table, o.count, o.exclude_top, o.seed);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  ojson res;
  res["config_fingerprint"] = j.value("config_fingerprint", "");
  res["model_fingerprint"] = j.value("model_fingerprint", "");
  res["source_heads"] = sha256_file(o.heads);
  res["count"] = o.count;
  res["exclude_top"] = o.exclude_top;
  res["seed"] = o.seed;
  auto heads = ojson::array();
  for (const auto& h : mask.heads()) heads.push_back({h.layer, h.head});
  res["heads"] = heads;
  write_text(o.out, res.dump(2) + "\n");
  m.write_for(o.out);
  out << "wrote " << mask.size() << " control heads to " << o.out << "\n";
}

void cmd_eval_proxy(const EvalOpts& o, std::ostream& out) {
  Manifest m("eval-proxy");
  m.input(o.model);
  m.input(o.proxy);
  const auto model = load_checkpoint(o.model);
  const auto tokenizer = Tokenizer::from_name(o.tokenizer);
  HeadMask mask;
  if (!o.heads.empty()) {
    m.input(o.heads);
    mask = load_mask(o.heads, model);
  }
  const auto dataset = read_proxy_jsonl(tokenizer, o.proxy);
  const auto acc = eval_proxy_accuracy(model, dataset, mask, o.threads);
  ojson res;
  res["samples"] = dataset.size();
  res["masked_heads"] = mask.size();
  res["exact_match_rate"] = acc.exact_match_rate;
  res["mean_answer_nll"] = acc.mean_answer_nll;
  out << res.dump() << "\n";
  if (!o.out.empty()) {
    write_text(o.out, res.dump(2) + "\n");
    m.write_for(o.out);
  }
}

void cmd_score(const ScoreOpts& o, std::ostream& out, std::ostream& err) {
  Manifest m("score");
  m.input(o.model);
  m.input(o.heads);
  m.input(o.corpus);
  m.param("workers", o.workers);
  m.param("strict", o.strict);
  const auto model = load_checkpoint(o.model);
  const auto mask = load_mask(o.heads, model);
  const auto tokenizer = Tokenizer::from_name(o.tokenizer);
  m.param("tokenizer", tokenizer.description());

  CorpusReader reader(o.corpus, o.strict);
  std::ofstream file(o.out, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError("cannot open " + o.out + " for writing");
  const auto stats = score_corpus(model, mask, tokenizer, reader, o.workers,
                                  [&](const ScoredDocument& d) { file << scored_to_json_line(d) << '\n'; });
  file.close();
  if (!file) throw DataError("write failed: " + o.out);
  for (const auto& s : stats.skipped) err << o.corpus << ":" << s.line << ": skipped: " << s.reason << "\n";
  m.param("scored", stats.scored);
  m.param("skipped", stats.skipped.size());
  m.param("truncated", stats.truncated);
  m.write_for(o.out);
  out << "scored " << stats.scored << " documents (" << stats.skipped.size() << " skipped, " << stats.truncated
      << " truncated)\n";
}

void cmd_select(const SelectOpts& o, std::ostream& out) {
  Manifest m("select");
  m.input(o.scored);
  m.param("top_frac", o.top_frac);
  m.param("per_domain", o.per_domain);
  m.param("selected_only", o.selected_only);
  auto scored = read_scored(o.scored);
  if (scored.empty()) throw DataError(o.scored + " holds no scored documents");
  select_top_fraction(scored, o.top_frac, o.per_domain);
  write_selection(scored, o.out, o.selected_only);
  m.write_for(o.out);
  std::size_t n = 0;
  for (const auto& d : scored) n += d.selected;
  out << "selected " << n << " of " << scored.size() << " documents\n";
}

// Texts of the selected records in a selection file. Records without "text"
// are resolved by id against the corpus.
std::vector<std::string> selection_texts(const fs::path& path, const std::string& corpus) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open selection " + path.string());
  std::vector<std::string> texts;
  std::vector<std::string> pending_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": not a JSON object");
    }
    // Ranked-but-unselected records are excluded; unranked scored output counts in full.
    const bool ranked = j.contains(schema::kRankInDomain) && !j[schema::kRankInDomain].is_null();
    if (ranked && j.contains(schema::kSelected) && j[schema::kSelected].is_boolean() &&
        !j[schema::kSelected].get<bool>()) {
      continue;
    }
    if (j.contains(schema::kText) && j[schema::kText].is_string()) {
      texts.push_back(j[schema::kText].get<std::string>());
    } else if (j.contains(schema::kId) && j[schema::kId].is_string()) {
      pending_ids.push_back(j[schema::kId].get<std::string>());
    } else {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": record has neither text nor id");
    }
  }
  if (pending_ids.empty()) return texts;
  if (corpus.empty()) throw DataError(path.string() + " has records without text; pass --corpus");
  std::unordered_map<std::string, std::string> found;
  const std::set<std::string> wanted(pending_ids.begin(), pending_ids.end());
  CorpusReader reader(corpus, false);
  Document doc;
  while (reader.next(doc)) {
    if (wanted.count(doc.id)) found.emplace(doc.id, std::move(doc.text));
  }
  for (const auto& id : pending_ids) {
    auto it = found.find(id);
    if (it == found.end()) throw DataError("id '" + id + "' not found in " + corpus);
    texts.push_back(it->second);
  }
  return texts;
}

void cmd_overlap(const OverlapOpts& o, std::ostream& out) {
  Manifest m("analyze overlap");
  m.input(o.a);
  m.input(o.b);
  if (!o.corpus.empty()) m.input(o.corpus);
  m.param("method", o.method);
  m.param("top_k", o.top_k);
  const auto method = parse_weight_method(o.method);
  const auto a = top_words(selection_texts(o.a, o.corpus), method, o.top_k);
  const auto b = top_words(selection_texts(o.b, o.corpus), method, o.top_k);
  const double overlap = word_overlap(a, b);
  ojson res;
  res["method"] = o.method;
  res["top_k"] = o.top_k;
  res["overlap"] = overlap;
  res["a"] = to_json(a);
  res["b"] = to_json(b);
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %8s %10s\n%-8s %8zu %10.4f\n", "method", "top_k", "overlap", o.method.c_str(),
                o.top_k, overlap);
  out << line;
  if (!o.out.empty()) {
    write_text(o.out, res.dump(2) + "\n");
    m.write_for(o.out);
  }
}

void cmd_head_stability(const StabilityOpts& o, std::ostream& out) {
  Manifest m("analyze head-stability");
  std::vector<HeadScoreTable> tables;
  std::vector<std::string> labels = o.labels;
  const bool derive_labels = labels.empty();
  if (!o.checkpoints.empty()) {
    // A training run's checkpoint list: detect heads on each checkpoint in step order.
    m.input(o.checkpoints);
    m.input(o.proxy);
    m.param("top_frac", o.top_frac);
    const auto tokenizer = Tokenizer::from_name(o.tokenizer);
    const auto dataset = read_proxy_jsonl(tokenizer, o.proxy);
    for (const auto& entry : read_checkpoint_list(o.checkpoints)) {
      m.input(entry.path.string());
      const auto ckpt = load_checkpoint(entry.path);
      tables.push_back(detect_retrieval_heads(ckpt, dataset, o.top_frac, o.threads));
      if (derive_labels) labels.push_back("step" + std::to_string(entry.step));
    }
  } else {
    for (const auto& h : o.heads) {
      m.input(h);
      tables.push_back(heads_from_json(read_json_file(h)));
      if (derive_labels) labels.push_back(fs::path(h).stem().string());
    }
  }
  const auto report = head_stability(tables, labels);
  out << format_table(report);
  if (!o.out.empty()) {
    write_text(o.out, to_json(report).dump(2) + "\n");
    m.write_for(o.out);
  }
}

void cmd_summary(const SummaryOpts& o, std::ostream& out) {
  Manifest m("analyze summary");
  m.input(o.scored);
  const auto scored = read_scored(o.scored);
  if (scored.empty()) throw DataError(o.scored + " holds no scored documents");
  const auto summary = score_summary(scored);
  out << format_table(summary);
  if (!o.out.empty()) {
    write_text(o.out, to_json(summary).dump(2) + "\n");
    m.write_for(o.out);
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Training-free pretraining data selection via retrieval-head masking", "attninf"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  const auto frac = CLI::Range(0.0, 1.0) & CLI::Validator(
                                              [](std::string& s) {
                                                return std::stod(s) > 0.0 ? std::string() : "must be > 0";
                                              },
                                              "(0,1]");

  InitModelOpts init;
  auto* init_cmd = app.add_subcommand("init-model", "Write a randomly initialised checkpoint");
  init_cmd->add_option("--vocab", init.config.vocab_size)->capture_default_str();
  init_cmd->add_option("--hidden", init.config.hidden_size)->capture_default_str();
  init_cmd->add_option("--ffn", init.config.ffn_inner)->capture_default_str();
  init_cmd->add_option("--layers", init.config.n_layers)->capture_default_str();
  init_cmd->add_option("--heads", init.config.n_heads)->capture_default_str();
  init_cmd->add_option("--kv-heads", init.config.n_kv_heads)->capture_default_str();
  init_cmd->add_option("--max-seq", init.config.max_seq_len)->capture_default_str();
  init_cmd->add_option("--rope-theta", init.config.rope_theta)->capture_default_str();
  init_cmd->add_flag("--tie", init.config.tie_embeddings);
  init_cmd->add_option("--seed", init.seed)->capture_default_str();
  init_cmd->add_option("--out", init.out)->required();

  GenProxyOpts gen;
  auto* gen_cmd = app.add_subcommand("gen-proxy", "Generate the synthetic key-value retrieval dataset");
  gen_cmd->add_option("--tokenizer", gen.tokenizer, "byte, or a vocab JSON path")->capture_default_str();
  gen_cmd->add_option("--n", gen.proxy.n_samples)->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--max-len", gen.proxy.max_len)->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--shots", gen.proxy.n_shots)->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.proxy.seed)->required();
  gen_cmd->add_option("--value-corpus", gen.value_corpus)->check(CLI::ExistingFile);
  gen_cmd->add_option("--threads", gen.proxy.threads)->capture_default_str();
  gen_cmd->add_option("--out", gen.out)->required();

  DetectOpts det;
  auto* det_cmd = app.add_subcommand("detect-heads", "Score heads on the proxy task and select the top fraction");
  det_cmd->add_option("--model", det.model)->required()->check(CLI::ExistingFile);
  det_cmd->add_option("--proxy", det.proxy)->required()->check(CLI::ExistingFile);
  det_cmd->add_option("--top-frac", det.top_frac)->capture_default_str()->check(frac);
  det_cmd->add_option("--tokenizer", det.tokenizer)->capture_default_str();
  det_cmd->add_option("--threads", det.threads)->capture_default_str();
  det_cmd->add_option("--out", det.out)->required();

  MaskRandomOpts mr;
  auto* mr_cmd = app.add_subcommand("mask-random", "Draw a random control mask from non-retrieval heads");
  mr_cmd->add_option("--heads", mr.heads)->required()->check(CLI::ExistingFile);
  mr_cmd->add_option("--count", mr.count)->required();
  mr_cmd->add_option("--exclude-top", mr.exclude_top)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  mr_cmd->add_option("--seed", mr.seed)->required();
  mr_cmd->add_option("--out", mr.out)->required();

  EvalOpts ev;
  auto* ev_cmd = app.add_subcommand("eval-proxy", "Proxy-task exact match and answer NLL under an optional mask");
  ev_cmd->add_option("--model", ev.model)->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--proxy", ev.proxy)->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--heads", ev.heads, "heads.json or mask.json")->check(CLI::ExistingFile);
  ev_cmd->add_option("--tokenizer", ev.tokenizer)->capture_default_str();
  ev_cmd->add_option("--threads", ev.threads)->capture_default_str();
  ev_cmd->add_option("--out", ev.out);

  ScoreOpts sc;
  auto* sc_cmd = app.add_subcommand("score", "Score a JSONL corpus by the relative loss increase under head masking");
  sc_cmd->add_option("--model", sc.model)->required()->check(CLI::ExistingFile);
  sc_cmd->add_option("--heads", sc.heads, "heads.json or mask.json")->required()->check(CLI::ExistingFile);
  sc_cmd->add_option("--corpus", sc.corpus)->required()->check(CLI::ExistingFile);
  sc_cmd->add_option("--tokenizer", sc.tokenizer)->capture_default_str();
  sc_cmd->add_option("--workers", sc.workers)->capture_default_str()->check(CLI::PositiveNumber);
  sc_cmd->add_flag("--strict", sc.strict);
  sc_cmd->add_option("--out", sc.out)->required();

  SelectOpts sel;
  auto* sel_cmd = app.add_subcommand("select", "Rank scored documents and mark the top fraction");
  sel_cmd->add_option("--scored", sel.scored)->required()->check(CLI::ExistingFile);
  sel_cmd->add_option("--top-frac", sel.top_frac)->capture_default_str()->check(frac);
  sel_cmd->add_flag("--per-domain", sel.per_domain);
  sel_cmd->add_flag("--selected-only", sel.selected_only);
  sel_cmd->add_option("--out", sel.out)->required();

  auto* an_cmd = app.add_subcommand("analyze", "Selection analytics");
  an_cmd->require_subcommand(1);
  OverlapOpts ov;
  auto* ov_cmd = an_cmd->add_subcommand("overlap", "High-frequency word overlap of two selections");
  ov_cmd->add_option("--a", ov.a)->required()->check(CLI::ExistingFile);
  ov_cmd->add_option("--b", ov.b)->required()->check(CLI::ExistingFile);
  ov_cmd->add_option("--method", ov.method)->capture_default_str()->check(CLI::IsMember({"tf", "tfidf"}));
  ov_cmd->add_option("--top-k", ov.top_k)->capture_default_str()->check(CLI::PositiveNumber);
  ov_cmd->add_option("--corpus", ov.corpus, "corpus to resolve ids of records without text")
      ->check(CLI::ExistingFile);
  ov_cmd->add_option("--out", ov.out);
  StabilityOpts st;
  auto* st_cmd = an_cmd->add_subcommand("head-stability", "Pairwise agreement of head tables across checkpoints");
  auto* st_heads = st_cmd->add_option("--heads", st.heads, "two or more heads.json files")
                      ->expected(2, -1)
                      ->check(CLI::ExistingFile);
  auto* st_ckpts = st_cmd->add_option("--checkpoints", st.checkpoints,
                                      "checkpoint list JSON [{step, path, train_loss}]")
                       ->check(CLI::ExistingFile)
                       ->excludes(st_heads);
  st_cmd->add_option("--proxy", st.proxy)->check(CLI::ExistingFile)->needs(st_ckpts);
  st_ckpts->needs("--proxy");
  st_cmd->add_option("--top-frac", st.top_frac)->capture_default_str()->check(frac);
  st_cmd->add_option("--tokenizer", st.tokenizer)->capture_default_str();
  st_cmd->add_option("--threads", st.threads)->capture_default_str();
  st_cmd->require_option(1, 0);
  st_cmd->add_option("--labels", st.labels);
  st_cmd->add_option("--out", st.out);
  SummaryOpts su;
  auto* su_cmd = an_cmd->add_subcommand("summary", "Per-domain score statistics");
  su_cmd->add_option("--scored", su.scored)->required()->check(CLI::ExistingFile);
  su_cmd->add_option("--out", su.out);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (init_cmd->parsed()) cmd_init_model(init, out);
    else if (gen_cmd->parsed()) cmd_gen_proxy(gen, out);
    else if (det_cmd->parsed()) cmd_detect_heads(det, out);
    else if (mr_cmd->parsed()) cmd_mask_random(mr, out);
    else if (ev_cmd->parsed()) cmd_eval_proxy(ev, out);
    else if (sc_cmd->parsed()) cmd_score(sc, out, err);
    else if (sel_cmd->parsed()) cmd_select(sel, out);
    else if (ov_cmd->parsed()) cmd_overlap(ov, out);
    else if (st_cmd->parsed()) cmd_head_stability(st, out);
    else if (su_cmd->parsed()) cmd_summary(su, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace attninf::cli
