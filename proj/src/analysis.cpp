#include "attninf/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <stdexcept>

#include <omp.h>

#include "attninf/errors.hpp"
#include "attninf/parallel.hpp"

namespace attninf {

WeightMethod parse_weight_method(const std::string& name) {
  if (name == "tf") return WeightMethod::tf;
  if (name == "tfidf") return WeightMethod::tfidf;
  throw std::invalid_argument("unknown method '" + name + "' (expected tf or tfidf)");
}

std::string to_string(WeightMethod method) { return method == WeightMethod::tf ? "tf" : "tfidf"; }

std::vector<std::string> extract_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&]() {
    if (cur.empty()) return;
    std::size_t chars = 0;
    bool all_digits = true;
    for (unsigned char c : cur) {
      if ((c & 0xC0) != 0x80) ++chars;
      if (!std::isdigit(c)) all_digits = false;
    }
    if (chars >= 2 && !all_digits) words.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (c >= 0x80 || std::isalnum(c)) {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else {
      flush();
    }
  }
  flush();
  return words;
}

void WordCounter::add_document(std::string_view text) {
  ++documents_;
  std::set<std::string_view> seen;
  const auto words = extract_words(text);
  for (const auto& w : words) {
    auto& entry = counts_[w];
    ++entry.first;
  }
  for (const auto& w : words) {
    if (seen.insert(w).second) ++counts_[w].second;
  }
}

void WordCounter::merge(const WordCounter& other) {
  documents_ += other.documents_;
  for (const auto& [w, c] : other.counts_) {
    auto& entry = counts_[w];
    entry.first += c.first;
    entry.second += c.second;
  }
}

WordStats WordCounter::top_words(WeightMethod method, std::size_t top_k) const {
  if (documents_ == 0) throw std::invalid_argument("empty selection");
  if (top_k == 0) throw std::invalid_argument("top_k must be >= 1");
  WordStats stats;
  stats.method = method;
  stats.top_k = top_k;
  const double n = static_cast<double>(documents_);
  for (const auto& [w, c] : counts_) {
    const double tf = static_cast<double>(c.first);
    double weight = tf;
    if (method == WeightMethod::tfidf) {
      weight = tf * std::log((1.0 + n) / (1.0 + static_cast<double>(c.second))) + tf;
    }
    stats.words.emplace_back(w, weight);
  }
  auto order = [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  if (stats.words.size() > top_k) {
    std::partial_sort(stats.words.begin(), stats.words.begin() + static_cast<std::ptrdiff_t>(top_k),
                      stats.words.end(), order);
    stats.words.resize(top_k);
  } else {
    std::sort(stats.words.begin(), stats.words.end(), order);
  }
  return stats;
}

WordStats top_words(const std::vector<std::string>& selection, WeightMethod method, std::size_t top_k,
                    int threads) {
  if (selection.empty()) throw std::invalid_argument("empty selection");
  if (threads <= 0) threads = omp_get_max_threads();
  std::vector<WordCounter> partial(static_cast<std::size_t>(threads));
  const auto n = static_cast<std::int64_t>(selection.size());
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
    partial[static_cast<std::size_t>(omp_get_thread_num())].add_document(selection[static_cast<std::size_t>(i)]);
  }
  WordCounter total;
  for (const auto& p : partial) total.merge(p);
  return total.top_words(method, top_k);
}

double word_overlap(const WordStats& a, const WordStats& b) {
  if (a.top_k != b.top_k || a.method != b.method) {
    throw std::invalid_argument("word_overlap needs matching top_k and method");
  }
  const std::size_t denom = std::max(a.words.size(), b.words.size());
  if (denom == 0) return 1.0;
  std::set<std::string> wa;
  for (const auto& [w, _] : a.words) wa.insert(w);
  std::size_t common = 0;
  for (const auto& [w, _] : b.words) common += wa.count(w);
  return static_cast<double>(common) / static_cast<double>(denom);
}

double jaccard(const HeadMask& a, const HeadMask& b) {
  std::vector<HeadId> inter;
  std::set_intersection(a.heads().begin(), a.heads().end(), b.heads().begin(), b.heads().end(),
                        std::back_inserter(inter));
  const std::size_t uni = a.size() + b.size() - inter.size();
  return uni == 0 ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman: length mismatch");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 && sbb == 0.0) return 1.0;
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

StabilityReport head_stability(const std::vector<HeadScoreTable>& tables, std::vector<std::string> labels) {
  if (tables.size() < 2) throw std::invalid_argument("head_stability needs at least 2 tables");
  for (const auto& t : tables) {
    if (t.n_layers != tables[0].n_layers || t.n_heads != tables[0].n_heads) {
      throw DataError("head tables disagree on head counts");
    }
  }
  if (labels.empty()) {
    for (std::size_t i = 0; i < tables.size(); ++i) labels.push_back("t" + std::to_string(i));
  }
  if (labels.size() != tables.size()) throw std::invalid_argument("one label per table required");
  StabilityReport report;
  report.labels = std::move(labels);
  const std::size_t n = tables.size();
  report.jaccard.assign(n, std::vector<double>(n, 1.0));
  report.rank_corr.assign(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      report.jaccard[i][j] = report.jaccard[j][i] = jaccard(tables[i].selected, tables[j].selected);
      report.rank_corr[i][j] = report.rank_corr[j][i] = spearman(tables[i].mean_scores, tables[j].mean_scores);
    }
  }
  return report;
}

double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("percentile of empty set");
  const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

std::map<std::string, DomainSummary> score_summary(const std::vector<ScoredDocument>& scored) {
  if (scored.empty()) throw std::invalid_argument("empty input");
  std::map<std::string, std::vector<double>> by_domain;
  for (const auto& d : scored) by_domain[d.domain].push_back(d.score);
  std::map<std::string, DomainSummary> out;
  for (auto& [domain, values] : by_domain) {
    std::sort(values.begin(), values.end());
    DomainSummary s;
    s.count = values.size();
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / n);
    s.p01 = percentile(values, 1);
    s.p25 = percentile(values, 25);
    s.p50 = percentile(values, 50);
    s.p75 = percentile(values, 75);
    s.p99 = percentile(values, 99);
    out[domain] = s;
  }
  return out;
}

nlohmann::ordered_json to_json(const WordStats& stats) {
  nlohmann::ordered_json j;
  j["method"] = to_string(stats.method);
  j["top_k"] = stats.top_k;
  auto words = nlohmann::ordered_json::array();
  for (const auto& [w, weight] : stats.words) words.push_back({w, weight});
  j["words"] = words;
  return j;
}

nlohmann::ordered_json to_json(const StabilityReport& report) {
  nlohmann::ordered_json j;
  j["labels"] = report.labels;
  j["jaccard"] = report.jaccard;
  j["rank_correlation"] = report.rank_corr;
  return j;
}

nlohmann::ordered_json to_json(const std::map<std::string, DomainSummary>& summary) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [domain, s] : summary) {
    j[domain] = {{"count", s.count}, {"mean", s.mean}, {"std", s.std}, {"p01", s.p01},
                 {"p25", s.p25},     {"p50", s.p50},   {"p75", s.p75}, {"p99", s.p99}};
  }
  return j;
}

namespace {

std::string cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%10.4f", v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string format_table(const StabilityReport& report) {
  std::size_t width = 10;
  for (const auto& l : report.labels) width = std::max(width, l.size() + 2);
  std::string out;
  for (const auto& [title, m] : {std::pair{"jaccard (selected heads)", &report.jaccard},
                                 std::pair{"spearman (mean scores)", &report.rank_corr}}) {
    out += std::string(title) + "\n" + pad("", width);
    for (const auto& l : report.labels) out += pad(l, 10) + " ";
    out += "\n";
    for (std::size_t i = 0; i < report.labels.size(); ++i) {
      out += pad(report.labels[i], width);
      for (double v : (*m)[i]) out += cell(v) + " ";
      out += "\n";
    }
    out += "\n";
  }
  return out;
}

std::string format_table(const std::map<std::string, DomainSummary>& summary) {
  std::size_t width = 8;
  for (const auto& [d, _] : summary) width = std::max(width, d.size() + 2);
  std::string out = pad("domain", width) + "     count       mean        std        p01        p25        p50        p75        p99\n";
  for (const auto& [domain, s] : summary) {
    char count[32];
    std::snprintf(count, sizeof count, "%10zu", s.count);
    out += pad(domain, width) + count + " " + cell(s.mean) + " " + cell(s.std) + " " + cell(s.p01) + " " +
           cell(s.p25) + " " + cell(s.p50) + " " + cell(s.p75) + " " + cell(s.p99) + "\n";
  }
  return out;
}

}  // namespace attninf
