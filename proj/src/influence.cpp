#include "attninf/influence.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "attninf/errors.hpp"
#include "attninf/head_detect.hpp"
#include "attninf/parallel.hpp"

namespace attninf {
namespace {

constexpr std::size_t kBatchPerWorker = 8;

}  // namespace

double attention_influence_score(double loss_base, double loss_ref) {
  if (!std::isfinite(loss_base) || !std::isfinite(loss_ref)) throw std::invalid_argument("non-finite loss");
  if (loss_base <= 0.0) throw std::invalid_argument("loss_base must be > 0");
  return (loss_ref - loss_base) / loss_base;
}

ScoredDocument score_document(const ModelCheckpoint& checkpoint, const HeadMask& mask, const Tokenizer& tokenizer,
                              Document& doc) {
  doc.token_ids = tokenizer.encode(doc.text);
  ScoredDocument out;
  out.id = doc.id;
  out.domain = doc.domain;
  const std::size_t limit = checkpoint.config().max_seq_len;
  if (doc.token_ids.size() > limit) {
    doc.token_ids.resize(limit);
    out.truncated = true;
  }
  if (doc.token_ids.size() < 2) throw DataError("document '" + doc.id + "' encodes to fewer than 2 tokens");
  out.n_tokens = doc.token_ids.size();
  out.loss_base = mean_ce_loss(checkpoint, doc.token_ids, {});
  out.loss_ref = mean_ce_loss(checkpoint, doc.token_ids, mask);
  out.score = attention_influence_score(out.loss_base, out.loss_ref);
  return out;
}

ScoreStats score_corpus(const ModelCheckpoint& checkpoint, const HeadMask& mask, const Tokenizer& tokenizer,
                        CorpusReader& reader, int workers, const ScoredSink& sink) {
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  mask.validate(checkpoint.config());
  ScoreStats stats;
  const std::size_t batch_size = kBatchPerWorker * static_cast<std::size_t>(workers);
  std::vector<Document> batch;
  std::size_t reader_skips_seen = 0;

  auto flush = [&]() {
    std::vector<std::optional<ScoredDocument>> results(batch.size());
    std::vector<std::string> errors(batch.size());
    parallel_for_index(batch.size(), workers, [&](std::size_t i) {
      try {
        results[i] = score_document(checkpoint, mask, tokenizer, batch[i]);
      } catch (const DataError& e) {
        errors[i] = e.what();
      }
    });
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (results[i]) {
        ++stats.scored;
        stats.truncated += results[i]->truncated ? 1 : 0;
        sink(*results[i]);
      } else {
        stats.skipped.push_back({batch[i].line, errors[i]});
      }
    }
    batch.clear();
  };

  Document doc;
  while (reader.next(doc)) {
    batch.push_back(std::move(doc));
    doc = Document{};
    if (batch.size() == batch_size) flush();
  }
  flush();
  for (; reader_skips_seen < reader.skipped().size(); ++reader_skips_seen) {
    stats.skipped.push_back(reader.skipped()[reader_skips_seen]);
  }
  std::stable_sort(stats.skipped.begin(), stats.skipped.end(),
                   [](const SkippedRecord& a, const SkippedRecord& b) { return a.line < b.line; });
  return stats;
}

std::vector<ScoredDocument> score_documents(const ModelCheckpoint& checkpoint, const HeadMask& mask,
                                            const Tokenizer& tokenizer, std::vector<Document> docs, int workers) {
  mask.validate(checkpoint.config());
  std::vector<ScoredDocument> out(docs.size());
  parallel_for_index(docs.size(), workers,
                     [&](std::size_t i) { out[i] = score_document(checkpoint, mask, tokenizer, docs[i]); });
  return out;
}

void select_top_fraction(std::vector<ScoredDocument>& scored, double fraction, bool per_domain) {
  if (scored.empty()) throw std::invalid_argument("nothing to select from");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("fraction must lie in (0, 1]");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < scored.size(); ++i) groups[per_domain ? scored[i].domain : std::string()].push_back(i);
  for (auto& [domain, idx] : groups) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (scored[a].score != scored[b].score) return scored[a].score > scored[b].score;
      if (scored[a].id != scored[b].id) return scored[a].id < scored[b].id;
      return a < b;
    });
    const std::size_t k = top_count(fraction, idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      scored[idx[r]].rank_in_domain = r + 1;
      scored[idx[r]].selected = r < k;
    }
  }
}

}  // namespace attninf
