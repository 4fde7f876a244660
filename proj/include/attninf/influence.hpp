#pragma once

#include <functional>
#include <vector>

#include "attninf/checkpoint.hpp"
#include "attninf/corpus_io.hpp"
#include "attninf/inference.hpp"
#include "attninf/tokenizer.hpp"

namespace attninf {

/// (loss_ref - loss_base) / loss_base. Negative values are legitimate.
double attention_influence_score(double loss_base, double loss_ref);

/// Base loss with no mask, reference loss with `mask`. Documents longer than
/// max_seq_len are truncated to their first max_seq_len tokens and flagged.
ScoredDocument score_document(const ModelCheckpoint& checkpoint, const HeadMask& mask, const Tokenizer& tokenizer,
                              Document& doc);

struct ScoreStats {
  std::size_t scored = 0;
  std::size_t truncated = 0;
  std::vector<SkippedRecord> skipped;  // malformed records and unscorable documents
};

using ScoredSink = std::function<void(const ScoredDocument&)>;

/// Scores documents from the reader on `workers` threads, in batches, and
/// hands results to `sink` in input order. Output is identical to a serial
/// run for any worker count.
ScoreStats score_corpus(const ModelCheckpoint& checkpoint, const HeadMask& mask, const Tokenizer& tokenizer,
                        CorpusReader& reader, int workers, const ScoredSink& sink);

std::vector<ScoredDocument> score_documents(const ModelCheckpoint& checkpoint, const HeadMask& mask,
                                            const Tokenizer& tokenizer, std::vector<Document> docs, int workers);

/// Ranks by descending score (ties by ascending id) within each domain, or
/// globally, and marks the top max(1, floor(fraction * n)) selected. Input
/// order is preserved.
void select_top_fraction(std::vector<ScoredDocument>& scored, double fraction, bool per_domain);

}  // namespace attninf
