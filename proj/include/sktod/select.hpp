// Copyright 2026 The sktod Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sktod/corpus.hpp"
#include "sktod/metrics.hpp"

namespace sktod {

class JsonServiceClient;

// Index terms of a text: shared tokenizer output minus punctuation tokens.
// No stopword removal.
std::vector<std::string> index_terms(std::string_view text);

// Lexical scorers query with the final user utterance only.
std::vector<std::string> query_terms(const DialogueContext& context);

// Term statistics over every snippet of a knowledge base. Document i is
// KnowledgeBase::snippets()[i]. Immutable after build; scoring is reentrant.
class LexicalIndex {
 public:
  static constexpr double kBm25K1 = 1.2;
  static constexpr double kBm25B = 0.75;

  // Query terms resolved against the vocabulary. Out-of-vocabulary terms
  // are dropped; they cannot match any snippet.
  struct Query {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> terms;  // id, count
    double tfidf_norm = 0.0;
  };

  LexicalIndex() = default;
  static LexicalIndex build(const KnowledgeBase& kb);

  std::size_t document_count() const { return docs_.size(); }
  std::size_t vocabulary_size() const { return df_.size(); }
  double average_length() const { return avg_length_; }
  // 0 for unknown terms.
  std::size_t document_frequency(std::string_view term) const;
  std::size_t document_length(std::size_t doc) const { return docs_[doc].length; }

  // ln((N + 1) / (df + 1)) + 1
  double tfidf_idf(std::uint32_t term) const;
  // ln(1 + (N - df + 0.5) / (df + 0.5))
  double bm25_idf(std::uint32_t term) const;

  Query prepare(const std::vector<std::string>& terms) const;

  // Cosine of raw-tf * idf vectors, in [0, 1]; 0 when either side is empty.
  double tfidf(const Query& query, std::size_t doc) const;
  // Sum over distinct query terms present in the snippet.
  double bm25(const Query& query, std::size_t doc) const;

 private:
  struct Doc {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> terms;  // sorted by id
    std::size_t length = 0;
    double tfidf_norm = 0.0;
  };

  std::uint32_t term_frequency(const Doc& doc, std::uint32_t term) const;

  std::unordered_map<std::string, std::uint32_t> vocabulary_;
  std::vector<std::uint32_t> df_;
  std::vector<Doc> docs_;
  double avg_length_ = 0.0;
};

double score_tfidf(const LexicalIndex& index, const DialogueContext& context,
                   std::size_t snippet);
double score_bm25(const LexicalIndex& index, const DialogueContext& context,
                  std::size_t snippet);

enum class ScorerKind { kTfidf, kBm25, kExternal };
std::string_view to_string(ScorerKind kind);
ScorerKind parse_scorer_kind(std::string_view text);  // throws UsageError

// Scores candidate snippets (KB snippet indices) against a context.
// Implementations are immutable and safe to call concurrently.
class SnippetScorer {
 public:
  virtual ~SnippetScorer() = default;
  virtual ScorerKind kind() const = 0;
  virtual std::vector<double> score(
      const DialogueContext& context,
      const std::vector<std::size_t>& candidates) const = 0;
};

std::unique_ptr<SnippetScorer> make_tfidf_scorer(const LexicalIndex& index);
std::unique_ptr<SnippetScorer> make_bm25_scorer(const LexicalIndex& index);

// Remote scorer: {"task":"ks","context":[...],"snippet":"..."} ->
// {"logit": x}; all candidates of one instance go out as batches. Failures
// propagate; callers mark the instance unscored rather than using zeros.
std::unique_ptr<SnippetScorer> make_external_scorer(
    const JsonServiceClient& client, const KnowledgeBase& kb);

double external_score(const JsonServiceClient& client,
                      const DialogueContext& context, std::string_view snippet);

// Every snippet of the given entities, in knowledge-base order, no
// duplicates. Unknown entities are ignored.
std::vector<std::size_t> candidate_snippets(const KnowledgeBase& kb,
                                            const std::vector<EntityKey>& entities);

std::vector<ScoredSnippet> score_candidates(const SnippetScorer& scorer,
                                            const KnowledgeBase& kb,
                                            const DialogueContext& context,
                                            const std::vector<std::size_t>& candidates);

struct SnippetSelection {
  std::string instance_id;
  std::vector<ScoredSnippet> selected;  // ranking order
  double threshold_used = 0.0;

  RefSet refs() const;  // sorted
};

// Every scored candidate with score >= threshold; never truncated.
SnippetSelection select_snippets(const std::vector<ScoredSnippet>& scored,
                                 double threshold,
                                 std::string instance_id = {});

// 201 nearest-rank quantiles (q = k/200) of the pooled scores, deduplicated
// and ascending.
std::vector<double> quantile_grid(const std::vector<std::vector<ScoredSnippet>>& scored);
// -5 to 5 in steps of 0.05, for scorers that emit logits.
std::vector<double> logit_grid();

struct ThresholdCalibration {
  double threshold = 0.0;
  double f1 = 0.0;  // instance-level macro F1 at `threshold`
  std::vector<double> grid;
  std::vector<double> grid_f1;
};

// Grid point maximizing instance-level F1 over instances with non-empty
// gold; ties go to the lower threshold. Throws PreconditionError when no
// instance has gold snippets.
ThresholdCalibration calibrate_threshold(
    const std::vector<std::vector<ScoredSnippet>>& scored,
    const std::vector<RefSet>& gold, const std::vector<double>& grid);

struct TrainingPair {
  std::string instance_id;
  const DialogueContext* context = nullptr;
  SnippetRef ref;
  bool relevant = false;
};

// Gold pairs as positives plus as many uniformly sampled non-gold
// candidates from the gold entities. One generator seeded with `seed` is
// consumed in instance order. Instances with too few negatives emit what
// exists and log a warning.
std::vector<TrainingPair> export_training_pairs(const Split& split,
                                                const KnowledgeBase& kb,
                                                std::uint64_t seed);

// One JSON object per line: instance_id, context, ref, snippet, label.
std::string training_pairs_to_jsonl(const std::vector<TrainingPair>& pairs,
                                    const KnowledgeBase& kb);

}  // namespace sktod
