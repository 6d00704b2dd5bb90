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

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sktod/corpus.hpp"
#include "sktod/detect.hpp"
#include "sktod/track.hpp"

namespace sktod {

// f1 = 2PR / (P + R), or 0 when P + R == 0.
struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

PRF make_prf(double precision, double recall);

// Snippet sets are sorted and unique.
using RefSet = std::vector<SnippetRef>;

// Per-instance PRF for one predicted set. Precision is 0 for an empty
// prediction against a non-empty gold set.
PRF set_prf(const RefSet& predicted, const RefSet& gold);

struct InstancePrf {
  PRF prf;                  // macro average over non-empty-gold instances
  std::size_t evaluated = 0;
  std::size_t excluded_empty_gold = 0;
  // Alternative convention: empty gold scores 1 when the prediction is also
  // empty and 0 otherwise, and is included in the mean.
  PRF empty_gold_included;
};

InstancePrf instance_prf(const std::vector<RefSet>& predictions,
                         const std::vector<RefSet>& gold);

// Micro PRF over all (context, snippet) pairs.
PRF snippet_prf(const std::vector<RefSet>& predictions,
                const std::vector<RefSet>& gold);

// Relevance flags in rank order plus the number of relevant items for the
// instance (relevant items missing from the ranking count as never found).
struct RankedRelevance {
  std::vector<bool> relevant;
  std::size_t total_relevant = 0;
};

// Ranks by descending score with ref tie-break, then flags gold members.
RankedRelevance rank_relevance(std::vector<ScoredSnippet> scored,
                               const RefSet& gold);

double average_precision(const RankedRelevance& ranking);

struct MapResult {
  double map = 0.0;
  std::size_t evaluated = 0;
  std::size_t excluded_no_gold = 0;
};

MapResult mean_average_precision(const std::vector<RankedRelevance>& rankings);

// --- Generation overlap metrics. Texts go through the shared tokenizer. ---

inline constexpr double kBleuEpsilon = 0.1;

// Corpus BLEU-4 with brevity penalty; an order with zero clipped matches
// uses kBleuEpsilon as its match count, and precisions divide by
// max(1, hypothesis n-grams). A corpus with no unigram match at all scores
// exactly 0. Throws PreconditionError on an empty or misaligned corpus.
double corpus_bleu(const std::vector<std::vector<std::string>>& hypotheses,
                   const std::vector<std::vector<std::string>>& references);
double corpus_bleu(const std::vector<std::string>& hypotheses,
                   const std::vector<std::string>& references);

// n-gram overlap F1 with clipped counts; 0 if either side has no n-grams.
double rouge_n(const std::vector<std::string>& hypothesis,
               const std::vector<std::string>& reference, int n);
double rouge_n(std::string_view hypothesis, std::string_view reference, int n);

// Token LCS F1.
double rouge_l(const std::vector<std::string>& hypothesis,
               const std::vector<std::string>& reference);
double rouge_l(std::string_view hypothesis, std::string_view reference);

// METEOR with exact then Porter-stem unigram matching (no synonyms).
// Each stage aligns greedily from the end of the hypothesis to the last
// unaligned equal reference token. F_mean = 10PR / (R + 9P),
// penalty = 0.5 (chunks / matches)^3.
struct MeteorStats {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double score = 0.0;
};

MeteorStats meteor_stats(const std::vector<std::string>& hypothesis,
                         const std::vector<std::string>& reference);
double meteor(const std::vector<std::string>& hypothesis,
              const std::vector<std::string>& reference);
double meteor(std::string_view hypothesis, std::string_view reference);

struct GenerationScores {
  std::size_t pairs = 0;
  double bleu = 0.0;    // corpus level
  double rouge1 = 0.0;  // mean over pairs
  double rouge2 = 0.0;
  double rouge_l = 0.0;
  double meteor = 0.0;
  double avg_response_length = 0.0;  // hypothesis tokens
};

GenerationScores score_generation(const std::vector<std::string>& hypotheses,
                                  const std::vector<std::string>& references);

// Per-stage bundle; absent fields mean the stage was not evaluated.
struct EvalReport {
  std::optional<BinaryMetrics> detection;
  std::optional<TrackingReport> tracking;
  std::optional<InstancePrf> instance;
  std::optional<PRF> snippet;
  std::optional<MapResult> map;
  std::optional<GenerationScores> generation;
};

// Structured-text (JSON) report with a fixed field order.
std::string to_json(const EvalReport& report, int indent = 2);

}  // namespace sktod
