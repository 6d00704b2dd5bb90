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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sktod/corpus.hpp"

namespace sktod {

inline constexpr double kEntityMatchThreshold = 0.95;

// Version of the normalization rule set; bump whenever the rules change so
// tracking accuracy regressions are attributable.
inline constexpr int kNormalizationRulesVersion = 1;

// Entity name after heuristic normalization. `normalized` is the full name
// (lowercased, punctuation and possessive clitics removed, "&" spelled
// "and", leading articles dropped); `variants` starts with `normalized` and
// adds forms with a type word ("hotel", "guesthouse", "guest house",
// "restaurant", "bed and breakfast") stripped from the end, or "restaurant"
// from the front.
struct NormalizedName {
  std::string original;
  std::string normalized;
  int token_count = 0;
  std::vector<std::string> variants;
};

NormalizedName normalize_name(std::string_view name);

// Dialogue-side normalization: shared tokenizer, punctuation and possessive
// clitics dropped, "&" spelled "and".
std::vector<std::string> normalize_utterance(std::string_view text);

// 2 * LCS(a, b) / (|a| + |b|) over code points, where LCS is the longest
// common subsequence. Symmetric, in [0, 1], 1 iff a == b. Throws
// PreconditionError on empty input.
double ngram_match_score(std::string_view a, std::string_view b);
double ngram_match_score(const std::vector<std::string>& a,
                         const std::vector<std::string>& b);

struct EntityMatch {
  EntityKey entity;
  int turn_index = -1;
  double score = 0.0;
};

enum class TrackingFallback { kNone, kRelaxedThreshold, kDomain, kAll };
std::string_view to_string(TrackingFallback fallback);

struct TrackResult {
  std::vector<EntityKey> entities;  // knowledge-base order
  int turn_index = -1;              // turn the entities were taken from
  std::vector<EntityMatch> matches;
  TrackingFallback fallback = TrackingFallback::kNone;
};

// Precomputed normalized names for every entity of a knowledge base.
// Immutable; safe to share across threads.
class EntityTracker {
 public:
  explicit EntityTracker(const KnowledgeBase& kb);
  ~EntityTracker();
  EntityTracker(EntityTracker&&) noexcept;
  EntityTracker& operator=(EntityTracker&&) noexcept;

  // Fuzzy n-gram matching of every entity against every turn; returns the
  // entities matched in the latest turn that has any match. Empty when no
  // entity clears the threshold anywhere.
  TrackResult track(const DialogueContext& context,
                    double threshold = kEntityMatchThreshold) const;

  // All matches in one utterance, best score per entity.
  std::vector<EntityMatch> match_turn(std::string_view text, int turn_index,
                                      double threshold) const;

  // Entities in order of their first mention anywhere in the dialogue.
  std::vector<EntityKey> first_mention_order(
      const DialogueContext& context,
      double threshold = kEntityMatchThreshold) const;

  // track(); if empty, retry with `relaxed_threshold`; then every entity of
  // `domain` (given, or guessed from domain keywords); then every entity.
  TrackResult track_with_fallback(const DialogueContext& context,
                                  std::optional<Domain> domain = std::nullopt,
                                  double relaxed_threshold = 0.8) const;

  const KnowledgeBase& knowledge_base() const { return *kb_; }
  const std::vector<NormalizedName>& names() const { return names_; }

 private:
  struct Variant;

  const KnowledgeBase* kb_;
  std::vector<NormalizedName> names_;
  std::vector<Variant> variants_;
};

// Keyword vote between hotel and restaurant vocabulary; nullopt on a tie.
std::optional<Domain> guess_domain(const DialogueContext& context);

TrackResult track_entities(const DialogueContext& context,
                           const KnowledgeBase& kb);

struct TrackingReport {
  std::size_t instances = 0;
  double accuracy = 0.0;       // predicted set == gold set
  double missing_rate = 0.0;   // some gold entity not predicted
  double spurious_rate = 0.0;  // some predicted entity not gold
};

TrackingReport evaluate_tracking(
    const std::vector<std::vector<EntityKey>>& predictions,
    const std::vector<std::vector<EntityKey>>& gold);

}  // namespace sktod
