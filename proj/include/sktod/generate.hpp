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
#include <map>
#include <string>
#include <vector>

#include "sktod/absa.hpp"
#include "sktod/corpus.hpp"
#include "sktod/select.hpp"

namespace sktod {

class JsonServiceClient;

using AnnotationMap = std::map<SnippetRef, SentimentAnnotation>;

struct SentimentTally {
  std::size_t positive = 0;
  std::size_t neutral = 0;
  std::size_t negative = 0;
  std::size_t none = 0;
  std::size_t total = 0;

  // Snippets that carry an opinion (positive + neutral + negative).
  std::size_t opinions() const { return positive + neutral + negative; }
};

// Per-entity counts over the selected snippets. Throws PreconditionError
// when a selected snippet has no annotation.
std::map<EntityKey, SentimentTally> tally_sentiments(const SnippetSelection& selection,
                                                     const AnnotationMap& annotations);

struct ProvenanceItem {
  SnippetRef ref;
  Polarity polarity = Polarity::kNone;
};

struct Response {
  std::string text;
  std::vector<ProvenanceItem> provenance;
  bool empty_selection = false;
};

inline constexpr std::string_view kNoFeedbackReply = "I don't have guest feedback on that.";

// Verbatim text of one selected snippet, drawn uniformly with
// mt19937_64(seed ^ fnv1a(instance_id)) over the refs in sorted order.
// Throws PreconditionError on an empty selection.
Response generate_ext(const SnippetSelection& selection, const KnowledgeBase& kb,
                      std::uint64_t seed);

// Rule-based response that states every entity's opinion counts.
//
// Per entity with m opinions (p positive, u neutral, n negative):
//   one category only   "At E, all k guests who mentioned the A say it is good."
//                       ("the one guest ... says", "both guests ... say")
//   mixed               "At E, a of m guests say the A is good, but b of m say
//                       it is bad, and u of m found it just okay."
// The majority of p and n comes first (positive on a tie); the "but" clause
// appears iff both p and n are non-zero and the "just okay" clause iff u is.
// Entities without opinions get a neutral mention. Later entities are
// prefixed with "In contrast,". A closing prompt from a fixed list follows,
// picked by a hash of the request. `mention_order` orders entities; others
// follow in knowledge-base order. An empty selection yields
// kNoFeedbackReply with empty_selection set.
Response generate_template(const DialogueContext& context, const SnippetSelection& selection,
                           const AnnotationMap& annotations, const KnowledgeBase& kb,
                           const std::vector<EntityKey>& mention_order = {});

// The aspect word the template uses: most frequent annotated aspect among
// the selection (earliest in ranking on a tie), else an aspect cue from the
// request, else "place".
std::string template_aspect(const DialogueContext& context, const SnippetSelection& selection,
                            const AnnotationMap& annotations);

const std::vector<std::string>& closing_prompts();

struct GenerationInput {
  std::vector<std::string> snippets;  // descending score, then ref
  std::vector<ProvenanceItem> provenance;
  std::vector<std::string> entity_names;
  DialogueContext context;

  // Wire form: {"context":[{"speaker","text"}...],"snippets":["..."]},
  // keys in that order, compact.
  std::string to_wire() const;
};

// Snippets ordered by descending score with ref tie-break (the input order
// does not matter), augmented with their polarity phrase iff `use_absa`.
GenerationInput build_generation_input(const DialogueContext& context,
                                       const SnippetSelection& selection,
                                       const AnnotationMap& annotations,
                                       const KnowledgeBase& kb, bool use_absa);

// {"context":..., "snippets":...} -> {"response": "..."}; an empty or
// missing response raises ProtocolError.
Response external_generate(const JsonServiceClient& client, const GenerationInput& input);

}  // namespace sktod
