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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sktod/corpus.hpp"

namespace sktod {

class JsonServiceClient;

enum class Polarity { kPositive, kNeutral, kNegative, kNone };

std::string_view to_string(Polarity polarity);  // "positive" ... "none"
Polarity parse_polarity(std::string_view text);  // throws ProtocolError

// Aspect/polarity of one review sentence. polarity == kNone implies no
// aspect term.
struct SentimentAnnotation {
  SnippetRef ref;
  std::optional<std::string> aspect_term;
  Polarity polarity = Polarity::kNone;
};

// Signed terms, negation markers, hedges and aspect cues. Entries are
// token sequences under the shared tokenizer, so phrases match across
// clitic splits ("wasn't" is "was n't").
class SentimentLexicon {
 public:
  enum class Kind { kSentiment, kNegation, kHedge, kAspect };

  struct Entry {
    Kind kind = Kind::kSentiment;
    int weight = 0;  // +-1 or +-2 for sentiment terms, 0 otherwise
  };

  SentimentLexicon() = default;

  // Parses the line format of data/lexicon.txt. Throws DataError on an
  // unknown prefix or a term listed with two different meanings.
  static SentimentLexicon parse(std::string_view text,
                                const std::string& origin = "lexicon");
  static SentimentLexicon load(const std::filesystem::path& path);
  // The lexicon compiled into the library.
  static const SentimentLexicon& builtin();

  // Longest entry starting at tokens[pos]; returns the number of tokens
  // matched (0 if none) and fills `entry`.
  std::size_t match(const std::vector<std::string>& tokens, std::size_t pos,
                    Entry* entry) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t count(Kind kind) const;

 private:
  std::map<std::vector<std::string>, Entry> entries_;
  std::size_t max_phrase_ = 0;
};

// Sentiment cues within this many tokens after a negation marker are
// flipped, once per marker. Clause punctuation ends the window.
inline constexpr std::size_t kNegationWindow = 3;

// Polarity from summed signed hits (equal non-zero sums give neutral; only
// hedges give neutral; no cue gives none). The aspect is the aspect cue
// nearest the strongest cue, else the first content word after a
// determiner, else the first content word.
SentimentAnnotation tag_text(const SentimentLexicon& lexicon, std::string_view text);
SentimentAnnotation tag_snippet(const SentimentLexicon& lexicon,
                                const KnowledgeSnippet& snippet);

// "great" / "ok" / "bad"; throws PreconditionError for kNone.
std::string_view polarity_token(Polarity polarity);
Polarity polarity_from_token(std::string_view token);  // throws UsageError

// "<aspect> is great." etc. Throws PreconditionError for kNone.
std::string polarity_phrase(std::string_view aspect_term, Polarity polarity);

// text + " " + polarity_phrase, or text unchanged when there is nothing to
// append (polarity none or no aspect).
std::string augment_snippet(std::string_view text, const SentimentAnnotation& annotation);

// Remote tagger: {"sentence": "..."} -> {"aspect": "...", "polarity": "..."}.
// A malformed reply raises ProtocolError.
SentimentAnnotation external_tag(const JsonServiceClient& client,
                                 const KnowledgeSnippet& snippet);

// Batched form of external_tag, replies in input order.
std::vector<SentimentAnnotation> external_tag_all(
    const JsonServiceClient& client, const std::vector<const KnowledgeSnippet*>& snippets);

}  // namespace sktod
