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

#include "sktod/absa.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sktod/error.hpp"
#include "sktod/external.hpp"
#include "sktod/text.hpp"

namespace sktod {

std::string_view default_lexicon_text();  // generated

std::string_view to_string(Polarity polarity) {
  switch (polarity) {
    case Polarity::kPositive: return "positive";
    case Polarity::kNeutral: return "neutral";
    case Polarity::kNegative: return "negative";
    case Polarity::kNone: return "none";
  }
  return "none";
}

Polarity parse_polarity(std::string_view text) {
  if (text == "positive") return Polarity::kPositive;
  if (text == "neutral") return Polarity::kNeutral;
  if (text == "negative") return Polarity::kNegative;
  if (text == "none") return Polarity::kNone;
  throw ProtocolError("unknown polarity '" + std::string(text) + "'");
}

SentimentLexicon SentimentLexicon::parse(std::string_view text, const std::string& origin) {
  SentimentLexicon lexicon;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    Entry entry;
    std::size_t skip = 1;
    if (line.rfind("++", 0) == 0) {
      entry.weight = 2;
      skip = 2;
    } else if (line.rfind("--", 0) == 0) {
      entry.weight = -2;
      skip = 2;
    } else {
      switch (line[0]) {
        case '+': entry.weight = 1; break;
        case '-': entry.weight = -1; break;
        case '!': entry.kind = Kind::kNegation; break;
        case '~': entry.kind = Kind::kHedge; break;
        case '@': entry.kind = Kind::kAspect; break;
        default:
          throw DataError(origin + ":" + std::to_string(line_no) +
                          ": unknown entry prefix in '" + line + "'");
      }
    }
    std::vector<std::string> tokens = tokenize(line.substr(skip));
    if (tokens.empty()) {
      throw DataError(origin + ":" + std::to_string(line_no) + ": empty term");
    }
    auto [it, inserted] = lexicon.entries_.emplace(tokens, entry);
    if (!inserted && (it->second.kind != entry.kind || it->second.weight != entry.weight)) {
      throw DataError(origin + ":" + std::to_string(line_no) + ": '" + join(tokens) +
                      "' is listed with two different meanings");
    }
    lexicon.max_phrase_ = std::max(lexicon.max_phrase_, tokens.size());
  }
  return lexicon;
}

SentimentLexicon SentimentLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open lexicon " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

const SentimentLexicon& SentimentLexicon::builtin() {
  static const SentimentLexicon lexicon = parse(default_lexicon_text(), "builtin lexicon");
  return lexicon;
}

std::size_t SentimentLexicon::match(const std::vector<std::string>& tokens, std::size_t pos,
                                    Entry* entry) const {
  std::size_t longest = std::min(max_phrase_, tokens.size() - pos);
  for (std::size_t len = longest; len > 0; --len) {
    std::vector<std::string> key(tokens.begin() + static_cast<std::ptrdiff_t>(pos),
                                 tokens.begin() + static_cast<std::ptrdiff_t>(pos + len));
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      if (entry) *entry = it->second;
      return len;
    }
  }
  return 0;
}

std::size_t SentimentLexicon::count(Kind kind) const {
  return static_cast<std::size_t>(std::count_if(
      entries_.begin(), entries_.end(), [kind](const auto& e) { return e.second.kind == kind; }));
}

namespace {

struct Cue {
  SentimentLexicon::Kind kind;
  int weight = 0;
  std::size_t start = 0;
  std::size_t end = 0;  // one past the last token
};

bool is_clause_break(std::string_view token) {
  return token == "." || token == "," || token == ";" || token == ":" ||
         token == "!" || token == "?";
}

const std::set<std::string, std::less<>>& determiners() {
  static const std::set<std::string, std::less<>> words = {
      "the", "a", "an", "our", "my", "their", "this", "that", "these",
      "those", "his", "her", "its", "your", "every", "each"};
  return words;
}

const std::set<std::string, std::less<>>& function_words() {
  static const std::set<std::string, std::less<>> words = {
      "i", "we", "you", "he", "she", "it", "they", "me", "us", "him", "them",
      "is", "was", "are", "were", "be", "been", "being", "am", "has", "have",
      "had", "do", "does", "did", "will", "would", "could", "should", "can",
      "ca", "may", "might", "must", "and", "or", "but", "so", "very", "really",
      "quite", "too", "also", "just", "of", "in", "on", "at", "to", "for",
      "with", "from", "by", "as", "about", "there", "here", "then", "than",
      "when", "which", "who", "what", "all", "some", "any", "'s", "'re",
      "'ve", "'ll", "'d", "'m", "overall", "definitely", "pretty", "extremely",
      "super", "always", "again", "if", "because", "while", "after", "before"};
  return words;
}

bool is_content(const std::string& token) {
  if (is_punctuation_token(token)) return false;
  if (determiners().count(token) || function_words().count(token)) return false;
  return std::any_of(token.begin(), token.end(),
                     [](unsigned char c) { return !std::isdigit(c); });
}

std::string span_text(const std::vector<std::string>& tokens, std::size_t start, std::size_t end) {
  return join(std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                                       tokens.begin() + static_cast<std::ptrdiff_t>(end)));
}

}  // namespace

SentimentAnnotation tag_text(const SentimentLexicon& lexicon, std::string_view text) {
  using Kind = SentimentLexicon::Kind;
  const std::vector<std::string> tokens = tokenize(text);
  std::vector<Cue> cues;
  std::vector<bool> in_cue(tokens.size(), false);
  for (std::size_t i = 0; i < tokens.size();) {
    SentimentLexicon::Entry entry;
    std::size_t len = lexicon.match(tokens, i, &entry);
    if (len == 0) {
      ++i;
      continue;
    }
    cues.push_back({entry.kind, entry.weight, i, i + len});
    for (std::size_t k = i; k < i + len; ++k) in_cue[k] = true;
    i += len;
  }

  // Negation parity for every signed or hedge cue.
  int positive = 0, negative = 0, hedges = 0;
  std::vector<int> effective(cues.size(), 0);
  for (std::size_t c = 0; c < cues.size(); ++c) {
    Cue& cue = cues[c];
    if (cue.kind != Kind::kSentiment && cue.kind != Kind::kHedge) continue;
    int flips = 0;
    for (std::size_t n = 0; n < c; ++n) {
      if (cues[n].kind != Kind::kNegation) continue;
      if (cue.start - cues[n].end >= kNegationWindow) continue;
      bool blocked = false;
      for (std::size_t k = cues[n].end; k < cue.start; ++k) {
        if (is_clause_break(tokens[k])) blocked = true;
      }
      if (!blocked) ++flips;
    }
    bool flipped = flips % 2 == 1;
    if (cue.kind == Kind::kHedge) {
      if (flipped) {
        effective[c] = -1;
        negative += 1;
      } else {
        ++hedges;
      }
      continue;
    }
    effective[c] = flipped ? -cue.weight : cue.weight;
    if (effective[c] > 0) positive += effective[c];
    if (effective[c] < 0) negative += -effective[c];
  }

  SentimentAnnotation out;
  if (positive > negative) {
    out.polarity = Polarity::kPositive;
  } else if (negative > positive) {
    out.polarity = Polarity::kNegative;
  } else if (positive > 0 || hedges > 0) {
    out.polarity = Polarity::kNeutral;
  } else {
    return out;
  }

  // Strongest cue agreeing with the outcome; hedges anchor neutral results.
  int sign = out.polarity == Polarity::kPositive   ? 1
             : out.polarity == Polarity::kNegative ? -1
                                                   : 0;
  std::size_t anchor = tokens.size();
  int best = 0;
  for (std::size_t c = 0; c < cues.size(); ++c) {
    int e = effective[c];
    bool agrees = sign == 0 ? (e != 0 || cues[c].kind == Kind::kHedge) : e * sign > 0;
    if (!agrees) continue;
    int strength = std::max(1, std::abs(e));
    if (strength > best) {
      best = strength;
      anchor = cues[c].start;
    }
  }

  std::size_t best_distance = tokens.size() + 1;
  for (const auto& cue : cues) {
    if (cue.kind != Kind::kAspect) continue;
    std::size_t distance = cue.start > anchor ? cue.start - anchor : anchor - cue.start;
    if (distance < best_distance) {
      best_distance = distance;
      out.aspect_term = span_text(tokens, cue.start, cue.end);
    }
  }
  if (!out.aspect_term) {
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
      if (determiners().count(tokens[i]) && !in_cue[i + 1] && is_content(tokens[i + 1])) {
        out.aspect_term = tokens[i + 1];
        break;
      }
    }
  }
  if (!out.aspect_term) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (!in_cue[i] && is_content(tokens[i])) {
        out.aspect_term = tokens[i];
        break;
      }
    }
  }
  return out;
}

SentimentAnnotation tag_snippet(const SentimentLexicon& lexicon, const KnowledgeSnippet& snippet) {
  SentimentAnnotation out = tag_text(lexicon, snippet.text);
  out.ref = snippet.ref;
  return out;
}

std::string_view polarity_token(Polarity polarity) {
  switch (polarity) {
    case Polarity::kPositive: return "great";
    case Polarity::kNeutral: return "ok";
    case Polarity::kNegative: return "bad";
    case Polarity::kNone: break;
  }
  throw PreconditionError("polarity none has no phrase token");
}

Polarity polarity_from_token(std::string_view token) {
  if (token == "great") return Polarity::kPositive;
  if (token == "ok") return Polarity::kNeutral;
  if (token == "bad") return Polarity::kNegative;
  throw UsageError("unknown polarity token '" + std::string(token) + "'");
}

std::string polarity_phrase(std::string_view aspect_term, Polarity polarity) {
  std::string_view token = polarity_token(polarity);
  return std::string(aspect_term) + " is " + std::string(token) + ".";
}

std::string augment_snippet(std::string_view text, const SentimentAnnotation& annotation) {
  if (annotation.polarity == Polarity::kNone || !annotation.aspect_term ||
      annotation.aspect_term->empty()) {
    return std::string(text);
  }
  return std::string(text) + " " + polarity_phrase(*annotation.aspect_term, annotation.polarity);
}

namespace {

SentimentAnnotation parse_tag_reply(const nlohmann::json& reply, const SnippetRef& ref) {
  if (!reply.is_object() || !reply.contains("polarity") || !reply["polarity"].is_string()) {
    throw ProtocolError("absa reply must carry a string \"polarity\"");
  }
  SentimentAnnotation out;
  out.ref = ref;
  out.polarity = parse_polarity(reply["polarity"].get<std::string>());
  if (out.polarity == Polarity::kNone) return out;
  if (!reply.contains("aspect") || !reply["aspect"].is_string() ||
      trim(reply["aspect"].get<std::string>()).empty()) {
    throw ProtocolError("absa reply with a polarity needs a non-empty \"aspect\"");
  }
  out.aspect_term = trim(reply["aspect"].get<std::string>());
  return out;
}

}  // namespace

SentimentAnnotation external_tag(const JsonServiceClient& client, const KnowledgeSnippet& snippet) {
  return parse_tag_reply(client.post({{"sentence", snippet.text}}), snippet.ref);
}

std::vector<SentimentAnnotation> external_tag_all(
    const JsonServiceClient& client, const std::vector<const KnowledgeSnippet*>& snippets) {
  std::vector<nlohmann::json> bodies;
  bodies.reserve(snippets.size());
  for (const auto* s : snippets) bodies.push_back({{"sentence", s->text}});
  std::vector<nlohmann::json> replies = client.post_all(bodies);
  std::vector<SentimentAnnotation> out;
  out.reserve(replies.size());
  for (std::size_t i = 0; i < replies.size(); ++i) {
    out.push_back(parse_tag_reply(replies[i], snippets[i]->ref));
  }
  return out;
}

}  // namespace sktod
