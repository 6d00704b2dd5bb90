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

#include "sktod/generate.hpp"

#include <algorithm>
#include <random>

#include "json.hpp"
#include "json_util.hpp"
#include "sktod/error.hpp"
#include "sktod/external.hpp"
#include "sktod/text.hpp"

namespace sktod {

std::map<EntityKey, SentimentTally> tally_sentiments(const SnippetSelection& selection,
                                                     const AnnotationMap& annotations) {
  std::map<EntityKey, SentimentTally> tallies;
  for (const auto& s : selection.selected) {
    auto it = annotations.find(s.ref);
    if (it == annotations.end()) {
      throw PreconditionError("no sentiment annotation for " + to_string(s.ref));
    }
    SentimentTally& t = tallies[entity_of(s.ref)];
    ++t.total;
    switch (it->second.polarity) {
      case Polarity::kPositive: ++t.positive; break;
      case Polarity::kNeutral: ++t.neutral; break;
      case Polarity::kNegative: ++t.negative; break;
      case Polarity::kNone: ++t.none; break;
    }
  }
  return tallies;
}

Response generate_ext(const SnippetSelection& selection, const KnowledgeBase& kb,
                      std::uint64_t seed) {
  if (selection.selected.empty()) {
    throw PreconditionError("extractive generation needs a non-empty selection");
  }
  RefSet refs = selection.refs();
  std::mt19937_64 rng(seed ^ fnv1a(selection.instance_id));
  const SnippetRef& chosen = refs[uniform_index(rng, refs.size())];
  Response out;
  out.text = kb.snippet(chosen).text;
  out.provenance.push_back({chosen, Polarity::kNone});
  return out;
}

const std::vector<std::string>& closing_prompts() {
  static const std::vector<std::string> prompts = {
      "Is there anything else you would like to know?",
      "Would you like me to make a booking?",
      "Shall I look for other options?",
      "Do you want more details before deciding?",
      "Can I help you with anything else?",
      "Would you like to go ahead with a reservation?",
  };
  return prompts;
}

std::string template_aspect(const DialogueContext& context, const SnippetSelection& selection,
                            const AnnotationMap& annotations) {
  std::vector<ScoredSnippet> ranked = selection.selected;
  sort_by_score(ranked);
  std::map<std::string, std::size_t> counts;
  std::vector<std::string> first_seen;
  for (const auto& s : ranked) {
    auto it = annotations.find(s.ref);
    if (it == annotations.end() || !it->second.aspect_term) continue;
    const std::string& aspect = *it->second.aspect_term;
    if (counts[aspect]++ == 0) first_seen.push_back(aspect);
  }
  std::string best;
  std::size_t best_count = 0;
  for (const auto& aspect : first_seen) {
    if (counts[aspect] > best_count) {
      best = aspect;
      best_count = counts[aspect];
    }
  }
  if (!best.empty()) return best;

  const SentimentLexicon& lexicon = SentimentLexicon::builtin();
  std::vector<std::string> tokens = tokenize(context.last_user_turn().text);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    SentimentLexicon::Entry entry;
    std::size_t len = lexicon.match(tokens, i, &entry);
    if (len > 0 && entry.kind == SentimentLexicon::Kind::kAspect) {
      return join(std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                           tokens.begin() + static_cast<std::ptrdiff_t>(i + len)));
    }
  }
  return "place";
}

namespace {

std::string_view adjective(Polarity polarity) {
  switch (polarity) {
    case Polarity::kPositive: return "good";
    case Polarity::kNegative: return "bad";
    default: return "just okay";
  }
}

std::string count_of(std::size_t a, std::size_t m) {
  return std::to_string(a) + " of " + std::to_string(m);
}

// One sentence body for an entity, without the leading "At E," prefix.
std::string entity_clause(const SentimentTally& t, const std::string& aspect) {
  const std::size_t m = t.opinions();
  if (m == 0) {
    return "guests mention the " + aspect + " without saying how it was.";
  }
  std::vector<std::pair<Polarity, std::size_t>> present;
  if (t.positive) present.push_back({Polarity::kPositive, t.positive});
  if (t.negative) present.push_back({Polarity::kNegative, t.negative});
  if (t.neutral) present.push_back({Polarity::kNeutral, t.neutral});

  if (present.size() == 1) {
    std::string adj(adjective(present[0].first));
    std::size_t k = present[0].second;
    if (k == 1) return "the one guest who mentioned the " + aspect + " says it is " + adj + ".";
    if (k == 2) return "both guests who mentioned the " + aspect + " say it is " + adj + ".";
    return "all " + std::to_string(k) + " guests who mentioned the " + aspect + " say it is " +
           adj + ".";
  }

  Polarity major, minor;
  std::size_t major_count, minor_count;
  if (t.positive >= t.negative) {
    major = Polarity::kPositive;
    major_count = t.positive;
    minor = Polarity::kNegative;
    minor_count = t.negative;
  } else {
    major = Polarity::kNegative;
    major_count = t.negative;
    minor = Polarity::kPositive;
    minor_count = t.positive;
  }
  std::string out = count_of(major_count, m) + " guests say the " + aspect + " is " +
                    std::string(adjective(major));
  if (minor_count > 0) {
    out += ", but " + count_of(minor_count, m) + " say it is " + std::string(adjective(minor));
  }
  if (t.neutral > 0) out += ", and " + count_of(t.neutral, m) + " found it just okay";
  return out + ".";
}

}  // namespace

Response generate_template(const DialogueContext& context, const SnippetSelection& selection,
                           const AnnotationMap& annotations, const KnowledgeBase& kb,
                           const std::vector<EntityKey>& mention_order) {
  Response out;
  if (selection.selected.empty()) {
    out.text = std::string(kNoFeedbackReply);
    out.empty_selection = true;
    return out;
  }
  std::map<EntityKey, SentimentTally> tallies = tally_sentiments(selection, annotations);
  std::string aspect = template_aspect(context, selection, annotations);

  std::vector<EntityKey> order;
  for (const auto& key : mention_order) {
    if (tallies.count(key) && std::find(order.begin(), order.end(), key) == order.end()) {
      order.push_back(key);
    }
  }
  std::vector<EntityKey> rest;
  for (const auto& [key, tally] : tallies) {
    if (std::find(order.begin(), order.end(), key) == order.end()) rest.push_back(key);
  }
  std::sort(rest.begin(), rest.end(), [&kb](const EntityKey& a, const EntityKey& b) {
    return kb.find_entity(a) < kb.find_entity(b);
  });
  order.insert(order.end(), rest.begin(), rest.end());

  std::string text;
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::size_t e = kb.find_entity(order[i]);
    std::string name = e == KnowledgeBase::npos ? order[i].entity_id : kb.entities()[e].name;
    if (i > 0) text += " In contrast, at ";
    else text += "At ";
    text += name + ", " + entity_clause(tallies[order[i]], aspect);
  }
  const auto& prompts = closing_prompts();
  text += " " + prompts[fnv1a(context.last_user_turn().text) % prompts.size()];
  out.text = std::move(text);

  std::vector<ScoredSnippet> ranked = selection.selected;
  sort_by_score(ranked);
  for (const auto& s : ranked) {
    out.provenance.push_back({s.ref, annotations.at(s.ref).polarity});
  }
  return out;
}

std::string GenerationInput::to_wire() const {
  nlohmann::ordered_json body = {{"context", context_to_json(context)},
                                 {"snippets", snippets}};
  return body.dump();
}

GenerationInput build_generation_input(const DialogueContext& context,
                                       const SnippetSelection& selection,
                                       const AnnotationMap& annotations,
                                       const KnowledgeBase& kb, bool use_absa) {
  GenerationInput input;
  input.context = context;
  std::vector<ScoredSnippet> ranked = selection.selected;
  sort_by_score(ranked);
  for (const auto& s : ranked) {
    const std::string& text = kb.snippet(s.ref).text;
    auto it = annotations.find(s.ref);
    Polarity polarity = it == annotations.end() ? Polarity::kNone : it->second.polarity;
    input.snippets.push_back(use_absa && it != annotations.end()
                                 ? augment_snippet(text, it->second)
                                 : text);
    input.provenance.push_back({s.ref, polarity});
    const std::string& name = kb.entity(entity_of(s.ref)).name;
    if (std::find(input.entity_names.begin(), input.entity_names.end(), name) ==
        input.entity_names.end()) {
      input.entity_names.push_back(name);
    }
  }
  return input;
}

Response external_generate(const JsonServiceClient& client, const GenerationInput& input) {
  nlohmann::json reply = client.post(nlohmann::json::parse(input.to_wire()));
  if (!reply.is_object() || !reply.contains("response") || !reply["response"].is_string()) {
    throw ProtocolError("generator reply must be {\"response\": \"...\"}");
  }
  std::string text = trim(reply["response"].get<std::string>());
  if (text.empty()) throw ProtocolError("generator returned an empty response");
  Response out;
  out.text = std::move(text);
  out.provenance = input.provenance;
  return out;
}

}  // namespace sktod
