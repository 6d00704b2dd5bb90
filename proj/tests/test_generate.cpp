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

#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "sktod/error.hpp"
#include "sktod/generate.hpp"
#include "sktod/text.hpp"
#include "synthetic.hpp"
#include "template_check.hpp"

using namespace sktod;

namespace {

const EntityKey kCityroomz{Domain::kHotel, "11"};
const EntityKey kGonville{Domain::kHotel, "12"};

DialogueContext request(const std::string& text) {
  DialogueContext c;
  c.instance_id = "g-1";
  c.utterances.push_back({Speaker::kUser, text, 0});
  return c;
}

// Annotates the first `counts.size()` snippets of an entity with the given
// polarities and selects them.
void select(const KnowledgeBase& kb, const EntityKey& key, const std::vector<Polarity>& polarities,
            SnippetSelection& selection, AnnotationMap& annotations, const std::string& aspect) {
  auto snippets = kb.entity_snippets(kb.find_entity(key));
  REQUIRE(snippets.size() >= polarities.size());
  for (std::size_t i = 0; i < polarities.size(); ++i) {
    const SnippetRef& ref = kb.snippets()[snippets[i]].ref;
    selection.selected.push_back({ref, 1.0 - 0.01 * double(i)});
    SentimentAnnotation a{ref, std::nullopt, polarities[i]};
    if (polarities[i] != Polarity::kNone) a.aspect_term = aspect;
    annotations[ref] = a;
  }
}

std::string prompt_for(const DialogueContext& c) {
  return closing_prompts()[fnv1a(c.last_user_turn().text) % closing_prompts().size()];
}

}  // namespace

TEST_CASE("tally counts per entity") {
  KnowledgeBase kb = testing::synthetic_kb();
  SnippetSelection selection;
  AnnotationMap annotations;
  select(kb, kCityroomz, {Polarity::kNegative, Polarity::kNegative, Polarity::kNone}, selection,
         annotations, "wifi");
  select(kb, kGonville, {Polarity::kPositive, Polarity::kNeutral}, selection, annotations, "wifi");
  auto tallies = tally_sentiments(selection, annotations);
  CHECK(tallies[kCityroomz].negative == 2);
  CHECK(tallies[kCityroomz].none == 1);
  CHECK(tallies[kCityroomz].total == 3);
  CHECK(tallies[kCityroomz].opinions() == 2);
  CHECK(tallies[kGonville].positive == 1);
  CHECK(tallies[kGonville].neutral == 1);

  annotations.erase(selection.selected[0].ref);
  CHECK_THROWS_AS(tally_sentiments(selection, annotations), PreconditionError);
}

TEST_CASE("template wording") {
  KnowledgeBase kb = testing::synthetic_kb();
  auto c = request("How is the water pressure at Cityroomz?");
  std::string prompt = prompt_for(c);

  SnippetSelection selection;
  AnnotationMap annotations;
  select(kb, kCityroomz, std::vector<Polarity>(5, Polarity::kNegative), selection, annotations,
         "water pressure");
  Response r = generate_template(c, selection, annotations, kb);
  CHECK(r.text == "At Cityroomz, all 5 guests who mentioned the water pressure say it is bad. " +
                      prompt);
  CHECK(r.provenance.size() == 5);
  CHECK_FALSE(r.empty_selection);

  selection = {};
  annotations = {};
  select(kb, kCityroomz, {Polarity::kPositive}, selection, annotations, "wifi");
  CHECK(generate_template(c, selection, annotations, kb).text ==
        "At Cityroomz, the one guest who mentioned the wifi says it is good. " + prompt);

  selection = {};
  annotations = {};
  select(kb, kCityroomz,
         {Polarity::kPositive, Polarity::kNegative, Polarity::kPositive, Polarity::kNeutral},
         selection, annotations, "wifi");
  CHECK(generate_template(c, selection, annotations, kb).text ==
        "At Cityroomz, 2 of 4 guests say the wifi is good, but 1 of 4 say it is bad, and 1 of 4 "
        "found it just okay. " + prompt);

  selection = {};
  annotations = {};
  select(kb, kCityroomz, {Polarity::kNone}, selection, annotations, "wifi");
  select(kb, kGonville, {Polarity::kNeutral, Polarity::kNeutral}, selection, annotations, "bed");
  CHECK(generate_template(c, selection, annotations, kb, {kGonville}).text ==
        "At Gonville Hotel, both guests who mentioned the bed say it is just okay. In contrast, "
        "at Cityroomz, guests mention the bed without saying how it was. " + prompt);
}

TEST_CASE("empty selection") {
  KnowledgeBase kb = testing::synthetic_kb();
  Response r = generate_template(request("Is it nice?"), {}, {}, kb);
  CHECK(r.text == kNoFeedbackReply);
  CHECK(r.empty_selection);
  CHECK_THROWS_AS(generate_ext({}, kb, 1), PreconditionError);
}

TEST_CASE("aspect choice") {
  KnowledgeBase kb = testing::synthetic_kb();
  SnippetSelection selection;
  AnnotationMap annotations;
  select(kb, kCityroomz, {Polarity::kNone, Polarity::kNone}, selection, annotations, "x");
  CHECK(template_aspect(request("Is the breakfast good?"), selection, annotations) == "breakfast");
  CHECK(template_aspect(request("Is it good?"), selection, annotations) == "place");
  annotations[selection.selected[1].ref].aspect_term = "wifi";
  annotations[selection.selected[1].ref].polarity = Polarity::kPositive;
  CHECK(template_aspect(request("Is the breakfast good?"), selection, annotations) == "wifi");
}

TEST_CASE("template responses state the tallies faithfully") {
  KnowledgeBase kb = testing::synthetic_kb();
  std::mt19937_64 rng(99);
  for (int i = 0; i < 300; ++i) {
    auto tc = testing::random_template_case(kb, rng);
    Response r = generate_template(tc.context, tc.selection, tc.annotations, kb, tc.mention_order);
    CHECK_MESSAGE(testing::check_template_response(r, tc.context, tc.selection, tc.annotations,
                                                   kb, tc.mention_order) == "",
                  r.text);
  }
}

TEST_CASE("extractive baseline") {
  KnowledgeBase kb = testing::synthetic_kb();
  SnippetSelection selection;
  AnnotationMap annotations;
  select(kb, kCityroomz, {Polarity::kNone, Polarity::kNone, Polarity::kNone}, selection,
         annotations, "x");
  selection.instance_id = "test-3";
  Response a = generate_ext(selection, kb, 7);
  Response b = generate_ext(selection, kb, 7);
  CHECK(a.text == b.text);
  REQUIRE(a.provenance.size() == 1);
  CHECK(kb.snippet(a.provenance[0].ref).text == a.text);
  // Order of the selection does not matter.
  std::reverse(selection.selected.begin(), selection.selected.end());
  CHECK(generate_ext(selection, kb, 7).text == a.text);
  // Different seeds reach different snippets.
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 40; ++seed) seen.insert(generate_ext(selection, kb, seed).text);
  CHECK(seen.size() > 1);
}

TEST_CASE("generator input") {
  KnowledgeBase kb = testing::synthetic_kb();
  SnippetSelection selection;
  AnnotationMap annotations;
  select(kb, kCityroomz, {Polarity::kNegative, Polarity::kNone}, selection, annotations,
         "water pressure");
  std::reverse(selection.selected.begin(), selection.selected.end());
  auto c = request("How is it?");
  GenerationInput plain = build_generation_input(c, selection, annotations, kb, false);
  GenerationInput absa = build_generation_input(c, selection, annotations, kb, true);
  REQUIRE(plain.snippets.size() == 2);
  CHECK(plain.provenance[0].ref == selection.selected[1].ref);
  CHECK(plain.snippets[0] == kb.snippet(selection.selected[1].ref).text);
  CHECK(absa.snippets[0] == plain.snippets[0] + " water pressure is bad.");
  CHECK(absa.snippets[1] == plain.snippets[1]);
  CHECK(plain.entity_names == std::vector<std::string>{"Cityroomz"});

  auto wire = nlohmann::ordered_json::parse(plain.to_wire());
  CHECK(wire.begin().key() == "context");
  CHECK(wire["context"][0]["speaker"] == "U");
  CHECK(wire["snippets"].size() == 2);
}
