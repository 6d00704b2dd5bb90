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

#include "doctest.h"
#include "sktod/corpus.hpp"
#include "sktod/error.hpp"
#include "synthetic.hpp"

using namespace sktod;

namespace {

const char* kKnowledge = R"({
  "hotel": {
    "11": {"name": "Cityroomz", "reviews": {
      "0": {"sentences": {"0": "The water pressure was awful.", "1": "Nice staff."}},
      "1": {"sentences": ["Weak water pressure."]}},
      "faqs": {}},
    "12": {"name": "Gonville Hotel"}
  },
  "restaurant": {
    "3": {"name": "Curry Garden", "reviews": {"0": {"sentences": {"0": "Tasty food."}}}}
  },
  "taxi": {"1": {"name": "ignored"}}
})";

const char* kLogs = R"([
  [{"speaker": "U", "text": "I need a hotel."},
   {"speaker": "S", "text": "Cityroomz is nice."},
   {"speaker": "U", "text": "How is the water pressure there?"}],
  [{"speaker": "U", "text": "Book it please."}]
])";

const char* kLabels = R"([
  {"target": true,
   "knowledge": [{"domain": "hotel", "entity_id": 11, "doc_type": "review", "doc_id": 1, "sent_id": 0},
                 {"domain": "hotel", "entity_id": "11", "doc_type": "review", "doc_id": 0, "sent_id": 0},
                 {"domain": "hotel", "entity_id": 11, "doc_type": "faq", "doc_id": 3}],
   "response": "Guests say it is weak."},
  {"target": false}
])";

}  // namespace

TEST_CASE("parse knowledge base") {
  KnowledgeBase kb = parse_knowledge_base(kKnowledge);
  CHECK(kb.entity_count() == 3);
  CHECK(kb.review_count() == 3);
  CHECK(kb.snippet_count() == 4);
  CHECK(kb.entity({Domain::kHotel, "12"}).name == "Gonville Hotel");
  CHECK(kb.snippet({Domain::kHotel, "11", "1", "0"}).text == "Weak water pressure.");
  CHECK(kb.find_entity({Domain::kHotel, "99"}) == KnowledgeBase::npos);
  CHECK_THROWS_AS(kb.entity({Domain::kHotel, "99"}), NotFoundError);
  auto snippets = kb.entity_snippets(kb.find_entity({Domain::kHotel, "11"}));
  REQUIRE(snippets.size() == 3);
  CHECK(kb.snippets()[snippets[0]].ref == SnippetRef{Domain::kHotel, "11", "0", "0"});
}

TEST_CASE("knowledge base errors") {
  CHECK_THROWS_AS(parse_knowledge_base("{\"hotel\": "), ParseError);
  CHECK_THROWS_AS(parse_knowledge_base("[]"), DataError);
  CHECK_THROWS_AS(parse_knowledge_base(R"({"hotel": {"1": {}}})"), DataError);
  KnowledgeBase kb;
  kb.add_entity({Domain::kHotel, "1", "A"});
  CHECK_THROWS_AS(kb.add_entity({Domain::kHotel, "1", "B"}), IntegrityError);
  CHECK_THROWS_AS(kb.add_review({Domain::kHotel, "2"}, "0", {{"0", "x"}}), IntegrityError);
  kb.add_review({Domain::kHotel, "1"}, "0", {{"0", "x"}});
  CHECK_THROWS_AS(kb.add_review({Domain::kHotel, "1"}, "0", {{"1", "y"}}), IntegrityError);
  CHECK_THROWS_AS(kb.add_review({Domain::kHotel, "1"}, "1", {{"0", "  "}}), DataError);
}

TEST_CASE("parse split") {
  Split split = parse_split(kLogs, kLabels, SplitName::kTest);
  REQUIRE(split.instances.size() == 2);
  const auto& first = split.instances[0];
  CHECK(first.context.instance_id == "test-0");
  CHECK(first.context.utterances.size() == 3);
  CHECK(first.context.last_user_turn().text == "How is the water pressure there?");
  CHECK(first.context.previous_system_turn()->text == "Cityroomz is nice.");
  // The FAQ reference is dropped; the rest are sorted.
  REQUIRE(first.label.gold_snippets.size() == 2);
  CHECK(first.label.gold_snippets[0].review_id == "0");
  CHECK(first.label.gold_entities() == std::vector<EntityKey>{{Domain::kHotel, "11"}});
  CHECK(split.target_count() == 1);
  CHECK(split.instances[1].context.previous_system_turn() == nullptr);
}

TEST_CASE("split errors") {
  CHECK_THROWS_AS(parse_split("[[]]", "[]", SplitName::kTest), AlignmentError);
  CHECK_THROWS_AS(parse_split("[", "[]", SplitName::kTest), ParseError);
  CHECK_THROWS_AS(parse_split(R"([[{"speaker": "S", "text": "hi"}]])", R"([{"target": false}])",
                              SplitName::kTest),
                  DataError);
  CHECK_THROWS_AS(parse_split(R"([[{"speaker": "U", "text": "a"}, {"speaker": "U", "text": "b"}]])",
                              R"([{"target": false}])", SplitName::kTest),
                  DataError);
  CHECK_THROWS_AS(parse_split(R"([[{"speaker": "U", "text": "a"}]])", R"([{}])", SplitName::kTest),
                  DataError);
  CHECK_THROWS_AS(parse_split_name("dev"), UsageError);
}

TEST_CASE("integrity report") {
  KnowledgeBase kb = parse_knowledge_base(kKnowledge);
  Split split = parse_split(kLogs, kLabels, SplitName::kTest);
  CHECK(check_integrity(split, kb).ok());

  split.instances[0].label.gold_snippets.push_back({Domain::kHotel, "11", "9", "9"});
  split.instances[1].label.target = true;
  IntegrityReport report = check_integrity(split, kb);
  CHECK(report.dangling_refs == 1);
  CHECK(report.label_violations == 1);
  CHECK_FALSE(report.ok());
  CHECK(report.messages.size() == 2);
}

TEST_CASE("corpus statistics") {
  KnowledgeBase kb = parse_knowledge_base(kKnowledge);
  Split split = parse_split(kLogs, kLabels, SplitName::kTest);
  CorpusStats stats = corpus_stats(split, &kb);
  CHECK(stats.instances == 2);
  CHECK(stats.target_instances == 1);
  CHECK(stats.avg_snippets_per_instance == doctest::Approx(2.0));
  CHECK(stats.avg_utterances_per_instance == doctest::Approx(3.0));
  // "how is the water pressure there ?"
  CHECK(stats.avg_tokens_per_request == doctest::Approx(7.0));
  // "the water pressure was awful ." and "weak water pressure ."
  CHECK(stats.avg_tokens_per_snippet == doctest::Approx(5.0));
}

TEST_CASE("sort_by_score breaks ties by ref") {
  std::vector<ScoredSnippet> scored = {{{Domain::kHotel, "2", "0", "0"}, 1.0},
                                       {{Domain::kHotel, "1", "0", "1"}, 1.0},
                                       {{Domain::kHotel, "1", "0", "0"}, 2.0}};
  sort_by_score(scored);
  CHECK(scored[0].ref.sentence_id == "0");
  CHECK(scored[1].ref == SnippetRef{Domain::kHotel, "1", "0", "1"});
  CHECK(scored[2].ref.entity_id == "2");
}

TEST_CASE("serialization round trip") {
  KnowledgeBase kb = testing::synthetic_kb();
  KnowledgeBase again = parse_knowledge_base(serialize_knowledge_base(kb));
  REQUIRE(again.snippet_count() == kb.snippet_count());
  for (std::size_t i = 0; i < kb.snippet_count(); ++i) {
    CHECK(again.snippets()[i].ref == kb.snippets()[i].ref);
    CHECK(again.snippets()[i].text == kb.snippets()[i].text);
  }
  Split split = testing::synthetic_split(kb, SplitName::kVal, 40, 3);
  Split parsed = parse_split(serialize_logs(split), serialize_labels(split), SplitName::kVal);
  REQUIRE(parsed.instances.size() == split.instances.size());
  for (std::size_t i = 0; i < split.instances.size(); ++i) {
    CHECK(parsed.instances[i].context.instance_id == split.instances[i].context.instance_id);
    CHECK(parsed.instances[i].label.gold_snippets == split.instances[i].label.gold_snippets);
    CHECK(parsed.instances[i].label.reference_response ==
          split.instances[i].label.reference_response);
  }
  CHECK(check_integrity(parsed, kb).ok());
}

TEST_CASE("synthetic corpus has the Cityroomz water pressure reviews") {
  KnowledgeBase kb = testing::synthetic_kb();
  int negative_water = 0;
  for (std::size_t i : kb.entity_snippets(kb.find_entity({Domain::kHotel, "11"}))) {
    if (kb.snippets()[i].text.find("water pressure") != std::string::npos) ++negative_water;
  }
  CHECK(negative_water == 5);
}
