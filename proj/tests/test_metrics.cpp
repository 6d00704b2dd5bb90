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

#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "metric_oracles.hpp"
#include "sktod/error.hpp"
#include "sktod/metrics.hpp"
#include "stemmer.hpp"

using namespace sktod;

namespace {

SnippetRef ref(int n) { return {Domain::kHotel, "1", "0", std::to_string(n)}; }

}  // namespace

TEST_CASE("stemmer reference words") {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"caresses", "caress"}, {"ponies", "poni"},     {"cats", "cat"},
      {"feed", "feed"},       {"agreed", "agre"},     {"plastered", "plaster"},
      {"motoring", "motor"},  {"sing", "sing"},       {"conflated", "conflat"},
      {"hopping", "hop"},     {"falling", "fall"},    {"filing", "file"},
      {"happy", "happi"},     {"relational", "relat"}, {"generalization", "gener"},
      {"rooms", "room"},      {"cleaning", "clean"},  {"café", "café"}};
  for (const auto& [word, stem] : cases) CHECK_MESSAGE(porter_stem(word) == stem, word);
}

TEST_CASE("set prf") {
  PRF p = set_prf({ref(1), ref(2)}, {ref(2), ref(3), ref(4)});
  CHECK(p.precision == doctest::Approx(0.5));
  CHECK(p.recall == doctest::Approx(1.0 / 3));
  CHECK(p.f1 == doctest::Approx(0.4));
  CHECK(set_prf({}, {ref(1)}).f1 == 0.0);
  CHECK(set_prf({}, {}).f1 == 1.0);
  CHECK(set_prf({ref(1)}, {}).f1 == 0.0);
}

TEST_CASE("instance prf excludes empty gold and reports the alternative") {
  InstancePrf out = instance_prf({{ref(1)}, {}, {ref(2)}}, {{ref(1)}, {}, {ref(3)}});
  CHECK(out.evaluated == 2);
  CHECK(out.excluded_empty_gold == 1);
  CHECK(out.prf.f1 == doctest::Approx(0.5));
  CHECK(out.empty_gold_included.f1 == doctest::Approx(2.0 / 3));
  CHECK_THROWS_AS(instance_prf({{}}, {}), PreconditionError);
}

TEST_CASE("average precision") {
  // Relevant at ranks 1 and 3 of 2 relevant: (1 + 2/3) / 2.
  CHECK(average_precision({{true, false, true}, 2}) == doctest::Approx(5.0 / 6));
  // A relevant item never retrieved still counts in the denominator.
  CHECK(average_precision({{true}, 2}) == doctest::Approx(0.5));
  CHECK(average_precision({{false}, 0}) == 0.0);
  MapResult m = mean_average_precision({{{true}, 1}, {{false}, 0}, {{false, true}, 1}});
  CHECK(m.evaluated == 2);
  CHECK(m.excluded_no_gold == 1);
  CHECK(m.map == doctest::Approx(0.75));
}

TEST_CASE("rank_relevance breaks ties by ref") {
  RankedRelevance r = rank_relevance({{ref(2), 0.5}, {ref(1), 0.5}, {ref(3), 0.9}}, {ref(1)});
  CHECK(r.relevant == std::vector<bool>{false, true, false});
  CHECK(r.total_relevant == 1);
}

TEST_CASE("generation metric examples") {
  CHECK(rouge_n("the cat sat", "the cat ran", 1) == doctest::Approx(2.0 / 3));
  CHECK(rouge_n("the cat sat", "the cat ran", 2) == doctest::Approx(0.5));
  CHECK(rouge_l("a b c d", "a c d") == doctest::Approx(2 * 0.75 * 1.0 / 1.75));
  CHECK(rouge_n("", "a", 1) == 0.0);
  CHECK_THROWS_AS(rouge_n("a", "a", 0), PreconditionError);
  CHECK_THROWS_AS(corpus_bleu(std::vector<std::string>{}, {}), PreconditionError);
  CHECK_THROWS_AS(corpus_bleu(std::vector<std::string>{"a"}, {}), PreconditionError);

  // Stem matches count: "rooms"/"room".
  MeteorStats s = meteor_stats({"clean", "rooms"}, {"clean", "room"});
  CHECK(s.matches == 2);
  CHECK(s.chunks == 1);
  // Crossed order gives two chunks.
  s = meteor_stats({"b", "a"}, {"a", "b"});
  CHECK(s.matches == 2);
  CHECK(s.chunks == 2);
  CHECK(s.score == doctest::Approx(1.0 - 0.5));
}

TEST_CASE("BLEU brevity penalty and smoothing") {
  using T = std::vector<std::string>;
  // One unigram match out of one, no higher-order n-grams.
  double b = corpus_bleu(std::vector<T>{{"a"}}, std::vector<T>{{"a", "b"}});
  CHECK(b == doctest::Approx(std::exp(1.0 - 2.0) * std::pow(1.0 * 0.1 * 0.1 * 0.1, 0.25)));
}

TEST_CASE("metrics agree with brute-force oracles") {
  for (const auto& [name, diff] : testing::metric_oracle_suite(400, 1234)) {
    CHECK_MESSAGE(diff <= 1e-9, name);
  }
  CHECK(testing::metric_edge_case_failures().empty());
}

TEST_CASE("score_generation and the report format") {
  GenerationScores g = score_generation({"the wifi is good", ""}, {"the wifi is good", "fine"});
  CHECK(g.pairs == 2);
  CHECK(g.rouge1 == doctest::Approx(0.5));
  CHECK(g.avg_response_length == doctest::Approx(2.0));

  EvalReport report;
  report.generation = g;
  report.map = MapResult{0.5, 2, 0};
  auto doc = nlohmann::ordered_json::parse(to_json(report));
  CHECK(doc.contains("generation"));
  CHECK(doc.contains("map"));
  CHECK_FALSE(doc.contains("detection"));
}
