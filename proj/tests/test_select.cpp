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
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "sktod/error.hpp"
#include "sktod/select.hpp"
#include "sktod/text.hpp"
#include "synthetic.hpp"

using namespace sktod;

namespace {

KnowledgeBase tiny_kb() {
  KnowledgeBase kb;
  kb.add_entity({Domain::kHotel, "1", "Alpha"});
  kb.add_entity({Domain::kHotel, "2", "Beta"});
  kb.add_review({Domain::kHotel, "1"}, "0",
                {{"0", "The wifi was fast, very fast."}, {"1", "Great breakfast."}});
  kb.add_review({Domain::kHotel, "2"}, "0",
                {{"0", "Slow wifi and a cold breakfast."}, {"1", "The staff were kind."}});
  return kb;
}

DialogueContext ask(const std::string& text) {
  DialogueContext c;
  c.instance_id = "q";
  c.utterances.push_back({Speaker::kUser, "Hello there.", 0});
  c.utterances.push_back({Speaker::kSystem, "Hi.", 1});
  c.utterances.push_back({Speaker::kUser, text, 2});
  return c;
}

// Independent TF-IDF / BM25 from raw term lists.
struct Oracle {
  std::vector<std::vector<std::string>> docs;
  std::map<std::string, int> df;
  double avg = 0;

  explicit Oracle(const KnowledgeBase& kb) {
    for (const auto& s : kb.snippets()) {
      std::vector<std::string> terms;
      for (auto& t : tokenize(s.text)) {
        if (!is_punctuation_token(t)) terms.push_back(t);
      }
      std::set<std::string> unique(terms.begin(), terms.end());
      for (const auto& t : unique) ++df[t];
      avg += double(terms.size());
      docs.push_back(terms);
    }
    avg /= double(docs.size());
  }

  static std::map<std::string, int> counts(const std::vector<std::string>& terms) {
    std::map<std::string, int> c;
    for (const auto& t : terms) ++c[t];
    return c;
  }

  double tfidf(const std::vector<std::string>& query, std::size_t d) const {
    double n = double(docs.size());
    auto idf = [&](const std::string& t) { return std::log((n + 1) / (df.at(t) + 1)) + 1; };
    auto q = counts(query), dc = counts(docs[d]);
    double dot = 0, qq = 0, dd = 0;
    for (auto& [t, c] : q) {
      if (!df.count(t)) continue;
      qq += std::pow(c * idf(t), 2);
      if (dc.count(t)) dot += c * idf(t) * dc[t] * idf(t);
    }
    for (auto& [t, c] : dc) dd += std::pow(c * idf(t), 2);
    if (qq == 0 || dd == 0) return 0;
    return dot / std::sqrt(qq * dd);
  }

  double bm25(const std::vector<std::string>& query, std::size_t d) const {
    double n = double(docs.size());
    auto dc = counts(docs[d]);
    double len = double(docs[d].size()), score = 0;
    for (auto& [t, unused] : counts(query)) {
      if (!dc.count(t)) continue;
      double f = dc[t], dft = df.at(t);
      double idf = std::log(1 + (n - dft + 0.5) / (dft + 0.5));
      score += idf * f * 2.2 / (f + 1.2 * (1 - 0.75 + 0.75 * len / avg));
    }
    return score;
  }
};

}  // namespace

TEST_CASE("index terms drop punctuation only") {
  CHECK(index_terms("Is the wifi good?") == std::vector<std::string>{"is", "the", "wifi", "good"});
  CHECK(query_terms(ask("Wifi, please!")) == std::vector<std::string>{"wifi", "please"});
}

TEST_CASE("index statistics") {
  KnowledgeBase kb = tiny_kb();
  LexicalIndex index = LexicalIndex::build(kb);
  CHECK(index.document_count() == 4);
  CHECK(index.document_frequency("wifi") == 2);
  CHECK(index.document_frequency("fast") == 1);
  CHECK(index.document_frequency("nothing") == 0);
  CHECK(index.document_length(0) == 6);
  CHECK(index.average_length() == doctest::Approx((6 + 2 + 6 + 4) / 4.0));
}

TEST_CASE("scores match the oracle formulas") {
  KnowledgeBase kb = tiny_kb();
  LexicalIndex index = LexicalIndex::build(kb);
  Oracle oracle(kb);
  for (std::string q : {"Is the wifi fast?", "breakfast breakfast wifi", "kind staff", "zebra",
                        "the the the"}) {
    auto terms = index_terms(q);
    for (std::size_t d = 0; d < kb.snippet_count(); ++d) {
      CHECK(score_tfidf(index, ask(q), d) == doctest::Approx(oracle.tfidf(terms, d)).epsilon(1e-12));
      CHECK(score_bm25(index, ask(q), d) == doctest::Approx(oracle.bm25(terms, d)).epsilon(1e-12));
    }
  }
}

TEST_CASE("tfidf is a cosine") {
  KnowledgeBase kb = testing::synthetic_kb();
  LexicalIndex index = LexicalIndex::build(kb);
  for (std::size_t d = 0; d < kb.snippet_count(); ++d) {
    const std::string& text = kb.snippets()[d].text;
    CHECK(score_tfidf(index, ask(text), d) == doctest::Approx(1.0));
    double s = score_tfidf(index, ask("water pressure at the hotel"), d);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0 + 1e-12);
  }
}

TEST_CASE("scorer kinds") {
  CHECK(parse_scorer_kind("bm25") == ScorerKind::kBm25);
  CHECK(to_string(ScorerKind::kTfidf) == "tfidf");
  CHECK_THROWS_AS(parse_scorer_kind("dense"), UsageError);
}

TEST_CASE("candidates and selection") {
  KnowledgeBase kb = tiny_kb();
  LexicalIndex index = LexicalIndex::build(kb);
  auto candidates = candidate_snippets(kb, {{Domain::kHotel, "2"}, {Domain::kHotel, "1"},
                                            {Domain::kHotel, "9"}});
  CHECK(candidates == std::vector<std::size_t>{0, 1, 2, 3});
  auto scorer = make_tfidf_scorer(index);
  CHECK(scorer->kind() == ScorerKind::kTfidf);
  auto scored = score_candidates(*scorer, kb, ask("how is the wifi"), candidates);
  sort_by_score(scored);
  REQUIRE(scored.size() == 4);
  for (std::size_t i = 1; i < scored.size(); ++i) CHECK(scored[i - 1].score >= scored[i].score);

  SnippetSelection all = select_snippets(scored, -1.0, "q");
  CHECK(all.selected.size() == 4);
  SnippetSelection some = select_snippets(scored, scored[1].score, "q");
  CHECK(some.selected.size() >= 2);
  for (const auto& s : some.selected) CHECK(s.score >= scored[1].score);
  RefSet refs = some.refs();
  CHECK(std::is_sorted(refs.begin(), refs.end()));
  CHECK(select_snippets(scored, 2.0).selected.empty());
}

TEST_CASE("threshold grids") {
  CHECK(logit_grid().size() == 201);
  CHECK(logit_grid().front() == doctest::Approx(-5.0));
  CHECK(logit_grid().back() == doctest::Approx(5.0));

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<ScoredSnippet>> scored(1 + uniform_index(rng, 4));
    std::vector<double> pooled;
    for (auto& instance : scored) {
      std::size_t n = uniform_index(rng, 30);
      for (std::size_t i = 0; i < n; ++i) {
        double s = double(uniform_index(rng, 20)) / 10.0;
        instance.push_back({{Domain::kHotel, "1", "0", std::to_string(i)}, s});
        pooled.push_back(s);
      }
    }
    auto grid = quantile_grid(scored);
    if (pooled.empty()) {
      CHECK(grid.empty());
      continue;
    }
    CHECK(grid.size() <= 201);
    CHECK(std::is_sorted(grid.begin(), grid.end()));
    CHECK(std::adjacent_find(grid.begin(), grid.end()) == grid.end());
    CHECK(grid.front() == *std::min_element(pooled.begin(), pooled.end()));
    CHECK(grid.back() == *std::max_element(pooled.begin(), pooled.end()));
    for (double g : grid) CHECK(std::find(pooled.begin(), pooled.end(), g) != pooled.end());
  }
}

TEST_CASE("calibration maximizes instance F1 with ties to the lower threshold") {
  SnippetRef a{Domain::kHotel, "1", "0", "0"}, b{Domain::kHotel, "1", "0", "1"},
      c{Domain::kHotel, "1", "0", "2"};
  std::vector<std::vector<ScoredSnippet>> scored = {{{a, 0.9}, {b, 0.5}, {c, 0.1}}};
  std::vector<RefSet> gold = {{a, b}};
  ThresholdCalibration cal = calibrate_threshold(scored, gold, {0.1, 0.5, 0.9});
  CHECK(cal.threshold == 0.5);
  CHECK(cal.f1 == doctest::Approx(1.0));
  CHECK(cal.grid_f1.size() == 3);

  // 0.3 and 0.5 select the same set; the lower one wins.
  cal = calibrate_threshold(scored, gold, {0.5, 0.3, 0.9});
  CHECK(cal.threshold == 0.3);

  CHECK_THROWS_AS(calibrate_threshold(scored, {{}}, {0.5}), PreconditionError);
  CHECK_THROWS_AS(calibrate_threshold(scored, {}, {0.5}), PreconditionError);
}

TEST_CASE("training pairs are balanced and reproducible") {
  KnowledgeBase kb = testing::synthetic_kb();
  Split split = testing::synthetic_split(kb, SplitName::kTrain, 80, 3);
  auto pairs = export_training_pairs(split, kb, 42);
  auto again = export_training_pairs(split, kb, 42);
  auto other = export_training_pairs(split, kb, 43);
  REQUIRE(pairs.size() == again.size());
  bool differs = pairs.size() != other.size();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs[i].ref == again[i].ref);
    if (i < other.size() && !(pairs[i].ref == other[i].ref)) differs = true;
  }
  CHECK(differs);

  std::map<std::string, std::pair<int, int>> per_instance;
  for (const auto& p : pairs) {
    auto& [pos, neg] = per_instance[p.instance_id];
    (p.relevant ? pos : neg)++;
  }
  for (const auto& instance : split.instances) {
    if (!instance.label.target) continue;
    const auto& [pos, neg] = per_instance[instance.context.instance_id];
    CHECK(pos == int(instance.label.gold_snippets.size()));
    CHECK(neg <= pos);
  }
  for (const auto& p : pairs) {
    if (p.relevant) continue;
    const auto& label = split.instances[std::stoul(p.instance_id.substr(6))].label;
    CHECK_FALSE(std::binary_search(label.gold_snippets.begin(), label.gold_snippets.end(), p.ref));
  }

  std::string jsonl = training_pairs_to_jsonl(pairs, kb);
  auto first = nlohmann::json::parse(jsonl.substr(0, jsonl.find('\n')));
  CHECK(first.contains("snippet"));
  CHECK(first["label"] == 1);
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == long(pairs.size()));
}
