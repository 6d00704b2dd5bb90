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

#include <random>

#include "doctest.h"
#include "sktod/error.hpp"
#include "sktod/text.hpp"
#include "sktod/track.hpp"
#include "synthetic.hpp"

using namespace sktod;

namespace {

DialogueContext dialogue(std::vector<std::string> texts) {
  DialogueContext c;
  c.instance_id = "t";
  for (std::size_t i = 0; i < texts.size(); ++i) {
    // Alternate so that the last turn is the user's.
    Speaker s = (texts.size() - 1 - i) % 2 == 0 ? Speaker::kUser : Speaker::kSystem;
    c.utterances.push_back({s, texts[i], int(i)});
  }
  return c;
}

const EntityKey kCityroomz{Domain::kHotel, "11"};
const EntityKey kGonville{Domain::kHotel, "12"};
const EntityKey kAcorn{Domain::kHotel, "14"};

// Character LCS by exhaustive recursion, for short strings only.
std::size_t lcs_oracle(const std::u32string& a, const std::u32string& b, std::size_t i = 0,
                       std::size_t j = 0) {
  if (i == a.size() || j == b.size()) return 0;
  if (a[i] == b[j]) return 1 + lcs_oracle(a, b, i + 1, j + 1);
  return std::max(lcs_oracle(a, b, i + 1, j), lcs_oracle(a, b, i, j + 1));
}

}  // namespace

TEST_CASE("name normalization") {
  NormalizedName n = normalize_name("The Gonville Hotel");
  CHECK(n.normalized == "gonville hotel");
  CHECK(n.variants.front() == "gonville hotel");
  CHECK(std::find(n.variants.begin(), n.variants.end(), "gonville") != n.variants.end());

  NormalizedName b = normalize_name("A & B Guest House");
  CHECK(b.normalized == "a and b guest house");
  CHECK(std::find(b.variants.begin(), b.variants.end(), "a and b") != b.variants.end());

  CHECK(normalize_name("Cityroomz's").normalized == "cityroomz");
  CHECK(normalize_utterance("Is Cityroomz's wifi good?") ==
        std::vector<std::string>{"is", "cityroomz", "wifi", "good"});
}

TEST_CASE("match score examples") {
  CHECK(ngram_match_score("gonville", "gonville") == 1.0);
  CHECK(ngram_match_score("abcd", "abed") == doctest::Approx(0.75));
  CHECK(ngram_match_score("abc", "xyz") == 0.0);
  CHECK_THROWS_AS(ngram_match_score("", "a"), PreconditionError);
}

TEST_CASE("match score properties") {
  std::mt19937_64 rng(9);
  const std::string alphabet = "abcde ";
  for (int i = 0; i < 500; ++i) {
    std::string a, b;
    std::size_t na = 1 + uniform_index(rng, 8), nb = 1 + uniform_index(rng, 8);
    for (std::size_t k = 0; k < na; ++k) a += alphabet[uniform_index(rng, alphabet.size())];
    for (std::size_t k = 0; k < nb; ++k) b += alphabet[uniform_index(rng, alphabet.size())];
    double s = ngram_match_score(a, b);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(s == ngram_match_score(b, a));
    CHECK((s == 1.0) == (a == b));
    auto ca = to_code_points(a), cb = to_code_points(b);
    CHECK(s == doctest::Approx(2.0 * double(lcs_oracle(ca, cb)) / double(ca.size() + cb.size())));
  }
}

TEST_CASE("tracking examples") {
  KnowledgeBase kb = testing::synthetic_kb();
  EntityTracker tracker(kb);

  TrackResult two = tracker.track(dialogue({"Is the wifi better at Cityroomz or the Gonville?"}));
  CHECK(two.entities == std::vector<EntityKey>{kCityroomz, kGonville});
  CHECK(two.fallback == TrackingFallback::kNone);

  CHECK(tracker.track(dialogue({"Is the wifi good?"})).entities.empty());

  TrackResult from_system = tracker.track(
      dialogue({"I need a hotel.", "Cityroomz is central.", "Is the wifi good there?"}));
  CHECK(from_system.entities == std::vector<EntityKey>{kCityroomz});
  CHECK(from_system.turn_index == 1);

  TrackResult typo = tracker.track(dialogue({"How is the breakfast at Acorn Guest Hose?"}), 0.8);
  CHECK(typo.entities == std::vector<EntityKey>{kAcorn});
}

TEST_CASE("later turns dominate") {
  KnowledgeBase kb = testing::synthetic_kb();
  EntityTracker tracker(kb);
  DialogueContext c = dialogue({"Tell me about Cityroomz.", "Cityroomz is central.",
                                "What about Gonville Hotel?"});
  CHECK(tracker.track(c).entities == std::vector<EntityKey>{kGonville});
  c.utterances.push_back({Speaker::kSystem, "It has parking.", 3});
  c.utterances.push_back({Speaker::kUser, "And Acorn Guest House?", 4});
  CHECK(tracker.track(c).entities == std::vector<EntityKey>{kAcorn});
  CHECK(tracker.first_mention_order(c) ==
        std::vector<EntityKey>{kCityroomz, kGonville, kAcorn});
}

TEST_CASE("tracking output is a deterministic subset of the knowledge base") {
  KnowledgeBase kb = testing::synthetic_kb();
  EntityTracker tracker(kb);
  Split split = testing::synthetic_split(kb, SplitName::kTest, 100, 5);
  for (const auto& instance : split.instances) {
    TrackResult a = tracker.track(instance.context);
    TrackResult b = tracker.track(instance.context);
    CHECK(a.entities == b.entities);
    for (const auto& e : a.entities) CHECK(kb.find_entity(e) != KnowledgeBase::npos);
  }
}

TEST_CASE("fallback chain") {
  KnowledgeBase kb = testing::synthetic_kb();
  EntityTracker tracker(kb);
  TrackResult relaxed = tracker.track_with_fallback(dialogue({"Is Acorm Guest Hose quiet?"}));
  CHECK(relaxed.fallback == TrackingFallback::kRelaxedThreshold);
  CHECK(relaxed.entities == std::vector<EntityKey>{kAcorn});

  TrackResult domain = tracker.track_with_fallback(dialogue({"Is the breakfast good?"}),
                                                   Domain::kRestaurant);
  CHECK(domain.fallback == TrackingFallback::kDomain);
  CHECK(domain.entities.size() == 4);
  for (const auto& e : domain.entities) CHECK(e.domain == Domain::kRestaurant);

  TrackResult guessed = tracker.track_with_fallback(dialogue({"Is the hotel wifi good?"}));
  CHECK(guessed.fallback == TrackingFallback::kDomain);
  CHECK(guessed.entities.size() == 6);

  TrackResult all = tracker.track_with_fallback(dialogue({"Is it good?"}));
  CHECK(all.fallback == TrackingFallback::kAll);
  CHECK(all.entities.size() == kb.entity_count());
}

TEST_CASE("tracking evaluation") {
  std::vector<std::vector<EntityKey>> gold = {{kCityroomz}, {kGonville}};
  TrackingReport perfect = evaluate_tracking(gold, gold);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.missing_rate == 0.0);
  CHECK(perfect.spurious_rate == 0.0);

  std::vector<std::vector<EntityKey>> pred = {{kCityroomz}, {kGonville, kAcorn}};
  TrackingReport one_spurious = evaluate_tracking(pred, gold);
  CHECK(one_spurious.accuracy == 0.5);
  CHECK(one_spurious.spurious_rate == 0.5);
  CHECK(one_spurious.missing_rate == 0.0);

  TrackingReport missing = evaluate_tracking({{}, {kGonville}}, gold);
  CHECK(missing.missing_rate == 0.5);
}
