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

#include "synthetic.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <random>
#include <stdexcept>
#include <vector>

#include "sktod/text.hpp"

namespace sktod::testing {
namespace {

struct AspectText {
  std::string aspect;
  std::vector<std::string> positive;
  std::vector<std::string> negative;
  std::vector<std::string> neutral;
};

const std::vector<AspectText>& hotel_aspects() {
  static const std::vector<AspectText> aspects = {
      {"wifi",
       {"The wifi was fast and reliable.", "Great wifi in every room.",
        "We loved the free wifi, it never dropped."},
       {"The wifi was terrible and kept dropping.", "Wifi was slow and unreliable."},
       {"The wifi was okay."}},
      {"water pressure",
       {"The water pressure in the shower was excellent.", "Great water pressure."},
       {"The water pressure was awful.", "Weak water pressure in the shower."},
       {"Water pressure was average."}},
      {"breakfast",
       {"The breakfast was delicious.", "Lovely breakfast with fresh fruit."},
       {"Breakfast was cold and disappointing.", "The breakfast was poor."},
       {"Breakfast was fine, nothing special."}},
      {"staff",
       {"The staff were friendly and helpful.", "Wonderful staff at the front desk."},
       {"The staff were rude.", "Unhelpful staff at check in."},
       {"The staff were okay."}},
      {"parking",
       {"Parking was easy and free.", "Convenient parking right outside."},
       {"Parking was expensive and hard to find.", "The parking was a nightmare."},
       {"Parking was average."}},
      {"bed",
       {"The bed was very comfortable.", "Comfortable bed and soft pillows."},
       {"The bed was uncomfortable.", "Lumpy bed, we slept badly."},
       {"The bed was fine."}},
  };
  return aspects;
}

const std::vector<AspectText>& restaurant_aspects() {
  static const std::vector<AspectText> aspects = {
      {"food",
       {"The food was delicious.", "Amazing food and generous portions."},
       {"The food was bland and overcooked.", "Terrible food."},
       {"The food was okay."}},
      {"service",
       {"Friendly and quick service.", "The service was excellent."},
       {"The service was slow and rude.", "Poor service all evening."},
       {"Service was average."}},
      {"price",
       {"Great price for what you get.", "The price was very reasonable."},
       {"The price was too high.", "Overpriced, the price was ridiculous."},
       {"The price was fair."}},
      {"atmosphere",
       {"Lovely atmosphere inside.", "The atmosphere was cozy and relaxed."},
       {"The atmosphere was noisy and cramped.", "Unpleasant atmosphere."},
       {"The atmosphere was fine."}},
  };
  return aspects;
}

struct EntityEntry {
  Domain domain;
  const char* id;
  const char* name;
};

constexpr std::array<EntityEntry, 10> kEntities = {{
    {Domain::kHotel, "11", "Cityroomz"},
    {Domain::kHotel, "12", "Gonville Hotel"},
    {Domain::kHotel, "13", "A and B Guest House"},
    {Domain::kHotel, "14", "Acorn Guest House"},
    {Domain::kHotel, "15", "Alexander Bed and Breakfast"},
    {Domain::kHotel, "16", "Huntingdon Marriott Hotel"},
    {Domain::kRestaurant, "21", "Pizza Hut City Centre"},
    {Domain::kRestaurant, "22", "The Golden Curry"},
    {Domain::kRestaurant, "23", "Midsummer House Restaurant"},
    {Domain::kRestaurant, "24", "Curry Garden"},
}};

template <typename T>
const T& pick(const std::vector<T>& items, std::mt19937_64& rng) {
  return items[uniform_index(rng, items.size())];
}

const std::vector<AspectText>& aspects_of(Domain domain) {
  return domain == Domain::kHotel ? hotel_aspects() : restaurant_aspects();
}

// Aspect covered by a snippet; every synthetic sentence names exactly one.
std::string aspect_of_sentence(Domain domain, const std::string& text) {
  std::string lower = to_lower(text);
  for (const auto& a : aspects_of(domain)) {
    if (lower.find(a.aspect) != std::string::npos) return a.aspect;
  }
  return "";
}

std::vector<SnippetRef> snippets_on(const KnowledgeBase& kb, const EntityKey& key,
                                    const std::string& aspect) {
  std::vector<SnippetRef> refs;
  for (std::size_t i : kb.entity_snippets(kb.find_entity(key))) {
    const auto& s = kb.snippets()[i];
    if (aspect_of_sentence(key.domain, s.text) == aspect) refs.push_back(s.ref);
  }
  return refs;
}

std::vector<std::string> aspects_present(const KnowledgeBase& kb, const EntityKey& key) {
  std::vector<std::string> out;
  for (const auto& a : aspects_of(key.domain)) {
    if (!snippets_on(kb, key, a.aspect).empty()) out.push_back(a.aspect);
  }
  return out;
}

const std::vector<std::string> kDays = {"monday", "tuesday", "friday", "saturday", "sunday"};

}  // namespace

KnowledgeBase synthetic_kb() {
  KnowledgeBase kb;
  std::mt19937_64 rng(20240611);
  for (const auto& entry : kEntities) {
    kb.add_entity({entry.domain, entry.id, entry.name});
    EntityKey key{entry.domain, entry.id};
    bool cityroomz = std::string(entry.id) == "11";

    std::vector<std::string> sentences;
    for (const auto& a : aspects_of(entry.domain)) {
      if (cityroomz && a.aspect == "water pressure") {
        sentences.push_back("The water pressure was awful.");
        sentences.push_back("Weak water pressure in the shower.");
        sentences.push_back("Terrible water pressure, the shower was barely a trickle.");
        sentences.push_back("The water pressure was really poor.");
        sentences.push_back("Disappointing water pressure in our room.");
        continue;
      }
      std::size_t n = 1 + uniform_index(rng, 3);
      for (std::size_t k = 0; k < n; ++k) {
        std::uint64_t roll = uniform_index(rng, 10);
        const auto& pool = roll < 5 ? a.positive : roll < 8 ? a.negative : a.neutral;
        sentences.push_back(pick(pool, rng));
      }
    }
    stable_shuffle(sentences, rng);
    std::size_t review = 0;
    for (std::size_t i = 0; i < sentences.size(); ++review) {
      std::size_t len = std::min<std::size_t>(2 + uniform_index(rng, 3), sentences.size() - i);
      std::vector<std::pair<std::string, std::string>> review_sentences;
      for (std::size_t j = 0; j < len; ++j) {
        review_sentences.emplace_back(std::to_string(j), sentences[i + j]);
      }
      kb.add_review(key, std::to_string(review), review_sentences);
      i += len;
    }
  }
  return kb;
}

Split synthetic_split(const KnowledgeBase& kb, SplitName name, std::size_t instances,
                      std::uint64_t seed) {
  Split split;
  split.name = name;
  std::mt19937_64 rng(seed ^ fnv1a(to_string(name)));
  const auto& entities = kb.entities();

  auto add_turn = [](DialogueContext& c, Speaker speaker, std::string text) {
    c.utterances.push_back({speaker, std::move(text), static_cast<int>(c.utterances.size())});
  };

  for (std::size_t i = 0; i < instances; ++i) {
    Instance instance;
    DialogueContext& c = instance.context;
    c.instance_id = std::string(to_string(name)) + "-" + std::to_string(i);
    const Entity& e = pick(entities, rng);
    bool hotel = e.domain == Domain::kHotel;
    add_turn(c, Speaker::kUser,
             hotel ? "I am looking for a place to stay in the centre."
                   : "I would like somewhere to eat in the centre.");
    add_turn(c, Speaker::kSystem, "How about " + e.name + "? It is in the centre.");

    std::uint64_t kind = uniform_index(rng, 10);
    if (kind < 5) {
      auto aspects = aspects_present(kb, e.key());
      std::string aspect = pick(aspects, rng);
      std::uint64_t form = uniform_index(rng, 3);
      if (form == 0) {
        add_turn(c, Speaker::kUser, "How is the " + aspect + " at " + e.name + "?");
      } else if (form == 1) {
        add_turn(c, Speaker::kUser, "Does " + e.name + " have good " + aspect + "?");
      } else {
        add_turn(c, Speaker::kUser, "Sounds good. Is the " + aspect + " there any good?");
      }
      instance.label.target = true;
      instance.label.gold_snippets = snippets_on(kb, e.key(), aspect);
      instance.label.reference_response =
          "Guests had mixed things to say about the " + aspect + " at " + e.name +
          ". Would you like to book it?";
    } else if (kind < 6) {
      // Two entities of the same domain sharing an aspect.
      std::vector<const Entity*> same;
      for (const auto& other : entities) {
        if (other.domain == e.domain && other.entity_id != e.entity_id) same.push_back(&other);
      }
      const Entity& f = *pick(same, rng);
      auto a1 = aspects_present(kb, e.key());
      auto a2 = aspects_present(kb, f.key());
      std::vector<std::string> shared;
      for (const auto& a : a1) {
        if (std::find(a2.begin(), a2.end(), a) != a2.end()) shared.push_back(a);
      }
      std::string aspect = pick(shared, rng);
      add_turn(c, Speaker::kUser,
               "Which has better " + aspect + ", " + e.name + " or " + f.name + "?");
      instance.label.target = true;
      auto g1 = snippets_on(kb, e.key(), aspect);
      auto g2 = snippets_on(kb, f.key(), aspect);
      g1.insert(g1.end(), g2.begin(), g2.end());
      std::sort(g1.begin(), g1.end());
      instance.label.gold_snippets = g1;
      instance.label.reference_response = "Both places get comments on the " + aspect +
                                          ". Is there anything else I can help with?";
    } else {
      std::string day = pick(kDays, rng);
      std::string people = std::to_string(1 + uniform_index(rng, 6));
      std::uint64_t form = uniform_index(rng, 3);
      if (hotel) {
        if (form == 0) {
          add_turn(c, Speaker::kUser, "Please book it for " + people + " people starting " + day + ".");
        } else if (form == 1) {
          add_turn(c, Speaker::kUser, "Can you reserve " + e.name + " for " + people + " nights?");
        } else {
          add_turn(c, Speaker::kUser, "What is the phone number and postcode?");
        }
      } else {
        if (form == 0) {
          add_turn(c, Speaker::kUser, "I need a table for " + people + " on " + day + " at 18:00.");
        } else if (form == 1) {
          add_turn(c, Speaker::kUser, "Can you book " + e.name + " for " + people + " people?");
        } else {
          add_turn(c, Speaker::kUser, "What is the address of that restaurant?");
        }
      }
    }
    split.instances.push_back(std::move(instance));
  }
  return split;
}

void write_synthetic_dataset(const std::filesystem::path& dir, std::uint64_t seed) {
  KnowledgeBase kb = synthetic_kb();
  write_knowledge_base(kb, dir);
  write_split(synthetic_split(kb, SplitName::kTrain, 240, seed), dir);
  write_split(synthetic_split(kb, SplitName::kVal, 60, seed), dir);
  write_split(synthetic_split(kb, SplitName::kTest, 80, seed), dir);
}

TempDir::TempDir(const std::string& prefix) {
  std::string pattern =
      (std::filesystem::temp_directory_path() / (prefix + "-XXXXXX")).string();
  if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace sktod::testing
