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

#include "doctest.h"
#include "sktod/text.hpp"

using namespace sktod;

using Tokens = std::vector<std::string>;

TEST_CASE("tokenize lowercases and splits punctuation") {
  CHECK(tokenize("Is the WiFi good?") == Tokens{"is", "the", "wifi", "good", "?"});
  CHECK(tokenize("  ") == Tokens{});
  CHECK(tokenize("a,b") == Tokens{"a", ",", "b"});
}

TEST_CASE("tokenize splits clitics") {
  CHECK(tokenize("Cityroomz's wifi") == Tokens{"cityroomz", "'s", "wifi"});
  CHECK(tokenize("It wasn't bad") == Tokens{"it", "was", "n't", "bad"});
  CHECK(tokenize("don't") == Tokens{"do", "n't"});
}

TEST_CASE("tokenize handles non-ASCII letters") {
  CHECK(tokenize("Café CRÈME") == Tokens{"café", "crème"});
  CHECK(tokenize("18:00") == Tokens{"18", ":", "00"});
}

TEST_CASE("tokenize is idempotent on its joined output") {
  std::mt19937_64 rng(5);
  const std::string alphabet = "abcXYZ '.,!?-:0123\xc3\xa9";
  for (int i = 0; i < 500; ++i) {
    std::string text;
    std::size_t n = uniform_index(rng, 30);
    for (std::size_t k = 0; k < n; ++k) text += alphabet[uniform_index(rng, alphabet.size())];
    Tokens once = tokenize(text);
    CHECK(tokenize(join(once)) == once);
  }
}

TEST_CASE("trim and to_lower") {
  CHECK(trim("  hi there \n") == "hi there");
  CHECK(trim("") == "");
  CHECK(to_lower("ÀBC") == "àbc");
}

TEST_CASE("punctuation tokens") {
  CHECK(is_punctuation_token("?"));
  CHECK(is_punctuation_token("."));
  CHECK_FALSE(is_punctuation_token("wifi"));
  CHECK_FALSE(is_punctuation_token("n't"));
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a("") == 14695981039346656037ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("uniform_index stays in range and is reproducible") {
  std::mt19937_64 a(11), b(11);
  for (std::uint64_t bound : {1ULL, 2ULL, 3ULL, 7ULL, 1000ULL}) {
    for (int i = 0; i < 200; ++i) {
      std::uint64_t x = uniform_index(a, bound);
      CHECK(x < bound);
      CHECK(x == uniform_index(b, bound));
    }
  }
}

TEST_CASE("stable_shuffle permutes") {
  std::vector<int> items(50);
  for (int i = 0; i < 50; ++i) items[i] = i;
  std::mt19937_64 rng(3);
  auto shuffled = items;
  stable_shuffle(shuffled, rng);
  CHECK(shuffled != items);
  std::sort(shuffled.begin(), shuffled.end());
  CHECK(shuffled == items);
}
