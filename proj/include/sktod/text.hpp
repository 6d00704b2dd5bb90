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

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace sktod {

// Shared tokenizer used by retrieval, tracking, tagging and all metrics.
//
// Rules: lowercase; maximal runs of letters/digits/marks form a word;
// apostrophes inside a word split English clitics off as their own token
// ("cityroomz's" -> "cityroomz" "'s", "don't" -> "do" "n't"); every other
// punctuation or symbol code point is a token of its own; whitespace and
// control characters separate tokens. Deterministic; idempotent on its own
// space-joined output.
std::vector<std::string> tokenize(std::string_view text);

// Space-joined tokens.
std::string join(const std::vector<std::string>& tokens,
                 std::string_view separator = " ");

// Trims ASCII and Unicode whitespace from both ends.
std::string trim(std::string_view text);

// Unicode lowercase of a UTF-8 string.
std::string to_lower(std::string_view text);

// Decodes UTF-8 into code points; invalid sequences become U+FFFD.
std::u32string to_code_points(std::string_view text);

bool is_punctuation_token(std::string_view token);

// 64-bit FNV-1a. Stable across platforms; used for feature hashing and
// per-instance seeding.
std::uint64_t fnv1a(std::string_view data,
                    std::uint64_t seed = 14695981039346656037ULL);

// Uniform integer in [0, bound) by rejection sampling on mt19937_64. Unlike
// std::uniform_int_distribution the sequence is identical on every standard
// library.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t bound);

// Fisher-Yates shuffle on top of uniform_index.
template <typename T>
void stable_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace sktod
