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

#include "sktod/text.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <array>
#include <stdexcept>

namespace sktod {
namespace {

constexpr char32_t kApostrophe = U'\'';

bool is_apostrophe(char32_t c) {
  return c == U'\'' || c == U'’' || c == U'ʼ';
}

bool is_word_char(char32_t c) {
  switch (u_charType(static_cast<UChar32>(c))) {
    case U_UPPERCASE_LETTER:
    case U_LOWERCASE_LETTER:
    case U_TITLECASE_LETTER:
    case U_MODIFIER_LETTER:
    case U_OTHER_LETTER:
    case U_DECIMAL_DIGIT_NUMBER:
    case U_LETTER_NUMBER:
    case U_OTHER_NUMBER:
    case U_NON_SPACING_MARK:
    case U_ENCLOSING_MARK:
    case U_COMBINING_SPACING_MARK:
      return true;
    default:
      return false;
  }
}

bool is_separator(char32_t c) {
  return u_isUWhiteSpace(static_cast<UChar32>(c)) ||
         u_iscntrl(static_cast<UChar32>(c)) || c == U'​' ||
         c == U'﻿';
}

void append_utf8(std::string& out, char32_t c) {
  std::array<char, 4> buf{};
  std::int32_t len = 0;
  UBool error = false;
  U8_APPEND(reinterpret_cast<std::uint8_t*>(buf.data()), len, 4,
            static_cast<UChar32>(c), error);
  if (error) {
    out += "\xEF\xBF\xBD";
    return;
  }
  out.append(buf.data(), static_cast<std::size_t>(len));
}

std::string encode(const std::u32string& cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t c : cps) append_utf8(out, c);
  return out;
}

bool is_clitic_suffix(std::u32string_view suffix) {
  return suffix == U"s" || suffix == U"re" || suffix == U"ve" ||
         suffix == U"ll" || suffix == U"d" || suffix == U"m";
}

// Splits a word with internal apostrophes into stem + clitics.
void emit_word(std::u32string word, std::vector<std::string>& out) {
  std::vector<std::u32string> clitics;
  while (true) {
    if (word.size() > 3 && word.ends_with(U"n't") &&
        is_word_char(word[word.size() - 4])) {
      clitics.push_back(U"n't");
      word.resize(word.size() - 3);
      continue;
    }
    auto apos = word.rfind(kApostrophe);
    if (apos != std::u32string::npos && apos > 0 &&
        is_clitic_suffix(std::u32string_view(word).substr(apos + 1))) {
      clitics.push_back(word.substr(apos));
      word.resize(apos);
      continue;
    }
    break;
  }
  out.push_back(encode(word));
  for (auto it = clitics.rbegin(); it != clitics.rend(); ++it) {
    out.push_back(encode(*it));
  }
}

}  // namespace

std::u32string to_code_points(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
  const auto length = static_cast<std::int32_t>(text.size());
  std::int32_t i = 0;
  while (i < length) {
    UChar32 c = 0;
    U8_NEXT(s, i, length, c);
    out.push_back(c < 0 ? U'�' : static_cast<char32_t>(c));
  }
  return out;
}

std::string to_lower(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t c : to_code_points(text)) {
    append_utf8(out, static_cast<char32_t>(u_tolower(static_cast<UChar32>(c))));
  }
  return out;
}

std::string trim(std::string_view text) {
  auto cps = to_code_points(text);
  std::size_t begin = 0;
  std::size_t end = cps.size();
  while (begin < end && is_separator(cps[begin])) ++begin;
  while (end > begin && is_separator(cps[end - 1])) --end;
  return encode(cps.substr(begin, end - begin));
}

std::vector<std::string> tokenize(std::string_view text) {
  std::u32string cps = to_code_points(text);
  for (char32_t& c : cps) {
    c = is_apostrophe(c)
            ? kApostrophe
            : static_cast<char32_t>(u_tolower(static_cast<UChar32>(c)));
  }

  std::vector<std::string> tokens;
  const std::size_t n = cps.size();
  std::size_t i = 0;
  while (i < n) {
    char32_t c = cps[i];
    if (is_separator(c)) {
      ++i;
      continue;
    }
    if (is_word_char(c)) {
      std::size_t j = i;
      while (j < n) {
        if (is_word_char(cps[j])) {
          ++j;
        } else if (cps[j] == kApostrophe && j + 1 < n &&
                   is_word_char(cps[j + 1])) {
          ++j;
        } else {
          break;
        }
      }
      emit_word(cps.substr(i, j - i), tokens);
      i = j;
      continue;
    }
    if (c == kApostrophe) {
      // Free-standing clitic such as the "'s" of "cityroomz 's".
      std::size_t j = i + 1;
      while (j < n && is_word_char(cps[j])) ++j;
      if (j > i + 1 &&
          is_clitic_suffix(std::u32string_view(cps).substr(i + 1, j - i - 1))) {
        tokens.push_back(encode(cps.substr(i, j - i)));
        i = j;
        continue;
      }
    }
    std::string punct;
    append_utf8(punct, c);
    tokens.push_back(std::move(punct));
    ++i;
  }
  return tokens;
}

std::string join(const std::vector<std::string>& tokens,
                 std::string_view separator) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += separator;
    out += tokens[i];
  }
  return out;
}

bool is_punctuation_token(std::string_view token) {
  for (char32_t c : to_code_points(token)) {
    if (is_word_char(c)) return false;
  }
  return !token.empty();
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
  std::uint64_t hash = seed;
  for (unsigned char byte : data) {
    hash ^= byte;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_index: empty range");
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    std::uint64_t x = rng();
    if (x >= threshold) return x % bound;
  }
}

}  // namespace sktod
