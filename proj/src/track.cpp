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

#include "sktod/track.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>

#include "sktod/error.hpp"
#include "sktod/text.hpp"

namespace sktod {
namespace {

bool is_clitic(std::string_view token) {
  return token == "n't" || (token.size() > 1 && token[0] == '\'');
}

std::vector<std::string> normalized_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (auto& token : tokenize(text)) {
    if (token == "&") {
      out.emplace_back("and");
    } else if (!is_punctuation_token(token) && !is_clitic(token)) {
      out.push_back(std::move(token));
    }
  }
  return out;
}

using Tokens = std::vector<std::string>;

const std::vector<Tokens>& type_suffixes() {
  static const std::vector<Tokens> kSuffixes = {
      {"bed", "and", "breakfast"}, {"guest", "house"}, {"guesthouse"},
      {"hotel"}, {"restaurant"}};
  return kSuffixes;
}

bool ends_with(const Tokens& tokens, const Tokens& suffix) {
  if (suffix.size() >= tokens.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), tokens.rbegin());
}

using Histogram = std::array<std::uint8_t, 64>;

Histogram histogram_of(std::u32string_view s) {
  Histogram h{};
  for (char32_t c : s) {
    auto& slot = h[static_cast<std::size_t>(c) & 63u];
    if (slot < 255) ++slot;
  }
  return h;
}

// Upper bound on LCS from character multiplicities.
std::size_t common_bound(const Histogram& a, const Histogram& b) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::min(a[i], b[i]);
  return total;
}

std::size_t lcs_length(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double ratio(std::u32string_view a, std::u32string_view b) {
  if (a.empty() || b.empty()) {
    throw PreconditionError("ngram_match_score needs non-empty strings");
  }
  return 2.0 * double(lcs_length(a, b)) / double(a.size() + b.size());
}

}  // namespace

std::vector<std::string> normalize_utterance(std::string_view text) {
  return normalized_tokens(text);
}

NormalizedName normalize_name(std::string_view name) {
  Tokens tokens = normalized_tokens(name);
  while (tokens.size() > 1 && tokens.front() == "the") {
    tokens.erase(tokens.begin());
  }
  NormalizedName out;
  out.original = std::string(name);
  out.normalized = join(tokens);
  out.token_count = static_cast<int>(tokens.size());
  out.variants.push_back(out.normalized);
  auto add_variant = [&](const Tokens& t) {
    std::string v = join(t);
    if (!v.empty() &&
        std::find(out.variants.begin(), out.variants.end(), v) ==
            out.variants.end()) {
      out.variants.push_back(std::move(v));
    }
  };
  for (const Tokens& suffix : type_suffixes()) {
    if (ends_with(tokens, suffix)) {
      add_variant(Tokens(tokens.begin(), tokens.end() - long(suffix.size())));
      break;
    }
  }
  if (tokens.size() > 1 && tokens.front() == "restaurant") {
    add_variant(Tokens(tokens.begin() + 1, tokens.end()));
  }
  return out;
}

double ngram_match_score(std::string_view a, std::string_view b) {
  return ratio(to_code_points(a), to_code_points(b));
}

double ngram_match_score(const std::vector<std::string>& a,
                         const std::vector<std::string>& b) {
  return ngram_match_score(join(a), join(b));
}

std::string_view to_string(TrackingFallback fallback) {
  switch (fallback) {
    case TrackingFallback::kNone: return "none";
    case TrackingFallback::kRelaxedThreshold: return "relaxed-threshold";
    case TrackingFallback::kDomain: return "domain";
    case TrackingFallback::kAll: return "all";
  }
  return "none";
}

struct EntityTracker::Variant {
  std::size_t entity = 0;
  std::size_t token_count = 0;
  std::u32string text;
  Histogram histogram{};
};

EntityTracker::~EntityTracker() = default;
EntityTracker::EntityTracker(EntityTracker&&) noexcept = default;
EntityTracker& EntityTracker::operator=(EntityTracker&&) noexcept = default;

EntityTracker::EntityTracker(const KnowledgeBase& kb) : kb_(&kb) {
  names_.reserve(kb.entity_count());
  for (std::size_t e = 0; e < kb.entity_count(); ++e) {
    names_.push_back(normalize_name(kb.entities()[e].name));
    for (const auto& v : names_.back().variants) {
      Variant variant;
      variant.entity = e;
      variant.token_count = static_cast<std::size_t>(
          std::count(v.begin(), v.end(), ' ') + 1);
      variant.text = to_code_points(v);
      variant.histogram = histogram_of(variant.text);
      variants_.push_back(std::move(variant));
    }
  }
}

std::vector<EntityMatch> EntityTracker::match_turn(std::string_view text,
                                                   int turn_index,
                                                   double threshold) const {
  const Tokens tokens = normalized_tokens(text);
  std::vector<std::u32string> token_cps;
  token_cps.reserve(tokens.size());
  for (const auto& t : tokens) token_cps.push_back(to_code_points(t));

  struct Window {
    std::u32string text;
    Histogram histogram;
  };
  std::map<std::size_t, std::vector<Window>> windows_by_n;
  auto windows_for = [&](std::size_t n) -> const std::vector<Window>& {
    auto it = windows_by_n.find(n);
    if (it != windows_by_n.end()) return it->second;
    std::vector<Window> windows;
    for (std::size_t i = 0; i + n <= token_cps.size(); ++i) {
      std::u32string w = token_cps[i];
      for (std::size_t k = 1; k < n; ++k) {
        w += U' ';
        w += token_cps[i + k];
      }
      Histogram h = histogram_of(w);
      windows.push_back({std::move(w), h});
    }
    return windows_by_n.emplace(n, std::move(windows)).first->second;
  };

  std::map<std::size_t, double> best;
  for (const Variant& v : variants_) {
    if (v.text.empty()) continue;
    for (const Window& w : windows_for(v.token_count)) {
      const double total = double(v.text.size() + w.text.size());
      const double length_bound =
          2.0 * double(std::min(v.text.size(), w.text.size())) / total;
      if (length_bound < threshold) continue;
      const double char_bound =
          2.0 * double(common_bound(v.histogram, w.histogram)) / total;
      if (char_bound < threshold) continue;
      const double score = ratio(v.text, w.text);
      if (score >= threshold) {
        double& slot = best[v.entity];
        slot = std::max(slot, score);
      }
    }
  }

  std::vector<EntityMatch> matches;
  for (const auto& [entity, score] : best) {
    matches.push_back({kb_->entities()[entity].key(), turn_index, score});
  }
  return matches;
}

TrackResult EntityTracker::track(const DialogueContext& context,
                                 double threshold) const {
  TrackResult result;
  for (auto it = context.utterances.rbegin(); it != context.utterances.rend();
       ++it) {
    auto matches = match_turn(it->text, it->turn_index, threshold);
    if (matches.empty()) continue;
    result.turn_index = it->turn_index;
    for (const auto& m : matches) result.entities.push_back(m.entity);
    result.matches = std::move(matches);
    break;
  }
  return result;
}

std::vector<EntityKey> EntityTracker::first_mention_order(
    const DialogueContext& context, double threshold) const {
  std::vector<EntityKey> order;
  for (const auto& u : context.utterances) {
    for (const auto& m : match_turn(u.text, u.turn_index, threshold)) {
      if (std::find(order.begin(), order.end(), m.entity) == order.end()) {
        order.push_back(m.entity);
      }
    }
  }
  return order;
}

std::optional<Domain> guess_domain(const DialogueContext& context) {
  static const std::set<std::string, std::less<>> kHotel = {
      "hotel", "hotels", "guesthouse", "guesthouses", "stay", "room", "rooms",
      "parking", "star", "stars", "wifi", "internet", "nights", "lodge",
      "shower", "bed", "beds", "check"};
  static const std::set<std::string, std::less<>> kRestaurant = {
      "restaurant", "restaurants", "food", "eat", "table", "cuisine", "dinner",
      "lunch", "menu", "dish", "dishes", "meal", "meals", "chef", "waiter",
      "dining", "italian", "chinese", "indian"};
  int hotel = 0, restaurant = 0;
  for (const auto& u : context.utterances) {
    for (const auto& token : tokenize(u.text)) {
      if (kHotel.contains(token)) ++hotel;
      if (kRestaurant.contains(token)) ++restaurant;
    }
  }
  if (hotel > restaurant) return Domain::kHotel;
  if (restaurant > hotel) return Domain::kRestaurant;
  return std::nullopt;
}

TrackResult EntityTracker::track_with_fallback(const DialogueContext& context,
                                               std::optional<Domain> domain,
                                               double relaxed_threshold) const {
  TrackResult result = track(context);
  if (!result.entities.empty()) return result;
  result = track(context, relaxed_threshold);
  if (!result.entities.empty()) {
    result.fallback = TrackingFallback::kRelaxedThreshold;
    return result;
  }
  if (!domain) domain = guess_domain(context);
  result.fallback = domain ? TrackingFallback::kDomain : TrackingFallback::kAll;
  for (const auto& entity : kb_->entities()) {
    if (!domain || entity.domain == *domain) {
      result.entities.push_back(entity.key());
    }
  }
  return result;
}

TrackResult track_entities(const DialogueContext& context,
                           const KnowledgeBase& kb) {
  return EntityTracker(kb).track(context);
}

TrackingReport evaluate_tracking(
    const std::vector<std::vector<EntityKey>>& predictions,
    const std::vector<std::vector<EntityKey>>& gold) {
  if (predictions.size() != gold.size()) {
    throw PreconditionError("evaluate_tracking: misaligned instances");
  }
  TrackingReport report;
  report.instances = gold.size();
  if (gold.empty()) return report;
  std::size_t exact = 0, missing = 0, spurious = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::set<EntityKey> p(predictions[i].begin(), predictions[i].end());
    std::set<EntityKey> g(gold[i].begin(), gold[i].end());
    if (p == g) ++exact;
    if (std::any_of(g.begin(), g.end(),
                    [&](const EntityKey& k) { return !p.contains(k); })) {
      ++missing;
    }
    if (std::any_of(p.begin(), p.end(),
                    [&](const EntityKey& k) { return !g.contains(k); })) {
      ++spurious;
    }
  }
  const auto n = double(gold.size());
  report.accuracy = double(exact) / n;
  report.missing_rate = double(missing) / n;
  report.spurious_rate = double(spurious) / n;
  return report;
}

}  // namespace sktod
