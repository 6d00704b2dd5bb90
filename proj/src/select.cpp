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

#include "sktod/select.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "json.hpp"
#include "json_util.hpp"
#include "sktod/error.hpp"
#include "sktod/external.hpp"
#include "sktod/text.hpp"

namespace sktod {

std::vector<std::string> index_terms(std::string_view text) {
  std::vector<std::string> tokens = tokenize(text);
  std::erase_if(tokens, [](const std::string& t) { return is_punctuation_token(t); });
  return tokens;
}

std::vector<std::string> query_terms(const DialogueContext& context) {
  return index_terms(context.last_user_turn().text);
}

LexicalIndex LexicalIndex::build(const KnowledgeBase& kb) {
  LexicalIndex index;
  index.docs_.reserve(kb.snippet_count());
  double total_length = 0.0;
  for (const auto& snippet : kb.snippets()) {
    std::map<std::uint32_t, std::uint32_t> counts;
    std::vector<std::string> terms = index_terms(snippet.text);
    for (const auto& term : terms) {
      auto [it, inserted] = index.vocabulary_.try_emplace(
          term, static_cast<std::uint32_t>(index.vocabulary_.size()));
      if (inserted) index.df_.push_back(0);
      ++counts[it->second];
    }
    Doc doc;
    doc.length = terms.size();
    doc.terms.assign(counts.begin(), counts.end());
    for (const auto& [term, tf] : doc.terms) ++index.df_[term];
    total_length += static_cast<double>(doc.length);
    index.docs_.push_back(std::move(doc));
  }
  if (!index.docs_.empty()) {
    index.avg_length_ = total_length / static_cast<double>(index.docs_.size());
  }
  for (auto& doc : index.docs_) {
    double sq = 0.0;
    for (const auto& [term, tf] : doc.terms) {
      double w = static_cast<double>(tf) * index.tfidf_idf(term);
      sq += w * w;
    }
    doc.tfidf_norm = std::sqrt(sq);
  }
  return index;
}

std::size_t LexicalIndex::document_frequency(std::string_view term) const {
  auto it = vocabulary_.find(std::string(term));
  return it == vocabulary_.end() ? 0 : df_[it->second];
}

double LexicalIndex::tfidf_idf(std::uint32_t term) const {
  double n = static_cast<double>(docs_.size());
  return std::log((n + 1.0) / (static_cast<double>(df_[term]) + 1.0)) + 1.0;
}

double LexicalIndex::bm25_idf(std::uint32_t term) const {
  double n = static_cast<double>(docs_.size());
  double df = static_cast<double>(df_[term]);
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

LexicalIndex::Query LexicalIndex::prepare(const std::vector<std::string>& terms) const {
  std::map<std::uint32_t, std::uint32_t> counts;
  for (const auto& term : terms) {
    auto it = vocabulary_.find(term);
    if (it != vocabulary_.end()) ++counts[it->second];
  }
  Query query;
  query.terms.assign(counts.begin(), counts.end());
  double sq = 0.0;
  for (const auto& [term, tf] : query.terms) {
    double w = static_cast<double>(tf) * tfidf_idf(term);
    sq += w * w;
  }
  query.tfidf_norm = std::sqrt(sq);
  return query;
}

std::uint32_t LexicalIndex::term_frequency(const Doc& doc, std::uint32_t term) const {
  auto it = std::lower_bound(
      doc.terms.begin(), doc.terms.end(), term,
      [](const auto& entry, std::uint32_t t) { return entry.first < t; });
  return it != doc.terms.end() && it->first == term ? it->second : 0;
}

double LexicalIndex::tfidf(const Query& query, std::size_t doc_index) const {
  const Doc& doc = docs_.at(doc_index);
  if (query.tfidf_norm == 0.0 || doc.tfidf_norm == 0.0) return 0.0;
  double dot = 0.0;
  for (const auto& [term, qtf] : query.terms) {
    std::uint32_t tf = term_frequency(doc, term);
    if (tf == 0) continue;
    double idf = tfidf_idf(term);
    dot += static_cast<double>(qtf) * idf * static_cast<double>(tf) * idf;
  }
  return std::min(1.0, dot / (query.tfidf_norm * doc.tfidf_norm));
}

double LexicalIndex::bm25(const Query& query, std::size_t doc_index) const {
  const Doc& doc = docs_.at(doc_index);
  double norm = kBm25K1 * (1.0 - kBm25B +
                           kBm25B * static_cast<double>(doc.length) /
                               (avg_length_ > 0.0 ? avg_length_ : 1.0));
  double score = 0.0;
  for (const auto& [term, qtf] : query.terms) {
    double tf = static_cast<double>(term_frequency(doc, term));
    if (tf == 0.0) continue;
    score += bm25_idf(term) * tf * (kBm25K1 + 1.0) / (tf + norm);
  }
  return score;
}

double score_tfidf(const LexicalIndex& index, const DialogueContext& context,
                   std::size_t snippet) {
  return index.tfidf(index.prepare(query_terms(context)), snippet);
}

double score_bm25(const LexicalIndex& index, const DialogueContext& context,
                  std::size_t snippet) {
  return index.bm25(index.prepare(query_terms(context)), snippet);
}

std::string_view to_string(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::kTfidf: return "tfidf";
    case ScorerKind::kBm25: return "bm25";
    case ScorerKind::kExternal: return "external";
  }
  return "unknown";
}

ScorerKind parse_scorer_kind(std::string_view text) {
  if (text == "tfidf") return ScorerKind::kTfidf;
  if (text == "bm25") return ScorerKind::kBm25;
  if (text == "external") return ScorerKind::kExternal;
  throw UsageError("unknown scorer '" + std::string(text) +
                   "' (expected tfidf, bm25 or external)");
}

namespace {

class LexicalScorer : public SnippetScorer {
 public:
  LexicalScorer(const LexicalIndex& index, ScorerKind kind)
      : index_(index), kind_(kind) {}

  ScorerKind kind() const override { return kind_; }

  std::vector<double> score(const DialogueContext& context,
                            const std::vector<std::size_t>& candidates) const override {
    LexicalIndex::Query query = index_.prepare(query_terms(context));
    std::vector<double> out;
    out.reserve(candidates.size());
    for (std::size_t c : candidates) {
      out.push_back(kind_ == ScorerKind::kTfidf ? index_.tfidf(query, c)
                                                : index_.bm25(query, c));
    }
    return out;
  }

 private:
  const LexicalIndex& index_;
  ScorerKind kind_;
};

double parse_logit(const nlohmann::json& reply) {
  if (!reply.is_object() || !reply.contains("logit") || !reply["logit"].is_number()) {
    throw ProtocolError("ks reply must be {\"logit\": <number>}");
  }
  double logit = reply["logit"].get<double>();
  if (!std::isfinite(logit)) throw ProtocolError("ks logit is not finite");
  return logit;
}

nlohmann::json ks_request(const DialogueContext& context, std::string_view snippet) {
  return {{"task", "ks"},
          {"context", context_to_json(context)},
          {"snippet", std::string(snippet)}};
}

class ExternalScorer : public SnippetScorer {
 public:
  ExternalScorer(const JsonServiceClient& client, const KnowledgeBase& kb)
      : client_(client), kb_(kb) {}

  ScorerKind kind() const override { return ScorerKind::kExternal; }

  std::vector<double> score(const DialogueContext& context,
                            const std::vector<std::size_t>& candidates) const override {
    std::vector<nlohmann::json> bodies;
    bodies.reserve(candidates.size());
    for (std::size_t c : candidates) {
      bodies.push_back(ks_request(context, kb_.snippets()[c].text));
    }
    std::vector<nlohmann::json> replies = client_.post_all(bodies);
    std::vector<double> out;
    out.reserve(replies.size());
    for (const auto& reply : replies) out.push_back(parse_logit(reply));
    return out;
  }

 private:
  const JsonServiceClient& client_;
  const KnowledgeBase& kb_;
};

}  // namespace

std::unique_ptr<SnippetScorer> make_tfidf_scorer(const LexicalIndex& index) {
  return std::make_unique<LexicalScorer>(index, ScorerKind::kTfidf);
}

std::unique_ptr<SnippetScorer> make_bm25_scorer(const LexicalIndex& index) {
  return std::make_unique<LexicalScorer>(index, ScorerKind::kBm25);
}

std::unique_ptr<SnippetScorer> make_external_scorer(const JsonServiceClient& client,
                                                    const KnowledgeBase& kb) {
  return std::make_unique<ExternalScorer>(client, kb);
}

double external_score(const JsonServiceClient& client, const DialogueContext& context,
                      std::string_view snippet) {
  return parse_logit(client.post(ks_request(context, snippet)));
}

std::vector<std::size_t> candidate_snippets(const KnowledgeBase& kb,
                                            const std::vector<EntityKey>& entities) {
  std::vector<std::size_t> entity_indices;
  for (const auto& key : entities) {
    std::size_t e = kb.find_entity(key);
    if (e != KnowledgeBase::npos) entity_indices.push_back(e);
  }
  std::sort(entity_indices.begin(), entity_indices.end());
  entity_indices.erase(std::unique(entity_indices.begin(), entity_indices.end()),
                       entity_indices.end());
  std::vector<std::size_t> out;
  for (std::size_t e : entity_indices) {
    std::vector<std::size_t> snippets = kb.entity_snippets(e);
    out.insert(out.end(), snippets.begin(), snippets.end());
  }
  return out;
}

std::vector<ScoredSnippet> score_candidates(const SnippetScorer& scorer,
                                            const KnowledgeBase& kb,
                                            const DialogueContext& context,
                                            const std::vector<std::size_t>& candidates) {
  std::vector<double> scores = scorer.score(context, candidates);
  if (scores.size() != candidates.size()) {
    throw ProtocolError("scorer returned " + std::to_string(scores.size()) +
                        " scores for " + std::to_string(candidates.size()) +
                        " candidates");
  }
  std::vector<ScoredSnippet> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out.push_back({kb.snippets()[candidates[i]].ref, scores[i]});
  }
  return out;
}

RefSet SnippetSelection::refs() const {
  RefSet out;
  out.reserve(selected.size());
  for (const auto& s : selected) out.push_back(s.ref);
  std::sort(out.begin(), out.end());
  return out;
}

SnippetSelection select_snippets(const std::vector<ScoredSnippet>& scored,
                                 double threshold, std::string instance_id) {
  SnippetSelection selection;
  selection.instance_id = std::move(instance_id);
  selection.threshold_used = threshold;
  for (const auto& s : scored) {
    if (s.score >= threshold) selection.selected.push_back(s);
  }
  sort_by_score(selection.selected);
  return selection;
}

std::vector<double> quantile_grid(const std::vector<std::vector<ScoredSnippet>>& scored) {
  std::vector<double> pooled;
  for (const auto& instance : scored) {
    for (const auto& s : instance) pooled.push_back(s.score);
  }
  if (pooled.empty()) return {};
  std::sort(pooled.begin(), pooled.end());
  const double n = static_cast<double>(pooled.size());
  std::vector<double> grid;
  for (int k = 0; k <= 200; ++k) {
    double rank = std::ceil(static_cast<double>(k) / 200.0 * n);
    std::size_t index = rank < 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
    index = std::min(index, pooled.size() - 1);
    grid.push_back(pooled[index]);
  }
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

std::vector<double> logit_grid() {
  std::vector<double> grid;
  for (int k = -100; k <= 100; ++k) grid.push_back(static_cast<double>(k) * 0.05);
  return grid;
}

ThresholdCalibration calibrate_threshold(
    const std::vector<std::vector<ScoredSnippet>>& scored,
    const std::vector<RefSet>& gold, const std::vector<double>& grid) {
  if (scored.size() != gold.size()) {
    throw PreconditionError("calibrate_threshold: scored/gold size mismatch");
  }
  bool any_gold = std::any_of(gold.begin(), gold.end(),
                              [](const RefSet& g) { return !g.empty(); });
  if (!any_gold || grid.empty()) {
    throw PreconditionError("calibrate_threshold: no validation instance with gold snippets");
  }
  std::vector<double> sorted_grid = grid;
  std::sort(sorted_grid.begin(), sorted_grid.end());

  ThresholdCalibration out;
  out.grid = sorted_grid;
  out.f1 = -1.0;
  std::vector<RefSet> predictions(scored.size());
  for (double theta : sorted_grid) {
    for (std::size_t i = 0; i < scored.size(); ++i) {
      predictions[i].clear();
      for (const auto& s : scored[i]) {
        if (s.score >= theta) predictions[i].push_back(s.ref);
      }
      std::sort(predictions[i].begin(), predictions[i].end());
    }
    double f1 = instance_prf(predictions, gold).prf.f1;
    out.grid_f1.push_back(f1);
    if (f1 > out.f1) {
      out.f1 = f1;
      out.threshold = theta;
    }
  }
  return out;
}

std::vector<TrainingPair> export_training_pairs(const Split& split,
                                                const KnowledgeBase& kb,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TrainingPair> pairs;
  std::size_t short_instances = 0;
  for (const auto& instance : split.instances) {
    const InstanceLabel& label = instance.label;
    if (!label.target || label.gold_snippets.empty()) continue;
    const std::string& id = instance.context.instance_id;
    for (const auto& ref : label.gold_snippets) {
      pairs.push_back({id, &instance.context, ref, true});
    }
    std::vector<SnippetRef> negatives;
    for (std::size_t c : candidate_snippets(kb, label.gold_entities())) {
      const SnippetRef& ref = kb.snippets()[c].ref;
      if (!std::binary_search(label.gold_snippets.begin(), label.gold_snippets.end(), ref)) {
        negatives.push_back(ref);
      }
    }
    stable_shuffle(negatives, rng);
    std::size_t wanted = label.gold_snippets.size();
    if (negatives.size() < wanted) ++short_instances;
    negatives.resize(std::min(wanted, negatives.size()));
    for (auto& ref : negatives) {
      pairs.push_back({id, &instance.context, std::move(ref), false});
    }
  }
  if (short_instances > 0) {
    spdlog::warn("{}: {} instances had fewer negatives than positives",
                 to_string(split.name), short_instances);
  }
  return pairs;
}

std::string training_pairs_to_jsonl(const std::vector<TrainingPair>& pairs,
                                    const KnowledgeBase& kb) {
  std::ostringstream out;
  for (const auto& pair : pairs) {
    nlohmann::ordered_json line = {
        {"instance_id", pair.instance_id},
        {"context", pair.context ? context_to_json(*pair.context)
                                 : nlohmann::ordered_json::array()},
        {"ref", ref_to_json(pair.ref)},
        {"snippet", kb.snippet(pair.ref).text},
        {"label", pair.relevant ? 1 : 0}};
    out << line.dump() << '\n';
  }
  return out.str();
}

}  // namespace sktod
