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

#include "sktod/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"
#include "sktod/error.hpp"
#include "sktod/text.hpp"
#include "stemmer.hpp"

namespace sktod {

PRF make_prf(double precision, double recall) {
  PRF out{precision, recall, 0.0};
  if (precision + recall > 0.0) {
    out.f1 = 2.0 * precision * recall / (precision + recall);
  }
  return out;
}

namespace {

std::size_t intersection_size(const RefSet& a, const RefSet& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

void check_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw PreconditionError(std::string(what) + ": " + std::to_string(a) +
                            " predictions vs " + std::to_string(b) + " gold");
  }
}

}  // namespace

PRF set_prf(const RefSet& predicted, const RefSet& gold) {
  if (gold.empty()) {
    return predicted.empty() ? PRF{1.0, 1.0, 1.0} : PRF{};
  }
  double tp = static_cast<double>(intersection_size(predicted, gold));
  double p = predicted.empty() ? 0.0 : tp / static_cast<double>(predicted.size());
  double r = tp / static_cast<double>(gold.size());
  return make_prf(p, r);
}

InstancePrf instance_prf(const std::vector<RefSet>& predictions,
                         const std::vector<RefSet>& gold) {
  check_aligned(predictions.size(), gold.size(), "instance_prf");
  InstancePrf out;
  double p = 0, r = 0, f = 0;
  double all_p = 0, all_r = 0, all_f = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    PRF one = set_prf(predictions[i], gold[i]);
    all_p += one.precision;
    all_r += one.recall;
    all_f += one.f1;
    if (gold[i].empty()) {
      ++out.excluded_empty_gold;
      continue;
    }
    ++out.evaluated;
    p += one.precision;
    r += one.recall;
    f += one.f1;
  }
  if (out.evaluated > 0) {
    double n = static_cast<double>(out.evaluated);
    out.prf = {p / n, r / n, f / n};
  }
  if (!gold.empty()) {
    double n = static_cast<double>(gold.size());
    out.empty_gold_included = {all_p / n, all_r / n, all_f / n};
  }
  return out;
}

PRF snippet_prf(const std::vector<RefSet>& predictions,
                const std::vector<RefSet>& gold) {
  check_aligned(predictions.size(), gold.size(), "snippet_prf");
  std::size_t tp = 0, predicted = 0, relevant = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    tp += intersection_size(predictions[i], gold[i]);
    predicted += predictions[i].size();
    relevant += gold[i].size();
  }
  double p = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
  double r = relevant ? static_cast<double>(tp) / static_cast<double>(relevant) : 0.0;
  return make_prf(p, r);
}

RankedRelevance rank_relevance(std::vector<ScoredSnippet> scored,
                               const RefSet& gold) {
  sort_by_score(scored);
  RankedRelevance out;
  out.total_relevant = gold.size();
  out.relevant.reserve(scored.size());
  for (const auto& s : scored) {
    out.relevant.push_back(std::binary_search(gold.begin(), gold.end(), s.ref));
  }
  return out;
}

double average_precision(const RankedRelevance& ranking) {
  if (ranking.total_relevant == 0) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < ranking.relevant.size(); ++k) {
    if (!ranking.relevant[k]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return sum / static_cast<double>(ranking.total_relevant);
}

MapResult mean_average_precision(const std::vector<RankedRelevance>& rankings) {
  MapResult out;
  double sum = 0.0;
  for (const auto& r : rankings) {
    if (r.total_relevant == 0) {
      ++out.excluded_no_gold;
      continue;
    }
    ++out.evaluated;
    sum += average_precision(r);
  }
  if (out.evaluated > 0) out.map = sum / static_cast<double>(out.evaluated);
  return out;
}

// --- Generation metrics ---

namespace {

using Tokens = std::vector<std::string>;
using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngram_counts(const Tokens& tokens, int n) {
  NgramCounts counts;
  const auto len = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + len <= tokens.size(); ++i) {
    ++counts[Tokens(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                    tokens.begin() + static_cast<std::ptrdiff_t>(i + len))];
  }
  return counts;
}

std::size_t clipped_overlap(const NgramCounts& hyp, const NgramCounts& ref) {
  std::size_t n = 0;
  for (const auto& [gram, count] : hyp) {
    auto it = ref.find(gram);
    if (it != ref.end()) n += std::min(count, it->second);
  }
  return n;
}

std::size_t total(const NgramCounts& counts) {
  std::size_t n = 0;
  for (const auto& [gram, count] : counts) n += count;
  return n;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
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

std::vector<Tokens> tokenize_all(const std::vector<std::string>& texts) {
  std::vector<Tokens> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(tokenize(t));
  return out;
}

}  // namespace

double corpus_bleu(const std::vector<Tokens>& hypotheses,
                   const std::vector<Tokens>& references) {
  if (hypotheses.empty()) throw PreconditionError("corpus_bleu: empty corpus");
  check_aligned(hypotheses.size(), references.size(), "corpus_bleu");
  std::size_t matches[4] = {0, 0, 0, 0};
  std::size_t totals[4] = {0, 0, 0, 0};
  std::size_t hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    hyp_len += hypotheses[i].size();
    ref_len += references[i].size();
    for (int n = 1; n <= 4; ++n) {
      NgramCounts h = ngram_counts(hypotheses[i], n);
      NgramCounts r = ngram_counts(references[i], n);
      matches[n - 1] += clipped_overlap(h, r);
      totals[n - 1] += total(h);
    }
  }
  // Token-disjoint corpora score exactly 0; smoothing only rescues the
  // higher orders.
  if (matches[0] == 0) return 0.0;
  double log_sum = 0.0;
  for (int k = 0; k < 4; ++k) {
    double m = matches[k] == 0 ? kBleuEpsilon : static_cast<double>(matches[k]);
    double t = static_cast<double>(std::max<std::size_t>(1, totals[k]));
    log_sum += std::log(m / t);
  }
  double bp = 1.0;
  if (hyp_len < ref_len) {
    bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  }
  return bp * std::exp(log_sum / 4.0);
}

double corpus_bleu(const std::vector<std::string>& hypotheses,
                   const std::vector<std::string>& references) {
  return corpus_bleu(tokenize_all(hypotheses), tokenize_all(references));
}

double rouge_n(const Tokens& hypothesis, const Tokens& reference, int n) {
  if (n < 1) throw PreconditionError("rouge_n: n must be positive");
  NgramCounts h = ngram_counts(hypothesis, n);
  NgramCounts r = ngram_counts(reference, n);
  std::size_t ht = total(h), rt = total(r);
  if (ht == 0 || rt == 0) return 0.0;
  double overlap = static_cast<double>(clipped_overlap(h, r));
  return make_prf(overlap / static_cast<double>(ht), overlap / static_cast<double>(rt)).f1;
}

double rouge_n(std::string_view hypothesis, std::string_view reference, int n) {
  return rouge_n(tokenize(hypothesis), tokenize(reference), n);
}

double rouge_l(const Tokens& hypothesis, const Tokens& reference) {
  if (hypothesis.empty() || reference.empty()) return 0.0;
  double lcs = static_cast<double>(lcs_length(hypothesis, reference));
  return make_prf(lcs / static_cast<double>(hypothesis.size()),
                  lcs / static_cast<double>(reference.size()))
      .f1;
}

double rouge_l(std::string_view hypothesis, std::string_view reference) {
  return rouge_l(tokenize(hypothesis), tokenize(reference));
}

namespace {

// One alignment stage: hypothesis from the end, each to the last unaligned
// equal reference token.
void align_stage(const Tokens& hyp, const Tokens& ref, std::vector<int>& hyp_to_ref,
                 std::vector<bool>& ref_used) {
  for (std::size_t i = hyp.size(); i-- > 0;) {
    if (hyp_to_ref[i] >= 0) continue;
    for (std::size_t j = ref.size(); j-- > 0;) {
      if (!ref_used[j] && hyp[i] == ref[j]) {
        hyp_to_ref[i] = static_cast<int>(j);
        ref_used[j] = true;
        break;
      }
    }
  }
}

}  // namespace

MeteorStats meteor_stats(const Tokens& hypothesis, const Tokens& reference) {
  MeteorStats out;
  if (hypothesis.empty() || reference.empty()) return out;
  std::vector<int> hyp_to_ref(hypothesis.size(), -1);
  std::vector<bool> ref_used(reference.size(), false);
  align_stage(hypothesis, reference, hyp_to_ref, ref_used);

  Tokens hyp_stems, ref_stems;
  for (const auto& t : hypothesis) hyp_stems.push_back(porter_stem(t));
  for (const auto& t : reference) ref_stems.push_back(porter_stem(t));
  align_stage(hyp_stems, ref_stems, hyp_to_ref, ref_used);

  int prev = -2;
  std::size_t prev_i = 0;
  for (std::size_t i = 0; i < hypothesis.size(); ++i) {
    int j = hyp_to_ref[i];
    if (j < 0) continue;
    bool continues = out.matches > 0 && i == prev_i + 1 && j == prev + 1;
    if (!continues) ++out.chunks;
    ++out.matches;
    prev = j;
    prev_i = i;
  }
  if (out.matches == 0) return out;
  double m = static_cast<double>(out.matches);
  out.precision = m / static_cast<double>(hypothesis.size());
  out.recall = m / static_cast<double>(reference.size());
  double fmean = 10.0 * out.precision * out.recall /
                 (out.recall + 9.0 * out.precision);
  double frag = static_cast<double>(out.chunks) / m;
  out.score = fmean * (1.0 - 0.5 * frag * frag * frag);
  return out;
}

double meteor(const Tokens& hypothesis, const Tokens& reference) {
  return meteor_stats(hypothesis, reference).score;
}

double meteor(std::string_view hypothesis, std::string_view reference) {
  return meteor(tokenize(hypothesis), tokenize(reference));
}

GenerationScores score_generation(const std::vector<std::string>& hypotheses,
                                  const std::vector<std::string>& references) {
  check_aligned(hypotheses.size(), references.size(), "score_generation");
  GenerationScores out;
  out.pairs = hypotheses.size();
  if (hypotheses.empty()) return out;
  std::vector<Tokens> hyp = tokenize_all(hypotheses);
  std::vector<Tokens> ref = tokenize_all(references);
  out.bleu = corpus_bleu(hyp, ref);
  double length = 0.0;
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    out.rouge1 += rouge_n(hyp[i], ref[i], 1);
    out.rouge2 += rouge_n(hyp[i], ref[i], 2);
    out.rouge_l += rouge_l(hyp[i], ref[i]);
    out.meteor += meteor(hyp[i], ref[i]);
    length += static_cast<double>(hyp[i].size());
  }
  double n = static_cast<double>(hyp.size());
  out.rouge1 /= n;
  out.rouge2 /= n;
  out.rouge_l /= n;
  out.meteor /= n;
  out.avg_response_length = length / n;
  return out;
}

namespace {

nlohmann::ordered_json prf_json(const PRF& prf) {
  return {{"precision", prf.precision}, {"recall", prf.recall}, {"f1", prf.f1}};
}

}  // namespace

std::string to_json(const EvalReport& report, int indent) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  if (report.detection) {
    const auto& d = *report.detection;
    out["detection"] = {{"accuracy", d.accuracy},
                        {"precision", d.precision},
                        {"recall", d.recall},
                        {"f1", d.f1},
                        {"true_positive", d.true_positive},
                        {"false_positive", d.false_positive},
                        {"true_negative", d.true_negative},
                        {"false_negative", d.false_negative}};
  }
  if (report.tracking) {
    const auto& t = *report.tracking;
    out["tracking"] = {{"instances", t.instances},
                       {"accuracy", t.accuracy},
                       {"missing_rate", t.missing_rate},
                       {"spurious_rate", t.spurious_rate}};
  }
  if (report.instance) {
    const auto& i = *report.instance;
    nlohmann::ordered_json node = prf_json(i.prf);
    node["evaluated"] = i.evaluated;
    node["excluded_empty_gold"] = i.excluded_empty_gold;
    node["empty_gold_included"] = prf_json(i.empty_gold_included);
    out["instance_prf"] = node;
  }
  if (report.snippet) out["snippet_prf"] = prf_json(*report.snippet);
  if (report.map) {
    out["map"] = {{"map", report.map->map},
                  {"evaluated", report.map->evaluated},
                  {"excluded_no_gold", report.map->excluded_no_gold}};
  }
  if (report.generation) {
    const auto& g = *report.generation;
    out["generation"] = {{"pairs", g.pairs},
                         {"bleu", g.bleu},
                         {"rouge1", g.rouge1},
                         {"rouge2", g.rouge2},
                         {"rougeL", g.rouge_l},
                         {"meteor", g.meteor},
                         {"avg_response_length", g.avg_response_length}};
  }
  return out.dump(indent);
}

}  // namespace sktod
