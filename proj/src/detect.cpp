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

#include "sktod/detect.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "json_util.hpp"
#include "sktod/error.hpp"
#include "sktod/external.hpp"
#include "sktod/text.hpp"

namespace sktod {

DetectionScore make_detection(double logit, double threshold) {
  return {logit, logit > threshold};
}

DetectionScore detection_from_class_scores(double negative, double positive,
                                           double threshold) {
  return make_detection(positive - negative, threshold);
}

namespace {

std::uint64_t hash_code_points(std::uint64_t h, std::u32string_view cps) {
  for (char32_t c : cps) {
    for (int shift = 0; shift < 32; shift += 8) {
      h ^= (static_cast<std::uint32_t>(c) >> shift) & 0xFFu;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

void add_word_ngrams(const std::vector<std::string>& tokens, int min_n,
                     int max_n, std::string_view prefix, std::uint32_t mask,
                     std::vector<std::uint32_t>& out) {
  for (int n = min_n; n <= max_n; ++n) {
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size();
         ++i) {
      std::uint64_t h = fnv1a(prefix);
      h = fnv1a(std::to_string(n), h);
      for (int k = 0; k < n; ++k) {
        h = fnv1a("\x1f", h);
        h = fnv1a(tokens[i + static_cast<std::size_t>(k)], h);
      }
      out.push_back(static_cast<std::uint32_t>(h) & mask);
    }
  }
}

}  // namespace

FeatureVector featurize(const DialogueContext& context,
                        const FeaturizerConfig& config) {
  if (config.hash_bits < 1 || config.hash_bits > 30) {
    throw UsageError("hash_bits must be in [1, 30]");
  }
  const std::uint32_t mask = (1u << config.hash_bits) - 1u;
  const Utterance& request = context.last_user_turn();
  std::vector<std::string> tokens = tokenize(request.text);

  std::vector<std::uint32_t> buckets;
  add_word_ngrams(tokens, config.word_min, config.word_max, "w", mask, buckets);

  std::u32string padded = U" " + to_code_points(join(tokens)) + U" ";
  for (int n = config.char_min; n <= config.char_max && n > 0; ++n) {
    const auto len = static_cast<std::size_t>(n);
    const std::uint64_t seed = fnv1a("c" + std::to_string(n));
    for (std::size_t i = 0; i + len <= padded.size(); ++i) {
      auto h = hash_code_points(seed, std::u32string_view(padded).substr(i, len));
      buckets.push_back(static_cast<std::uint32_t>(h) & mask);
    }
  }

  if (config.use_system_turn) {
    if (const Utterance* system = context.previous_system_turn()) {
      add_word_ngrams(tokenize(system->text), config.word_min, config.word_max,
                      "s", mask, buckets);
    }
  }

  std::sort(buckets.begin(), buckets.end());
  buckets.erase(std::unique(buckets.begin(), buckets.end()), buckets.end());
  FeatureVector fv;
  fv.value = buckets.empty() ? 0.0 : 1.0 / std::sqrt(double(buckets.size()));
  fv.buckets = std::move(buckets);
  return fv;
}

LexicalDetectorModel::LexicalDetectorModel(FeaturizerConfig config,
                                           std::vector<double> weights,
                                           double bias)
    : config_(config), weights_(std::move(weights)), bias_(bias) {
  if (weights_.size() != (std::size_t{1} << config_.hash_bits)) {
    throw DataError("detector weight vector does not match hash_bits");
  }
  for (double w : weights_) {
    if (!std::isfinite(w)) throw DataError("detector weights must be finite");
  }
  if (!std::isfinite(bias_)) throw DataError("detector bias must be finite");
}

double LexicalDetectorModel::logit(const FeatureVector& features) const {
  double sum = 0.0;
  for (std::uint32_t b : features.buckets) sum += weights_[b];
  return bias_ + features.value * sum;
}

double LexicalDetectorModel::logit(const DialogueContext& context) const {
  return logit(featurize(context, config_));
}

std::string LexicalDetectorModel::to_json() const {
  nlohmann::ordered_json doc;
  doc["format"] = "sktod-lexical-detector";
  doc["version"] = 1;
  doc["features"] = {{"word_min", config_.word_min},
                     {"word_max", config_.word_max},
                     {"char_min", config_.char_min},
                     {"char_max", config_.char_max},
                     {"use_system_turn", config_.use_system_turn},
                     {"hash_bits", config_.hash_bits}};
  doc["bias"] = bias_;
  nlohmann::ordered_json weights = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (weights_[i] != 0.0) weights.push_back({i, weights_[i]});
  }
  doc["weights"] = std::move(weights);
  return doc.dump();
}

LexicalDetectorModel LexicalDetectorModel::from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("detector model", e.byte, e.what());
  }
  try {
    if (doc.at("format") != "sktod-lexical-detector" || doc.at("version") != 1) {
      throw DataError("unsupported detector model format/version");
    }
    const auto& f = doc.at("features");
    FeaturizerConfig config;
    config.word_min = f.at("word_min").get<int>();
    config.word_max = f.at("word_max").get<int>();
    config.char_min = f.at("char_min").get<int>();
    config.char_max = f.at("char_max").get<int>();
    config.use_system_turn = f.at("use_system_turn").get<bool>();
    config.hash_bits = f.at("hash_bits").get<int>();
    if (config.hash_bits < 1 || config.hash_bits > 30) {
      throw DataError("detector model: hash_bits out of range");
    }
    std::vector<double> weights(std::size_t{1} << config.hash_bits, 0.0);
    for (const auto& entry : doc.at("weights")) {
      auto index = entry.at(0).get<std::size_t>();
      if (index >= weights.size()) {
        throw DataError("detector model: weight index out of range");
      }
      weights[index] = entry.at(1).get<double>();
    }
    return LexicalDetectorModel(config, std::move(weights),
                                doc.at("bias").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("detector model: ") + e.what());
  }
}

void LexicalDetectorModel::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json();
}

LexicalDetectorModel LexicalDetectorModel::load(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open detector model " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

namespace {

struct Example {
  FeatureVector features;
  bool label = false;
};

std::vector<Example> featurize_split(const Split& split,
                                     const FeaturizerConfig& config) {
  std::vector<Example> out;
  out.reserve(split.instances.size());
  for (const auto& instance : split.instances) {
    out.push_back({featurize(instance.context, config), instance.label.target});
  }
  return out;
}

double accuracy_of(const std::vector<double>& weights, double bias,
                   const std::vector<Example>& examples) {
  if (examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    double z = bias;
    double sum = 0.0;
    for (std::uint32_t b : ex.features.buckets) sum += weights[b];
    z += ex.features.value * sum;
    if ((z > 0.0) == ex.label) ++correct;
  }
  return double(correct) / double(examples.size());
}

}  // namespace

LexicalDetectorModel train_detector(const Split& train, const Split& val,
                                    const DetectorTrainingConfig& config,
                                    DetectorTrainingReport* report) {
  if (train.instances.empty()) {
    throw UsageError("detector training split is empty");
  }
  const std::size_t positives = train.target_count();
  if (positives == 0 || positives == train.instances.size()) {
    throw UsageError("detector training data must contain both classes");
  }

  const auto train_set = featurize_split(train, config.features);
  const auto val_set = featurize_split(val, config.features);
  const std::size_t dim = std::size_t{1} << config.features.hash_bits;

  // Averaged SGD: averaged = w - u / c, with u accumulating c * update.
  std::vector<double> w(dim, 0.0), u(dim, 0.0);
  double b = 0.0, ub = 0.0, c = 1.0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed);

  std::vector<double> best_w;
  double best_b = 0.0;
  double best_score = -1.0;
  int best_epoch = 0;
  int epochs_run = 0;
  int since_best = 0;
  std::vector<double> averaged(dim);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    stable_shuffle(order, rng);
    for (std::size_t idx : order) {
      const Example& ex = train_set[idx];
      double sum = 0.0;
      for (std::uint32_t k : ex.features.buckets) sum += w[k];
      const double z = b + ex.features.value * sum;
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double step = config.learning_rate * (p - (ex.label ? 1.0 : 0.0));
      if (step != 0.0) {
        const double delta = step * ex.features.value;
        for (std::uint32_t k : ex.features.buckets) {
          w[k] -= delta;
          u[k] -= c * delta;
        }
        b -= step;
        ub -= c * step;
      }
      c += 1.0;
    }
    ++epochs_run;
    for (std::size_t k = 0; k < dim; ++k) averaged[k] = w[k] - u[k] / c;
    const double avg_b = b - ub / c;
    const double score = val_set.empty() ? accuracy_of(averaged, avg_b, train_set)
                                         : accuracy_of(averaged, avg_b, val_set);
    spdlog::debug("detector epoch {}: accuracy {:.5f}", epoch, score);
    if (score > best_score) {
      best_score = score;
      best_w = averaged;
      best_b = avg_b;
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }

  if (report != nullptr) {
    report->epochs_run = epochs_run;
    report->best_epoch = best_epoch;
    report->train_accuracy = accuracy_of(best_w, best_b, train_set);
    report->val_accuracy =
        val_set.empty() ? 0.0 : accuracy_of(best_w, best_b, val_set);
  }
  return LexicalDetectorModel(config.features, std::move(best_w), best_b);
}

DetectionScore detect(const LexicalDetectorModel& model,
                      const DialogueContext& context) {
  context.last_user_turn();
  return make_detection(model.logit(context));
}

BinaryMetrics binary_metrics(const std::vector<bool>& predicted,
                             const std::vector<bool>& gold) {
  if (predicted.size() != gold.size()) {
    throw PreconditionError("binary_metrics: prediction/gold size mismatch");
  }
  BinaryMetrics m;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i] && gold[i]) ++m.true_positive;
    else if (predicted[i]) ++m.false_positive;
    else if (gold[i]) ++m.false_negative;
    else ++m.true_negative;
  }
  const auto tp = double(m.true_positive);
  if (!gold.empty()) {
    m.accuracy = (tp + double(m.true_negative)) / double(gold.size());
  }
  if (m.true_positive + m.false_positive > 0) {
    m.precision = tp / double(m.true_positive + m.false_positive);
  }
  if (m.true_positive + m.false_negative > 0) {
    m.recall = tp / double(m.true_positive + m.false_negative);
  }
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

BinaryMetrics evaluate_detector(const LexicalDetectorModel& model,
                                const Split& split) {
  std::vector<bool> predicted, gold;
  for (const auto& instance : split.instances) {
    predicted.push_back(detect(model, instance.context).decision);
    gold.push_back(instance.label.target);
  }
  return binary_metrics(predicted, gold);
}

DetectionScore external_detect(const JsonServiceClient& client,
                               const DialogueContext& context,
                               double threshold) {
  context.last_user_turn();
  nlohmann::json request = {{"task", "ktd"},
                            {"context", context_to_json(context)}};
  nlohmann::json reply = client.post(request);
  if (!reply.is_object() || !reply.contains("logit") ||
      !reply["logit"].is_number()) {
    throw ProtocolError("ktd reply must be {\"logit\": <number>}");
  }
  const double logit = reply["logit"].get<double>();
  if (!std::isfinite(logit)) throw ProtocolError("ktd logit is not finite");
  return make_detection(logit, threshold);
}

}  // namespace sktod
