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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sktod/corpus.hpp"

namespace sktod {

class JsonServiceClient;

// Knowledge-seeking turn detection output. decision = logit > threshold,
// strictly; the default threshold is 0.
struct DetectionScore {
  double logit = 0.0;
  bool decision = false;
};

DetectionScore make_detection(double logit, double threshold = 0.0);

// Two-class form: logit = positive - negative, so adding a constant to both
// class scores never changes the decision.
DetectionScore detection_from_class_scores(double negative, double positive,
                                           double threshold = 0.0);

struct FeaturizerConfig {
  int word_min = 1;
  int word_max = 2;
  int char_min = 3;
  int char_max = 5;
  bool use_system_turn = true;  // add word n-grams of the preceding system turn
  int hash_bits = 20;
};

struct DetectorTrainingConfig {
  FeaturizerConfig features;
  int max_epochs = 12;
  int patience = 3;  // epochs without validation gain before stopping
  double learning_rate = 0.5;
  std::uint64_t seed = 13;
};

// Hashed sparse feature vector: sorted unique bucket ids, each with value
// 1/sqrt(n) so that every example has unit norm.
struct FeatureVector {
  std::vector<std::uint32_t> buckets;
  double value = 0.0;
};

FeatureVector featurize(const DialogueContext& context,
                        const FeaturizerConfig& config);

// Sparse logistic model over hashed n-gram features. Immutable after
// training; logit() is reentrant.
class LexicalDetectorModel {
 public:
  LexicalDetectorModel() = default;
  LexicalDetectorModel(FeaturizerConfig config, std::vector<double> weights,
                       double bias);

  double logit(const DialogueContext& context) const;
  double logit(const FeatureVector& features) const;

  const FeaturizerConfig& config() const { return config_; }
  double bias() const { return bias_; }
  const std::vector<double>& weights() const { return weights_; }

  // Versioned JSON text; only non-zero weights are stored.
  std::string to_json() const;
  static LexicalDetectorModel from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static LexicalDetectorModel load(const std::filesystem::path& path);

 private:
  FeaturizerConfig config_;
  std::vector<double> weights_;
  double bias_ = 0.0;
};

struct DetectorTrainingReport {
  int epochs_run = 0;
  int best_epoch = 0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

// Averaged SGD on the logistic loss with early stopping on validation
// accuracy. Throws UsageError on empty or single-class training data.
LexicalDetectorModel train_detector(const Split& train, const Split& val,
                                    const DetectorTrainingConfig& config,
                                    DetectorTrainingReport* report = nullptr);

// Throws PreconditionError when the context does not end in a user turn.
DetectionScore detect(const LexicalDetectorModel& model,
                      const DialogueContext& context);

struct BinaryMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t true_negative = 0;
  std::size_t false_negative = 0;
};

// Precision/recall are 0 when their denominators are 0.
BinaryMetrics binary_metrics(const std::vector<bool>& predicted,
                             const std::vector<bool>& gold);

BinaryMetrics evaluate_detector(const LexicalDetectorModel& model,
                                const Split& split);

// Remote encoder: request {"task":"ktd","context":[...]} -> {"logit": x}.
DetectionScore external_detect(const JsonServiceClient& client,
                               const DialogueContext& context,
                               double threshold = 0.0);

}  // namespace sktod
