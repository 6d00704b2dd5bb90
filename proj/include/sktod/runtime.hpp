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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sktod/absa.hpp"
#include "sktod/corpus.hpp"
#include "sktod/detect.hpp"
#include "sktod/external.hpp"
#include "sktod/generate.hpp"
#include "sktod/metrics.hpp"
#include "sktod/select.hpp"
#include "sktod/track.hpp"

namespace sktod {

enum class StageSource { kGold, kNative, kExternal };
std::string_view to_string(StageSource source);
StageSource parse_stage_source(std::string_view text);  // throws UsageError

enum class Stage { kKtd, kEt, kKs, kRg };
std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view text);

// Native response generators.
enum class NativeRg { kExt, kTemplate };

struct PipelineConfig {
  StageSource ktd = StageSource::kNative;
  StageSource et = StageSource::kNative;
  StageSource ks = StageSource::kNative;
  StageSource rg = StageSource::kNative;
  StageSource absa = StageSource::kNative;  // gold is not allowed
  Stage last_stage = Stage::kRg;            // later stages are not run

  ScorerKind scorer = ScorerKind::kTfidf;
  std::optional<double> threshold;  // otherwise the calibrated one
  NativeRg native_rg = NativeRg::kTemplate;
  bool use_absa = true;             // augment external generator input
  bool absa_fallback_to_lexicon = true;
  double relaxed_track_threshold = 0.8;
  std::uint64_t seed = 42;
  int workers = 0;  // 0: hardware concurrency

  std::optional<EndpointConfig> ktd_endpoint;
  std::optional<EndpointConfig> ks_endpoint;
  std::optional<EndpointConfig> absa_endpoint;
  std::optional<EndpointConfig> rg_endpoint;

  // Throws UsageError: gold RG, gold ABSA, external ET, or an external
  // stage without its endpoint.
  void validate() const;

  bool runs(Stage stage) const { return static_cast<int>(stage) <= static_cast<int>(last_stage); }

  nlohmann::ordered_json to_json() const;
  // Missing keys keep their defaults; unknown keys raise UsageError.
  static PipelineConfig from_json(const nlohmann::json& node);
};

// Rows of the end-to-end ablation, from all-gold inputs to fully predicted.
enum class AblationRow { kRg, kKs, kEtKs, kKtdEtKs };
std::string_view to_string(AblationRow row);  // "RG", "+KS", "+ET+KS", "+KTD+ET+KS"
AblationRow parse_ablation_row(std::string_view text);
PipelineConfig ablation_config(AblationRow row, const PipelineConfig& base);

// Knowledge base plus everything derived from it or calibrated on it.
// Immutable once built except for the calibration setters, which must not
// race with pipeline runs.
class Engine {
 public:
  explicit Engine(KnowledgeBase kb);
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  // Loads knowledge.json from `data_dir`; reads calibration artifacts from
  // `artifacts_dir` when given and present.
  static std::unique_ptr<Engine> open(const std::filesystem::path& data_dir,
                                      const std::optional<std::filesystem::path>& artifacts_dir);

  const KnowledgeBase& kb() const { return kb_; }
  const LexicalIndex& index() const { return index_; }
  const EntityTracker& tracker() const { return *tracker_; }
  // Lexicon annotation of every snippet, keyed by ref.
  const AnnotationMap& annotations() const { return annotations_; }
  std::uint64_t kb_fingerprint() const { return fingerprint_; }

  const LexicalDetectorModel* detector() const { return detector_ ? &*detector_ : nullptr; }
  void set_detector(LexicalDetectorModel model) { detector_ = std::move(model); }

  std::optional<double> threshold(ScorerKind scorer) const;
  void set_threshold(ScorerKind scorer, double value) { thresholds_[scorer] = value; }

  // detector.json and config.json.
  void save_artifacts(const std::filesystem::path& dir, std::uint64_t seed) const;
  void load_artifacts(const std::filesystem::path& dir);

 private:
  KnowledgeBase kb_;
  LexicalIndex index_;
  std::unique_ptr<EntityTracker> tracker_;
  AnnotationMap annotations_;
  std::uint64_t fingerprint_ = 0;
  std::optional<LexicalDetectorModel> detector_;
  std::map<ScorerKind, double> thresholds_;
};

// Everything one instance produced. Fields of stages that did not run stay
// empty.
struct InstanceOutput {
  std::string instance_id;
  enum class Status { kOk, kSkipped, kQuarantined } status = Status::kOk;
  std::string error;  // "<stage>: message" when quarantined

  bool detected = false;
  std::optional<double> ktd_logit;
  std::vector<EntityKey> entities;
  TrackingFallback track_fallback = TrackingFallback::kNone;
  std::vector<ScoredSnippet> ranking;  // all candidates, ranking order
  SnippetSelection selection;
  std::optional<Response> response;
};

std::string_view to_string(InstanceOutput::Status status);

struct PipelineRun {
  PipelineConfig config;
  std::vector<InstanceOutput> outputs;  // split order
  EvalReport report;
  std::size_t quarantined = 0;
};

// Runs the configured stages over every instance with a worker pool.
// KTD-negative instances skip the later stages. A connection failure to an
// external endpoint aborts with TransportError naming the stage; any other
// per-instance failure quarantines that instance.
PipelineRun run_pipeline(const Engine& engine, const PipelineConfig& config, const Split& split);

// Runs one context through the stages (used by the service). `label` is
// only needed for gold stages.
InstanceOutput run_instance(const Engine& engine, const PipelineConfig& config,
                            const DialogueContext& context,
                            const std::optional<Domain>& domain_hint = std::nullopt,
                            const InstanceLabel* label = nullptr);

// Metrics for the stages `config` ran from non-gold sources, against the
// split labels. Quarantined instances are left out.
EvalReport evaluate_outputs(const std::vector<InstanceOutput>& outputs, const Split& gold,
                            const PipelineConfig& config);

// Prediction file: the labels.json layout plus instance_id, status,
// entities, ranking, threshold and provenance. Byte-stable for identical
// runs.
nlohmann::ordered_json outputs_to_json(const std::vector<InstanceOutput>& outputs,
                                       const KnowledgeBase& kb);
std::vector<InstanceOutput> outputs_from_json(const nlohmann::json& node);

struct MetricSelection {
  bool detection = true;
  bool tracking = true;
  bool selection = true;
  bool generation = true;
};

// Evaluates a prediction file against gold labels for the stages selected
// in `metrics`. mAP needs rankings and generation needs responses in the
// file; those blocks are left out otherwise.
EvalReport evaluate_predictions(const std::vector<InstanceOutput>& predictions,
                                const Split& gold, const MetricSelection& metrics);

// Threshold calibration on `val` with gold entities as candidates.
ThresholdCalibration calibrate_scorer(const Engine& engine, const SnippetScorer& scorer,
                                      const Split& val, int workers = 0);

struct CalibrationSummary {
  DetectorTrainingReport detector;
  std::map<ScorerKind, ThresholdCalibration> thresholds;
  nlohmann::ordered_json to_json() const;
};

// Trains the detector and calibrates the TF-IDF and BM25 thresholds from
// `data_dir` (train and val splits), stores them on the engine and writes
// them to `out_dir`. Throws DataError when a split is missing.
CalibrationSummary calibrate_all(Engine& engine, const std::filesystem::path& data_dir,
                                 const std::filesystem::path& out_dir, std::uint64_t seed,
                                 int workers = 0);

}  // namespace sktod
