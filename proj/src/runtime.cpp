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

#include "sktod/runtime.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json_util.hpp"
#include "parallel.hpp"
#include "sktod/error.hpp"
#include "sktod/text.hpp"

namespace sktod {

using nlohmann::ordered_json;

std::string_view to_string(StageSource source) {
  switch (source) {
    case StageSource::kGold: return "gold";
    case StageSource::kNative: return "native";
    case StageSource::kExternal: return "external";
  }
  return "native";
}

StageSource parse_stage_source(std::string_view text) {
  if (text == "gold") return StageSource::kGold;
  if (text == "native") return StageSource::kNative;
  if (text == "external") return StageSource::kExternal;
  throw UsageError("unknown stage source '" + std::string(text) +
                   "' (expected gold, native or external)");
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kKtd: return "ktd";
    case Stage::kEt: return "et";
    case Stage::kKs: return "ks";
    case Stage::kRg: return "rg";
  }
  return "rg";
}

Stage parse_stage(std::string_view text) {
  if (text == "ktd") return Stage::kKtd;
  if (text == "et") return Stage::kEt;
  if (text == "ks") return Stage::kKs;
  if (text == "rg") return Stage::kRg;
  throw UsageError("unknown stage '" + std::string(text) + "' (expected ktd, et, ks or rg)");
}

namespace {

std::string_view to_string(NativeRg rg) { return rg == NativeRg::kExt ? "ext" : "template"; }

NativeRg parse_native_rg(std::string_view text) {
  if (text == "ext") return NativeRg::kExt;
  if (text == "template") return NativeRg::kTemplate;
  throw UsageError("unknown native generator '" + std::string(text) +
                   "' (expected ext or template)");
}

ordered_json endpoint_to_json(const EndpointConfig& e) {
  return {{"url", e.url},
          {"timeout_ms", e.timeout.count()},
          {"max_retries", e.max_retries},
          {"retry_backoff_ms", e.retry_backoff.count()},
          {"max_in_flight", e.max_in_flight},
          {"batch_size", e.batch_size}};
}

EndpointConfig endpoint_from_json(const nlohmann::json& node, const std::string& where) {
  EndpointConfig e;
  if (node.is_string()) {
    e.url = node.get<std::string>();
    return e;
  }
  if (!node.is_object() || !node.contains("url")) {
    throw UsageError(where + ": endpoint needs a url");
  }
  for (const auto& [key, value] : node.items()) {
    if (key == "url") e.url = value.get<std::string>();
    else if (key == "timeout_ms") e.timeout = std::chrono::milliseconds(value.get<long long>());
    else if (key == "max_retries") e.max_retries = value.get<int>();
    else if (key == "retry_backoff_ms") e.retry_backoff = std::chrono::milliseconds(value.get<long long>());
    else if (key == "max_in_flight") e.max_in_flight = value.get<int>();
    else if (key == "batch_size") e.batch_size = value.get<std::size_t>();
    else throw UsageError(where + ": unknown endpoint key '" + key + "'");
  }
  return e;
}

}  // namespace

void PipelineConfig::validate() const {
  if (runs(Stage::kRg) && rg == StageSource::kGold) {
    throw UsageError("response generation cannot read gold responses; use native or external");
  }
  if (absa == StageSource::kGold) throw UsageError("there are no gold sentiment labels");
  if (runs(Stage::kEt) && et == StageSource::kExternal) {
    throw UsageError("entity tracking has no external backend");
  }
  auto need = [](bool used, const std::optional<EndpointConfig>& endpoint, const char* name) {
    if (used && (!endpoint || endpoint->url.empty())) {
      throw UsageError(std::string("external ") + name + " needs an endpoint");
    }
  };
  need(ktd == StageSource::kExternal, ktd_endpoint, "ktd");
  need(runs(Stage::kKs) && (ks == StageSource::kExternal || (ks == StageSource::kNative &&
                                                            scorer == ScorerKind::kExternal)),
       ks_endpoint, "ks");
  need(runs(Stage::kRg) && absa == StageSource::kExternal, absa_endpoint, "absa");
  need(runs(Stage::kRg) && rg == StageSource::kExternal, rg_endpoint, "rg");
  if (workers < 0) throw UsageError("workers must be >= 0");
}

ordered_json PipelineConfig::to_json() const {
  ordered_json out = {{"ktd", std::string(to_string(ktd))},
                      {"et", std::string(to_string(et))},
                      {"ks", std::string(to_string(ks))},
                      {"rg", std::string(to_string(rg))},
                      {"absa", std::string(to_string(absa))},
                      {"last_stage", std::string(to_string(last_stage))},
                      {"scorer", std::string(to_string(scorer))}};
  out["threshold"] = threshold ? ordered_json(*threshold) : ordered_json(nullptr);
  out["native_rg"] = std::string(to_string(native_rg));
  out["use_absa"] = use_absa;
  out["absa_fallback_to_lexicon"] = absa_fallback_to_lexicon;
  out["relaxed_track_threshold"] = relaxed_track_threshold;
  out["seed"] = seed;
  out["workers"] = workers;
  ordered_json endpoints = ordered_json::object();
  if (ktd_endpoint) endpoints["ktd"] = endpoint_to_json(*ktd_endpoint);
  if (ks_endpoint) endpoints["ks"] = endpoint_to_json(*ks_endpoint);
  if (absa_endpoint) endpoints["absa"] = endpoint_to_json(*absa_endpoint);
  if (rg_endpoint) endpoints["rg"] = endpoint_to_json(*rg_endpoint);
  out["endpoints"] = endpoints;
  return out;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& node) {
  if (!node.is_object()) throw UsageError("pipeline config must be an object");
  PipelineConfig c;
  try {
    for (const auto& [key, value] : node.items()) {
      if (key == "ktd") c.ktd = parse_stage_source(value.get<std::string>());
      else if (key == "et") c.et = parse_stage_source(value.get<std::string>());
      else if (key == "ks") c.ks = parse_stage_source(value.get<std::string>());
      else if (key == "rg") c.rg = parse_stage_source(value.get<std::string>());
      else if (key == "absa") c.absa = parse_stage_source(value.get<std::string>());
      else if (key == "last_stage") c.last_stage = parse_stage(value.get<std::string>());
      else if (key == "scorer") c.scorer = parse_scorer_kind(value.get<std::string>());
      else if (key == "threshold") {
        if (value.is_null()) c.threshold.reset();
        else c.threshold = value.get<double>();
      } else if (key == "native_rg") c.native_rg = parse_native_rg(value.get<std::string>());
      else if (key == "use_absa") c.use_absa = value.get<bool>();
      else if (key == "absa_fallback_to_lexicon") c.absa_fallback_to_lexicon = value.get<bool>();
      else if (key == "relaxed_track_threshold") c.relaxed_track_threshold = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "workers") c.workers = value.get<int>();
      else if (key == "endpoints") {
        for (const auto& [name, endpoint] : value.items()) {
          EndpointConfig e = endpoint_from_json(endpoint, "endpoints." + name);
          if (name == "ktd") c.ktd_endpoint = e;
          else if (name == "ks") c.ks_endpoint = e;
          else if (name == "absa") c.absa_endpoint = e;
          else if (name == "rg") c.rg_endpoint = e;
          else throw UsageError("unknown endpoint '" + name + "'");
        }
      } else {
        throw UsageError("unknown pipeline config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("pipeline config: ") + e.what());
  }
  return c;
}

std::string_view to_string(AblationRow row) {
  switch (row) {
    case AblationRow::kRg: return "RG";
    case AblationRow::kKs: return "+KS";
    case AblationRow::kEtKs: return "+ET+KS";
    case AblationRow::kKtdEtKs: return "+KTD+ET+KS";
  }
  return "RG";
}

AblationRow parse_ablation_row(std::string_view text) {
  if (text == "RG" || text == "rg") return AblationRow::kRg;
  if (text == "+KS" || text == "ks") return AblationRow::kKs;
  if (text == "+ET+KS" || text == "et-ks") return AblationRow::kEtKs;
  if (text == "+KTD+ET+KS" || text == "ktd-et-ks") return AblationRow::kKtdEtKs;
  throw UsageError("unknown ablation row '" + std::string(text) + "'");
}

PipelineConfig ablation_config(AblationRow row, const PipelineConfig& base) {
  PipelineConfig c = base;
  c.last_stage = Stage::kRg;
  if (c.rg == StageSource::kGold) c.rg = StageSource::kNative;
  c.ktd = StageSource::kGold;
  c.et = StageSource::kGold;
  c.ks = StageSource::kGold;
  if (row == AblationRow::kKs || row == AblationRow::kEtKs || row == AblationRow::kKtdEtKs) {
    c.ks = base.ks == StageSource::kGold ? StageSource::kNative : base.ks;
  }
  if (row == AblationRow::kEtKs || row == AblationRow::kKtdEtKs) c.et = StageSource::kNative;
  if (row == AblationRow::kKtdEtKs) {
    c.ktd = base.ktd == StageSource::kGold ? StageSource::kNative : base.ktd;
  }
  return c;
}

// --- Engine ------------------------------------------------------------------

namespace {

std::uint64_t fingerprint_kb(const KnowledgeBase& kb) {
  std::uint64_t h = fnv1a("sktod-kb");
  for (const auto& e : kb.entities()) {
    h = fnv1a(to_string(e.domain), h);
    h = fnv1a(e.entity_id, h);
    h = fnv1a(e.name, h);
  }
  for (const auto& s : kb.snippets()) {
    h = fnv1a(to_string(s.ref), h);
    h = fnv1a(s.text, h);
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(v));
  return buffer;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

}  // namespace

Engine::Engine(KnowledgeBase kb) : kb_(std::move(kb)) {
  index_ = LexicalIndex::build(kb_);
  tracker_ = std::make_unique<EntityTracker>(kb_);
  const SentimentLexicon& lexicon = SentimentLexicon::builtin();
  for (const auto& s : kb_.snippets()) annotations_.emplace(s.ref, tag_snippet(lexicon, s));
  fingerprint_ = fingerprint_kb(kb_);
}

std::unique_ptr<Engine> Engine::open(const std::filesystem::path& data_dir,
                                     const std::optional<std::filesystem::path>& artifacts_dir) {
  auto engine = std::make_unique<Engine>(load_knowledge_base(data_dir));
  if (artifacts_dir && std::filesystem::exists(*artifacts_dir / "config.json")) {
    engine->load_artifacts(*artifacts_dir);
  }
  return engine;
}

std::optional<double> Engine::threshold(ScorerKind scorer) const {
  auto it = thresholds_.find(scorer);
  if (it == thresholds_.end()) return std::nullopt;
  return it->second;
}

void Engine::save_artifacts(const std::filesystem::path& dir, std::uint64_t seed) const {
  if (detector_) detector_->save(dir / "detector.json");
  ordered_json config = {{"format", "sktod-config"},
                         {"version", 1},
                         {"seed", seed},
                         {"kb_fingerprint", hex64(fingerprint_)},
                         {"normalization_rules", kNormalizationRulesVersion}};
  ordered_json thresholds = ordered_json::object();
  for (const auto& [scorer, value] : thresholds_) {
    thresholds[std::string(to_string(scorer))] = value;
  }
  config["thresholds"] = thresholds;
  config["detector"] = detector_ ? ordered_json("detector.json") : ordered_json(nullptr);
  write_text(dir / "config.json", config.dump(2) + "\n");
}

void Engine::load_artifacts(const std::filesystem::path& dir) {
  nlohmann::json config;
  try {
    config = nlohmann::json::parse(read_text(dir / "config.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError((dir / "config.json").string(), e.byte, e.what());
  }
  if (config.value("format", "") != "sktod-config" || config.value("version", 0) != 1) {
    throw DataError((dir / "config.json").string() + ": not a version 1 sktod config");
  }
  if (config.value("kb_fingerprint", "") != hex64(fingerprint_)) {
    throw DataError((dir / "config.json").string() +
                    ": calibrated on a different knowledge base; rerun calibrate");
  }
  if (config.contains("thresholds")) {
    for (const auto& [name, value] : config["thresholds"].items()) {
      thresholds_[parse_scorer_kind(name)] = value.get<double>();
    }
  }
  if (config.contains("detector") && config["detector"].is_string()) {
    detector_ = LexicalDetectorModel::load(dir / config["detector"].get<std::string>());
  }
}

// --- Pipeline ----------------------------------------------------------------

std::string_view to_string(InstanceOutput::Status status) {
  switch (status) {
    case InstanceOutput::Status::kOk: return "ok";
    case InstanceOutput::Status::kSkipped: return "skipped";
    case InstanceOutput::Status::kQuarantined: return "quarantined";
  }
  return "ok";
}

namespace {

// A stage failure; `abort` marks failures that must stop the whole run.
struct StageFailure : std::runtime_error {
  StageFailure(Stage stage, const std::string& what, bool abort)
      : std::runtime_error(std::string(to_string(stage)) + ": " + what),
        stage(stage),
        abort(abort) {}
  Stage stage;
  bool abort;
};

template <typename Fn>
auto in_stage(Stage stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const TransportError& e) {
    throw StageFailure(stage, e.what(), e.connection_refused());
  } catch (const StageFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw StageFailure(stage, e.what(), false);
  }
}

// Clients and scorer for one run.
struct RunResources {
  std::unique_ptr<JsonServiceClient> ktd, ks, absa, rg;
  std::unique_ptr<SnippetScorer> scorer;
  double threshold = 0.0;

  RunResources(const Engine& engine, const PipelineConfig& config) {
    config.validate();
    if (config.ktd_endpoint) ktd = std::make_unique<JsonServiceClient>(*config.ktd_endpoint);
    if (config.ks_endpoint) ks = std::make_unique<JsonServiceClient>(*config.ks_endpoint);
    if (config.absa_endpoint) absa = std::make_unique<JsonServiceClient>(*config.absa_endpoint);
    if (config.rg_endpoint) rg = std::make_unique<JsonServiceClient>(*config.rg_endpoint);
    if (config.runs(Stage::kKtd) && config.ktd == StageSource::kNative && !engine.detector()) {
      throw UsageError("native detection needs a trained detector; run calibrate first");
    }
    if (config.runs(Stage::kKs) && config.ks != StageSource::kGold) {
      ScorerKind kind = config.ks == StageSource::kExternal ? ScorerKind::kExternal : config.scorer;
      switch (kind) {
        case ScorerKind::kTfidf: scorer = make_tfidf_scorer(engine.index()); break;
        case ScorerKind::kBm25: scorer = make_bm25_scorer(engine.index()); break;
        case ScorerKind::kExternal: scorer = make_external_scorer(*ks, engine.kb()); break;
      }
      std::optional<double> t = config.threshold ? config.threshold : engine.threshold(kind);
      if (!t) {
        throw UsageError("no " + std::string(to_string(kind)) +
                         " threshold; run calibrate or pass a threshold");
      }
      threshold = *t;
    }
  }
};

AnnotationMap annotate(const Engine& engine, const PipelineConfig& config,
                       const RunResources& resources, const SnippetSelection& selection) {
  AnnotationMap out;
  if (config.absa == StageSource::kExternal) {
    std::vector<const KnowledgeSnippet*> snippets;
    for (const auto& s : selection.selected) snippets.push_back(&engine.kb().snippet(s.ref));
    try {
      for (auto& a : external_tag_all(*resources.absa, snippets)) {
        SnippetRef ref = a.ref;
        out.emplace(std::move(ref), std::move(a));
      }
      return out;
    } catch (const Error& e) {
      if (!config.absa_fallback_to_lexicon) throw;
      spdlog::warn("absa service failed, using the lexicon: {}", e.what());
      out.clear();
    }
  }
  for (const auto& s : selection.selected) out.emplace(s.ref, engine.annotations().at(s.ref));
  return out;
}

InstanceOutput process(const Engine& engine, const PipelineConfig& config,
                       const RunResources& resources, const DialogueContext& context,
                       const InstanceLabel* label, const std::optional<Domain>& domain_hint) {
  InstanceOutput out;
  out.instance_id = context.instance_id;
  auto need_label = [&](Stage stage) {
    if (!label) {
      throw StageFailure(stage, "gold source needs labels", false);
    }
  };

  // KTD
  in_stage(Stage::kKtd, [&] {
    switch (config.ktd) {
      case StageSource::kGold:
        need_label(Stage::kKtd);
        out.detected = label->target;
        break;
      case StageSource::kNative: {
        DetectionScore d = detect(*engine.detector(), context);
        out.detected = d.decision;
        out.ktd_logit = d.logit;
        break;
      }
      case StageSource::kExternal: {
        DetectionScore d = external_detect(*resources.ktd, context);
        out.detected = d.decision;
        out.ktd_logit = d.logit;
        break;
      }
    }
  });
  if (!out.detected) {
    out.status = InstanceOutput::Status::kSkipped;
    return out;
  }
  if (!config.runs(Stage::kEt)) return out;

  // ET
  in_stage(Stage::kEt, [&] {
    if (config.et == StageSource::kGold) {
      need_label(Stage::kEt);
      out.entities = label->gold_entities();
    } else {
      TrackResult r =
          engine.tracker().track_with_fallback(context, domain_hint, config.relaxed_track_threshold);
      out.entities = std::move(r.entities);
      out.track_fallback = r.fallback;
    }
  });
  if (!config.runs(Stage::kKs)) return out;

  // KS
  in_stage(Stage::kKs, [&] {
    if (config.ks == StageSource::kGold) {
      need_label(Stage::kKs);
      std::vector<ScoredSnippet> gold;
      for (const auto& ref : label->gold_snippets) gold.push_back({ref, 1.0});
      out.selection = select_snippets(gold, 1.0, context.instance_id);
    } else {
      std::vector<std::size_t> candidates = candidate_snippets(engine.kb(), out.entities);
      out.ranking = score_candidates(*resources.scorer, engine.kb(), context, candidates);
      sort_by_score(out.ranking);
      out.selection = select_snippets(out.ranking, resources.threshold, context.instance_id);
    }
  });
  if (!config.runs(Stage::kRg)) return out;

  // RG
  out.response = in_stage(Stage::kRg, [&]() -> Response {
    if (config.rg == StageSource::kExternal) {
      AnnotationMap annotations = config.use_absa ? annotate(engine, config, resources, out.selection)
                                                  : AnnotationMap{};
      GenerationInput input =
          build_generation_input(context, out.selection, annotations, engine.kb(), config.use_absa);
      return external_generate(*resources.rg, input);
    }
    if (out.selection.selected.empty()) {
      Response r;
      r.text = std::string(kNoFeedbackReply);
      r.empty_selection = true;
      return r;
    }
    if (config.native_rg == NativeRg::kExt) {
      return generate_ext(out.selection, engine.kb(), config.seed);
    }
    AnnotationMap annotations = annotate(engine, config, resources, out.selection);
    return generate_template(context, out.selection, annotations, engine.kb(),
                             engine.tracker().first_mention_order(context));
  });
  return out;
}

}  // namespace

InstanceOutput run_instance(const Engine& engine, const PipelineConfig& config,
                            const DialogueContext& context,
                            const std::optional<Domain>& domain_hint,
                            const InstanceLabel* label) {
  RunResources resources(engine, config);
  try {
    return process(engine, config, resources, context, label, domain_hint);
  } catch (const StageFailure& f) {
    if (f.abort) throw TransportError(f.what(), true);
    throw;
  }
}

PipelineRun run_pipeline(const Engine& engine, const PipelineConfig& config, const Split& split) {
  RunResources resources(engine, config);
  PipelineRun run;
  run.config = config;
  run.outputs.resize(split.instances.size());
  try {
    parallel_for(split.instances.size(), config.workers, [&](std::size_t i) {
      const Instance& instance = split.instances[i];
      try {
        run.outputs[i] =
            process(engine, config, resources, instance.context, &instance.label, std::nullopt);
      } catch (const StageFailure& f) {
        if (f.abort) throw;
        InstanceOutput& o = run.outputs[i];
        o = InstanceOutput{};
        o.instance_id = instance.context.instance_id;
        o.status = InstanceOutput::Status::kQuarantined;
        o.error = f.what();
      }
    });
  } catch (const StageFailure& f) {
    throw TransportError(std::string("run aborted at ") + f.what(), true);
  }
  for (const auto& o : run.outputs) {
    if (o.status == InstanceOutput::Status::kQuarantined) {
      ++run.quarantined;
      spdlog::warn("quarantined {}: {}", o.instance_id, o.error);
    }
  }
  run.report = evaluate_outputs(run.outputs, split, config);
  return run;
}

// --- Evaluation -----------------------------------------------------------------

EvalReport evaluate_outputs(const std::vector<InstanceOutput>& outputs, const Split& gold,
                            const PipelineConfig& config) {
  MetricSelection m;
  m.detection = config.ktd != StageSource::kGold;
  m.tracking = config.runs(Stage::kEt) && config.et != StageSource::kGold;
  m.selection = config.runs(Stage::kKs) && config.ks != StageSource::kGold;
  m.generation = config.runs(Stage::kRg);
  return evaluate_predictions(outputs, gold, m);
}

EvalReport evaluate_predictions(const std::vector<InstanceOutput>& predictions, const Split& gold,
                                const MetricSelection& metrics) {
  std::unordered_map<std::string, const InstanceOutput*> by_id;
  for (const auto& p : predictions) by_id[p.instance_id] = &p;

  std::vector<bool> predicted_target, gold_target;
  std::vector<std::vector<EntityKey>> predicted_entities, gold_entities;
  std::vector<RefSet> predicted_refs, gold_refs;
  std::vector<RankedRelevance> rankings;
  std::vector<std::string> hypotheses, references;
  bool any_ranking = false, any_response = false;

  for (const auto& instance : gold.instances) {
    auto it = by_id.find(instance.context.instance_id);
    if (it == by_id.end()) {
      throw AlignmentError("no prediction for " + instance.context.instance_id);
    }
    const InstanceOutput& p = *it->second;
    if (p.status == InstanceOutput::Status::kQuarantined) continue;
    const InstanceLabel& label = instance.label;

    predicted_target.push_back(p.detected);
    gold_target.push_back(label.target);

    RefSet refs = p.selection.refs();
    predicted_refs.push_back(refs);
    gold_refs.push_back(label.target ? label.gold_snippets : RefSet{});
    rankings.push_back(rank_relevance(p.ranking, gold_refs.back()));
    any_ranking = any_ranking || !p.ranking.empty();

    if (label.target) {
      predicted_entities.push_back(p.entities);
      std::sort(predicted_entities.back().begin(), predicted_entities.back().end());
      gold_entities.push_back(label.gold_entities());
      if (label.reference_response) {
        any_response = any_response || p.response.has_value();
        hypotheses.push_back(p.response ? p.response->text : std::string());
        references.push_back(*label.reference_response);
      }
    }
  }

  EvalReport report;
  if (metrics.detection) report.detection = binary_metrics(predicted_target, gold_target);
  if (metrics.tracking) report.tracking = evaluate_tracking(predicted_entities, gold_entities);
  if (metrics.selection) {
    report.instance = instance_prf(predicted_refs, gold_refs);
    report.snippet = snippet_prf(predicted_refs, gold_refs);
    if (any_ranking) {
      report.map = mean_average_precision(rankings);
      if (report.map->excluded_no_gold > 0) {
        spdlog::info("map: {} instances without gold snippets excluded",
                     report.map->excluded_no_gold);
      }
    }
  }
  if (metrics.generation && any_response && !hypotheses.empty()) {
    report.generation = score_generation(hypotheses, references);
  }
  return report;
}

// --- Prediction files -------------------------------------------------------

namespace {

TrackingFallback parse_fallback(std::string_view text) {
  for (auto f : {TrackingFallback::kNone, TrackingFallback::kRelaxedThreshold,
                 TrackingFallback::kDomain, TrackingFallback::kAll}) {
    if (to_string(f) == text) return f;
  }
  throw DataError("unknown tracking fallback '" + std::string(text) + "'");
}

InstanceOutput::Status parse_status(std::string_view text) {
  if (text == "ok") return InstanceOutput::Status::kOk;
  if (text == "skipped") return InstanceOutput::Status::kSkipped;
  if (text == "quarantined") return InstanceOutput::Status::kQuarantined;
  throw DataError("unknown status '" + std::string(text) + "'");
}

}  // namespace

ordered_json outputs_to_json(const std::vector<InstanceOutput>& outputs, const KnowledgeBase& kb) {
  ordered_json out = ordered_json::array();
  for (const auto& o : outputs) {
    ordered_json item;
    item["instance_id"] = o.instance_id;
    item["status"] = std::string(to_string(o.status));
    if (!o.error.empty()) item["error"] = o.error;
    item["target"] = o.detected;
    if (o.ktd_logit) item["ktd_logit"] = *o.ktd_logit;
    ordered_json entities = ordered_json::array();
    for (const auto& e : o.entities) {
      std::size_t idx = kb.find_entity(e);
      entities.push_back({{"domain", std::string(to_string(e.domain))},
                          {"entity_id", id_to_json(e.entity_id)},
                          {"name", idx == KnowledgeBase::npos ? "" : kb.entities()[idx].name}});
    }
    item["entities"] = entities;
    item["track_fallback"] = std::string(to_string(o.track_fallback));
    ordered_json knowledge = ordered_json::array();
    for (const auto& ref : o.selection.refs()) knowledge.push_back(ref_to_json(ref));
    item["knowledge"] = knowledge;
    item["threshold"] = o.selection.threshold_used;
    ordered_json ranking = ordered_json::array();
    for (const auto& s : o.ranking) {
      ordered_json r = ref_to_json(s.ref);
      r["score"] = s.score;
      ranking.push_back(r);
    }
    item["ranking"] = ranking;
    if (o.response) {
      item["response"] = o.response->text;
      item["empty_selection"] = o.response->empty_selection;
      ordered_json provenance = ordered_json::array();
      for (const auto& p : o.response->provenance) {
        ordered_json r = ref_to_json(p.ref);
        r["polarity"] = std::string(to_string(p.polarity));
        provenance.push_back(r);
      }
      item["provenance"] = provenance;
    }
    out.push_back(item);
  }
  return out;
}

std::vector<InstanceOutput> outputs_from_json(const nlohmann::json& node) {
  if (!node.is_array()) throw DataError("predictions must be an array");
  std::vector<InstanceOutput> out;
  try {
    for (std::size_t i = 0; i < node.size(); ++i) {
      const auto& item = node[i];
      const std::string where = "predictions[" + std::to_string(i) + "]";
      InstanceOutput o;
      o.instance_id = item.at("instance_id").get<std::string>();
      o.status = parse_status(item.value("status", "ok"));
      o.error = item.value("error", "");
      o.detected = item.value("target", false);
      if (item.contains("ktd_logit")) o.ktd_logit = item["ktd_logit"].get<double>();
      if (item.contains("entities")) {
        for (const auto& e : item["entities"]) {
          o.entities.push_back({parse_domain(e.at("domain").get<std::string>()),
                                json_id(e.at("entity_id"), where)});
        }
      }
      if (item.contains("track_fallback")) {
        o.track_fallback = parse_fallback(item["track_fallback"].get<std::string>());
      }
      o.selection.instance_id = o.instance_id;
      o.selection.threshold_used = item.value("threshold", 0.0);
      if (item.contains("knowledge")) {
        for (const auto& k : item["knowledge"]) {
          o.selection.selected.push_back({ref_from_json(k, where), 1.0});
        }
      }
      if (item.contains("ranking")) {
        for (const auto& r : item["ranking"]) {
          o.ranking.push_back({ref_from_json(r, where), r.at("score").get<double>()});
        }
      }
      if (item.contains("response") && item["response"].is_string()) {
        Response r;
        r.text = item["response"].get<std::string>();
        r.empty_selection = item.value("empty_selection", false);
        if (item.contains("provenance")) {
          for (const auto& p : item["provenance"]) {
            r.provenance.push_back(
                {ref_from_json(p, where), parse_polarity(p.value("polarity", "none"))});
          }
        }
        o.response = std::move(r);
      }
      out.push_back(std::move(o));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("predictions: ") + e.what());
  } catch (const ProtocolError& e) {
    throw DataError(std::string("predictions: ") + e.what());
  }
  return out;
}

// --- Calibration ----------------------------------------------------------

ThresholdCalibration calibrate_scorer(const Engine& engine, const SnippetScorer& scorer,
                                      const Split& val, int workers) {
  std::vector<const Instance*> instances;
  for (const auto& instance : val.instances) {
    if (instance.label.target && !instance.label.gold_snippets.empty()) {
      instances.push_back(&instance);
    }
  }
  if (instances.empty()) {
    throw PreconditionError("calibration split has no target instances with gold snippets");
  }
  std::vector<std::vector<ScoredSnippet>> scored(instances.size());
  std::vector<RefSet> gold(instances.size());
  parallel_for(instances.size(), workers, [&](std::size_t i) {
    const Instance& instance = *instances[i];
    std::vector<std::size_t> candidates =
        candidate_snippets(engine.kb(), instance.label.gold_entities());
    scored[i] = score_candidates(scorer, engine.kb(), instance.context, candidates);
    gold[i] = instance.label.gold_snippets;
  });
  std::vector<double> grid =
      scorer.kind() == ScorerKind::kExternal ? logit_grid() : quantile_grid(scored);
  return calibrate_threshold(scored, gold, grid);
}

ordered_json CalibrationSummary::to_json() const {
  ordered_json out;
  out["detector"] = {{"epochs_run", detector.epochs_run},
                     {"best_epoch", detector.best_epoch},
                     {"train_accuracy", detector.train_accuracy},
                     {"val_accuracy", detector.val_accuracy}};
  ordered_json t = ordered_json::object();
  for (const auto& [kind, c] : thresholds) {
    t[std::string(to_string(kind))] = {{"threshold", c.threshold},
                                       {"val_instance_f1", c.f1},
                                       {"grid_points", c.grid.size()}};
  }
  out["thresholds"] = t;
  return out;
}

CalibrationSummary calibrate_all(Engine& engine, const std::filesystem::path& data_dir,
                                 const std::filesystem::path& out_dir, std::uint64_t seed,
                                 int workers) {
  Split train = load_split(data_dir, SplitName::kTrain);
  Split val = load_split(data_dir, SplitName::kVal);
  CalibrationSummary summary;

  DetectorTrainingConfig detector_config;
  detector_config.seed = seed;
  engine.set_detector(train_detector(train, val, detector_config, &summary.detector));

  for (ScorerKind kind : {ScorerKind::kTfidf, ScorerKind::kBm25}) {
    auto scorer = kind == ScorerKind::kTfidf ? make_tfidf_scorer(engine.index())
                                             : make_bm25_scorer(engine.index());
    ThresholdCalibration c = calibrate_scorer(engine, *scorer, val, workers);
    engine.set_threshold(kind, c.threshold);
    spdlog::info("{} threshold {:.6f} (val instance F1 {:.4f})", to_string(kind), c.threshold,
                 c.f1);
    summary.thresholds.emplace(kind, std::move(c));
  }
  engine.save_artifacts(out_dir, seed);
  return summary;
}

}  // namespace sktod
