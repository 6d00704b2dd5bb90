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

#include "sktod/sktod.h"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <map>
#include <cstring>
#include <filesystem>
#include <memory>
#include <optional>
#include <new>
#include <sstream>
#include <string>

#include "json.hpp"
#include "sktod/corpus.hpp"
#include "sktod/error.hpp"
#include "sktod/runtime.hpp"
#include "sktod/service.hpp"

struct sktod_engine {
  std::unique_ptr<sktod::Engine> engine;
};

struct sktod_service {
  const sktod::Engine* engine = nullptr;
  std::unique_ptr<sktod::DialogueService> service;
};

namespace {

using nlohmann::ordered_json;

thread_local std::string last_error;

// Results go to stdout in the CLI, so library logging uses stderr.
[[maybe_unused]] const bool stderr_logger_installed = [] {
  auto logger = spdlog::stderr_color_mt("sktod");
  spdlog::set_default_logger(logger);
  return true;
}();

sktod_status status_of(sktod::ErrorKind kind) {
  switch (kind) {
    case sktod::ErrorKind::kUsage:
    case sktod::ErrorKind::kPrecondition:
      return SKTOD_ERR_USAGE;
    case sktod::ErrorKind::kData:
      return SKTOD_ERR_DATA;
    case sktod::ErrorKind::kTransport:
    case sktod::ErrorKind::kProtocol:
      return SKTOD_ERR_EXTERNAL;
    case sktod::ErrorKind::kNotFound:
      return SKTOD_ERR_NOT_FOUND;
  }
  return SKTOD_ERR_INTERNAL;
}

template <typename Fn>
sktod_status guard(Fn&& fn) {
  last_error.clear();
  try {
    fn();
    return SKTOD_OK;
  } catch (const sktod::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    last_error = e.what();
    return SKTOD_ERR_DATA;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return SKTOD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return SKTOD_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return SKTOD_ERR_INTERNAL;
  }
}

char* copy_out(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_out(char** out, const std::string& s) {
  if (out) *out = copy_out(s);
}

void require(const void* p, const char* what) {
  if (!p) throw sktod::UsageError(std::string(what) + " must not be NULL");
}

nlohmann::json parse_json_arg(const char* text, const char* what) {
  if (!text || !*text) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw sktod::UsageError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

sktod::PipelineConfig config_arg(const char* text) {
  return sktod::PipelineConfig::from_json(parse_json_arg(text, "config"));
}

ordered_json stats_json(const sktod::CorpusStats& s) {
  return {{"instances", s.instances},
          {"target_instances", s.target_instances},
          {"multi_entity_instances", s.multi_entity_instances},
          {"avg_snippets_per_instance", s.avg_snippets_per_instance},
          {"avg_tokens_per_snippet", s.avg_tokens_per_snippet},
          {"avg_utterances_per_instance", s.avg_utterances_per_instance},
          {"avg_tokens_per_request", s.avg_tokens_per_request},
          {"avg_tokens_per_response", s.avg_tokens_per_response}};
}

nlohmann::json parse_predictions(const char* text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw sktod::ParseError("predictions", e.byte, e.what());
  }
}

std::string join_entities(const std::vector<sktod::EntityKey>& keys) {
  std::string out;
  for (const auto& k : keys) {
    if (!out.empty()) out += ',';
    out += std::string(sktod::to_string(k.domain)) + ':' + k.entity_id;
  }
  return out;
}

}  // namespace

extern "C" {

const char* sktod_version(void) { return "0.1.0"; }

const char* sktod_last_error(void) { return last_error.c_str(); }

void sktod_string_free(char* s) { std::free(s); }

sktod_status sktod_set_log_level(const char* level) {
  return guard([&] {
    require(level, "level");
    auto parsed = spdlog::level::from_str(level);
    if (parsed == spdlog::level::off && std::strcmp(level, "off") != 0) {
      throw sktod::UsageError(std::string("unknown log level '") + level + "'");
    }
    spdlog::set_level(parsed);
  });
}

sktod_status sktod_ingest(const char* data_dir, char** report_json) {
  return guard([&] {
    require(data_dir, "data_dir");
    sktod::KnowledgeBase kb = sktod::load_knowledge_base(data_dir);
    ordered_json report;
    report["knowledge"] = {{"entities", kb.entity_count()},
                           {"reviews", kb.review_count()},
                           {"snippets", kb.snippet_count()}};
    ordered_json splits = ordered_json::object();
    bool ok = true;
    for (auto name : {sktod::SplitName::kTrain, sktod::SplitName::kVal, sktod::SplitName::kTest}) {
      std::filesystem::path dir = std::filesystem::path(data_dir) / std::string(sktod::to_string(name));
      if (!std::filesystem::exists(dir / "logs.json")) continue;
      sktod::Split split = sktod::load_split(data_dir, name);
      sktod::IntegrityReport integrity = sktod::check_integrity(split, kb);
      ok = ok && integrity.ok();
      ordered_json node = stats_json(sktod::corpus_stats(split, &kb));
      node["dangling_refs"] = integrity.dangling_refs;
      node["label_violations"] = integrity.label_violations;
      node["problems"] = integrity.messages;
      splits[std::string(sktod::to_string(name))] = node;
    }
    report["splits"] = splits;
    report["ok"] = ok;
    set_out(report_json, report.dump(2));
  });
}

sktod_status sktod_engine_open(const char* data_dir, const char* artifacts_dir,
                               sktod_engine** out) {
  return guard([&] {
    require(data_dir, "data_dir");
    require(out, "out");
    std::optional<std::filesystem::path> artifacts;
    if (artifacts_dir && *artifacts_dir) artifacts = artifacts_dir;
    auto handle = std::make_unique<sktod_engine>();
    handle->engine = sktod::Engine::open(data_dir, artifacts);
    *out = handle.release();
  });
}

void sktod_engine_close(sktod_engine* engine) { delete engine; }

sktod_status sktod_engine_info(const sktod_engine* engine, char** info_json) {
  return guard([&] {
    require(engine, "engine");
    const sktod::Engine& e = *engine->engine;
    ordered_json info = {{"entities", e.kb().entity_count()},
                         {"snippets", e.kb().snippet_count()},
                         {"vocabulary", e.index().vocabulary_size()},
                         {"detector", e.detector() != nullptr}};
    ordered_json thresholds = ordered_json::object();
    for (auto kind : {sktod::ScorerKind::kTfidf, sktod::ScorerKind::kBm25, sktod::ScorerKind::kExternal}) {
      if (auto t = e.threshold(kind)) thresholds[std::string(sktod::to_string(kind))] = *t;
    }
    info["thresholds"] = thresholds;
    set_out(info_json, info.dump(2));
  });
}

sktod_status sktod_calibrate(sktod_engine* engine, const char* data_dir, const char* out_dir,
                             uint64_t seed, int workers, char** summary_json) {
  return guard([&] {
    require(engine, "engine");
    require(data_dir, "data_dir");
    require(out_dir, "out_dir");
    sktod::CalibrationSummary summary =
        sktod::calibrate_all(*engine->engine, data_dir, out_dir, seed, workers);
    set_out(summary_json, summary.to_json().dump(2));
  });
}

sktod_status sktod_calibrate_threshold(sktod_engine* engine, const char* data_dir,
                                       const char* config_json, char** calibration_json) {
  return guard([&] {
    require(engine, "engine");
    require(data_dir, "data_dir");
    sktod::PipelineConfig config = config_arg(config_json);
    sktod::Split val = sktod::load_split(data_dir, sktod::SplitName::kVal);
    sktod::ScorerKind kind =
        config.ks == sktod::StageSource::kExternal ? sktod::ScorerKind::kExternal : config.scorer;
    std::unique_ptr<sktod::JsonServiceClient> client;
    std::unique_ptr<sktod::SnippetScorer> scorer;
    switch (kind) {
      case sktod::ScorerKind::kTfidf:
        scorer = sktod::make_tfidf_scorer(engine->engine->index());
        break;
      case sktod::ScorerKind::kBm25:
        scorer = sktod::make_bm25_scorer(engine->engine->index());
        break;
      case sktod::ScorerKind::kExternal:
        if (!config.ks_endpoint) throw sktod::UsageError("external scorer needs a ks endpoint");
        client = std::make_unique<sktod::JsonServiceClient>(*config.ks_endpoint);
        scorer = sktod::make_external_scorer(*client, engine->engine->kb());
        break;
    }
    sktod::ThresholdCalibration c =
        sktod::calibrate_scorer(*engine->engine, *scorer, val, config.workers);
    engine->engine->set_threshold(kind, c.threshold);
    ordered_json out = {{"scorer", std::string(sktod::to_string(kind))},
                        {"threshold", c.threshold},
                        {"val_instance_f1", c.f1},
                        {"grid_points", c.grid.size()}};
    set_out(calibration_json, out.dump(2));
  });
}

sktod_status sktod_ablation_config(const char* base_config_json, const char* row,
                                   char** config_json) {
  return guard([&] {
    require(row, "row");
    sktod::PipelineConfig base = config_arg(base_config_json);
    sktod::PipelineConfig c = sktod::ablation_config(sktod::parse_ablation_row(row), base);
    set_out(config_json, c.to_json().dump());
  });
}

sktod_status sktod_run(sktod_engine* engine, const char* data_dir, const char* split,
                       const char* config_json, char** predictions_json, char** report_json) {
  return guard([&] {
    require(engine, "engine");
    require(data_dir, "data_dir");
    require(split, "split");
    sktod::PipelineConfig config = config_arg(config_json);
    sktod::Split data = sktod::load_split(data_dir, sktod::parse_split_name(split));
    sktod::PipelineRun run = sktod::run_pipeline(*engine->engine, config, data);
    if (predictions_json) {
      *predictions_json = copy_out(sktod::outputs_to_json(run.outputs, engine->engine->kb()).dump(1));
    }
    if (report_json) {
      ordered_json report = nlohmann::ordered_json::parse(sktod::to_json(run.report, -1));
      ordered_json wrapped;
      wrapped["split"] = split;
      wrapped["config"] = config.to_json();
      wrapped["instances"] = run.outputs.size();
      wrapped["quarantined"] = run.quarantined;
      wrapped["metrics"] = report;
      *report_json = copy_out(wrapped.dump(2));
    }
  });
}

sktod_status sktod_evaluate(const char* data_dir, const char* split, const char* predictions_json,
                            const char* metrics, char** report_json) {
  return guard([&] {
    require(data_dir, "data_dir");
    require(split, "split");
    require(predictions_json, "predictions_json");
    sktod::MetricSelection selection;
    std::string list = metrics && *metrics ? metrics : "all";
    if (list != "all") {
      selection = {false, false, false, false};
      std::stringstream in(list);
      std::string item;
      while (std::getline(in, item, ',')) {
        if (item == "detection") selection.detection = true;
        else if (item == "tracking") selection.tracking = true;
        else if (item == "selection") selection.selection = true;
        else if (item == "generation") selection.generation = true;
        else throw sktod::UsageError("unknown metric group '" + item + "'");
      }
    }
    nlohmann::json predictions = parse_predictions(predictions_json);
    sktod::Split gold = sktod::load_split(data_dir, sktod::parse_split_name(split));
    sktod::EvalReport report =
        sktod::evaluate_predictions(sktod::outputs_from_json(predictions), gold, selection);
    set_out(report_json, sktod::to_json(report, 2));
  });
}

sktod_status sktod_tracking_errors(const char* data_dir, const char* split,
                                   const char* predictions_json, char** tsv) {
  return guard([&] {
    require(data_dir, "data_dir");
    require(split, "split");
    require(predictions_json, "predictions_json");
    auto outputs = sktod::outputs_from_json(parse_predictions(predictions_json));
    std::map<std::string, const sktod::InstanceOutput*> by_id;
    for (const auto& o : outputs) by_id[o.instance_id] = &o;
    sktod::Split gold = sktod::load_split(data_dir, sktod::parse_split_name(split));
    std::string out = "instance_id\tkind\tpredicted\tgold\n";
    for (const auto& instance : gold.instances) {
      if (!instance.label.target) continue;
      auto it = by_id.find(instance.context.instance_id);
      if (it == by_id.end()) {
        throw sktod::AlignmentError("no prediction for instance '" +
                                    instance.context.instance_id + "'");
      }
      std::vector<sktod::EntityKey> predicted = it->second->entities;
      std::sort(predicted.begin(), predicted.end());
      predicted.erase(std::unique(predicted.begin(), predicted.end()), predicted.end());
      std::vector<sktod::EntityKey> expected = instance.label.gold_entities();
      if (predicted == expected) continue;
      bool missing = !std::includes(predicted.begin(), predicted.end(), expected.begin(), expected.end());
      bool spurious = !std::includes(expected.begin(), expected.end(), predicted.begin(), predicted.end());
      const char* kind = missing && spurious ? "both" : missing ? "missing" : "spurious";
      out += instance.context.instance_id + '\t' + kind + '\t' + join_entities(predicted) + '\t' +
             join_entities(expected) + '\n';
    }
    set_out(tsv, out);
  });
}

sktod_status sktod_export_pairs(const sktod_engine* engine, const char* data_dir,
                                const char* split, uint64_t seed, char** jsonl) {
  return guard([&] {
    require(engine, "engine");
    require(data_dir, "data_dir");
    require(split, "split");
    sktod::Split data = sktod::load_split(data_dir, sktod::parse_split_name(split));
    auto pairs = sktod::export_training_pairs(data, engine->engine->kb(), seed);
    set_out(jsonl, sktod::training_pairs_to_jsonl(pairs, engine->engine->kb()));
  });
}

sktod_status sktod_service_create(const sktod_engine* engine, const char* service_json,
                                  sktod_service** out) {
  return guard([&] {
    require(engine, "engine");
    require(out, "out");
    nlohmann::json node = parse_json_arg(service_json, "service config");
    sktod::ServiceConfig config;
    try {
      for (const auto& [key, value] : node.items()) {
        if (key == "pipeline") config.pipeline = sktod::PipelineConfig::from_json(value);
        else if (key == "session_ttl_s") config.session_ttl = std::chrono::seconds(value.get<long long>());
        else if (key == "event_log") config.event_log = value.get<std::string>();
        else if (key == "static_dir") config.static_dir = value.get<std::string>();
        else if (key == "http_threads") config.http_threads = value.get<int>();
        else throw sktod::UsageError("unknown service config key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw sktod::UsageError(std::string("service config: ") + e.what());
    }
    auto handle = std::make_unique<sktod_service>();
    handle->engine = engine->engine.get();
    handle->service = std::make_unique<sktod::DialogueService>(*engine->engine, std::move(config));
    *out = handle.release();
  });
}

sktod_status sktod_service_start(sktod_service* service, const char* host, int port) {
  return guard([&] {
    require(service, "service");
    service->service->start(host && *host ? host : "127.0.0.1", port);
  });
}

int sktod_service_port(const sktod_service* service) {
  return service ? service->service->port() : -1;
}

void sktod_service_destroy(sktod_service* service) { delete service; }

sktod_status sktod_session_create(sktod_service* service, const char* domain, char** session_id) {
  return guard([&] {
    require(service, "service");
    require(session_id, "session_id");
    std::optional<sktod::Domain> d;
    if (domain && *domain) {
      try {
        d = sktod::parse_domain(domain);
      } catch (const sktod::DataError& e) {
        throw sktod::UsageError(e.what());
      }
    }
    *session_id = copy_out(service->service->create_session(d));
  });
}

sktod_status sktod_session_utterance(sktod_service* service, const char* session_id,
                                     const char* text, char** turn_json) {
  return guard([&] {
    require(service, "service");
    require(session_id, "session_id");
    require(text, "text");
    sktod::TurnResult result = service->service->handle_utterance(session_id, text);
    set_out(turn_json, result.to_json(service->engine->kb()).dump());
  });
}

sktod_status sktod_session_transcript(sktod_service* service, const char* session_id,
                                      char** transcript_json) {
  return guard([&] {
    require(service, "service");
    require(session_id, "session_id");
    set_out(transcript_json, service->service->transcript(session_id).dump(2));
  });
}

}  // extern "C"
