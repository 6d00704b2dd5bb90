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

// Command-line front end. Talks to the engine only through the C API.

#include <pthread.h>
#include <signal.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sktod/sktod.h"

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kExternal = 3 };

int exit_code(sktod_status status) {
  switch (status) {
    case SKTOD_OK:
      return kOk;
    case SKTOD_ERR_USAGE:
      return kUsage;
    case SKTOD_ERR_EXTERNAL:
      return kExternal;
    default:
      return kData;
  }
}

struct Failure {
  int code;
};

void check(sktod_status status) {
  if (status == SKTOD_OK) return;
  std::cerr << "sktod: " << sktod_last_error() << "\n";
  throw Failure{exit_code(status)};
}

void usage_error(const std::string& message) {
  std::cerr << "sktod: " << message << "\n";
  throw Failure{kUsage};
}

// Owns a string handed out by the library.
class LibString {
 public:
  LibString() = default;
  ~LibString() { sktod_string_free(ptr_); }
  LibString(const LibString&) = delete;
  LibString& operator=(const LibString&) = delete;

  char** out() { return &ptr_; }
  std::string str() const { return ptr_ ? ptr_ : ""; }

 private:
  char* ptr_ = nullptr;
};

class Engine {
 public:
  Engine(const std::string& data_dir, const std::string& artifacts) {
    check(sktod_engine_open(data_dir.c_str(), artifacts.empty() ? nullptr : artifacts.c_str(),
                            &engine_));
  }
  ~Engine() { sktod_engine_close(engine_); }
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  sktod_engine* get() const { return engine_; }

 private:
  sktod_engine* engine_ = nullptr;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "sktod: cannot read " << path << "\n";
    throw Failure{kData};
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << "sktod: cannot write " << path << "\n";
    throw Failure{kData};
  }
}

void emit(const std::string& text) {
  std::cout << text;
  if (text.empty() || text.back() != '\n') std::cout << '\n';
}

struct Globals {
  std::string data_dir = "data";
  std::string artifacts = "artifacts";
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string log_level = "warn";
};

// Pipeline configuration from --config with the global overrides applied.
json base_config(const Globals& g) {
  json config = json::object();
  if (!g.config_path.empty()) {
    try {
      config = json::parse(read_file(g.config_path));
    } catch (const json::parse_error& e) {
      usage_error(g.config_path + ": " + e.what());
    }
    if (!config.is_object()) usage_error(g.config_path + ": expected a JSON object");
  }
  if (g.seed) config["seed"] = *g.seed;
  if (g.workers) config["workers"] = *g.workers;
  return config;
}

// The artifacts directory is optional; it is only passed when present.
std::string artifacts_if_present(const std::string& dir) {
  return std::filesystem::exists(std::filesystem::path(dir) / "config.json") ? dir : "";
}

struct RunResult {
  std::string predictions;
  std::string report;
};

RunResult run(const Engine& engine, const Globals& g, const std::string& split, const json& config) {
  RunResult result;
  LibString predictions, report;
  std::string config_text = config.dump();
  check(sktod_run(engine.get(), g.data_dir.c_str(), split.c_str(), config_text.c_str(),
                  predictions.out(), report.out()));
  result.predictions = predictions.str();
  result.report = report.str();
  return result;
}

void finish_run(const RunResult& r, const std::string& out_path) {
  if (!out_path.empty()) write_file(out_path, r.predictions);
  emit(r.report);
}

// Upstream stages of a single-stage command come from gold labels unless
// --predicted-upstream is given.
void set_upstream_gold(json& config, const std::vector<std::string>& stages) {
  for (const auto& s : stages) config[s] = "gold";
}

std::optional<std::string> split_from_gold_path(const std::string& gold, std::string& data_dir) {
  // --gold accepts a split name or a <data_dir>/<split> directory.
  if (gold == "train" || gold == "val" || gold == "test") return gold;
  std::filesystem::path p(gold);
  if (std::filesystem::is_regular_file(p)) p = p.parent_path();
  if (!std::filesystem::is_directory(p)) return std::nullopt;
  p = std::filesystem::weakly_canonical(p);
  data_dir = p.parent_path().string();
  return p.filename().string();
}

const std::vector<std::string> kAblationRows = {"RG", "+KS", "+ET+KS", "+KTD+ET+KS"};

int serve(const Engine& engine, const json& pipeline, const std::string& host, int port,
          const std::string& static_dir, const std::string& event_log, long long ttl_s,
          int threads) {
  ordered_json service_config;
  service_config["pipeline"] = pipeline;
  service_config["session_ttl_s"] = ttl_s;
  service_config["http_threads"] = threads;
  if (!static_dir.empty()) service_config["static_dir"] = static_dir;
  if (!event_log.empty()) service_config["event_log"] = event_log;

  // Block the shutdown signals before the server threads start so that only
  // the sigwait below sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  sktod_service* service = nullptr;
  std::string text = service_config.dump();
  check(sktod_service_create(engine.get(), text.c_str(), &service));
  sktod_status status = sktod_service_start(service, host.c_str(), port);
  if (status != SKTOD_OK) {
    sktod_service_destroy(service);
    check(status);
  }
  std::cerr << "sktod: serving on http://" << host << ":" << sktod_service_port(service) << "\n";
  int received = 0;
  sigwait(&signals, &received);
  std::cerr << "sktod: shutting down\n";
  sktod_service_destroy(service);
  return kOk;
}

int main_impl(int argc, char** argv) {
  CLI::App app{"Subjective-knowledge task-oriented dialogue engine"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sktod_version()));

  Globals g;
  std::uint64_t seed = 0;
  int workers = 0;
  app.add_option("--data-dir", g.data_dir, "Directory with knowledge.json and split folders")
      ->capture_default_str();
  app.add_option("--artifacts", g.artifacts, "Calibration artifacts directory")
      ->capture_default_str();
  app.add_option("--config", g.config_path, "Pipeline configuration (JSON)");
  auto* seed_opt = app.add_option("--seed", seed, "Random seed");
  auto* workers_opt = app.add_option("--workers", workers, "Worker threads (0: all cores)");
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")
      ->capture_default_str();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load data, check integrity, print statistics");
  std::string ingest_split;
  bool check_integrity = false;
  ingest->add_option("--split", ingest_split, "Only report this split");
  ingest->add_flag("--check-integrity", check_integrity, "Exit with status 2 on integrity problems");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "Train the detector and calibrate thresholds");
  std::string calibrate_out;
  calibrate->add_option("--out", calibrate_out, "Output directory (default: --artifacts)");

  // detect
  auto* detect = app.add_subcommand("detect", "Knowledge-seeking turn detection");
  std::string split = "test", out_path;
  detect->add_option("--model", g.artifacts, "Artifacts directory holding detector.json");

  // track
  auto* track = app.add_subcommand("track", "Entity tracking");
  std::string errors_path;
  track->add_option("--report", errors_path, "Write tracking errors as TSV");

  // select
  auto* select = app.add_subcommand("select", "Knowledge selection");
  std::string scorer;
  bool calibrate_threshold = false;
  std::optional<double> threshold;
  select->add_option("--scorer", scorer, "tfidf|bm25|external")
      ->check(CLI::IsMember({"tfidf", "bm25", "external"}));
  select->add_flag("--calibrate", calibrate_threshold, "Calibrate the threshold on val first");
  select->add_option("--threshold", threshold, "Fixed relevance threshold");

  // generate
  auto* generate = app.add_subcommand("generate", "Response generation");
  std::string mode;
  bool use_absa = false;
  generate->add_option("--mode", mode, "ext|template|external")
      ->check(CLI::IsMember({"ext", "template", "external"}));
  generate->add_flag("--use-absa", use_absa, "Add sentiment phrases to the generator input");

  bool predicted_upstream = false;
  for (auto* sub : {detect, track, select, generate}) {
    sub->add_option("--split", split, "train|val|test")->capture_default_str();
    sub->add_option("--out", out_path, "Write predictions JSON here");
    if (sub != detect) {
      sub->add_flag("--predicted-upstream", predicted_upstream,
                    "Feed earlier stages from predictions instead of gold");
    }
  }

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a predictions file");
  std::string pred_path, gold = "test", metrics = "all";
  evaluate->add_option("--pred", pred_path, "Predictions JSON")->required();
  evaluate->add_option("--gold", gold, "Split name or split directory")->capture_default_str();
  evaluate->add_option("--metrics", metrics, "all or detection,tracking,selection,generation")
      ->capture_default_str();

  // e2e
  auto* e2e = app.add_subcommand("e2e", "End-to-end runs and the ablation table");
  std::string row;
  bool ablation = false;
  std::string out_dir;
  e2e->add_option("--split", split, "train|val|test")->capture_default_str();
  auto* row_opt = e2e->add_option("--row", row, "RG|+KS|+ET+KS|+KTD+ET+KS");
  e2e->add_flag("--ablation", ablation, "Run every row")->excludes(row_opt);
  e2e->add_option("--out-dir", out_dir, "Write per-row predictions and reports here");

  // export-pairs
  auto* pairs = app.add_subcommand("export-pairs", "Relevance training pairs as JSON lines");
  std::string pairs_split = "train", pairs_out;
  pairs->add_option("--split", pairs_split, "train|val|test")->capture_default_str();
  pairs->add_option("--out", pairs_out, "Output file (default: stdout)");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Interactive HTTP dialogue service");
  std::string host = "127.0.0.1", static_dir, event_log;
  int port = 8080, http_threads = 8;
  long long ttl_s = 1800;
  serve_cmd->add_option("--host", host)->capture_default_str();
  serve_cmd->add_option("--port", port, "0 picks a free port")->capture_default_str();
  serve_cmd->add_option("--static", static_dir, "Serve a browser client from this directory");
  serve_cmd->add_option("--event-log", event_log, "Append-only session log (JSONL)");
  serve_cmd->add_option("--session-ttl", ttl_s, "Idle session lifetime in seconds")
      ->capture_default_str();
  serve_cmd->add_option("--http-threads", http_threads)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (*seed_opt) g.seed = seed;
  if (*workers_opt) g.workers = workers;
  check(sktod_set_log_level(g.log_level.c_str()));

  if (ingest->parsed()) {
    LibString report;
    check(sktod_ingest(g.data_dir.c_str(), report.out()));
    json doc = json::parse(report.str());
    bool ok = doc.value("ok", false);
    if (!ingest_split.empty()) {
      if (!doc["splits"].contains(ingest_split)) {
        std::cerr << "sktod: split '" << ingest_split << "' not found under " << g.data_dir << "\n";
        return kData;
      }
      json only = doc["splits"][ingest_split];
      ok = only.value("dangling_refs", 0) == 0 && only.value("label_violations", 0) == 0;
      doc["splits"] = json{{ingest_split, only}};
      doc["ok"] = ok;
    }
    emit(doc.dump(2));
    if (check_integrity && !ok) {
      std::cerr << "sktod: integrity check failed\n";
      return kData;
    }
    return kOk;
  }

  if (evaluate->parsed()) {
    std::string data_dir = g.data_dir;
    auto resolved = split_from_gold_path(gold, data_dir);
    if (!resolved) usage_error("--gold must be a split name or a split directory");
    std::string predictions = read_file(pred_path);
    LibString report;
    check(sktod_evaluate(data_dir.c_str(), resolved->c_str(), predictions.c_str(), metrics.c_str(),
                         report.out()));
    emit(report.str());
    return kOk;
  }

  json config = base_config(g);

  if (calibrate->parsed()) {
    Engine engine(g.data_dir, "");
    std::string out = calibrate_out.empty() ? g.artifacts : calibrate_out;
    LibString summary;
    check(sktod_calibrate(engine.get(), g.data_dir.c_str(), out.c_str(),
                          config.value("seed", std::uint64_t{42}), config.value("workers", 0),
                          summary.out()));
    emit(summary.str());
    return kOk;
  }

  Engine engine(g.data_dir, artifacts_if_present(g.artifacts));

  if (pairs->parsed()) {
    LibString jsonl;
    check(sktod_export_pairs(engine.get(), g.data_dir.c_str(), pairs_split.c_str(),
                             config.value("seed", std::uint64_t{42}), jsonl.out()));
    if (pairs_out.empty()) {
      std::cout << jsonl.str();
    } else {
      write_file(pairs_out, jsonl.str());
    }
    return kOk;
  }

  if (detect->parsed()) {
    config["last_stage"] = "ktd";
    finish_run(run(engine, g, split, config), out_path);
    return kOk;
  }

  if (track->parsed()) {
    config["last_stage"] = "et";
    if (!predicted_upstream) set_upstream_gold(config, {"ktd"});
    RunResult r = run(engine, g, split, config);
    finish_run(r, out_path);
    if (!errors_path.empty()) {
      LibString tsv;
      check(sktod_tracking_errors(g.data_dir.c_str(), split.c_str(), r.predictions.c_str(),
                                  tsv.out()));
      write_file(errors_path, tsv.str());
    }
    return kOk;
  }

  if (select->parsed()) {
    config["last_stage"] = "ks";
    if (!predicted_upstream) set_upstream_gold(config, {"ktd", "et"});
    if (scorer == "external") {
      config["ks"] = "external";
    } else if (!scorer.empty()) {
      config["scorer"] = scorer;
      config["ks"] = "native";
    }
    if (threshold) config["threshold"] = *threshold;
    if (calibrate_threshold) {
      LibString calibration;
      std::string text = config.dump();
      check(sktod_calibrate_threshold(engine.get(), g.data_dir.c_str(), text.c_str(),
                                      calibration.out()));
      std::cerr << calibration.str() << "\n";
    }
    finish_run(run(engine, g, split, config), out_path);
    return kOk;
  }

  if (generate->parsed()) {
    config["last_stage"] = "rg";
    if (!predicted_upstream) set_upstream_gold(config, {"ktd", "et", "ks"});
    if (mode == "external") {
      config["rg"] = "external";
    } else if (!mode.empty()) {
      config["rg"] = "native";
      config["native_rg"] = mode;
    }
    if (use_absa) config["use_absa"] = true;
    finish_run(run(engine, g, split, config), out_path);
    return kOk;
  }

  if (e2e->parsed()) {
    std::vector<std::string> rows;
    if (ablation) {
      rows = kAblationRows;
    } else {
      rows.push_back(row.empty() ? "+KTD+ET+KS" : row);
    }
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
    ordered_json table = ordered_json::array();
    std::string base = config.dump();
    for (const auto& r : rows) {
      LibString row_config;
      check(sktod_ablation_config(base.c_str(), r.c_str(), row_config.out()));
      RunResult result = run(engine, g, split, json::parse(row_config.str()));
      ordered_json report = ordered_json::parse(result.report);
      ordered_json entry;
      entry["row"] = r;
      entry["generation"] = report["metrics"].contains("generation")
                                ? report["metrics"]["generation"]
                                : ordered_json();
      entry["quarantined"] = report["quarantined"];
      table.push_back(entry);
      if (!out_dir.empty()) {
        std::string stem = r;
        for (char& c : stem) {
          if (c == '+') c = '_';
        }
        if (stem.front() == '_') stem.erase(0, 1);
        write_file(out_dir + "/" + stem + ".predictions.json", result.predictions);
        write_file(out_dir + "/" + stem + ".report.json", result.report);
      }
    }
    emit(ordered_json{{"split", split}, {"rows", table}}.dump(2));
    return kOk;
  }

  if (serve_cmd->parsed()) {
    return serve(engine, config, host, port, static_dir, event_log, ttl_s, http_threads);
  }
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return main_impl(argc, argv);
  } catch (const Failure& f) {
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "sktod: " << e.what() << "\n";
    return kData;
  }
}
