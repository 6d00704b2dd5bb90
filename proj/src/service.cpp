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

#include "sktod/service.hpp"

#include <spdlog/spdlog.h>

#include <ctime>
#include <fstream>
#include <random>

#include "httplib.h"
#include "json_util.hpp"
#include "sktod/error.hpp"
#include "sktod/text.hpp"

namespace sktod {

using nlohmann::ordered_json;

namespace {

ordered_json entity_json(const EntityKey& key, const KnowledgeBase& kb) {
  std::size_t idx = kb.find_entity(key);
  return {{"domain", std::string(to_string(key.domain))},
          {"entity_id", id_to_json(key.entity_id)},
          {"name", idx == KnowledgeBase::npos ? std::string() : kb.entities()[idx].name}};
}

std::string iso_time(std::chrono::system_clock::time_point t) {
  std::time_t seconds = std::chrono::system_clock::to_time_t(t);
  std::tm utc{};
  gmtime_r(&seconds, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

std::string new_session_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  char buffer[33];
  std::snprintf(buffer, sizeof buffer, "%016llx%016llx",
                static_cast<unsigned long long>(rng()), static_cast<unsigned long long>(rng()));
  return buffer;
}

}  // namespace

ordered_json TurnResult::to_json(const KnowledgeBase& kb) const {
  ordered_json out;
  out["session_id"] = session_id;
  out["turn"] = turn;
  out["user"] = user_text;
  out["response"] = response;
  out["detected"] = detected;
  ordered_json ents = ordered_json::array();
  for (const auto& e : entities) ents.push_back(entity_json(e, kb));
  out["entities"] = ents;
  ordered_json grounding = ordered_json::array();
  for (const auto& g : grounded) {
    ordered_json item = {{"text", g.text}, {"ref", ref_to_json(g.ref)},
                         {"polarity", std::string(to_string(g.polarity))}};
    item["aspect"] = g.aspect ? ordered_json(*g.aspect) : ordered_json(nullptr);
    grounding.push_back(item);
  }
  out["grounded"] = grounding;
  ordered_json tallies = ordered_json::array();
  for (const auto& [key, t] : tally) {
    ordered_json item = entity_json(key, kb);
    item["positive"] = t.positive;
    item["neutral"] = t.neutral;
    item["negative"] = t.negative;
    item["none"] = t.none;
    item["total"] = t.total;
    tallies.push_back(item);
  }
  out["tally"] = tallies;
  return out;
}

struct DialogueService::Session {
  std::string id;
  std::optional<Domain> domain;
  std::chrono::system_clock::time_point created;
  std::chrono::system_clock::time_point last_active;
  DialogueContext context;
  std::vector<ordered_json> turns;
  std::mutex mutex;  // one in-flight turn per session
};

DialogueService::DialogueService(const Engine& engine, ServiceConfig config, Clock clock)
    : engine_(engine), config_(std::move(config)), clock_(std::move(clock)) {
  if (!clock_) clock_ = [] { return std::chrono::system_clock::now(); };
  PipelineConfig& p = config_.pipeline;
  if (p.et == StageSource::kGold || p.ks == StageSource::kGold) {
    throw UsageError("live sessions have no labels; ET and KS cannot be gold");
  }
  p.last_stage = Stage::kRg;
  ktd_available_ = p.ktd == StageSource::kExternal ||
                   (p.ktd == StageSource::kNative && engine_.detector() != nullptr);
  if (!ktd_available_) {
    spdlog::warn("no detector loaded; every turn is treated as knowledge-seeking");
  }
  p.validate();
  // Fails early when no threshold is available.
  if (p.ks != StageSource::kExternal && p.scorer != ScorerKind::kExternal && !p.threshold &&
      !engine_.threshold(p.scorer)) {
    throw UsageError("no " + std::string(to_string(p.scorer)) +
                     " threshold; run calibrate or pass a threshold");
  }
  if (config_.event_log) replay_log();
}

DialogueService::~DialogueService() { stop(); }

void DialogueService::expire_locked(std::chrono::system_clock::time_point now) {
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (now - it->second->last_active > config_.session_ttl) {
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
}

std::shared_ptr<DialogueService::Session> DialogueService::find(const std::string& session_id) {
  std::lock_guard<std::mutex> lock(sessions_mutex_);
  expire_locked(clock_());
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw NotFoundError("unknown or expired session '" + session_id + "'");
  return it->second;
}

std::size_t DialogueService::session_count() {
  std::lock_guard<std::mutex> lock(sessions_mutex_);
  expire_locked(clock_());
  return sessions_.size();
}

std::string DialogueService::create_session(std::optional<Domain> domain) {
  auto session = std::make_shared<Session>();
  session->domain = domain;
  session->created = session->last_active = clock_();
  {
    std::lock_guard<std::mutex> lock(sessions_mutex_);
    expire_locked(session->created);
    do {
      session->id = new_session_id();
    } while (sessions_.count(session->id));
    session->context.instance_id = session->id;
    sessions_[session->id] = session;
  }
  ordered_json event = {{"event", "session"}, {"session_id", session->id}};
  event["domain"] = domain ? ordered_json(std::string(to_string(*domain))) : ordered_json(nullptr);
  event["at"] = iso_time(session->created);
  log_event(event);
  return session->id;
}

TurnResult DialogueService::handle_utterance(const std::string& session_id,
                                             const std::string& text) {
  std::string clean = trim(text);
  if (clean.empty()) throw UsageError("utterance text must not be empty");
  std::shared_ptr<Session> session = find(session_id);
  std::lock_guard<std::mutex> lock(session->mutex);

  DialogueContext context = session->context;
  context.utterances.push_back(
      {Speaker::kUser, clean, static_cast<int>(context.utterances.size())});

  PipelineConfig config = config_.pipeline;
  InstanceLabel assume_target;
  assume_target.target = true;
  const InstanceLabel* label = nullptr;
  if (!ktd_available_) {
    config.ktd = StageSource::kGold;
    label = &assume_target;
  }
  InstanceOutput output = run_instance(engine_, config, context, session->domain, label);

  TurnResult result;
  result.session_id = session->id;
  result.turn = static_cast<int>(session->turns.size());
  result.user_text = clean;
  result.detected = output.detected;
  if (!output.detected) {
    result.response = std::string(kTaskReply);
  } else {
    result.entities = output.entities;
    result.response = output.response ? output.response->text : std::string(kNoFeedbackReply);
    std::map<SnippetRef, Polarity> provenance;
    if (output.response) {
      for (const auto& p : output.response->provenance) provenance[p.ref] = p.polarity;
    }
    for (const auto& s : output.selection.selected) {
      const SentimentAnnotation& a = engine_.annotations().at(s.ref);
      TurnResult::Grounding g;
      g.ref = s.ref;
      g.text = engine_.kb().snippet(s.ref).text;
      auto it = provenance.find(s.ref);
      g.polarity = it != provenance.end() && it->second != Polarity::kNone ? it->second : a.polarity;
      g.aspect = a.aspect_term;
      result.grounded.push_back(std::move(g));
    }
    for (const auto& g : result.grounded) {
      SentimentTally& t = result.tally[entity_of(g.ref)];
      ++t.total;
      switch (g.polarity) {
        case Polarity::kPositive: ++t.positive; break;
        case Polarity::kNeutral: ++t.neutral; break;
        case Polarity::kNegative: ++t.negative; break;
        case Polarity::kNone: ++t.none; break;
      }
    }
  }

  context.utterances.push_back(
      {Speaker::kSystem, result.response, static_cast<int>(context.utterances.size())});
  session->context = std::move(context);
  ordered_json turn = result.to_json(engine_.kb());
  session->turns.push_back(turn);
  session->last_active = clock_();

  log_event({{"event", "turn"}, {"session_id", session->id}, {"result", turn}});
  return result;
}

ordered_json DialogueService::transcript(const std::string& session_id) {
  std::shared_ptr<Session> session = find(session_id);
  std::lock_guard<std::mutex> lock(session->mutex);
  ordered_json out;
  out["session_id"] = session->id;
  out["domain"] = session->domain ? ordered_json(std::string(to_string(*session->domain)))
                                  : ordered_json(nullptr);
  out["created_at"] = iso_time(session->created);
  out["turns"] = session->turns;
  return out;
}

ordered_json DialogueService::entities(std::optional<Domain> domain) const {
  ordered_json list = ordered_json::array();
  for (const auto& e : engine_.kb().entities()) {
    if (domain && e.domain != *domain) continue;
    list.push_back(entity_json(e.key(), engine_.kb()));
  }
  return {{"entities", list}};
}

ordered_json DialogueService::health() const {
  const PipelineConfig& p = config_.pipeline;
  auto source = [](StageSource s) { return std::string(to_string(s)); };
  ordered_json stages;
  stages["ktd"] = ktd_available_ ? source(p.ktd) : "unavailable";
  stages["et"] = source(p.et);
  stages["ks"] = p.ks == StageSource::kExternal ? "external" : std::string(to_string(p.scorer));
  stages["absa"] = source(p.absa);
  stages["rg"] = p.rg == StageSource::kExternal
                     ? "external"
                     : (p.native_rg == NativeRg::kExt ? "ext" : "template");
  return {{"status", "ok"},
          {"stages", stages},
          {"entities", engine_.kb().entity_count()},
          {"snippets", engine_.kb().snippet_count()}};
}

void DialogueService::log_event(const ordered_json& event) {
  if (!config_.event_log) return;
  std::lock_guard<std::mutex> lock(log_mutex_);
  std::ofstream out(*config_.event_log, std::ios::app | std::ios::binary);
  if (!out) {
    spdlog::error("cannot append to event log {}", config_.event_log->string());
    return;
  }
  out << event.dump() << '\n';
}

void DialogueService::replay_log() {
  std::ifstream in(*config_.event_log, std::ios::binary);
  if (!in) return;
  std::string line;
  std::size_t restored = 0;
  const auto now = clock_();
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    nlohmann::json event;
    try {
      event = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      spdlog::warn("event log: skipping unreadable line: {}", e.what());
      continue;
    }
    const std::string kind = event.value("event", "");
    const std::string id = event.value("session_id", "");
    if (kind == "session") {
      auto session = std::make_shared<Session>();
      session->id = id;
      session->context.instance_id = id;
      if (event.contains("domain") && event["domain"].is_string()) {
        session->domain = parse_domain(event["domain"].get<std::string>());
      }
      session->created = session->last_active = now;
      sessions_[id] = session;
      ++restored;
    } else if (kind == "turn") {
      auto it = sessions_.find(id);
      if (it == sessions_.end() || !event.contains("result")) continue;
      Session& s = *it->second;
      const auto& result = event["result"];
      int index = static_cast<int>(s.context.utterances.size());
      s.context.utterances.push_back({Speaker::kUser, result.value("user", ""), index});
      s.context.utterances.push_back({Speaker::kSystem, result.value("response", ""), index + 1});
      s.turns.push_back(result);
    }
  }
  if (restored > 0) spdlog::info("restored {} sessions from the event log", restored);
}

namespace {

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const std::exception& e) {
  int status = 500;
  std::string kind = "internal";
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->kind()) {
      case ErrorKind::kUsage: status = 400; kind = "usage"; break;
      case ErrorKind::kData: status = 400; kind = "data"; break;
      case ErrorKind::kPrecondition: status = 400; kind = "precondition"; break;
      case ErrorKind::kNotFound: status = 404; kind = "not_found"; break;
      case ErrorKind::kTransport: status = 502; kind = "transport"; break;
      case ErrorKind::kProtocol: status = 502; kind = "protocol"; break;
    }
  }
  send_json(res, status, {{"error", kind}, {"message", e.what()}});
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    nlohmann::json body = nlohmann::json::parse(req.body);
    if (!body.is_object()) throw UsageError("request body must be a JSON object");
    return body;
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(std::string("request body is not JSON: ") + e.what());
  }
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const std::exception& e) {
      send_error(res, e);
    }
  };
}

std::optional<Domain> optional_domain(const nlohmann::json& value) {
  if (value.is_null()) return std::nullopt;
  if (!value.is_string()) throw UsageError("domain must be a string");
  try {
    return parse_domain(value.get<std::string>());
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

}  // namespace

void DialogueService::install_routes() {
  httplib::Server& s = *server_;
  s.Post("/v1/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body = parse_body(req);
    std::optional<Domain> domain =
        optional_domain(body.contains("domain") ? body["domain"] : nlohmann::json());
    std::string id = create_session(domain);
    ordered_json reply = {{"session_id", id}};
    reply["domain"] = domain ? ordered_json(std::string(to_string(*domain))) : ordered_json(nullptr);
    send_json(res, 201, reply);
  }));
  s.Post(R"(/v1/sessions/([^/]+)/utterance)",
         guarded([this](const httplib::Request& req, httplib::Response& res) {
           nlohmann::json body = parse_body(req);
           if (!body.contains("text") || !body["text"].is_string()) {
             throw UsageError("body needs a string \"text\"");
           }
           TurnResult result = handle_utterance(req.matches[1], body["text"].get<std::string>());
           send_json(res, 200, result.to_json(engine_.kb()));
         }));
  s.Get(R"(/v1/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, transcript(req.matches[1]));
  }));
  s.Get("/v1/entities", guarded([this](const httplib::Request& req, httplib::Response& res) {
    std::optional<Domain> domain;
    if (req.has_param("domain")) domain = optional_domain(req.get_param_value("domain"));
    send_json(res, 200, entities(domain));
  }));
  s.Get("/v1/health", guarded([this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, health());
  }));
  if (config_.static_dir && !s.set_mount_point("/", config_.static_dir->string())) {
    throw UsageError("static directory " + config_.static_dir->string() + " does not exist");
  }
}

void DialogueService::start(const std::string& host, int port) {
  if (server_) throw PreconditionError("service already started");
  server_ = std::make_unique<httplib::Server>();
  const int threads = std::max(1, config_.http_threads);
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<size_t>(threads)); };
  install_routes();
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ <= 0) {
    server_.reset();
    throw UsageError("cannot bind " + host + ":" + std::to_string(port));
  }
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  spdlog::info("serving on http://{}:{}", host, port_);
}

void DialogueService::stop() {
  if (!server_) return;
  server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
  server_.reset();
}

}  // namespace sktod
