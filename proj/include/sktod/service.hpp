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

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "json.hpp"
#include "sktod/runtime.hpp"

namespace httplib {
class Server;
}

namespace sktod {

inline constexpr std::string_view kTaskReply =
    "Sure, I can help with that. Is there anything else you need?";

struct ServiceConfig {
  // Stage wiring for live turns; KTD, ET and KS must not be gold. Without a
  // trained detector every turn counts as knowledge-seeking.
  PipelineConfig pipeline;
  std::chrono::seconds session_ttl{1800};
  std::optional<std::filesystem::path> event_log;  // append-only JSONL
  std::optional<std::filesystem::path> static_dir;  // served under "/"
  int http_threads = 8;
};

// One answered user turn.
struct TurnResult {
  std::string session_id;
  int turn = 0;  // 0-based user turn number
  std::string user_text;
  std::string response;
  bool detected = false;
  std::vector<EntityKey> entities;
  struct Grounding {
    SnippetRef ref;
    std::string text;
    Polarity polarity = Polarity::kNone;
    std::optional<std::string> aspect;
  };
  std::vector<Grounding> grounded;  // ranking order
  std::map<EntityKey, SentimentTally> tally;

  nlohmann::ordered_json to_json(const KnowledgeBase& kb) const;
};

// Interactive sessions over a shared, read-only engine. Sessions are
// in-memory; turns within one session are serialized, different sessions
// run concurrently.
class DialogueService {
 public:
  using Clock = std::function<std::chrono::system_clock::time_point()>;

  DialogueService(const Engine& engine, ServiceConfig config, Clock clock = {});
  ~DialogueService();
  DialogueService(const DialogueService&) = delete;
  DialogueService& operator=(const DialogueService&) = delete;

  std::string create_session(std::optional<Domain> domain = std::nullopt);
  // Throws NotFoundError for unknown or expired sessions, UsageError for
  // empty text. On failure the session is left unchanged.
  TurnResult handle_utterance(const std::string& session_id, const std::string& text);
  nlohmann::ordered_json transcript(const std::string& session_id);
  nlohmann::ordered_json entities(std::optional<Domain> domain) const;
  nlohmann::ordered_json health() const;
  std::size_t session_count();

  // Binds and serves in a background thread; port 0 picks a free port.
  // Throws UsageError when the address cannot be bound.
  void start(const std::string& host, int port);
  int port() const { return port_; }
  // Stops accepting connections and waits for in-flight requests.
  void stop();

 private:
  struct Session;

  std::shared_ptr<Session> find(const std::string& session_id);
  void expire_locked(std::chrono::system_clock::time_point now);
  void log_event(const nlohmann::ordered_json& event);
  void replay_log();
  void install_routes();

  const Engine& engine_;
  ServiceConfig config_;
  Clock clock_;
  bool ktd_available_ = false;

  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex log_mutex_;

  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;
  int port_ = 0;
};

}  // namespace sktod
