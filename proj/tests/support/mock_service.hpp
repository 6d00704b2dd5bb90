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

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <functional>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace sktod::testing {

// Local JSON-over-HTTP stand-in for an external model service. Array
// bodies are answered element-wise with the same handler.
class MockService {
 public:
  using Handler = std::function<nlohmann::json(const nlohmann::json&)>;

  explicit MockService(Handler handler) : handler_(std::move(handler)) {
    server_.Post(".*", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      if (fail_status_ != 0) {
        res.status = fail_status_;
        return;
      }
      if (!raw_reply_.empty()) {
        res.set_content(raw_reply_, "application/json");
        return;
      }
      nlohmann::json body = nlohmann::json::parse(req.body);
      nlohmann::json reply;
      if (body.is_array()) {
        ++batches_;
        reply = nlohmann::json::array();
        for (const auto& item : body) reply.push_back(handler_(item));
      } else {
        reply = handler_(body);
      }
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockService() {
    server_.stop();
    thread_.join();
  }

  MockService(const MockService&) = delete;
  MockService& operator=(const MockService&) = delete;

  std::string url(const std::string& path = "/") const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }
  int requests() const { return requests_; }
  int batches() const { return batches_; }
  void fail_with(int status) { fail_status_ = status; }
  void reply_raw(std::string body) { raw_reply_ = std::move(body); }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> requests_{0};
  std::atomic<int> batches_{0};
  std::atomic<int> fail_status_{0};
  std::string raw_reply_;
};

// A port on which nothing listens.
inline int unused_port() {
  // Bound but never listening, then closed, so connects are refused.
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  socklen_t len = sizeof addr;
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

}  // namespace sktod::testing
