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

#include "sktod/external.hpp"

#include <spdlog/spdlog.h>

#include <future>
#include <regex>
#include <thread>

#include "httplib.h"
#include "sktod/error.hpp"

namespace sktod {

JsonServiceClient::JsonServiceClient(EndpointConfig config)
    : config_(std::move(config)) {
  static const std::regex kUrl(R"(^(http://[^/\s]+)(/\S*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.url, m, kUrl)) {
    throw UsageError("endpoint url must look like http://host:port/path, got '" +
                     config_.url + "'");
  }
  origin_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/";
  if (config_.max_in_flight < 1) config_.max_in_flight = 1;
  if (config_.batch_size < 1) config_.batch_size = 1;
}

nlohmann::json JsonServiceClient::post_once(const std::string& payload) const {
  httplib::Client client(origin_);
  const auto ms = config_.timeout.count();
  client.set_connection_timeout(ms / 1000, (ms % 1000) * 1000);
  client.set_read_timeout(ms / 1000, (ms % 1000) * 1000);
  client.set_write_timeout(ms / 1000, (ms % 1000) * 1000);
  auto result = client.Post(path_, payload, "application/json");
  if (!result) {
    const auto err = result.error();
    throw TransportError(config_.url + ": " + httplib::to_string(err),
                         err == httplib::Error::Connection);
  }
  if (result->status < 200 || result->status >= 300) {
    throw TransportError(config_.url + ": HTTP " +
                         std::to_string(result->status));
  }
  try {
    return nlohmann::json::parse(result->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(config_.url + ": reply is not JSON: " + e.what());
  }
}

nlohmann::json JsonServiceClient::post(const nlohmann::json& body) const {
  const std::string payload = body.dump();
  for (int attempt = 0;; ++attempt) {
    try {
      return post_once(payload);
    } catch (const TransportError& e) {
      if (attempt >= config_.max_retries) throw;
      spdlog::debug("retrying {} after: {}", config_.url, e.what());
      std::this_thread::sleep_for(config_.retry_backoff * (attempt + 1));
    }
  }
}

std::vector<nlohmann::json> JsonServiceClient::post_all(
    const std::vector<nlohmann::json>& bodies) const {
  std::vector<nlohmann::json> replies(bodies.size());
  const std::size_t batch = config_.batch_size;
  const std::size_t batches = (bodies.size() + batch - 1) / batch;

  auto run_batch = [&](std::size_t b) {
    const std::size_t begin = b * batch;
    const std::size_t end = std::min(bodies.size(), begin + batch);
    nlohmann::json request = nlohmann::json::array();
    for (std::size_t i = begin; i < end; ++i) request.push_back(bodies[i]);
    nlohmann::json reply = post(request);
    if (!reply.is_array() || reply.size() != end - begin) {
      throw ProtocolError(config_.url +
                          ": batch reply must be an array of the same length");
    }
    for (std::size_t i = begin; i < end; ++i) {
      replies[i] = std::move(reply[i - begin]);
    }
  };

  // Waves of at most max_in_flight concurrent batches.
  const auto wave = static_cast<std::size_t>(config_.max_in_flight);
  for (std::size_t first = 0; first < batches; first += wave) {
    std::vector<std::future<void>> pending;
    const std::size_t last = std::min(batches, first + wave);
    for (std::size_t b = first; b < last; ++b) {
      pending.push_back(std::async(std::launch::async, run_batch, b));
    }
    for (auto& f : pending) f.get();
  }
  return replies;
}

}  // namespace sktod
