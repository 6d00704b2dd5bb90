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
#include <string>
#include <vector>

#include "json.hpp"

namespace sktod {

struct EndpointConfig {
  std::string url;  // http://host:port/path
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;  // retries after the first attempt
  std::chrono::milliseconds retry_backoff{100};
  int max_in_flight = 8;
  std::size_t batch_size = 32;
};

// JSON-over-HTTP client for the external scorer, tagger and generator
// services. A single object posts to the configured path; an array body is
// a batch and must be answered by an array of equal length, positionally.
//
// Non-2xx replies, timeouts and connection failures raise TransportError
// once retries are exhausted; unparsable replies raise ProtocolError.
class JsonServiceClient {
 public:
  explicit JsonServiceClient(EndpointConfig config);

  const EndpointConfig& config() const { return config_; }

  nlohmann::json post(const nlohmann::json& body) const;

  // Splits `bodies` into batches of `batch_size`, keeps up to
  // `max_in_flight` batches outstanding and returns replies in input order.
  std::vector<nlohmann::json> post_all(
      const std::vector<nlohmann::json>& bodies) const;

 private:
  nlohmann::json post_once(const std::string& payload) const;

  EndpointConfig config_;
  std::string origin_;  // scheme://host:port
  std::string path_;
};

}  // namespace sktod
