//
// Copyright 2026 The CatShift Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include <chrono>
#include <string>
#include <string_view>

#include "json.hpp"

// Internal JSON-over-HTTP helper shared by the model client and the remote
// similarity scorer.

namespace catshift::http {

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_delay{200};
  double multiplier = 2.0;
};

struct Endpoint {
  std::string base_url;  // scheme://host[:port], no trailing path
  std::string bearer_token;
  int timeout_seconds = 60;
  RetryPolicy retry;
};

enum class Method { kGet, kPost };

/// Sends one request and parses the JSON body. Transport failures and 5xx
/// responses are retried with exponential backoff, then raised as
/// Error(kTransport). 404 raises Error(kNotFound); other 4xx raise
/// Error(kProtocol) carrying the endpoint's message.
nlohmann::json request_json(const Endpoint& endpoint, Method method,
                            std::string_view path,
                            const nlohmann::json* body = nullptr);

}  // namespace catshift::http
