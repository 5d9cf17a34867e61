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

#include "http_client.hpp"

#include "httplib.h"

#include <thread>

#include "catshift/error.hpp"

namespace catshift::http {
namespace {

std::string error_message(const httplib::Result& res) {
  if (!res) return httplib::to_string(res.error());
  try {
    auto body = nlohmann::json::parse(res->body);
    if (body.is_object() && body.contains("error")) {
      const auto& e = body["error"];
      return e.is_string() ? e.get<std::string>() : e.dump();
    }
  } catch (const nlohmann::json::exception&) {
  }
  return "HTTP " + std::to_string(res->status) + ": " + res->body;
}

}  // namespace

nlohmann::json request_json(const Endpoint& endpoint, Method method,
                            std::string_view path,
                            const nlohmann::json* body) {
  httplib::Client client(endpoint.base_url);
  if (!client.is_valid()) {
    throw Error(ErrorCode::kInvalidArgument,
                "invalid endpoint url '" + endpoint.base_url + "'");
  }
  client.set_connection_timeout(endpoint.timeout_seconds, 0);
  client.set_read_timeout(endpoint.timeout_seconds, 0);
  client.set_write_timeout(endpoint.timeout_seconds, 0);
  if (!endpoint.bearer_token.empty()) {
    client.set_bearer_token_auth(endpoint.bearer_token);
  }

  const std::string target(path);
  const std::string payload = body ? body->dump() : std::string();
  auto delay = endpoint.retry.initial_delay;
  std::string last_error;
  const int attempts = std::max(1, endpoint.retry.attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    auto res = method == Method::kGet
                   ? client.Get(target)
                   : client.Post(target, payload, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::kProtocol,
                    target + ": response is not json: " + e.what());
      }
    }
    if (res && res->status == 404) {
      throw Error(ErrorCode::kNotFound, target + ": " + error_message(res));
    }
    if (res && res->status >= 400 && res->status < 500) {
      throw Error(ErrorCode::kProtocol, target + ": " + error_message(res));
    }
    last_error = error_message(res);
    if (attempt < attempts) {
      std::this_thread::sleep_for(delay);
      delay = std::chrono::milliseconds(static_cast<long long>(
          static_cast<double>(delay.count()) * endpoint.retry.multiplier));
    }
  }
  throw Error(ErrorCode::kTransport,
              target + ": failed after " + std::to_string(attempts) +
                  " attempts: " + last_error);
}

}  // namespace catshift::http
