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

#include "catshift/http_model.hpp"

#include <algorithm>
#include <cctype>

#include "catshift/error.hpp"
#include "http_client.hpp"

namespace catshift::model {
namespace {

using nlohmann::json;

bool probability_like(std::string key) {
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return key.find("logprob") != std::string::npos ||
         key.find("logit") != std::string::npos ||
         key.find("probab") != std::string::npos;
}

http::Endpoint endpoint_of(const HttpModelOptions& o) {
  http::Endpoint e;
  e.base_url = o.base_url;
  e.bearer_token = o.bearer_token;
  e.timeout_seconds = o.timeout_seconds;
  e.retry.attempts = o.retry_attempts;
  e.retry.initial_delay = o.retry_initial_delay;
  return e;
}

}  // namespace

HttpModelClient::HttpModelClient(HttpModelOptions options)
    : options_(std::move(options)) {
  if (options_.model_id.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "remote endpoint requires a base model id");
  }
}

ModelRef HttpModelClient::base_model() const {
  return {options_.base_url, options_.model_id};
}

std::string HttpModelClient::do_complete(const ModelRef& model, std::string_view prompt,
                                         std::size_t max_new_tokens) {
  const json body = {{"model_id", model.model_id},
                     {"prompt", prompt},
                     {"max_new_tokens", max_new_tokens},
                     {"deterministic", true}};
  const auto res = http::request_json(endpoint_of(options_), http::Method::kPost,
                                      "/v1/complete", &body);
  if (!res.is_object()) throw Error(ErrorCode::kProtocol, "/v1/complete: expected an object");
  for (const auto& [key, value] : res.items()) {
    if (key == "completion") continue;
    if (probability_like(key)) {
      throw Error(ErrorCode::kProtocol,
                  "/v1/complete returned probability field '" + key +
                      "'; label-only access forbids consuming it");
    }
    flag("/v1/complete: ignored extra field '" + key + "'");
  }
  auto it = res.find("completion");
  if (it == res.end() || !it->is_string()) {
    throw Error(ErrorCode::kProtocol, "/v1/complete: missing string 'completion'");
  }
  return it->get<std::string>();
}

FineTuneJob HttpModelClient::do_start_finetune(const ModelRef& base,
                                               const FineTuneSpec& spec) {
  json pairs = json::array();
  for (const auto& p : spec.pairs) {
    pairs.push_back({{"prompt", p.prompt}, {"completion", p.completion}});
  }
  const auto& hp = spec.hyperparams;
  const json body = {{"base_model_id", base.model_id},
                     {"pairs", std::move(pairs)},
                     {"hyperparams",
                      {{"lora_rank", hp.lora_rank},
                       {"lora_alpha", hp.lora_alpha},
                       {"dropout", hp.dropout},
                       {"learning_rate", hp.learning_rate},
                       {"batch_size", hp.batch_size},
                       {"checkpoint_every", hp.checkpoint_every},
                       {"epochs", hp.epochs}}}};
  const auto res = http::request_json(endpoint_of(options_), http::Method::kPost,
                                      "/v1/finetune", &body);
  if (!res.is_object() || !res.contains("job_id") || !res["job_id"].is_string()) {
    throw Error(ErrorCode::kProtocol, "/v1/finetune: missing string 'job_id'");
  }
  FineTuneJob job;
  job.job_id = res["job_id"].get<std::string>();
  job.base = base;
  job.status = JobStatus::kPending;
  return job;
}

FineTuneJob HttpModelClient::do_poll_finetune(const FineTuneJob& job) {
  const auto res = http::request_json(endpoint_of(options_), http::Method::kGet,
                                      "/v1/finetune/" + job.job_id);
  FineTuneJob next;
  next.job_id = job.job_id;
  next.base = job.base;
  try {
    next.status = parse_job_status(res.at("status").get<std::string>());
    for (const auto& c : res.value("checkpoints", json::array())) {
      Checkpoint cp;
      cp.step = c.at("step").get<std::size_t>();
      cp.loss = c.at("loss").get<double>();
      if (auto m = c.find("model_id"); m != c.end() && m->is_string()) {
        cp.model_id = m->get<std::string>();
      }
      next.checkpoints.push_back(std::move(cp));
    }
    if (auto r = res.find("result_model_id"); r != res.end() && r->is_string()) {
      next.result_model = ModelRef{job.base.endpoint, r->get<std::string>()};
    }
    if (auto m = res.find("error"); m != res.end()) {
      next.message = m->is_string() ? m->get<std::string>() : m->dump();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kProtocol, "/v1/finetune/" + job.job_id + ": " + e.what());
  }
  return next;
}

}  // namespace catshift::model
