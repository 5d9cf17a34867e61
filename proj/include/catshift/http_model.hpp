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

#include "catshift/model.hpp"

namespace catshift::model {

struct HttpModelOptions {
  std::string base_url;  // scheme://host[:port]
  std::string model_id;
  std::string bearer_token;
  int timeout_seconds = 60;
  int retry_attempts = 3;
  std::chrono::milliseconds retry_initial_delay{200};
};

/// Client for the v1 model adapter protocol:
///   POST /v1/complete            {model_id, prompt, max_new_tokens, deterministic}
///   POST /v1/finetune            {base_model_id, pairs, hyperparams}
///   GET  /v1/finetune/{job_id}
/// A completion response that carries probability-like fields (logprobs,
/// logits, probabilities) is rejected with Error(kProtocol); any other extra
/// field is ignored and flagged.
class HttpModelClient final : public ModelClient {
 public:
  explicit HttpModelClient(HttpModelOptions options);

  ModelRef base_model() const override;

 protected:
  std::string do_complete(const ModelRef& model, std::string_view prompt,
                          std::size_t max_new_tokens) override;
  FineTuneJob do_start_finetune(const ModelRef& base,
                                const FineTuneSpec& spec) override;
  FineTuneJob do_poll_finetune(const FineTuneJob& job) override;

 private:
  HttpModelOptions options_;
};

}  // namespace catshift::model
