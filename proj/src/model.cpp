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

#include "catshift/model.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <unordered_map>

#include "catshift/error.hpp"
#include "catshift/http_model.hpp"
#include "catshift/sim_model.hpp"
#include "catshift/text.hpp"

namespace catshift::model {
namespace {

int status_rank(JobStatus s) {
  switch (s) {
    case JobStatus::kPending: return 0;
    case JobStatus::kRunning: return 1;
    case JobStatus::kSucceeded:
    case JobStatus::kFailed: return 2;
  }
  return 0;
}

bool terminal(JobStatus s) {
  return s == JobStatus::kSucceeded || s == JobStatus::kFailed;
}

void check_rate(double v, const char* name) {
  if (!(v > 0.0 && v <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, std::string(name) + " must lie in (0,1]");
  }
}

void check_count(std::size_t v, const char* name) {
  if (v < 1) throw Error(ErrorCode::kInvalidArgument, std::string(name) + " must be >= 1");
}

}  // namespace

void FineTuneHyperparams::validate() const {
  check_count(lora_rank, "lora_rank");
  check_count(batch_size, "batch_size");
  check_count(checkpoint_every, "checkpoint_every");
  check_count(epochs, "epochs");
  check_rate(dropout, "dropout");
  check_rate(learning_rate, "learning_rate");
  if (!(lora_alpha > 0.0)) throw Error(ErrorCode::kInvalidArgument, "lora_alpha must be > 0");
}

std::string_view job_status_name(JobStatus status) {
  switch (status) {
    case JobStatus::kPending: return "pending";
    case JobStatus::kRunning: return "running";
    case JobStatus::kSucceeded: return "succeeded";
    case JobStatus::kFailed: return "failed";
  }
  return "?";
}

JobStatus parse_job_status(std::string_view name) {
  if (name == "pending" || name == "queued" || name == "validating_files") return JobStatus::kPending;
  if (name == "running") return JobStatus::kRunning;
  if (name == "succeeded") return JobStatus::kSucceeded;
  if (name == "failed" || name == "cancelled") return JobStatus::kFailed;
  throw Error(ErrorCode::kProtocol, "unknown job status '" + std::string(name) + "'");
}

std::string ModelClient::complete(const ModelRef& model, std::string_view prompt,
                                  std::size_t max_new_tokens) {
  if (text::trim(prompt).empty()) throw Error(ErrorCode::kInvalidArgument, "empty prompt");
  if (max_new_tokens == 0) throw Error(ErrorCode::kInvalidArgument, "max_new_tokens must be >= 1");
  return do_complete(model, prompt, max_new_tokens);
}

FineTuneJob ModelClient::start_finetune(const ModelRef& base, const FineTuneSpec& spec) {
  if (spec.pairs.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "fine-tune spec has no pairs");
  }
  spec.hyperparams.validate();
  return do_start_finetune(base, spec);
}

FineTuneJob ModelClient::poll_finetune(const FineTuneJob& job) {
  auto next = do_poll_finetune(job);
  check_transition(job, next);
  return next;
}

std::vector<std::string> ModelClient::warnings() const {
  std::lock_guard lock(warnings_mu_);
  return {warnings_.begin(), warnings_.end()};
}

void ModelClient::flag(std::string warning) {
  std::lock_guard lock(warnings_mu_);
  warnings_.insert(std::move(warning));
}

CheckpointChoice select_checkpoint(
    const FineTuneJob& job,
    std::span<const std::pair<std::size_t, double>> finetune_losses) {
  if (job.status != JobStatus::kSucceeded || !job.result_model) {
    throw Error(ErrorCode::kJobFailed,
                "job " + job.job_id + " has not succeeded; no model to select");
  }
  auto fallback = [&](std::string why) {
    return CheckpointChoice{*job.result_model, std::nullopt, true, std::move(why)};
  };
  if (finetune_losses.empty()) {
    return fallback("job " + job.job_id + " reported no checkpoints; using result model");
  }

  const auto [lo, hi] = std::minmax_element(
      finetune_losses.begin(), finetune_losses.end(),
      [](const auto& a, const auto& b) { return a.second < b.second; });
  const double span = hi->second - lo->second;
  std::optional<std::size_t> best_step;
  double best = 0.0;
  for (const auto& [step, loss] : finetune_losses) {
    const double normalized = span > 0.0 ? (loss - lo->second) / span : 0.0;
    if (!best_step || normalized < best || (normalized == best && step < *best_step)) {
      best_step = step;
      best = normalized;
    }
  }

  auto it = std::find_if(job.checkpoints.begin(), job.checkpoints.end(),
                         [&](const Checkpoint& c) { return c.step == *best_step; });
  if (it == job.checkpoints.end() || !it->model_id) {
    auto choice = fallback("checkpoint at step " + std::to_string(*best_step) +
                           " is not addressable; using result model");
    return choice;
  }
  return {ModelRef{job.base.endpoint, *it->model_id}, best_step, false, {}};
}

CheckpointChoice select_checkpoint(const FineTuneJob& job) {
  std::vector<std::pair<std::size_t, double>> losses;
  losses.reserve(job.checkpoints.size());
  for (const auto& c : job.checkpoints) losses.emplace_back(c.step, c.loss);
  return select_checkpoint(job, losses);
}

void check_transition(const FineTuneJob& prev, const FineTuneJob& next) {
  if (next.job_id != prev.job_id) {
    throw Error(ErrorCode::kProtocol, "poll returned job " + next.job_id +
                                          " for " + prev.job_id);
  }
  if (status_rank(next.status) < status_rank(prev.status) ||
      (terminal(prev.status) && next.status != prev.status)) {
    throw Error(ErrorCode::kProtocol,
                "job " + prev.job_id + " moved from " +
                    std::string(job_status_name(prev.status)) + " to " +
                    std::string(job_status_name(next.status)));
  }
  if (next.checkpoints.size() < prev.checkpoints.size() ||
      !std::equal(prev.checkpoints.begin(), prev.checkpoints.end(),
                  next.checkpoints.begin(),
                  [](const Checkpoint& a, const Checkpoint& b) { return a.step == b.step; })) {
    throw Error(ErrorCode::kProtocol, "job " + prev.job_id + " lost checkpoints");
  }
  for (std::size_t i = 1; i < next.checkpoints.size(); ++i) {
    if (next.checkpoints[i].step <= next.checkpoints[i - 1].step) {
      throw Error(ErrorCode::kProtocol,
                  "job " + prev.job_id + " checkpoints are not strictly increasing");
    }
  }
  if ((next.status == JobStatus::kSucceeded) != next.result_model.has_value()) {
    throw Error(ErrorCode::kProtocol,
                "job " + prev.job_id + ": result model must be present iff succeeded");
  }
}

FineTuneJob wait_for_job(ModelClient& client, FineTuneJob job,
                         std::chrono::milliseconds interval,
                         std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!terminal(job.status)) {
    if (std::chrono::steady_clock::now() > deadline) {
      throw Error(ErrorCode::kTransport, "timed out waiting for job " + job.job_id);
    }
    job = client.poll_finetune(job);
    if (!terminal(job.status) && interval.count() > 0) std::this_thread::sleep_for(interval);
  }
  if (job.status == JobStatus::kFailed) {
    throw Error(ErrorCode::kJobFailed,
                "fine-tune job " + job.job_id + " failed: " +
                    (job.message.empty() ? std::string("no diagnostics") : job.message));
  }
  return job;
}

std::string complete_majority(ModelClient& client, const ModelRef& model,
                              std::string_view prompt,
                              std::size_t max_new_tokens, std::size_t k) {
  if (k <= 1) return client.complete(model, prompt, max_new_tokens);
  std::vector<std::string> order;
  std::unordered_map<std::string, std::size_t> votes;
  for (std::size_t i = 0; i < k; ++i) {
    auto out = client.complete(model, prompt, max_new_tokens);
    if (votes[out]++ == 0) order.push_back(std::move(out));
  }
  const std::string* best = &order.front();
  for (const auto& candidate : order) {
    if (votes[candidate] > votes[*best]) best = &candidate;
  }
  return *best;
}

std::unique_ptr<ModelClient> connect(const ConnectOptions& options) {
  const std::string_view endpoint = options.endpoint;
  if (endpoint.starts_with("sim:")) {
    const auto config = endpoint.substr(4);
    SimModelState state;
    if (!config.empty()) state = load_sim_config(std::string(config), options.sim_pair_options);
    return std::make_unique<SimModelClient>(std::move(state), std::string(endpoint));
  }
  if (!endpoint.starts_with("http://") && !endpoint.starts_with("https://")) {
    throw Error(ErrorCode::kInvalidArgument,
                "endpoint must be sim:<config> or an http(s) URL, got '" +
                    options.endpoint + "'");
  }
  HttpModelOptions http;
  http.base_url = options.endpoint;
  while (!http.base_url.empty() && http.base_url.back() == '/') http.base_url.pop_back();
  http.model_id = options.model_id;
  if (!options.token_env.empty()) {
    if (const char* token = std::getenv(options.token_env.c_str())) http.bearer_token = token;
  }
  http.timeout_seconds = options.timeout_seconds;
  http.retry_attempts = options.retry_attempts;
  http.retry_initial_delay = options.retry_initial_delay;
  return std::make_unique<HttpModelClient>(std::move(http));
}

}  // namespace catshift::model
