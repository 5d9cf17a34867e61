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
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "catshift/corpus.hpp"

// Target-model abstraction. A model is only ever observed through top-1
// completions; fine-tuning mints a new ModelRef and never mutates the base.

namespace catshift::model {

struct ModelRef {
  std::string endpoint;  // http(s)://... or sim:<config>
  std::string model_id;

  bool operator==(const ModelRef&) const = default;
};

// Advisory metadata; endpoints that own their optimizer may ignore it.
struct FineTuneHyperparams {
  std::size_t lora_rank = 8;
  double lora_alpha = 32.0;
  double dropout = 0.1;
  double learning_rate = 8e-5;
  std::size_t batch_size = 8;
  std::size_t checkpoint_every = 10;
  std::size_t epochs = 1;

  // Rates in (0,1], counts >= 1. Throws Error(kInvalidArgument).
  void validate() const;
};

struct FineTuneSpec {
  std::vector<corpus::PairRecord> pairs;
  FineTuneHyperparams hyperparams;
};

enum class JobStatus { kPending, kRunning, kSucceeded, kFailed };

std::string_view job_status_name(JobStatus status);
JobStatus parse_job_status(std::string_view name);

struct Checkpoint {
  std::size_t step = 0;
  double loss = 0.0;
  // Set when the endpoint exposes the checkpoint as a queryable model.
  std::optional<std::string> model_id;

  bool operator==(const Checkpoint&) const = default;
};

struct FineTuneJob {
  std::string job_id;
  ModelRef base;
  JobStatus status = JobStatus::kPending;
  std::vector<Checkpoint> checkpoints;  // strictly increasing step
  std::optional<ModelRef> result_model;  // present iff succeeded
  std::string message;  // endpoint diagnostics on failure
};

class ModelClient {
 public:
  virtual ~ModelClient() = default;

  /// Top-1 continuation under deterministic decoding. Throws
  /// Error(kInvalidArgument, "empty prompt") for a blank prompt.
  std::string complete(const ModelRef& model, std::string_view prompt,
                       std::size_t max_new_tokens);

  /// Returns at once with a pending or running job. Throws on empty pairs.
  FineTuneJob start_finetune(const ModelRef& base, const FineTuneSpec& spec);

  FineTuneJob poll_finetune(const FineTuneJob& job);

  virtual ModelRef base_model() const = 0;

  // False when the model is unknown to this client, e.g. a simulator
  // checkpoint minted by another process.
  virtual bool has_model(const ModelRef&) const { return true; }

  // Protocol anomalies that were tolerated (ignored extra response fields).
  std::vector<std::string> warnings() const;

 protected:
  virtual std::string do_complete(const ModelRef& model, std::string_view prompt,
                                  std::size_t max_new_tokens) = 0;
  virtual FineTuneJob do_start_finetune(const ModelRef& base,
                                        const FineTuneSpec& spec) = 0;
  virtual FineTuneJob do_poll_finetune(const FineTuneJob& job) = 0;

  void flag(std::string warning);

 private:
  mutable std::mutex warnings_mu_;
  std::set<std::string> warnings_;
};

struct CheckpointChoice {
  ModelRef model;
  std::optional<std::size_t> step;  // empty when falling back
  bool fell_back = false;
  std::string warning;
};

/// Min-max normalizes the losses and takes the argmin, ties toward the
/// smaller step. With no usable checkpoint, falls back to the job's result
/// model and sets a warning. Throws Error(kJobFailed) unless succeeded.
CheckpointChoice select_checkpoint(
    const FineTuneJob& job,
    std::span<const std::pair<std::size_t, double>> finetune_losses);
CheckpointChoice select_checkpoint(const FineTuneJob& job);

// Throws Error(kProtocol) if `next` is not a legal successor of `prev`:
// status may only move forward and the checkpoint list may only grow.
void check_transition(const FineTuneJob& prev, const FineTuneJob& next);

/// Polls until succeeded or failed. A failed job raises Error(kJobFailed)
/// carrying the endpoint message.
FineTuneJob wait_for_job(ModelClient& client, FineTuneJob job,
                         std::chrono::milliseconds interval,
                         std::chrono::milliseconds timeout);

// k-repeat majority vote for endpoints without deterministic decoding; ties
// go to the completion seen first. k = 1 is a single call.
std::string complete_majority(ModelClient& client, const ModelRef& model,
                              std::string_view prompt,
                              std::size_t max_new_tokens, std::size_t k);

struct ConnectOptions {
  std::string endpoint;  // "sim:<path>" or http(s)://host[:port]
  std::string model_id;  // remote base model; ignored for sim
  std::string token_env = "CATSHIFT_API_TOKEN";
  int timeout_seconds = 60;
  int retry_attempts = 3;
  std::chrono::milliseconds retry_initial_delay{200};
  // Used to derive simulator memory from text corpora.
  corpus::PairOptions sim_pair_options;
};

std::unique_ptr<ModelClient> connect(const ConnectOptions& options);

}  // namespace catshift::model
