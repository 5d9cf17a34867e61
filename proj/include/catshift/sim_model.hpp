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

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "catshift/corpus.hpp"
#include "catshift/model.hpp"

// Deterministic simulated target model.
//
// Memory entries stand for training data the model once saw. Their recall
// strength sets how much of the stored completion survives decoding.
// Fine-tuning revives known entries by gain_recover (and, through their
// cluster, related entries the batch did not contain) but only learns novel
// pairs at gain_new, plus a prompt-independent drift of gain_new scaled by
// the novel share of the batch. All decoding noise is a hash of
// (noise_seed, prompt, token index), so there is no RNG state.

namespace catshift::model {

struct MemoryEntry {
  std::string prompt;  // whitespace-normalized
  std::string stored_completion;
  double recall_strength = 0.0;  // [0,1]
  std::string cluster;  // dataset the entry was learned with
};

struct SimModelState {
  std::map<std::string, MemoryEntry> memory;  // keyed by memory_key(prompt)
  double gain_recover = 0.6;
  double gain_new = 0.1;
  std::uint64_t noise_seed = 0;
  double recall_threshold = 0.5;
  // Share of noise positions re-rolled by generic fine-tuning drift.
  double drift = 0.0;
};

std::string memory_key(std::string_view prompt);

/// Inserts or overwrites entries for `pairs` at `strength` (clamped).
SimModelState seed_memory(SimModelState state,
                          std::span<const corpus::PairRecord> pairs,
                          double strength, std::string_view cluster);

/// Returns the updated state; `state` is untouched. `progress` in (0,1]
/// scales both gains for intermediate checkpoints.
SimModelState sim_finetune(const SimModelState& state,
                           std::span<const corpus::PairRecord> pairs,
                           double progress = 1.0);

/// Deterministic given (state, prompt). Throws on an empty prompt.
std::string sim_complete(const SimModelState& state, std::string_view prompt,
                         std::size_t max_new_tokens);

// Mean of (1 - recall strength) over the pairs; unknown pairs count as 1.
double sim_loss(const SimModelState& state,
                std::span<const corpus::PairRecord> pairs);

// Seeded synthetic documents over a fixed word list; ids are
// `<id_prefix>#<index>` with 1-based index.
std::vector<corpus::TextRecord> synthetic_texts(std::size_t count,
                                                std::size_t min_tokens,
                                                std::size_t max_tokens,
                                                std::uint64_t seed,
                                                std::string_view id_prefix);

/// Reads a simulator config (JSON):
///   {"gain_recover": .., "gain_new": .., "recall_threshold": ..,
///    "noise_seed": .., "members": [{"path": .., "format": ..,
///    "strength": .., "cluster": ..}]}
/// Relative member paths resolve against the config's directory; text
/// formats are paired with `pair_options`.
SimModelState load_sim_config(const std::filesystem::path& path,
                              const corpus::PairOptions& pair_options);

// ModelClient over an in-process registry of immutable states. Jobs advance
// one status per poll: pending, running, succeeded.
class SimModelClient final : public ModelClient {
 public:
  explicit SimModelClient(SimModelState base, std::string endpoint = "sim:");

  ModelRef base_model() const override;
  bool has_model(const ModelRef& model) const override;

  std::shared_ptr<const SimModelState> state(const ModelRef& model) const;

  std::size_t jobs_started() const;

 protected:
  std::string do_complete(const ModelRef& model, std::string_view prompt,
                          std::size_t max_new_tokens) override;
  FineTuneJob do_start_finetune(const ModelRef& base,
                                const FineTuneSpec& spec) override;
  FineTuneJob do_poll_finetune(const FineTuneJob& job) override;

 private:
  struct JobRecord {
    FineTuneJob final_view;
    JobStatus revealed = JobStatus::kPending;
  };

  std::string endpoint_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<const SimModelState>> models_;
  std::unordered_map<std::string, JobRecord> jobs_;
  std::size_t jobs_started_ = 0;
};

}  // namespace catshift::model
