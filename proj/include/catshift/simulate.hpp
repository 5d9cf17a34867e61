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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "catshift/evaluation.hpp"
#include "catshift/inference.hpp"
#include "json.hpp"

// Seeded experiments on the simulated model: synthetic member and
// non-member subsets are audited for every (gain_recover, gain_new,
// strength) cell of a grid, and each cell is scored with the evaluation
// harness.

namespace catshift::simulate {

struct Scenario {
  std::vector<double> gain_recover{0.3, 0.5, 0.7, 0.9};
  std::vector<double> gain_new{0.05, 0.1, 0.15, 0.2};
  std::vector<double> strength{0.3};
  std::size_t members = 20;
  std::size_t non_members = 20;
  std::size_t n_finetune = 100;
  std::size_t n_test = 100;
  std::size_t min_tokens = 16;
  std::size_t max_tokens = 40;
  double recall_threshold = 0.5;
  std::uint64_t seed = 0;
  // Cells with gain_recover <= gain_new are skipped unless this is false.
  bool require_recover_above_new = true;
  // Flat audit settings (config keys) applied before the scenario's own sizes.
  nlohmann::json config = nlohmann::json::object();
  std::size_t workers = 0;  // concurrent audits; 0 picks the hardware count
};

// Unknown keys are rejected.
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);
nlohmann::json to_json(const Scenario& s);

struct CellResult {
  double gain_recover = 0.0;
  double gain_new = 0.0;
  double strength = 0.0;
  std::string label;  // directory-safe cell name
  std::vector<evaluation::LabeledOutcome> outcomes;
  std::vector<evaluation::LabeledOutcome> baseline_outcomes;
  evaluation::MetricsSummary metrics;
  evaluation::MetricsSummary baseline_metrics;
  std::size_t shortcut_decisions = 0;
  std::size_t inconsistent_reports = 0;  // should stay 0
};

struct SimulationResult {
  std::vector<CellResult> cells;
  evaluation::MetricsSummary overall;
  std::size_t audits = 0;
  std::size_t false_positives = 0;
};

/// One member subset is a synthetic corpus seeded into the base model's
/// memory at the cell's strength; a non-member subset is never seeded. Each
/// subset is audited against its own fresh validation corpus with dual_test.
/// Subset texts depend only on (seed, role, index), so every cell audits the
/// same corpora. With a non-empty `out_dir` each report lands in
/// <out_dir>/<cell>/<subset>/ and summary.json sits at the top.
SimulationResult run(const Scenario& scenario, const std::filesystem::path& out_dir = {});

// Audit of one subset; exposed for tests. `member` seeds it into memory.
inference::AuditReport audit_subset(const Scenario& scenario, double gain_recover,
                                    double gain_new, double strength, bool member,
                                    std::size_t index);

nlohmann::json to_json(const SimulationResult& r);

}  // namespace catshift::simulate
