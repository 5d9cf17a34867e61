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
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

// Scores audited subsets by their p-values. A p-value is a non-membership
// score: members should sit low, non-members high.

namespace catshift::evaluation {

enum class Label { kMember = 0, kNonMember = 1 };

Label parse_label(std::string_view name);
std::string_view label_name(Label label);

struct LabeledOutcome {
  std::string dataset_id;
  Label label = Label::kNonMember;
  double p_value = 1.0;
};

struct MetricsSummary {
  // Meaningful only when both labels occur; serialized as null otherwise.
  double auc = 0.5;
  double f1 = 0.0;
  double threshold = 0.1;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
};

/// P(p_non_member > p_member) over all member/non-member pairs, ties
/// counting one half. Throws Error(kInvalidArgument) unless both labels occur.
double auc(std::span<const LabeledOutcome> outcomes);

/// Predicts member iff p < threshold; F1 is for the member class (0 when
/// there are no true or predicted members). `auc` is filled too when both
/// labels are present.
MetricsSummary f1_at(std::span<const LabeledOutcome> outcomes, double threshold);

struct Evaluation {
  std::vector<LabeledOutcome> catshift;  // deciding p-value per dataset
  std::vector<LabeledOutcome> baseline;  // baseline p-value per dataset
  std::size_t reports = 0;               // report files read
  MetricsSummary catshift_metrics;
  MetricsSummary baseline_metrics;
};

// dataset_id -> label, from a two-column CSV with a header row.
std::map<std::string, Label> read_labels_csv(const std::filesystem::path& path);

/// Collects every report.json under `dir`. Repeated audits of one dataset_id
/// are reduced to their median p-value. Labels come from `labels` when given,
/// otherwise from the report's recorded ground truth; an unlabeled dataset is
/// an error.
Evaluation evaluate_reports(const std::filesystem::path& dir, double threshold,
                            const std::map<std::string, Label>& labels = {});

nlohmann::json to_json(const MetricsSummary& m);
nlohmann::json to_json(const Evaluation& e);

/// Writes the summary JSON to `json_path` and the per-dataset table
/// (dataset_id,label,p_value,prediction) next to it with a .csv extension.
/// Returns both paths.
std::vector<std::filesystem::path> write_evaluation(const Evaluation& e,
                                                    const std::filesystem::path& json_path);

}  // namespace catshift::evaluation
