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

#include <filesystem>
#include <string>

#include "catshift/inference.hpp"
#include "json.hpp"

// Versioned report documents. Key order is fixed (sorted) and the only
// run-dependent fields are the two timestamps under run_metadata, so reruns
// with identical inputs are byte-identical apart from those.

namespace catshift::io {

inline constexpr std::string_view kReportFormat = "catshift-report";
inline constexpr int kReportVersion = 1;

nlohmann::json to_json(const stats::KsResult& ks);
nlohmann::json to_json(const model::FineTuneJob& job);
model::FineTuneJob job_from_json(const nlohmann::json& j);
nlohmann::json to_json(const inference::AuditReport& report);

std::string report_text(const inference::AuditReport& report);

/// Writes report.json plus suspicious_scores.csv and validation_scores.csv
/// (pair_id,s_i) into `dir`, creating it if needed. Returns the paths written.
std::vector<std::filesystem::path> write_report(const inference::AuditReport& report,
                                                const std::filesystem::path& dir);

// Summary fields needed by the evaluation harness.
struct ReportDigest {
  std::string dataset_id;
  std::string decision;
  std::string decided_by;
  double p_value = 1.0;           // deciding p-value
  double baseline_p_value = 1.0;
  std::optional<std::string> ground_truth;  // "member" | "non_member"
};

ReportDigest read_digest(const std::filesystem::path& report_json);

}  // namespace catshift::io
