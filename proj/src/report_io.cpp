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

#include "catshift/report_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "catshift/config.hpp"
#include "catshift/error.hpp"

namespace catshift::io {
namespace {

using nlohmann::json;
using inference::ScoredCompletion;

json model_ref_json(const model::ModelRef& m) {
  return {{"endpoint", m.endpoint}, {"model_id", m.model_id}};
}

json completions_json(const std::vector<ScoredCompletion>& items) {
  json arr = json::array();
  for (const auto& c : items) {
    arr.push_back({{"pair_id", c.pair_id},
                   {"pre", c.pre},
                   {"post", c.post ? json(*c.post) : json(nullptr)},
                   {"baseline_score", c.baseline_score},
                   {"shift_score", c.shift_score ? json(*c.shift_score) : json(nullptr)}});
  }
  return arr;
}

json job_summary_json(const std::optional<inference::JobSummary>& s) {
  if (!s) return nullptr;
  return {{"job", to_json(s->job)},
          {"selected_model", model_ref_json(s->selected.model)},
          {"selected_step", s->selected.step ? json(*s->selected.step) : json(nullptr)},
          {"fell_back", s->selected.fell_back},
          {"pair_ids", s->pair_ids}};
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::filesystem::path write_scores_csv(const std::vector<ScoredCompletion>& items,
                                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "pair_id,s_i\n" << std::setprecision(17);
  for (const auto& c : items) {
    if (!c.shift_score) continue;
    out << csv_field(c.pair_id) << ',' << *c.shift_score << '\n';
  }
  return path;
}

}  // namespace

json to_json(const stats::KsResult& ks) {
  return {{"d_statistic", ks.d_statistic},
          {"p_value", ks.p_value},
          {"n", ks.n},
          {"m", ks.m},
          {"mode", stats::test_mode_name(ks.mode)},
          {"alternative", stats::alternative_name(ks.alternative)}};
}

json to_json(const model::FineTuneJob& job) {
  json cps = json::array();
  for (const auto& c : job.checkpoints) {
    cps.push_back({{"step", c.step},
                   {"loss", c.loss},
                   {"model_id", c.model_id ? json(*c.model_id) : json(nullptr)}});
  }
  return {{"job_id", job.job_id},
          {"base", model_ref_json(job.base)},
          {"status", model::job_status_name(job.status)},
          {"checkpoints", std::move(cps)},
          {"result_model", job.result_model ? model_ref_json(*job.result_model) : json(nullptr)},
          {"message", job.message}};
}

model::FineTuneJob job_from_json(const json& j) {
  try {
    model::FineTuneJob job;
    job.job_id = j.at("job_id").get<std::string>();
    job.base.endpoint = j.at("base").at("endpoint").get<std::string>();
    job.base.model_id = j.at("base").at("model_id").get<std::string>();
    job.status = model::parse_job_status(j.at("status").get<std::string>());
    for (const auto& c : j.at("checkpoints")) {
      model::Checkpoint cp;
      cp.step = c.at("step").get<std::size_t>();
      cp.loss = c.at("loss").get<double>();
      if (c.contains("model_id") && c["model_id"].is_string()) {
        cp.model_id = c["model_id"].get<std::string>();
      }
      job.checkpoints.push_back(std::move(cp));
    }
    if (j.contains("result_model") && j["result_model"].is_object()) {
      job.result_model = model::ModelRef{j["result_model"].at("endpoint").get<std::string>(),
                                         j["result_model"].at("model_id").get<std::string>()};
    }
    job.message = j.value("message", "");
    return job;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed job record: ") + e.what());
  }
}

json to_json(const inference::AuditReport& r) {
  const auto& m = r.meta;
  json baseline = {{"mean_score", r.baseline.mean_score},
                   {"validation_mean_score", r.baseline.validation_mean_score},
                   {"ks", to_json(r.baseline.ks)},
                   {"p_value", r.baseline.p_value},
                   {"direction_member", r.baseline.direction_member}};
  json meta = {{"base_model", model_ref_json(m.base_model)},
               {"suspicious_job", job_summary_json(m.suspicious_job)},
               {"validation_job", job_summary_json(m.validation_job)},
               {"validation_provenance", m.validation_provenance},
               {"suspicious_test_ids", m.suspicious_test_ids},
               {"validation_test_ids", m.validation_test_ids},
               {"dropped_suspicious", m.dropped_suspicious},
               {"dropped_validation", m.dropped_validation},
               {"warnings", m.warnings},
               {"started_at", m.started_at},
               {"finished_at", m.finished_at},
               {"resumed", m.resumed},
               {"ground_truth", m.ground_truth.empty() ? json(nullptr) : json(m.ground_truth)}};
  return {{"format", kReportFormat},
          {"version", kReportVersion},
          {"dataset_id", r.config.dataset_id},
          {"decision", inference::decision_name(r.decision)},
          {"decided_by", inference::decided_by_name(r.decided_by)},
          {"p_value", r.deciding_p_value()},
          {"alpha", r.config.alpha},
          {"baseline_threshold", r.config.baseline_threshold},
          {"ks", r.ks ? to_json(*r.ks) : json(nullptr)},
          {"baseline", std::move(baseline)},
          {"median_shift_direction",
           r.median_shift_direction ? json(*r.median_shift_direction) : json(nullptr)},
          {"metric", similarity::metric_name(r.config.scorer.metric)},
          {"config", config::to_json(r.config)},
          {"suspicious", completions_json(r.suspicious)},
          {"validation", completions_json(r.validation)},
          {"run_metadata", std::move(meta)}};
}

std::string report_text(const inference::AuditReport& r) {
  std::ostringstream out;
  out << std::setprecision(6);
  if (!r.config.dataset_id.empty()) out << "dataset:   " << r.config.dataset_id << '\n';
  out << "decision:  " << inference::decision_name(r.decision) << " (by "
      << inference::decided_by_name(r.decided_by) << ")\n";
  out << "baseline:  p=" << r.baseline.p_value << " mean_sim=" << r.baseline.mean_score
      << " validation_mean_sim=" << r.baseline.validation_mean_score << '\n';
  if (r.ks) {
    out << "shift KS:  D=" << r.ks->d_statistic << " p=" << r.ks->p_value
        << " n_s=" << r.ks->m << " n_v=" << r.ks->n << " ("
        << stats::test_mode_name(r.ks->mode) << ")\n";
  }
  if (r.median_shift_direction) {
    out << "median(S_v) - median(S_s): " << *r.median_shift_direction << '\n';
  }
  for (const auto& w : r.meta.warnings) out << "warning:   " << w << '\n';
  return out.str();
}

std::vector<std::filesystem::path> write_report(const inference::AuditReport& report,
                                                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  const auto json_path = dir / "report.json";
  {
    std::ofstream out(json_path);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + json_path.string());
    out << to_json(report).dump(2) << '\n';
  }
  written.push_back(json_path);
  written.push_back(write_scores_csv(report.suspicious, dir / "suspicious_scores.csv"));
  written.push_back(write_scores_csv(report.validation, dir / "validation_scores.csv"));
  return written;
}

ReportDigest read_digest(const std::filesystem::path& report_json) {
  std::ifstream in(report_json);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + report_json.string());
  try {
    const auto j = json::parse(in);
    if (j.value("format", "") != kReportFormat) {
      throw Error(ErrorCode::kParse, report_json.string() + ": not a report document");
    }
    if (j.value("version", 0) != kReportVersion) {
      throw Error(ErrorCode::kParse, report_json.string() + ": unsupported report version");
    }
    ReportDigest d;
    d.dataset_id = j.value("dataset_id", "");
    d.decision = j.at("decision").get<std::string>();
    d.decided_by = j.at("decided_by").get<std::string>();
    d.p_value = j.at("p_value").get<double>();
    d.baseline_p_value = j.at("baseline").at("p_value").get<double>();
    const auto& gt = j.at("run_metadata").at("ground_truth");
    if (gt.is_string()) d.ground_truth = gt.get<std::string>();
    return d;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, report_json.string() + ": " + e.what());
  }
}

}  // namespace catshift::io
