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

#include "catshift/evaluation.hpp"

#include <algorithm>
#include <optional>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "catshift/error.hpp"
#include "catshift/report_io.hpp"
#include "catshift/stats.hpp"
#include "catshift/text.hpp"

namespace catshift::evaluation {
namespace {

using nlohmann::json;

// Splits one CSV record; handles quoted fields with doubled quotes.
std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

Label parse_label(std::string_view name) {
  if (name == "member" || name == "0") return Label::kMember;
  if (name == "non_member" || name == "nonmember" || name == "1") return Label::kNonMember;
  throw Error(ErrorCode::kInvalidArgument, "unknown label '" + std::string(name) + "'");
}

std::string_view label_name(Label label) {
  return label == Label::kMember ? "member" : "non_member";
}

double auc(std::span<const LabeledOutcome> outcomes) {
  std::vector<double> members, non_members;
  for (const auto& o : outcomes) {
    (o.label == Label::kMember ? members : non_members).push_back(o.p_value);
  }
  if (members.empty() || non_members.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "AUC needs at least one outcome of each label");
  }
  // Rank formulation: midrank sum of the non-members over the pooled sample.
  std::vector<std::pair<double, bool>> pooled;
  for (double p : members) pooled.emplace_back(p, false);
  for (double p : non_members) pooled.emplace_back(p, true);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].second) rank_sum += midrank;
    }
    i = j;
  }
  const double n_pos = static_cast<double>(non_members.size());
  const double n_neg = static_cast<double>(members.size());
  const double u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
  return u / (n_pos * n_neg);
}

MetricsSummary f1_at(std::span<const LabeledOutcome> outcomes, double threshold) {
  MetricsSummary m;
  m.threshold = threshold;
  bool has_member = false, has_non_member = false;
  for (const auto& o : outcomes) {
    const bool predicted = o.p_value < threshold;
    if (o.label == Label::kMember) {
      has_member = true;
      ++(predicted ? m.tp : m.fn);
    } else {
      has_non_member = true;
      ++(predicted ? m.fp : m.tn);
    }
  }
  const double denom = 2.0 * m.tp + m.fp + m.fn;
  m.f1 = denom > 0 ? 2.0 * m.tp / denom : 0.0;
  if (has_member && has_non_member) m.auc = auc(outcomes);
  return m;
}

std::map<std::string, Label> read_labels_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::map<std::string, Label> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || text::trim(line).empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = csv_split(line);
    if (fields.size() < 2) {
      throw Error(ErrorCode::kParse,
                  path.string() + ":" + std::to_string(line_no) + ": expected dataset_id,label");
    }
    try {
      labels[fields[0]] = parse_label(text::trim(fields[1]));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return labels;
}

Evaluation evaluate_reports(const std::filesystem::path& dir, double threshold,
                            const std::map<std::string, Label>& labels) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kIo, dir.string() + " is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "report.json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  struct Group {
    std::vector<double> p, baseline_p;
    std::optional<std::string> truth;
  };
  std::map<std::string, Group> groups;
  for (const auto& f : files) {
    const auto d = io::read_digest(f);
    const std::string id = d.dataset_id.empty() ? f.parent_path().filename().string() : d.dataset_id;
    auto& g = groups[id];
    g.p.push_back(d.p_value);
    g.baseline_p.push_back(d.baseline_p_value);
    if (d.ground_truth) g.truth = d.ground_truth;
  }

  Evaluation e;
  e.reports = files.size();
  for (const auto& [id, g] : groups) {
    Label label;
    if (auto it = labels.find(id); it != labels.end()) {
      label = it->second;
    } else if (g.truth) {
      label = parse_label(*g.truth);
    } else {
      throw Error(ErrorCode::kInvalidArgument, "no label for dataset '" + id + "'");
    }
    e.catshift.push_back({id, label, stats::median(g.p)});
    e.baseline.push_back({id, label, stats::median(g.baseline_p)});
  }
  if (e.catshift.empty()) {
    throw Error(ErrorCode::kInsufficientData, "no report.json files under " + dir.string());
  }
  e.catshift_metrics = f1_at(e.catshift, threshold);
  e.baseline_metrics = f1_at(e.baseline, threshold);
  return e;
}

json to_json(const MetricsSummary& m) {
  // AUC is undefined unless both labels occur.
  const bool both = m.tp + m.fn > 0 && m.fp + m.tn > 0;
  return {{"auc", both ? json(m.auc) : json(nullptr)}, {"f1", m.f1}, {"threshold", m.threshold},
          {"tp", m.tp},   {"fp", m.fp}, {"tn", m.tn},
          {"fn", m.fn}};
}

json to_json(const Evaluation& e) {
  json outcomes = json::array();
  for (std::size_t i = 0; i < e.catshift.size(); ++i) {
    outcomes.push_back({{"dataset_id", e.catshift[i].dataset_id},
                        {"label", label_name(e.catshift[i].label)},
                        {"p_value", e.catshift[i].p_value},
                        {"baseline_p_value", e.baseline[i].p_value}});
  }
  return {{"reports", e.reports},
          {"datasets", e.catshift.size()},
          {"catshift", to_json(e.catshift_metrics)},
          {"baseline", to_json(e.baseline_metrics)},
          {"outcomes", std::move(outcomes)}};
}

std::vector<std::filesystem::path> write_evaluation(const Evaluation& e,
                                                    const std::filesystem::path& json_path) {
  if (json_path.has_parent_path()) std::filesystem::create_directories(json_path.parent_path());
  {
    std::ofstream out(json_path);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + json_path.string());
    out << to_json(e).dump(2) << '\n';
  }
  auto csv_path = json_path;
  csv_path.replace_extension(".csv");
  std::ofstream out(csv_path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + csv_path.string());
  out << "dataset_id,label,p_value,prediction\n" << std::setprecision(17);
  const double t = e.catshift_metrics.threshold;
  for (const auto& o : e.catshift) {
    out << csv_field(o.dataset_id) << ',' << label_name(o.label) << ',' << o.p_value << ','
        << (o.p_value < t ? "member" : "non_member") << '\n';
  }
  return {json_path, csv_path};
}

}  // namespace catshift::evaluation
