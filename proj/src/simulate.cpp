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

#include "catshift/simulate.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include "catshift/config.hpp"
#include "catshift/error.hpp"
#include "catshift/hashing.hpp"
#include "catshift/report_io.hpp"
#include "catshift/sim_model.hpp"

namespace catshift::simulate {
namespace {

using nlohmann::json;

std::vector<double> real_list(const json& j, const char* key) {
  if (!j.is_array() || j.empty()) {
    throw Error(ErrorCode::kInvalidArgument, std::string(key) + " must be a non-empty array");
  }
  return j.get<std::vector<double>>();
}

std::string cell_label(double gr, double gn, double strength) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "gr%.3f_gn%.3f_s%.3f", gr, gn, strength);
  return buf;
}

std::string subset_label(bool member, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%03zu", member ? "member" : "non_member", index);
  return buf;
}

std::vector<corpus::PairRecord> subset_pairs(const Scenario& s, std::string_view role,
                                             std::size_t index, const corpus::PairOptions& opt) {
  const std::uint64_t seed = hash_combine(hash_combine(s.seed, fnv1a64(role)), index);
  const auto prefix = std::string(role) + "_" + std::to_string(index);
  const auto docs = model::synthetic_texts(s.n_finetune + s.n_test, s.min_tokens,
                                           s.max_tokens, seed, prefix);
  return corpus::make_pairs(docs, opt).pairs;
}

struct Job {
  std::size_t cell;
  bool member;
  std::size_t index;
};

}  // namespace

Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "scenario must be a JSON object");
  Scenario s;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "gain_recover") s.gain_recover = real_list(v, "gain_recover");
      else if (key == "gain_new") s.gain_new = real_list(v, "gain_new");
      else if (key == "strength") s.strength = real_list(v, "strength");
      else if (key == "members") s.members = v.get<std::size_t>();
      else if (key == "non_members") s.non_members = v.get<std::size_t>();
      else if (key == "n_finetune") s.n_finetune = v.get<std::size_t>();
      else if (key == "n_test") s.n_test = v.get<std::size_t>();
      else if (key == "min_tokens") s.min_tokens = v.get<std::size_t>();
      else if (key == "max_tokens") s.max_tokens = v.get<std::size_t>();
      else if (key == "recall_threshold") s.recall_threshold = v.get<double>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else if (key == "require_recover_above_new") s.require_recover_above_new = v.get<bool>();
      else if (key == "config") s.config = v;
      else if (key == "workers") s.workers = v.get<std::size_t>();
      else throw Error(ErrorCode::kInvalidArgument, "unknown scenario key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("scenario: ") + e.what());
  }
  if (s.members == 0 && s.non_members == 0) {
    throw Error(ErrorCode::kInvalidArgument, "scenario has no subsets");
  }
  if (s.n_finetune == 0 || s.n_test == 0) {
    throw Error(ErrorCode::kInvalidArgument, "n_finetune and n_test must be >= 1");
  }
  if (s.min_tokens < 2 || s.max_tokens < s.min_tokens) {
    throw Error(ErrorCode::kInvalidArgument, "need 2 <= min_tokens <= max_tokens");
  }
  config::from_json(s.config);  // validates the audit keys early
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read scenario " + path.string());
  try {
    return scenario_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

json to_json(const Scenario& s) {
  return {{"gain_recover", s.gain_recover},
          {"gain_new", s.gain_new},
          {"strength", s.strength},
          {"members", s.members},
          {"non_members", s.non_members},
          {"n_finetune", s.n_finetune},
          {"n_test", s.n_test},
          {"min_tokens", s.min_tokens},
          {"max_tokens", s.max_tokens},
          {"recall_threshold", s.recall_threshold},
          {"seed", s.seed},
          {"require_recover_above_new", s.require_recover_above_new},
          {"config", s.config},
          {"workers", s.workers}};
}

inference::AuditReport audit_subset(const Scenario& s, double gain_recover, double gain_new,
                                    double strength, bool member, std::size_t index) {
  auto settings = config::from_json(s.config);
  auto cfg = settings.audit;
  cfg.n_finetune = s.n_finetune;
  cfg.n_test = s.n_test;
  cfg.seed = hash_combine(s.seed, index * 2 + (member ? 1 : 0));
  cfg.poll_interval = std::chrono::milliseconds(0);
  cfg.parallelism = 1;
  cfg.work_dir.clear();
  cfg.dataset_id = cell_label(gain_recover, gain_new, strength) + "/" + subset_label(member, index);

  auto suspicious = subset_pairs(s, member ? "member" : "non_member", index, settings.pairs);
  auto validation = subset_pairs(s, member ? "validation_m" : "validation_n", index, settings.pairs);

  model::SimModelState state;
  state.gain_recover = gain_recover;
  state.gain_new = gain_new;
  state.recall_threshold = s.recall_threshold;
  state.noise_seed = hash_combine(s.seed, 0x6e6f697365ULL);
  if (member) state = model::seed_memory(std::move(state), suspicious, strength, "subset");
  model::SimModelClient client(std::move(state));

  const auto bundle = inference::build_bundle(std::move(suspicious), std::move(validation),
                                              "fresh synthetic corpus, never seeded", cfg);
  auto report = inference::dual_test(client, bundle, cfg);
  report.meta.ground_truth = member ? "member" : "non_member";
  return report;
}

SimulationResult run(const Scenario& s, const std::filesystem::path& out_dir) {
  SimulationResult result;
  for (double gr : s.gain_recover) {
    for (double gn : s.gain_new) {
      if (s.require_recover_above_new && !(gr > gn)) continue;
      for (double st : s.strength) {
        CellResult c;
        c.gain_recover = gr;
        c.gain_new = gn;
        c.strength = st;
        c.label = cell_label(gr, gn, st);
        result.cells.push_back(std::move(c));
      }
    }
  }
  if (result.cells.empty()) throw Error(ErrorCode::kInvalidArgument, "scenario grid is empty");

  std::vector<Job> jobs;
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    for (std::size_t i = 0; i < s.members; ++i) jobs.push_back({c, true, i});
    for (std::size_t i = 0; i < s.non_members; ++i) jobs.push_back({c, false, i});
  }

  struct Outcome {
    double p = 1.0;
    double baseline_p = 1.0;
    bool shortcut = false;
    bool consistent = true;
  };
  std::vector<Outcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mu;
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < jobs.size();) {
      try {
        const auto& job = jobs[k];
        const auto& cell = result.cells[job.cell];
        const auto report = audit_subset(s, cell.gain_recover, cell.gain_new, cell.strength,
                                         job.member, job.index);
        if (!out_dir.empty()) {
          io::write_report(report, out_dir / cell.label / subset_label(job.member, job.index));
        }
        outcomes[k] = {report.deciding_p_value(), report.baseline.p_value,
                       report.decided_by == inference::DecidedBy::kBaselineShortcut,
                       inference::decision_consistent(report)};
      } catch (...) {
        std::lock_guard lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
        next = jobs.size();
      }
    }
  };
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_workers = std::min(jobs.size(), s.workers ? s.workers : hw);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  const double threshold = config::from_json(s.config).audit.alpha;
  std::vector<evaluation::LabeledOutcome> all;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    auto& cell = result.cells[jobs[k].cell];
    const auto label = jobs[k].member ? evaluation::Label::kMember : evaluation::Label::kNonMember;
    const auto id = cell.label + "/" + subset_label(jobs[k].member, jobs[k].index);
    cell.outcomes.push_back({id, label, outcomes[k].p});
    cell.baseline_outcomes.push_back({id, label, outcomes[k].baseline_p});
    cell.shortcut_decisions += outcomes[k].shortcut;
    cell.inconsistent_reports += !outcomes[k].consistent;
    all.push_back(cell.outcomes.back());
  }
  for (auto& cell : result.cells) {
    cell.metrics = evaluation::f1_at(cell.outcomes, threshold);
    cell.baseline_metrics = evaluation::f1_at(cell.baseline_outcomes, threshold);
    result.false_positives += cell.metrics.fp;
  }
  result.overall = evaluation::f1_at(all, threshold);
  result.audits = jobs.size();

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir / "summary.json");
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + (out_dir / "summary.json").string());
    out << json{{"scenario", to_json(s)}, {"result", to_json(result)}}.dump(2) << '\n';
  }
  return result;
}

json to_json(const SimulationResult& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"label", c.label},
                     {"gain_recover", c.gain_recover},
                     {"gain_new", c.gain_new},
                     {"strength", c.strength},
                     {"catshift", evaluation::to_json(c.metrics)},
                     {"baseline", evaluation::to_json(c.baseline_metrics)},
                     {"shortcut_decisions", c.shortcut_decisions},
                     {"inconsistent_reports", c.inconsistent_reports}});
  }
  return {{"cells", std::move(cells)},
          {"overall", evaluation::to_json(r.overall)},
          {"audits", r.audits},
          {"false_positives", r.false_positives}};
}

}  // namespace catshift::simulate
