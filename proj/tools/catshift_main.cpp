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

// Command-line front end. Everything goes through the C interface.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "catshift/catshift.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitNonMember = 0;
constexpr int kExitError = 1;
constexpr int kExitMember = 2;

// Carries a C status across the command code.
struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(cs_status status, const std::string& what) {
  if (status != CS_OK) throw Failure(what + ": " + cs_last_error());
}

std::string take(char* s) {
  std::string out = s ? s : "";
  cs_string_free(s);
  return out;
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Settings = std::unique_ptr<cs_settings, Deleter<cs_settings, cs_settings_free>>;
using Pairs = std::unique_ptr<cs_pairs, Deleter<cs_pairs, cs_pairs_free>>;
using Model = std::unique_ptr<cs_model, Deleter<cs_model, cs_model_free>>;
using Report = std::unique_ptr<cs_report, Deleter<cs_report, cs_report_free>>;

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Globals {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out = "catshift-out";
  std::string endpoint;
  std::string metric;
  std::string mode;
  std::optional<double> alpha;
  std::optional<double> baseline_threshold;
  std::optional<std::size_t> n_finetune;
  std::optional<std::size_t> n_test;
  std::optional<std::size_t> max_new_tokens;
  std::optional<std::size_t> parallelism;
};

// Config file first, then the named flags, then --set in order.
Settings make_settings(const Globals& g) {
  cs_settings* raw = nullptr;
  check(cs_settings_new(&raw), "settings");
  Settings s(raw);
  if (!g.config.empty()) check(cs_settings_load(s.get(), g.config.c_str()), "config");
  auto set = [&](const std::string& assignment) {
    // Name the key only; a rejected value may be something secret.
    check(cs_settings_set(s.get(), assignment.c_str()),
          "option " + assignment.substr(0, assignment.find('=')));
  };
  if (g.seed) set("seed=" + std::to_string(*g.seed));
  if (!g.endpoint.empty()) set("endpoint=" + g.endpoint);
  if (!g.metric.empty()) set("metric=" + g.metric);
  if (!g.mode.empty()) set("mode=" + g.mode);
  auto real = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  if (g.alpha) set("alpha=" + real(*g.alpha));
  if (g.baseline_threshold) set("baseline_threshold=" + real(*g.baseline_threshold));
  if (g.n_finetune) set("n_finetune=" + std::to_string(*g.n_finetune));
  if (g.n_test) set("n_test=" + std::to_string(*g.n_test));
  if (g.max_new_tokens) set("max_new_tokens=" + std::to_string(*g.max_new_tokens));
  if (g.parallelism) set("parallelism=" + std::to_string(*g.parallelism));
  for (const auto& a : g.sets) set(a);
  return s;
}

json settings_snapshot(const cs_settings* s) {
  char* out = nullptr;
  check(cs_settings_to_json(s, &out), "config");
  return json::parse(take(out));
}

Pairs load_pairs(const cs_settings* s, const std::string& path) {
  cs_pairs* raw = nullptr;
  check(cs_pairs_load(s, path.c_str(), &raw), path);
  return Pairs(raw);
}

Model open_model(const cs_settings* s) {
  cs_model* raw = nullptr;
  check(cs_model_open(s, &raw), "endpoint");
  return Model(raw);
}

// One manifest per command invocation, listing every artifact it wrote.
class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> argv)
      : command_(std::move(command)), argv_(std::move(argv)), started_(utc_now()),
        t0_(std::chrono::steady_clock::now()) {}

  void config(json snapshot) { config_ = std::move(snapshot); }

  void input(const std::string& role, const std::string& path) {
    char* hex = nullptr;
    check(cs_sha256_file(path.c_str(), &hex), "hashing " + path);
    inputs_.push_back({{"role", role}, {"path", path}, {"sha256", take(hex)}});
  }

  void output(const fs::path& path) { outputs_.push_back(path.string()); }

  void write(const fs::path& dir) {
    const auto path = dir / "manifest.json";
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    const json doc = {{"tool", "catshift"},
                      {"version", cs_version()},
                      {"command", command_},
                      {"argv", argv_},
                      {"config", config_},
                      {"inputs", inputs_},
                      {"outputs", outputs_},
                      {"started_at", started_},
                      {"finished_at", utc_now()},
                      {"wall_seconds", wall}};
    fs::create_directories(dir);
    std::ofstream out(path);
    if (!out) throw Failure("cannot write " + path.string());
    out << doc.dump(2) << '\n';
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
  json config_ = nullptr;
  json inputs_ = json::array();
  json outputs_ = json::array();
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Failure("cannot write " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

int cmd_pairs(const Globals& g, const std::string& input, Manifest& m) {
  auto s = make_settings(g);
  m.config(settings_snapshot(s.get()));
  m.input("corpus", input);
  auto pairs = load_pairs(s.get(), input);
  const fs::path dir = g.out;
  fs::create_directories(dir);
  const auto path = dir / "pairs.jsonl";
  check(cs_pairs_write_jsonl(pairs.get(), path.string().c_str()), "writing pairs");
  m.output(path);
  m.write(dir);
  std::cout << cs_pairs_size(pairs.get()) << " pairs written to " << path.string() << " ("
            << cs_pairs_dropped(pairs.get()) << " records dropped)\n";
  return 0;
}

struct AuditArgs {
  std::string suspicious;
  std::string validation;
  std::string provenance;
  std::string label;
};

int cmd_audit(const Globals& g, AuditArgs a, Manifest& m) {
  auto g2 = g;
  if (!a.provenance.empty()) g2.sets.insert(g2.sets.begin(), "validation_provenance=" + a.provenance);
  auto s = make_settings(g2);
  m.config(settings_snapshot(s.get()));
  m.input("suspicious", a.suspicious);
  m.input("validation", a.validation);
  auto susp = load_pairs(s.get(), a.suspicious);
  auto val = load_pairs(s.get(), a.validation);
  auto model = open_model(s.get());

  cs_report* raw = nullptr;
  check(cs_audit_run(model.get(), susp.get(), val.get(), s.get(), &raw), "audit");
  Report report(raw);
  if (!a.label.empty()) check(cs_report_set_ground_truth(report.get(), a.label.c_str()), "label");

  const fs::path dir = g.out;
  char* paths = nullptr;
  check(cs_report_write(report.get(), dir.string().c_str(), &paths), "writing report");
  for (const auto& p : json::parse(take(paths))) m.output(p.get<std::string>());
  m.write(dir);

  char* text = nullptr;
  check(cs_report_text(report.get(), &text), "report");
  std::cout << take(text);
  return cs_report_decision(report.get()) == CS_MEMBER ? kExitMember : kExitNonMember;
}

int cmd_baseline(const Globals& g, const AuditArgs& a, Manifest& m) {
  auto s = make_settings(g);
  m.config(settings_snapshot(s.get()));
  m.input("suspicious", a.suspicious);
  m.input("validation", a.validation);
  auto susp = load_pairs(s.get(), a.suspicious);
  auto val = load_pairs(s.get(), a.validation);
  auto model = open_model(s.get());
  char* out = nullptr;
  check(cs_baseline_run(model.get(), susp.get(), val.get(), s.get(), &out), "baseline");
  const auto doc = json::parse(take(out));
  const fs::path dir = g.out;
  fs::create_directories(dir);
  write_text(dir / "baseline.json", doc.dump(2));
  m.output(dir / "baseline.json");
  m.write(dir);
  std::cout << "baseline p=" << doc["p_value"].get<double>()
            << " mean_sim=" << doc["mean_score"].get<double>()
            << " validation_mean_sim=" << doc["validation_mean_score"].get<double>()
            << (doc["shortcut_fires"].get<bool>() ? "  (shortcut would decide Member)" : "")
            << '\n';
  return 0;
}

int cmd_simulate(const Globals& g, const std::string& scenario_path, Manifest& m) {
  std::ifstream in(scenario_path);
  if (!in) throw Failure("cannot read scenario " + scenario_path);
  json scenario;
  try {
    scenario = json::parse(in);
  } catch (const json::exception& e) {
    throw Failure(scenario_path + ": " + e.what());
  }
  if (!scenario.is_object()) throw Failure(scenario_path + ": scenario must be a JSON object");
  if (g.seed) scenario["seed"] = *g.seed;
  // Audit flags refine the scenario's own config block.
  auto s = make_settings(g);
  char* explicit_json = nullptr;
  check(cs_settings_explicit_json(s.get(), &explicit_json), "config");
  auto overrides = json::parse(take(explicit_json));
  overrides.erase("seed");
  if (!overrides.empty()) {
    if (!scenario.contains("config")) scenario["config"] = json::object();
    for (auto& [k, v] : overrides.items()) scenario["config"][k] = v;
  }
  m.config(scenario);
  m.input("scenario", scenario_path);

  const fs::path dir = g.out;
  char* summary = nullptr;
  check(cs_simulate(scenario.dump().c_str(), dir.string().c_str(), &summary), "simulate");
  const auto result = json::parse(take(summary));
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") {
      m.output(entry.path());
    }
  }
  m.write(dir);
  for (const auto& c : result["cells"]) {
    std::printf("%-26s auc=%.4f f1=%.4f fp=%zu\n", c["label"].get<std::string>().c_str(),
                c["catshift"]["auc"].get<double>(), c["catshift"]["f1"].get<double>(),
                c["catshift"]["fp"].get<std::size_t>());
  }
  std::printf("overall: audits=%zu auc=%.4f f1=%.4f false_positives=%zu\n",
              result["audits"].get<std::size_t>(), result["overall"]["auc"].get<double>(),
              result["overall"]["f1"].get<double>(), result["false_positives"].get<std::size_t>());
  return 0;
}

int cmd_evaluate(const Globals& g, const std::string& reports, double threshold,
                 const std::string& labels, Manifest& m) {
  m.config(json{{"threshold", threshold}, {"labels", labels}});
  if (!labels.empty()) m.input("labels", labels);
  const fs::path dir = g.out;
  fs::create_directories(dir);
  const auto out_json = dir / "evaluation.json";
  char* summary = nullptr;
  check(cs_evaluate_dir(reports.c_str(), threshold, labels.empty() ? nullptr : labels.c_str(),
                        out_json.string().c_str(), &summary),
        "evaluate");
  const auto doc = json::parse(take(summary));
  m.output(out_json);
  m.output(dir / "evaluation.csv");
  m.write(dir);
  const auto& c = doc["catshift"];
  const auto& b = doc["baseline"];
  std::printf("catshift: auc=%.4f f1=%.4f tp=%zu fp=%zu tn=%zu fn=%zu\n",
              c["auc"].get<double>(), c["f1"].get<double>(), c["tp"].get<std::size_t>(),
              c["fp"].get<std::size_t>(), c["tn"].get<std::size_t>(), c["fn"].get<std::size_t>());
  std::printf("baseline: auc=%.4f f1=%.4f\n", b["auc"].get<double>(), b["f1"].get<double>());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-only dataset inference audits"};
  app.set_version_flag("--version", std::string(cs_version()));
  app.require_subcommand(1);
  app.fallthrough();

  char* keys = nullptr;
  const std::string key_help = cs_settings_describe(&keys) == CS_OK ? take(keys) : "";
  app.footer("Config keys (for --config files and --set):\n" + key_help +
             "\nAPI tokens are read from the environment variable named by token_env "
             "(default CATSHIFT_API_TOKEN).");

  Globals g;
  app.add_option("--config", g.config, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--set", g.sets, "override one config key: key=value (repeatable)");
  app.add_option("--seed", g.seed, "split and simulation seed");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--endpoint", g.endpoint, "sim:<config.json> or http(s)://host[:port]");
  app.add_option("--metric", g.metric, "exact | ngram_f1 | lcs_ratio | embedding");
  app.add_option("--mode", g.mode, "paired | shared fine-tuning");
  app.add_option("--alpha", g.alpha, "significance level of the shift test");
  app.add_option("--baseline-threshold", g.baseline_threshold, "baseline shortcut level");
  app.add_option("--n-finetune", g.n_finetune, "pairs per fine-tune job");
  app.add_option("--n-test", g.n_test, "test pairs per dataset");
  app.add_option("--max-new-tokens", g.max_new_tokens, "completion length");
  app.add_option("--parallelism", g.parallelism, "completions in flight");

  std::string pairs_input;
  auto* pairs = app.add_subcommand("pairs", "cut a corpus into prompt/completion pairs");
  pairs->add_option("input", pairs_input, "corpus file")->required();

  AuditArgs audit_args;
  auto* audit = app.add_subcommand("audit", "run the dual test (exit 0 NonMember, 2 Member)");
  audit->add_option("--suspicious", audit_args.suspicious, "suspicious corpus")->required();
  audit->add_option("--validation", audit_args.validation, "known non-member corpus")->required();
  audit->add_option("--provenance", audit_args.provenance,
                    "why the validation corpus is a non-member");
  audit->add_option("--label", audit_args.label, "ground truth for evaluation: member | non_member");

  AuditArgs baseline_args;
  auto* baseline = app.add_subcommand("baseline", "ground-truth similarity test only");
  baseline->add_option("--suspicious", baseline_args.suspicious, "suspicious corpus")->required();
  baseline->add_option("--validation", baseline_args.validation, "validation corpus")->required();

  std::string scenario;
  auto* simulate = app.add_subcommand("simulate", "audit synthetic subsets on the simulator");
  simulate->add_option("scenario", scenario, "scenario JSON")->required();

  std::string reports_dir, labels_csv;
  double threshold = 0.1;
  auto* evaluate = app.add_subcommand("evaluate", "AUC and F1 over a directory of reports");
  evaluate->add_option("reports", reports_dir, "directory searched for report.json")->required();
  evaluate->add_option("--threshold", threshold, "p-value threshold")->capture_default_str();
  evaluate->add_option("--labels", labels_csv, "CSV of dataset_id,label");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  std::vector<std::string> args(argv, argv + argc);
  try {
    if (*pairs) {
      Manifest m("pairs", args);
      return cmd_pairs(g, pairs_input, m);
    }
    if (*audit) {
      Manifest m("audit", args);
      return cmd_audit(g, audit_args, m);
    }
    if (*baseline) {
      Manifest m("baseline", args);
      return cmd_baseline(g, baseline_args, m);
    }
    if (*simulate) {
      Manifest m("simulate", args);
      return cmd_simulate(g, scenario, m);
    }
    if (*evaluate) {
      Manifest m("evaluate", args);
      return cmd_evaluate(g, reports_dir, threshold, labels_csv, m);
    }
  } catch (const std::exception& e) {
    std::cerr << "catshift: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
