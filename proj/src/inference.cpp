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

#include "catshift/inference.hpp"

#include <atomic>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "catshift/config.hpp"
#include "catshift/error.hpp"
#include "catshift/hashing.hpp"
#include "catshift/report_io.hpp"
#include "catshift/text.hpp"

namespace catshift::inference {
namespace {

using corpus::PairRecord;
using nlohmann::json;
using Outputs = std::vector<std::optional<std::string>>;

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Bounded fan-out over prompts. Transport failures leave an empty slot; any
// other error aborts the whole collection.
Outputs collect(model::ModelClient& client, const model::ModelRef& model,
                const std::vector<PairRecord>& pairs, const AuditConfig& cfg) {
  Outputs out(pairs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr fatal;
  std::mutex fatal_mu;

  auto worker = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pairs.size()) return;
      try {
        out[i] = model::complete_majority(client, model, pairs[i].prompt,
                                          cfg.max_new_tokens, cfg.repeat_k);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kTransport) continue;
        std::lock_guard lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
        stop = true;
      } catch (...) {
        std::lock_guard lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
        stop = true;
      }
    }
  };

  const std::size_t n_workers = std::max<std::size_t>(1, std::min(cfg.parallelism, pairs.size()));
  {
    std::vector<std::jthread> workers;
    workers.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) workers.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);
  return out;
}

void check_drops(std::size_t dropped, std::size_t total, const AuditConfig& cfg,
                 std::string_view what) {
  if (total == 0) return;
  if (static_cast<double>(dropped) > cfg.max_drop_fraction * static_cast<double>(total)) {
    throw Error(ErrorCode::kInsufficientData,
                std::string(what) + ": " + std::to_string(dropped) + " of " +
                    std::to_string(total) + " completions failed, above the tolerated " +
                    std::to_string(cfg.max_drop_fraction * 100.0) + "%");
  }
}

json outputs_to_json(const std::vector<PairRecord>& pairs, const Outputs& outputs) {
  json obj = json::object();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    obj[pairs[i].id] = outputs[i] ? json(*outputs[i]) : json(nullptr);
  }
  return obj;
}

std::optional<Outputs> outputs_from_json(const std::vector<PairRecord>& pairs, const json& obj) {
  Outputs out(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto it = obj.find(pairs[i].id);
    if (it == obj.end()) return std::nullopt;
    if (it->is_string()) out[i] = it->get<std::string>();
  }
  return out;
}

// On-disk stage checkpoints, valid only for an identical audit fingerprint.
class StageStore {
 public:
  StageStore(const std::string& dir, std::string fingerprint)
      : dir_(dir), fingerprint_(std::move(fingerprint)) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
  }

  std::optional<json> load(std::string_view stage) const {
    if (dir_.empty()) return std::nullopt;
    std::ifstream in(path(stage));
    if (!in) return std::nullopt;
    try {
      auto doc = json::parse(in);
      if (doc.value("fingerprint", "") != fingerprint_) return std::nullopt;
      return doc.at("data");
    } catch (const json::exception&) {
      return std::nullopt;
    }
  }

  void save(std::string_view stage, json data) const {
    if (dir_.empty()) return;
    const auto final_path = path(stage);
    auto tmp = final_path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp);
      if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
      out << json{{"fingerprint", fingerprint_}, {"data", std::move(data)}}.dump();
    }
    std::filesystem::rename(tmp, final_path);
  }

 private:
  std::filesystem::path path(std::string_view stage) const {
    return dir_ / (std::string(stage) + ".json");
  }

  std::filesystem::path dir_;
  std::string fingerprint_;
};

std::string fingerprint(const corpus::CorpusBundle& bundle, const AuditConfig& cfg,
                        const model::ModelRef& base) {
  auto snapshot = config::to_json(cfg);
  snapshot.erase("work_dir");
  snapshot.erase("parallelism");
  snapshot.erase("dataset_id");
  std::uint64_t h = fnv1a64(snapshot.dump());
  auto add_pairs = [&](const std::vector<PairRecord>& pairs) {
    for (const auto& p : pairs) {
      h = hash_combine(h, fnv1a64(p.id));
      h = hash_combine(h, fnv1a64(p.prompt));
      h = hash_combine(h, fnv1a64(p.completion));
    }
  };
  add_pairs(bundle.suspicious);
  add_pairs(bundle.validation);
  for (const auto* plan : {&bundle.suspicious_split, &bundle.validation_split}) {
    for (const auto& id : plan->finetune_ids) h = hash_combine(h, fnv1a64("f" + id));
    for (const auto& id : plan->test_ids) h = hash_combine(h, fnv1a64("t" + id));
  }
  h = hash_combine(h, fnv1a64(base.endpoint + "\n" + base.model_id));
  return to_hex(h);
}

json summary_to_json(const JobSummary& s) {
  return {{"job", io::to_json(s.job)},
          {"selected_model", s.selected.model.model_id},
          {"selected_step", s.selected.step ? json(*s.selected.step) : json(nullptr)},
          {"fell_back", s.selected.fell_back},
          {"warning", s.selected.warning}};
}

JobSummary summary_from_json(const json& j, const std::vector<std::string>& pair_ids,
                             const model::ModelRef& base) {
  JobSummary s;
  s.job = io::job_from_json(j.at("job"));
  s.job.base = base;
  if (s.job.result_model) s.job.result_model->endpoint = base.endpoint;
  s.selected.model = {base.endpoint, j.at("selected_model").get<std::string>()};
  if (!j.at("selected_step").is_null()) s.selected.step = j.at("selected_step").get<std::size_t>();
  s.selected.fell_back = j.at("fell_back").get<bool>();
  s.selected.warning = j.at("warning").get<std::string>();
  s.pair_ids = pair_ids;
  return s;
}

JobSummary run_finetune(model::ModelClient& client, const model::ModelRef& base,
                        std::vector<PairRecord> pairs, const AuditConfig& cfg) {
  JobSummary s;
  s.pair_ids.reserve(pairs.size());
  for (const auto& p : pairs) s.pair_ids.push_back(p.id);
  model::FineTuneSpec spec{std::move(pairs), cfg.hyperparams};
  auto job = client.start_finetune(base, spec);
  s.job = model::wait_for_job(client, std::move(job), cfg.poll_interval, cfg.job_timeout);
  s.selected = model::select_checkpoint(s.job);
  return s;
}

class Pipeline {
 public:
  Pipeline(model::ModelClient& client, const corpus::CorpusBundle& bundle,
           const AuditConfig& cfg)
      : client_(client),
        bundle_(bundle),
        cfg_(cfg),
        base_(client.base_model()),
        store_(cfg.work_dir, fingerprint(bundle, cfg, base_)) {
    cfg_.validate();
    if (text::trim(bundle_.validation_provenance).empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "validation corpus requires a non-membership provenance note");
    }
    susp_test_ = corpus::select(bundle_.suspicious, bundle_.suspicious_split.test_ids);
    val_test_ = corpus::select(bundle_.validation, bundle_.validation_split.test_ids);
  }

  AuditReport run(bool dual) {
    AuditReport report;
    report.config = cfg_;
    report.meta.started_at = utc_now();
    report.meta.base_model = base_;
    report.meta.validation_provenance = bundle_.validation_provenance;
    report.meta.suspicious_test_ids = bundle_.suspicious_split.test_ids;
    report.meta.validation_test_ids = bundle_.validation_split.test_ids;

    collect_pre(report);
    report.baseline = baseline_from(report.suspicious, report.validation, cfg_);

    if (dual && report.baseline.p_value < cfg_.baseline_threshold &&
        report.baseline.direction_member) {
      report.decision = Decision::kMember;
      report.decided_by = DecidedBy::kBaselineShortcut;
      return finish(std::move(report));
    }

    finetune(report);
    collect_post(report);
    score(report);
    return finish(std::move(report));
  }

  static BaselineResult baseline_from(const std::vector<ScoredCompletion>& suspicious,
                                      const std::vector<ScoredCompletion>& validation,
                                      const AuditConfig& cfg) {
    BaselineResult b;
    b.per_sample = {{}, similarity::DatasetTag::kSuspicious, cfg.scorer.metric};
    b.validation_per_sample = {{}, similarity::DatasetTag::kValidation, cfg.scorer.metric};
    for (const auto& c : suspicious) b.per_sample.scores.push_back(c.baseline_score);
    for (const auto& c : validation) b.validation_per_sample.scores.push_back(c.baseline_score);
    if (b.per_sample.scores.empty() || b.validation_per_sample.scores.empty()) {
      throw Error(ErrorCode::kInsufficientData, "baseline has no scored completions");
    }
    b.mean_score = stats::mean(b.per_sample.scores);
    b.validation_mean_score = stats::mean(b.validation_per_sample.scores);
    b.ks = stats::ks_two_sample(b.per_sample, b.validation_per_sample, cfg.test_mode,
                                stats::Alternative::kTwoSided);
    b.p_value = b.ks.p_value;
    b.direction_member =
        stats::median(b.per_sample.scores) > stats::median(b.validation_per_sample.scores);
    return b;
  }

 private:
  void collect_pre(AuditReport& report) {
    Outputs susp, val;
    if (auto cached = store_.load("pre")) {
      auto s = outputs_from_json(susp_test_, cached->at("suspicious"));
      auto v = outputs_from_json(val_test_, cached->at("validation"));
      if (s && v) {
        susp = std::move(*s);
        val = std::move(*v);
        report.meta.resumed = true;
      }
    }
    if (susp.empty()) {
      susp = collect(client_, base_, susp_test_, cfg_);
      val = collect(client_, base_, val_test_, cfg_);
      store_.save("pre", {{"suspicious", outputs_to_json(susp_test_, susp)},
                          {"validation", outputs_to_json(val_test_, val)}});
    }
    report.suspicious = scored_pre(susp_test_, susp, report.meta.dropped_suspicious);
    report.validation = scored_pre(val_test_, val, report.meta.dropped_validation);
    check_drops(report.meta.dropped_suspicious, susp_test_.size(), cfg_, "suspicious pre-fine-tune");
    check_drops(report.meta.dropped_validation, val_test_.size(), cfg_, "validation pre-fine-tune");
  }

  std::vector<ScoredCompletion> scored_pre(const std::vector<PairRecord>& pairs,
                                           const Outputs& outputs, std::size_t& dropped) {
    std::vector<ScoredCompletion> out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (!outputs[i]) {
        ++dropped;
        continue;
      }
      ScoredCompletion c;
      c.pair_id = pairs[i].id;
      c.pre = *outputs[i];
      c.baseline_score = cfg_.scorer(c.pre, pairs[i].completion).value;
      out.push_back(std::move(c));
    }
    return out;
  }

  void finetune(AuditReport& report) {
    const bool paired = cfg_.mode == FinetuneMode::kPaired;
    if (paired && bundle_.validation_split.finetune_ids.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "paired fine-tuning needs a non-empty validation fine-tune split");
    }
    if (auto cached = store_.load("finetune")) {
      try {
        auto s = summary_from_json(cached->at("suspicious"),
                                   bundle_.suspicious_split.finetune_ids, base_);
        std::optional<JobSummary> v;
        if (paired) {
          v = summary_from_json(cached->at("validation"),
                                bundle_.validation_split.finetune_ids, base_);
        }
        if (client_.has_model(s.selected.model) && (!v || client_.has_model(v->selected.model))) {
          report.meta.suspicious_job = std::move(s);
          report.meta.validation_job = std::move(v);
          report.meta.resumed = true;
          return;
        }
      } catch (const std::exception&) {
        // Stale or partial stage; recompute.
      }
    }

    auto susp_pairs = corpus::select(bundle_.suspicious, bundle_.suspicious_split.finetune_ids);
    // Paired jobs run against independent copies of the base model.
    std::future<JobSummary> val_job;
    if (paired) {
      auto val_pairs = corpus::select(bundle_.validation, bundle_.validation_split.finetune_ids);
      val_job = std::async(std::launch::async, [this, pairs = std::move(val_pairs)]() mutable {
        return run_finetune(client_, base_, std::move(pairs), cfg_);
      });
    }
    std::exception_ptr susp_error;
    try {
      report.meta.suspicious_job = run_finetune(client_, base_, std::move(susp_pairs), cfg_);
    } catch (...) {
      susp_error = std::current_exception();
    }
    if (val_job.valid()) {
      auto v = val_job.get();  // rethrows
      report.meta.validation_job = std::move(v);
    }
    if (susp_error) std::rethrow_exception(susp_error);

    json data = {{"suspicious", summary_to_json(*report.meta.suspicious_job)}};
    if (report.meta.validation_job) data["validation"] = summary_to_json(*report.meta.validation_job);
    store_.save("finetune", std::move(data));
  }

  void collect_post(AuditReport& report) {
    const auto& susp_model = report.meta.suspicious_job->selected.model;
    const auto& val_model = report.meta.validation_job
                                ? report.meta.validation_job->selected.model
                                : susp_model;
    auto present = [](const std::vector<PairRecord>& all,
                      const std::vector<ScoredCompletion>& scored) {
      std::vector<std::string> ids;
      for (const auto& c : scored) ids.push_back(c.pair_id);
      return corpus::select(all, ids);
    };
    const auto susp_pairs = present(susp_test_, report.suspicious);
    const auto val_pairs = present(val_test_, report.validation);

    Outputs susp, val;
    if (auto cached = store_.load("post")) {
      auto s = outputs_from_json(susp_pairs, cached->at("suspicious"));
      auto v = outputs_from_json(val_pairs, cached->at("validation"));
      if (s && v) {
        susp = std::move(*s);
        val = std::move(*v);
        report.meta.resumed = true;
      }
    }
    if (susp.empty() && !susp_pairs.empty()) {
      susp = collect(client_, susp_model, susp_pairs, cfg_);
      val = collect(client_, val_model, val_pairs, cfg_);
      store_.save("post", {{"suspicious", outputs_to_json(susp_pairs, susp)},
                           {"validation", outputs_to_json(val_pairs, val)}});
    }
    attach_post(report.suspicious, susp, report.meta.dropped_suspicious);
    attach_post(report.validation, val, report.meta.dropped_validation);
    check_drops(report.meta.dropped_suspicious, susp_test_.size(), cfg_, "suspicious");
    check_drops(report.meta.dropped_validation, val_test_.size(), cfg_, "validation");
  }

  static void attach_post(std::vector<ScoredCompletion>& scored, const Outputs& post,
                          std::size_t& dropped) {
    std::vector<ScoredCompletion> kept;
    kept.reserve(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) {
      if (!post[i]) {
        ++dropped;
        continue;
      }
      scored[i].post = *post[i];
      kept.push_back(std::move(scored[i]));
    }
    scored = std::move(kept);
  }

  void score(AuditReport& report) {
    report.suspicious_scores = {{}, similarity::DatasetTag::kSuspicious, cfg_.scorer.metric};
    report.validation_scores = {{}, similarity::DatasetTag::kValidation, cfg_.scorer.metric};
    for (auto& c : report.suspicious) {
      c.shift_score = similarity::score_shift({c.pair_id, c.pre, *c.post}, cfg_.scorer).value;
      report.suspicious_scores.scores.push_back(*c.shift_score);
    }
    for (auto& c : report.validation) {
      c.shift_score = similarity::score_shift({c.pair_id, c.pre, *c.post}, cfg_.scorer).value;
      report.validation_scores.scores.push_back(*c.shift_score);
    }
    if (report.suspicious_scores.scores.empty() || report.validation_scores.scores.empty()) {
      throw Error(ErrorCode::kInsufficientData, "no shift scores to test");
    }
    report.ks = stats::ks_two_sample(report.suspicious_scores, report.validation_scores,
                                     cfg_.test_mode, cfg_.alternative);
    report.decision = decide(*report.ks, cfg_.alpha);
    report.decided_by = DecidedBy::kCatShift;
    report.median_shift_direction = stats::median(report.validation_scores.scores) -
                                    stats::median(report.suspicious_scores.scores);
  }

  AuditReport finish(AuditReport report) {
    for (const auto* job : {&report.meta.suspicious_job, &report.meta.validation_job}) {
      if (*job && (*job)->selected.fell_back) report.meta.warnings.push_back((*job)->selected.warning);
    }
    for (auto& w : client_.warnings()) report.meta.warnings.push_back(std::move(w));
    report.meta.finished_at = utc_now();
    return report;
  }

  model::ModelClient& client_;
  const corpus::CorpusBundle& bundle_;
  AuditConfig cfg_;
  model::ModelRef base_;
  StageStore store_;
  std::vector<PairRecord> susp_test_;
  std::vector<PairRecord> val_test_;
};

}  // namespace

FinetuneMode parse_finetune_mode(std::string_view name) {
  if (name == "paired" || name == "paired_finetune") return FinetuneMode::kPaired;
  if (name == "shared" || name == "shared_finetune") return FinetuneMode::kShared;
  throw Error(ErrorCode::kInvalidArgument, "unknown fine-tune mode '" + std::string(name) + "'");
}

std::string_view finetune_mode_name(FinetuneMode mode) {
  return mode == FinetuneMode::kPaired ? "paired" : "shared";
}

std::string_view decision_name(Decision d) {
  return d == Decision::kMember ? "Member" : "NonMember";
}

std::string_view decided_by_name(DecidedBy d) {
  return d == DecidedBy::kBaselineShortcut ? "baseline_shortcut" : "catshift";
}

void AuditConfig::validate() const {
  if (!(0.0 < baseline_threshold && baseline_threshold < alpha && alpha < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "config requires 0 < baseline_threshold < alpha < 1");
  }
  if (n_finetune < 1 || n_test < 1) {
    throw Error(ErrorCode::kInvalidArgument, "n_finetune and n_test must be >= 1");
  }
  if (max_new_tokens < 1 || parallelism < 1 || repeat_k < 1 || scorer.ngram_n < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "max_new_tokens, parallelism, repeat_k and ngram_n must be >= 1");
  }
  if (!(max_drop_fraction >= 0.0 && max_drop_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "max_drop_fraction must lie in [0,1)");
  }
}

corpus::CorpusBundle build_bundle(std::vector<PairRecord> suspicious,
                                  std::vector<PairRecord> validation,
                                  std::string validation_provenance,
                                  const AuditConfig& cfg) {
  const std::size_t val_finetune = cfg.mode == FinetuneMode::kPaired ? cfg.n_finetune : 0;
  return corpus::make_bundle(std::move(suspicious), std::move(validation),
                             std::move(validation_provenance), cfg.n_finetune,
                             cfg.n_test, val_finetune, cfg.seed);
}

double AuditReport::deciding_p_value() const {
  if (decided_by == DecidedBy::kBaselineShortcut || !ks) return baseline.p_value;
  return ks->p_value;
}

Decision decide(double p_value, double alpha) {
  return p_value < alpha ? Decision::kMember : Decision::kNonMember;
}

Decision decide(const stats::KsResult& ks, double alpha) { return decide(ks.p_value, alpha); }

BaselineResult run_baseline(model::ModelClient& client, const model::ModelRef& base,
                            const std::vector<PairRecord>& suspicious_test,
                            const std::vector<PairRecord>& validation_test,
                            const AuditConfig& cfg) {
  cfg.validate();
  auto score_all = [&](const std::vector<PairRecord>& pairs, std::string_view what) {
    const auto outputs = collect(client, base, pairs, cfg);
    std::vector<ScoredCompletion> scored;
    std::size_t dropped = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (!outputs[i]) {
        ++dropped;
        continue;
      }
      scored.push_back({pairs[i].id, *outputs[i], std::nullopt,
                        cfg.scorer(*outputs[i], pairs[i].completion).value, std::nullopt});
    }
    check_drops(dropped, pairs.size(), cfg, what);
    return scored;
  };
  const auto s = score_all(suspicious_test, "suspicious baseline");
  const auto v = score_all(validation_test, "validation baseline");
  return Pipeline::baseline_from(s, v, cfg);
}

AuditReport run_catshift(model::ModelClient& client, const corpus::CorpusBundle& bundle,
                         const AuditConfig& cfg) {
  return Pipeline(client, bundle, cfg).run(false);
}

AuditReport dual_test(model::ModelClient& client, const corpus::CorpusBundle& bundle,
                      const AuditConfig& cfg) {
  return Pipeline(client, bundle, cfg).run(true);
}

bool decision_consistent(const AuditReport& r) {
  const auto& cfg = r.config;
  if (r.decided_by == DecidedBy::kBaselineShortcut) {
    // The shortcut only ever reports Member.
    return r.decision == Decision::kMember && r.baseline.p_value < cfg.baseline_threshold &&
           r.baseline.direction_member && !r.ks;
  }
  if (!r.ks) return false;
  return (r.decision == Decision::kMember) == (r.ks->p_value < cfg.alpha);
}

}  // namespace catshift::inference
