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

#include "catshift/catshift.h"

#include <cstring>
#include <memory>
#include <string>

#include "catshift/config.hpp"
#include "catshift/corpus.hpp"
#include "catshift/error.hpp"
#include "catshift/evaluation.hpp"
#include "catshift/hashing.hpp"
#include "catshift/inference.hpp"
#include "catshift/model.hpp"
#include "catshift/report_io.hpp"
#include "catshift/similarity.hpp"
#include "catshift/simulate.hpp"
#include "catshift/stats.hpp"

using nlohmann::json;

struct cs_settings {
  json flat = json::object();
};

struct cs_pairs {
  std::vector<catshift::corpus::PairRecord> pairs;
  std::size_t dropped = 0;
};

struct cs_model {
  std::unique_ptr<catshift::model::ModelClient> client;
};

struct cs_report {
  catshift::inference::AuditReport report;
};

namespace {

thread_local std::string g_last_error;

cs_status set_error(cs_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs `fn` and maps any exception to a status code plus message.
template <typename Fn>
cs_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return CS_OK;
  } catch (const catshift::Error& e) {
    return set_error(static_cast<cs_status>(e.code()), e.what());
  } catch (const json::exception& e) {
    return set_error(CS_ERR_PARSE, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(CS_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(CS_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(CS_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw catshift::Error(catshift::ErrorCode::kInvalidArgument, what);
}

catshift::stats::TestMode mode_or_auto(const char* mode) {
  return mode ? catshift::stats::parse_test_mode(mode) : catshift::stats::TestMode::kAuto;
}

catshift::corpus::CorpusBundle bundle_for(const cs_pairs* suspicious, const cs_pairs* validation,
                                          const catshift::config::RunSettings& s) {
  return catshift::inference::build_bundle(suspicious->pairs, validation->pairs,
                                           s.validation_provenance, s.audit);
}

}  // namespace

extern "C" {

const char* cs_version(void) { return CATSHIFT_VERSION; }

const char* cs_last_error(void) { return g_last_error.c_str(); }

void cs_string_free(char* s) { std::free(s); }

cs_status cs_settings_new(cs_settings** out) {
  return guarded([&] {
    require(out, "out is null");
    *out = new cs_settings();
  });
}

void cs_settings_free(cs_settings* settings) { delete settings; }

cs_status cs_settings_load(cs_settings* settings, const char* path) {
  return guarded([&] {
    require(settings && path, "settings and path are required");
    const auto loaded = catshift::config::load_file(path);
    for (const auto& [k, v] : loaded.items()) settings->flat[k] = v;
  });
}

cs_status cs_settings_set(cs_settings* settings, const char* assignment) {
  return guarded([&] {
    require(settings && assignment, "settings and assignment are required");
    catshift::config::apply_override(settings->flat, assignment);
  });
}

cs_status cs_settings_to_json(const cs_settings* settings, char** json_out) {
  return guarded([&] {
    require(settings && json_out, "settings and json_out are required");
    const auto s = catshift::config::from_json(settings->flat);
    *json_out = dup_string(catshift::config::to_json(s).dump(2));
  });
}

cs_status cs_settings_explicit_json(const cs_settings* settings, char** json_out) {
  return guarded([&] {
    require(settings && json_out, "settings and json_out are required");
    *json_out = dup_string(settings->flat.dump());
  });
}

cs_status cs_settings_describe(char** text_out) {
  return guarded([&] {
    require(text_out, "text_out is null");
    *text_out = dup_string(catshift::config::describe_keys());
  });
}

cs_status cs_pairs_load(const cs_settings* settings, const char* path, cs_pairs** out) {
  return guarded([&] {
    require(settings && path && out, "settings, path and out are required");
    const auto s = catshift::config::from_json(settings->flat);
    auto result = catshift::corpus::to_pairs(catshift::corpus::load_corpus(path, s.format), s.pairs);
    *out = new cs_pairs{std::move(result.pairs), result.dropped};
  });
}

void cs_pairs_free(cs_pairs* pairs) { delete pairs; }

size_t cs_pairs_size(const cs_pairs* pairs) { return pairs ? pairs->pairs.size() : 0; }

size_t cs_pairs_dropped(const cs_pairs* pairs) { return pairs ? pairs->dropped : 0; }

cs_status cs_pairs_write_jsonl(const cs_pairs* pairs, const char* path) {
  return guarded([&] {
    require(pairs && path, "pairs and path are required");
    catshift::corpus::write_pairs_jsonl(path, pairs->pairs);
  });
}

cs_status cs_model_open(const cs_settings* settings, cs_model** out) {
  return guarded([&] {
    require(settings && out, "settings and out are required");
    const auto s = catshift::config::from_json(settings->flat);
    require(!s.connect.endpoint.empty(), "no endpoint configured");
    *out = new cs_model{catshift::model::connect(s.connect)};
  });
}

void cs_model_free(cs_model* model) { delete model; }

cs_status cs_model_complete(cs_model* model, const char* prompt, size_t max_new_tokens,
                            char** text_out) {
  return guarded([&] {
    require(model && prompt && text_out, "model, prompt and text_out are required");
    *text_out = dup_string(
        model->client->complete(model->client->base_model(), prompt, max_new_tokens));
  });
}

cs_status cs_audit_run(cs_model* model, const cs_pairs* suspicious, const cs_pairs* validation,
                       const cs_settings* settings, cs_report** out) {
  return guarded([&] {
    require(model && suspicious && validation && settings && out,
            "model, corpora, settings and out are required");
    const auto s = catshift::config::from_json(settings->flat);
    const auto bundle = bundle_for(suspicious, validation, s);
    *out = new cs_report{catshift::inference::dual_test(*model->client, bundle, s.audit)};
  });
}

cs_status cs_baseline_run(cs_model* model, const cs_pairs* suspicious, const cs_pairs* validation,
                          const cs_settings* settings, char** json_out) {
  return guarded([&] {
    require(model && suspicious && validation && settings && json_out,
            "model, corpora, settings and json_out are required");
    const auto s = catshift::config::from_json(settings->flat);
    const auto bundle = bundle_for(suspicious, validation, s);
    const auto b = catshift::inference::run_baseline(
        *model->client, model->client->base_model(),
        catshift::corpus::select(bundle.suspicious, bundle.suspicious_split.test_ids),
        catshift::corpus::select(bundle.validation, bundle.validation_split.test_ids), s.audit);
    const bool fires = b.p_value < s.audit.baseline_threshold && b.direction_member;
    const json doc = {{"format", "catshift-baseline"},
                      {"version", 1},
                      {"dataset_id", s.audit.dataset_id},
                      {"p_value", b.p_value},
                      {"ks", catshift::io::to_json(b.ks)},
                      {"mean_score", b.mean_score},
                      {"validation_mean_score", b.validation_mean_score},
                      {"direction_member", b.direction_member},
                      {"baseline_threshold", s.audit.baseline_threshold},
                      {"shortcut_fires", fires},
                      {"suspicious_scores", b.per_sample.scores},
                      {"validation_scores", b.validation_per_sample.scores}};
    *json_out = dup_string(doc.dump(2));
  });
}

void cs_report_free(cs_report* report) { delete report; }

cs_decision cs_report_decision(const cs_report* report) {
  return report && report->report.decision == catshift::inference::Decision::kMember
             ? CS_MEMBER
             : CS_NON_MEMBER;
}

double cs_report_p_value(const cs_report* report) {
  return report ? report->report.deciding_p_value() : 1.0;
}

cs_status cs_report_set_ground_truth(cs_report* report, const char* label) {
  return guarded([&] {
    require(report && label, "report and label are required");
    const auto parsed = catshift::evaluation::parse_label(label);
    report->report.meta.ground_truth = std::string(catshift::evaluation::label_name(parsed));
  });
}

cs_status cs_report_to_json(const cs_report* report, char** json_out) {
  return guarded([&] {
    require(report && json_out, "report and json_out are required");
    *json_out = dup_string(catshift::io::to_json(report->report).dump(2));
  });
}

cs_status cs_report_text(const cs_report* report, char** text_out) {
  return guarded([&] {
    require(report && text_out, "report and text_out are required");
    *text_out = dup_string(catshift::io::report_text(report->report));
  });
}

cs_status cs_report_write(const cs_report* report, const char* dir, char** paths_json_out) {
  return guarded([&] {
    require(report && dir, "report and dir are required");
    const auto paths = catshift::io::write_report(report->report, dir);
    if (paths_json_out) {
      json arr = json::array();
      for (const auto& p : paths) arr.push_back(p.string());
      *paths_json_out = dup_string(arr.dump());
    }
  });
}

cs_status cs_evaluate_dir(const char* dir, double threshold, const char* labels_csv,
                          const char* out_json, char** summary_json_out) {
  return guarded([&] {
    require(dir, "dir is required");
    std::map<std::string, catshift::evaluation::Label> labels;
    if (labels_csv && *labels_csv) labels = catshift::evaluation::read_labels_csv(labels_csv);
    const auto e = catshift::evaluation::evaluate_reports(dir, threshold, labels);
    if (out_json && *out_json) catshift::evaluation::write_evaluation(e, out_json);
    if (summary_json_out) *summary_json_out = dup_string(catshift::evaluation::to_json(e).dump(2));
  });
}

cs_status cs_simulate(const char* scenario_json, const char* out_dir, char** summary_json_out) {
  return guarded([&] {
    require(scenario_json, "scenario_json is required");
    const auto scenario = catshift::simulate::scenario_from_json(json::parse(scenario_json));
    const auto result = catshift::simulate::run(
        scenario, out_dir ? std::filesystem::path(out_dir) : std::filesystem::path());
    if (summary_json_out) {
      *summary_json_out = dup_string(catshift::simulate::to_json(result).dump(2));
    }
  });
}

cs_status cs_ks_two_sample(const double* first, size_t n_first, const double* second,
                           size_t n_second, const char* mode, const char* alternative,
                           double* d_out, double* p_out) {
  return guarded([&] {
    require(first && second, "samples are required");
    const auto alt = alternative ? catshift::stats::parse_alternative(alternative)
                                 : catshift::stats::Alternative::kTwoSided;
    const auto r = catshift::stats::ks_two_sample({first, n_first}, {second, n_second},
                                                  mode_or_auto(mode), alt);
    if (d_out) *d_out = r.d_statistic;
    if (p_out) *p_out = r.p_value;
  });
}

cs_status cs_mwu_two_sample(const double* first, size_t n_first, const double* second,
                            size_t n_second, const char* mode, double* u_out, double* p_out) {
  return guarded([&] {
    require(first && second, "samples are required");
    const auto r = catshift::stats::mwu_two_sample({first, n_first}, {second, n_second},
                                                   mode_or_auto(mode));
    if (u_out) *u_out = r.u_statistic;
    if (p_out) *p_out = r.p_value;
  });
}

cs_status cs_similarity(const char* a, const char* b, const char* metric, size_t ngram_n,
                        double* value_out) {
  return guarded([&] {
    require(a && b && value_out, "a, b and value_out are required");
    catshift::similarity::Scorer scorer;
    if (metric) scorer.metric = catshift::similarity::parse_metric(metric);
    require(scorer.metric != catshift::similarity::Metric::kEmbedding,
            "the embedding metric needs a configured scorer endpoint");
    if (ngram_n) scorer.ngram_n = ngram_n;
    *value_out = scorer(a, b).value;
  });
}

cs_status cs_sha256_file(const char* path, char** hex_out) {
  return guarded([&] {
    require(path && hex_out, "path and hex_out are required");
    *hex_out = dup_string(catshift::sha256_file(path));
  });
}

}  // extern "C"
