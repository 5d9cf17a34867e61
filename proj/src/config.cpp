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

#include "catshift/config.hpp"

#include <array>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "catshift/error.hpp"
#include "catshift/text.hpp"

namespace catshift::config {
namespace {

using nlohmann::json;

enum class Type { kReal, kCount, kSeed, kString };

struct Key {
  std::string_view name;
  Type type;
  std::string_view help;
};

constexpr std::array kKeys = {
    Key{"alpha", Type::kReal, "KS significance level (0.1)"},
    Key{"baseline_threshold", Type::kReal, "baseline shortcut p threshold (1e-3)"},
    Key{"metric", Type::kString, "exact | ngram_f1 | lcs_ratio | embedding (ngram_f1)"},
    Key{"ngram_n", Type::kCount, "n-gram order for ngram_f1 (2)"},
    Key{"scorer_endpoint", Type::kString, "remote similarity scorer URL for embedding"},
    Key{"mode", Type::kString, "paired | shared fine-tuning (paired)"},
    Key{"n_finetune", Type::kCount, "fine-tune split size (600)"},
    Key{"n_test", Type::kCount, "test split size (1000)"},
    Key{"seed", Type::kSeed, "split seed (0)"},
    Key{"max_new_tokens", Type::kCount, "completion length cap (32)"},
    Key{"parallelism", Type::kCount, "completions in flight (8)"},
    Key{"repeat_k", Type::kCount, "majority vote over k calls per prompt (1)"},
    Key{"test_mode", Type::kString, "auto | exact | asymptotic (auto)"},
    Key{"alternative", Type::kString, "two-sided | first-smaller (two-sided)"},
    Key{"lora_rank", Type::kCount, "advisory LoRA rank (8)"},
    Key{"lora_alpha", Type::kReal, "advisory LoRA alpha (32)"},
    Key{"dropout", Type::kReal, "advisory dropout (0.1)"},
    Key{"learning_rate", Type::kReal, "advisory learning rate (8e-5)"},
    Key{"batch_size", Type::kCount, "advisory batch size (8)"},
    Key{"checkpoint_every", Type::kCount, "checkpoint interval in steps (10)"},
    Key{"epochs", Type::kCount, "fine-tune epochs (1)"},
    Key{"poll_interval_s", Type::kReal, "fine-tune poll interval, seconds (10)"},
    Key{"job_timeout_s", Type::kReal, "fine-tune wait limit, seconds (43200)"},
    Key{"max_drop_fraction", Type::kReal, "tolerated failed completions (0.1)"},
    Key{"work_dir", Type::kString, "stage checkpoint directory for resume"},
    Key{"dataset_id", Type::kString, "label carried into the report"},
    Key{"format", Type::kString, "text-lines | jsonl-text | jsonl-pairs"},
    Key{"pair_mode", Type::kString, "prefix | instruction (prefix)"},
    Key{"split_ratio", Type::kReal, "prompt share of each text (0.5)"},
    Key{"min_prompt_tokens", Type::kCount, "drop texts with shorter prompts (1)"},
    Key{"min_completion_tokens", Type::kCount, "drop texts with shorter completions (1)"},
    Key{"instruction_template", Type::kString, "prefix for instruction mode"},
    Key{"validation_provenance", Type::kString, "owner's non-membership assertion"},
    Key{"endpoint", Type::kString, "sim:<config.json> or http(s) URL"},
    Key{"model_id", Type::kString, "remote base model id"},
    Key{"token_env", Type::kString, "environment variable holding the API token"},
    Key{"timeout_s", Type::kCount, "HTTP timeout, seconds (60)"},
};

const Key* find_key(std::string_view name) {
  for (const auto& k : kKeys) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

[[noreturn]] void bad(const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, what);
}

json typed_value(const Key& key, std::string_view raw) {
  const auto s = std::string(text::trim(raw));
  switch (key.type) {
    case Type::kString:
      return s;
    case Type::kReal: {
      try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      } catch (const std::exception&) {
        bad("config key '" + std::string(key.name) + "' expects a number, got '" + s + "'");
      }
    }
    case Type::kCount:
    case Type::kSeed: {
      std::uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        bad("config key '" + std::string(key.name) + "' expects a non-negative integer, got '" + s + "'");
      }
      return v;
    }
  }
  return nullptr;
}

double as_real(const json& v, std::string_view key) {
  if (!v.is_number()) bad("config key '" + std::string(key) + "' must be a number");
  return v.get<double>();
}

std::uint64_t as_count(const json& v, std::string_view key) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    bad("config key '" + std::string(key) + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string as_string(const json& v, std::string_view key) {
  if (!v.is_string()) bad("config key '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

std::chrono::milliseconds seconds(double s) {
  return std::chrono::milliseconds(static_cast<long long>(s * 1000.0));
}

}  // namespace

json to_json(const inference::AuditConfig& c) {
  return {
      {"alpha", c.alpha},
      {"baseline_threshold", c.baseline_threshold},
      {"metric", similarity::metric_name(c.scorer.metric)},
      {"ngram_n", c.scorer.ngram_n},
      {"mode", inference::finetune_mode_name(c.mode)},
      {"n_finetune", c.n_finetune},
      {"n_test", c.n_test},
      {"seed", c.seed},
      {"max_new_tokens", c.max_new_tokens},
      {"parallelism", c.parallelism},
      {"repeat_k", c.repeat_k},
      {"test_mode", stats::test_mode_name(c.test_mode)},
      {"alternative", stats::alternative_name(c.alternative)},
      {"lora_rank", c.hyperparams.lora_rank},
      {"lora_alpha", c.hyperparams.lora_alpha},
      {"dropout", c.hyperparams.dropout},
      {"learning_rate", c.hyperparams.learning_rate},
      {"batch_size", c.hyperparams.batch_size},
      {"checkpoint_every", c.hyperparams.checkpoint_every},
      {"epochs", c.hyperparams.epochs},
      {"poll_interval_s", static_cast<double>(c.poll_interval.count()) / 1000.0},
      {"job_timeout_s", static_cast<double>(c.job_timeout.count()) / 1000.0},
      {"max_drop_fraction", c.max_drop_fraction},
      {"work_dir", c.work_dir},
      {"dataset_id", c.dataset_id},
  };
}

json to_json(const RunSettings& s) {
  json out = to_json(s.audit);
  out["scorer_endpoint"] = s.scorer_endpoint;
  out["format"] = corpus::format_name(s.format);
  out["pair_mode"] = corpus::pair_mode_name(s.pairs.mode);
  out["split_ratio"] = s.pairs.split_ratio;
  out["min_prompt_tokens"] = s.pairs.min_prompt_tokens;
  out["min_completion_tokens"] = s.pairs.min_completion_tokens;
  out["instruction_template"] = s.pairs.instruction_template;
  out["validation_provenance"] = s.validation_provenance;
  out["endpoint"] = s.connect.endpoint;
  out["model_id"] = s.connect.model_id;
  out["token_env"] = s.connect.token_env;
  out["timeout_s"] = s.connect.timeout_seconds;
  return out;
}

RunSettings from_json(const json& flat) {
  if (!flat.is_object()) bad("configuration must be a JSON object");
  RunSettings s;
  auto& a = s.audit;
  auto& hp = a.hyperparams;
  for (const auto& [key, v] : flat.items()) {
    if (!find_key(key)) bad("unknown config key '" + key + "'");
    if (key == "alpha") a.alpha = as_real(v, key);
    else if (key == "baseline_threshold") a.baseline_threshold = as_real(v, key);
    else if (key == "metric") a.scorer.metric = similarity::parse_metric(as_string(v, key));
    else if (key == "ngram_n") a.scorer.ngram_n = as_count(v, key);
    else if (key == "scorer_endpoint") s.scorer_endpoint = as_string(v, key);
    else if (key == "mode") a.mode = inference::parse_finetune_mode(as_string(v, key));
    else if (key == "n_finetune") a.n_finetune = as_count(v, key);
    else if (key == "n_test") a.n_test = as_count(v, key);
    else if (key == "seed") a.seed = as_count(v, key);
    else if (key == "max_new_tokens") a.max_new_tokens = as_count(v, key);
    else if (key == "parallelism") a.parallelism = as_count(v, key);
    else if (key == "repeat_k") a.repeat_k = as_count(v, key);
    else if (key == "test_mode") a.test_mode = stats::parse_test_mode(as_string(v, key));
    else if (key == "alternative") a.alternative = stats::parse_alternative(as_string(v, key));
    else if (key == "lora_rank") hp.lora_rank = as_count(v, key);
    else if (key == "lora_alpha") hp.lora_alpha = as_real(v, key);
    else if (key == "dropout") hp.dropout = as_real(v, key);
    else if (key == "learning_rate") hp.learning_rate = as_real(v, key);
    else if (key == "batch_size") hp.batch_size = as_count(v, key);
    else if (key == "checkpoint_every") hp.checkpoint_every = as_count(v, key);
    else if (key == "epochs") hp.epochs = as_count(v, key);
    else if (key == "poll_interval_s") a.poll_interval = seconds(as_real(v, key));
    else if (key == "job_timeout_s") a.job_timeout = seconds(as_real(v, key));
    else if (key == "max_drop_fraction") a.max_drop_fraction = as_real(v, key);
    else if (key == "work_dir") a.work_dir = as_string(v, key);
    else if (key == "dataset_id") a.dataset_id = as_string(v, key);
    else if (key == "format") s.format = corpus::parse_format(as_string(v, key));
    else if (key == "pair_mode") s.pairs.mode = corpus::parse_pair_mode(as_string(v, key));
    else if (key == "split_ratio") s.pairs.split_ratio = as_real(v, key);
    else if (key == "min_prompt_tokens") s.pairs.min_prompt_tokens = as_count(v, key);
    else if (key == "min_completion_tokens") s.pairs.min_completion_tokens = as_count(v, key);
    else if (key == "instruction_template") s.pairs.instruction_template = as_string(v, key);
    else if (key == "validation_provenance") s.validation_provenance = as_string(v, key);
    else if (key == "endpoint") s.connect.endpoint = as_string(v, key);
    else if (key == "model_id") s.connect.model_id = as_string(v, key);
    else if (key == "token_env") s.connect.token_env = as_string(v, key);
    else if (key == "timeout_s") s.connect.timeout_seconds = static_cast<int>(as_count(v, key));
  }
  if (!s.scorer_endpoint.empty()) {
    a.scorer.remote = similarity::RemoteScorerOptions{s.scorer_endpoint, {}, s.connect.timeout_seconds};
    if (const char* token = std::getenv(s.connect.token_env.c_str())) {
      a.scorer.remote->bearer_token = token;
    }
  }
  s.connect.sim_pair_options = s.pairs;
  a.validate();
  hp.validate();
  return s;
}

json parse_key_value(std::string_view text_in) {
  json out = json::object();
  std::istringstream in{std::string(text_in)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    auto body = text::trim(raw);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kParse, "config line " + std::to_string(line) + ": expected key = value");
    }
    const auto key = std::string(text::trim(body.substr(0, eq)));
    const Key* k = find_key(key);
    if (!k) {
      throw Error(ErrorCode::kParse, "config line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
    try {
      out[key] = typed_value(*k, body.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, "config line " + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

json load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_key_value(buf.str());
}

void apply_override(json& flat, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) bad("override must look like key=value");
  const auto key = std::string(text::trim(assignment.substr(0, eq)));
  const Key* k = find_key(key);
  if (!k) bad("unknown config key '" + key + "'");
  flat[key] = typed_value(*k, assignment.substr(eq + 1));
}

std::string describe_keys() {
  std::string out;
  for (const auto& k : kKeys) {
    out += "  ";
    out += k.name;
    out += std::string(k.name.size() < 24 ? 24 - k.name.size() : 1, ' ');
    out += k.help;
    out += '\n';
  }
  return out;
}

}  // namespace catshift::config
