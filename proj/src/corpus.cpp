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

#include "catshift/corpus.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <span>
#include <unordered_map>
#include <unordered_set>

#include "catshift/error.hpp"
#include "catshift/hashing.hpp"
#include "catshift/text.hpp"
#include "json.hpp"

namespace catshift::corpus {
namespace {

using nlohmann::json;

constexpr std::string_view kSplitFormat = "catshift-split";
constexpr int kSplitVersion = 1;

[[noreturn]] void parse_error(const std::filesystem::path& path,
                              std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kParse, path.filename().string() + ":" +
                                     std::to_string(line) + ": " + what);
}

std::string default_id(const std::filesystem::path& path, std::size_t line) {
  return path.filename().string() + "#" + std::to_string(line);
}

std::string string_field(const json& obj, const char* key,
                         const std::filesystem::path& path, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) parse_error(path, line, std::string("missing field '") + key + "'");
  if (!it->is_string()) parse_error(path, line, std::string("field '") + key + "' is not a string");
  return it->get<std::string>();
}

std::string id_field(const json& obj, const std::filesystem::path& path,
                     std::size_t line) {
  auto it = obj.find("id");
  if (it == obj.end() || it->is_null()) return default_id(path, line);
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  parse_error(path, line, "field 'id' must be a string or integer");
}

}  // namespace

Format parse_format(std::string_view name) {
  if (name == "text-lines") return Format::kTextLines;
  if (name == "jsonl-text") return Format::kJsonlText;
  if (name == "jsonl-pairs") return Format::kJsonlPairs;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown corpus format '" + std::string(name) + "'");
}

std::string_view format_name(Format format) {
  switch (format) {
    case Format::kTextLines: return "text-lines";
    case Format::kJsonlText: return "jsonl-text";
    case Format::kJsonlPairs: return "jsonl-pairs";
  }
  return "?";
}

PairMode parse_pair_mode(std::string_view name) {
  if (name == "instruction") return PairMode::kInstruction;
  if (name == "prefix") return PairMode::kPrefix;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown pair mode '" + std::string(name) + "'");
}

std::string_view pair_mode_name(PairMode mode) {
  return mode == PairMode::kInstruction ? "instruction" : "prefix";
}

LoadedCorpus load_corpus(const std::filesystem::path& path, Format format) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());

  std::vector<TextRecord> texts;
  std::vector<PairRecord> pairs;
  std::unordered_set<std::string> seen;
  auto claim = [&](const std::string& id, std::size_t line) {
    if (!seen.insert(id).second) parse_error(path, line, "duplicate id '" + id + "'");
  };

  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (text::trim(raw).empty()) continue;

    if (format == Format::kTextLines) {
      auto id = default_id(path, line);
      claim(id, line);
      texts.push_back({std::move(id), raw});
      continue;
    }

    json obj;
    try {
      obj = json::parse(raw);
    } catch (const json::parse_error& e) {
      parse_error(path, line, std::string("invalid json: ") + e.what());
    }
    if (!obj.is_object()) parse_error(path, line, "expected a json object");

    auto id = id_field(obj, path, line);
    claim(id, line);
    if (format == Format::kJsonlText) {
      auto body = string_field(obj, "text", path, line);
      if (text::trim(body).empty()) parse_error(path, line, "empty text");
      texts.push_back({std::move(id), std::move(body)});
    } else {
      PairRecord rec;
      rec.id = std::move(id);
      rec.prompt = string_field(obj, "prompt", path, line);
      rec.completion = string_field(obj, "completion", path, line);
      if (auto m = obj.find("mode"); m != obj.end() && m->is_string()) {
        rec.mode = parse_pair_mode(m->get<std::string>());
      }
      if (text::trim(rec.prompt).empty() || text::trim(rec.completion).empty()) {
        parse_error(path, line, "prompt and completion must be non-empty");
      }
      pairs.push_back(std::move(rec));
    }
  }

  if (texts.empty() && pairs.empty()) {
    throw Error(ErrorCode::kInsufficientData,
                "empty corpus: " + path.string());
  }
  if (format == Format::kJsonlPairs) return pairs;
  return texts;
}

PairResult make_pairs(const std::vector<TextRecord>& records,
                      const PairOptions& options) {
  if (!(options.split_ratio > 0.0 && options.split_ratio < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "split_ratio must lie in (0,1)");
  }
  PairResult result;
  result.pairs.reserve(records.size());
  for (const auto& rec : records) {
    const auto tokens = text::tokenize(rec.text);
    const std::size_t n = tokens.size();
    const auto n_completion = static_cast<std::size_t>(
        std::floor((1.0 - options.split_ratio) * static_cast<double>(n) + 1e-9));
    const std::size_t cut = n - n_completion;
    if (cut < std::max<std::size_t>(1, options.min_prompt_tokens) ||
        n_completion < std::max<std::size_t>(1, options.min_completion_tokens)) {
      ++result.dropped;
      continue;
    }
    const std::span<const std::string> all(tokens);
    PairRecord pair;
    pair.id = rec.id;
    pair.mode = options.mode;
    pair.prompt = text::join(all.first(cut));
    if (options.mode == PairMode::kInstruction) {
      pair.prompt = options.instruction_template + pair.prompt;
    }
    pair.completion = text::join(all.subspan(cut));
    result.pairs.push_back(std::move(pair));
  }
  if (result.pairs.empty()) {
    throw Error(ErrorCode::kInsufficientData, "corpus too short");
  }
  return result;
}

PairResult to_pairs(const LoadedCorpus& corpus, const PairOptions& options) {
  if (const auto* texts = std::get_if<std::vector<TextRecord>>(&corpus)) {
    return make_pairs(*texts, options);
  }
  return {std::get<std::vector<PairRecord>>(corpus), 0};
}

SplitPlan split_dataset(const std::vector<PairRecord>& pairs,
                        std::size_t n_finetune, std::size_t n_test,
                        std::uint64_t seed) {
  if (n_finetune + n_test > pairs.size()) {
    throw Error(ErrorCode::kInsufficientData,
                "split needs " + std::to_string(n_finetune + n_test) +
                    " pairs (" + std::to_string(n_finetune) + " fine-tune + " +
                    std::to_string(n_test) + " test) but only " +
                    std::to_string(pairs.size()) + " are available");
  }
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  portable_shuffle(order, rng);

  // 0 = unused, 1 = fine-tune, 2 = test; emitted in corpus order.
  std::vector<unsigned char> role(pairs.size(), 0);
  for (std::size_t i = 0; i < n_finetune; ++i) role[order[i]] = 1;
  for (std::size_t i = n_finetune; i < n_finetune + n_test; ++i) role[order[i]] = 2;

  SplitPlan plan;
  plan.seed = seed;
  plan.n_finetune = n_finetune;
  plan.n_test = n_test;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (role[i] == 1) plan.finetune_ids.push_back(pairs[i].id);
    if (role[i] == 2) plan.test_ids.push_back(pairs[i].id);
  }
  return plan;
}

std::vector<PairRecord> select(const std::vector<PairRecord>& pairs,
                               const std::vector<std::string>& ids) {
  std::unordered_map<std::string_view, const PairRecord*> by_id;
  by_id.reserve(pairs.size());
  for (const auto& p : pairs) by_id.emplace(p.id, &p);
  std::vector<PairRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kNotFound, "unknown pair id '" + id + "'");
    }
    out.push_back(*it->second);
  }
  return out;
}

CorpusBundle make_bundle(std::vector<PairRecord> suspicious,
                         std::vector<PairRecord> validation,
                         std::string validation_provenance,
                         std::size_t n_finetune, std::size_t n_test,
                         std::size_t validation_finetune, std::uint64_t seed) {
  if (text::trim(validation_provenance).empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "validation corpus requires a non-membership provenance note");
  }
  CorpusBundle bundle;
  bundle.suspicious_split = split_dataset(suspicious, n_finetune, n_test, seed);
  bundle.validation_split = split_dataset(
      validation, validation_finetune, n_test, hash_combine(seed, 0x76616c6964ULL));
  bundle.suspicious = std::move(suspicious);
  bundle.validation = std::move(validation);
  bundle.validation_provenance = std::move(validation_provenance);
  return bundle;
}

void write_split_plan(const std::filesystem::path& path, const SplitPlan& plan,
                      std::string_view dataset_tag) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  json header = {{"format", kSplitFormat},
                 {"version", kSplitVersion},
                 {"dataset", dataset_tag},
                 {"seed", plan.seed},
                 {"n_finetune", plan.n_finetune},
                 {"n_test", plan.n_test}};
  out << header.dump() << '\n';
  for (const auto& id : plan.finetune_ids) {
    out << json{{"id", id}, {"role", "finetune"}}.dump() << '\n';
  }
  for (const auto& id : plan.test_ids) {
    out << json{{"id", id}, {"role", "test"}}.dump() << '\n';
  }
}

SplitPlan read_split_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string raw;
  std::size_t line = 0;
  SplitPlan plan;
  bool have_header = false;
  while (std::getline(in, raw)) {
    ++line;
    if (text::trim(raw).empty()) continue;
    json obj;
    try {
      obj = json::parse(raw);
    } catch (const json::parse_error& e) {
      parse_error(path, line, std::string("invalid json: ") + e.what());
    }
    if (!have_header) {
      if (obj.value("format", "") != kSplitFormat) parse_error(path, line, "not a split plan");
      if (obj.value("version", 0) != kSplitVersion) parse_error(path, line, "unsupported split plan version");
      plan.seed = obj.at("seed").get<std::uint64_t>();
      plan.n_finetune = obj.at("n_finetune").get<std::size_t>();
      plan.n_test = obj.at("n_test").get<std::size_t>();
      have_header = true;
      continue;
    }
    const auto role = obj.value("role", "");
    auto id = obj.value("id", "");
    if (role == "finetune") {
      plan.finetune_ids.push_back(std::move(id));
    } else if (role == "test") {
      plan.test_ids.push_back(std::move(id));
    } else {
      parse_error(path, line, "unknown role '" + role + "'");
    }
  }
  if (!have_header) throw Error(ErrorCode::kParse, "empty split plan: " + path.string());
  if (plan.finetune_ids.size() != plan.n_finetune || plan.test_ids.size() != plan.n_test) {
    throw Error(ErrorCode::kParse, "split plan counts do not match header: " + path.string());
  }
  return plan;
}

void write_pairs_jsonl(const std::filesystem::path& path,
                       const std::vector<PairRecord>& pairs) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& p : pairs) {
    json obj = {{"id", p.id},
                {"prompt", p.prompt},
                {"completion", p.completion},
                {"mode", pair_mode_name(p.mode)}};
    out << obj.dump() << '\n';
  }
}

}  // namespace catshift::corpus
