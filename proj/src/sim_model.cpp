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

#include "catshift/sim_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "catshift/error.hpp"
#include "catshift/hashing.hpp"
#include "catshift/text.hpp"
#include "json.hpp"

namespace catshift::model {
namespace {

// Stream tags keep the keep/noise/drift hash families disjoint.
constexpr std::uint64_t kKeepStream = 0x6b656570ULL;
constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;
constexpr std::uint64_t kDriftStream = 0x6472696674ULL;

constexpr char kBaseId[] = "sim-base";

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::string noise_token(std::uint64_t h) {
  const std::size_t len = 3 + static_cast<std::size_t>(h % 4);
  h = mix64(h);
  std::string tok;
  tok.reserve(len);
  for (std::size_t i = 0; i < len; ++i) {
    tok += static_cast<char>('a' + h % 26);
    h /= 26;
  }
  return tok;
}

// Evenly spaced positions covering a `drift` share of the sequence. The
// pattern depends on nothing but drift, so every prompt drifts alike.
bool drifted(std::size_t t, double drift) {
  if (drift <= 0.0) return false;
  return std::floor(static_cast<double>(t + 1) * drift) >
         std::floor(static_cast<double>(t) * drift);
}

const std::vector<std::string>& word_list() {
  static const std::vector<std::string> words = [] {
    static constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n",
                                              "p", "r", "s", "t", "v", "z", "ch", "st"};
    static constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};
    std::vector<std::string> out;
    for (const char* o1 : kOnsets) {
      for (const char* v1 : kVowels) {
        for (const char* o2 : kOnsets) {
          out.push_back(std::string(o1) + v1 + o2);
        }
      }
    }
    return out;  // 16 * 8 * 16 = 2048 words
  }();
  return words;
}

void validate_state(const SimModelState& s) {
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, std::string(name) + " must lie in [0,1]");
    }
  };
  unit(s.gain_recover, "gain_recover");
  unit(s.gain_new, "gain_new");
  unit(s.recall_threshold, "recall_threshold");
  unit(s.drift, "drift");
}

}  // namespace

std::string memory_key(std::string_view prompt) {
  return to_hex(fnv1a64(text::normalize(prompt)));
}

SimModelState seed_memory(SimModelState state,
                          std::span<const corpus::PairRecord> pairs,
                          double strength, std::string_view cluster) {
  for (const auto& p : pairs) {
    state.memory[memory_key(p.prompt)] =
        MemoryEntry{text::normalize(p.prompt), text::normalize(p.completion),
                    clamp01(strength), std::string(cluster)};
  }
  return state;
}

SimModelState sim_finetune(const SimModelState& state,
                           std::span<const corpus::PairRecord> pairs,
                           double progress) {
  if (!(progress > 0.0 && progress <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "progress must lie in (0,1]");
  }
  SimModelState out = state;
  if (pairs.empty()) return out;

  const double recover = state.gain_recover * progress;
  const double learn = state.gain_new * progress;
  const auto batch = static_cast<double>(pairs.size());

  std::set<std::string> direct;
  std::map<std::string, std::size_t> recognized_by_cluster;
  std::vector<const corpus::PairRecord*> novel;
  std::uint64_t batch_hash = fnv1a64("batch");
  for (const auto& p : pairs) {
    auto key = memory_key(p.prompt);
    batch_hash = hash_combine(batch_hash, fnv1a64(key));
    if (auto it = state.memory.find(key); it != state.memory.end()) {
      ++recognized_by_cluster[it->second.cluster];
      direct.insert(std::move(key));
    } else {
      novel.push_back(&p);
    }
  }

  for (const auto& key : direct) {
    auto& e = out.memory.at(key);
    e.recall_strength = clamp01(e.recall_strength + recover);
  }
  // Reviving part of a dataset revives the rest of it in proportion to the
  // batch share it occupied.
  for (auto& [key, e] : out.memory) {
    if (direct.contains(key)) continue;
    auto it = recognized_by_cluster.find(e.cluster);
    if (it == recognized_by_cluster.end()) continue;
    e.recall_strength =
        clamp01(e.recall_strength + recover * static_cast<double>(it->second) / batch);
  }

  const std::string novel_cluster = "finetune:" + to_hex(batch_hash);
  for (const auto* p : novel) {
    out.memory.try_emplace(memory_key(p->prompt),
                           MemoryEntry{text::normalize(p->prompt),
                                       text::normalize(p->completion),
                                       clamp01(learn), novel_cluster});
  }
  out.drift = clamp01(state.drift + learn * static_cast<double>(novel.size()) / batch);
  return out;
}

std::string sim_complete(const SimModelState& state, std::string_view prompt,
                         std::size_t max_new_tokens) {
  const auto normalized = text::normalize(prompt);
  if (normalized.empty()) throw Error(ErrorCode::kInvalidArgument, "empty prompt");

  const std::uint64_t base = hash_combine(state.noise_seed, fnv1a64(normalized));
  const MemoryEntry* match = nullptr;
  if (auto it = state.memory.find(memory_key(normalized)); it != state.memory.end()) {
    if (it->second.recall_strength > 0.0 &&
        it->second.recall_strength >= state.recall_threshold) {
      match = &it->second;
    }
  }

  std::vector<std::string> stored;
  std::size_t length = max_new_tokens;
  if (match) {
    stored = text::tokenize(match->stored_completion);
    length = std::min(length, stored.size());
  }

  std::vector<std::string> out;
  out.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    if (match && unit_interval(hash_combine(base ^ kKeepStream, t)) <
                     match->recall_strength) {
      out.push_back(stored[t]);
      continue;
    }
    const std::uint64_t stream = drifted(t, state.drift) ? kDriftStream : kNoiseStream;
    out.push_back(noise_token(hash_combine(base ^ stream, t)));
  }
  return text::join(out);
}

double sim_loss(const SimModelState& state,
                std::span<const corpus::PairRecord> pairs) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : pairs) {
    auto it = state.memory.find(memory_key(p.prompt));
    total += 1.0 - (it == state.memory.end() ? 0.0 : it->second.recall_strength);
  }
  return total / static_cast<double>(pairs.size());
}

std::vector<corpus::TextRecord> synthetic_texts(std::size_t count,
                                                std::size_t min_tokens,
                                                std::size_t max_tokens,
                                                std::uint64_t seed,
                                                std::string_view id_prefix) {
  if (min_tokens == 0 || max_tokens < min_tokens) {
    throw Error(ErrorCode::kInvalidArgument, "invalid synthetic length range");
  }
  const auto& words = word_list();
  std::mt19937_64 rng(seed);
  std::vector<corpus::TextRecord> docs;
  docs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t len = min_tokens + bounded_draw(rng, max_tokens - min_tokens + 1);
    std::vector<std::string> toks;
    toks.reserve(len);
    for (std::size_t k = 0; k < len; ++k) toks.push_back(words[bounded_draw(rng, words.size())]);
    docs.push_back({std::string(id_prefix) + "#" + std::to_string(i + 1), text::join(toks)});
  }
  return docs;
}

SimModelState load_sim_config(const std::filesystem::path& path,
                              const corpus::PairOptions& pair_options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open simulator config " + path.string());
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  SimModelState state;
  try {
    state.gain_recover = cfg.value("gain_recover", state.gain_recover);
    state.gain_new = cfg.value("gain_new", state.gain_new);
    state.recall_threshold = cfg.value("recall_threshold", state.recall_threshold);
    state.noise_seed = cfg.value("noise_seed", state.noise_seed);
    validate_state(state);
    for (const auto& m : cfg.value("members", nlohmann::json::array())) {
      std::filesystem::path member = m.at("path").get<std::string>();
      if (member.is_relative()) member = path.parent_path() / member;
      const auto format = corpus::parse_format(m.value("format", "text-lines"));
      const auto pairs =
          corpus::to_pairs(corpus::load_corpus(member, format), pair_options).pairs;
      state = seed_memory(std::move(state), pairs, m.value("strength", 1.0),
                          m.value("cluster", member.filename().string()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return state;
}

SimModelClient::SimModelClient(SimModelState base, std::string endpoint)
    : endpoint_(std::move(endpoint)) {
  validate_state(base);
  models_.emplace(kBaseId, std::make_shared<const SimModelState>(std::move(base)));
}

ModelRef SimModelClient::base_model() const { return {endpoint_, kBaseId}; }

bool SimModelClient::has_model(const ModelRef& model) const {
  std::lock_guard lock(mu_);
  return models_.contains(model.model_id);
}

std::shared_ptr<const SimModelState> SimModelClient::state(const ModelRef& model) const {
  std::lock_guard lock(mu_);
  auto it = models_.find(model.model_id);
  if (it == models_.end()) {
    throw Error(ErrorCode::kNotFound, "unknown simulator model '" + model.model_id + "'");
  }
  return it->second;
}

std::size_t SimModelClient::jobs_started() const {
  std::lock_guard lock(mu_);
  return jobs_started_;
}

std::string SimModelClient::do_complete(const ModelRef& model, std::string_view prompt,
                                        std::size_t max_new_tokens) {
  return sim_complete(*state(model), prompt, max_new_tokens);
}

FineTuneJob SimModelClient::do_start_finetune(const ModelRef& base,
                                              const FineTuneSpec& spec) {
  const auto base_state = state(base);
  const auto& hp = spec.hyperparams;

  std::uint64_t h = fnv1a64(base.model_id);
  for (const auto& p : spec.pairs) {
    h = hash_combine(h, fnv1a64(p.prompt));
    h = hash_combine(h, fnv1a64(p.completion));
  }
  h = hash_combine(h, hp.batch_size * 1000003ULL + hp.epochs * 101ULL + hp.checkpoint_every);
  const std::string job_id = "simjob-" + to_hex(h);

  const std::size_t steps_per_epoch = (spec.pairs.size() + hp.batch_size - 1) / hp.batch_size;
  const std::size_t total = steps_per_epoch * hp.epochs;
  std::vector<std::size_t> steps;
  for (std::size_t s = hp.checkpoint_every; s <= total; s += hp.checkpoint_every) steps.push_back(s);
  if (steps.empty() || steps.back() != total) steps.push_back(total);

  FineTuneJob final_view;
  final_view.job_id = job_id;
  final_view.base = base;
  final_view.status = JobStatus::kSucceeded;
  std::vector<std::pair<std::string, std::shared_ptr<const SimModelState>>> minted;
  for (std::size_t s : steps) {
    const double progress = static_cast<double>(s) / static_cast<double>(total);
    auto next = std::make_shared<const SimModelState>(
        sim_finetune(*base_state, spec.pairs, progress));
    const std::string id = job_id + "@" + std::to_string(s);
    final_view.checkpoints.push_back({s, sim_loss(*next, spec.pairs), id});
    minted.emplace_back(id, next);
    if (s == total) minted.emplace_back(job_id, next);
  }
  final_view.result_model = ModelRef{base.endpoint, job_id};

  std::lock_guard lock(mu_);
  for (auto& [id, st] : minted) models_[id] = std::move(st);
  jobs_[job_id] = JobRecord{std::move(final_view), JobStatus::kPending};
  ++jobs_started_;
  return FineTuneJob{job_id, base, JobStatus::kPending, {}, std::nullopt, {}};
}

FineTuneJob SimModelClient::do_poll_finetune(const FineTuneJob& job) {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(job.job_id);
  if (it == jobs_.end()) {
    throw Error(ErrorCode::kNotFound, "unknown fine-tune job '" + job.job_id + "'");
  }
  auto& rec = it->second;
  if (rec.revealed == JobStatus::kPending) {
    rec.revealed = JobStatus::kRunning;
  } else if (rec.revealed == JobStatus::kRunning) {
    rec.revealed = JobStatus::kSucceeded;
  }
  if (rec.revealed == JobStatus::kSucceeded) return rec.final_view;
  return FineTuneJob{job.job_id, job.base, rec.revealed, {}, std::nullopt, {}};
}

}  // namespace catshift::model
