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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

// Corpus ingestion, prompt/completion pair construction and seeded splits.

namespace catshift::corpus {

struct TextRecord {
  std::string id;
  std::string text;
};

enum class PairMode { kInstruction, kPrefix };

struct PairRecord {
  std::string id;
  std::string prompt;
  std::string completion;
  PairMode mode = PairMode::kPrefix;

  bool operator==(const PairRecord&) const = default;
};

enum class Format { kTextLines, kJsonlText, kJsonlPairs };

Format parse_format(std::string_view name);
std::string_view format_name(Format format);
PairMode parse_pair_mode(std::string_view name);
std::string_view pair_mode_name(PairMode mode);

using LoadedCorpus =
    std::variant<std::vector<TextRecord>, std::vector<PairRecord>>;

/// Reads records in file order. Missing ids become `<filename>#<line>` with
/// 1-based physical line numbers; blank lines are skipped but still counted.
/// Throws Error(kParse) naming the line for malformed input, and
/// Error(kInsufficientData) when the file holds no records.
LoadedCorpus load_corpus(const std::filesystem::path& path, Format format);

inline constexpr std::string_view kDefaultInstruction =
    "Complete the following text: ";

struct PairOptions {
  double split_ratio = 0.5;
  std::size_t min_prompt_tokens = 1;
  std::size_t min_completion_tokens = 1;
  PairMode mode = PairMode::kPrefix;
  std::string instruction_template = std::string(kDefaultInstruction);
};

struct PairResult {
  std::vector<PairRecord> pairs;
  std::size_t dropped = 0;
};

/// Cuts each record on whitespace tokens. The completion receives
/// floor((1 - split_ratio) * n) trailing tokens and the prompt the rest, so
/// the prompt keeps the extra token when n is odd. Records that miss either
/// minimum are dropped and counted; dropping everything throws
/// Error(kInsufficientData, "corpus too short").
PairResult make_pairs(const std::vector<TextRecord>& records,
                      const PairOptions& options);

/// Pairs from any loaded corpus: text records go through make_pairs, pair
/// files pass through unchanged.
PairResult to_pairs(const LoadedCorpus& corpus, const PairOptions& options);

struct SplitPlan {
  std::vector<std::string> finetune_ids;  // in corpus order
  std::vector<std::string> test_ids;      // in corpus order
  std::uint64_t seed = 0;
  std::size_t n_finetune = 0;
  std::size_t n_test = 0;

  bool operator==(const SplitPlan&) const = default;
};

/// Uniformly random disjoint subsets, a pure function of (pairs order, seed).
SplitPlan split_dataset(const std::vector<PairRecord>& pairs,
                        std::size_t n_finetune, std::size_t n_test,
                        std::uint64_t seed);

// Selects the records named by `ids`, in the order of `ids`.
std::vector<PairRecord> select(const std::vector<PairRecord>& pairs,
                               const std::vector<std::string>& ids);

struct CorpusBundle {
  std::vector<PairRecord> suspicious;
  std::vector<PairRecord> validation;
  SplitPlan suspicious_split;
  SplitPlan validation_split;
  // Owner's assertion that the validation corpus was never trained on.
  std::string validation_provenance;
};

/// Builds both splits. The validation split mirrors the suspicious sizes,
/// except that `validation_finetune` overrides its fine-tune count. The
/// validation seed is derived from `seed` so the two plans are independent.
CorpusBundle make_bundle(std::vector<PairRecord> suspicious,
                         std::vector<PairRecord> validation,
                         std::string validation_provenance,
                         std::size_t n_finetune, std::size_t n_test,
                         std::size_t validation_finetune, std::uint64_t seed);

// Versioned jsonl sidecar: a header line followed by one line per id.
void write_split_plan(const std::filesystem::path& path, const SplitPlan& plan,
                      std::string_view dataset_tag);
SplitPlan read_split_plan(const std::filesystem::path& path);

void write_pairs_jsonl(const std::filesystem::path& path,
                       const std::vector<PairRecord>& pairs);

}  // namespace catshift::corpus
