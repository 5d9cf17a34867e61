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

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "catshift/corpus.hpp"
#include "catshift/inference.hpp"
#include "catshift/model.hpp"
#include "json.hpp"

// Run configuration. On disk it is a flat `key = value` file (one key per
// line, `#` comments); in memory and in reports it is a flat JSON object with
// typed values. Unknown keys are rejected. API tokens are never accepted as
// configuration; only the name of the environment variable holding one is.

namespace catshift::config {

struct RunSettings {
  inference::AuditConfig audit;
  corpus::Format format = corpus::Format::kTextLines;
  corpus::PairOptions pairs;
  model::ConnectOptions connect;  // connect.sim_pair_options mirrors `pairs`
  std::string validation_provenance;
  std::string scorer_endpoint;  // for metric = embedding
};

// Flat JSON with every key present, suitable for a config snapshot.
nlohmann::json to_json(const RunSettings& settings);
nlohmann::json to_json(const inference::AuditConfig& cfg);

// Missing keys keep their defaults. Throws Error(kInvalidArgument) on unknown
// keys or ill-typed values.
RunSettings from_json(const nlohmann::json& flat);

/// Parses `key = value` text into flat typed JSON. Errors carry the line.
nlohmann::json parse_key_value(std::string_view text);
nlohmann::json load_file(const std::filesystem::path& path);

// Applies one `key=value` override in place.
void apply_override(nlohmann::json& flat, std::string_view assignment);

// Keys the schema knows, for documentation and `--help`.
std::string describe_keys();

}  // namespace catshift::config
