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

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace catshift::text {

// Splits on runs of ASCII whitespace. Deterministic and tokenizer-agnostic.
std::vector<std::string> tokenize(std::string_view s);

std::string join(std::span<const std::string> tokens,
                 std::string_view sep = " ");

// Collapses whitespace runs to a single space and trims both ends.
std::string normalize(std::string_view s);

std::string_view trim(std::string_view s);

}  // namespace catshift::text
