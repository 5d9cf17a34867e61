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

#include <gtest/gtest.h>

#include <cstdlib>

#include "catshift/config.hpp"
#include "catshift/error.hpp"

namespace catshift::config {
namespace {

using nlohmann::json;

TEST(Config, DefaultsRoundTrip) {
  const auto flat = to_json(RunSettings{});
  EXPECT_EQ(to_json(from_json(flat)), flat);
  EXPECT_EQ(flat["alpha"], 0.1);
  EXPECT_EQ(flat["baseline_threshold"], 1e-3);
  EXPECT_EQ(flat["n_finetune"], 600);
  EXPECT_EQ(flat["n_test"], 1000);
  EXPECT_EQ(flat["metric"], "ngram_f1");
  EXPECT_EQ(flat["mode"], "paired");
  EXPECT_EQ(flat["token_env"], "CATSHIFT_API_TOKEN");
}

TEST(Config, EveryDescribedKeyIsAccepted) {
  const auto flat = to_json(RunSettings{});
  const auto keys = describe_keys();
  for (const auto& [k, v] : flat.items()) EXPECT_NE(keys.find(k), std::string::npos) << k;
}

TEST(Config, ParsesKeyValueText) {
  const auto flat = parse_key_value(
      "# audit\n"
      "alpha = 0.05\n"
      "\n"
      "n_test=200\n"
      "mode = shared\n"
      "poll_interval_s = 0.5\n");
  EXPECT_EQ(flat["alpha"], 0.05);
  EXPECT_EQ(flat["n_test"], 200);
  const auto s = from_json(flat);
  EXPECT_EQ(s.audit.mode, inference::FinetuneMode::kShared);
  EXPECT_EQ(s.audit.poll_interval, std::chrono::milliseconds(500));
}

TEST(Config, ErrorsNameTheLine) {
  try {
    parse_key_value("alpha = 0.1\nn_test = many\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_key_value("just words\n"), Error);
  EXPECT_THROW(parse_key_value("n_test = -3\n"), Error);
}

TEST(Config, TokensAreNeverConfiguration) {
  for (const char* key : {"api_token", "token", "bearer_token", "api_key"}) {
    EXPECT_THROW(parse_key_value(std::string(key) + " = secret\n"), Error) << key;
    EXPECT_THROW(from_json(json{{key, "secret"}}), Error) << key;
  }
}

TEST(Config, RejectsUnknownAndIllTyped) {
  EXPECT_THROW(from_json(json{{"alpah", 0.1}}), Error);
  EXPECT_THROW(from_json(json{{"n_test", "ten"}}), Error);
  EXPECT_THROW(from_json(json{{"n_test", -1}}), Error);
  EXPECT_THROW(from_json(json{{"metric", "bleu"}}), Error);
  EXPECT_THROW(from_json(json::array()), Error);
}

TEST(Config, SemanticValidation) {
  EXPECT_THROW(from_json(json{{"baseline_threshold", 0.5}}), Error);
  EXPECT_THROW(from_json(json{{"learning_rate", 0.0}}), Error);
}

TEST(Config, OverridesReplaceValues) {
  auto flat = parse_key_value("alpha = 0.1\n");
  apply_override(flat, "alpha=0.2");
  apply_override(flat, " seed = 17 ");
  EXPECT_EQ(flat["alpha"], 0.2);
  EXPECT_EQ(flat["seed"], 17);
  EXPECT_THROW(apply_override(flat, "alpha"), Error);
  EXPECT_THROW(apply_override(flat, "nope=1"), Error);
}

TEST(Config, FixtureLoads) {
  const auto s = from_json(load_file(std::string(CATSHIFT_FIXTURES) + "/audit.conf"));
  EXPECT_EQ(s.audit.n_finetune, 100u);
  EXPECT_EQ(s.audit.n_test, 100u);
  EXPECT_EQ(s.audit.seed, 5u);
  EXPECT_FALSE(s.validation_provenance.empty());
  EXPECT_THROW(load_file("/nonexistent/catshift.conf"), Error);
}

TEST(Config, ScorerTokenComesFromEnvironment) {
  ::setenv("CATSHIFT_CONFIG_TEST_TOKEN", "abc", 1);
  const auto s = from_json(json{{"metric", "embedding"},
                                {"scorer_endpoint", "http://127.0.0.1:9"},
                                {"token_env", "CATSHIFT_CONFIG_TEST_TOKEN"}});
  ASSERT_TRUE(s.audit.scorer.remote);
  EXPECT_EQ(s.audit.scorer.remote->bearer_token, "abc");
  // The snapshot records where the token lives, never its value.
  EXPECT_EQ(to_json(s).dump().find("abc"), std::string::npos);
  ::unsetenv("CATSHIFT_CONFIG_TEST_TOKEN");
}

TEST(Config, SimPairOptionsMirrorPairs) {
  const auto s = from_json(json{{"split_ratio", 0.25}, {"pair_mode", "instruction"}});
  EXPECT_EQ(s.connect.sim_pair_options.split_ratio, 0.25);
  EXPECT_EQ(s.connect.sim_pair_options.mode, corpus::PairMode::kInstruction);
}

}  // namespace
}  // namespace catshift::config
