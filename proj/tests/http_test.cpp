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

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "catshift/error.hpp"
#include "catshift/http_model.hpp"
#include "catshift/inference.hpp"
#include "catshift/sim_model.hpp"
#include "catshift/similarity.hpp"
#include "httplib.h"
#include "json.hpp"

namespace catshift {
namespace {

using nlohmann::json;

// Runs an httplib server on an ephemeral loopback port for one test.
class LocalServer {
 public:
  LocalServer() = default;
  LocalServer(const LocalServer&) = delete;
  ~LocalServer() {
    server.stop();
    if (thread_.joinable()) thread_.join();
  }

  void start() {
    port_ = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  httplib::Server server;

 private:
  int port_ = -1;
  std::thread thread_;
};

void reply(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

model::HttpModelOptions options_for(const LocalServer& s) {
  model::HttpModelOptions o;
  o.base_url = s.url();
  o.model_id = "base";
  o.timeout_seconds = 5;
  o.retry_attempts = 3;
  o.retry_initial_delay = std::chrono::milliseconds(1);
  return o;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

TEST(HttpModel, CompleteSendsRequestFields) {
  LocalServer s;
  json seen;
  std::string auth;
  s.server.Post("/v1/complete", [&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    auth = req.get_header_value("Authorization");
    reply(res, {{"completion", "echo " + seen["prompt"].get<std::string>()}});
  });
  s.start();
  auto opt = options_for(s);
  opt.bearer_token = "t0k";
  model::HttpModelClient client(opt);
  EXPECT_EQ(client.complete(client.base_model(), "hello there", 7), "echo hello there");
  EXPECT_EQ(seen["model_id"], "base");
  EXPECT_EQ(seen["max_new_tokens"], 7);
  EXPECT_EQ(seen["deterministic"], true);
  EXPECT_EQ(auth, "Bearer t0k");
  EXPECT_TRUE(client.warnings().empty());
}

TEST(HttpModel, ProbabilityFieldsAreRefused) {
  LocalServer s;
  s.server.Post("/v1/complete", [](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"completion", "x"}, {"token_logprobs", {-0.1}}});
  });
  s.start();
  model::HttpModelClient client(options_for(s));
  EXPECT_EQ(code_of([&] { client.complete(client.base_model(), "p", 3); }), ErrorCode::kProtocol);
}

TEST(HttpModel, OtherExtraFieldsAreFlagged) {
  LocalServer s;
  s.server.Post("/v1/complete", [](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"completion", "x"}, {"latency_ms", 12}});
  });
  s.start();
  model::HttpModelClient client(options_for(s));
  EXPECT_EQ(client.complete(client.base_model(), "p", 3), "x");
  ASSERT_EQ(client.warnings().size(), 1u);
  EXPECT_NE(client.warnings()[0].find("latency_ms"), std::string::npos);
}

TEST(HttpModel, MissingCompletionIsProtocolError) {
  LocalServer s;
  s.server.Post("/v1/complete", [](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"text", "x"}});
  });
  s.start();
  model::HttpModelClient client(options_for(s));
  EXPECT_EQ(code_of([&] { client.complete(client.base_model(), "p", 3); }), ErrorCode::kProtocol);
}

TEST(HttpModel, RetriesServerErrors) {
  LocalServer s;
  std::atomic<int> calls = 0;
  s.server.Post("/v1/complete", [&](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) return reply(res, {{"error", "busy"}}, 503);
    reply(res, {{"completion", "ok"}});
  });
  s.start();
  model::HttpModelClient client(options_for(s));
  EXPECT_EQ(client.complete(client.base_model(), "p", 3), "ok");
  EXPECT_EQ(calls.load(), 3);
}

TEST(HttpModel, GivesUpAfterRetryBudget) {
  LocalServer s;
  std::atomic<int> calls = 0;
  s.server.Post("/v1/complete", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    reply(res, {{"error", "down"}}, 500);
  });
  s.start();
  model::HttpModelClient client(options_for(s));
  EXPECT_EQ(code_of([&] { client.complete(client.base_model(), "p", 3); }), ErrorCode::kTransport);
  EXPECT_EQ(calls.load(), 3);
}

TEST(HttpModel, ClientErrorsAreNotRetried) {
  LocalServer s;
  std::atomic<int> calls = 0;
  s.server.Post("/v1/complete", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    reply(res, {{"error", "unknown model"}}, 404);
  });
  s.server.Post("/v1/finetune", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    reply(res, {{"error", "bad hyperparams"}}, 422);
  });
  s.start();
  model::HttpModelClient client(options_for(s));
  EXPECT_EQ(code_of([&] { client.complete(client.base_model(), "p", 3); }), ErrorCode::kNotFound);
  try {
    client.start_finetune(client.base_model(), {{{"a", "b", "c", {}}}, {}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kProtocol);
    EXPECT_NE(std::string(e.what()).find("bad hyperparams"), std::string::npos);
  }
  EXPECT_EQ(calls.load(), 2);
}

TEST(HttpModel, UnreachableEndpointIsTransportError) {
  // Bound but never listening, then closed: connects to it are refused.
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ASSERT_EQ(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  const int port = ntohs(addr.sin_port);
  model::HttpModelOptions o;
  o.base_url = "http://127.0.0.1:" + std::to_string(port);
  o.model_id = "base";
  o.timeout_seconds = 2;
  o.retry_attempts = 2;
  o.retry_initial_delay = std::chrono::milliseconds(1);
  model::HttpModelClient client(o);
  EXPECT_EQ(code_of([&] { client.complete(client.base_model(), "p", 3); }), ErrorCode::kTransport);
}

TEST(HttpModel, FinetuneJobProtocol) {
  LocalServer s;
  json submitted;
  std::atomic<int> polls = 0;
  s.server.Post("/v1/finetune", [&](const httplib::Request& req, httplib::Response& res) {
    submitted = json::parse(req.body);
    reply(res, {{"job_id", "job-1"}});
  });
  s.server.Get(R"(/v1/finetune/([\w-]+))", [&](const httplib::Request& req, httplib::Response& res) {
    if (req.matches[1] != "job-1") return reply(res, {{"error", "no such job"}}, 404);
    if (++polls == 1) return reply(res, {{"status", "running"}, {"checkpoints", json::array()}});
    reply(res, {{"status", "succeeded"},
                {"checkpoints",
                 {{{"step", 10}, {"loss", 2.0}, {"model_id", "job-1@10"}},
                  {{"step", 20}, {"loss", 1.0}, {"model_id", "job-1@20"}}}},
                {"result_model_id", "job-1-final"}});
  });
  s.start();
  model::HttpModelClient client(options_for(s));
  model::FineTuneHyperparams hp;
  hp.checkpoint_every = 10;
  auto job = client.start_finetune(client.base_model(), {{{"a", "hello", "world", {}}}, hp});
  EXPECT_EQ(job.job_id, "job-1");
  EXPECT_EQ(submitted["base_model_id"], "base");
  EXPECT_EQ(submitted["pairs"][0]["prompt"], "hello");
  EXPECT_EQ(submitted["hyperparams"]["checkpoint_every"], 10);
  EXPECT_EQ(submitted["hyperparams"]["lora_rank"], hp.lora_rank);

  job = model::wait_for_job(client, job, std::chrono::milliseconds(0), std::chrono::seconds(5));
  EXPECT_EQ(job.status, model::JobStatus::kSucceeded);
  ASSERT_TRUE(job.result_model);
  EXPECT_EQ(job.result_model->model_id, "job-1-final");
  const auto choice = model::select_checkpoint(job);
  EXPECT_EQ(choice.step, 20u);
  EXPECT_EQ(choice.model.model_id, "job-1@20");

  model::FineTuneJob ghost = job;
  ghost.job_id = "job-2";
  EXPECT_EQ(code_of([&] { client.poll_finetune(ghost); }), ErrorCode::kNotFound);
}

TEST(HttpModel, MalformedPollIsProtocolError) {
  LocalServer s;
  s.server.Post("/v1/finetune", [](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"job_id", "j"}});
  });
  s.server.Get("/v1/finetune/j", [](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"checkpoints", json::array()}});
  });
  s.start();
  model::HttpModelClient client(options_for(s));
  auto job = client.start_finetune(client.base_model(), {{{"a", "b", "c", {}}}, {}});
  EXPECT_EQ(code_of([&] { client.poll_finetune(job); }), ErrorCode::kProtocol);
}

TEST(HttpModel, ConnectReadsTokenFromEnvironment) {
  LocalServer s;
  std::string auth;
  s.server.Post("/v1/complete", [&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    reply(res, {{"completion", "x"}});
  });
  s.start();
  ::setenv("CATSHIFT_HTTP_TEST_TOKEN", "from-env", 1);
  model::ConnectOptions opt;
  opt.endpoint = s.url() + "/";
  opt.model_id = "base";
  opt.token_env = "CATSHIFT_HTTP_TEST_TOKEN";
  auto client = model::connect(opt);
  client->complete(client->base_model(), "p", 2);
  EXPECT_EQ(auth, "Bearer from-env");
  ::unsetenv("CATSHIFT_HTTP_TEST_TOKEN");
}

TEST(HttpSimilarity, ScoreAndClamp) {
  LocalServer s;
  s.server.Post("/v1/similarity", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    reply(res, {{"score", body["a"] == body["b"] ? 1.25 : 0.4}});
  });
  s.start();
  similarity::RemoteScorerOptions o{s.url(), "", 5};
  bool clamped = true;
  EXPECT_DOUBLE_EQ(similarity::sim_embedding("a", "b", o, &clamped).value, 0.4);
  EXPECT_FALSE(clamped);
  EXPECT_DOUBLE_EQ(similarity::sim_embedding("a", "a", o, &clamped).value, 1.0);
  EXPECT_TRUE(clamped);

  similarity::Scorer scorer{similarity::Metric::kEmbedding, 2, o};
  EXPECT_DOUBLE_EQ(scorer("x", "y").value, 0.4);
  scorer.remote.reset();
  EXPECT_THROW(scorer("x", "y"), Error);
}

// The v1 protocol served from the simulator, so a full audit can run over
// the wire.
class SimAdapter {
 public:
  explicit SimAdapter(model::SimModelState state) : sim_(std::move(state)) {
    auto& srv = server_.server;
    srv.Post("/v1/complete", [this](const httplib::Request& req, httplib::Response& res) {
      const auto b = json::parse(req.body);
      const model::ModelRef ref{"sim:", b["model_id"].get<std::string>()};
      reply(res, {{"completion", sim_.complete(ref, b["prompt"].get<std::string>(),
                                               b["max_new_tokens"].get<std::size_t>())}});
    });
    srv.Post("/v1/finetune", [this](const httplib::Request& req, httplib::Response& res) {
      const auto b = json::parse(req.body);
      model::FineTuneSpec spec;
      for (const auto& p : b["pairs"]) {
        spec.pairs.push_back({"", p["prompt"], p["completion"], corpus::PairMode::kPrefix});
      }
      spec.hyperparams.checkpoint_every = b["hyperparams"]["checkpoint_every"];
      const auto job = sim_.start_finetune({"sim:", b["base_model_id"]}, spec);
      std::lock_guard lock(mu_);
      jobs_[job.job_id] = job;
      reply(res, {{"job_id", job.job_id}});
    });
    srv.Get(R"(/v1/finetune/([\w@-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::unique_lock lock(mu_);
      auto& job = jobs_.at(req.matches[1]);
      lock.unlock();
      job = sim_.poll_finetune(job);
      json cps = json::array();
      for (const auto& c : job.checkpoints) {
        cps.push_back({{"step", c.step}, {"loss", c.loss}, {"model_id", *c.model_id}});
      }
      json body = {{"status", model::job_status_name(job.status)}, {"checkpoints", cps}};
      if (job.result_model) body["result_model_id"] = job.result_model->model_id;
      reply(res, body);
    });
    server_.start();
  }

  std::string url() const { return server_.url(); }
  std::size_t jobs() const { return sim_.jobs_started(); }

 private:
  model::SimModelClient sim_;
  std::mutex mu_;
  std::map<std::string, model::FineTuneJob> jobs_;
  LocalServer server_;  // last: stops before the state above is destroyed
};

TEST(HttpAudit, MemberDetectedOverTheWire) {
  const auto member = corpus::make_pairs(model::synthetic_texts(60, 16, 30, 1, "m"), {}).pairs;
  const auto valid = corpus::make_pairs(model::synthetic_texts(60, 16, 30, 2, "v"), {}).pairs;
  model::SimModelState state = model::seed_memory({}, member, 0.3, "faded");
  state.gain_recover = 0.6;
  SimAdapter adapter(state);

  model::HttpModelOptions o;
  o.base_url = adapter.url();
  o.model_id = "sim-base";
  model::HttpModelClient client(o);

  inference::AuditConfig cfg;
  cfg.n_finetune = 20;
  cfg.n_test = 30;
  cfg.parallelism = 4;
  cfg.poll_interval = std::chrono::milliseconds(0);
  const auto bundle = inference::build_bundle(member, valid, "held-out synthetic", cfg);
  const auto report = inference::dual_test(client, bundle, cfg);
  EXPECT_EQ(report.decision, inference::Decision::kMember);
  EXPECT_EQ(report.decided_by, inference::DecidedBy::kCatShift);
  EXPECT_EQ(adapter.jobs(), 2u);
  EXPECT_TRUE(inference::decision_consistent(report));
}

}  // namespace
}  // namespace catshift
