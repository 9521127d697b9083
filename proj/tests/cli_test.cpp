// Copyright 2026 The Reflectiva Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <atomic>
#include <set>

#include "reflectiva/kb_store.hpp"
#include "reflectiva/util.hpp"
#include "test_support.hpp"

namespace reflectiva {
namespace {

using nlohmann::json;
using testing::run_cli;
using testing::TempDir;

std::string data(const std::string& rel) { return (testing::data_dir() / rel).string(); }

TEST(Cli, IngestSummary) {
  const auto r = run_cli("ingest --kb " + data("kb/three_docs.jsonl"));
  EXPECT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("documents: 3\n"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("embeddings: inline\n"), std::string::npos);
  EXPECT_NE(r.output.find("missing_embedding: 1\n"), std::string::npos);
  EXPECT_NE(r.output.find("empty_summary: 1\n"), std::string::npos);
}

TEST(Cli, IngestDuplicateIdNamesLine) {
  const auto r = run_cli("ingest --kb " + data("kb/duplicate_id.jsonl"));
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("line 7"), std::string::npos) << r.output;
}

TEST(Cli, IngestSidecar) {
  TempDir dir;
  save_kb(load_kb(data("protocol/kb.jsonl")), dir / "kb.jsonl", true);
  const auto r = run_cli("ingest --kb " + (dir / "kb.jsonl").string() + " --out " + dir.path().string());
  EXPECT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("embeddings: sidecar\n"), std::string::npos) << r.output;
  EXPECT_EQ(json::parse(read_file(dir / "ingest.json")).at("documents"), 7);
}

TEST(Cli, HelpAndParseErrors) {
  for (const char* cmd : {"", "ingest", "index", "answer", "eval", "mine", "rerank-sweep", "token-acc", "synth"}) {
    const auto r = run_cli(std::string(cmd) + " --help");
    EXPECT_EQ(r.exit_code, 0) << cmd << r.output;
    EXPECT_NE(r.output.find("--"), std::string::npos) << cmd;
  }
  EXPECT_EQ(run_cli("ingest --no-such-flag").exit_code, 2);
  EXPECT_EQ(run_cli("frobnicate").exit_code, 2);
  EXPECT_EQ(run_cli("ingest").exit_code, 2);
  EXPECT_EQ(run_cli("eval --dataset /nonexistent.jsonl --backend mock").exit_code, 2);
  EXPECT_EQ(run_cli("ingest --kb " + data("kb/three_docs.jsonl") + " --backend carrier-pigeon").exit_code, 2);
}

std::string protocol_index(const TempDir& dir) {
  const auto r = run_cli("index --kb " + data("protocol/kb.jsonl") + " --out " + dir.path().string());
  EXPECT_EQ(r.exit_code, 0) << r.output;
  return (dir / "index.jsonl").string();
}

TEST(Cli, AnswerOnProtocolFixture) {
  TempDir dir;
  const std::string index = protocol_index(dir);
  const auto r = run_cli("answer --sample p02 --top-k 2 --kb " + data("protocol/kb.jsonl") + " --index " + index +
                         " --dataset " + data("protocol/samples.jsonl") + " --scripts " +
                         data("protocol/scripts.json") + " --out " + dir.path().string());
  EXPECT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(r.output, "16 to 49ft\n");
  const auto trace = json::parse(read_file(dir / "trace-p02.json"));
  EXPECT_EQ(trace.at("answer"), "16 to 49ft");
  EXPECT_FALSE(trace.contains("timings_ms"));
}

TEST(Cli, MockWithoutScriptsIsConfigError) {
  TempDir dir;
  const std::string index = protocol_index(dir);
  const auto r = run_cli("answer --sample p02 --kb " + data("protocol/kb.jsonl") + " --index " + index +
                         " --dataset " + data("protocol/samples.jsonl"));
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("--scripts"), std::string::npos) << r.output;
}

std::string synth(const TempDir& dir, int samples) {
  const auto r = run_cli("synth --seed 3 --docs 30 --samples " + std::to_string(samples) + " --dim 16 --out " +
                         dir.path().string());
  EXPECT_EQ(r.exit_code, 0) << r.output;
  const std::string d = dir.path().string();
  return " --kb " + d + "/kb.jsonl --index " + d + "/index.jsonl --dataset " + d + "/samples.jsonl --scripts " + d +
         "/scripts.json";
}

TEST(Cli, EvalDeterministic) {
  TempDir dir;
  const std::string world = synth(dir, 20);
  TempDir a;
  TempDir b;
  const auto ra = run_cli("eval --seed 9 --jobs 1 --top-k 2" + world + " --out " + a.path().string());
  const auto rb = run_cli("eval --seed 9 --jobs 3 --top-k 2" + world + " --out " + b.path().string());
  ASSERT_EQ(ra.exit_code, 0) << ra.output;
  ASSERT_EQ(rb.exit_code, 0) << rb.output;
  EXPECT_EQ(read_file(a / "report.json"), read_file(b / "report.json"));
  EXPECT_EQ(read_file(a / "traces.jsonl"), read_file(b / "traces.jsonl"));
  EXPECT_EQ(json::parse(read_file(a / "report.json")).at("seed"), 9);
}

TEST(Cli, RerankSweepGrid) {
  TempDir dir;
  const std::string world = synth(dir, 20);
  const auto r = run_cli("rerank-sweep --ks 2,4 --kps 1,3,5,10,20 --jobs 1" + world + " --out " + dir.path().string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto sweep = json::parse(read_file(dir / "sweep.json"));
  ASSERT_EQ(sweep.at("cells").size(), 10u);
  for (const auto& c : sweep.at("cells")) EXPECT_EQ(c.at("num_samples"), 20) << c;
  const std::string csv = read_file(dir / "sweep.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,k_p=1,k_p=3,k_p=5,k_p=10,k_p=20");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(csv.find(",,"), std::string::npos);
}

TEST(Cli, PartialFailureExitsThree) {
  TempDir dir;
  const std::string world = synth(dir, 10);
  std::string samples = read_file(dir / "samples.jsonl");
  json extra = json::parse(samples.substr(0, samples.find('\n')));
  extra["id"] = "zz-unscripted";
  extra["question"] = "A question no script knows?";
  samples += extra.dump() + "\n";
  write_file_atomic(dir / "samples.jsonl", samples);
  const auto r = run_cli("eval --jobs 1" + world + " --out " + dir.path().string());
  EXPECT_EQ(r.exit_code, 3) << r.output;
  const auto failures = json::parse(read_file(dir / "failures.json"));
  ASSERT_EQ(failures.size(), 1u);
  EXPECT_EQ(failures[0].at("sample_id"), "zz-unscripted");
  EXPECT_NE(failures[0].at("error").get<std::string>().find("unscripted"), std::string::npos);
  EXPECT_EQ(json::parse(read_file(dir / "report.json")).at("report").at("num_failed"), 1);
}

TEST(Cli, MineAndTokenAccuracy) {
  TempDir dir;
  const std::string world = synth(dir, 30);
  const std::string out = " --out " + dir.path().string();
  const auto s1 = run_cli("mine --stage 1" + world + out);
  ASSERT_EQ(s1.exit_code, 0) << s1.output;
  EXPECT_FALSE(read_file(dir / "stage1.jsonl").empty());
  const auto s2 = run_cli("mine --stage 2 --jobs 1" + world + out);
  ASSERT_EQ(s2.exit_code, 0) << s2.output;
  const auto mix = json::parse(read_file(dir / "mixture.json"));
  std::set<std::size_t> after;
  for (const auto& [k, v] : mix.at("after").items()) after.insert(v.get<std::size_t>());
  EXPECT_EQ(after.size(), 1u);
  const auto t = run_cli("token-acc --jobs 1" + world + out);
  ASSERT_EQ(t.exit_code, 0) << t.output;
  EXPECT_TRUE(json::parse(read_file(dir / "token_accuracy.json")).at("report").contains("overall"));
}

/// Serves a decision that skips retrieval and answers with its own name.
struct NamedStub {
  testing::StubServer server;
  std::atomic<int> calls{0};
  explicit NamedStub(const std::string& name) {
    server.on("/v1/generate", [this, name](const json& req, httplib::Response& res) {
      ++calls;
      if (req.at("allowed_tokens").is_null()) {
        testing::reply_json(res, {{"tokens", {name}}, {"chosen_logprobs", {-0.1}}, {"candidates", json::array()}});
      } else {
        testing::reply_json(res, {{"tokens", {"<NORET>"}},
                                  {"chosen_logprobs", {-0.01}},
                                  {"candidates", {{{"<NORET>", -0.01}, {"<RET>", -5.0}}}}});
      }
    });
    server.start();
  }
};

TEST(Cli, EndpointPrecedence) {
  NamedStub file_stub("from-file");
  NamedStub env_stub("from-env");
  NamedStub flag_stub("from-flag");
  TempDir dir;
  write_file_atomic(dir / "run.json",
                    json{{"dataset", data("protocol/samples.jsonl")},
                         {"backend", {{"kind", "remote"}, {"endpoint", file_stub.server.endpoint()}, {"retries", 0}}}}
                        .dump());
  const std::string base = "answer --sample p01 --config " + (dir / "run.json").string() + " --out " + dir.path().string();
  const std::string env = "REFLECTIVA_ENDPOINT=" + env_stub.server.endpoint();

  auto r = run_cli(base, "env -u REFLECTIVA_ENDPOINT");
  EXPECT_EQ(r.output, "from-file\n");
  r = run_cli(base, env);
  EXPECT_EQ(r.output, "from-env\n");
  r = run_cli(base + " --endpoint " + flag_stub.server.endpoint(), env);
  EXPECT_EQ(r.output, "from-flag\n");
  EXPECT_EQ(file_stub.calls.load(), 2);
  EXPECT_EQ(env_stub.calls.load(), 2);
  EXPECT_EQ(flag_stub.calls.load(), 2);
}

TEST(Cli, RemoteBackendUnreachable) {
  TempDir dir;
  const auto r = run_cli("answer --sample p01 --backend remote --endpoint http://127.0.0.1:1 --dataset " +
                         data("protocol/samples.jsonl") + " --out " + dir.path().string());
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("error:"), std::string::npos);
}

}  // namespace
}  // namespace reflectiva
