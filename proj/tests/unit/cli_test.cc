// Copyright 2026 The smab Authors
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

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "smab/config.hpp"
#include "support/planted.hpp"
#include "support/testing.hpp"

extern char** environ;

namespace smab {
namespace {

const std::filesystem::path kRepoRoot = std::filesystem::path(SMAB_DATA_DIR).parent_path();

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string quote(const std::string& arg) {
  std::string q = "'";
  for (char c : arg) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

// Runs the CLI from the repository root so the bundled relative paths resolve.
Outcome smab_cli(const std::vector<std::string>& args) {
  testing::TempDir tmp;
  std::string cmd = "cd " + quote(kRepoRoot.string()) + " && " + quote(SMAB_CLI_PATH);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " >" + quote(tmp.file("out")) + " 2>" + quote(tmp.file("err"));
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = slurp(tmp.file("out"));
  o.err = slurp(tmp.file("err"));
  return o;
}

nlohmann::json error_body(const Outcome& o) {
  auto j = nlohmann::json::parse(o.err, nullptr, false);
  EXPECT_FALSE(j.is_discarded()) << o.err;
  return j;
}

class CliTest : public ::testing::Test {
 protected:
  std::string index_path() {
    const std::string path = dir_.file("index.json");
    if (!std::filesystem::exists(path)) {
      const auto o = smab_cli({"index", "--config", "data/run.conf", "--out", path});
      EXPECT_EQ(o.code, 0) << o.err;
    }
    return path;
  }

  Outcome run(const std::string& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"run", "--config", "data/run.conf", "--index", index_path(), "--out", out,
                                  "--set", "iterations=300"};
    args.insert(args.end(), extra.begin(), extra.end());
    return smab_cli(args);
  }

  nlohmann::json report(const std::string& path) { return nlohmann::json::parse(slurp(path)); }

  testing::TempDir dir_;
};

TEST_F(CliTest, KeysAndHelpListEveryConfigKey) {
  const auto keys = smab_cli({"keys"});
  const auto help = smab_cli({"--help"});
  ASSERT_EQ(keys.code, 0);
  ASSERT_EQ(help.code, 0);
  for (const auto& k : kConfigKeys) {
    const std::string needle = "  " + std::string(k.name) + " [default: ";
    EXPECT_NE(keys.out.find(needle), std::string::npos) << k.name;
    EXPECT_NE(help.out.find(needle), std::string::npos) << k.name;
  }
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(smab_cli({}).code, 2);
  EXPECT_EQ(smab_cli({"run", "--no-such-flag"}).code, 2);
  EXPECT_EQ(smab_cli({"kld", "--report-p", "x"}).code, 2);
}

TEST_F(CliTest, IndexCoversCorpus) {
  const auto index = arm_index_from_json(nlohmann::json::parse(slurp(index_path())));
  FlatConfig cfg = load_flat_config((kRepoRoot / "data" / "run.conf").string());
  const auto docs = load_corpus((kRepoRoot / "data" / "reviews.jsonl").string(), CorpusFormat::kJsonl);
  EXPECT_NO_THROW(validate_index(index, docs, cfg.preprocess_config()));
  EXPECT_EQ(index.stats.documents, 16u);
  EXPECT_FALSE(index.postings_for("awful").empty());
  EXPECT_EQ(index.postings.count("the"), 0u);
}

TEST_F(CliTest, RunIsDeterministic) {
  ASSERT_EQ(run(dir_.file("a.json")).code, 0);
  ASSERT_EQ(run(dir_.file("b.json")).code, 0);
  EXPECT_EQ(slurp(dir_.file("a.json")), slurp(dir_.file("b.json")));
  const auto r = report(dir_.file("a.json"));
  EXPECT_TRUE(r.at("words").contains("awful"));
  std::uint64_t pulls = 0;
  for (const auto& [w, v] : r.at("words").items()) pulls += v.at("n").get<std::uint64_t>();
  EXPECT_LE(pulls, 300u);

  ASSERT_EQ(run(dir_.file("c.json"), {"--set", "seed=8"}).code, 0);
  EXPECT_NE(slurp(dir_.file("a.json")), slurp(dir_.file("c.json")));
}

TEST_F(CliTest, SingleIterationOnOneWord) {
  std::ofstream(dir_.file("one.jsonl")) << R"({"id":"a","text":"awful","label":"neg"})" << "\n";
  const std::string oracle = "classifier=synthetic:" + (kRepoRoot / "data" / "oracle.json").string();
  ASSERT_EQ(smab_cli({"index", "--corpus", dir_.file("one.jsonl"), "--out", dir_.file("one.index.json")}).code, 0);
  const auto o = smab_cli({"run", "--corpus", dir_.file("one.jsonl"), "--index", dir_.file("one.index.json"), "--out",
                           dir_.file("one.json"), "--set", oracle, "--set", "iterations=1", "--set",
                           "reward_mode=gold", "--set", "full_regret=" + dir_.file("regret.csv")});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto words = report(dir_.file("one.json")).at("words");
  ASSERT_EQ(words.size(), 1u);
  EXPECT_EQ(words.at("awful").at("n"), 1);
  // 9 of the 10 scripted replacements differ from "awful" and all of them clear the lexicon
  EXPECT_EQ(words.at("awful").at("g"), 1.0);
  EXPECT_EQ(slurp(dir_.file("regret.csv")), "update,regret\n1,0.0\n");
}

TEST_F(CliTest, ResumeFromCheckpoint) {
  const std::string ck = dir_.file("ck.json");
  ASSERT_EQ(run(dir_.file("full.json")).code, 0);
  ASSERT_EQ(run(dir_.file("half.json"), {"--set", "iterations=150", "--set", "checkpoint=" + ck, "--set",
                                         "checkpoint_every=150"})
                .code,
            0);
  ASSERT_TRUE(std::filesystem::exists(ck));
  ASSERT_EQ(run(dir_.file("resumed.json"), {"--resume", ck}).code, 0);
  EXPECT_EQ(report(dir_.file("full.json")).at("words"), report(dir_.file("resumed.json")).at("words"));
}

TEST_F(CliTest, KldOfIdenticalReportsIsZero) {
  ASSERT_EQ(run(dir_.file("a.json")).code, 0);
  const auto o = smab_cli({"kld", "--report-p", dir_.file("a.json"), "--report-q", dir_.file("a.json")});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(o.out, "0.0\n");
}

TEST_F(CliTest, SasrSweep) {
  ASSERT_EQ(run(dir_.file("a.json")).code, 0);
  const auto o = smab_cli({"sasr", "--config", "data/run.conf", "--report", dir_.file("a.json"), "--thresholds",
                           "0:1:0.5"});
  ASSERT_EQ(o.code, 0) << o.err;
  std::istringstream lines(o.out);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 4u) << o.out;
  EXPECT_EQ(rows[0], "threshold,sasr,eligible_count");
  EXPECT_TRUE(rows[1].starts_with("0.0,")) << rows[1];

  const auto j = smab_cli({"sasr", "--config", "data/run.conf", "--report", dir_.file("a.json"), "--thresholds",
                           "0", "--json"});
  ASSERT_EQ(j.code, 0) << j.err;
  const auto arr = nlohmann::json::parse(j.out);
  ASSERT_EQ(arr.size(), 1u);
  EXPECT_GT(arr[0].at("eligible_count").get<int>(), 0);
  const double v = arr[0].at("sasr").get<double>();
  EXPECT_GE(v, 0.0);
  EXPECT_LE(v, 1.0);
}

TEST_F(CliTest, SasrOnPlantedFixture) {
  const auto f = testing::planted_fixture(20, {"awful", "dreadful", "bleak"});
  {
    std::ofstream corpus(dir_.file("planted.jsonl"));
    for (const auto& d : f.docs) corpus << nlohmann::json{{"id", d.id}, {"text", d.text}, {"label", *d.gold_label}}.dump() << "\n";
    std::ofstream(dir_.file("planted.spec.json")) << to_json(f.spec).dump();
    std::ofstream(dir_.file("planted.stop")) << "the\nand\n";
    std::ofstream(dir_.file("planted.conf"))
        << "corpus = \"" << dir_.file("planted.jsonl") << "\"\n"
        << "index = \"" << dir_.file("planted.index.json") << "\"\n"
        << "classifier = \"synthetic:" << dir_.file("planted.spec.json") << "\"\n"
        << "stopwords = \"" << dir_.file("planted.stop") << "\"\n"
        << "strategy = ucb1\nreward_mode = gold\niterations = 2000\nseed = 3\n";
  }
  const std::string conf = dir_.file("planted.conf");
  ASSERT_EQ(smab_cli({"index", "--config", conf}).code, 0);
  const auto r = smab_cli({"run", "--config", conf, "--out", dir_.file("planted.report.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto o = smab_cli({"sasr", "--config", conf, "--report", dir_.file("planted.report.json"), "--thresholds",
                           "0.9"});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(o.out, "threshold,sasr,eligible_count\n0.9,1.0,3\n");
}

TEST_F(CliTest, ProxyStudyUsesBestModelAsBase) {
  std::vector<std::string> args{"proxy-study", "--reports"};
  for (int seed : {1, 2, 3}) {
    const std::string path = dir_.file("r" + std::to_string(seed) + ".json");
    ASSERT_EQ(run(path, {"--set", "seed=" + std::to_string(seed)}).code, 0);
    args.push_back(path);
  }
  args.insert(args.end(), {"--accuracies", dir_.file("acc.json")});
  std::ofstream(dir_.file("acc.json")) << "[0.7, 0.9, 0.8]";
  const auto o = smab_cli(args);
  ASSERT_EQ(o.code, 0) << o.err;
  const auto j = nlohmann::json::parse(o.out);
  EXPECT_EQ(j.at("base_report"), dir_.file("r2.json"));
  EXPECT_EQ(j.at("kld").at(1).get<double>(), 0.0);
  EXPECT_TRUE(j.contains("r"));
  EXPECT_TRUE(j.contains("p_value"));
}

TEST_F(CliTest, AttackPromptRendersTemplate) {
  ASSERT_EQ(run(dir_.file("a.json")).code, 0);
  const auto o = smab_cli({"attack-prompt", "--config", "data/run.conf", "--report", dir_.file("a.json"),
                           "--template", "W4", "--k", "2"});
  ASSERT_EQ(o.code, 0) << o.err;
  std::istringstream lines(o.out);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("template_id"), "W4");
    EXPECT_FALSE(j.at("prompt").get<std::string>().empty());
    ++n;
  }
  EXPECT_EQ(n, 16);
  EXPECT_EQ(smab_cli({"attack-prompt", "--report", dir_.file("a.json"), "--corpus", "data/reviews.jsonl",
                      "--template", "W9"})
                .code,
            3);
}

TEST_F(CliTest, AttackEvalOnBundledRecords) {
  const auto o = smab_cli({"attack-eval", "--records", "data/attack_records.jsonl"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto j = nlohmann::json::parse(o.out);
  EXPECT_NEAR(j.at("asr").get<double>(), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(j.at("after_attack_accuracy").get<double>(), 0.5, 1e-12);
  EXPECT_EQ(j.at("records").size(), 4u);
  EXPECT_NEAR(j.at("records").at(1).at("wmr").get<double>(), 0.0, 1e-12);
  EXPECT_NEAR(j.at("records").at(0).at("wmr").get<double>(), 1.0 / 3.0, 1e-12);
}

TEST_F(CliTest, TextSensitivityFromFileAndEndpoint) {
  const std::string text = "The plot was awful but the music carried it.";
  const auto file = smab_cli({"text-sens", "--config", "data/run.conf", "--text", text, "--keyphrases",
                              "data/keyphrases.json", "--adv", "The plot was fine but the music carried it."});
  ASSERT_EQ(file.code, 0) << file.err;
  const auto a = nlohmann::json::parse(file.out);
  const double s = a.at("s").get<double>();
  EXPECT_GT(s, 0.0);
  EXPECT_LE(s, 1.0);
  EXPECT_NEAR(a.at("sensitivity_reward").get<double>(), 0.25 * (s - a.at("s_adv").get<double>()), 1e-12);

  const auto ep = smab_cli({"text-sens", "--config", "data/run.conf", "--text", text, "--keyphrases", "endpoint"});
  ASSERT_EQ(ep.code, 0) << ep.err;
  EXPECT_EQ(nlohmann::json::parse(ep.out).at("s").get<double>(), s);
}

TEST_F(CliTest, InputErrorsExitThree) {
  const auto missing = smab_cli({"index", "--corpus", "data/none.jsonl"});
  EXPECT_EQ(missing.code, 3);
  EXPECT_EQ(error_body(missing).at("error"), "IoError");

  const auto key = smab_cli({"index", "--config", "data/run.conf", "--set", "colour=blue"});
  EXPECT_EQ(key.code, 3);
  EXPECT_EQ(error_body(key).at("error"), "ConfigError");

  const auto scheme = run(dir_.file("x.json"), {"--set", "init_scheme=uniform"});
  EXPECT_EQ(scheme.code, 3);
  EXPECT_EQ(error_body(scheme).at("error"), "UnknownScheme");
}

TEST_F(CliTest, UnreachableOracleExitsFour) {
  const auto o = run(dir_.file("x.json"), {"--set", "classifier=http://127.0.0.1:1", "--set", "retries=0",
                                           "--set", "timeout_s=1"});
  EXPECT_EQ(o.code, 4);
  EXPECT_EQ(error_body(o).at("error"), "RemoteUnavailable");
}

// `smab mock-serve` on a free port, stopped with SIGTERM.
class MockServeProcess {
 public:
  explicit MockServeProcess(const std::string& spec) {
    int fds[2];
    if (::pipe(fds) != 0) throw std::runtime_error("pipe failed");
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&actions, fds[0]);
    std::vector<std::string> args{SMAB_CLI_PATH, "mock-serve", "--spec", spec, "--port", "0"};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    const int rc = posix_spawn(&pid_, SMAB_CLI_PATH, &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(fds[1]);
    if (rc != 0) throw std::runtime_error("spawn failed");
    std::string line;
    char c = 0;
    while (::read(fds[0], &c, 1) == 1 && c != '\n') line += c;
    ::close(fds[0]);
    const auto at = line.find("http://");
    if (at == std::string::npos) throw std::runtime_error("unexpected banner: " + line);
    url_ = line.substr(at);
  }
  ~MockServeProcess() {
    ::kill(pid_, SIGTERM);
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }

  const std::string& url() const { return url_; }

 private:
  pid_t pid_ = -1;
  std::string url_;
};

TEST_F(CliTest, RunAgainstMockServeMatchesSynthetic) {
  MockServeProcess server((kRepoRoot / "data" / "oracle.json").string());
  ASSERT_EQ(run(dir_.file("local.json")).code, 0);
  const auto o = run(dir_.file("remote.json"), {"--set", "classifier=" + server.url()});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(report(dir_.file("local.json")).at("words"), report(dir_.file("remote.json")).at("words"));
}

}  // namespace
}  // namespace smab
