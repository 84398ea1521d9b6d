// Copyright 2026 The streamgcd Authors.
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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "streamgcd/errors.h"
#include "streamgcd/scenario.h"

namespace streamgcd {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path TempDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("streamgcd_cfg_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string ConfigErrorMessage(const json& j) {
  try {
    RunConfigFromJson(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "no error";
}

TEST_CASE("run config defaults") {
  const RunConfig c;
  CHECK(c.mode == RunMode::kDean);
  CHECK(c.vfa_k == 5u);
  CHECK(c.variance_source == VarianceSource::kUnseen);
  CHECK(c.lora_rank == 5u);
  CHECK(c.lora_layers == 5u);
  CHECK_FALSE(c.egd_fallback);
  CHECK(c.stream.batch_size == 64u);
  CHECK(c.stream.base_epochs == 30u);
  CHECK(c.stream.inner_steps == 15u);
  CHECK(c.optimizer.learning_rate == 1e-3);
  CHECK(c.optimizer.weight_decay == 1e-4);
  CHECK(c.optimizer.beta1 == 0.9);
  CHECK(c.optimizer.beta2 == 0.999);
  CHECK(c.optimizer.epsilon == 1e-8);
  CHECK(c.scenario.labeled_ratio == 0.8);
  CHECK_NOTHROW(c.Validate());
}

TEST_CASE("run config json round trip") {
  RunConfig c;
  c.mode = RunMode::kFineTune;
  c.seed = 17;
  c.vfa_k = 3;
  c.variance_source = VarianceSource::kLabeled;
  c.hidden_dims = {10, 12, 14};
  c.ap_preference = -2.5;
  c.optimizer.learning_rate = 0.01;
  const json j = ToJson(c);
  CHECK(ToJson(RunConfigFromJson(j)) == j);
  const RunConfig back = RunConfigFromJson(j);
  CHECK(back.mode == RunMode::kFineTune);
  CHECK(back.hidden_dims == c.hidden_dims);
  CHECK(*back.ap_preference == -2.5);
}

TEST_CASE("missing fields keep defaults") {
  const RunConfig c = RunConfigFromJson(json::parse(R"({"vfa_k": 7})"));
  CHECK(c.vfa_k == 7u);
  CHECK(c.lora_rank == 5u);
  const RunConfig seeded = RunConfigFromJson(json::parse(R"({"seed": 4})"));
  CHECK(seeded.scenario.seed == 4u);
  CHECK(seeded.stream.seed == 4u);
}

TEST_CASE("config errors name the field") {
  CHECK(ConfigErrorMessage(json::parse(R"({"vfa": 5})")).find("vfa") !=
        std::string::npos);
  CHECK(ConfigErrorMessage(json::parse(R"({"stream": {"batch": 5}})"))
            .find("stream.batch") != std::string::npos);
  CHECK(ConfigErrorMessage(json::parse(R"({"vfa_k": "five"})")).find("vfa_k") !=
        std::string::npos);
  CHECK(ConfigErrorMessage(json::parse(R"({"vfa_k": -1})")).find("vfa_k") !=
        std::string::npos);
  CHECK(ConfigErrorMessage(json::parse(R"({"mode": "FAST"})")).find("mode") !=
        std::string::npos);
  CHECK(ConfigErrorMessage(json::parse(R"({"stream": {"batch_size": 1}})"))
            .find("batch_size") != std::string::npos);
  CHECK(ConfigErrorMessage(json::parse(R"({"scenario": {"labeled_ratio": 2}})"))
            .find("labeled_ratio") != std::string::npos);
  CHECK_THROWS_AS(ScenarioSpecFromJson(json::parse(R"({"classes": 3})")),
                  ConfigError);
}

TEST_CASE("config hash") {
  RunConfig a;
  RunConfig b = a;
  b.out_dir = "/somewhere/else";
  CHECK(ConfigHash(a) == ConfigHash(b));
  CHECK(ConfigHash(a).size() == 16u);
  b.seed = 1;
  CHECK(ConfigHash(a) != ConfigHash(b));
}

TEST_CASE("reference config loads") {
  const RunConfig c =
      LoadRunConfig(fs::path(STREAMGCD_SOURCE_DIR) / "configs" / "reference.json");
  CHECK(c.mode == RunMode::kDean);
  CHECK(c.egd_fallback);
  CHECK(c.vfa_k == 5u);
  const ScenarioSpec s =
      LoadScenarioSpec(fs::path(STREAMGCD_SOURCE_DIR) / "configs" / "demo_spec.json");
  CHECK(s.seed == 7u);
}

TEST_CASE("split directory round trip") {
  const fs::path dir = TempDir("split");
  const SplitBundle b = GenerateSynthetic(ScenarioSpec{});
  WriteSplitDirectory(dir, b);
  for (const char* f : {"base_labeled.csv", "inc_unlabeled.csv", "test_base.csv",
                        "test_inc.csv", "inc_truth.labels"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK(ReadFile(dir / "inc_unlabeled.csv").find("label") == std::string::npos);
  const SplitBundle back = LoadSplitDirectory(dir, b.n_base_classes);
  CHECK(back.base_labeled.features == b.base_labeled.features);
  CHECK(back.inc_unlabeled.features == b.inc_unlabeled.features);
  CHECK_FALSE(back.inc_unlabeled.has_labels());
  CHECK(back.inc_truth == b.inc_truth);
  CHECK(*back.test_inc.labels == *b.test_inc.labels);
}

RunConfig QuickConfig(RunMode mode, std::uint64_t seed) {
  RunConfig c = LoadRunConfig(fs::path(STREAMGCD_SOURCE_DIR) / "configs" /
                              "reference.json");
  c.mode = mode;
  c.seed = seed;
  c.scenario.seed = seed;
  c.stream.seed = seed;
  return c;
}

TEST_CASE("scenario run fills every metric and reproduces") {
  const RunConfig c = QuickConfig(RunMode::kDean, 2);
  const SplitBundle data = LoadScenarioData(c);
  const RunResult r = RunScenario(c, data);
  const SessionMetrics& m = r.metrics;
  CHECK(m.m_all.has_value());
  CHECK(m.m_old.has_value());
  CHECK(m.m_new.has_value());
  CHECK(m.forgetting.has_value());
  CHECK(m.m_ps_all.has_value());
  CHECK(*m.forgetting == doctest::Approx(*m.m_old_base - *m.m_old));
  CHECK(r.stream_pseudo_labels.size() == data.inc_unlabeled.size());
  CHECK(r.final_model.num_classes() ==
        data.n_base_classes + r.nodes_added);

  const fs::path dir = TempDir("rundir");
  WriteRunDirectory(dir, c, r);
  for (const char* f : {"config.json", "base_checkpoint.bin",
                        "final_checkpoint.bin", "batch_log.jsonl",
                        "metrics.json"}) {
    CHECK(fs::exists(dir / f));
  }
  const json metrics = json::parse(ReadFile(dir / "metrics.json"));
  for (const char* k : {"m_all", "m_old", "m_new", "F", "m_ps_all", "m_ps_old",
                        "m_ps_new", "seed", "mode", "config_hash"}) {
    CHECK(metrics.contains(k));
  }
  const RunConfig again = LoadRunConfig(dir / "config.json");
  const RunResult r2 = RunScenario(again, LoadScenarioData(again));
  CHECK(MetricsJson(r2.metrics, again) == MetricsJson(r.metrics, c));
}

TEST_CASE("fine-tune runs without energy splits") {
  const RunConfig c = QuickConfig(RunMode::kFineTune, 3);
  const RunResult r = RunScenario(c, LoadScenarioData(c));
  CHECK(r.metrics.m_all.has_value());
  for (const json& entry : r.batch_log) {
    CHECK_FALSE(entry.contains("stage1"));
  }
}

TEST_CASE("supervised runs are an upper bound for DEAN") {
  double dean = 0.0, supervised = 0.0;
  for (std::uint64_t seed : {0, 1, 2}) {
    const RunConfig d = QuickConfig(RunMode::kDean, seed);
    const RunConfig s = QuickConfig(RunMode::kSupervised, seed);
    const SplitBundle data = LoadScenarioData(d);
    dean += *RunScenario(d, data).metrics.m_all;
    supervised += *RunScenario(s, data).metrics.m_all;
  }
  CHECK(supervised >= dean);
}

// Runs the CLI binary, returning its exit code.
int Cli(const std::string& args) {
  const std::string cmd =
      std::string("\"") + STREAMGCD_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_CASE("cli generate writes identical files per seed") {
  const fs::path a = TempDir("gen_a"), b = TempDir("gen_b");
  const std::string spec =
      (fs::path(STREAMGCD_SOURCE_DIR) / "configs" / "demo_spec.json").string();
  CHECK(Cli("generate --config " + spec + " --out " + a.string()) == 0);
  CHECK(Cli("generate --config " + spec + " --out " + b.string()) == 0);
  for (const char* f : {"base_labeled.csv", "inc_unlabeled.csv", "test_base.csv",
                        "test_inc.csv"}) {
    REQUIRE(fs::exists(a / f));
    CHECK(ReadFile(a / f) == ReadFile(b / f));
  }
}

TEST_CASE("cli exit codes") {
  const fs::path dir = TempDir("exit");
  std::ofstream(dir / "bad.json") << R"({"n_base_classes": "eight"})";
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(Cli("generate --config " + (dir / "bad.json").string() + " --out " +
            (dir / "o").string()) == 2);
  CHECK(Cli("generate --config " + (dir / "broken.json").string() + " --out " +
            (dir / "o").string()) == 2);
  CHECK(Cli("run --config " + (dir / "missing.json").string()) == 2);
  CHECK(Cli("run --mode FAST") == 2);
  CHECK(Cli("frobnicate") == 2);
  CHECK(Cli("") == 2);
  CHECK(Cli("--help") == 0);
}

TEST_CASE("cli run honours overrides") {
  const fs::path dir = TempDir("run");
  const std::string cfg =
      (fs::path(STREAMGCD_SOURCE_DIR) / "configs" / "reference.json").string();
  REQUIRE(Cli("run --config " + cfg + " --seed 5 --k 3 --out " +
              (dir / "dean").string()) == 0);
  const json m = json::parse(ReadFile(dir / "dean" / "metrics.json"));
  CHECK(m["seed"] == 5);
  CHECK(m["mode"] == "DEAN");
  const json c = json::parse(ReadFile(dir / "dean" / "config.json"));
  CHECK(c["vfa_k"] == 3);

  REQUIRE(Cli("run --config " + cfg + " --mode FINE_TUNE --out " +
              (dir / "ft").string()) == 0);
  const json ft = json::parse(ReadFile(dir / "ft" / "metrics.json"));
  CHECK(ft["mode"] == "FINE_TUNE");
  CHECK(ft.contains("F"));

  const fs::path data = TempDir("evaldata");
  REQUIRE(Cli("generate --out " + data.string() + " --seed 5") == 0);
  CHECK(Cli("eval --checkpoint " + (dir / "dean" / "final_checkpoint.bin").string() +
            " --data " + data.string() + " --n-base 8") == 0);
  CHECK(Cli("eval --checkpoint " + (dir / "nope.bin").string() + " --data " +
            data.string() + " --n-base 8") == 2);
}

}  // namespace
}  // namespace streamgcd
