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

// streamgcd: generate scenarios, run sessions, sweep ablations, evaluate
// checkpoints.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "streamgcd/checkpoint.h"
#include "streamgcd/errors.h"
#include "streamgcd/scenario.h"

namespace {

namespace fs = std::filesystem;
using streamgcd::RunConfig;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::size_t> k;
  std::optional<std::string> variance_source;
  std::optional<std::size_t> lora_rank;
  std::optional<std::size_t> inner_steps;
  std::optional<std::string> out;
};

void AddOverrideFlags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Run and scenario seed");
  cmd->add_option("--mode", o.mode, "DEAN, FINE_TUNE or SUPERVISED");
  cmd->add_option("--k", o.k, "Augmented draws per unseen feature");
  cmd->add_option("--variance-source", o.variance_source,
                  "UNSEEN, BATCH or LABELED");
  cmd->add_option("--lora-rank", o.lora_rank, "Adapter rank");
  cmd->add_option("--inner-steps", o.inner_steps,
                  "Gradient steps per stream batch");
  cmd->add_option("--out", o.out, "Output directory");
}

// Flags override the config file, which overrides built-in defaults.
RunConfig ResolveConfig(const std::string& path, const Overrides& o) {
  nlohmann::json j = nlohmann::json::object();
  if (!path.empty()) {
    j = streamgcd::ToJson(streamgcd::LoadRunConfig(path));
  } else {
    j = streamgcd::ToJson(RunConfig{});
  }
  if (o.seed) {
    j["seed"] = *o.seed;
    j["scenario"]["seed"] = *o.seed;
  }
  if (o.mode) j["mode"] = *o.mode;
  if (o.k) j["vfa_k"] = *o.k;
  if (o.variance_source) j["variance_source"] = *o.variance_source;
  if (o.lora_rank) j["lora_rank"] = *o.lora_rank;
  if (o.inner_steps) j["stream"]["inner_steps"] = *o.inner_steps;
  if (o.out) j["out_dir"] = *o.out;
  return streamgcd::RunConfigFromJson(j);
}

std::string Pct(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * *v);
  return buf;
}

void PrintRow(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), i == 0 ? "%-12s" : "%10s",
                  cells[i].c_str());
    line += buf;
  }
  std::cout << line << "\n";
}

void Progress(const std::string& msg) { std::cerr << msg << "\n"; }

int CmdGenerate(const std::string& spec_path, const std::string& out,
                std::optional<std::uint64_t> seed) {
  streamgcd::ScenarioSpec spec;
  if (!spec_path.empty()) spec = streamgcd::LoadScenarioSpec(spec_path);
  if (seed) spec.seed = *seed;
  spec.Validate();
  const streamgcd::SplitBundle bundle = streamgcd::GenerateSynthetic(spec);
  streamgcd::WriteSplitDirectory(out, bundle);
  std::ofstream echo(fs::path(out) / "spec.json");
  echo << streamgcd::ToJson(spec).dump(2) << "\n";
  Progress("wrote " + std::to_string(bundle.base_labeled.size()) +
           " labeled, " + std::to_string(bundle.inc_unlabeled.size()) +
           " stream, " +
           std::to_string(bundle.test_base.size() + bundle.test_inc.size()) +
           " test rows to " + out);
  return kExitOk;
}

int CmdRun(const RunConfig& cfg) {
  const streamgcd::SplitBundle data = streamgcd::LoadScenarioData(cfg);
  const streamgcd::RunResult result =
      streamgcd::RunScenario(cfg, data, Progress);
  if (!cfg.out_dir.empty()) {
    streamgcd::WriteRunDirectory(cfg.out_dir, cfg, result);
    Progress("run directory: " + cfg.out_dir.string());
  }
  const auto& m = result.metrics;
  PrintRow({"mode", "M_all", "M_old", "M_new", "F"});
  PrintRow({streamgcd::ToString(cfg.mode), Pct(m.m_all), Pct(m.m_old),
            Pct(m.m_new), Pct(m.forgetting)});
  return kExitOk;
}

int CmdAblate(RunConfig cfg, const std::string& sweep,
              const std::vector<std::uint64_t>& seeds) {
  std::vector<std::string> settings;
  if (sweep == "k") {
    settings = {"0", "1", "3", "5", "7", "9"};
  } else if (sweep == "variance") {
    settings = {"UNSEEN", "BATCH", "LABELED"};
  } else {
    throw streamgcd::ConfigError("--sweep must be 'k' or 'variance'");
  }
  const std::vector<std::uint64_t> run_seeds =
      seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : seeds;
  const fs::path out_root = cfg.out_dir;
  nlohmann::json rows = nlohmann::json::array();
  PrintRow({"setting", "seed", "PS_all", "PS_old", "PS_new", "M_all", "M_old",
            "M_new", "F"});
  for (const std::string& setting : settings) {
    for (std::uint64_t seed : run_seeds) {
      RunConfig run = cfg;
      if (sweep == "k") {
        run.vfa_k = std::stoul(setting);
      } else {
        run.variance_source = streamgcd::VarianceSourceFromString(setting);
      }
      run.seed = seed;
      run.stream.seed = seed;
      run.scenario.seed = seed;
      run.out_dir.clear();
      Progress(sweep + "=" + setting + " seed " + std::to_string(seed));
      const streamgcd::SplitBundle data = streamgcd::LoadScenarioData(run);
      const streamgcd::RunResult result = streamgcd::RunScenario(run, data);
      const auto& m = result.metrics;
      PrintRow({setting, std::to_string(seed), Pct(m.m_ps_all),
                Pct(m.m_ps_old), Pct(m.m_ps_new), Pct(m.m_all), Pct(m.m_old),
                Pct(m.m_new), Pct(m.forgetting)});
      nlohmann::json row = streamgcd::MetricsJson(m, run);
      row["setting"] = setting;
      rows.push_back(row);
    }
  }
  if (!out_root.empty()) {
    fs::create_directories(out_root);
    std::ofstream out(out_root / ("ablate_" + sweep + ".json"));
    out << rows.dump(2) << "\n";
  }
  return kExitOk;
}

int CmdEval(const std::string& checkpoint, const std::string& data_dir,
            std::size_t n_base) {
  const streamgcd::Model model = streamgcd::LoadCheckpoint(checkpoint);
  const streamgcd::SplitBundle data =
      streamgcd::LoadSplitDirectory(data_dir, n_base);
  const streamgcd::ClusteringAccuracy acc = streamgcd::EvaluateModel(
      model, data.test_base, data.test_inc, n_base);
  PrintRow({"checkpoint", "M_all", "M_old", "M_new"});
  PrintRow({fs::path(checkpoint).filename().string(), Pct(acc.all),
            Pct(acc.old_classes), Pct(acc.new_classes)});
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online continual category discovery on feature streams"};
  app.require_subcommand(1);

  std::string gen_spec;
  std::string gen_out;
  std::optional<std::uint64_t> gen_seed;
  CLI::App* gen = app.add_subcommand("generate", "Write a synthetic scenario");
  gen->add_option("--config", gen_spec, "Scenario spec JSON");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Scenario seed");

  std::string run_config;
  Overrides run_over;
  CLI::App* run = app.add_subcommand("run", "Run one session end to end");
  run->add_option("--config", run_config, "Run config JSON");
  AddOverrideFlags(run, run_over);

  std::string ab_config;
  Overrides ab_over;
  std::string ab_sweep = "k";
  std::vector<std::uint64_t> ab_seeds;
  CLI::App* ablate = app.add_subcommand("ablate", "Sweep K or variance source");
  ablate->add_option("--config", ab_config, "Run config JSON");
  ablate->add_option("--sweep", ab_sweep, "k or variance")
      ->check(CLI::IsMember({"k", "variance"}));
  ablate->add_option("--seeds", ab_seeds, "Seeds shared by every setting")
      ->delimiter(',');
  AddOverrideFlags(ablate, ab_over);

  std::string ev_checkpoint;
  std::string ev_data;
  std::size_t ev_base = 0;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", ev_checkpoint, "Checkpoint file")
      ->required();
  eval->add_option("--data", ev_data, "Split directory from `generate`")
      ->required();
  eval->add_option("--n-base", ev_base, "Number of known classes")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return CmdGenerate(gen_spec, gen_out, gen_seed);
    if (run->parsed()) return CmdRun(ResolveConfig(run_config, run_over));
    if (ablate->parsed()) {
      return CmdAblate(ResolveConfig(ab_config, ab_over), ab_sweep, ab_seeds);
    }
    if (eval->parsed()) return CmdEval(ev_checkpoint, ev_data, ev_base);
  } catch (const streamgcd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
