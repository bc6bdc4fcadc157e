// Copyright 2026 The mlosbench Authors.
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

// mlos: command line driver for the benchmark pipeline.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mlos/common.h"
#include "mlos/experiment.h"
#include "mlos/pipeline.h"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfigError = 2, kMissingArtifact = 3 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> variant;
  std::string model;
  std::string output;
  std::vector<std::string> overrides;
  bool force = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "JSON config file");
  cmd->add_option("--seed", o.seed, "base seed (variant K uses seed + K - 1)");
  cmd->add_option("--variant", o.variant, "restrict to dataset variant K (1-based)");
  cmd->add_option("--model", o.model, "restrict to one model")
      ->check(CLI::IsMember({"multi_label", "estimates_pit", "oracle_pit", "combinatorial", "oracle_mc"}));
  cmd->add_option("--output", o.output, "run directory (overrides output_dir)");
  cmd->add_option("--set", o.overrides, "override a config key, e.g. --set dataset.train=500")->allow_extra_args(false);
  cmd->add_flag("--force", o.force, "recompute units even when up to date");
  cmd->add_flag("-q,--quiet", o.quiet, "suppress progress lines");
}

mlos::ExperimentConfig resolve_config(const Options& o) {
  std::vector<std::string> overrides = o.overrides;
  if (o.seed) overrides.push_back("seed=" + std::to_string(*o.seed));
  if (!o.output.empty()) overrides.push_back("output_dir=\"" + o.output + "\"");
  return mlos::ExperimentConfig::load(o.config, overrides);
}

int run(const std::string& command, const Options& o) {
  const mlos::ExperimentConfig config = resolve_config(o);
  if (command == "print-config") {
    std::cout << config.to_json().dump(2) << "\n";
    return kOk;
  }
  mlos::Experiment experiment(config, o.quiet ? nullptr : &std::cerr);
  mlos::StageFilter filter;
  filter.variant = o.variant;
  if (!o.model.empty()) filter.model = mlos::parse_model(o.model);

  const mlos::StageResult r = command == "run-all" ? experiment.run_all(filter, o.force)
                                                   : experiment.run_stage(mlos::parse_stage(command), filter, o.force);
  if (!o.quiet)
    std::cerr << command << ": " << r.ran << " unit(s) run, " << r.skipped << " up to date in "
              << experiment.root().string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mlos: multi-label open-set classification benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MLOS_VERSION);

  Options options;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"plan", "sample class splits and soundscape specifications"},
      {"synth", "render clip features, oracle sources and estimates"},
      {"train", "train the classifiers"},
      {"calibrate", "fit OpenMax mean activations and distance tails"},
      {"tune", "select MSP and OpenMax hyperparameters on the tuning pool"},
      {"evaluate", "score the test pool"},
      {"report", "aggregate variants into result tables"},
      {"run-all", "run every stage in order"},
      {"print-config", "print the resolved configuration"},
  };
  std::string chosen;
  for (const auto& [name, help] : commands) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, options);
    cmd->callback([&chosen, n = name] { chosen = n; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    return run(chosen, options);
  } catch (const mlos::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const mlos::MissingArtifactError& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return kMissingArtifact;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
