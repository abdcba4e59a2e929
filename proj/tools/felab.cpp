// Copyright 2026 The felab Authors
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

// felab <experiment> --config FILE [--seed S] [--out DIR] [--paths N]
//       [--profile desk|large] [--workers W]
//
// Exit status: 0 if every verdict passes, 1 if any fails, 2 on a
// configuration or I/O error, 3 on a numerical abort (blow-up).

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "felab/config.hpp"
#include "felab/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stochastic fractionally dissipated 2D Euler lab"};
  app.require_subcommand(1);

  std::string config_path, out, profile;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<unsigned> workers;
  for (const auto& kind : felab::experiment_kinds()) {
    auto* sub = app.add_subcommand(kind, "run the " + kind + " experiment");
    sub->add_option("--config", config_path, "TOML-style config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--paths", paths, "ensemble size")->check(CLI::PositiveNumber);
    sub->add_option("--profile", profile, "parameter profile")->check(CLI::IsMember({"desk", "large"}));
    sub->add_option("--workers", workers, "worker threads (0: all cores)");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string kind = app.get_subcommands().front()->get_name();

  felab::ExperimentConfig cfg;
  try {
    cfg.kind = kind;
    cfg.out = "felab_out/" + kind;
    if (!profile.empty()) felab::apply_profile(cfg, profile);
    if (!config_path.empty()) {
      felab::apply_document(cfg, felab::ConfigDocument::load(config_path));
      if (cfg.kind != kind) {
        throw felab::ConfigError("config declares experiment '" + cfg.kind + "' but '" + kind +
                                 "' was requested");
      }
    }
    if (seed) cfg.sim.seed = *seed;
    if (!out.empty()) cfg.out = out;
    if (paths) cfg.paths = *paths;
    if (workers) cfg.workers = *workers;
    cfg.validate();
  } catch (const felab::Error& e) {
    std::cerr << "felab: " << e.what() << "\n";
    return 2;
  }

  try {
    const auto rep = felab::run_experiment(cfg);
    for (const auto& v : rep.verdicts) {
      std::cout << (v.pass ? "PASS " : "FAIL ") << v.name << ": " << v.target << "\n";
    }
    for (const auto& n : rep.notes) std::cout << "note: " << n << "\n";
    std::cout << "report: " << cfg.out << "/report.json (" << rep.wall_seconds << " s)\n";
    return rep.all_pass() ? 0 : 1;
  } catch (const felab::BlowUp& e) {
    std::cerr << "felab: numerical blow-up: " << e.what() << "\n";
    return 3;
  } catch (const felab::Error& e) {
    std::cerr << "felab: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "felab: " << e.what() << "\n";
    return 2;
  }
}
