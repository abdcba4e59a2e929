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

// Acceptance harness: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,4,11] [--out DIR]
//
// Criteria 5 to 10 read their parameters from configs/*.toml so the same runs
// can be reproduced with the felab CLI. Exit status is 0 only if every
// selected criterion passes.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "felab/config.hpp"
#include "felab/experiments.hpp"

namespace fs = std::filesystem;
using namespace felab;

namespace {

// Tolerances and budgets, as fixed by the acceptance contract.
constexpr double kLinearTol = 1e-12;
constexpr int kLinearSteps = 1000;
constexpr double kSelfCancelTol = 1e-8;
constexpr double kLpCancelTol = 1e-6;
constexpr int kCancelFields = 50;
constexpr int kCancelGrid = 128;
constexpr int kFpRange = 100;
constexpr int kFpDen = 20;
constexpr int kPoincareCases = 200;
constexpr double kTranslationTol = 1e-10;
constexpr double kMinOrder = 0.9;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string out_root = "acceptance_out";

ExperimentConfig load(const std::string& name) {
  ExperimentConfig c;
  apply_document(c, ConfigDocument::load(std::string(FELAB_SOURCE_DIR) + "/configs/" + name + ".toml"));
  c.out = (fs::path(out_root) / name).string();
  c.validate();
  return c;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

// Verdicts of `rep` named in `names`, all required to pass.
Outcome from_verdicts(const ExperimentReport& rep, const std::vector<std::string>& names) {
  Outcome o{true, ""};
  for (const auto& n : names) {
    const auto& v = rep.verdict(n);
    o.pass = o.pass && v.pass;
    o.detail += (o.detail.empty() ? "" : "; ") + n + "=" + (v.pass ? "ok" : "fail " + v.detail.dump());
  }
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome linear_core() {
  double worst = 0.0;
  for (double gamma : {0.25, 0.5, 1.0, 2.0}) {
    SimParams p;
    p.n = 32;
    p.gamma = gamma;
    p.dt = 1e-3;
    Integrator integ(p, ForcingConfig{});
    for (auto [k1, k2] : {std::pair{1, 0}, std::pair{3, 2}, std::pair{-4, 7}}) {
      TrajectoryState s{0.0, trig_mode(integ.grid(), k1, k2, true), 0, {}};
      const double rate = std::pow(std::hypot(k1, k2), gamma);
      const auto c0 = s.omega.coeff(k1, k2);
      for (int i = 0; i < kLinearSteps; ++i) {
        integ.step_main(s);
        const auto c = s.omega.coeff(k1, k2);
        const auto expect = c0 * std::exp(-rate * s.t);
        worst = std::max(worst, std::abs(c - expect) / std::abs(expect));
      }
    }
  }
  return {worst <= kLinearTol, "max relative error " + fmt(worst)};
}

Outcome cancellations() {
  const Grid2D g(kCancelGrid);
  PhiloxEngine rng(20260101);
  double self = 0.0, lp = 0.0;
  for (int trial = 0; trial < kCancelFields; ++trial) {
    // Band small enough that B(w, w) and its products are resolved exactly.
    const auto w = random_field(g, g.dealias_cutoff() / 2, rng, 1.0);
    const auto B = bilinear_B(w, w);
    self = std::max(self, std::abs(inner(B, w)) / std::pow(sobolev_norm(w, 0.0), 3));
    for (int p : {4, 6}) {
      const int band = std::min(g.dealias_cutoff() / 2, (kCancelGrid - 1) / (p + 1));
      const auto v = random_field(g, band, rng, 1.0);
      const auto Bv = to_physical(bilinear_B(v, v));
      const auto vp = to_physical(v);
      PhysicalField prod(g), pow(g);
      for (std::size_t j = 0; j < prod.values.size(); ++j) {
        pow.values[j] = ipow(vp.values[j], p - 1);
        prod.values[j] = Bv.values[j] * pow.values[j];
      }
      lp = std::max(lp, std::abs(integrate(prod)) / (lp_norm(Bv, 2.0) * lp_norm(pow, 2.0)));
    }
  }
  return {self <= kSelfCancelTol && lp <= kLpCancelTol,
          "max self-transport ratio " + fmt(self) + ", max L^p relative " + fmt(lp)};
}

Outcome scalar_inequality() {
  const auto s = fp_sweep(kFpRange, kFpDen);
  const bool pass = s.violations_exact == 0 && s.violations_float == 0 && s.equality_failures == 0;
  std::string ex = s.examples.empty() ? "" : ", first " + s.examples[0].dump();
  return {pass, std::to_string(s.checked) + " points, " + std::to_string(s.violations_exact) +
                    " exact violations, b=0 equality failures " + std::to_string(s.equality_failures) + ex};
}

Outcome poincare() {
  const auto s = poincare_sweep(kPoincareCases, 64, 5, 1);
  return {s.negative == 0 && s.max_translation_rel <= kTranslationTol,
          std::to_string(s.negative) + " negative margins, min relative margin " + fmt(s.min_margin_rel) +
              ", max translation change " + fmt(s.max_translation_rel)};
}

Outcome linearization() {
  const auto cfg = load("linearization");
  const auto r = linearization_consistency(cfg, 0, cfg.lin_T, cfg.lin_h);
  return {r.min_order >= kMinOrder, "orders " + r.to_json()["orders"].dump() + ", errors " +
                                        r.to_json()["relative_error"].dump()};
}

Outcome control_decay() {
  const auto rep = run_experiment(load("control-decay"));
  return from_verdicts(rep, {"hm1_decay_monotone_in_N", "hr_decay_after_T_gamma"});
}

Outcome exp_moment() {
  const auto rep = run_experiment(load("exp-moment"));
  return from_verdicts(rep, {"pointwise_stable", "pointwise_linear_in_T", "integral_rate_sigma_independent"});
}

Outcome moment_growth() {
  const auto rep = run_experiment(load("moment-growth"));
  return from_verdicts(rep, {"linear_envelope", "smoothing_gain"});
}

Outcome irreducibility() {
  const auto rep = run_experiment(load("irreducibility"));
  return from_verdicts(rep, {"hits_small_ball"});
}

Outcome ergodicity() {
  const auto rep = run_experiment(load("ergodicity"));
  return from_verdicts(rep, {"time_averages_agree"});
}

Outcome engineering() {
  // Checkpoint mid-run, resume in a fresh integrator, compare bitwise.
  ExperimentConfig c;
  c.sim.n = 64;
  c.sim.dt = 1e-3;
  c.forcing.radius = 3;
  Integrator integ(c.sim, c.forcing_config());
  TrajectoryState full{0.0, initial_field(c, integ.grid(), 0), 0, {c.sim.seed, 0}};
  TrajectoryState part = full;
  for (int k = 0; k < 400; ++k) integ.step_main(full);
  for (int k = 0; k < 150; ++k) integ.step_main(part);
  const auto dir = fs::path(out_root) / "engineering";
  fs::create_directories(dir);
  save_checkpoint((dir / "mid.bin").string(), part, c.sim);
  Integrator fresh(c.sim, c.forcing_config());
  auto resumed = load_checkpoint((dir / "mid.bin").string(), fresh.grid());
  save_checkpoint((dir / "mid_again.bin").string(), resumed, c.sim);
  for (int k = 150; k < 400; ++k) fresh.step_main(resumed);
  const bool resume_ok = resumed.omega == full.omega && resumed.t == full.t &&
                         slurp(dir / "mid.bin") == slurp(dir / "mid_again.bin");

  // Same-seed reruns of every experiment kind, compared CSV by CSV.
  long files = 0, mismatched = 0;
  for (const auto& kind : experiment_kinds()) {
    ExperimentConfig e;
    e.kind = kind;
    e.sim.n = 32;
    e.sim.dt = 2e-3;
    e.sim.T = 1.0;
    e.sim.gamma = 0.5;
    e.paths = 3;
    e.plots = false;
    e.horizons = {0.5, 1.0};
    e.directions = 2;
    e.forcing.radius = 2;
    e.poincare_cases = 10;
    e.commutator_cases = 2;
    e.fp_range = 10;
    e.control_N = {1, 2};
    e.out = (dir / (kind + "_a")).string();
    const auto a = run_experiment(e);
    e.out = (dir / (kind + "_b")).string();
    const auto b = run_experiment(e);
    for (const auto& [name, path] : a.series) {
      ++files;
      if (!b.series.count(name) || slurp(path) != slurp(b.series.at(name))) ++mismatched;
    }
  }
  return {resume_ok && mismatched == 0 && files > 0,
          std::string("checkpoint resume ") + (resume_ok ? "bit-exact" : "differs") + ", " +
              std::to_string(files) + " CSVs rerun, " + std::to_string(mismatched) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"felab acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  app.add_option("--out", out_root, "directory for experiment outputs");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all = {
      {1, "linear core exactness", 1, linear_core},
      {2, "nonlinear cancellations", 30, cancellations},
      {3, "scalar inequality grid", 5, scalar_inequality},
      {4, "fractional Lp Poincare", 120, poincare},
      {5, "linearization consistency", 120, linearization},
      {6, "control decay", 1200, control_decay},
      {7, "exponential moments", 1800, exp_moment},
      {8, "moment growth linearity", 1800, moment_growth},
      {9, "weak irreducibility", 1200, irreducibility},
      {10, "unique ergodicity diagnostic", 1800, ergodicity},
      {11, "checkpoint and rerun bit-exactness", 300, engineering},
  };
  const std::set<int> wanted(only.begin(), only.end());
  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail
              << " [" << fmt(secs) << " s of " << c.budget_s << " s" << (in_time ? "" : ", over budget")
              << "]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
