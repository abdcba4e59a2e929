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

#pragma once

// Experiment configuration. Files use a small TOML subset:
//
//   document := line*
//   line     := ws (comment | section | pair)? ws comment? '\n'
//   section  := '[' name ']'
//   pair     := name ws '=' ws value
//   value    := number | 'true' | 'false' | '"' chars '"' | '[' (number (',' number)*)? ']'
//   comment  := '#' any*
//
// Keys inside a section are addressed as "section.key". Unknown keys are
// rejected so typos cannot silently fall back to defaults.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "felab/dynamics.hpp"
#include "felab/error.hpp"
#include "felab/forcing.hpp"
#include "felab/observables.hpp"

namespace felab {

class ConfigDocument {
 public:
  struct Value {
    enum class Kind { Number, Bool, String, Array } kind = Kind::Number;
    double number = 0.0;
    bool boolean = false;
    std::string text;
    std::vector<double> array;
    int line = 0;
  };

  static ConfigDocument parse(const std::string& source) {
    ConfigDocument doc;
    std::istringstream in(source);
    std::string raw, section;
    int lineno = 0;
    while (std::getline(in, raw)) {
      ++lineno;
      std::string line = strip(strip_comment(raw));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail(lineno, "unterminated section header");
        section = strip(line.substr(1, line.size() - 2));
        if (!valid_name(section)) fail(lineno, "bad section name '" + section + "'");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(lineno, "expected key = value");
      const std::string key = strip(line.substr(0, eq));
      if (!valid_name(key)) fail(lineno, "bad key '" + key + "'");
      const std::string full = section.empty() ? key : section + "." + key;
      if (doc.values_.count(full)) fail(lineno, "duplicate key '" + full + "'");
      Value v = parse_value(strip(line.substr(eq + 1)), lineno);
      v.line = lineno;
      doc.values_.emplace(full, std::move(v));
    }
    return doc;
  }

  static ConfigDocument load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::optional<double> number(const std::string& key) const {
    const Value* v = find(key, Value::Kind::Number, "a number");
    if (!v) return std::nullopt;
    return v->number;
  }

  std::optional<std::int64_t> integer(const std::string& key) const {
    const auto d = number(key);
    if (!d) return std::nullopt;
    if (*d != std::floor(*d) || std::abs(*d) > 9.0e15) {
      throw ConfigError("config key '" + key + "' must be an integer");
    }
    return static_cast<std::int64_t>(*d);
  }

  std::optional<bool> boolean(const std::string& key) const {
    const Value* v = find(key, Value::Kind::Bool, "true or false");
    if (!v) return std::nullopt;
    return v->boolean;
  }

  std::optional<std::string> string(const std::string& key) const {
    const Value* v = find(key, Value::Kind::String, "a quoted string");
    if (!v) return std::nullopt;
    return v->text;
  }

  std::optional<std::vector<double>> array(const std::string& key) const {
    const Value* v = find(key, Value::Kind::Array, "an array of numbers");
    if (!v) return std::nullopt;
    return v->array;
  }

  /// Keys that no getter has read.
  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) out.push_back(k);
    }
    return out;
  }

 private:
  const Value* find(const std::string& key, Value::Kind kind, const char* expect) const {
    auto it = values_.find(key);
    if (it == values_.end()) return nullptr;
    used_.insert(key);
    if (it->second.kind != kind) {
      fail(it->second.line, "key '" + key + "' must be " + expect);
    }
    return &it->second;
  }

  [[noreturn]] static void fail(int line, const std::string& what) {
    throw ConfigError("config line " + std::to_string(line) + ": " + what);
  }

  static std::string strip(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  }

  static bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
    }
    return true;
  }

  static double parse_number(const std::string& s, int line) {
    std::size_t used = 0;
    double d = 0.0;
    try {
      d = std::stod(s, &used);
    } catch (const std::exception&) {
      fail(line, "bad number '" + s + "'");
    }
    if (used != s.size() || !std::isfinite(d)) fail(line, "bad number '" + s + "'");
    return d;
  }

  static Value parse_value(const std::string& s, int line) {
    Value v;
    if (s.empty()) fail(line, "missing value");
    if (s == "true" || s == "false") {
      v.kind = Value::Kind::Bool;
      v.boolean = s == "true";
    } else if (s.front() == '"') {
      if (s.size() < 2 || s.back() != '"') fail(line, "unterminated string");
      v.kind = Value::Kind::String;
      v.text = s.substr(1, s.size() - 2);
      if (v.text.find('"') != std::string::npos) fail(line, "embedded quote in string");
    } else if (s.front() == '[') {
      if (s.back() != ']') fail(line, "unterminated array");
      v.kind = Value::Kind::Array;
      const std::string body = strip(s.substr(1, s.size() - 2));
      if (!body.empty()) {
        std::istringstream items(body);
        std::string item;
        while (std::getline(items, item, ',')) v.array.push_back(parse_number(strip(item), line));
      }
    } else {
      v.number = parse_number(s, line);
    }
    return v;
  }

  std::map<std::string, Value> values_;
  mutable std::set<std::string> used_;
};

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds{"moment-growth",  "exp-moment",     "smoothing",
                                              "cont-dependence", "control-decay", "irreducibility",
                                              "inequalities",   "ergodicity"};
  return kinds;
}

inline bool is_experiment_kind(const std::string& k) {
  for (const auto& x : experiment_kinds()) {
    if (x == k) return true;
  }
  return false;
}

struct ForcingSpec {
  std::string kind = "ball";  // ball | modes | none
  int radius = 2;
  double exponent = 1.0;
  double amplitude = 0.25;
  std::vector<double> modes;  // flattened (k1, k2, q) triples

  ForcingConfig build() const {
    if (kind == "none") return ForcingConfig{};
    if (kind == "ball") return ForcingConfig::ball(radius, exponent, amplitude);
    if (kind == "modes") {
      if (modes.size() % 3 != 0) throw ConfigError("forcing.modes needs (k1, k2, q) triples");
      std::vector<ForcedMode> m;
      for (std::size_t i = 0; i < modes.size(); i += 3) {
        m.push_back({static_cast<int>(modes[i]), static_cast<int>(modes[i + 1]), modes[i + 2]});
      }
      return ForcingConfig::explicit_modes(std::move(m));
    }
    throw ConfigError("forcing.kind must be ball, modes or none");
  }
};

/// Initial vorticity: random phases on 0 < max|k_i| <= band with magnitude
/// ~|k|^-decay, rescaled to ||omega_0||_{H^r} = norm when norm > 0.
struct InitSpec {
  std::string kind = "random";  // random | zero
  int band = 4;
  double decay = 2.0;
  double norm = 1.0;
};

struct ExperimentConfig {
  std::string kind = "moment-growth";
  SimParams sim;
  ForcingSpec forcing;
  InitSpec init;
  std::size_t paths = 32;
  unsigned workers = 0;  // 0: hardware concurrency
  std::string out = "felab_out";
  double sample_dt = 0.1;
  bool plots = true;

  SmoothingSchedule schedule{1.0, 0.5};
  double q = 2.0;

  // exp-moment
  int p = 4;
  std::vector<double> kappa_fractions{0.25, 0.5, 1.0};
  double verdict_fraction = 0.5;
  std::vector<double> amplitude_factors{1.0, 2.0};
  std::vector<double> horizons{5.0, 10.0, 20.0};
  double ci_fraction = 0.5;
  double rate_ratio = 2.0;

  // cont-dependence
  std::vector<double> h{1e-2, 1e-3, 1e-4};
  double h_ratio_tol = 0.2;
  std::vector<double> lin_h{1e-3, 1e-4, 1e-5};
  double lin_T = 0.5;
  double lin_order = 0.9;

  // control-decay
  std::vector<double> control_N{2, 4, 8};
  int directions = 8;
  double budget_stability = 1e-2;

  // irreducibility
  double R = 5.0;
  std::vector<double> eps_noise{1.0, 0.25, 0.0625};
  double hit_fraction = 0.1;
  double hit_probability = 0.9;
  double rate_band_lo = 0.2;
  double rate_band_hi = 5.0;

  // ergodicity
  std::uint64_t seed_b = 0;  // 0: seed + 1

  // inequalities
  int fp_range = 100;
  int fp_den = 20;
  int poincare_cases = 200;
  int poincare_band = 5;
  double translation_tol = 1e-10;
  int commutator_cases = 20;
  double commutator_s = 2.5;
  double commutator_eps = 0.25;

  ForcingConfig forcing_config() const { return forcing.build(); }

  std::uint64_t second_seed() const { return seed_b ? seed_b : sim.seed + 1; }

  void validate() const {
    if (!is_experiment_kind(kind)) throw ConfigError("unknown experiment kind '" + kind + "'");
    sim.validate();
    if (sim.n < 8 || sim.n % 2 != 0) throw ConfigError("sim.n must be even and >= 8");
    if (paths < 1) throw ConfigError("ensemble size must be >= 1");
    if (!(sample_dt > 0.0)) throw ConfigError("sample_dt must be positive");
    schedule.validate();
    const Grid2D g = sim.make_grid();
    const auto f = forcing_config();
    if (f.max_component() > g.dealias_cutoff()) {
      throw ConfigError("forced modes exceed the grid cutoff " + std::to_string(g.dealias_cutoff()));
    }
    if (init.kind != "random" && init.kind != "zero") throw ConfigError("init.kind must be random or zero");
    if (init.kind == "random" && init.band < 1) throw ConfigError("init.band must be >= 1");
    if (kind == "control-decay") {
      if (control_N.empty()) throw ConfigError("control.N must list at least one cutoff");
      for (double N : control_N) {
        if (N < 1 || N != std::floor(N)) throw ConfigError("control.N entries must be positive integers");
        if (N > g.dealias_cutoff()) {
          throw ConfigError("control cutoff N=" + std::to_string(static_cast<int>(N)) +
                            " exceeds grid cutoff " + std::to_string(g.dealias_cutoff()));
        }
      }
      if (directions < 1) throw ConfigError("control.directions must be >= 1");
    }
    if (kind == "exp-moment") {
      if (p < 2 || p % 2 != 0) throw ConfigError("exp.p must be even and >= 2");
      if (horizons.empty() || amplitude_factors.empty()) {
        throw ConfigError("exp.horizons and exp.amplitude_factors must be nonempty");
      }
      for (double hz : horizons) {
        if (!(hz > 0.0) || hz > sim.T + 1e-12) throw ConfigError("exp.horizons must lie in (0, sim.T]");
      }
    }
    if (kind == "cont-dependence" && (h.size() < 2 || lin_h.size() < 2)) {
      throw ConfigError("cont.h and cont.lin_h need at least two values");
    }
    if (kind == "irreducibility" && eps_noise.empty()) {
      throw ConfigError("irreducibility.eps_noise must be nonempty");
    }
    if (kind == "inequalities" && (fp_range < 0 || fp_den < 1 || poincare_cases < 1)) {
      throw ConfigError("bad inequality sweep sizes");
    }
  }

  json to_json() const {
    json j;
    j["experiment"] = kind;
    j["seed"] = sim.seed;
    j["paths"] = paths;
    j["workers"] = workers;
    j["out"] = out;
    j["sample_dt"] = sample_dt;
    j["plots"] = plots;
    j["sim"] = {{"gamma", sim.gamma}, {"r", sim.r},   {"n", sim.n},
                {"dt", sim.dt},       {"T", sim.T},   {"dealias", sim.dealias},
                {"blowup_bound", sim.blowup_bound}};
    j["forcing"] = {{"kind", forcing.kind},
                    {"radius", forcing.radius},
                    {"exponent", forcing.exponent},
                    {"amplitude", forcing.amplitude},
                    {"modes", forcing.modes}};
    j["init"] = {{"kind", init.kind}, {"band", init.band}, {"decay", init.decay}, {"norm", init.norm}};
    j["schedule"] = {{"m", schedule.m}, {"T_m", schedule.T_m}};
    j["moments"] = {{"q", q}};
    j["exp"] = {{"p", p},
                {"kappa_fractions", kappa_fractions},
                {"verdict_fraction", verdict_fraction},
                {"amplitude_factors", amplitude_factors},
                {"horizons", horizons},
                {"ci_fraction", ci_fraction},
                {"rate_ratio", rate_ratio}};
    j["cont"] = {{"h", h},
                 {"h_ratio_tol", h_ratio_tol},
                 {"lin_h", lin_h},
                 {"lin_T", lin_T},
                 {"lin_order", lin_order}};
    j["control"] = {{"N", control_N}, {"directions", directions}, {"budget_stability", budget_stability}};
    j["irreducibility"] = {{"R", R},
                           {"eps_noise", eps_noise},
                           {"hit_fraction", hit_fraction},
                           {"hit_probability", hit_probability},
                           {"rate_band_lo", rate_band_lo},
                           {"rate_band_hi", rate_band_hi}};
    j["ergodicity"] = {{"seed_b", second_seed()}};
    j["inequalities"] = {{"fp_range", fp_range},
                         {"fp_den", fp_den},
                         {"poincare_cases", poincare_cases},
                         {"poincare_band", poincare_band},
                         {"translation_tol", translation_tol},
                         {"commutator_cases", commutator_cases},
                         {"commutator_s", commutator_s},
                         {"commutator_eps", commutator_eps}};
    return j;
  }
};

/// Desk profile: n=128, dt=1e-3, 32 paths. Large: n=256, 128 paths.
inline void apply_profile(ExperimentConfig& cfg, const std::string& profile) {
  if (profile == "desk") {
    cfg.sim.n = 128;
    cfg.sim.dt = 1e-3;
    cfg.paths = 32;
  } else if (profile == "large") {
    cfg.sim.n = 256;
    cfg.sim.dt = 1e-3;
    cfg.paths = 128;
  } else {
    throw ConfigError("profile must be desk or large");
  }
}

namespace detail {

template <class T>
void assign_num(const ConfigDocument& d, const std::string& key, T& out) {
  if constexpr (std::is_integral_v<T>) {
    if (auto v = d.integer(key)) {
      if constexpr (std::is_unsigned_v<T>) {
        if (*v < 0) throw ConfigError("config key '" + key + "' must be nonnegative");
      }
      out = static_cast<T>(*v);
    }
  } else {
    if (auto v = d.number(key)) out = *v;
  }
}

inline void assign_array(const ConfigDocument& d, const std::string& key, std::vector<double>& out) {
  if (auto v = d.array(key)) out = *v;
}

}  // namespace detail

/// Overlays the document onto cfg; unknown keys are an error.
inline void apply_document(ExperimentConfig& cfg, const ConfigDocument& d) {
  using detail::assign_array;
  using detail::assign_num;
  if (auto v = d.string("experiment")) cfg.kind = *v;
  assign_num(d, "seed", cfg.sim.seed);
  assign_num(d, "paths", cfg.paths);
  assign_num(d, "workers", cfg.workers);
  if (auto v = d.string("out")) cfg.out = *v;
  assign_num(d, "sample_dt", cfg.sample_dt);
  if (auto v = d.boolean("plots")) cfg.plots = *v;

  assign_num(d, "sim.gamma", cfg.sim.gamma);
  assign_num(d, "sim.r", cfg.sim.r);
  assign_num(d, "sim.n", cfg.sim.n);
  assign_num(d, "sim.dt", cfg.sim.dt);
  assign_num(d, "sim.T", cfg.sim.T);
  assign_num(d, "sim.blowup_bound", cfg.sim.blowup_bound);
  if (auto v = d.boolean("sim.dealias")) cfg.sim.dealias = *v;

  if (auto v = d.string("forcing.kind")) cfg.forcing.kind = *v;
  assign_num(d, "forcing.radius", cfg.forcing.radius);
  assign_num(d, "forcing.exponent", cfg.forcing.exponent);
  assign_num(d, "forcing.amplitude", cfg.forcing.amplitude);
  assign_array(d, "forcing.modes", cfg.forcing.modes);

  if (auto v = d.string("init.kind")) cfg.init.kind = *v;
  assign_num(d, "init.band", cfg.init.band);
  assign_num(d, "init.decay", cfg.init.decay);
  assign_num(d, "init.norm", cfg.init.norm);

  assign_num(d, "schedule.m", cfg.schedule.m);
  assign_num(d, "schedule.T_m", cfg.schedule.T_m);
  assign_num(d, "moments.q", cfg.q);

  assign_num(d, "exp.p", cfg.p);
  assign_array(d, "exp.kappa_fractions", cfg.kappa_fractions);
  assign_num(d, "exp.verdict_fraction", cfg.verdict_fraction);
  assign_array(d, "exp.amplitude_factors", cfg.amplitude_factors);
  assign_array(d, "exp.horizons", cfg.horizons);
  assign_num(d, "exp.ci_fraction", cfg.ci_fraction);
  assign_num(d, "exp.rate_ratio", cfg.rate_ratio);

  assign_array(d, "cont.h", cfg.h);
  assign_num(d, "cont.h_ratio_tol", cfg.h_ratio_tol);
  assign_array(d, "cont.lin_h", cfg.lin_h);
  assign_num(d, "cont.lin_T", cfg.lin_T);
  assign_num(d, "cont.lin_order", cfg.lin_order);

  assign_array(d, "control.N", cfg.control_N);
  assign_num(d, "control.directions", cfg.directions);
  assign_num(d, "control.budget_stability", cfg.budget_stability);

  assign_num(d, "irreducibility.R", cfg.R);
  assign_array(d, "irreducibility.eps_noise", cfg.eps_noise);
  assign_num(d, "irreducibility.hit_fraction", cfg.hit_fraction);
  assign_num(d, "irreducibility.hit_probability", cfg.hit_probability);
  assign_num(d, "irreducibility.rate_band_lo", cfg.rate_band_lo);
  assign_num(d, "irreducibility.rate_band_hi", cfg.rate_band_hi);

  assign_num(d, "ergodicity.seed_b", cfg.seed_b);

  assign_num(d, "inequalities.fp_range", cfg.fp_range);
  assign_num(d, "inequalities.fp_den", cfg.fp_den);
  assign_num(d, "inequalities.poincare_cases", cfg.poincare_cases);
  assign_num(d, "inequalities.poincare_band", cfg.poincare_band);
  assign_num(d, "inequalities.translation_tol", cfg.translation_tol);
  assign_num(d, "inequalities.commutator_cases", cfg.commutator_cases);
  assign_num(d, "inequalities.commutator_s", cfg.commutator_s);
  assign_num(d, "inequalities.commutator_eps", cfg.commutator_eps);

  const auto extra = d.unused();
  if (!extra.empty()) {
    std::string all;
    for (const auto& k : extra) all += (all.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config keys: " + all);
  }
}

inline ExperimentConfig parse_config(const std::string& source) {
  ExperimentConfig cfg;
  apply_document(cfg, ConfigDocument::parse(source));
  return cfg;
}

}  // namespace felab
