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

// Recording and estimation layer: smoothing schedules, per-trajectory
// moment series, exponential-moment estimators with their smallness budget,
// log-linear decay fits, polynomial model selection and time averages.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "felab/error.hpp"
#include "felab/forcing.hpp"
#include "felab/inequalities.hpp"
#include "felab/rng.hpp"
#include "felab/spectral.hpp"

namespace felab {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Smoothing schedules

struct SmoothingSchedule {
  double m = 0.0;    // derivative gain
  double T_m = 1.0;  // ramp time

  void validate() const {
    if (!(m >= 0.0)) throw ConfigError("smoothing gain m must be >= 0");
    if (!(T_m > 0.0)) throw ConfigError("smoothing ramp time T_m must be > 0");
  }
};

/// alpha(t) = m t / T_m on [0, T_m], m afterwards.
inline double alpha_at(const SmoothingSchedule& sched, double t) {
  if (t < 0.0) throw ConfigError("alpha_at needs t >= 0");
  return t >= sched.T_m ? sched.m : sched.m * t / sched.T_m;
}

/// Control bootstrap index s(t) = min(r - 1 + t gamma, r).
inline double control_index(double t, double r, double gamma) {
  return std::min(r - 1.0 + t * gamma, r);
}

// ---------------------------------------------------------------------------
// Moment series

struct MomentSeries {
  std::string name;
  std::vector<double> times;
  std::vector<std::uint64_t> trajectory_ids;
  std::vector<std::vector<double>> values;  // [trajectory][time]
  json metadata = json::object();

  MomentSeries() = default;
  MomentSeries(std::string n, std::vector<double> t) : name(std::move(n)), times(std::move(t)) {
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (!(times[i] > times[i - 1])) throw ConfigError("series times must be strictly increasing");
    }
  }

  void add_trajectory(std::uint64_t id, std::vector<double> v) {
    if (v.size() != times.size()) {
      throw ConfigError("trajectory length " + std::to_string(v.size()) + " does not match " +
                        std::to_string(times.size()) + " sample times in " + name);
    }
    trajectory_ids.push_back(id);
    values.push_back(std::move(v));
  }

  std::size_t size() const { return values.size(); }

  double mean(std::size_t i) const {
    double acc = 0.0;
    for (const auto& v : values) acc += v[i];
    return acc / static_cast<double>(values.size());
  }

  double variance(std::size_t i) const {
    if (values.size() < 2) return 0.0;
    const double mu = mean(i);
    double acc = 0.0;
    for (const auto& v : values) acc += (v[i] - mu) * (v[i] - mu);
    return acc / static_cast<double>(values.size() - 1);
  }

  double std_error(std::size_t i) const {
    return std::sqrt(variance(i) / static_cast<double>(values.size()));
  }

  std::vector<double> means() const {
    std::vector<double> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) out[i] = mean(i);
    return out;
  }

  std::vector<double> std_errors() const {
    std::vector<double> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) out[i] = std_error(i);
    return out;
  }

  /// Long-format CSV: t,trajectory_id,value.
  void write_csv(std::ostream& os) const {
    os << "t,trajectory_id,value\n";
    os.precision(17);
    for (std::size_t k = 0; k < values.size(); ++k) {
      for (std::size_t i = 0; i < times.size(); ++i) {
        os << times[i] << ',' << trajectory_ids[k] << ',' << values[k][i] << '\n';
      }
    }
  }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    write_csv(out);
  }

  json summary() const {
    json j;
    j["name"] = name;
    j["trajectories"] = values.size();
    j["t"] = times;
    j["mean"] = means();
    j["stderr"] = std_errors();
    j["metadata"] = metadata;
    return j;
  }
};

// ---------------------------------------------------------------------------
// Smoothing moments

/// Running sup of ||Lambda^{r+alpha(t)} omega||^q and the trapezoidal
/// integral of ||Lambda^{r+g/2+alpha(t)} omega||^2 ||Lambda^{r+alpha(t)} omega||^{q-2}
/// over observed times. The sup over sample times is a lower bound on the
/// true sup.
class SmoothingMoments {
 public:
  SmoothingMoments(SmoothingSchedule sched, double r, double q, double gamma)
      : sched_(sched), r_(r), q_(q), gamma_(gamma) {
    sched_.validate();
    if (!(q >= 2.0)) throw ConfigError("moment power q must be >= 2");
  }

  void observe(double t, const SpectralField& omega) {
    const double a = alpha_at(sched_, t);
    refresh_weights(omega.grid(), a);
    double base_sq = 0.0, dis = 0.0;
    for (std::size_t i = 0; i < omega.size(); ++i) {
      const double e = std::norm(omega[i]);
      base_sq += w_base_[i] * e;
      dis += w_dis_[i] * e;
    }
    const double base = std::sqrt(base_sq);
    const double level = std::pow(base, q_);
    const double density = dis * std::pow(base, q_ - 2.0);
    if (count_ > 0) integral_ += 0.5 * (t - last_t_) * (density + last_density_);
    sup_ = std::max(sup_, level);
    last_t_ = t;
    last_density_ = density;
    current_ = level;
    ++count_;
    double total = 0.0, outer = 0.0;
    for (std::size_t i = 0; i < omega.size(); ++i) {
      const double e = w_tail_[i] * std::norm(omega[i]);
      total += e;
      if (outer_[i]) outer += e;
    }
    tail_ = std::max(tail_, total > 0.0 ? outer / total : 0.0);
  }

  double sup() const { return sup_; }
  double integral() const { return integral_; }
  double current() const { return current_; }
  /// Largest observed fraction of H^{r+m+g/2} energy in the outer third of
  /// the retained band.
  double worst_tail() const { return tail_; }
  bool resolved(double threshold = 1e-8) const { return tail_ <= threshold; }

  static double tail_fraction(const SpectralField& f, double s) {
    const auto& t = f.grid().tables();
    const double edge = 2.0 * f.grid().dealias_cutoff() / 3.0;
    const int nh = f.grid().nh();
    double total = 0.0, outer = 0.0;
    for (int a = 0; a < f.grid().n(); ++a) {
      for (int b = 0; b < nh; ++b) {
        const std::size_t i = static_cast<std::size_t>(a) * nh + b;
        if (t.weight[i] == 0) continue;
        const double e = t.weight[i] * std::exp(2.0 * s * t.logk[i]) * std::norm(f[i]);
        total += e;
        if (std::max(std::abs(t.k1[a]), t.k2[b]) > edge) outer += e;
      }
    }
    return total > 0.0 ? outer / total : 0.0;
  }

 private:
  // Weights (2 pi)^2 w_k |k|^{2s} for the two indices, rebuilt when alpha moves.
  void refresh_weights(const Grid2D& g, double a) {
    if (a == cached_alpha_ && w_base_.size() == g.spectral_size()) return;
    const auto& t = g.tables();
    if (w_tail_.size() != g.spectral_size()) {
      const double s = r_ + sched_.m + 0.5 * gamma_;
      const double edge = 2.0 * g.dealias_cutoff() / 3.0;
      w_tail_.assign(g.spectral_size(), 0.0);
      outer_.assign(g.spectral_size(), 0);
      for (int p = 0; p < g.n(); ++p) {
        for (int b = 0; b < g.nh(); ++b) {
          const std::size_t i = static_cast<std::size_t>(p) * g.nh() + b;
          if (t.weight[i] == 0) continue;
          w_tail_[i] = t.weight[i] * std::exp(2.0 * s * t.logk[i]);
          outer_[i] = std::max(std::abs(t.k1[p]), t.k2[b]) > edge;
        }
      }
    }
    w_base_.assign(g.spectral_size(), 0.0);
    w_dis_.assign(g.spectral_size(), 0.0);
    for (std::size_t i = 0; i < w_base_.size(); ++i) {
      if (t.weight[i] == 0) continue;
      w_base_[i] = kBoxArea * t.weight[i] * std::exp(2.0 * (r_ + a) * t.logk[i]);
      w_dis_[i] = kBoxArea * t.weight[i] * std::exp(2.0 * (r_ + 0.5 * gamma_ + a) * t.logk[i]);
    }
    cached_alpha_ = a;
  }

  SmoothingSchedule sched_;
  double r_, q_, gamma_;
  double cached_alpha_ = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> w_base_, w_dis_, w_tail_;
  std::vector<char> outer_;
  double sup_ = 0.0;
  double integral_ = 0.0;
  double current_ = 0.0;
  double last_t_ = 0.0;
  double last_density_ = 0.0;
  double tail_ = 0.0;
  std::size_t count_ = 0;
};

// ---------------------------------------------------------------------------
// Exponential-moment budget

struct KappaBudget {
  double p = 2.0;
  double kappa = 0.0;
  double C_gamma = 1.0;
  double sigma_lp = 0.0;  // ||sigma||_{L^p}

  double factor() const { return 1.0 + C_gamma * sigma_lp * sigma_lp; }
  bool satisfied(double k) const { return k >= 0.0 && k * factor() <= 0.5 * (1.0 + 1e-12); }
  bool satisfied() const { return satisfied(kappa); }

  json to_json() const {
    return json{{"p", p}, {"kappa0", kappa}, {"C_gamma", C_gamma}, {"sigma_Lp", sigma_lp}};
  }
};

/// Largest kappa with kappa (1 + C ||sigma||^2_{L^p}) <= 1/2.
inline KappaBudget kappa_zero(double p, double sigma_lp, double C_gamma) {
  KappaBudget b;
  b.p = p;
  b.C_gamma = C_gamma;
  b.sigma_lp = sigma_lp;
  b.kappa = 0.5 / b.factor();
  return b;
}

/// kappa_0 for a forcing, with C_gamma = poincare_constant(2, gamma, p).
inline KappaBudget kappa_zero(int p, const ForcingConfig& cfg, double gamma) {
  if (p < 2 || p % 2 != 0) throw ConfigError("kappa_zero needs p even, >= 2");
  return kappa_zero(p, sigma_lp_norm(cfg, p), poincare_constant(2, gamma, p));
}

inline void require_budget(const KappaBudget& budget, double kappa) {
  if (!budget.satisfied(kappa)) {
    std::ostringstream os;
    os << "kappa=" << kappa << " violates the budget kappa (1 + C ||sigma||^2) <= 1/2 (kappa0="
       << budget.kappa << ")";
    throw BudgetError(os.str());
  }
}

struct MeanEstimate {
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t samples = 0;
  bool unstable = false;  // CI wider than the mean

  double ci_width() const { return ci_hi - ci_lo; }
  json to_json() const {
    return json{{"mean", mean},   {"ci_lo", ci_lo},       {"ci_hi", ci_hi},
                {"n", samples},   {"ci_width", ci_width()}, {"unstable", unstable}};
  }
};

/// Sample mean with a percentile bootstrap interval; resampling is driven
/// by a Philox stream so results are reproducible.
inline MeanEstimate bootstrap_mean(const std::vector<double>& x, std::uint64_t seed,
                                   int resamples = 2000, double level = 0.95) {
  if (x.empty()) throw ConfigError("bootstrap needs at least one sample");
  MeanEstimate e;
  e.samples = x.size();
  e.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  PhiloxEngine rng(seed, 0xB007);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  const std::uint64_t n = x.size();
  auto pick = [&](PhiloxEngine& g) { return static_cast<std::size_t>((g() * n) >> 32); };
  for (auto& m : means) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[pick(rng)];
    m = acc / static_cast<double>(x.size());
  }
  std::sort(means.begin(), means.end());
  const double lo = 0.5 * (1.0 - level);
  auto quantile = [&](double q) {
    const double pos = q * (means.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const auto j = std::min(i + 1, means.size() - 1);
    return means[i] + (pos - i) * (means[j] - means[i]);
  };
  e.ci_lo = quantile(lo);
  e.ci_hi = quantile(1.0 - lo);
  e.unstable = e.ci_width() > std::abs(e.mean);
  return e;
}

/// E exp(kappa ||omega(T)||^2_{L^p}) from per-path values of ||omega(T)||^2_{L^p}.
inline MeanEstimate exp_moment_estimator(const std::vector<double>& lp_sq, double kappa,
                                         const KappaBudget& budget, std::uint64_t seed) {
  require_budget(budget, kappa);
  std::vector<double> x(lp_sq.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::exp(kappa * lp_sq[i]);
  return bootstrap_mean(x, seed);
}

/// E exp(kappa int_0^T ||omega||^2_{L^p} ds) from per-path time integrals.
inline MeanEstimate exp_time_integral_estimator(const std::vector<double>& integrals,
                                                double kappa, const KappaBudget& budget,
                                                std::uint64_t seed) {
  return exp_moment_estimator(integrals, kappa, budget, seed);
}

// ---------------------------------------------------------------------------
// Fits

struct DecayFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;

  json to_json() const {
    return json{{"slope", slope}, {"intercept", intercept}, {"r2", r2}, {"points", points}};
  }
};

/// Least squares of log(value) against t over t in [t0, t1].
inline DecayFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& v,
                               double t0 = -std::numeric_limits<double>::infinity(),
                               double t1 = std::numeric_limits<double>::infinity()) {
  if (t.size() != v.size()) throw ConfigError("fit_decay_rate: size mismatch");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t0 || t[i] > t1) continue;
    if (!(v[i] > 0.0)) throw Error("fit_decay_rate needs positive values in the window");
    x.push_back(t[i]);
    y.push_back(std::log(v[i]));
  }
  if (x.size() < 2) throw Error("fit_decay_rate needs at least two points in the window");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  DecayFit f;
  f.points = x.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

inline DecayFit fit_decay_rate(const MomentSeries& s,
                               double t0 = -std::numeric_limits<double>::infinity(),
                               double t1 = std::numeric_limits<double>::infinity()) {
  return fit_decay_rate(s.times, s.means(), t0, t1);
}

struct PolyFit {
  int degree = 0;
  std::vector<double> coeffs;  // c0 + c1 t + ...
  double chi2 = 0.0;
  double aicc = 0.0;

  json to_json() const {
    return json{{"degree", degree}, {"coeffs", coeffs}, {"chi2", chi2}, {"aicc", aicc}};
  }
};

/// Weighted least-squares polynomial fit with known standard errors and
/// AICc = chi^2 + 2k + 2k(k+1)/(n-k-1), k = degree + 1.
inline PolyFit fit_polynomial(const std::vector<double>& t, const std::vector<double>& y,
                              const std::vector<double>& se, int degree) {
  const std::size_t n = t.size();
  const int k = degree + 1;
  if (y.size() != n || se.size() != n) throw ConfigError("fit_polynomial: size mismatch");
  if (static_cast<int>(n) <= k + 1) throw ConfigError("fit_polynomial: too few points for AICc");
  // Floor tiny errors so a deterministic point cannot dominate the fit.
  double se_floor = 0.0;
  for (std::size_t i = 0; i < n; ++i) se_floor = std::max(se_floor, std::abs(y[i]));
  se_floor *= 1e-12;
  Eigen::MatrixXd A(n, k);
  Eigen::VectorXd b(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 1.0 / std::max(se[i], se_floor > 0 ? se_floor : 1e-300);
    double p = 1.0;
    for (int j = 0; j < k; ++j) {
      A(i, j) = w * p;
      p *= t[i];
    }
    b(i) = w * y[i];
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
  PolyFit f;
  f.degree = degree;
  f.coeffs.assign(c.data(), c.data() + k);
  f.chi2 = (A * c - b).squaredNorm();
  f.aicc = f.chi2 + 2.0 * k + 2.0 * k * (k + 1) / static_cast<double>(n - k - 1);
  return f;
}

struct ModelSelection {
  PolyFit lower;
  PolyFit higher;
  bool lower_preferred = false;  // by AICc
  bool concave = false;          // leading coefficient of the higher fit <= 0
  bool accept = false;           // lower_preferred || concave

  json to_json() const {
    return json{{"lower", lower.to_json()},
                {"higher", higher.to_json()},
                {"lower_preferred_by_aicc", lower_preferred},
                {"higher_fit_concave", concave},
                {"accept_lower_envelope", accept}};
  }
};

/// Compares polynomial degrees d and d+1. Growth no faster than degree d is
/// accepted when AICc prefers degree d or the extra leading coefficient is
/// nonpositive.
inline ModelSelection select_growth_model(const std::vector<double>& t,
                                          const std::vector<double>& y,
                                          const std::vector<double>& se, int degree) {
  ModelSelection m;
  m.lower = fit_polynomial(t, y, se, degree);
  m.higher = fit_polynomial(t, y, se, degree + 1);
  m.lower_preferred = m.lower.aicc <= m.higher.aicc;
  m.concave = m.higher.coeffs.back() <= 0.0;
  m.accept = m.lower_preferred || m.concave;
  return m;
}

// ---------------------------------------------------------------------------
// Time averages

struct TimeAverageEntry {
  std::string functional;
  double avg_a = 0.0;
  double avg_b = 0.0;
  double diff = 0.0;
  double diff_half = 0.0;    // |avg_a - avg_b| at T/2
  double fluct_a = 0.0;      // sup_{[T/2, T]} |A_a(t) - A_a(T)|
  double fluct_b = 0.0;
  bool agree = false;        // diff <= 2 * mean(fluct_a, fluct_b)
  bool shrinking = false;    // diff <= diff_half

  json to_json() const {
    return json{{"functional", functional}, {"avg_a", avg_a},     {"avg_b", avg_b},
                {"diff", diff},             {"diff_half", diff_half}, {"fluct_a", fluct_a},
                {"fluct_b", fluct_b},       {"agree", agree},     {"shrinking", shrinking}};
  }
};

/// Running time averages of functionals sampled on a common uniform time
/// grid for two independent streams. samples_x[f][i] is functional f at
/// sample i.
inline std::vector<TimeAverageEntry> time_average_diagnostic(
    const std::vector<std::string>& names, const std::vector<std::vector<double>>& samples_a,
    const std::vector<std::vector<double>>& samples_b) {
  if (samples_a.size() != names.size() || samples_b.size() != names.size()) {
    throw ConfigError("time_average_diagnostic: functional count mismatch");
  }
  std::vector<TimeAverageEntry> out;
  auto running = [](const std::vector<double>& x) {
    std::vector<double> r(x.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      acc += x[i];
      r[i] = acc / static_cast<double>(i + 1);
    }
    return r;
  };
  for (std::size_t f = 0; f < names.size(); ++f) {
    const auto& xa = samples_a[f];
    const auto& xb = samples_b[f];
    if (xa.size() != xb.size() || xa.size() < 2) {
      throw ConfigError("time_average_diagnostic: streams need equal length >= 2");
    }
    const auto ra = running(xa);
    const auto rb = running(xb);
    const std::size_t last = ra.size() - 1;
    const std::size_t half = (ra.size() - 1) / 2;
    TimeAverageEntry e;
    e.functional = names[f];
    e.avg_a = ra[last];
    e.avg_b = rb[last];
    e.diff = std::abs(e.avg_a - e.avg_b);
    e.diff_half = std::abs(ra[half] - rb[half]);
    for (std::size_t i = half; i <= last; ++i) {
      e.fluct_a = std::max(e.fluct_a, std::abs(ra[i] - ra[last]));
      e.fluct_b = std::max(e.fluct_b, std::abs(rb[i] - rb[last]));
    }
    e.agree = e.diff <= (e.fluct_a + e.fluct_b);
    e.shrinking = e.diff <= e.diff_half;
    out.push_back(e);
  }
  return out;
}

}  // namespace felab
