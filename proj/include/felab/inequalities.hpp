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

// Direct checks of the fractional Lp Poincare inequality, the scalar
// inequality behind it, and the Sobolev commutator estimate.

#include <array>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "felab/error.hpp"
#include "felab/spectral.hpp"

namespace felab {

/// Gamma function by the Lanczos approximation (g = 7, 9 terms) with the
/// reflection formula below 1/2. Relative accuracy about 1e-15.
inline double lanczos_gamma(double x) {
  static constexpr std::array<double, 9> kCoef = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x == std::floor(x) && x <= 0.0) {
    throw ConfigError("gamma function pole at nonpositive integer");
  }
  if (x < 0.5) return kPi / (std::sin(kPi * x) * lanczos_gamma(1.0 - x));
  x -= 1.0;
  double a = kCoef[0];
  const double t = x + 7.5;
  for (int i = 1; i < 9; ++i) a += kCoef[i] / (x + i);
  return std::sqrt(2.0 * kPi) * std::pow(t, x + 0.5) * std::exp(-t) * a;
}

struct PoincareConstant {
  double value = 1.0;  // C after clamping to >= 1
  double raw = 1.0;    // C straight from the formula
  bool clamped = false;
  bool degenerate = false;  // gamma near 0 or 2, where 1/C -> 0
};

/// C_{d,gamma} with
///   1/C = pre 2^g Gamma((d+g)/2) |T^d| / ((2 pi + diam)^{d+g} |Gamma(-g/2)| pi^{d/2}),
/// pre = 1/4, or (p-2)/(2p) when p >= 4 is given. |T^d| = (2 pi)^d and
/// diam = 2 pi sqrt(d).
inline PoincareConstant poincare_constant_detail(int d, double gamma,
                                                 std::optional<int> p = std::nullopt) {
  if (d < 1) throw ConfigError("dimension must be >= 1");
  if (!(gamma > 0.0 && gamma < 2.0)) {
    throw ConfigError("Poincare constant needs gamma in (0, 2)");
  }
  double pre = 0.25;
  if (p && *p != 2) {
    if (*p < 4 || *p % 2 != 0) throw ConfigError("Poincare constant needs p even, >= 4");
    pre = static_cast<double>(*p - 2) / (2.0 * *p);
  }
  const double volume = std::pow(2.0 * kPi, d);
  const double diam = 2.0 * kPi * std::sqrt(static_cast<double>(d));
  const double inv = pre * std::pow(2.0, gamma) * lanczos_gamma(0.5 * (d + gamma)) * volume /
                     (std::pow(2.0 * kPi + diam, d + gamma) *
                      std::abs(lanczos_gamma(-0.5 * gamma)) * std::pow(kPi, 0.5 * d));
  PoincareConstant c;
  c.raw = 1.0 / inv;
  c.value = std::max(c.raw, 1.0);
  c.clamped = c.raw < 1.0;
  c.degenerate = !(inv > 1e-12);
  if (c.clamped) {
    std::clog << "felab: Poincare constant " << c.raw << " clamped to 1 (d=" << d
              << ", gamma=" << gamma << ")\n";
  }
  return c;
}

inline double poincare_constant(int d, double gamma, std::optional<int> p = std::nullopt) {
  return poincare_constant_detail(d, gamma, p).value;
}

struct InequalityReport {
  std::string id;
  std::string inputs;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  double tol = 0.0;
  bool pass = false;
  // Commutator checks only: the ratio R; NaN elsewhere.
  double ratio = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline InequalityReport finish(std::string id, std::string inputs, double lhs, double rhs,
                               double tol) {
  InequalityReport r;
  r.id = std::move(id);
  r.inputs = std::move(inputs);
  r.lhs = lhs;
  r.rhs = rhs;
  r.margin = lhs - rhs;
  r.tol = tol;
  r.pass = r.margin >= -tol;
  return r;
}

/// Largest max(|k1|, |k2|) carrying a nonzero coefficient.
inline int spectral_band(const SpectralField& f) {
  const auto& t = f.grid().tables();
  const int nh = f.grid().nh();
  int band = 0;
  for (int a = 0; a < f.grid().n(); ++a) {
    for (int b = 0; b < nh; ++b) {
      const std::size_t i = static_cast<std::size_t>(a) * nh + b;
      if (f[i] != cplx{}) band = std::max({band, std::abs(t.k1[a]), t.k2[b]});
    }
  }
  return band;
}

}  // namespace detail

/// Fractional Lp Poincare:
///   int theta^{p-1} Lambda^g theta >= ||theta||_p^p / C + ||Lambda^{g/2} theta^{p/2}||^2 / p.
/// Products are formed on the grid; the band of theta must leave room for
/// the degree-p integrand.
inline InequalityReport check_poincare(const SpectralField& theta, int p, double gamma) {
  if (p < 2 || p % 2 != 0) throw ConfigError("check_poincare needs p even, >= 2");
  const Grid2D& g = theta.grid();
  const int band = detail::spectral_band(theta);
  if (p * band > g.n() - 1) {
    throw ResolutionError("grid n=" + std::to_string(g.n()) + " cannot resolve p=" +
                          std::to_string(p) + " powers of a band-" + std::to_string(band) +
                          " field");
  }
  const double C = poincare_constant(2, gamma, p);
  const auto th = to_physical(theta);
  const auto lg = to_physical(apply_multiplier(theta, MultiplierSymbol::frac_laplacian(gamma)));
  PhysicalField integrand(g), half(g);
  double lp = 0.0;
  for (std::size_t j = 0; j < th.values.size(); ++j) {
    const double v = th.values[j];
    integrand.values[j] = ipow(v, p - 1) * lg.values[j];
    half.values[j] = ipow(v, p / 2);
    lp += ipow(v, p);
  }
  lp *= kBoxArea / static_cast<double>(th.values.size());
  const double lhs = integrate(integrand);
  const double grad = sobolev_norm_sq(to_spectral(half), 0.5 * gamma);
  const double rhs = lp / C + grad / p;
  std::ostringstream in;
  in << "p=" << p << " gamma=" << gamma << " band=" << band << " C=" << C;
  return detail::finish("poincare", in.str(), lhs, rhs, 1e-8 * std::abs(lhs));
}

/// f_p(a,b) = p(a^{p-1} - b^{p-1})(a - b) - 2(a^{p/2} - b^{p/2})^2 >= (p-2)(a-b)^2 a^{p-2}
/// in floating point.
inline InequalityReport check_fp_scalar(double a, double b, int p) {
  if (p < 4 || p % 2 != 0) throw ConfigError("check_fp_scalar needs p even, >= 4");
  const double h = ipow(a, p / 2) - ipow(b, p / 2);
  const double lhs = p * (ipow(a, p - 1) - ipow(b, p - 1)) * (a - b) - 2.0 * h * h;
  const double rhs = (p - 2) * (a - b) * (a - b) * ipow(a, p - 2);
  std::ostringstream in;
  in << "a=" << a << " b=" << b << " p=" << p;
  return detail::finish("fp_scalar", in.str(), lhs, rhs, 1e-12 * std::max(1.0, std::abs(lhs)));
}

/// The same inequality at a = A/den, b = B/den in exact integer arithmetic
/// (both sides scaled by den^p). Zero tolerance.
inline InequalityReport check_fp_rational(std::int64_t A, std::int64_t B, std::int64_t den, int p) {
  if (p < 4 || p % 2 != 0) throw ConfigError("check_fp_rational needs p even, >= 4");
  if (den <= 0) throw ConfigError("denominator must be positive");
  using i128 = __int128;
  auto pw = [](i128 x, int e) {
    i128 r = 1;
    for (int i = 0; i < e; ++i) r *= x;
    return r;
  };
  const i128 h = pw(A, p / 2) - pw(B, p / 2);
  const i128 lhs = static_cast<i128>(p) * (pw(A, p - 1) - pw(B, p - 1)) * (A - B) - 2 * h * h;
  const i128 rhs = static_cast<i128>(p - 2) * (A - B) * (A - B) * pw(A, p - 2);
  InequalityReport r;
  r.id = "fp_rational";
  std::ostringstream in;
  in << "a=" << A << "/" << den << " b=" << B << "/" << den << " p=" << p;
  r.inputs = in.str();
  const double scale = std::pow(static_cast<double>(den), p);
  r.lhs = static_cast<double>(lhs) / scale;
  r.rhs = static_cast<double>(rhs) / scale;
  r.margin = static_cast<double>(lhs - rhs) / scale;
  r.tol = 0.0;
  r.pass = lhs >= rhs;
  return r;
}

/// Exponent of the H^1 term in the commutator estimate:
/// q = 4((4+g)(s+g) - 4) / (g(6+g)).
inline double q_exponent(double s, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("q_exponent needs gamma > 0");
  if (!(s > 1.0)) throw ConfigError("q_exponent needs s > 1");
  return 4.0 * ((4.0 + gamma) * (s + gamma) - 4.0) / (gamma * (6.0 + gamma));
}

/// p_gamma = 4 + 4/gamma.
inline double p_gamma(double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("p_gamma needs gamma > 0");
  return 4.0 + 4.0 / gamma;
}

/// Commutator study: lhs = |<[Lambda^s, u.grad] omega, Lambda^s omega>| and
///   R = (lhs - eps ||omega||^2_{H^{s+g/2}})_+ / ||omega||^q_{H^1}.
/// The estimate holds with constant C iff R <= C; report.pass only records
/// that R is finite.
inline InequalityReport check_commutator(const SpectralField& omega, double s, double gamma,
                                         double eps) {
  if (!(s > 1.0)) throw ConfigError("check_commutator needs s > 1");
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("check_commutator needs eps in (0, 1)");
  const Grid2D& g = omega.grid();
  const int band = detail::spectral_band(omega);
  if (2 * band > g.dealias_cutoff()) {
    throw ResolutionError("commutator needs the band " + std::to_string(band) +
                          " doubled inside the dealias cutoff " +
                          std::to_string(g.dealias_cutoff()));
  }
  const auto v = biot_savart(omega);
  const auto u1 = to_physical(v.u1);
  const auto u2 = to_physical(v.u2);
  auto advect = [&](const SpectralField& f) {
    const auto f1 = to_physical(derivative(f, 0));
    const auto f2 = to_physical(derivative(f, 1));
    PhysicalField out(g);
    for (std::size_t j = 0; j < out.values.size(); ++j) {
      out.values[j] = u1.values[j] * f1.values[j] + u2.values[j] * f2.values[j];
    }
    return dealias(to_spectral(out));
  };
  auto ls_omega = omega;
  apply_power(ls_omega, s);
  auto comm = advect(omega);
  apply_power(comm, s);
  comm -= advect(ls_omega);
  const double lhs = std::abs(inner(comm, ls_omega));
  const double dissip = eps * sobolev_norm_sq(omega, s + 0.5 * gamma);
  const double q = q_exponent(s, gamma);
  const double h1 = sobolev_norm(omega, 1.0);
  const double excess = std::max(0.0, lhs - dissip);
  InequalityReport r;
  r.id = "commutator";
  std::ostringstream in;
  in << "s=" << s << " gamma=" << gamma << " eps=" << eps << " q=" << q << " band=" << band;
  r.inputs = in.str();
  r.lhs = lhs;
  r.rhs = dissip;
  r.margin = dissip - lhs;
  r.ratio = excess == 0.0 ? 0.0 : excess / std::pow(h1, q);
  r.pass = std::isfinite(r.ratio);
  return r;
}

}  // namespace felab
