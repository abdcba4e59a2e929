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

// Degenerate additive noise sigma dW = sum_{k in Z} q_k e_k dW^k.
//
// e_k = sin(k.x) for k in Z^2_+ = {k2 > 0, or k2 = 0 and k1 > 0} and
// e_k = cos(k.x) for k in Z^2_- = -Z^2_+. Inner products against e_k use the
// normalized pairing <f, g>_e = (1 / 2pi^2) int f g, so <e_k, e_k>_e = 1 and
// sigma sigma_* is the identity on span{e_k}. The plain L2 pairing differs
// by the factor 2pi^2.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "felab/error.hpp"
#include "felab/rng.hpp"
#include "felab/spectral.hpp"

namespace felab {

struct ForcedMode {
  int k1 = 0;
  int k2 = 0;
  double q = 0.0;

  double kmag() const { return std::sqrt(static_cast<double>(k1) * k1 + static_cast<double>(k2) * k2); }
  /// True for k in Z^2_+ (sine mode).
  bool is_sine() const { return k2 > 0 || (k2 == 0 && k1 > 0); }
};

class ForcingConfig {
 public:
  struct BallSpec {
    int radius = 0;
    double exponent = 1.0;
    double amplitude = 1.0;
  };

  /// sigma = 0.
  ForcingConfig() = default;

  static ForcingConfig explicit_modes(std::vector<ForcedMode> modes) {
    ForcingConfig cfg;
    cfg.modes_ = std::move(modes);
    cfg.validate();
    return cfg;
  }

  /// All k with 0 < |k| <= radius, q_k = amplitude * |k|^(-exponent).
  static ForcingConfig ball(int radius, double exponent = 1.0, double amplitude = 1.0) {
    if (radius < 0) throw ConfigError("forcing ball radius must be >= 0");
    ForcingConfig cfg;
    if (amplitude == 0.0 || radius == 0) return cfg;
    for (int k1 = -radius; k1 <= radius; ++k1) {
      for (int k2 = -radius; k2 <= radius; ++k2) {
        const int ksq = k1 * k1 + k2 * k2;
        if (ksq == 0 || ksq > radius * radius) continue;
        cfg.modes_.push_back({k1, k2, amplitude * std::pow(std::sqrt(ksq), -exponent)});
      }
    }
    cfg.ball_ = BallSpec{radius, exponent, amplitude};
    cfg.validate();
    return cfg;
  }

  /// Every q_k multiplied by `factor`; a zero factor gives sigma = 0.
  ForcingConfig scaled(double factor) const {
    if (factor == 0.0) return ForcingConfig{};
    ForcingConfig out = *this;
    for (auto& m : out.modes_) m.q *= factor;
    if (out.ball_) out.ball_->amplitude *= factor;
    return out;
  }

  const std::vector<ForcedMode>& modes() const { return modes_; }
  std::size_t size() const { return modes_.size(); }
  bool empty() const { return modes_.empty(); }
  const std::optional<BallSpec>& ball_spec() const { return ball_; }

  /// Largest |k_i| over the forced set.
  int max_component() const {
    int m = 0;
    for (const auto& f : modes_) m = std::max({m, std::abs(f.k1), std::abs(f.k2)});
    return m;
  }

  /// True when every k with 0 < |k| <= radius is forced.
  bool contains_ball(int radius) const {
    std::set<std::pair<int, int>> have;
    for (const auto& m : modes_) have.emplace(m.k1, m.k2);
    for (int k1 = -radius; k1 <= radius; ++k1) {
      for (int k2 = -radius; k2 <= radius; ++k2) {
        const int ksq = k1 * k1 + k2 * k2;
        if (ksq == 0 || ksq > radius * radius) continue;
        if (!have.count({k1, k2})) return false;
      }
    }
    return true;
  }

  std::string describe() const {
    std::ostringstream os;
    if (ball_) {
      os << "ball(radius=" << ball_->radius << ", exponent=" << ball_->exponent
         << ", amplitude=" << ball_->amplitude << ")";
    } else {
      os << "explicit(" << modes_.size() << " modes)";
    }
    return os.str();
  }

 private:
  void validate() const {
    std::set<std::pair<int, int>> seen;
    for (const auto& m : modes_) {
      if (m.k1 == 0 && m.k2 == 0) throw ConfigError("forced set must exclude k = 0");
      if (m.q == 0.0 || !std::isfinite(m.q)) {
        throw ConfigError("forcing amplitudes q_k must be finite and nonzero");
      }
      if (!seen.emplace(m.k1, m.k2).second) throw ConfigError("duplicate forced mode");
    }
    for (const auto& m : modes_) {
      if (!seen.count({-m.k1, -m.k2})) {
        throw ConfigError("forced set is not symmetric under k -> -k (missing (" +
                          std::to_string(-m.k1) + "," + std::to_string(-m.k2) + "))");
      }
    }
  }

  std::vector<ForcedMode> modes_;
  std::optional<BallSpec> ball_;
};

/// Coefficient-level footprint of q_k e_k in half-spectrum storage.
struct ModeStencil {
  std::array<long, 2> index{-1, -1};
  std::array<cplx, 2> value{};
  int count = 0;
  double kmag = 0.0;
  double q = 0.0;
};

inline std::vector<ModeStencil> mode_stencils(const ForcingConfig& cfg, const Grid2D& grid) {
  std::vector<ModeStencil> out;
  out.reserve(cfg.size());
  for (const auto& m : cfg.modes()) {
    if (std::max(std::abs(m.k1), std::abs(m.k2)) > grid.dealias_cutoff()) {
      throw ConfigError("forced mode (" + std::to_string(m.k1) + "," + std::to_string(m.k2) +
                        ") lies outside the grid cutoff " +
                        std::to_string(grid.dealias_cutoff()));
    }
    ModeStencil s;
    s.kmag = m.kmag();
    s.q = m.q;
    // e_k coefficient at k and at -k.
    const cplx at_k = m.is_sine() ? cplx(0.0, -0.5) : cplx(0.5, 0.0);
    const cplx at_minus = std::conj(at_k);
    const std::array<std::pair<std::array<int, 2>, cplx>, 2> candidates = {
        std::pair{std::array<int, 2>{m.k1, m.k2}, at_k},
        std::pair{std::array<int, 2>{-m.k1, -m.k2}, at_minus}};
    for (const auto& [v, c] : candidates) {
      if (v[1] < 0) continue;
      s.index[s.count] = grid.index_of(v[0], v[1]);
      s.value[s.count] = m.q * c;
      ++s.count;
    }
    out.push_back(s);
  }
  return out;
}

/// sigma_k = q_k e_k as spectral fields, in the order of cfg.modes().
inline std::vector<SpectralField> build_basis(const ForcingConfig& cfg, const Grid2D& grid) {
  std::vector<SpectralField> basis;
  for (const auto& s : mode_stencils(cfg, grid)) {
    SpectralField f(grid);
    for (int j = 0; j < s.count; ++j) f[s.index[j]] += s.value[j];
    basis.push_back(std::move(f));
  }
  return basis;
}

/// ||sigma||_{H^s} = (sum_k ||sigma_k||_{H^s}^2)^{1/2}, ||e_k||_{L2}^2 = 2pi^2.
inline double sigma_hs_norm(const ForcingConfig& cfg, double s) {
  double acc = 0.0;
  for (const auto& m : cfg.modes()) acc += m.q * m.q * 2.0 * kPi * kPi * std::pow(m.kmag(), 2.0 * s);
  return std::sqrt(acc);
}

/// ||sigma||_{L^p} = (int (sum_k sigma_k^2)^{p/2})^{1/p}, by grid quadrature
/// on `grid` (exact for even p when p * max|k_i| < n).
inline double sigma_lp_norm(const ForcingConfig& cfg, double p, const Grid2D& grid) {
  if (p < 2.0) throw ConfigError("sigma_lp_norm needs p >= 2");
  if (cfg.empty()) return 0.0;
  const int n = grid.n();
  std::vector<double> sumsq(static_cast<std::size_t>(n) * n, 0.0);
  for (const auto& m : cfg.modes()) {
    for (int j1 = 0; j1 < n; ++j1) {
      for (int j2 = 0; j2 < n; ++j2) {
        const double phase = m.k1 * grid.coord(j1) + m.k2 * grid.coord(j2);
        const double e = m.is_sine() ? std::sin(phase) : std::cos(phase);
        sumsq[static_cast<std::size_t>(j1) * n + j2] += m.q * m.q * e * e;
      }
    }
  }
  double acc = 0.0;
  for (double v : sumsq) acc += std::pow(v, 0.5 * p);
  acc *= kBoxArea / static_cast<double>(sumsq.size());
  return std::pow(acc, 1.0 / p);
}

/// Quadrature grid large enough for an exact ||sigma||_{L^p} at even p.
inline Grid2D sigma_quadrature_grid(const ForcingConfig& cfg, double p) {
  const int need = static_cast<int>(std::ceil(p)) * std::max(1, cfg.max_component()) + 1;
  int n = 16;
  while (n <= need || n / 3 < cfg.max_component()) n *= 2;
  return Grid2D(n);
}

inline double sigma_lp_norm(const ForcingConfig& cfg, double p) {
  if (cfg.empty()) return 0.0;
  return sigma_lp_norm(cfg, p, sigma_quadrature_grid(cfg, p));
}

/// Per-mode Brownian increments dW^k ~ N(0, dt) for one step of one stream.
struct NoiseRealization {
  StreamId id;
  std::uint64_t step = 0;
  double dt = 0.0;
  std::vector<double> dW;
};

inline NoiseRealization sample_increments(StreamId id, std::uint64_t step, double dt,
                                          std::size_t modes) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  NoiseRealization inc{id, step, dt, std::vector<double>(modes)};
  const double scale = std::sqrt(dt);
  for (std::size_t m = 0; m + 1 < modes; m += 2) {
    const auto z = normal_pair(id, step, static_cast<std::uint32_t>(m / 2));
    inc.dW[m] = scale * z[0];
    inc.dW[m + 1] = scale * z[1];
  }
  if (modes % 2 == 1) {
    inc.dW[modes - 1] = scale * normal_pair(id, step, static_cast<std::uint32_t>(modes / 2))[0];
  }
  return inc;
}

/// sum_k sigma_k dW^k.
inline SpectralField noise_field(const std::vector<SpectralField>& basis,
                                 const NoiseRealization& inc) {
  if (basis.size() != inc.dW.size()) throw ConfigError("basis/increment size mismatch");
  if (basis.empty()) throw ConfigError("noise_field needs at least one basis field");
  SpectralField out(basis.front().grid());
  for (std::size_t m = 0; m < basis.size(); ++m) out.axpy(inc.dW[m], basis[m]);
  return out;
}

/// Normalized projection <omega, e_k>_e for every forced k.
inline std::vector<double> project_on_modes(const SpectralField& omega, const ForcingConfig& cfg) {
  std::vector<double> out;
  out.reserve(cfg.size());
  for (const auto& m : cfg.modes()) {
    if (m.is_sine()) {
      out.push_back(-2.0 * omega.coeff(m.k1, m.k2).imag());
    } else {
      out.push_back(2.0 * omega.coeff(m.k1, m.k2).real());
    }
  }
  return out;
}

/// (sigma_* omega)_k = <omega, e_k>_e / q_k.
inline std::vector<double> sigma_star(const SpectralField& omega, const ForcingConfig& cfg) {
  auto out = project_on_modes(omega, cfg);
  for (std::size_t m = 0; m < out.size(); ++m) out[m] /= cfg.modes()[m].q;
  return out;
}

/// Sum_k a_k sigma_k for a coefficient vector over the forced set.
inline SpectralField synthesize(const std::vector<double>& a, const ForcingConfig& cfg,
                                const Grid2D& grid) {
  SpectralField out(grid);
  const auto st = mode_stencils(cfg, grid);
  for (std::size_t m = 0; m < st.size(); ++m) {
    for (int j = 0; j < st[m].count; ++j) out[st[m].index[j]] += a[m] * st[m].value[j];
  }
  return out;
}

/// Exact stochastic convolution over one step for dZ + L Z dt = sigma dW with
/// L diagonal (rate |k|^gamma on mode k): the noise added to mode k has
/// variance q_k^2 (1 - e^{-2 lambda dt}) / (2 lambda), built by rescaling the
/// same dW^k.
class ExactNoise {
 public:
  ExactNoise() = default;
  ExactNoise(const ForcingConfig& cfg, const Grid2D& grid, double gamma, double dt,
             bool dissipation = true)
      : stencils_(mode_stencils(cfg, grid)) {
    scale_.reserve(stencils_.size());
    for (const auto& s : stencils_) {
      const double lambda = dissipation ? std::pow(s.kmag, gamma) : 0.0;
      const double x = lambda * dt;
      // (1 - e^{-2x}) / (2x), evaluated stably for small x.
      const double ratio = x > 1e-8 ? -std::expm1(-2.0 * x) / (2.0 * x) : 1.0 - x;
      scale_.push_back(std::sqrt(ratio));
    }
  }

  std::size_t modes() const { return stencils_.size(); }

  void add_to(SpectralField& f, const NoiseRealization& inc) const {
    for (std::size_t m = 0; m < stencils_.size(); ++m) {
      const double a = inc.dW[m] * scale_[m];
      const auto& s = stencils_[m];
      for (int j = 0; j < s.count; ++j) f[s.index[j]] += a * s.value[j];
    }
  }

 private:
  std::vector<ModeStencil> stencils_;
  std::vector<double> scale_;
};

/// Exact OU update Z <- e^{-Lambda^gamma dt} Z + stochastic convolution.
inline SpectralField ou_exact_step(const SpectralField& Z, double dt, const NoiseRealization& inc,
                                   double gamma, const ForcingConfig& cfg) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  SpectralField out = Z;
  const auto& t = Z.grid().tables();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = t.weight[i] > 0 ? out[i] * std::exp(-std::pow(t.kmag[i], gamma) * dt) : cplx{};
  }
  ExactNoise(cfg, Z.grid(), gamma, dt).add_to(out, inc);
  return out;
}

}  // namespace felab
