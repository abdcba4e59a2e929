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

// Time stepping for
//   main:       d omega + (Lambda^g omega + B(omega, omega)) dt = sigma dW
//   linearized: d rho + (Lambda^g rho + B(rho, omega) + B(omega, rho)) dt = 0
//   control:    linearized - lambda_N^{g/2} P_N rho
//   shifted:    d wbar + (Lambda^g wbar + B(wbar + Z, wbar + Z)) dt = 0
//   OU:         dZ + Lambda^g Z dt = sigma dW
// with B(f, g) = (K * f) . grad g.
//
// All evolutions use first-order exponential (integrating factor) Euler:
// x <- e^{-L dt} (x - dt N(x)) with L diagonal in Fourier space, and the
// noise enters through the exact per-step OU convolution. The frozen field
// in the linearized and control equations is the main state at the start of
// the step.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "felab/error.hpp"
#include "felab/forcing.hpp"
#include "felab/rng.hpp"
#include "felab/spectral.hpp"

namespace felab {

struct SimParams {
  double gamma = 1.0;  // dissipation power in (0, 2]
  double r = 2.5;      // phase-space Sobolev index (observables only)
  int n = 128;
  double dt = 1e-3;
  bool dealias = true;
  std::uint64_t seed = 1;
  double T = 1.0;
  // Test switches: dissipation off gives the Euler equation, nonlinear off
  // gives the linear (OU-type) equation.
  bool dissipation = true;
  bool nonlinear = true;
  double blowup_bound = 1e6;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 2.0)) throw ConfigError("gamma must lie in (0, 2]");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
    if (!(T >= 0.0)) throw ConfigError("horizon T must be nonnegative");
    if (!(blowup_bound > 0.0)) throw ConfigError("blow-up bound must be positive");
  }

  Grid2D make_grid() const { return Grid2D(n, dealias ? -1 : n / 2 - 1); }

  std::uint64_t steps_for(double horizon) const {
    return static_cast<std::uint64_t>(std::llround(horizon / dt));
  }
};

struct TrajectoryState {
  double t = 0.0;
  SpectralField omega;
  std::uint64_t step = 0;
  StreamId stream;
};

/// lambda_N, the |k| = N shell eigenvalue of -Delta: N^2.
inline double lambda_N(int N) {
  if (N < 1) throw ConfigError("lambda_N needs N >= 1");
  return static_cast<double>(N) * N;
}

/// Damping rate lambda_N^{gamma/2} = N^gamma (zero for N = 0).
inline double control_rate(int N, double gamma) {
  return N <= 0 ? 0.0 : std::pow(lambda_N(N), 0.5 * gamma);
}

/// Workspace for pseudo-spectral products on one grid.
class Advection {
 public:
  Advection() = default;
  explicit Advection(const Grid2D& g)
      : grid_(g), tmp_(g), cscratch_(g.spectral_size()) {}

  const Grid2D& grid() const { return grid_; }

  /// Physical velocity of f and gradient of g.
  void velocity(const SpectralField& f, PhysicalField& u1, PhysicalField& u2) {
    spectral_op(f, u1, [&](std::size_t i, int a, int b, cplx c) {
      const auto& t = grid_.tables();
      (void)a;
      return cplx(0.0, 1.0) * c / t.ksq[i] * static_cast<double>(t.k2[b]);
    });
    spectral_op(f, u2, [&](std::size_t i, int a, int b, cplx c) {
      const auto& t = grid_.tables();
      (void)b;
      return -(cplx(0.0, 1.0) * c / t.ksq[i] * static_cast<double>(t.k1[a]));
    });
  }

  void gradient(const SpectralField& g, PhysicalField& g1, PhysicalField& g2) {
    spectral_op(g, g1, [&](std::size_t, int a, int, cplx c) {
      return cplx(0.0, grid_.tables().k1[a]) * c;
    });
    spectral_op(g, g2, [&](std::size_t, int, int b, cplx c) {
      return cplx(0.0, grid_.tables().k2[b]) * c;
    });
  }

  /// out = dealias(P(u1 g1 + u2 g2)) with the mean removed.
  void product(const PhysicalField& u1, const PhysicalField& u2, const PhysicalField& g1,
               const PhysicalField& g2, SpectralField& out) {
    prod_.grid = grid_;
    prod_.values.resize(grid_.physical_size());
    for (std::size_t j = 0; j < prod_.values.size(); ++j) {
      prod_.values[j] = u1.values[j] * g1.values[j] + u2.values[j] * g2.values[j];
    }
    to_spectral(prod_, out, rscratch_);
    dealias_inplace(out);
  }

  /// B(f, g) = (K * f) . grad g.
  void bilinear(const SpectralField& f, const SpectralField& g, SpectralField& out) {
    require_same_grid(f.grid(), g.grid());
    velocity(f, a1_, a2_);
    gradient(g, b1_, b2_);
    product(a1_, a2_, b1_, b2_, out);
  }

 private:
  template <class Op>
  void spectral_op(const SpectralField& f, PhysicalField& out, Op&& op) {
    const auto& t = grid_.tables();
    const int nh = grid_.nh();
    for (int a = 0; a < grid_.n(); ++a) {
      for (int b = 0; b < nh; ++b) {
        const std::size_t i = static_cast<std::size_t>(a) * nh + b;
        tmp_[i] = t.weight[i] > 0 ? op(i, a, b, f[i]) : cplx{};
      }
    }
    to_physical(tmp_, out, cscratch_);
  }

  Grid2D grid_;
  SpectralField tmp_;
  CplxBuffer cscratch_;
  RealBuffer rscratch_;
  PhysicalField prod_;
  PhysicalField a1_, a2_, b1_, b2_;
};

/// B(f, g), dealiased and mean-free.
inline SpectralField bilinear_B(const SpectralField& f, const SpectralField& g) {
  require_same_grid(f.grid(), g.grid());
  Advection adv(f.grid());
  SpectralField out(f.grid());
  adv.bilinear(f, g, out);
  return out;
}

/// Steppers for one trajectory. Not shared across threads.
class Integrator {
 public:
  Integrator(const SimParams& params, const ForcingConfig& forcing)
      : params_(params), forcing_(forcing), grid_(params.make_grid()), adv_(grid_),
        rhs_(grid_), work_(grid_) {
    params_.validate();
    decay_ = decay_factors(0);
    noise_ = ExactNoise(forcing_, grid_, params_.gamma, params_.dt, params_.dissipation);
  }

  const SimParams& params() const { return params_; }
  const ForcingConfig& forcing() const { return forcing_; }
  const Grid2D& grid() const { return grid_; }

  NoiseRealization increments(StreamId id, std::uint64_t step) const {
    return sample_increments(id, step, params_.dt, forcing_.size());
  }

  /// Caches velocity and gradient of the frozen field for the next step.
  void freeze(const SpectralField& omega) {
    require_same_grid(omega.grid(), grid_);
    adv_.velocity(omega, fu1_, fu2_);
    adv_.gradient(omega, fg1_, fg2_);
    frozen_ = true;
  }

  /// Advances the main SPDE by one step; freezes on the current state.
  void step_main(TrajectoryState& s) {
    freeze(s.omega);
    step_main_frozen(s);
  }

  /// As step_main, reusing the field cached by freeze(s.omega).
  void step_main_frozen(TrajectoryState& s) {
    require_frozen();
    const NoiseRealization inc = increments(s.stream, s.step);
    advance_frozen_self(s.omega, decay_);
    noise_.add_to(s.omega, inc);
    ++s.step;
    s.t = static_cast<double>(s.step) * params_.dt;
    guard(s.omega, "main");
  }

  /// Linearized step around the frozen field.
  void step_linearized(SpectralField& rho) {
    require_frozen();
    linear_step(rho, decay_);
    guard(rho, "linearized");
  }

  /// Control step with damping lambda_N^{gamma/2} on 0 < |k| <= N. Returns
  /// ||P_N rho|| (L2) at the start of the step.
  double step_control(SpectralField& rho, int N) {
    require_frozen();
    if (N > 0 && N > grid_.dealias_cutoff()) {
      throw ConfigError("control cutoff N=" + std::to_string(N) + " exceeds grid cutoff " +
                        std::to_string(grid_.dealias_cutoff()));
    }
    const double low = low_mode_norm(rho, N);
    linear_step(rho, control_decay(N));
    guard(rho, "control");
    return low;
  }

  /// Shifted step for wbar given the OU field Z at the start of the step.
  void step_shifted(SpectralField& wbar, const SpectralField& Z) {
    work_ = wbar;
    work_ += Z;
    freeze(work_);
    const auto& t = grid_.tables();
    if (params_.nonlinear) {
      adv_.product(fu1_, fu2_, fg1_, fg2_, rhs_);
    } else {
      rhs_.set_zero();
    }
    const double dt = params_.dt;
    for (std::size_t i = 0; i < wbar.size(); ++i) {
      wbar[i] = t.keep[i] ? decay_[i] * (wbar[i] - dt * rhs_[i]) : cplx{};
    }
    frozen_ = false;
    guard(wbar, "shifted");
  }

  /// Exact OU step driven by the given increments.
  void step_ou(SpectralField& Z, const NoiseRealization& inc) const {
    const auto& t = grid_.tables();
    for (std::size_t i = 0; i < Z.size(); ++i) Z[i] = t.keep[i] ? decay_[i] * Z[i] : cplx{};
    noise_.add_to(Z, inc);
  }

  /// Advective CFL number max|u| dt / dx of a field.
  double cfl(const SpectralField& omega) {
    PhysicalField u1, u2;
    adv_.velocity(omega, u1, u2);
    double umax = 0.0;
    for (std::size_t j = 0; j < u1.values.size(); ++j) {
      umax = std::max(umax, std::hypot(u1.values[j], u2.values[j]));
    }
    return umax * params_.dt / grid_.dx();
  }

 private:
  std::vector<double> decay_factors(int N) const {
    const auto& t = grid_.tables();
    std::vector<double> e(grid_.spectral_size(), 0.0);
    const double damp = control_rate(N, params_.gamma);
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (t.weight[i] == 0) continue;
      double rate = params_.dissipation ? std::exp(params_.gamma * t.logk[i]) : 0.0;
      if (N > 0 && t.kmag[i] <= N) rate += damp;
      e[i] = std::exp(-rate * params_.dt);
    }
    return e;
  }

  const std::vector<double>& control_decay(int N) {
    if (N <= 0) return decay_;
    auto it = control_decay_.find(N);
    if (it == control_decay_.end()) it = control_decay_.emplace(N, decay_factors(N)).first;
    return it->second;
  }

  double low_mode_norm(const SpectralField& rho, int N) const {
    if (N <= 0) return 0.0;
    const auto& t = grid_.tables();
    double acc = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
      if (t.weight[i] > 0 && t.kmag[i] <= N) acc += t.weight[i] * std::norm(rho[i]);
    }
    return std::sqrt(kBoxArea * acc);
  }

  void advance_frozen_self(SpectralField& omega, const std::vector<double>& decay) {
    const auto& t = grid_.tables();
    if (params_.nonlinear) {
      adv_.product(fu1_, fu2_, fg1_, fg2_, rhs_);
    } else {
      rhs_.set_zero();
    }
    const double dt = params_.dt;
    for (std::size_t i = 0; i < omega.size(); ++i) {
      omega[i] = t.keep[i] ? decay[i] * (omega[i] - dt * rhs_[i]) : cplx{};
    }
    frozen_ = false;
  }

  void linear_step(SpectralField& rho, const std::vector<double>& decay) {
    require_same_grid(rho.grid(), grid_);
    const auto& t = grid_.tables();
    if (params_.nonlinear) {
      // B(rho, omega) + B(omega, rho) = u_rho . grad omega + u_omega . grad rho
      adv_.velocity(rho, ru1_, ru2_);
      adv_.gradient(rho, rg1_, rg2_);
      lin_.grid = grid_;
      lin_.values.resize(grid_.physical_size());
      for (std::size_t j = 0; j < lin_.values.size(); ++j) {
        lin_.values[j] = ru1_.values[j] * fg1_.values[j] + ru2_.values[j] * fg2_.values[j] +
                         fu1_.values[j] * rg1_.values[j] + fu2_.values[j] * rg2_.values[j];
      }
      to_spectral(lin_, rhs_, rscratch_);
      dealias_inplace(rhs_);
    } else {
      rhs_.set_zero();
    }
    const double dt = params_.dt;
    for (std::size_t i = 0; i < rho.size(); ++i) {
      rho[i] = t.keep[i] ? decay[i] * (rho[i] - dt * rhs_[i]) : cplx{};
    }
  }

  void require_frozen() const {
    if (!frozen_) throw Error("integrator used without a frozen field; call freeze() first");
  }

  void guard(const SpectralField& f, const char* what) const {
    if (!f.all_finite()) {
      throw BlowUp(std::string("non-finite coefficient in ") + what + " step");
    }
    const double norm = sobolev_norm(f, 0.0);
    if (norm > params_.blowup_bound) {
      std::ostringstream os;
      os << what << " step: L2 norm " << norm << " exceeds bound " << params_.blowup_bound;
      throw BlowUp(os.str());
    }
  }

  SimParams params_;
  ForcingConfig forcing_;
  Grid2D grid_;
  Advection adv_;
  SpectralField rhs_;
  SpectralField work_;
  std::vector<double> decay_;
  std::map<int, std::vector<double>> control_decay_;
  ExactNoise noise_;
  bool frozen_ = false;
  PhysicalField fu1_, fu2_, fg1_, fg2_;
  PhysicalField ru1_, ru2_, rg1_, rg2_, lin_;
  RealBuffer rscratch_;
};

// Value-returning forms of the steppers.

inline TrajectoryState step_main(TrajectoryState s, const SimParams& params,
                                 const ForcingConfig& forcing) {
  Integrator integ(params, forcing);
  integ.step_main(s);
  return s;
}

inline SpectralField step_linearized(SpectralField rho, const SpectralField& omega,
                                     const SimParams& params) {
  Integrator integ(params, ForcingConfig{});
  integ.freeze(omega);
  integ.step_linearized(rho);
  return rho;
}

inline SpectralField step_control(SpectralField rho, const SpectralField& omega, int N,
                                  const SimParams& params) {
  Integrator integ(params, ForcingConfig{});
  integ.freeze(omega);
  integ.step_control(rho, N);
  return rho;
}

inline SpectralField step_shifted(SpectralField wbar, const SpectralField& Z,
                                  const SimParams& params) {
  Integrator integ(params, ForcingConfig{});
  integ.step_shifted(wbar, Z);
  return wbar;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout (all fields little-endian, 8 bytes each):
//   magic "FESIM1\0\0", n, gamma (f64), dt (f64), step, seed, stream id,
// followed by the n x (n/2 + 1) half-spectrum coefficients as (re, im) f64
// pairs in row-major (k1 row, k2 column) order.

struct CheckpointHeader {
  std::uint64_t n = 0;
  double gamma = 0.0;
  double dt = 0.0;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw IoError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
  }
  pos += 8;
  return v;
}

inline double get_f64(const std::string& in, std::size_t& pos) {
  return std::bit_cast<double>(get_u64(in, pos));
}

inline constexpr char kMagic[8] = {'F', 'E', 'S', 'I', 'M', '1', '\0', '\0'};

}  // namespace detail

inline std::string encode_checkpoint(const TrajectoryState& s, const SimParams& params) {
  std::string out(detail::kMagic, 8);
  const Grid2D& g = s.omega.grid();
  detail::put_u64(out, static_cast<std::uint64_t>(g.n()));
  detail::put_f64(out, params.gamma);
  detail::put_f64(out, params.dt);
  detail::put_u64(out, s.step);
  detail::put_u64(out, s.stream.seed);
  detail::put_u64(out, s.stream.stream);
  for (std::size_t i = 0; i < s.omega.size(); ++i) {
    detail::put_f64(out, s.omega[i].real());
    detail::put_f64(out, s.omega[i].imag());
  }
  return out;
}

/// Decodes a checkpoint onto `grid` (which fixes the dealias cutoff).
inline TrajectoryState decode_checkpoint(const std::string& bytes, const Grid2D& grid,
                                         CheckpointHeader* header = nullptr) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), detail::kMagic, 8) != 0) {
    throw IoError("not a FESIM1 checkpoint");
  }
  std::size_t pos = 8;
  CheckpointHeader h;
  h.n = detail::get_u64(bytes, pos);
  h.gamma = detail::get_f64(bytes, pos);
  h.dt = detail::get_f64(bytes, pos);
  h.step = detail::get_u64(bytes, pos);
  h.seed = detail::get_u64(bytes, pos);
  h.stream = detail::get_u64(bytes, pos);
  if (h.n != static_cast<std::uint64_t>(grid.n())) {
    throw GridMismatch("checkpoint resolution " + std::to_string(h.n) +
                       " does not match grid " + std::to_string(grid.n()));
  }
  TrajectoryState s;
  s.omega = SpectralField(grid);
  for (std::size_t i = 0; i < s.omega.size(); ++i) {
    const double re = detail::get_f64(bytes, pos);
    const double im = detail::get_f64(bytes, pos);
    s.omega[i] = cplx(re, im);
  }
  if (pos != bytes.size()) throw IoError("trailing bytes in checkpoint");
  s.step = h.step;
  s.stream = StreamId{h.seed, h.stream};
  s.t = static_cast<double>(h.step) * h.dt;
  if (header) *header = h;
  return s;
}

inline void save_checkpoint(const std::string& path, const TrajectoryState& s,
                            const SimParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  const std::string bytes = encode_checkpoint(s, params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

inline TrajectoryState load_checkpoint(const std::string& path, const Grid2D& grid,
                                       CheckpointHeader* header = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, grid, header);
}

}  // namespace felab
