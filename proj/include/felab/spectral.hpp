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

// Pseudo-spectral substrate on the periodic box [-pi, pi]^2.
//
// Coefficient convention: a real field is f(x) = sum_k c_k exp(i k.x) with
// integer wavenumbers k. The forward transform divides by n^2, so c_k are
// the analytic Fourier coefficients: sin(k.x) has c_k = -i/2, c_{-k} = i/2
// and cos(k.x) has c_k = c_{-k} = 1/2. The real sin/cos basis e_k used by
// the forcing therefore has ||e_k||_{L2}^2 = 2 pi^2.
//
// Storage is the r2c half spectrum: row a in [0, n) holds k1 (a >= n/2 maps
// to a - n), column b in [0, n/2] holds k2 = b. Coefficients with k2 < 0 are
// implied by c_{-k} = conj(c_k). The zero mode and the Nyquist row/column are
// kept at zero.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "felab/error.hpp"
#include "felab/rng.hpp"

namespace felab {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kBoxArea = 4.0 * kPi * kPi;  // |T^2| = (2 pi)^2

template <class T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) noexcept {}
  T* allocate(std::size_t count) {
    void* p = fftw_malloc(count * sizeof(T));
    if (p == nullptr) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }
  template <class U>
  bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

using RealBuffer = std::vector<double, FftwAllocator<double>>;
using CplxBuffer = std::vector<cplx, FftwAllocator<cplx>>;

namespace detail {

// Per-resolution lookup tables shared by every field on the grid.
struct GridTables {
  int n = 0;
  int nh = 0;
  int cutoff = 0;
  std::vector<int> k1;        // per row
  std::vector<int> k2;        // per column
  std::vector<double> ksq;    // |k|^2 per stored coefficient
  std::vector<double> kmag;   // |k|
  std::vector<double> logk;   // log|k| (0 at k = 0)
  std::vector<double> weight; // 1 for k2 = 0, 2 otherwise, 0 on zero/Nyquist
  std::vector<double> sign;   // (-1)^(k1+k2) from the -pi grid origin
  std::vector<unsigned char> keep;  // inside the dealias cutoff
};

inline std::shared_ptr<const GridTables> make_tables(int n, int cutoff) {
  auto t = std::make_shared<GridTables>();
  t->n = n;
  t->nh = n / 2 + 1;
  t->cutoff = cutoff;
  t->k1.resize(n);
  t->k2.resize(t->nh);
  for (int a = 0; a < n; ++a) t->k1[a] = a < n / 2 ? a : a - n;
  for (int b = 0; b < t->nh; ++b) t->k2[b] = b;
  const std::size_t size = static_cast<std::size_t>(n) * t->nh;
  t->ksq.resize(size);
  t->kmag.resize(size);
  t->logk.resize(size);
  t->weight.resize(size);
  t->sign.resize(size);
  t->keep.resize(size);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < t->nh; ++b) {
      const std::size_t i = static_cast<std::size_t>(a) * t->nh + b;
      const int p = t->k1[a];
      const int q = t->k2[b];
      const double ksq = static_cast<double>(p) * p + static_cast<double>(q) * q;
      t->ksq[i] = ksq;
      t->kmag[i] = std::sqrt(ksq);
      t->logk[i] = ksq > 0 ? 0.5 * std::log(ksq) : 0.0;
      const bool nyquist = (a == n / 2) || (b == n / 2);
      const bool zero = (p == 0 && q == 0);
      t->weight[i] = (nyquist || zero) ? 0.0 : (q == 0 ? 1.0 : 2.0);
      t->sign[i] = ((p + q) % 2 == 0) ? 1.0 : -1.0;
      t->keep[i] = (!nyquist && !zero && std::abs(p) <= cutoff && q <= cutoff) ? 1 : 0;
    }
  }
  return t;
}

struct FftPlans {
  fftw_plan forward = nullptr;   // r2c
  fftw_plan backward = nullptr;  // c2r
};

// FFTW planning is not thread-safe; executing a plan on new arrays is.
// FFTW_ESTIMATE keeps the chosen algorithm (and its roundoff) identical
// across processes.
inline const FftPlans& plans_for(int n) {
  static std::mutex mutex;
  static std::map<int, FftPlans> registry;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = registry.find(n);
  if (it != registry.end()) return it->second;
  RealBuffer real(static_cast<std::size_t>(n) * n);
  CplxBuffer spec(static_cast<std::size_t>(n) * (n / 2 + 1));
  auto* c = reinterpret_cast<fftw_complex*>(spec.data());
  FftPlans p;
  p.forward = fftw_plan_dft_r2c_2d(n, n, real.data(), c, FFTW_ESTIMATE);
  p.backward = fftw_plan_dft_c2r_2d(n, n, c, real.data(), FFTW_ESTIMATE);
  return registry.emplace(n, p).first->second;
}

}  // namespace detail

/// Square collocation grid on [-pi, pi]^2 with integer wavenumbers.
class Grid2D {
 public:
  Grid2D() = default;

  /// `cutoff` < 0 selects the 2/3 rule, floor(n/3).
  explicit Grid2D(int n, int cutoff = -1) {
    if (n < 8 || n % 2 != 0) {
      throw ConfigError("grid size must be even and >= 8, got " + std::to_string(n));
    }
    if (cutoff < 0) cutoff = n / 3;
    if (cutoff >= n / 2) {
      throw ConfigError("dealias cutoff " + std::to_string(cutoff) + " must be below n/2");
    }
    tables_ = detail::make_tables(n, cutoff);
  }

  int n() const { return tables_ ? tables_->n : 0; }
  int nh() const { return tables_->nh; }
  int dealias_cutoff() const { return tables_->cutoff; }
  std::size_t spectral_size() const { return static_cast<std::size_t>(n()) * nh(); }
  std::size_t physical_size() const { return static_cast<std::size_t>(n()) * n(); }
  double dx() const { return 2.0 * kPi / n(); }
  /// Coordinate of collocation index j along either axis.
  double coord(int j) const { return -kPi + dx() * j; }

  const detail::GridTables& tables() const { return *tables_; }

  /// Storage index of wavevector k, or -1 when k is not representable.
  /// `conjugate` is set when k2 < 0 (the stored value is conj(c_k)).
  long index_of(int k1, int k2, bool* conjugate = nullptr) const {
    bool conj = false;
    if (k2 < 0) {
      k1 = -k1;
      k2 = -k2;
      conj = true;
    }
    const int half = n() / 2;
    if (k2 >= half || k1 >= half || k1 <= -half) return -1;
    const int a = k1 >= 0 ? k1 : k1 + n();
    if (conjugate) *conjugate = conj;
    return static_cast<long>(a) * nh() + k2;
  }

  friend bool operator==(const Grid2D& x, const Grid2D& y) {
    return x.n() == y.n() && (x.n() == 0 || x.dealias_cutoff() == y.dealias_cutoff());
  }

 private:
  std::shared_ptr<const detail::GridTables> tables_;
};

inline void require_same_grid(const Grid2D& a, const Grid2D& b) {
  if (!(a == b)) {
    throw GridMismatch("grid mismatch: n=" + std::to_string(a.n()) + " vs n=" +
                       std::to_string(b.n()));
  }
}

/// Samples of a real field at the collocation points, row-major in (x1, x2).
struct PhysicalField {
  Grid2D grid;
  RealBuffer values;

  PhysicalField() = default;
  explicit PhysicalField(const Grid2D& g) : grid(g), values(g.physical_size(), 0.0) {}

  double& at(int j1, int j2) { return values[static_cast<std::size_t>(j1) * grid.n() + j2]; }
  double at(int j1, int j2) const {
    return values[static_cast<std::size_t>(j1) * grid.n() + j2];
  }

  template <class F>
  static PhysicalField from_function(const Grid2D& g, F&& f) {
    PhysicalField out(g);
    for (int j1 = 0; j1 < g.n(); ++j1) {
      for (int j2 = 0; j2 < g.n(); ++j2) out.at(j1, j2) = f(g.coord(j1), g.coord(j2));
    }
    return out;
  }
};

/// Fourier coefficients of a real, mean-zero field.
class SpectralField {
 public:
  SpectralField() = default;
  explicit SpectralField(const Grid2D& g) : grid_(g), coeffs_(g.spectral_size(), cplx{}) {}

  const Grid2D& grid() const { return grid_; }
  CplxBuffer& data() { return coeffs_; }
  const CplxBuffer& data() const { return coeffs_; }
  std::size_t size() const { return coeffs_.size(); }
  cplx& operator[](std::size_t i) { return coeffs_[i]; }
  const cplx& operator[](std::size_t i) const { return coeffs_[i]; }

  /// c_k for any integer k (zero when not representable).
  cplx coeff(int k1, int k2) const {
    bool conj = false;
    const long i = grid_.index_of(k1, k2, &conj);
    if (i < 0) return {};
    return conj ? std::conj(coeffs_[i]) : coeffs_[i];
  }

  /// Adds `value` to c_k and conj(value) to c_{-k}.
  void add_mode(int k1, int k2, cplx value) {
    if (k1 == 0 && k2 == 0) return;
    bool conj = false;
    const long i = grid_.index_of(k1, k2, &conj);
    if (i < 0) throw ConfigError("wavevector outside grid");
    if (k2 == 0) {
      const long j = grid_.index_of(-k1, 0);
      coeffs_[i] += value;
      coeffs_[j] += std::conj(value);
    } else {
      coeffs_[i] += conj ? std::conj(value) : value;
    }
  }

  void set_zero() { std::fill(coeffs_.begin(), coeffs_.end(), cplx{}); }

  SpectralField& operator+=(const SpectralField& o) {
    require_same_grid(grid_, o.grid_);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
    return *this;
  }
  SpectralField& operator-=(const SpectralField& o) {
    require_same_grid(grid_, o.grid_);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
    return *this;
  }
  SpectralField& operator*=(double s) {
    for (auto& c : coeffs_) c *= s;
    return *this;
  }
  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(double s, SpectralField a) { return a *= s; }

  /// a*x + y without temporaries.
  void axpy(double a, const SpectralField& x) {
    require_same_grid(grid_, x.grid_);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += a * x.coeffs_[i];
  }

  bool all_finite() const {
    for (const auto& c : coeffs_) {
      if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
    }
    return true;
  }

  friend bool operator==(const SpectralField& a, const SpectralField& b) {
    return a.grid_ == b.grid_ && a.coeffs_ == b.coeffs_;
  }

 private:
  Grid2D grid_;
  CplxBuffer coeffs_;
};

// ---------------------------------------------------------------------------
// Transforms

/// Inverse transform into caller-owned storage. `scratch` must hold
/// spectral_size() entries; c2r destroys its input so the coefficients are
/// copied there first.
inline void to_physical(const SpectralField& f, PhysicalField& out, CplxBuffer& scratch) {
  const Grid2D& g = f.grid();
  if (!(out.grid == g)) out = PhysicalField(g);
  scratch.resize(g.spectral_size());
  const auto& sign = g.tables().sign;
  for (std::size_t i = 0; i < f.size(); ++i) scratch[i] = f[i] * sign[i];
  fftw_execute_dft_c2r(detail::plans_for(g.n()).backward,
                       reinterpret_cast<fftw_complex*>(scratch.data()), out.values.data());
}

inline PhysicalField to_physical(const SpectralField& f) {
  PhysicalField out(f.grid());
  CplxBuffer scratch(f.grid().spectral_size());
  to_physical(f, out, scratch);
  return out;
}

/// Forward transform; the mean and the Nyquist modes are projected out.
inline void to_spectral(const PhysicalField& g, SpectralField& out, RealBuffer& scratch) {
  const Grid2D& grid = g.grid;
  if (!(out.grid() == grid)) out = SpectralField(grid);
  scratch.assign(g.values.begin(), g.values.end());
  fftw_execute_dft_r2c(detail::plans_for(grid.n()).forward, scratch.data(),
                       reinterpret_cast<fftw_complex*>(out.data().data()));
  const auto& t = grid.tables();
  const double norm = 1.0 / (static_cast<double>(grid.n()) * grid.n());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = t.weight[i] > 0 ? out[i] * (t.sign[i] * norm) : cplx{};
  }
}

inline SpectralField to_spectral(const PhysicalField& g) {
  SpectralField out(g.grid);
  RealBuffer scratch;
  to_spectral(g, out, scratch);
  return out;
}

// ---------------------------------------------------------------------------
// Fourier multipliers

/// Real radial symbol phi(|k|) applied coefficient-wise.
struct MultiplierSymbol {
  std::string name;
  std::function<double(double)> phi;

  double operator()(double kmag) const { return phi(kmag); }

  /// Lambda^gamma = (-Delta)^(gamma/2).
  static MultiplierSymbol frac_laplacian(double gamma) {
    return {"frac_laplacian", [gamma](double k) { return std::pow(k, gamma); }};
  }
  /// exp(-t Lambda^gamma).
  static MultiplierSymbol heat(double gamma, double t) {
    return {"heat", [gamma, t](double k) { return std::exp(-std::pow(k, gamma) * t); }};
  }
  /// P_N: projection on 0 < |k| <= N.
  static MultiplierSymbol low_pass(double cutoff) {
    return {"low_pass", [cutoff](double k) { return (k > 0 && k <= cutoff) ? 1.0 : 0.0; }};
  }
  /// Q_N = 1 - P_N.
  static MultiplierSymbol high_pass(double cutoff) {
    return {"high_pass", [cutoff](double k) { return (k > 0 && k <= cutoff) ? 0.0 : 1.0; }};
  }
  static MultiplierSymbol sobolev(double s) {
    return {"sobolev", [s](double k) { return std::pow(k, s); }};
  }
  /// |k|^s sqrt(log|k|); zero on the |k| = 1 shell.
  static MultiplierSymbol log_weight(double s) {
    return {"log_weight", [s](double k) {
              return k >= 2.0 ? std::pow(k, s) * std::sqrt(std::log(k)) : 0.0;
            }};
  }
};

inline SpectralField apply_multiplier(const SpectralField& f, const MultiplierSymbol& symbol) {
  SpectralField out = f;
  const auto& t = f.grid().tables();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = t.weight[i] > 0 ? out[i] * symbol(t.kmag[i]) : cplx{};
  }
  return out;
}

/// Multiplies by |k|^s in place. Faster than the generic symbol path.
inline void apply_power(SpectralField& f, double s) {
  const auto& t = f.grid().tables();
  for (std::size_t i = 0; i < f.size(); ++i) {
    f[i] = t.weight[i] > 0 ? f[i] * std::exp(s * t.logk[i]) : cplx{};
  }
}

/// Zeros every coefficient with max(|k1|, |k2|) above the grid cutoff.
inline void dealias_inplace(SpectralField& f) {
  const auto& keep = f.grid().tables().keep;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!keep[i]) f[i] = cplx{};
  }
}

inline SpectralField dealias(SpectralField f) {
  dealias_inplace(f);
  return f;
}

// ---------------------------------------------------------------------------
// Biot-Savart

struct Velocity {
  SpectralField u1;
  SpectralField u2;
};

/// u = grad^perp (Delta^{-1} omega), so that -d2 u1 + d1 u2 = omega and
/// div u = 0. In Fourier: u_hat = -i k^perp omega_hat / |k|^2 with
/// k^perp = (-k2, k1).
inline Velocity biot_savart(const SpectralField& omega) {
  const Grid2D& g = omega.grid();
  const auto& t = g.tables();
  Velocity v{SpectralField(g), SpectralField(g)};
  for (int a = 0; a < g.n(); ++a) {
    for (int b = 0; b < g.nh(); ++b) {
      const std::size_t i = static_cast<std::size_t>(a) * g.nh() + b;
      if (t.weight[i] == 0) continue;
      const cplx z = cplx(0.0, 1.0) * omega[i] / t.ksq[i];
      v.u1[i] = static_cast<double>(t.k2[b]) * z;
      v.u2[i] = -static_cast<double>(t.k1[a]) * z;
    }
  }
  return v;
}

/// d/dx1 and d/dx2 in spectral space.
inline SpectralField derivative(const SpectralField& f, int axis) {
  const Grid2D& g = f.grid();
  const auto& t = g.tables();
  SpectralField out(g);
  for (int a = 0; a < g.n(); ++a) {
    for (int b = 0; b < g.nh(); ++b) {
      const std::size_t i = static_cast<std::size_t>(a) * g.nh() + b;
      const double k = axis == 0 ? t.k1[a] : t.k2[b];
      out[i] = t.weight[i] > 0 ? cplx(0.0, k) * f[i] : cplx{};
    }
  }
  return out;
}

/// -d2 u1 + d1 u2.
inline SpectralField perp_divergence(const SpectralField& u1, const SpectralField& u2) {
  SpectralField out = derivative(u2, 0);
  out -= derivative(u1, 1);
  return out;
}

// ---------------------------------------------------------------------------
// Norms and inner products

/// Sum over the full lattice of w(k) |c_k|^2, using Hermitian weights.
template <class W>
double weighted_energy(const SpectralField& f, W&& w) {
  const auto& t = f.grid().tables();
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (t.weight[i] == 0) continue;
    acc += t.weight[i] * w(i) * std::norm(f[i]);
  }
  return acc;
}

/// ||Lambda^s f||_{L2}^2 = (2 pi)^2 sum |k|^{2s} |c_k|^2.
inline double sobolev_norm_sq(const SpectralField& f, double s) {
  const auto& t = f.grid().tables();
  if (s == 0.0) return kBoxArea * weighted_energy(f, [](std::size_t) { return 1.0; });
  return kBoxArea *
         weighted_energy(f, [&](std::size_t i) { return std::exp(2.0 * s * t.logk[i]); });
}

inline double sobolev_norm(const SpectralField& f, double s) {
  return std::sqrt(sobolev_norm_sq(f, s));
}

/// L2 inner product over the box, computed from coefficients.
inline double inner(const SpectralField& f, const SpectralField& g) {
  require_same_grid(f.grid(), g.grid());
  const auto& t = f.grid().tables();
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (t.weight[i] == 0) continue;
    acc += t.weight[i] * (f[i].real() * g[i].real() + f[i].imag() * g[i].imag());
  }
  return kBoxArea * acc;
}

/// Grid-point quadrature of the integral over the box.
inline double integrate(const PhysicalField& g) {
  double acc = 0.0;
  for (double v : g.values) acc += v;
  return acc * kBoxArea / static_cast<double>(g.values.size());
}

/// Integer power by repeated multiplication (exact path for even p).
inline double ipow(double x, int p) {
  double r = 1.0;
  double b = x;
  unsigned e = static_cast<unsigned>(p);
  while (e) {
    if (e & 1u) r *= b;
    b *= b;
    e >>= 1u;
  }
  return r;
}

/// (int |g|^p)^{1/p} by grid-point quadrature. Exact for band-limited
/// |g|^p with even p when p times the band stays below n; larger p aliases.
inline double lp_norm(const PhysicalField& g, double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw ConfigError("lp_norm needs finite p >= 1");
  const bool integral = (p == std::floor(p)) && p <= 64;
  double acc = 0.0;
  for (double v : g.values) {
    const double a = std::abs(v);
    acc += integral ? ipow(a, static_cast<int>(p)) : std::pow(a, p);
  }
  acc *= kBoxArea / static_cast<double>(g.values.size());
  return std::pow(acc, 1.0 / p);
}

inline double lp_norm(const SpectralField& f, double p) { return lp_norm(to_physical(f), p); }

// ---------------------------------------------------------------------------
// Field construction helpers

/// Random Hermitian field supported on 0 < max(|k1|,|k2|) <= band, with
/// coefficient magnitude ~ amplitude * |k|^(-decay) and uniform phases.
inline SpectralField random_field(const Grid2D& g, int band, PhiloxEngine& rng,
                                  double decay = 0.0, double amplitude = 1.0) {
  SpectralField f(g);
  const int lim = std::min(band, g.n() / 2 - 1);
  for (int k1 = -lim; k1 <= lim; ++k1) {
    for (int k2 = 0; k2 <= lim; ++k2) {
      if (k2 == 0 && k1 <= 0) continue;
      const double kmag = std::sqrt(static_cast<double>(k1) * k1 + static_cast<double>(k2) * k2);
      const double scale = amplitude * std::pow(kmag, -decay);
      f.add_mode(k1, k2, scale * cplx(rng.normal(), rng.normal()));
    }
  }
  return f;
}

/// Copies every coefficient of f that `target` can represent (inside its
/// dealias cutoff) onto `target`.
inline SpectralField regrid(const SpectralField& f, const Grid2D& target) {
  SpectralField out(target);
  const Grid2D& g = f.grid();
  const auto& t = g.tables();
  for (int a = 0; a < g.n(); ++a) {
    for (int b = 0; b < g.nh(); ++b) {
      const std::size_t i = static_cast<std::size_t>(a) * g.nh() + b;
      if (t.weight[i] == 0 || f[i] == cplx{}) continue;
      const long j = target.index_of(t.k1[a], t.k2[b]);
      if (j >= 0 && target.tables().keep[j]) out[j] = f[i];
    }
  }
  return out;
}

/// f(. - a): multiplies c_k by e^{-i k.a}.
inline SpectralField translate(const SpectralField& f, double a1, double a2) {
  SpectralField out(f.grid());
  const auto& t = f.grid().tables();
  const int nh = f.grid().nh();
  for (int a = 0; a < f.grid().n(); ++a) {
    for (int b = 0; b < nh; ++b) {
      const std::size_t i = static_cast<std::size_t>(a) * nh + b;
      out[i] = f[i] * std::polar(1.0, -(t.k1[a] * a1 + t.k2[b] * a2));
    }
  }
  return out;
}

/// Physical samples of sin(k.x) or cos(k.x) represented exactly.
inline SpectralField trig_mode(const Grid2D& g, int k1, int k2, bool sine, double amp = 1.0) {
  SpectralField f(g);
  f.add_mode(k1, k2, sine ? cplx(0.0, -0.5 * amp) : cplx(0.5 * amp, 0.0));
  return f;
}

}  // namespace felab
