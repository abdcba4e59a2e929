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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "felab/dynamics.hpp"

namespace felab {
namespace {

double max_coeff_diff(const SpectralField& a, const SpectralField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_coeff(const SpectralField& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
  return m;
}

SimParams quiet(int n, double gamma, double dt) {
  SimParams p;
  p.n = n;
  p.gamma = gamma;
  p.dt = dt;
  return p;
}

TEST(Bilinear, ZeroSecondArgument) {
  const Grid2D g(32);
  PhiloxEngine rng(1);
  const auto f = random_field(g, 8, rng);
  EXPECT_EQ(max_coeff(bilinear_B(f, SpectralField(g))), 0.0);
}

TEST(Bilinear, TwoModeAnalytic) {
  const Grid2D g(32);
  const auto B = bilinear_B(trig_mode(g, 1, 0, true), trig_mode(g, 0, 1, true));
  // u = (0, -cos x1), grad sin x2 = (0, cos x2): B = -cos x1 cos x2
  // = -(cos(x1 + x2) + cos(x1 - x2)) / 2
  SpectralField expect = trig_mode(g, 1, 1, false, -0.5);
  expect += trig_mode(g, 1, -1, false, -0.5);
  EXPECT_LT(max_coeff_diff(B, expect), 1e-15);
}

TEST(Bilinear, SelfTransportCancellation) {
  const Grid2D g(64);
  PhiloxEngine rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = random_field(g, g.dealias_cutoff(), rng, 1.0);
    const double lhs = std::abs(inner(bilinear_B(w, w), w));
    EXPECT_LE(lhs, 1e-8 * std::pow(sobolev_norm(w, 0.0), 3));
  }
}

TEST(Bilinear, LpCancellationEvenPowers) {
  const Grid2D g(128);
  PhiloxEngine rng(3);
  for (int p : {4, 6}) {
    const int band = 128 / (2 * p);
    const auto w = random_field(g, band, rng, 1.0);
    const auto B = to_physical(bilinear_B(w, w));
    const auto wp = to_physical(w);
    PhysicalField prod(g), pow(g);
    for (std::size_t j = 0; j < prod.values.size(); ++j) {
      pow.values[j] = ipow(wp.values[j], p - 1);
      prod.values[j] = B.values[j] * pow.values[j];
    }
    const double scale = lp_norm(B, 2.0) * lp_norm(pow, 2.0);
    EXPECT_LE(std::abs(integrate(prod)), 1e-6 * scale) << "p=" << p;
  }
}

TEST(LambdaN, Convention) {
  EXPECT_EQ(lambda_N(1), 1.0);
  EXPECT_EQ(std::pow(lambda_N(4), 0.5 * 1.0), 4.0);
  EXPECT_EQ(std::pow(lambda_N(3), 0.5 * 2.0), 9.0);
  EXPECT_THROW(lambda_N(0), ConfigError);
}

TEST(SimParams, Validation) {
  SimParams p;
  p.gamma = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p.gamma = 2.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p.gamma = 2.0;
  p.dt = -1.0;
  EXPECT_THROW(p.validate(), ConfigError);
}

class LinearDecay : public ::testing::TestWithParam<double> {};

TEST_P(LinearDecay, SingleModeExact) {
  const double gamma = GetParam();
  SimParams p = quiet(16, gamma, 1e-3);
  p.nonlinear = false;
  Integrator integ(p, ForcingConfig{});
  TrajectoryState s{0.0, trig_mode(integ.grid(), 2, 1, true), 0, {1, 0}};
  for (int i = 0; i < 1000; ++i) integ.step_main(s);
  const double expect = -0.5 * std::exp(-std::pow(std::sqrt(5.0), gamma) * s.t);
  EXPECT_NEAR(s.t, 1.0, 1e-15);
  EXPECT_NEAR(s.omega.coeff(2, 1).imag(), expect, 1e-12 * std::abs(expect));
}

INSTANTIATE_TEST_SUITE_P(Gammas, LinearDecay, ::testing::Values(0.25, 0.5, 1.0, 2.0));

TEST(MainStep, SameSeedBitIdentical) {
  SimParams p = quiet(32, 1.0, 1e-3);
  const auto forcing = ForcingConfig::ball(3);
  auto run = [&](std::uint64_t seed) {
    Integrator integ(p, forcing);
    PhiloxEngine rng(5);
    TrajectoryState s{0.0, random_field(integ.grid(), 6, rng, 2.0), 0, {seed, 0}};
    for (int i = 0; i < 100; ++i) integ.step_main(s);
    return s.omega;
  };
  EXPECT_EQ(run(7), run(7));
  EXPECT_FALSE(run(7) == run(8));
}

TEST(MainStep, FreeFunctionMatchesIntegrator) {
  SimParams p = quiet(32, 0.5, 1e-2);
  const auto forcing = ForcingConfig::ball(2);
  PhiloxEngine rng(6);
  TrajectoryState s{0.0, dealias(random_field(Grid2D(32), 6, rng, 2.0)), 0, {3, 1}};
  const auto a = step_main(s, p, forcing);
  Integrator integ(p, forcing);
  integ.step_main(s);
  EXPECT_EQ(a.omega, s.omega);
  EXPECT_EQ(a.step, 1u);
}

TEST(MainStep, BlowUpGuard) {
  SimParams p = quiet(16, 1.0, 1e-3);
  p.blowup_bound = 1.0;
  Integrator integ(p, ForcingConfig{});
  TrajectoryState s{0.0, trig_mode(integ.grid(), 1, 0, true, 10.0), 0, {}};
  EXPECT_THROW(integ.step_main(s), BlowUp);
  s.omega[1] = cplx(std::nan(""), 0.0);
  p.blowup_bound = 1e6;
  Integrator integ2(p, ForcingConfig{});
  EXPECT_THROW(integ2.step_main(s), BlowUp);
}

TEST(MainStep, EulerConservationRichardson) {
  // Unforced, undissipated: the discrete L2 drift is O(dt); its Richardson
  // extrapolation to dt -> 0 must vanish.
  const Grid2D g(64);
  PhiloxEngine rng(8);
  auto w0 = random_field(g, 6, rng, 2.0);
  w0 *= 1.0 / sobolev_norm(w0, 0.0);
  auto drift = [&](double dt) {
    SimParams p = quiet(64, 1.0, dt);
    p.dissipation = false;
    Integrator integ(p, ForcingConfig{});
    TrajectoryState s{0.0, w0, 0, {}};
    const auto steps = p.steps_for(1.0);
    for (std::uint64_t i = 0; i < steps; ++i) integ.step_main(s);
    return sobolev_norm(s.omega, 0.0) / sobolev_norm(w0, 0.0) - 1.0;
  };
  const double d1 = drift(1e-3);
  const double d2 = drift(5e-4);
  EXPECT_LT(std::abs(2.0 * d2 - d1), 1e-6);
}

TEST(MainStep, EnergyIdentityFirstOrder) {
  const Grid2D g(64);
  PhiloxEngine rng(9);
  const auto w0 = random_field(g, 8, rng, 2.0, 0.5);
  const double gamma = 0.8;
  const double rate = -2.0 * sobolev_norm_sq(w0, 0.5 * gamma);
  auto residual = [&](double dt) {
    SimParams p = quiet(64, gamma, dt);
    Integrator integ(p, ForcingConfig{});
    TrajectoryState s{0.0, w0, 0, {}};
    integ.step_main(s);
    const double diff = (sobolev_norm_sq(s.omega, 0.0) - sobolev_norm_sq(w0, 0.0)) / dt;
    return std::abs(diff - rate) / std::abs(rate);
  };
  const double r1 = residual(1e-3);
  const double r2 = residual(5e-4);
  const double r3 = residual(2.5e-4);
  EXPECT_LT(r1, 0.1);
  EXPECT_GE(std::log2(r1 / r2), 0.9);
  EXPECT_GE(std::log2(r2 / r3), 0.9);
}

TEST(MainStep, WeakOrderSanity) {
  const auto forcing = ForcingConfig::ball(2, 1.0, 0.5);
  auto ensemble = [&](double dt, std::uint64_t seed) {
    SimParams p = quiet(32, 1.0, dt);
    Integrator integ(p, forcing);
    double sum = 0.0, sumsq = 0.0;
    const int paths = 64;
    for (int path = 0; path < paths; ++path) {
      TrajectoryState s{0.0, SpectralField(integ.grid()), 0,
                        {seed, static_cast<std::uint64_t>(path)}};
      const auto steps = p.steps_for(1.0);
      for (std::uint64_t i = 0; i < steps; ++i) integ.step_main(s);
      const double e = sobolev_norm_sq(s.omega, 0.0);
      sum += e;
      sumsq += e * e;
    }
    const double mean = sum / paths;
    const double var = (sumsq - paths * mean * mean) / (paths - 1);
    return std::pair{mean, var / paths};
  };
  const auto [m1, v1] = ensemble(0.02, 1);
  const auto [m2, v2] = ensemble(0.01, 2);
  EXPECT_LT(std::abs(m1 - m2), 1.96 * std::sqrt(v1 + v2));
}

TEST(Linearized, ZeroBackgroundIsHeatFlow) {
  SimParams p = quiet(32, 0.5, 1e-2);
  const Grid2D g = p.make_grid();
  PhiloxEngine rng(10);
  const auto rho = random_field(g, 8, rng);
  auto out = rho;
  Integrator integ(p, ForcingConfig{});
  for (int i = 0; i < 10; ++i) {
    integ.freeze(SpectralField(g));
    integ.step_linearized(out);
  }
  const auto expect = apply_multiplier(rho, MultiplierSymbol::heat(0.5, 0.1));
  EXPECT_LT(max_coeff_diff(out, expect), 1e-14 * max_coeff(rho));
}

TEST(Linearized, ExactlyLinear) {
  SimParams p = quiet(64, 0.5, 1e-2);
  const Grid2D g = p.make_grid();
  PhiloxEngine rng(11);
  const auto w = random_field(g, 10, rng, 1.0);
  const auto r1 = random_field(g, 10, rng, 1.0);
  const auto r2 = random_field(g, 10, rng, 1.0);
  const double a = 0.7, b = -1.3;
  const auto combo = step_linearized(a * r1 + b * r2, w, p);
  const auto sep = a * step_linearized(r1, w, p) + b * step_linearized(r2, w, p);
  EXPECT_LT(max_coeff_diff(combo, sep), 1e-12 * max_coeff(combo));
}

TEST(Linearized, FiniteDifferenceConsistency) {
  SimParams p = quiet(32, 0.5, 1e-3);
  const Grid2D g = p.make_grid();
  PhiloxEngine rng(12);
  const auto w0 = random_field(g, 5, rng, 2.0, 0.5);
  auto xi = random_field(g, 5, rng, 2.0);
  xi *= 1.0 / sobolev_norm(xi, 0.0);
  const auto steps = p.steps_for(0.5);

  Integrator integ(p, ForcingConfig{});
  TrajectoryState base{0.0, w0, 0, {}};
  SpectralField rho = xi;
  for (std::uint64_t i = 0; i < steps; ++i) {
    integ.freeze(base.omega);
    integ.step_linearized(rho);
    integ.step_main_frozen(base);
  }
  std::vector<double> errs;
  for (double h : {1e-3, 1e-4, 1e-5}) {
    TrajectoryState pert{0.0, w0 + h * xi, 0, {}};
    for (std::uint64_t i = 0; i < steps; ++i) integ.step_main(pert);
    SpectralField fd = pert.omega - base.omega;
    fd *= 1.0 / h;
    errs.push_back(sobolev_norm(fd - rho, 0.0) / sobolev_norm(rho, 0.0));
  }
  EXPECT_GE(std::log10(errs[0] / errs[1]), 0.9);
  EXPECT_GE(std::log10(errs[1] / errs[2]), 0.9);
}

TEST(Control, SingleModeRate) {
  const double gamma = 0.5;
  SimParams p = quiet(32, gamma, 1e-2);
  const Grid2D g = p.make_grid();
  const int N = 4;
  auto rho = trig_mode(g, 2, 1, true);
  Integrator integ(p, ForcingConfig{});
  for (int i = 0; i < 100; ++i) {
    integ.freeze(SpectralField(g));
    integ.step_control(rho, N);
  }
  const double rate = std::pow(std::sqrt(5.0), gamma) + std::pow(lambda_N(N), 0.5 * gamma);
  EXPECT_NEAR(rho.coeff(2, 1).imag(), -0.5 * std::exp(-rate * 1.0), 1e-14);
  // modes above N see only the fractional dissipation
  auto hi = trig_mode(g, 5, 0, false);
  integ.freeze(SpectralField(g));
  integ.step_control(hi, N);
  EXPECT_NEAR(hi.coeff(5, 0).real(), 0.5 * std::exp(-std::pow(5.0, gamma) * 1e-2), 1e-15);
}

TEST(Control, ZeroCutoffMatchesLinearizedBitwise) {
  SimParams p = quiet(64, 0.5, 1e-2);
  const Grid2D g = p.make_grid();
  PhiloxEngine rng(14);
  const auto w = random_field(g, 10, rng, 1.0);
  const auto r = random_field(g, 10, rng, 1.0);
  EXPECT_EQ(step_control(r, w, 0, p), step_linearized(r, w, p));
}

TEST(Control, CutoffBeyondGridRejected) {
  SimParams p = quiet(32, 0.5, 1e-2);
  Integrator integ(p, ForcingConfig{});
  auto rho = SpectralField(integ.grid());
  integ.freeze(rho);
  EXPECT_THROW(integ.step_control(rho, 20), ConfigError);
}

TEST(Control, ReturnsLowModeNorm) {
  SimParams p = quiet(32, 0.5, 1e-2);
  Integrator integ(p, ForcingConfig{});
  SpectralField rho = trig_mode(integ.grid(), 1, 1, true, 2.0);
  rho += trig_mode(integ.grid(), 6, 0, true, 5.0);
  integ.freeze(SpectralField(integ.grid()));
  // only the |k| = sqrt 2 mode lies in P_2: ||2 sin(x1 + x2)|| = 2 sqrt(2) pi
  EXPECT_NEAR(integ.step_control(rho, 2), 2.0 * std::sqrt(2.0) * kPi, 1e-12);
}

TEST(Shifted, ZeroOUIsDissipative) {
  SimParams p = quiet(64, 0.5, 1e-3);
  const Grid2D g = p.make_grid();
  PhiloxEngine rng(15);
  auto wbar = random_field(g, 8, rng, 2.0, 0.5);
  const SpectralField Z(g);
  Integrator integ(p, ForcingConfig{});
  double prev = sobolev_norm(wbar, 0.0);
  for (int i = 0; i < 200; ++i) {
    integ.step_shifted(wbar, Z);
    const double cur = sobolev_norm(wbar, 0.0);
    EXPECT_LE(cur, prev);
    prev = cur;
  }
}

TEST(Shifted, ZeroIsFixedPoint) {
  SimParams p = quiet(32, 1.0, 1e-2);
  const Grid2D g = p.make_grid();
  SpectralField wbar(g);
  for (int i = 0; i < 10; ++i) wbar = step_shifted(wbar, SpectralField(g), p);
  EXPECT_EQ(max_coeff(wbar), 0.0);
}

TEST(Shifted, PlusOUReproducesMain) {
  SimParams p = quiet(32, 0.5, 1e-2);
  const auto forcing = ForcingConfig::ball(3);
  Integrator integ(p, forcing);
  const Grid2D& g = integ.grid();
  PhiloxEngine rng(16);
  const auto w0 = random_field(g, 6, rng, 2.0);
  TrajectoryState main{0.0, w0, 0, {21, 3}};
  SpectralField wbar = w0, Z(g);
  for (int i = 0; i < 200; ++i) {
    const auto inc = integ.increments(main.stream, main.step);
    integ.step_shifted(wbar, Z);
    integ.step_ou(Z, inc);
    integ.step_main(main);
  }
  EXPECT_LT(max_coeff_diff(wbar + Z, main.omega), 1e-12 * max_coeff(main.omega));
}

TEST(Checkpoint, ByteExactRoundTrip) {
  SimParams p = quiet(32, 0.75, 2e-3);
  p.seed = 77;
  Integrator integ(p, ForcingConfig::ball(2));
  PhiloxEngine rng(17);
  TrajectoryState s{0.0, random_field(integ.grid(), 8, rng, 2.0), 0, {77, 5}};
  for (int i = 0; i < 13; ++i) integ.step_main(s);
  const auto bytes = encode_checkpoint(s, p);
  ASSERT_EQ(bytes.substr(0, 6), "FESIM1");
  EXPECT_EQ(bytes.size(), 8u + 6u * 8u + 16u * integ.grid().spectral_size());
  CheckpointHeader h;
  const auto back = decode_checkpoint(bytes, integ.grid(), &h);
  EXPECT_EQ(encode_checkpoint(back, p), bytes);
  EXPECT_EQ(h.n, 32u);
  EXPECT_EQ(h.gamma, 0.75);
  EXPECT_EQ(h.step, 13u);
  EXPECT_EQ(h.seed, 77u);
  EXPECT_EQ(h.stream, 5u);
  EXPECT_EQ(back.omega, s.omega);
}

TEST(Checkpoint, ResumeIsBitExact) {
  SimParams p = quiet(32, 0.5, 1e-2);
  const auto forcing = ForcingConfig::ball(3);
  Integrator integ(p, forcing);
  PhiloxEngine rng(18);
  const auto w0 = random_field(integ.grid(), 6, rng, 2.0);
  TrajectoryState full{0.0, w0, 0, {4, 2}};
  for (int i = 0; i < 60; ++i) integ.step_main(full);

  TrajectoryState half{0.0, w0, 0, {4, 2}};
  for (int i = 0; i < 25; ++i) integ.step_main(half);
  const auto path = (std::filesystem::temp_directory_path() / "felab_resume_test.chk").string();
  save_checkpoint(path, half, p);
  auto resumed = load_checkpoint(path, integ.grid());
  std::remove(path.c_str());
  for (int i = 25; i < 60; ++i) integ.step_main(resumed);
  EXPECT_EQ(resumed.omega, full.omega);
  EXPECT_EQ(resumed.step, full.step);
}

TEST(Checkpoint, RejectsBadInput) {
  const Grid2D g(16);
  EXPECT_THROW(decode_checkpoint("NOTACHECKPOINT", g), IoError);
  SimParams p = quiet(32, 1.0, 1e-3);
  TrajectoryState s{0.0, SpectralField(Grid2D(32)), 0, {}};
  EXPECT_THROW(decode_checkpoint(encode_checkpoint(s, p), g), GridMismatch);
  auto bytes = encode_checkpoint(s, p);
  bytes.pop_back();
  EXPECT_THROW(decode_checkpoint(bytes, Grid2D(32)), IoError);
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/x.chk", g), IoError);
}

}  // namespace
}  // namespace felab
