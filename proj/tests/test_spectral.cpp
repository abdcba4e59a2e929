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

#include "felab/spectral.hpp"

namespace felab {
namespace {

double max_abs_diff(const PhysicalField& a, const PhysicalField& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.values.size(); ++j) {
    m = std::max(m, std::abs(a.values[j] - b.values[j]));
  }
  return m;
}

double max_abs(const PhysicalField& a) {
  double m = 0.0;
  for (double v : a.values) m = std::max(m, std::abs(v));
  return m;
}

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

TEST(Grid2D, RejectsOddOrTinyGrids) {
  EXPECT_THROW(Grid2D(7), ConfigError);
  EXPECT_THROW(Grid2D(6), ConfigError);
  EXPECT_THROW(Grid2D(32, 16), ConfigError);
  EXPECT_NO_THROW(Grid2D(8));
}

TEST(Grid2D, DefaultCutoffIsTwoThirdsRule) {
  EXPECT_EQ(Grid2D(64).dealias_cutoff(), 21);
  EXPECT_EQ(Grid2D(128).dealias_cutoff(), 42);
}

TEST(Grid2D, LowestEigenvalueIsOne) {
  const Grid2D g(32);
  const auto& t = g.tables();
  double lowest = 1e300;
  for (std::size_t i = 0; i < g.spectral_size(); ++i) {
    if (t.weight[i] > 0) lowest = std::min(lowest, t.ksq[i]);
  }
  EXPECT_EQ(lowest, 1.0);
}

TEST(Grid2D, IndexSetClosedUnderNegation) {
  const Grid2D g(16);
  for (int k1 = -7; k1 <= 7; ++k1) {
    for (int k2 = -7; k2 <= 7; ++k2) {
      EXPECT_EQ(g.index_of(k1, k2) >= 0, g.index_of(-k1, -k2) >= 0);
    }
  }
}

TEST(Transforms, SingleSineRoundTrip) {
  const Grid2D g(32);
  const auto phys = PhysicalField::from_function(g, [](double x, double) { return std::sin(x); });
  const auto f = to_spectral(phys);
  EXPECT_NEAR(f.coeff(1, 0).real(), 0.0, 1e-15);
  EXPECT_NEAR(f.coeff(1, 0).imag(), -0.5, 1e-15);
  EXPECT_NEAR(f.coeff(-1, 0).imag(), 0.5, 1e-15);
  EXPECT_LT(max_abs_diff(to_physical(f), phys), 1e-14);
  EXPECT_LT(max_coeff_diff(f, trig_mode(g, 1, 0, true)), 1e-15);
}

TEST(Transforms, ZeroFieldStaysZero) {
  const Grid2D g(16);
  const SpectralField z(g);
  const auto p = to_physical(z);
  EXPECT_EQ(max_abs(p), 0.0);
  EXPECT_EQ(max_coeff(to_spectral(p)), 0.0);
}

TEST(Transforms, RandomRoundTripIsIdentity) {
  const Grid2D g(64);
  PhiloxEngine rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = random_field(g, 31, rng);
    const auto back = to_spectral(to_physical(f));
    EXPECT_LT(max_coeff_diff(back, f), 1e-12 * max_coeff(f));
  }
}

TEST(Transforms, ForwardProjectsOutMean) {
  const Grid2D g(16);
  const auto phys =
      PhysicalField::from_function(g, [](double x, double y) { return 3.0 + std::cos(x + y); });
  const auto f = to_spectral(phys);
  EXPECT_EQ(f.coeff(0, 0), cplx{});
  EXPECT_NEAR(f.coeff(1, 1).real(), 0.5, 1e-15);
}

TEST(Transforms, GridMismatchThrows) {
  const SpectralField a(Grid2D(16)), b(Grid2D(32));
  EXPECT_THROW(inner(a, b), GridMismatch);
  SpectralField c(Grid2D(16));
  EXPECT_THROW(c += b, GridMismatch);
}

TEST(Transforms, ParsevalMatchesQuadrature) {
  const Grid2D g(64);
  PhiloxEngine rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = random_field(g, 20, rng, 1.0);
    double quad = 0.0;
    const auto p = to_physical(f);
    for (double v : p.values) quad += v * v;
    quad *= kBoxArea / static_cast<double>(p.values.size());
    EXPECT_NEAR(sobolev_norm_sq(f, 0.0), quad, 1e-10 * quad);
    EXPECT_NEAR(std::pow(lp_norm(f, 2.0), 2), quad, 1e-10 * quad);
  }
}

TEST(Multipliers, FracLaplacianOnUnitMode) {
  const Grid2D g(16);
  const auto e = trig_mode(g, 1, 0, true);
  const auto out = apply_multiplier(e, MultiplierSymbol::frac_laplacian(0.5));
  EXPECT_EQ(out, e);
  const auto e2 = trig_mode(g, 2, 1, false);
  const auto out2 = apply_multiplier(e2, MultiplierSymbol::frac_laplacian(1.5));
  EXPECT_NEAR(out2.coeff(2, 1).real(), 0.5 * std::pow(5.0, 0.75), 1e-14);
}

TEST(Multipliers, FracLaplacianZeroIsIdentity) {
  const Grid2D g(32);
  PhiloxEngine rng(5);
  const auto f = random_field(g, 15, rng);
  EXPECT_EQ(apply_multiplier(f, MultiplierSymbol::frac_laplacian(0.0)), f);
}

TEST(Multipliers, HeatSemigroup) {
  const Grid2D g(32);
  PhiloxEngine rng(7);
  const auto f = random_field(g, 10, rng);
  const auto two = apply_multiplier(apply_multiplier(f, MultiplierSymbol::heat(0.7, 0.3)),
                                    MultiplierSymbol::heat(0.7, 0.2));
  const auto one = apply_multiplier(f, MultiplierSymbol::heat(0.7, 0.5));
  EXPECT_LT(max_coeff_diff(two, one), 1e-14 * max_coeff(f));
}

TEST(Multipliers, ProjectionsPartitionUnity) {
  const Grid2D g(32);
  PhiloxEngine rng(9);
  const auto f = random_field(g, 15, rng);
  auto sum = apply_multiplier(f, MultiplierSymbol::low_pass(4));
  sum += apply_multiplier(f, MultiplierSymbol::high_pass(4));
  EXPECT_LT(max_coeff_diff(sum, f), 1e-14 * max_coeff(f));
}

TEST(Multipliers, FracLaplacianComposes) {
  const Grid2D g(32);
  PhiloxEngine rng(13);
  for (double g1 : {0.25, 0.5, 1.0}) {
    for (double g2 : {0.5, 1.5}) {
      const auto f = random_field(g, 10, rng);
      const auto two = apply_multiplier(apply_multiplier(f, MultiplierSymbol::frac_laplacian(g1)),
                                        MultiplierSymbol::frac_laplacian(g2));
      const auto one = apply_multiplier(f, MultiplierSymbol::frac_laplacian(g1 + g2));
      EXPECT_LT(max_coeff_diff(two, one), 1e-12 * max_coeff(one));
    }
  }
}

TEST(Multipliers, LogWeightVanishesOnUnitShell) {
  const MultiplierSymbol w = MultiplierSymbol::log_weight(1.0);
  EXPECT_EQ(w(1.0), 0.0);
  EXPECT_NEAR(w(2.0), 2.0 * std::sqrt(std::log(2.0)), 1e-15);
}

TEST(Multipliers, PreservesHermitianSymmetry) {
  const Grid2D g(32);
  PhiloxEngine rng(15);
  const auto f = apply_multiplier(random_field(g, 10, rng), MultiplierSymbol::sobolev(1.3));
  for (int k1 = -10; k1 <= 10; ++k1) {
    EXPECT_EQ(f.coeff(k1, 0), std::conj(f.coeff(-k1, 0)));
  }
}

TEST(BiotSavart, SineVorticityAnalytic) {
  const Grid2D g(32);
  const auto w = trig_mode(g, 1, 0, true);
  const auto u = biot_savart(w);
  const auto u1 = to_physical(u.u1);
  const auto u2 = to_physical(u.u2);
  const auto expect2 =
      PhysicalField::from_function(g, [](double x, double) { return -std::cos(x); });
  EXPECT_LT(max_abs(u1), 1e-15);
  EXPECT_LT(max_abs_diff(u2, expect2), 1e-14);
  EXPECT_LT(max_coeff_diff(perp_divergence(u.u1, u.u2), w), 1e-15);
}

TEST(BiotSavart, SpectralDivergenceIsZero) {
  const Grid2D g(64);
  PhiloxEngine rng(17);
  const auto w = random_field(g, 31, rng);
  const auto u = biot_savart(w);
  const auto& t = g.tables();
  for (int a = 0; a < g.n(); ++a) {
    for (int b = 0; b < g.nh(); ++b) {
      const std::size_t i = static_cast<std::size_t>(a) * g.nh() + b;
      const cplx div = static_cast<double>(t.k1[a]) * u.u1[i] + static_cast<double>(t.k2[b]) * u.u2[i];
      EXPECT_LE(std::abs(div), 1e-15 * std::abs(w[i]) + 1e-300);
    }
  }
}

TEST(BiotSavart, RecoversVorticity) {
  const Grid2D g(64);
  PhiloxEngine rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = random_field(g, 31, rng);
    const auto u = biot_savart(w);
    EXPECT_LT(max_coeff_diff(perp_divergence(u.u1, u.u2), w), 1e-12 * max_coeff(w));
  }
}

TEST(Norms, SobolevOnUnitShellIndependentOfS) {
  const Grid2D g(16);
  const auto f = trig_mode(g, 1, 0, true);
  const double base = sobolev_norm_sq(f, 0.0);
  EXPECT_NEAR(base, 2.0 * kPi * kPi, 1e-12);
  for (double s : {-1.0, 0.5, 2.0, 3.7}) EXPECT_NEAR(sobolev_norm_sq(f, s), base, 1e-12);
}

TEST(Norms, SobolevEigenvalueScaling) {
  const Grid2D g(16);
  const auto f = trig_mode(g, 2, 0, true);
  EXPECT_NEAR(sobolev_norm_sq(f, 1.0), 4.0 * sobolev_norm_sq(f, 0.0), 1e-12);
}

TEST(Norms, SobolevMonotoneInS) {
  const Grid2D g(32);
  PhiloxEngine rng(21);
  const auto f = random_field(g, 10, rng);
  double prev = sobolev_norm(f, -2.0);
  for (double s = -1.5; s <= 3.0; s += 0.5) {
    const double cur = sobolev_norm(f, s);
    EXPECT_GE(cur, prev);
    prev = cur;
  }
}

TEST(Norms, LpOfSine) {
  const Grid2D g(16);
  const auto f = trig_mode(g, 1, 0, true);
  EXPECT_NEAR(lp_norm(f, 2.0), std::sqrt(2.0 * kPi * kPi), 1e-13);
  const auto f2 = trig_mode(g, 1, 0, true, 2.0);
  EXPECT_NEAR(lp_norm(f2, 3.0), 2.0 * lp_norm(f, 3.0), 1e-13);
}

TEST(Norms, L4MatchesDirectSum) {
  const Grid2D g(64);
  PhiloxEngine rng(23);
  const auto f = random_field(g, 8, rng);
  // Direct evaluation of the trigonometric sum at each grid point.
  double acc = 0.0;
  for (int j1 = 0; j1 < g.n(); ++j1) {
    for (int j2 = 0; j2 < g.n(); ++j2) {
      double v = 0.0;
      for (int k1 = -8; k1 <= 8; ++k1) {
        for (int k2 = -8; k2 <= 8; ++k2) {
          const cplx c = f.coeff(k1, k2);
          const double ph = k1 * g.coord(j1) + k2 * g.coord(j2);
          v += c.real() * std::cos(ph) - c.imag() * std::sin(ph);
        }
      }
      acc += v * v * v * v;
    }
  }
  const double expect = std::pow(acc * kBoxArea / (g.n() * g.n()), 0.25);
  EXPECT_NEAR(lp_norm(f, 4.0), expect, 1e-10 * expect);
}

TEST(Dealias, InsideCutoffUnchanged) {
  const Grid2D g(32);
  PhiloxEngine rng(25);
  const auto f = random_field(g, g.dealias_cutoff(), rng);
  EXPECT_EQ(dealias(f), f);
}

TEST(Dealias, OutsideCutoffRemoved) {
  const Grid2D g(32);
  SpectralField f(g);
  f.add_mode(12, 3, {1.0, 2.0});
  f.add_mode(-3, 15, {0.5, 0.0});
  EXPECT_EQ(max_coeff(dealias(f)), 0.0);
}

TEST(Dealias, ProductOfTwoSines) {
  // sin(3x) sin(2x) = (cos x - cos 5x) / 2
  const Grid2D g(32);
  const auto a = to_physical(trig_mode(g, 3, 0, true));
  const auto b = to_physical(trig_mode(g, 2, 0, true));
  PhysicalField prod(g);
  for (std::size_t j = 0; j < prod.values.size(); ++j) prod.values[j] = a.values[j] * b.values[j];
  const auto got = dealias(to_spectral(prod));
  SpectralField expect = trig_mode(g, 1, 0, false, 0.5);
  expect += trig_mode(g, 5, 0, false, -0.5);
  EXPECT_LT(max_coeff_diff(got, expect), 1e-15);
}

}  // namespace
}  // namespace felab
