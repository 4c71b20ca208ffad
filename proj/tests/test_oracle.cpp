// Copyright 2026 The sqfluor Authors
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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sqfluor/error.hpp"
#include "sqfluor/oracle.hpp"
#include "sqfluor/spectra.hpp"

namespace sqfluor {
namespace {

struct Draw {
  SqueezedBath bath;
  AtomParams atom;
};

std::vector<Draw> random_draws(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Draw> out;
  for (std::size_t i = 0; i < count; ++i) {
    const double n = 3.0 * u(rng);
    const double m = u(rng) * std::sqrt(n * (n + 1.0));
    const double phi = kPi * u(rng);
    out.push_back({SqueezedBath(n, m, phi), AtomParams(1.0, 1.0, 10.0 * u(rng))});
  }
  return out;
}

DensityMatrix2 random_state(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Vector3d v(g(rng), g(rng), g(rng));
  v *= std::uniform_real_distribution<double>(0.0, 1.0)(rng) / v.norm();
  return DensityMatrix2::from_bloch({v.x(), v.y(), v.z()});
}

BlochState bloch_rhs(const BlochState& s, const SqueezedBath& b, const AtomParams& a) {
  const Eigen::Vector3d v = bloch_matrix(b, a) * Eigen::Vector3d(s.sx, s.sy, s.sz) - Eigen::Vector3d(0, 0, 1);
  return {v.x(), v.y(), v.z()};
}

TEST(DensityMatrix, InvariantsAndBloch) {
  const DensityMatrix2 g = DensityMatrix2::ground();
  EXPECT_EQ(g.bloch().sz, -1.0);
  EXPECT_EQ(DensityMatrix2::excited().bloch().sz, 1.0);
  const DensityMatrix2 r = DensityMatrix2::from_bloch({0.3, -0.2, 0.1});
  EXPECT_NEAR(r.bloch().sx, 0.3, 1e-15);
  EXPECT_NEAR(r.bloch().sy, -0.2, 1e-15);
  EXPECT_LT(r.hermiticity_error(), 1e-15);
  EXPECT_LT(r.trace_error(), 1e-15);
  EXPECT_NEAR(r.expectation(pauli::plus() * pauli::minus()).real(), 0.55, 1e-15);
  EXPECT_THROW(DensityMatrix2::from_bloch({1.5, 0.0, 0.0}).check(1e-8), InvariantViolation);
}

TEST(Lindblad, VacuumFixedPoint) {
  const Eigen::Matrix2cd d = lindblad_rhs(DensityMatrix2::ground().matrix(), SqueezedBath(), AtomParams(1.0, 1.0, 0.0));
  EXPECT_EQ(d.norm(), 0.0);
}

TEST(Lindblad, TracePreservingAndMatchesBlochEquations) {
  std::mt19937_64 rng(17);
  for (const auto& d : random_draws(100, 2)) {
    const DensityMatrix2 rho = random_state(rng);
    const Eigen::Matrix2cd drho = lindblad_rhs(rho.matrix(), d.bath, d.atom);
    EXPECT_LT(std::abs(drho.trace()), 1e-14);
    EXPECT_LT((drho - drho.adjoint()).norm(), 1e-13);
    const BlochState expected = bloch_rhs(rho.bloch(), d.bath, d.atom);
    const double sx = (pauli::x() * drho).trace().real();
    const double sy = (pauli::y() * drho).trace().real();
    const double sz = (pauli::z() * drho).trace().real();
    EXPECT_NEAR(sx, expected.sx, 1e-12);
    EXPECT_NEAR(sy, expected.sy, 1e-12);
    EXPECT_NEAR(sz, expected.sz, 1e-12);
  }
}

TEST(Evolve, DecaysToGroundInVacuum) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 5; ++i) {
    const DensityMatrix2 rho = evolve(random_state(rng), SqueezedBath(), AtomParams(1.0, 1.0, 0.0), 50.0);
    EXPECT_LT((rho.matrix() - DensityMatrix2::ground().matrix()).norm(), 1e-8);
  }
}

TEST(Evolve, LongTimeMatchesClosedFormSteadyState) {
  for (const auto& d : random_draws(100, 5)) {
    const double slowest = decay_rates(d.bath, d.atom).front();
    const BlochState s = evolve(DensityMatrix2::ground(), d.bath, d.atom, 40.0 / slowest).bloch();
    const BlochState e = steady_state(d.bath, d.atom);
    EXPECT_NEAR(s.sx, e.sx, 1e-8);
    EXPECT_NEAR(s.sy, e.sy, 1e-8);
    EXPECT_NEAR(s.sz, e.sz, 1e-8);
    const BlochState null = oracle_steady_state(d.bath, d.atom).bloch();
    EXPECT_NEAR(null.sy, e.sy, 1e-10);
    EXPECT_NEAR(null.sz, e.sz, 1e-10);
  }
}

TEST(Evolve, FourthOrderConvergence) {
  const SqueezedBath b(0.5, 0.6, 0.7);
  const AtomParams a(1.0, 1.0, 4.0);
  const DensityMatrix2 rho0 = DensityMatrix2::ground();
  auto run = [&](double h) { return evolve(rho0, b, a, 2.0, OracleConfig{h, 0.0}).matrix(); };
  const Eigen::Matrix2cd ref = run(0.05 / 32);
  const double e1 = (run(0.05) - ref).norm();
  const double e2 = (run(0.025) - ref).norm();
  EXPECT_NEAR(e1 / e2, 16.0, 16.0 * 0.2);
}

TEST(Evolve, RejectsNegativeTime) {
  EXPECT_THROW(evolve(DensityMatrix2::ground(), SqueezedBath(), AtomParams(1.0, 1.0, 1.0), -1.0), Error);
}

TEST(Config, AutomaticAndLimits) {
  const SqueezedBath b(1.0, 1.2, 0.3);
  const AtomParams a(1.0, 1.0, 8.0);
  const OracleConfig c = OracleConfig::automatic(b, a);
  EXPECT_NEAR(c.step, 0.01 / 8.0, 1e-15);
  EXPECT_NEAR(c.horizon, 20.0 / decay_rates(b, a).front(), 1e-12);
  EXPECT_THROW((OracleConfig{2.0 * c.step, 0.0}.resolved(b, a)), Error);
  EXPECT_THROW((OracleConfig{0.0, 0.5 * c.horizon}.resolved(b, a)), Error);
  EXPECT_EQ(quadrature_from_string(to_string(Quadrature::fft)), Quadrature::fft);
  EXPECT_THROW(quadrature_from_string("simpson"), Error);
}

TEST(Regression, InitialSampleAndFactorization) {
  const SqueezedBath b(0.4, 0.5, 1.1);
  const AtomParams a(1.0, 1.0, 2.5);
  const BlochState s = steady_state(b, a);
  const double sv[3] = {s.sx, s.sy, s.sz};
  const PauliAxis axes[3] = {PauliAxis::x, PauliAxis::y, PauliAxis::z};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (Ordering o : {Ordering::later_left, Ordering::later_right}) {
        const TimeSeries ts = regression_correlator(axes[i], axes[j], o, b, a);
        EXPECT_LT(std::abs(ts.values[0] - correlator(axes[i], axes[j], o, b, a)(0.0)), 1e-10);
        EXPECT_LT(std::abs(ts.values.back() - sv[i] * sv[j]), 1e-6);
      }
    }
  }
}

TEST(Regression, MatchesClosedFormCorrelators) {
  const PauliOperator plus = PauliOperator::sigma_plus();
  const PauliOperator minus = PauliOperator::sigma_minus();
  for (const auto& d : random_draws(100, 9)) {
    const BlochModel m = BlochModel::regularized(d.bath, d.atom);
    if (m.perturbed()) continue;
    for (Ordering o : {Ordering::later_left, Ordering::later_right}) {
      const TimeSeries ts = regression_correlator(plus, minus, o, d.bath, d.atom);
      const ExpSum f = m.correlator(plus, minus, o);
      double worst = 0.0;
      for (std::size_t i = 0; i < ts.size() && ts.time(i) <= 20.0; ++i) {
        worst = std::max(worst, std::abs(ts.values[i] - f(ts.time(i))));
      }
      EXPECT_LT(worst, 1e-6);
    }
  }
}

// Sideband peak position and center half-width at half maximum.
std::pair<double, double> mollow_features(const std::vector<double>& grid, const std::vector<double>& v) {
  const std::size_t mid = grid.size() / 2;
  const auto peak = std::max_element(v.begin() + mid + mid / 4, v.end());
  std::size_t k = mid;
  while (v[k] > 0.5 * v[mid]) ++k;
  // Linear interpolation of the crossing.
  const double t = (v[k - 1] - 0.5 * v[mid]) / (v[k - 1] - v[k]);
  return {grid[peak - v.begin()], grid[k - 1] + t * (grid[k] - grid[k - 1])};
}

TEST(SpectrumNumeric, MollowTriplet) {
  const AtomParams a(1.0, 1.0, 5.0);
  const std::vector<double> grid = uniform_grid(-10.0, 10.0, 4001);
  const auto [pos, hw] = mollow_features(grid, spectrum_numeric(SqueezedBath(), a, grid).values());
  const auto [pos_exact, hw_exact] = mollow_features(grid, fluorescence_spectrum(SqueezedBath(), a, grid).trace.values());
  EXPECT_NEAR(pos / pos_exact, 1.0, 0.005);
  EXPECT_NEAR(hw / hw_exact, 1.0, 0.005);
  EXPECT_NEAR(pos, 4.895, 0.01);
}

TEST(SpectrumNumeric, MatchesClosedFormBothQuadratures) {
  for (const auto& d : random_draws(10, 13)) {
    const std::vector<double> grid = default_grid(d.bath, d.atom);
    const auto exact = fluorescence_spectrum(d.bath, d.atom, grid).trace.values();
    for (Quadrature q : {Quadrature::trapezoid_with_tail, Quadrature::fft}) {
      const auto num = spectrum_numeric(d.bath, d.atom, grid, OracleConfig{0.0, 0.0, q}).values();
      EXPECT_LT(relative_linf(num, exact), 1e-3) << to_string(q);
    }
  }
}

TEST(SpectrumNumeric, SumRule) {
  const SqueezedBath b(0.3, 0.4, 0.5);
  const AtomParams a(1.0, 1.0, 2.0);
  const std::vector<double> grid = uniform_grid(-400.0, 400.0, 160001);
  const auto v = spectrum_numeric(b, a, grid).values();
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) area += 0.5 * (v[i] + v[i + 1]) * (grid[i + 1] - grid[i]);
  const SpectralDecomposition d = spectral_decomposition(b, a);
  // The 1/w^2 tails beyond the grid carry about sum Re(K_j lambda_j) / (pi * 400).
  EXPECT_NEAR(area + d.coherent_weight.real(), steady_state(b, a).excited_population(), 1e-3);
}

TEST(RelativeLinf, Definition) {
  const std::vector<double> a{1.0, 2.0, 3.0};
  const std::vector<double> b{1.0, 2.5, 4.0};
  EXPECT_DOUBLE_EQ(relative_linf(a, b), 0.25);
}

}  // namespace
}  // namespace sqfluor
