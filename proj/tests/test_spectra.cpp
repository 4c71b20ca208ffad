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

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "sqfluor/error.hpp"
#include "sqfluor/oracle.hpp"
#include "sqfluor/spectra.hpp"

namespace sqfluor {
namespace {

using boost::math::quadrature::gauss_kronrod;
constexpr double kInf = std::numeric_limits<double>::infinity();

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
    const double r = u(rng);
    const double phi = kPi * u(rng);
    const double rabi = 10.0 * u(rng);
    const double eta = 0.5 + 0.5 * u(rng);
    out.push_back({SqueezedBath(n, r * std::sqrt(n * (n + 1.0)), phi), AtomParams(1.0, eta, rabi)});
  }
  return out;
}

// Multiset distance between two root triples.
double root_mismatch(const Roots& a, std::array<Complex, 3> b) {
  double worst = 0.0;
  for (const Complex& z : a) {
    auto it = std::min_element(b.begin(), b.end(), [&](Complex p, Complex q) { return std::abs(p - z) < std::abs(q - z); });
    worst = std::max(worst, std::abs(*it - z) / std::max(1.0, std::abs(z)));
    *it = Complex(kInf, kInf);
  }
  return worst;
}

TEST(SteadyState, NoDriveIsThermalLike) {
  const BlochState s = steady_state(SqueezedBath(0.7, 0.5, 0.4), AtomParams(1.0, 1.0, 0.0));
  EXPECT_EQ(s.sx, 0.0);
  EXPECT_EQ(s.sy, 0.0);
  EXPECT_NEAR(s.sz, -1.0 / 2.4, 1e-15);
}

TEST(SteadyState, StrongDriveSaturates) {
  const BlochState s = steady_state(SqueezedBath(), AtomParams(1.0, 1.0, 1e4));
  EXPECT_NEAR(s.sz, 0.0, 1e-8);
  EXPECT_NEAR(s.sy, 1e-4, 1e-8);
}

TEST(SteadyState, BlochVectorInsideBall) {
  for (const auto& d : random_draws(200, 3)) {
    const BlochState s = steady_state(d.bath, d.atom);
    EXPECT_LE(s.sx * s.sx + s.sy * s.sy + s.sz * s.sz, 1.0 + 1e-10);
  }
}

TEST(BlochMatrix, VacuumNoDrive) {
  const Eigen::Matrix3d b = bloch_matrix(SqueezedBath(), AtomParams(1.0, 1.0, 0.0));
  EXPECT_TRUE(b.isApprox(Eigen::Vector3d(-0.5, -0.5, -1.0).asDiagonal().toDenseMatrix()));
}

TEST(BlochMatrix, TraceIdentity) {
  for (const auto& d : random_draws(50, 4)) {
    EXPECT_NEAR(bloch_matrix(d.bath, d.atom).trace(), -2.0 * (2.0 * d.bath.n() + 1.0), 1e-12);
  }
}

TEST(CubicRoots, MatchEigenvaluesOnRandomSets) {
  for (const auto& d : random_draws(500, 11)) {
    const Roots roots = cubic_roots(d.bath, d.atom);
    Eigen::EigenSolver<Eigen::Matrix3d> es(bloch_matrix(d.bath, d.atom));
    std::array<Complex, 3> ev{es.eigenvalues()(0), es.eigenvalues()(1), es.eigenvalues()(2)};
    EXPECT_LT(root_mismatch(roots, ev), 1e-10);
    const CubicPolynomial poly = characteristic_polynomial(d.bath, d.atom);
    for (const Complex& z : roots) {
      EXPECT_LT(z.real(), 0.0);
      EXPECT_LT(std::abs(poly(z)), 1e-9 * poly.scale());
    }
    // Ordered by |Im| then Re; complex roots come in conjugate pairs.
    EXPECT_LE(std::abs(roots[0].imag()), std::abs(roots[1].imag()));
    EXPECT_EQ(roots[0].imag(), 0.0);
    EXPECT_TRUE(roots[1].imag() == 0.0 || roots[1] == std::conj(roots[2]));
  }
}

TEST(CubicRoots, ClosedFormAtZeroPhase) {
  const SqueezedBath b(0.6, 0.7, 0.0);
  for (double rabi : {0.3, 1.0, 4.0}) {
    const AtomParams a(1.0, 1.0, rabi);
    const RateSet r = rates_from_params(b, a);
    const Complex disc = std::sqrt(Complex((r.g_minus - r.g_n) * (r.g_minus - r.g_n) - 4.0 * rabi * rabi));
    std::array<Complex, 3> expected{Complex(-r.g_plus), -(r.g_minus + r.g_n) / 2.0 + 0.5 * disc,
                                    -(r.g_minus + r.g_n) / 2.0 - 0.5 * disc};
    EXPECT_LT(root_mismatch(cubic_roots(b, a), expected), 1e-10);
  }
}

TEST(CubicRoots, VacuumNoDrive) {
  std::array<Complex, 3> expected{Complex(-0.5), Complex(-0.5), Complex(-1.0)};
  EXPECT_LT(root_mismatch(cubic_roots(SqueezedBath(), AtomParams(1.0, 1.0, 0.0)), expected), 1e-7);
}

TEST(CubicRoots, GenericSetAgainstEigenSolver) {
  const SqueezedBath b(1.0, 1.2, 1.0);
  const AtomParams a(1.0, 1.0, 3.0);
  Eigen::EigenSolver<Eigen::Matrix3d> es(bloch_matrix(b, a));
  std::array<Complex, 3> ev{es.eigenvalues()(0), es.eigenvalues()(1), es.eigenvalues()(2)};
  EXPECT_LT(root_mismatch(cubic_roots(b, a), ev), 1e-10);
}

TEST(Degeneracy, ExactThrowsRegularizedFlags) {
  const SqueezedBath vac;
  const AtomParams threshold(1.0, 1.0, 0.25);
  EXPECT_THROW(BlochModel::exact(vac, threshold), DegenerateRootsError);
  const BlochModel m = BlochModel::regularized(vac, threshold);
  EXPECT_TRUE(m.perturbed());
  EXPECT_GT(m.rabi(), 0.25);
  EXPECT_LT(m.rabi(), 0.25 + 1e-2);
  EXPECT_GE(min_root_separation(m.roots()), kDegeneracyThreshold);
  EXPECT_TRUE(fluorescence_spectrum(vac, threshold, std::vector<double>{0.0, 1.0}).perturbed);
}

TEST(Correlator, InitialValueIsPauliProduct) {
  const SqueezedBath b(0.5, 0.6, kPi / 4);
  const AtomParams a(1.0, 1.0, 2.0);
  const BlochState s = steady_state(b, a);
  const double sv[3] = {s.sx, s.sy, s.sz};
  const PauliAxis axes[3] = {PauliAxis::x, PauliAxis::y, PauliAxis::z};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      // sigma_i sigma_j = delta_ij + i eps_ijk sigma_k
      Complex expected = i == j ? 1.0 : 0.0;
      if (i != j) {
        const int k = 3 - i - j;
        const double eps = ((j - i + 3) % 3 == 1) ? 1.0 : -1.0;
        expected = Complex(0.0, eps * sv[k]);
      }
      for (Ordering o : {Ordering::later_left, Ordering::later_right}) {
        EXPECT_LT(std::abs(correlator(axes[i], axes[j], o, b, a)(0.0) - expected), 1e-12) << i << j;
      }
      const Complex late = correlator(axes[i], axes[j], Ordering::later_left, b, a)(200.0);
      EXPECT_LT(std::abs(late - sv[i] * sv[j]), 1e-10);
    }
  }
}

TEST(Fluorescence, VacuumMollowTriplet) {
  const AtomParams a(1.0, 1.0, 5.0);
  const SpectralDecomposition d = spectral_decomposition(SqueezedBath(), a);
  EXPECT_NEAR(-d.roots[0].real(), 0.5, 1e-12);
  EXPECT_NEAR(-d.roots[1].real(), 0.75, 1e-12);
  EXPECT_NEAR(std::abs(d.roots[1].imag()), std::sqrt(25.0 - 1.0 / 16.0), 1e-10);
  double side = 0.0;
  for (double w = 4.0; w < 6.0; w += 1e-4) side = std::max(side, d(w));
  EXPECT_NEAR(d(0.0) / side, 3.0, 0.03);
  const std::vector<double> grid = default_grid(SqueezedBath(), a);
  EXPECT_EQ(grid.size(), 2001u);
  EXPECT_DOUBLE_EQ(grid.back(), 40.0);
}

TEST(Fluorescence, PeaksApproachRabiAtStrongDrive) {
  const double rabi = 50.0;
  const SpectralDecomposition d = spectral_decomposition(SqueezedBath(), AtomParams(1.0, 1.0, rabi));
  double best = 0.0, peak = 0.0;
  for (double w = rabi - 2.0; w < rabi + 2.0; w += 1e-3) {
    if (d(w) > best) {
      best = d(w);
      peak = w;
    }
  }
  EXPECT_NEAR(peak / rabi, 1.0, 5e-3);
}

TEST(Fluorescence, SumRuleAlgebraic) {
  for (const auto& d : random_draws(200, 21)) {
    const BlochModel m = BlochModel::regularized(d.bath, d.atom);
    const SpectralDecomposition s = m.decomposition();
    Complex total = s.coherent_weight;
    for (const Complex& k : s.amplitudes) total += k;
    EXPECT_LT(std::abs(total - m.steady().excited_population()), 1e-10);
  }
}

// K_1 = conj(K_2) needs gamma_M = 0. Otherwise the correlator itself is
// complex (checked against the master equation below) and only Re of its
// transform is real.
TEST(Fluorescence, ConjugateAmplitudesWithoutQuadratureMixing) {
  for (const auto& d : random_draws(200, 22)) {
    for (double phi : {0.0, kPi / 2}) {
      const SpectralDecomposition s = spectral_decomposition(d.bath.with_phi(phi), d.atom);
      if (s.roots[1] != std::conj(s.roots[2]) || s.roots[1].imag() == 0.0) continue;
      EXPECT_LT(std::abs(s.amplitudes[1] - std::conj(s.amplitudes[2])), 1e-10);
      EXPECT_LT(std::abs(s.amplitudes[0].imag()), 1e-10);
    }
  }
}

TEST(Fluorescence, CorrelatorMatchesMasterEquationAtGenericPhase) {
  const SqueezedBath b(0.5, 0.6, 0.4);
  const AtomParams a(1.0, 1.0, 3.0);
  const SpectralDecomposition d = spectral_decomposition(b, a);
  const TimeSeries ts =
      regression_correlator(PauliOperator::sigma_plus(), PauliOperator::sigma_minus(), Ordering::later_left, b, a);
  double worst = 0.0, imag = 0.0;
  for (std::size_t i = 0; i < ts.size(); i += 10) {
    worst = std::max(worst, std::abs(ts.values[i] - d.correlator(ts.time(i))));
    imag = std::max(imag, std::abs((ts.values[i] - d.coherent_weight).imag()));
  }
  EXPECT_LT(worst, 1e-9);
  EXPECT_GT(imag, 1e-3);
  EXPECT_GT(std::abs(d.amplitudes[1] - std::conj(d.amplitudes[2])), 1e-3);
}

TEST(Fluorescence, SumRuleByQuadrature) {
  const SqueezedBath b(0.4, 0.5, 0.7);
  const AtomParams a(1.0, 1.0, 3.0);
  const SpectralDecomposition d = spectral_decomposition(b, a);
  auto f = [&](double w) { return d(w); };
  double area = 0.0;
  const double edges[] = {-kInf, -20.0, -5.0, -1.0, 1.0, 5.0, 20.0, kInf};
  for (int i = 0; i + 1 < 8; ++i) area += gauss_kronrod<double, 61>::integrate(f, edges[i], edges[i + 1], 15, 1e-12);
  EXPECT_NEAR(area + d.coherent_weight.real(), steady_state(b, a).excited_population(), 1e-4);
}

TEST(Fluorescence, RealAndEvenWithoutDrive) {
  const SqueezedBath b(0.4, 0.5, 0.7);
  const AtomParams a(1.0, 1.0, 0.0);
  const std::vector<double> grid = uniform_grid(-10.0, 10.0, 401);
  const auto v = fluorescence_spectrum(b, a, grid).trace.values();
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], v[v.size() - 1 - i], 1e-12);
}

TEST(WeakDrive, VacuumIsFlatZero) {
  const auto v = weak_drive_reflection(SqueezedBath(), AtomParams(1.0, 0.81, 0.0), uniform_grid(-5, 5, 101)).values();
  for (double x : v) EXPECT_EQ(x, 0.0);
}

TEST(WeakDrive, EqualAreasAtUnitEfficiency) {
  const WeakDriveTerms t = weak_drive_terms(SqueezedBath(0.8, 1.0, 0.0), AtomParams(1.0, 1.0, 0.0));
  auto narrow = [&](double w) { return t.narrow(w); };
  auto broad = [&](double w) { return t.broad(w); };
  const double an = gauss_kronrod<double, 61>::integrate(narrow, -kInf, kInf, 20, 1e-14);
  const double ab = gauss_kronrod<double, 61>::integrate(broad, -kInf, kInf, 20, 1e-14);
  EXPECT_NEAR(an / ab, 1.0, 1e-9);
  EXPECT_NEAR(an, kPi * 1.0 / 2.6 / (2.0 * kPi), 1e-9);
}

TEST(WeakDrive, LobeRatioBelowUnitEfficiency) {
  const SqueezedBath b(0.8, 1.0, 0.0);
  const double eta_c = 0.81;
  const WeakDriveTerms t = weak_drive_terms(b, AtomParams(1.0, eta_c, 0.0));
  auto narrow = [&](double w) { return t.narrow(w); };
  auto broad = [&](double w) { return t.broad(w); };
  const double an = gauss_kronrod<double, 61>::integrate(narrow, -kInf, kInf, 20, 1e-14);
  const double ab = gauss_kronrod<double, 61>::integrate(broad, -kInf, kInf, 20, 1e-14);
  const double expected = (1.0 + (1.0 - eta_c) * 0.8) / (1.0 - (1.0 - eta_c) * 0.8);
  EXPECT_NEAR(ab / an, expected, 1e-6 * expected);
}

TEST(Reflection, ReducesToWeakDriveWithoutDrive) {
  const SqueezedBath b(0.5, 0.6, 0.3);
  for (double eta : {1.0, 0.81}) {
    const std::vector<double> grid = uniform_grid(-8.0, 8.0, 161);
    const auto full = reflection_spectrum(b, AtomParams(1.0, eta, 1e-6), grid).values();
    const auto weak = weak_drive_reflection(b, AtomParams(1.0, eta, 0.0), grid).values();
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(full[i], weak[i], 1e-6);
    const auto exact = reflection_spectrum(b, AtomParams(1.0, eta, 0.0), grid).values();
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(exact[i], weak[i], 1e-8);
  }
}

// Dispersive corrections of order gamma / Omega sit on the sidebands; the
// center line is free of them.
TEST(Reflection, StrongDriveLimitOnCenterLine) {
  for (double phi : {0.0, 0.3, kPi / 2}) {
    const SqueezedBath b(0.2, 0.3, phi);
    const AtomParams a(1.0, 1.0, 10.0);
    const ReflectionEvaluator ev(b, a);
    const StrongDriveTerms st = strong_drive_terms(b, a);
    const double line = st(0.0) - st.background;
    for (double w = -st.center_hwhm; w <= st.center_hwhm; w += 0.01) {
      ASSERT_LT(std::abs(ev(w) - st(w)) / line, 0.01) << phi << " " << w;
    }
  }
}

TEST(Reflection, StrongDriveLimitAtSidebandCenters) {
  const SqueezedBath b(0.2, 0.3, 0.3);
  const AtomParams a(1.0, 1.0, 50.0);
  const ReflectionEvaluator ev(b, a);
  const StrongDriveTerms st = strong_drive_terms(b, a);
  for (double w : {-50.0, 50.0}) EXPECT_LT(std::abs(ev(w) - st(w)) / (st(w) - st.background), 0.01) << w;
}

TEST(Reflection, NonNegativeWithFlatBackground) {
  for (const auto& d : random_draws(100, 8)) {
    const ReflectionEvaluator ev(d.bath, d.atom);
    for (double w : default_grid(d.bath, d.atom)) ASSERT_GE(ev(w), -1e-9);
  }
}

TEST(StrongDrive, VacuumWidthsAndRatio) {
  const StrongDriveTerms t = strong_drive_terms(SqueezedBath(), AtomParams(1.0, 1.0, 10.0));
  EXPECT_DOUBLE_EQ(t.center_hwhm, 0.5);
  EXPECT_DOUBLE_EQ(t.sideband_hwhm, 0.75);
  EXPECT_NEAR(t.center_amplitude / t.sideband_amplitude, 3.0, 1e-12);
}

TEST(StrongDrive, CenterWidthFormula) {
  const StrongDriveTerms t = strong_drive_terms(SqueezedBath(0.2, 0.3, 0.0), AtomParams(1.0, 1.0, 10.0));
  EXPECT_NEAR(t.center_hwhm, 1.0, 1e-12);
  EXPECT_NEAR(t.sideband_hwhm, 0.9, 1e-12);
}

TEST(StrongDrive, WidthsSwapBetweenPhases) {
  const SqueezedBath b(0.4, 0.6, 0.0);
  const AtomParams a(1.0, 1.0, 20.0);
  const StrongDriveTerms zero = strong_drive_terms(b, a);
  const StrongDriveTerms half = strong_drive_terms(b.with_phi(kPi / 2), a);
  EXPECT_GT(zero.center_hwhm, 0.5);
  EXPECT_LT(half.center_hwhm, 0.5);
  EXPECT_LT(zero.sideband_hwhm, half.sideband_hwhm);
}

TEST(Background, Shapes) {
  const std::vector<double> grid{-10.0, -5.0, 0.0, 5.0, 10.0};
  for (double v : squeezer_background(grid, 0.7, 0.0, BackgroundShape::flat)) EXPECT_EQ(v, 0.7);
  const auto f = squeezer_background(std::vector<double>{0.0, 10.0}, 0.7, 20.0, BackgroundShape::lorentzian_filtered);
  EXPECT_DOUBLE_EQ(f[0], 0.7);
  EXPECT_NEAR(f[1], 0.35, 1e-15);
  EXPECT_THROW(background_shape_from_string("gaussian"), Error);
  EXPECT_EQ(background_shape_from_string("lorentzian"), BackgroundShape::lorentzian_filtered);
}

TEST(Background, ParabolaApproximatesFilteredShape) {
  const std::vector<double> grid = uniform_grid(-3.0, 3.0, 121);
  for (double kappa : {20.0, 40.0}) {
    const auto filtered = squeezer_background(grid, 1.0, kappa, BackgroundShape::lorentzian_filtered);
    // One-parameter least squares for c in 1 - c w^2.
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double w2 = grid[i] * grid[i];
      num += w2 * (1.0 - filtered[i]);
      den += w2 * w2;
    }
    BackgroundModel model{BackgroundShape::parabolic, kappa, num / den};
    const auto para = squeezer_background(grid, 1.0, model);
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_LT(std::abs(para[i] - filtered[i]) / filtered[i], 0.02);
  }
}

}  // namespace
}  // namespace sqfluor
