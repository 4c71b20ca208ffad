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

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "sqfluor/error.hpp"
#include "sqfluor/fitting.hpp"

namespace sqfluor {
namespace {

const AtomParams kFig2(1.0, 0.81, 0.0);

SpectrumTrace no_drive_trace(const SqueezedBath& b, double sigma, std::uint64_t seed, double offset = 0.0,
                             std::size_t points = 2001) {
  SynthesisSpec s;
  s.kind = FitKind::no_drive;
  s.bath = b;
  s.atom = kFig2;
  s.offset = offset;
  return synthesize_trace(s, {sigma, seed}, uniform_grid(-10.0, 10.0, points));
}

SpectrumTrace subtract(const SpectrumTrace& t, double floor) {
  std::vector<double> y = t.values();
  for (double& v : y) v -= floor;
  return SpectrumTrace(t.offsets(), y, t.metadata(), t.sigmas());
}

TEST(NoDrive, NoiselessRoundTrip) {
  const SqueezedBath b = bath_from_gain({1.4, 0.55}).with_phi(kPi / 2);
  for (double offset : {0.0, 1.0}) {
    const FitResult r = fit_no_drive(no_drive_trace(b, 0.0, 1, offset), kFig2);
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.value("N") / b.n(), 1.0, 1e-6);
    EXPECT_NEAR(r.value("M") / b.m(), 1.0, 1e-6);
    EXPECT_NEAR(r.value("M-N"), b.m() - b.n(), 1e-6);
  }
}

TEST(NoDrive, OnePercentNoiseRecoversSqueezing) {
  const SqueezedBath b = bath_from_gain({1.4, 0.55});
  const FitResult r = fit_no_drive(no_drive_trace(b, 0.01, 7), kFig2);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.value("M-N") / (b.m() - b.n()), 1.0, 0.05);
  EXPECT_NEAR(r.value("squeezing_db"), squeezing_db(b), 0.1);
}

TEST(NoDrive, StrongGainChain) {
  const SqueezedBath b = bath_from_gain({6.6, 0.55});
  const FitResult r = fit_no_drive(no_drive_trace(b, 0.01, 7), kFig2);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.value("M-N"), 0.258, 0.01);
  EXPECT_NEAR(r.value("M-N") / 0.24, 1.0, 0.15);
}

// Calibrated trace: known unit scale and the floor removed, since a free
// offset makes zero squeezing degenerate with a large-N plateau.
TEST(NoDrive, NullCaseConsistentWithZero) {
  FitOptions o;
  o.fixed_scale = 1.0;
  o.background_degree = -1;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const FitResult r = fit_no_drive(subtract(no_drive_trace(SqueezedBath(), 0.01, seed, 1.0), 1.0), kFig2, o);
    EXPECT_LE(r.value("N"), 2.0 * r.sigma("N") + 1e-12) << seed;
    EXPECT_LE(r.value("M"), 2.0 * r.sigma("M") + 1e-12) << seed;
    EXPECT_LE(std::abs(r.value("M-N")), 2.0 * r.sigma("M-N") + 1e-12) << seed;
  }
}

TEST(NoDrive, ChiSquarePerDofNearOne) {
  const SqueezedBath b = bath_from_gain({1.4, 0.55});
  double mean = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const FitResult r = fit_no_drive(no_drive_trace(b, 0.01, seed), kFig2);
    EXPECT_NEAR(r.chi2_per_dof, 1.0, 0.1) << seed;
    mean += r.chi2_per_dof / 50.0;
  }
  EXPECT_NEAR(mean, 1.0, 0.02);
}

TEST(NoDrive, MonotoneAlongGainSweep) {
  double last = -1.0;
  for (double g : {0.5, 1.0, 1.4, 2.0, 3.0, 4.0, 5.0, 6.6}) {
    const FitResult r = fit_no_drive(no_drive_trace(bath_from_gain({g, 0.55}), 0.0, 1), kFig2);
    EXPECT_GT(r.value("M-N"), last) << g;
    last = r.value("M-N");
  }
}

TEST(NoDrive, CoordinateChoiceDoesNotMoveTheOptimum) {
  const SpectrumTrace t = no_drive_trace(bath_from_gain({2.0, 0.55}), 0.01, 4);
  FitOptions nr;
  FitOptions nm;
  nm.coordinates = Coordinates::n_m;
  const FitResult a = fit_no_drive(t, kFig2, nr);
  const FitResult b = fit_no_drive(t, kFig2, nm);
  EXPECT_NEAR(a.residual_norm, b.residual_norm, 1e-10 * a.residual_norm);
  EXPECT_NEAR(a.value("M-N"), b.value("M-N"), 1e-6);
}

TEST(NoDrive, UncertaintyScalesWithPointCount) {
  const SqueezedBath b = bath_from_gain({1.4, 0.55});
  const double coarse = fit_no_drive(no_drive_trace(b, 0.01, 2, 0.0, 501), kFig2).sigma("M-N");
  const double fine = fit_no_drive(no_drive_trace(b, 0.01, 2, 0.0, 2001), kFig2).sigma("M-N");
  EXPECT_NEAR(coarse / fine, std::sqrt(2001.0 / 501.0), 0.3 * std::sqrt(2001.0 / 501.0));
}

TEST(NoDrive, CovarianceIsPositiveSemidefinite) {
  const FitResult r = fit_no_drive(no_drive_trace(bath_from_gain({3.0, 0.55}), 0.01, 9), kFig2);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r.covariance);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * es.eigenvalues().maxCoeff());
  EXPECT_TRUE(std::isfinite(r.residual_norm));
}

SpectrumTrace mollow_trace(const SqueezedBath& b, double rabi, FitKind kind, double sigma, std::uint64_t seed,
                           double span = 40.0) {
  SynthesisSpec s;
  s.kind = kind;
  s.bath = b;
  s.atom = AtomParams(1.0, 1.0, rabi);
  return synthesize_trace(s, {sigma, seed}, uniform_grid(-span, span, 2001));
}

TEST(ThreeLorentzian, VacuumMollowWidths) {
  const FitResult r = fit_three_lorentzian(mollow_trace(SqueezedBath(), 5.0, FitKind::three_lorentzian, 0.0, 1));
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.value("hwhm_0"), 0.5, 1e-6);
  EXPECT_NEAR(r.value("hwhm_sideband"), 0.75, 1e-6);
  EXPECT_NEAR(r.value("splitting"), 5.0, 1e-6);
  const FitResult noisy = fit_three_lorentzian(mollow_trace(SqueezedBath(), 5.0, FitKind::three_lorentzian, 0.01, 2));
  EXPECT_NEAR(noisy.value("hwhm_0"), 0.5, 0.02 * 0.5);
  EXPECT_NEAR(noisy.value("hwhm_sideband"), 0.75, 0.02 * 0.75);
  EXPECT_TRUE(noisy.warnings.empty());
}

TEST(ThreeLorentzian, WidthsAreOutOfPhaseSinusoids) {
  const SqueezedBath b(0.3, 0.4);
  std::vector<double> phis, center, side;
  for (int i = 0; i < 12; ++i) {
    const double phi = kPi * i / 12.0;
    const FitResult r = fit_three_lorentzian(mollow_trace(b.with_phi(phi), 10.0, FitKind::three_lorentzian, 0.0, 1));
    phis.push_back(phi);
    center.push_back(r.value("hwhm_0"));
    side.push_back(r.value("hwhm_sideband"));
  }
  const SinusoidFit c = fit_sinusoid(phis, center);
  const SinusoidFit s = fit_sinusoid(phis, side);
  EXPECT_NEAR(c.mean, 0.3 + 0.5, 1e-6);
  EXPECT_NEAR(c.cos_coeff, 0.4, 1e-6);
  EXPECT_NEAR(s.mean, (3 * 0.3 + 1.5) / 2.0, 1e-6);
  EXPECT_NEAR(s.cos_coeff, -0.2, 1e-6);
  EXPECT_NEAR(c.cos_coeff / s.cos_coeff, -2.0, 1e-6);
  EXPECT_NEAR(std::abs(c.sin_coeff) + std::abs(s.sin_coeff), 0.0, 1e-6);
  std::vector<double> predicted;
  for (double phi : phis) predicted.push_back(c(phi));
  EXPECT_NEAR(r_squared(center, predicted), 1.0, 1e-9);
}

TEST(ThreeLorentzian, StrongSqueezingFlagsSidebands) {
  const SqueezedBath b = bath_from_gain({6.6, 0.55}).with_phi(kPi / 2);
  const FitResult r = fit_three_lorentzian(mollow_trace(b, 3.95, FitKind::full_analytic, 0.01, 11, 15.0));
  bool flagged = false;
  for (const auto& w : r.warnings) flagged = flagged || w.find("sidebands unresolved") != std::string::npos;
  EXPECT_TRUE(flagged);
}

std::vector<SpectrumTrace> joint_traces(const SqueezedBath& b, double rabi, double sigma, std::vector<double>& offsets) {
  std::vector<SpectrumTrace> out;
  offsets.clear();
  for (int i = 0; i < 4; ++i) {
    const double phi = kPi / 2 + (i - 1.5) * 0.2;
    SynthesisSpec s;
    s.kind = FitKind::full_analytic;
    s.bath = b.with_phi(phi);
    s.atom = AtomParams(1.0, 0.81, rabi);
    s.offset = 1.0;
    out.push_back(synthesize_trace(s, {sigma, 11u + static_cast<unsigned>(i)}, uniform_grid(-15.0, 15.0, 1201)));
    offsets.push_back(phi - kPi / 2);
  }
  return out;
}

TEST(FullJoint, FourPhasesRecoverSqueezing) {
  const SqueezedBath b = bath_from_gain({6.6, 0.55});
  std::vector<double> offsets;
  const auto traces = joint_traces(b, 3.95, 0.01, offsets);
  const FitResult r = fit_full_joint(traces, AtomParams(1.0, 0.81, 0.0), offsets);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.value("M-N") / (b.m() - b.n()), 1.0, 0.05);
  EXPECT_NEAR(r.value("phi0"), kPi / 2, 0.05);
}

TEST(FullJoint, NoiselessRoundTrip) {
  const SqueezedBath b(0.6, 0.7);
  std::vector<double> offsets;
  const auto traces = joint_traces(b, 3.0, 0.0, offsets);
  const FitResult r = fit_full_joint(traces, AtomParams(1.0, 0.81, 0.0), offsets);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.value("N") / b.n(), 1.0, 1e-6);
  EXPECT_NEAR(r.value("M") / b.m(), 1.0, 1e-6);
  EXPECT_NEAR(r.value("rabi") / 3.0, 1.0, 1e-6);
  EXPECT_NEAR(r.value("phi0"), kPi / 2, 1e-6);
}

TEST(FullJoint, VacuumTraceGivesRabiAndNullBath) {
  SynthesisSpec s;
  s.kind = FitKind::full_analytic;
  s.atom = AtomParams(1.0, 0.81, 4.0);
  const SpectrumTrace t = synthesize_trace(s, {0.01, 5}, uniform_grid(-15.0, 15.0, 1201));
  const std::vector<SpectrumTrace> traces{t};
  const std::vector<double> offsets{0.0};
  const FitResult r = fit_full_joint(traces, AtomParams(1.0, 0.81, 0.0), offsets);
  EXPECT_NEAR(r.value("rabi") / 4.0, 1.0, 0.01);
  EXPECT_LE(r.value("N"), 2.0 * r.sigma("N") + 1e-12);
  EXPECT_LE(r.value("M"), 2.0 * r.sigma("M") + 1e-12);
  bool warned = false;
  for (const auto& w : r.warnings) warned = warned || w.find("share one phase") != std::string::npos;
  EXPECT_TRUE(warned);
}

TEST(FullJoint, BeatsThreeLorentzianOnDispersiveTrace) {
  SynthesisSpec s;
  s.kind = FitKind::full_analytic;
  s.bath = SqueezedBath(0.5, 0.6, 0.4);
  s.atom = AtomParams(1.0, 1.0, 5.0);
  const SpectrumTrace t = synthesize_trace(s, {0.01, 3}, uniform_grid(-20.0, 20.0, 1601));
  const std::vector<SpectrumTrace> traces{t};
  const std::vector<double> offsets{0.0};
  const FitResult full = fit_full_joint(traces, AtomParams(1.0, 1.0, 0.0), offsets);
  const FitResult three = fit_three_lorentzian(t);
  EXPECT_LT(full.residual_norm, three.residual_norm);
  EXPECT_NEAR(full.chi2_per_dof, 1.0, 0.1);
}

TEST(FullJoint, RejectsMismatchedOffsets) {
  std::vector<double> offsets;
  const auto traces = joint_traces(SqueezedBath(), 3.0, 0.0, offsets);
  offsets.pop_back();
  EXPECT_THROW(fit_full_joint(traces, AtomParams(1.0, 0.81, 0.0), offsets), Error);
}

std::vector<GainSample> gain_sweep(double eta, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<GainSample> out;
  for (double gain : {0.5, 1.0, 1.4, 2.0, 3.0, 4.0, 5.0, 6.0, 6.6}) {
    const SqueezedBath b = bath_from_gain({gain, eta});
    const double d = b.m() - b.n();
    out.push_back({gain, d * (1.0 + noise * g(rng)), noise > 0.0 ? noise * d : 0.0});
  }
  return out;
}

TEST(Efficiency, NoiselessSelfConsistency) {
  const FitResult r = fit_efficiency(gain_sweep(0.55, 0.0, 1));
  EXPECT_NEAR(r.value("eta"), 0.55, 1e-6);
}

TEST(Efficiency, FivePercentNoise) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const FitResult r = fit_efficiency(gain_sweep(0.55, 0.05, seed));
    EXPECT_NEAR(r.value("eta"), 0.55, 0.03) << seed;
    EXPECT_GT(r.sigma("eta"), 0.0);
  }
}

TEST(Efficiency, Degenerate) {
  std::vector<GainSample> same(4, GainSample{2.0, 0.1, 0.0});
  EXPECT_THROW(fit_efficiency(same), Error);
  std::vector<GainSample> few(2, GainSample{2.0, 0.1, 0.0});
  EXPECT_THROW(fit_efficiency(few), Error);
}

TEST(Synthesis, NoiselessIsExactAndSeedsAreDeterministic) {
  const SqueezedBath b = bath_from_gain({1.4, 0.55});
  const std::vector<double> grid = uniform_grid(-10.0, 10.0, 2001);
  EXPECT_EQ(no_drive_trace(b, 0.0, 1).values(), weak_drive_reflection(b, kFig2, grid).values());
  EXPECT_EQ(no_drive_trace(b, 0.0, 1).values(), no_drive_trace(b, 0.0, 99).values());
  EXPECT_EQ(no_drive_trace(b, 0.01, 5).values(), no_drive_trace(b, 0.01, 5).values());
  EXPECT_NE(no_drive_trace(b, 0.01, 5).values(), no_drive_trace(b, 0.01, 6).values());
  EXPECT_THROW(no_drive_trace(b, -0.1, 5), Error);
}

TEST(Synthesis, DrivenTracesMaskTheCoherentPeak) {
  const SpectrumTrace t = mollow_trace(SqueezedBath(), 5.0, FitKind::full_analytic, 0.0, 1);
  EXPECT_EQ(t.metadata().mask.size(), 7u);
  EXPECT_TRUE(t.excluded(1000));
}

TEST(Sinusoid, ExactRecovery) {
  std::vector<double> phis, y;
  for (int i = 0; i < 8; ++i) {
    phis.push_back(0.3 * i);
    y.push_back(1.0 + 0.5 * std::cos(2.0 * (phis.back() - 0.2)));
  }
  const SinusoidFit f = fit_sinusoid(phis, y);
  EXPECT_NEAR(f.mean, 1.0, 1e-12);
  EXPECT_NEAR(f.amplitude(), 0.5, 1e-12);
  EXPECT_NEAR(f.phase(), 0.2, 1e-12);
  EXPECT_NEAR(r_squared(y, y), 1.0, 1e-15);
}

}  // namespace
}  // namespace sqfluor
