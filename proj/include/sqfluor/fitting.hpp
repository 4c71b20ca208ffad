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

#pragma once
// Least-squares extraction of squeezing parameters from sampled spectra.
//
// Every model is split into nonlinear parameters, handled by Levenberg-Marquardt
// in an unconstrained internal coordinate system, and per-trace linear terms
// (scale and a polynomial background in x = omega / max|omega|) solved exactly
// at each step. Estimates and covariances are reported in physical coordinates.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sqfluor/core_model.hpp"
#include "sqfluor/levenberg_marquardt.hpp"
#include "sqfluor/spectra.hpp"
#include "sqfluor/trace.hpp"

namespace sqfluor {

enum class FitKind { no_drive, three_lorentzian, full_analytic };
std::string to_string(FitKind k);
FitKind fit_kind_from_string(const std::string& s);

/// How (N, M) enter the optimizer. n_r: N = u^2, M = sin^2(v) sqrt(N(N+1)),
/// physical by construction. n_m: N = u^2 and M free, infeasible points rejected.
enum class Coordinates { n_r, n_m };

struct FitOptions {
  Coordinates coordinates = Coordinates::n_r;
  int background_degree = 2;  // -1 none (calibrated trace), 0 flat, 1 linear, 2 parabolic
  LmOptions lm;
  /// Background shape assumed inside the full-analytic model.
  BackgroundModel background;
  /// Known overall scale of the model (no-drive and full-analytic). Leaving it
  /// free makes N and the scale degenerate as N, M -> 0.
  std::optional<double> fixed_scale;
  /// Optional starting point; skips the multi-start search when set.
  std::optional<double> initial_n;
  std::optional<double> initial_m;
  std::optional<double> initial_rabi;
  std::optional<double> initial_phi;
};

struct FitResult {
  FitKind kind = FitKind::no_drive;
  std::vector<std::string> names;
  Eigen::VectorXd values;
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;  // sqrt of the weighted sum of squares
  double chi2_per_dof = 0.0;
  std::size_t points = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
  /// Quantities computed from the estimates, with propagated uncertainties.
  std::map<std::string, double> derived;
  std::map<std::string, double> derived_sigma;

  bool has(const std::string& name) const;
  double value(const std::string& name) const;
  double sigma(const std::string& name) const;
};

/// No-drive reflection (narrow positive and broad negative Lorentzian) plus
/// a polynomial background. eta_c and gamma are fixed.
FitResult fit_no_drive(const SpectrumTrace& trace, const AtomParams& fixed, const FitOptions& options = {});

/// Three free Lorentzians plus a polynomial background. Warns when a sideband
/// is wider than the splitting.
FitResult fit_three_lorentzian(const SpectrumTrace& trace, const FitOptions& options = {});

/// Joint fit of the full reflection spectrum. N, M, Omega and a base phase are
/// shared; trace i sits at base phase + phase_offsets[i]. eta_c and gamma are fixed.
FitResult fit_full_joint(std::span<const SpectrumTrace> traces, const AtomParams& fixed,
                         std::span<const double> phase_offsets, const FitOptions& options = {});

struct GainSample {
  double gain_db = 0.0;
  double m_minus_n = 0.0;
  double sigma = 0.0;  // 0 means unweighted
};

/// One-parameter fit of the overall efficiency eta in M - N = eta (M_i - N_i)(G).
FitResult fit_efficiency(std::span<const GainSample> sweep);

/// What to synthesize. The linear terms mirror the fitted background model.
struct SynthesisSpec {
  FitKind kind = FitKind::no_drive;
  SqueezedBath bath;
  AtomParams atom;
  BackgroundModel background;  // full-analytic only
  double scale = 1.0;
  double offset = 0.0;
  double linear = 0.0;     // coefficient of x = omega / max|omega|
  double quadratic = 0.0;  // coefficient of x^2
};

struct NoiseSpec {
  double relative_sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Model samples times (1 + sigma * standard normal). Noisy traces carry
/// per-point sigmas sigma * |model|. Driven traces mask three points on each
/// side of zero offset.
SpectrumTrace synthesize_trace(const SynthesisSpec& spec, const NoiseSpec& noise, std::span<const double> grid);

struct SinusoidFit {
  double mean = 0.0;
  double cos_coeff = 0.0;  // coefficient of cos(2 phi)
  double sin_coeff = 0.0;  // coefficient of sin(2 phi)
  double amplitude() const;
  /// Phase delta in y = mean + amplitude cos(2 (phi - delta)).
  double phase() const;
  double operator()(double phi) const;
};

/// Linear least squares of y = a + b cos 2phi + c sin 2phi.
SinusoidFit fit_sinusoid(std::span<const double> phis, std::span<const double> values);

/// Coefficient of determination of the observed values against predictions.
double r_squared(std::span<const double> observed, std::span<const double> predicted);

}  // namespace sqfluor
