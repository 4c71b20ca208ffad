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

// Closed-form steady state, two-time correlators and spectra of a resonantly
// driven two-level emitter in broadband squeezed vacuum.
//
// Everything here is in units of gamma: rates, frequencies and time (1/gamma).
// The correlators are built from the Bloch matrix B through its resolvent
// (sI - B)^{-1} = adj(sI - B) / D(s) and the partial-fraction kernel
//   f_n(t) = L^{-1}{ s^n / D(s) } = sum_j C_j lambda_j^n e^{lambda_j t} - delta_{n,-1} / (lambda_0 lambda_1 lambda_2),
// with C_j = 1 / prod_{k != j} (lambda_j - lambda_k).

#include <array>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sqfluor/core_model.hpp"
#include "sqfluor/trace.hpp"

namespace sqfluor {

using Complex = std::complex<double>;
using Roots = std::array<Complex, 3>;

/// Roots closer than this (units of gamma) make the C_j coefficients blow up.
inline constexpr double kDegeneracyThreshold = 1e-7;

struct BlochState {
  double sx = 0.0;
  double sy = 0.0;
  double sz = -1.0;

  Complex sigma_minus() const { return {0.5 * sx, -0.5 * sy}; }
  Complex sigma_plus() const { return {0.5 * sx, 0.5 * sy}; }
  /// <sigma_+ sigma_-> = (1 + sz) / 2
  double excited_population() const { return 0.5 * (1.0 + sz); }
};

BlochState steady_state(const SqueezedBath& bath, const AtomParams& atom);

/// Rows (-g+, gM, 0), (gM, -g-, -Omega), (0, Omega, -gN).
Eigen::Matrix3d bloch_matrix(const SqueezedBath& bath, const AtomParams& atom);

/// D(s) = s^3 + c2 s^2 + c1 s + c0.
struct CubicPolynomial {
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;

  Complex operator()(Complex s) const { return ((s + c2) * s + c1) * s + c0; }
  Complex derivative(Complex s) const { return (3.0 * s + 2.0 * c2) * s + c1; }
  double scale() const;
};

CubicPolynomial characteristic_polynomial(const RateSet& rates, double rabi);
CubicPolynomial characteristic_polynomial(const SqueezedBath& bath, const AtomParams& atom);

/// Roots of D(s) from the companion-matrix eigenvalues, polished with two
/// Newton steps. Ordered by ascending |Im|, ties broken by Re then Im; complex
/// pairs are exact conjugates.
Roots cubic_roots(const CubicPolynomial& poly);
Roots cubic_roots(const SqueezedBath& bath, const AtomParams& atom);

double min_root_separation(const Roots& roots);

enum class PauliAxis { x, y, z };

/// A traceless single-qubit operator c_x sigma_x + c_y sigma_y + c_z sigma_z.
struct PauliOperator {
  Complex cx{};
  Complex cy{};
  Complex cz{};

  static PauliOperator axis(PauliAxis a);
  static PauliOperator sigma_plus() { return {0.5, Complex(0.0, 0.5), 0.0}; }
  static PauliOperator sigma_minus() { return {0.5, Complex(0.0, -0.5), 0.0}; }
  Complex operator[](int i) const { return i == 0 ? cx : (i == 1 ? cy : cz); }
};

/// Which operator carries the later time argument.
enum class Ordering {
  later_left,   // <A(t) B(0)>
  later_right,  // <A(0) B(t)>
};

/// f(t) = sum_j a_j exp(lambda_j t) + c over the three roots of D(s).
struct ExpSum {
  Roots rates{};
  std::array<Complex, 3> amplitudes{};
  Complex constant{};

  Complex operator()(double t) const;
  /// Integral over t in [0, inf) of exp(i omega t) (f(t) - c); the constant
  /// only contributes a delta function at omega = 0 and is left out.
  Complex one_sided_transform(double omega) const;

  ExpSum& operator+=(const ExpSum& other);
  ExpSum& operator*=(Complex factor);
  friend ExpSum operator+(ExpSum a, const ExpSum& b) { return a += b; }
  friend ExpSum operator*(Complex k, ExpSum f) { return f *= k; }
};

/// Closed-form spectral content of <sigma_+(t) sigma_-(0)>:
/// sum_j K_j exp(lambda_j t) + K.
struct SpectralDecomposition {
  Roots roots{};
  std::array<Complex, 3> amplitudes{};
  Complex coherent_weight{};
  bool perturbed = false;  // Omega was shifted to lift a root degeneracy

  Complex correlator(double t) const;
  /// S(omega) without the K delta(omega) term.
  double operator()(double omega) const;
};

/// The analytic model at one parameter point. Construction computes rates,
/// steady state and distinct roots; everything else is assembled from those.
class BlochModel {
 public:
  /// Throws DegenerateRootsError when two roots are closer than kDegeneracyThreshold.
  static BlochModel exact(const SqueezedBath& bath, const AtomParams& atom);

  /// Like exact(), but lifts a degeneracy by shifting Omega upward by
  /// 1e-6 gamma (growing tenfold up to 1e-2 gamma if needed) and flags the result.
  static BlochModel regularized(const SqueezedBath& bath, const AtomParams& atom);

  const SqueezedBath& bath() const noexcept { return bath_; }
  const AtomParams& atom() const noexcept { return atom_; }
  const RateSet& rates() const noexcept { return rates_; }
  double rabi() const noexcept { return rabi_; }
  bool perturbed() const noexcept { return rabi_ != atom_.rabi(); }
  const BlochState& steady() const noexcept { return steady_; }
  const Roots& roots() const noexcept { return roots_; }
  const std::array<Complex, 3>& partial_fraction_weights() const noexcept { return weights_; }

  /// f_n(t) for n in {-1, 0, 1, 2}.
  ExpSum kernel(int n) const;
  /// W(t) = L^{-1}{(sI - B)^{-1}}.
  std::array<std::array<ExpSum, 3>, 3> propagator() const;
  /// v(t) = L^{-1}{ s^{-1} (sI - B)^{-1} } e_z.
  std::array<ExpSum, 3> drive_response() const;

  /// Two-time correlator of Pauli-axis operators via quantum regression.
  ExpSum correlator(PauliAxis a, PauliAxis b, Ordering ordering) const;
  ExpSum correlator(const PauliOperator& a, const PauliOperator& b, Ordering ordering) const;

  /// K_j and K from their closed forms.
  SpectralDecomposition decomposition() const;

 private:
  BlochModel(const SqueezedBath& bath, const AtomParams& atom, double rabi);

  SqueezedBath bath_;
  AtomParams atom_;
  RateSet rates_;
  double rabi_ = 0.0;
  BlochState steady_;
  Roots roots_{};
  std::array<Complex, 3> weights_{};
};

/// Exact correlators; throw DegenerateRootsError at degenerate points.
ExpSum correlator(PauliAxis a, PauliAxis b, Ordering ordering, const SqueezedBath& bath, const AtomParams& atom);
ExpSum correlator(const PauliOperator& a, const PauliOperator& b, Ordering ordering, const SqueezedBath& bath,
                  const AtomParams& atom);

/// Regularized decomposition of the fluorescence correlator.
SpectralDecomposition spectral_decomposition(const SqueezedBath& bath, const AtomParams& atom);

struct FluorescenceResult {
  SpectrumTrace trace;
  Complex coherent_weight{};
  bool perturbed = false;
};

FluorescenceResult fluorescence_spectrum(const SqueezedBath& bath, const AtomParams& atom,
                                         std::span<const double> grid);

enum class BackgroundShape { flat, lorentzian_filtered, parabolic };

std::string to_string(BackgroundShape s);
BackgroundShape background_shape_from_string(const std::string& s);

/// Frequency dependence of the reflected squeezer noise.
struct BackgroundModel {
  BackgroundShape shape = BackgroundShape::flat;
  double bandwidth = 0.0;  // full width kappa of the source, units of gamma
  /// Parabolic coefficient c in N (1 - c omega^2); NaN selects 4 / kappa^2,
  /// which matches the curvature of the filtered shape at omega = 0.
  double curvature = std::numeric_limits<double>::quiet_NaN();
};

/// N(omega) sampled on the grid, normalized so that N(0) = n.
std::vector<double> squeezer_background(std::span<const double> grid, double n, const BackgroundModel& model);
std::vector<double> squeezer_background(std::span<const double> grid, double n, double bandwidth,
                                        BackgroundShape shape);

/// Pointwise evaluator of the full reflection spectrum from the strongly
/// coupled port; precomputes every correlator once.
class ReflectionEvaluator {
 public:
  ReflectionEvaluator(const SqueezedBath& bath, const AtomParams& atom, BackgroundModel background = {});

  /// S_R(omega) including the background term.
  double operator()(double omega) const;
  /// S_R(omega) minus the background term.
  double atomic(double omega) const;
  double background(double omega) const;
  bool perturbed() const noexcept { return perturbed_; }
  const SpectralDecomposition& fluorescence() const noexcept { return fluorescence_; }

 private:
  double n_ = 0.0;
  double eta_c_ = 1.0;
  Complex m_{};
  BackgroundModel background_;
  SpectralDecomposition fluorescence_;
  ExpSum pp_late_right_;  // <s+(0) s+(t)>
  ExpSum pp_late_left_;   // <s+(t) s+(0)>
  ExpSum mp_late_right_;  // <s-(0) s+(t)>
  bool perturbed_ = false;
};

SpectrumTrace reflection_spectrum(const SqueezedBath& bath, const AtomParams& atom, std::span<const double> grid,
                                  const BackgroundModel& background = {});

/// Components of the no-drive reflection spectrum.
struct WeakDriveTerms {
  double background = 0.0;        // N / (2 pi eta_c)
  double narrow_amplitude = 0.0;  // (M - (1 - eta_c) N) / (2N + 1) / (2 pi)
  double broad_amplitude = 0.0;   // (M + (1 - eta_c) N) / (2N + 1) / (2 pi)
  double g_x = 0.5;
  double g_y = 0.5;

  double narrow(double omega) const { return narrow_amplitude * g_y / (omega * omega + g_y * g_y); }
  double broad(double omega) const { return broad_amplitude * g_x / (omega * omega + g_x * g_x); }
  double operator()(double omega) const { return background + narrow(omega) - broad(omega); }
};

WeakDriveTerms weak_drive_terms(const SqueezedBath& bath, const AtomParams& atom);
SpectrumTrace weak_drive_reflection(const SqueezedBath& bath, const AtomParams& atom, std::span<const double> grid);

/// Three-Lorentzian strong-drive limit, centered at 0 and +-Omega.
struct StrongDriveTerms {
  double background = 0.0;
  double center_amplitude = 0.0;  // peak height of the center line
  double center_hwhm = 0.5;       // gamma_+
  double sideband_amplitude = 0.0;
  double sideband_hwhm = 0.75;    // (gamma_N + gamma_-) / 2
  double splitting = 0.0;         // Omega

  double operator()(double omega) const;
};

StrongDriveTerms strong_drive_terms(const SqueezedBath& bath, const AtomParams& atom);
SpectrumTrace strong_drive_reflection(const SqueezedBath& bath, const AtomParams& atom, std::span<const double> grid);

/// +-8 max(Omega, gamma_x) with 2001 points.
std::vector<double> default_grid(const SqueezedBath& bath, const AtomParams& atom);

/// Metadata stamped on model-generated traces.
TraceMetadata model_metadata(const SqueezedBath& bath, const AtomParams& atom);

}  // namespace sqfluor
