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

// Parameter conventions shared by the whole library.
//
// All rates and frequencies inside the analytic core are expressed in units of
// the total radiative linewidth gamma. Physical units (rad/s, Hz) only enter
// through AtomParams::gamma when traces are read or written.

#include <complex>
#include <string>

namespace sqfluor {

inline constexpr double kPi = 3.14159265358979323846;

/// Slack admitted by the positivity check |M| <= sqrt(N(N+1)).
inline constexpr double kPhysicalityTolerance = 1e-12;

/// Second-order moments of the squeezed reservoir seen by the atom.
///
/// The phase is stored reduced to [0, pi) because every observable depends on
/// 2*phi only; the angle passed in is kept as `phi_raw()` for sweep bookkeeping.
class SqueezedBath {
 public:
  SqueezedBath() = default;

  /// Throws PhysicalityError if n < 0, m < 0 or m exceeds sqrt(n(n+1)).
  SqueezedBath(double n_photons, double m_mag, double phi = 0.0);

  static SqueezedBath vacuum() { return {}; }

  /// Skips the positivity checks and allows a signed m. Only meant for
  /// linearizing models around a boundary point; the formulas stay analytic
  /// in (n, m) as long as |m| < n + 1/2.
  static SqueezedBath unchecked(double n_photons, double m_signed, double phi);

  double n() const noexcept { return n_; }
  double m() const noexcept { return m_; }
  double phi() const noexcept { return phi_; }
  double phi_raw() const noexcept { return phi_raw_; }

  /// M = |M| exp(2 i phi).
  std::complex<double> m_complex() const;

  /// Largest |M| compatible with a physical state at this N.
  double m_max() const;

  SqueezedBath with_phi(double phi) const;

  /// Beam-splitter dilution: N -> eta N, M -> eta M.
  SqueezedBath diluted(double eta) const;

 private:
  double n_ = 0.0;
  double m_ = 0.0;
  double phi_ = 0.0;
  double phi_raw_ = 0.0;
};

/// Two-level emitter parameters.
class AtomParams {
 public:
  AtomParams() = default;

  /// gamma: total radiative linewidth in angular units; eta_c in (0, 1];
  /// rabi: resonant Rabi frequency in units of gamma.
  AtomParams(double gamma, double eta_c, double rabi);

  double gamma() const noexcept { return gamma_; }
  double eta_c() const noexcept { return eta_c_; }
  double rabi() const noexcept { return rabi_; }

  double gamma_ext() const noexcept { return eta_c_ * gamma_; }
  double gamma_int() const noexcept { return (1.0 - eta_c_) * gamma_; }

  AtomParams with_rabi(double rabi) const { return {gamma_, eta_c_, rabi}; }
  AtomParams with_eta_c(double eta_c) const { return {gamma_, eta_c, rabi_}; }

 private:
  double gamma_ = 1.0;
  double eta_c_ = 1.0;
  double rabi_ = 0.0;
};

/// Decay rates of the optical Bloch equations, in units of gamma.
struct RateSet {
  double g_plus = 0.5;   // gamma_+ = N + |M| cos 2phi + 1/2
  double g_minus = 0.5;  // gamma_- = N - |M| cos 2phi + 1/2
  double g_m = 0.0;      // gamma_M = |M| sin 2phi
  double g_n = 1.0;      // gamma_N = 2N + 1
  double g_nm = 0.5;     // gamma_NM = sqrt((N + 1/2)^2 - M^2)
  double g_x = 0.5;      // N + |M| + 1/2
  double g_y = 0.5;      // N - |M| + 1/2
};

RateSet rates_from_params(const SqueezedBath& bath, const AtomParams& atom);

/// Phase-preserving JPA power gain and the overall efficiency diluting its output.
struct GainPoint {
  double gain_db = 0.0;
  double efficiency = 1.0;

  double linear_gain() const;
  /// Component loss once the cavity port efficiency is factored out.
  double eta_loss(double eta_c) const { return efficiency / eta_c; }
};

/// Moments of an ideal squeezer at gain G, diluted by the efficiency.
/// The phase is left at zero; callers set it with SqueezedBath::with_phi.
SqueezedBath bath_from_gain(const GainPoint& g);

/// Quadrature variance V(theta) of a squeezed state whose amplification axis
/// lies at squeeze_axis_phi.
double quadrature_variance(double theta, const SqueezedBath& bath, double squeeze_axis_phi);

/// Squeezing of the minimal quadrature below the vacuum variance, in dB.
/// Positive values mean variance below vacuum.
double squeezing_db(const SqueezedBath& bath);

/// Inverse of squeezing_db for the quantity M - N.
double m_minus_n_from_db(double db);

struct ValidityReport {
  double source_ratio = 0.0;  // kappa / (0.6 g)
  double drive_ratio = 0.0;   // Omega / (0.6 g)
  bool source_ok = true;      // kappa < 0.6 g
  bool drive_warn = false;    // Omega / (0.6 g) > 0.1
  bool drive_ok = true;       // Omega / (0.6 g) <= 0.6
  bool pass() const { return source_ok && drive_ok; }
  std::string summary() const;
};

/// Two-level approximation check for a polariton transition. source_bandwidth
/// (kappa_JPA) and coupling_g share the angular units of atom.gamma().
ValidityReport validity_check(const AtomParams& atom, double source_bandwidth, double coupling_g);

}  // namespace sqfluor
