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
// Brute-force reference: integrate the single-port squeezed-bath master
// equation for a 2x2 density matrix, regress two-time correlators numerically
// and Fourier transform them by quadrature. Shares no formulas with spectra.hpp
// beyond the parameter types.

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "sqfluor/core_model.hpp"
#include "sqfluor/spectra.hpp"
#include "sqfluor/trace.hpp"

namespace sqfluor {

/// Basis order (|e>, |g>): sigma_+ = |e><g| has its 1 at (0, 1).
class DensityMatrix2 {
 public:
  DensityMatrix2() : DensityMatrix2(ground()) {}
  explicit DensityMatrix2(const Eigen::Matrix2cd& m) : m_(m) {}

  static DensityMatrix2 ground();
  static DensityMatrix2 excited();
  /// rho = (I + sx sigma_x + sy sigma_y + sz sigma_z) / 2
  static DensityMatrix2 from_bloch(const BlochState& s);

  const Eigen::Matrix2cd& matrix() const noexcept { return m_; }
  Complex operator()(int r, int c) const { return m_(r, c); }
  BlochState bloch() const;
  Complex expectation(const Eigen::Matrix2cd& op) const { return (op * m_).trace(); }

  double hermiticity_error() const;
  double trace_error() const;
  double min_eigenvalue() const;
  /// Throws InvariantViolation on drift beyond tol (eigenvalues: -1e-10).
  void check(double tol) const;

 private:
  Eigen::Matrix2cd m_;
};

namespace pauli {
Eigen::Matrix2cd x();
Eigen::Matrix2cd y();
Eigen::Matrix2cd z();
Eigen::Matrix2cd plus();
Eigen::Matrix2cd minus();
Eigen::Matrix2cd matrix(const PauliOperator& op);
}  // namespace pauli

enum class Quadrature { trapezoid_with_tail, fft };
std::string to_string(Quadrature q);
Quadrature quadrature_from_string(const std::string& s);

struct OracleConfig {
  double step = 0.0;     // RK4 step in 1/gamma; 0 picks the default
  double horizon = 0.0;  // correlation window in 1/gamma; 0 picks the default
  Quadrature quadrature = Quadrature::trapezoid_with_tail;

  /// step = min(0.01 / max(gN, gx, Omega), 0.005); horizon = 20 / slowest decay rate.
  static OracleConfig automatic(const SqueezedBath& bath, const AtomParams& atom,
                                Quadrature q = Quadrature::trapezoid_with_tail);
  /// Fills in zero fields and rejects a step or horizon that breaks the limits above.
  OracleConfig resolved(const SqueezedBath& bath, const AtomParams& atom) const;
};

/// d rho / dt for any 2x2 operator (the generator is linear).
Eigen::Matrix2cd lindblad_rhs(const Eigen::Matrix2cd& rho, const SqueezedBath& bath, const AtomParams& atom);
DensityMatrix2 lindblad_rhs(const DensityMatrix2& rho, const SqueezedBath& bath, const AtomParams& atom);

/// Generator as a 4x4 matrix acting on column-major vec(rho).
Eigen::Matrix4cd liouvillian(const SqueezedBath& bath, const AtomParams& atom);

/// Decay rates -Re(mu) of the non-stationary Liouvillian modes, ascending.
std::vector<double> decay_rates(const SqueezedBath& bath, const AtomParams& atom);

/// Fixed-step RK4 up to time t; checks the density-matrix invariants every step.
DensityMatrix2 evolve(const DensityMatrix2& rho0, const SqueezedBath& bath, const AtomParams& atom, double t,
                      const OracleConfig& config = {});

/// Null vector of the Liouvillian normalized to unit trace.
DensityMatrix2 oracle_steady_state(const SqueezedBath& bath, const AtomParams& atom);

struct TimeSeries {
  double dt = 0.0;
  std::vector<Complex> values;
  double time(std::size_t i) const { return dt * static_cast<double>(i); }
  std::size_t size() const { return values.size(); }
};

/// <A(t) B(0)> evolves B rho_ss; <A(0) B(t)> evolves rho_ss A. Samples every step.
TimeSeries regression_correlator(const PauliOperator& a, const PauliOperator& b, Ordering ordering,
                                 const SqueezedBath& bath, const AtomParams& atom, const OracleConfig& config = {});
TimeSeries regression_correlator(PauliAxis a, PauliAxis b, Ordering ordering, const SqueezedBath& bath,
                                 const AtomParams& atom, const OracleConfig& config = {});

/// (1/pi) Re int_0^inf e^{i w t} [<s+(t) s-(0)> - |<s+>|^2] dt on the grid (units of gamma).
SpectrumTrace spectrum_numeric(const SqueezedBath& bath, const AtomParams& atom, std::span<const double> grid,
                               const OracleConfig& config = {});

/// max |a - b| / max |b|.
double relative_linf(std::span<const double> a, std::span<const double> b);

}  // namespace sqfluor
