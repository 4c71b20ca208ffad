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

#include "sqfluor/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sqfluor/error.hpp"

namespace sqfluor {
namespace {

double reduce_phase(double phi) {
  double r = std::fmod(phi, kPi);
  if (r < 0.0) r += kPi;
  if (r >= kPi) r = 0.0;
  return r;
}

}  // namespace

SqueezedBath::SqueezedBath(double n_photons, double m_mag, double phi)
    : n_(n_photons), m_(m_mag), phi_(reduce_phase(phi)), phi_raw_(phi) {
  if (!std::isfinite(n_photons) || !std::isfinite(m_mag) || !std::isfinite(phi)) {
    throw PhysicalityError("squeezed bath parameters must be finite");
  }
  if (n_photons < 0.0) {
    throw PhysicalityError("photon number N must be non-negative, got " + std::to_string(n_photons));
  }
  if (m_mag < 0.0) {
    throw PhysicalityError("|M| must be non-negative, got " + std::to_string(m_mag));
  }
  if (m_mag > m_max() + kPhysicalityTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "unphysical squeezed state: |M| = " << m_mag << " exceeds sqrt(N(N+1)) = " << m_max();
    throw PhysicalityError(msg.str());
  }
}

SqueezedBath SqueezedBath::unchecked(double n_photons, double m_signed, double phi) {
  SqueezedBath b;
  b.n_ = n_photons;
  b.m_ = m_signed;
  b.phi_ = reduce_phase(phi);
  b.phi_raw_ = phi;
  return b;
}

std::complex<double> SqueezedBath::m_complex() const {
  return {m_ * std::cos(2.0 * phi_), m_ * std::sin(2.0 * phi_)};
}

double SqueezedBath::m_max() const { return std::sqrt(n_ * (n_ + 1.0)); }

SqueezedBath SqueezedBath::with_phi(double phi) const {
  SqueezedBath b = *this;
  b.phi_ = reduce_phase(phi);
  b.phi_raw_ = phi;
  return b;
}

SqueezedBath SqueezedBath::diluted(double eta) const {
  if (!(eta > 0.0 && eta <= 1.0)) throw PhysicalityError("dilution factor must lie in (0, 1]");
  return SqueezedBath(eta * n_, eta * m_, phi_raw_);
}

AtomParams::AtomParams(double gamma, double eta_c, double rabi)
    : gamma_(gamma), eta_c_(eta_c), rabi_(rabi) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw PhysicalityError("linewidth gamma must be positive");
  if (!(eta_c > 0.0 && eta_c <= 1.0)) throw PhysicalityError("port efficiency eta_c must lie in (0, 1]");
  if (!(rabi >= 0.0) || !std::isfinite(rabi)) throw PhysicalityError("Rabi frequency must be non-negative");
}

RateSet rates_from_params(const SqueezedBath& bath, const AtomParams& /*atom*/) {
  const double n = bath.n();
  const double m = bath.m();
  const double c = std::cos(2.0 * bath.phi());
  const double s = std::sin(2.0 * bath.phi());
  RateSet r;
  r.g_plus = n + m * c + 0.5;
  r.g_minus = n - m * c + 0.5;
  r.g_m = m * s;
  r.g_n = 2.0 * n + 1.0;
  const double nm2 = (n + 0.5) * (n + 0.5) - m * m;
  if (nm2 <= 0.0) throw PhysicalityError("gamma_NM^2 must be positive");
  r.g_nm = std::sqrt(nm2);
  r.g_x = n + std::abs(m) + 0.5;
  r.g_y = n - std::abs(m) + 0.5;
  return r;
}

double GainPoint::linear_gain() const { return std::pow(10.0, gain_db / 10.0); }

SqueezedBath bath_from_gain(const GainPoint& g) {
  if (!(g.gain_db >= 0.0)) throw PhysicalityError("JPA gain must be >= 0 dB");
  if (!(g.efficiency > 0.0 && g.efficiency <= 1.0)) throw PhysicalityError("efficiency must lie in (0, 1]");
  // 2(N +- M + 1/2) = (sqrt(G) +- sqrt(G-1))^2 gives N = G - 1, M = sqrt(G(G-1)).
  const double gain = g.linear_gain();
  const double n_ideal = gain - 1.0;
  const double m_ideal = std::sqrt(gain * (gain - 1.0));
  const double n = g.efficiency * n_ideal;
  const double m = g.efficiency * m_ideal;
  // Clamp round-off at eta = 1 so the ideal state passes the positivity check.
  return SqueezedBath(n, std::min(m, std::sqrt(n * (n + 1.0))), 0.0);
}

double quadrature_variance(double theta, const SqueezedBath& bath, double squeeze_axis_phi) {
  return 0.5 * (bath.n() + bath.m() * std::cos(2.0 * (theta - squeeze_axis_phi)) + 0.5);
}

double squeezing_db(const SqueezedBath& bath) {
  return -10.0 * std::log10((bath.n() - bath.m() + 0.5) / 0.5);
}

double m_minus_n_from_db(double db) { return 0.5 * (1.0 - std::pow(10.0, -db / 10.0)); }

std::string ValidityReport::summary() const {
  std::ostringstream out;
  out << "kappa/(0.6g)=" << source_ratio << (source_ok ? " ok" : " FAIL") << "; Omega/(0.6g)=" << drive_ratio
      << (drive_ok ? (drive_warn ? " warn" : " ok") : " FAIL");
  return out.str();
}

ValidityReport validity_check(const AtomParams& atom, double source_bandwidth, double coupling_g) {
  if (!(coupling_g > 0.0)) throw PhysicalityError("coupling g must be positive");
  if (!(source_bandwidth >= 0.0)) throw PhysicalityError("source bandwidth must be non-negative");
  const double limit = 0.6 * coupling_g;
  ValidityReport r;
  r.source_ratio = source_bandwidth / limit;
  r.drive_ratio = atom.rabi() * atom.gamma() / limit;
  r.source_ok = r.source_ratio < 1.0;
  r.drive_warn = r.drive_ratio > 0.1;
  r.drive_ok = r.drive_ratio <= 0.6;
  return r;
}

}  // namespace sqfluor
