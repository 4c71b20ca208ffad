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

#include "sqfluor/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "sqfluor/error.hpp"

namespace sqfluor {
namespace {

constexpr Complex kI{0.0, 1.0};

BlochState steady_from_rates(const RateSet& r, double rabi) {
  const double nm2 = r.g_nm * r.g_nm;
  const double den = r.g_n * nm2 + rabi * rabi * r.g_plus;
  if (!(den > 0.0)) throw NumericalError("steady state denominator vanishes");
  return {rabi * r.g_m / den, rabi * r.g_plus / den, -nm2 / den};
}

// <sigma_a sigma_b> = delta_ab + i eps_abc <sigma_c>
Complex pauli_product_mean(int a, int b, const BlochState& s) {
  if (a == b) return 1.0;
  const double mean[3] = {s.sx, s.sy, s.sz};
  const int c = 3 - a - b;
  const double sign = ((b - a + 3) % 3 == 1) ? 1.0 : -1.0;  // (x,y), (y,z), (z,x) are cyclic
  return kI * sign * mean[c];
}

ExpSum zero_like(const Roots& roots) {
  ExpSum f;
  f.rates = roots;
  return f;
}

}  // namespace

BlochState steady_state(const SqueezedBath& bath, const AtomParams& atom) {
  return steady_from_rates(rates_from_params(bath, atom), atom.rabi());
}

Eigen::Matrix3d bloch_matrix(const SqueezedBath& bath, const AtomParams& atom) {
  const RateSet r = rates_from_params(bath, atom);
  const double om = atom.rabi();
  Eigen::Matrix3d b;
  b << -r.g_plus, r.g_m, 0.0,
       r.g_m, -r.g_minus, -om,
       0.0, om, -r.g_n;
  return b;
}

double CubicPolynomial::scale() const { return std::max({1.0, std::abs(c2), std::abs(c1), std::abs(c0)}); }

CubicPolynomial characteristic_polynomial(const RateSet& r, double rabi) {
  // D(s) = (s + gN)[(s + g-)(s + g+) - gM^2] + (s + g+) Omega^2
  const double a = r.g_plus + r.g_minus;
  const double b = r.g_plus * r.g_minus - r.g_m * r.g_m;
  const double om2 = rabi * rabi;
  return {a + r.g_n, b + a * r.g_n + om2, b * r.g_n + om2 * r.g_plus};
}

CubicPolynomial characteristic_polynomial(const SqueezedBath& bath, const AtomParams& atom) {
  return characteristic_polynomial(rates_from_params(bath, atom), atom.rabi());
}

Roots cubic_roots(const CubicPolynomial& poly) {
  Eigen::Matrix3d companion;
  companion << -poly.c2, -poly.c1, -poly.c0,
               1.0, 0.0, 0.0,
               0.0, 1.0, 0.0;
  Eigen::EigenSolver<Eigen::Matrix3d> solver(companion, false);
  if (solver.info() != Eigen::Success) throw NumericalError("companion eigenvalue solve failed");
  Roots roots;
  for (int i = 0; i < 3; ++i) roots[i] = solver.eigenvalues()[i];

  for (auto& s : roots) {
    for (int step = 0; step < 2; ++step) {
      const Complex d = poly.derivative(s);
      if (std::abs(d) == 0.0) break;
      const Complex next = s - poly(s) / d;
      if (std::abs(poly(next)) <= std::abs(poly(s))) s = next;
    }
  }

  // A real cubic has at least one real root; the remaining two are either both
  // real or a conjugate pair.
  std::sort(roots.begin(), roots.end(),
            [](const Complex& a, const Complex& b) { return std::abs(a.imag()) < std::abs(b.imag()); });
  roots[0] = {roots[0].real(), 0.0};
  if (roots[1].imag() != 0.0 || roots[2].imag() != 0.0) {
    const Complex upper = roots[1].imag() >= roots[2].imag() ? roots[1] : roots[2];
    const Complex lower = roots[1].imag() >= roots[2].imag() ? roots[2] : roots[1];
    const Complex mean = 0.5 * (upper + std::conj(lower));
    roots[1] = std::conj(mean);
    roots[2] = mean;
  }
  std::sort(roots.begin(), roots.end(), [](const Complex& a, const Complex& b) {
    const double ia = std::abs(a.imag());
    const double ib = std::abs(b.imag());
    if (ia != ib) return ia < ib;
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return roots;
}

Roots cubic_roots(const SqueezedBath& bath, const AtomParams& atom) {
  return cubic_roots(characteristic_polynomial(bath, atom));
}

double min_root_separation(const Roots& r) {
  return std::min({std::abs(r[0] - r[1]), std::abs(r[0] - r[2]), std::abs(r[1] - r[2])});
}

PauliOperator PauliOperator::axis(PauliAxis a) {
  switch (a) {
    case PauliAxis::x: return {1.0, 0.0, 0.0};
    case PauliAxis::y: return {0.0, 1.0, 0.0};
    case PauliAxis::z: return {0.0, 0.0, 1.0};
  }
  return {};
}

Complex ExpSum::operator()(double t) const {
  Complex f = constant;
  for (int j = 0; j < 3; ++j) f += amplitudes[j] * std::exp(rates[j] * t);
  return f;
}

Complex ExpSum::one_sided_transform(double omega) const {
  Complex f{};
  for (int j = 0; j < 3; ++j) f -= amplitudes[j] / (rates[j] + kI * omega);
  return f;
}

ExpSum& ExpSum::operator+=(const ExpSum& other) {
  for (int j = 0; j < 3; ++j) amplitudes[j] += other.amplitudes[j];
  constant += other.constant;
  return *this;
}

ExpSum& ExpSum::operator*=(Complex factor) {
  for (auto& a : amplitudes) a *= factor;
  constant *= factor;
  return *this;
}

Complex SpectralDecomposition::correlator(double t) const {
  Complex f = coherent_weight;
  for (int j = 0; j < 3; ++j) f += amplitudes[j] * std::exp(roots[j] * t);
  return f;
}

double SpectralDecomposition::operator()(double omega) const {
  double s = 0.0;
  for (int j = 0; j < 3; ++j) {
    const double lr = roots[j].real();
    const double shifted = omega + roots[j].imag();
    s -= (amplitudes[j].real() * lr + amplitudes[j].imag() * shifted) / (lr * lr + shifted * shifted);
  }
  return s / kPi;
}

BlochModel::BlochModel(const SqueezedBath& bath, const AtomParams& atom, double rabi)
    : bath_(bath), atom_(atom), rates_(rates_from_params(bath, atom)), rabi_(rabi) {
  steady_ = steady_from_rates(rates_, rabi_);
  roots_ = cubic_roots(characteristic_polynomial(rates_, rabi_));
  for (int j = 0; j < 3; ++j) {
    Complex prod = 1.0;
    for (int k = 0; k < 3; ++k) {
      if (k != j) prod *= roots_[j] - roots_[k];
    }
    weights_[j] = 1.0 / prod;
  }
}

BlochModel BlochModel::exact(const SqueezedBath& bath, const AtomParams& atom) {
  BlochModel model(bath, atom, atom.rabi());
  const double sep = min_root_separation(model.roots_);
  if (sep < kDegeneracyThreshold) {
    std::ostringstream msg;
    msg << "roots of D(s) are degenerate (min separation " << sep << " gamma)";
    throw DegenerateRootsError(msg.str(), sep);
  }
  return model;
}

BlochModel BlochModel::regularized(const SqueezedBath& bath, const AtomParams& atom) {
  BlochModel model(bath, atom, atom.rabi());
  double sep = min_root_separation(model.roots_);
  for (double shift = 1e-6; sep < kDegeneracyThreshold; shift *= 10.0) {
    if (shift > 1e-2) {
      throw DegenerateRootsError("could not lift root degeneracy by shifting the Rabi frequency", sep);
    }
    model = BlochModel(bath, atom, atom.rabi() + shift);
    sep = min_root_separation(model.roots_);
  }
  return model;
}

ExpSum BlochModel::kernel(int n) const {
  if (n < -1 || n > 2) throw Error("kernel order must lie in {-1, 0, 1, 2}");
  ExpSum f = zero_like(roots_);
  for (int j = 0; j < 3; ++j) f.amplitudes[j] = weights_[j] * std::pow(roots_[j], n);
  if (n == -1) f.constant = -1.0 / (roots_[0] * roots_[1] * roots_[2]);
  return f;
}

std::array<std::array<ExpSum, 3>, 3> BlochModel::propagator() const {
  const RateSet& r = rates_;
  const double om = rabi_;
  const ExpSum f0 = kernel(0);
  const ExpSum f1 = kernel(1);
  const ExpSum f2 = kernel(2);
  auto combo = [&](double a2, double a1, double a0) { return Complex(a2) * f2 + (Complex(a1) * f1 + Complex(a0) * f0); };
  std::array<std::array<ExpSum, 3>, 3> w;
  w[0][0] = combo(1.0, r.g_minus + r.g_n, r.g_minus * r.g_n + om * om);
  w[0][1] = combo(0.0, r.g_m, r.g_n * r.g_m);
  w[0][2] = combo(0.0, 0.0, -r.g_m * om);
  w[1][0] = combo(0.0, r.g_m, r.g_n * r.g_m);
  w[1][1] = combo(1.0, r.g_n + r.g_plus, r.g_n * r.g_plus);
  w[1][2] = combo(0.0, -om, -om * r.g_plus);
  w[2][0] = combo(0.0, 0.0, r.g_m * om);
  w[2][1] = combo(0.0, om, om * r.g_plus);
  w[2][2] = combo(1.0, r.g_n, r.g_nm * r.g_nm);
  return w;
}

std::array<ExpSum, 3> BlochModel::drive_response() const {
  const RateSet& r = rates_;
  const double om = rabi_;
  const ExpSum fm1 = kernel(-1);
  const ExpSum f0 = kernel(0);
  const ExpSum f1 = kernel(1);
  return {Complex(-r.g_m * om) * fm1,
          Complex(-om) * f0 + Complex(-om * r.g_plus) * fm1,
          f1 + (Complex(r.g_n) * f0 + Complex(r.g_nm * r.g_nm) * fm1)};
}

ExpSum BlochModel::correlator(PauliAxis a, PauliAxis b, Ordering ordering) const {
  return correlator(PauliOperator::axis(a), PauliOperator::axis(b), ordering);
}

ExpSum BlochModel::correlator(const PauliOperator& a, const PauliOperator& b, Ordering ordering) const {
  // The regressed vector runs over the operator carrying the later time; the
  // other operator fixes the initial moments and the inhomogeneous drive term.
  const bool left = ordering == Ordering::later_left;
  const PauliOperator& late = left ? a : b;
  const PauliOperator& early = left ? b : a;
  const double mean[3] = {steady_.sx, steady_.sy, steady_.sz};

  std::array<Complex, 3> initial{};
  Complex early_mean{};
  for (int k = 0; k < 3; ++k) {
    early_mean += early[k] * mean[k];
    for (int e = 0; e < 3; ++e) {
      initial[k] += early[e] * (left ? pauli_product_mean(k, e, steady_) : pauli_product_mean(e, k, steady_));
    }
  }

  const auto w = propagator();
  const auto v = drive_response();
  ExpSum out = zero_like(roots_);
  for (int i = 0; i < 3; ++i) {
    if (late[i] == 0.0) continue;
    ExpSum component = Complex(-early_mean) * v[i];
    for (int k = 0; k < 3; ++k) component += initial[k] * w[i][k];
    out += late[i] * component;
  }
  return out;
}

SpectralDecomposition BlochModel::decomposition() const {
  const RateSet& r = rates_;
  const double om = rabi_;
  const Complex sm = steady_.sigma_minus();
  const double pop = 1.0 + steady_.sz;
  SpectralDecomposition d;
  d.roots = roots_;
  d.perturbed = perturbed();
  for (int j = 0; j < 3; ++j) {
    const Complex l = roots_[j];
    const Complex population_part = 0.25 * (2.0 * l * l + r.g_n * (3.0 * l + r.g_n) + om * om) * pop;
    const Complex coherence_part = 0.5 * om * (r.g_m + kI * (r.g_plus + l)) * (1.0 + 1.0 / l) * sm;
    d.amplitudes[j] = weights_[j] * (population_part + coherence_part);
  }
  d.coherent_weight = -0.5 * om * (r.g_m + kI * r.g_plus) * sm / (roots_[0] * roots_[1] * roots_[2]);
  return d;
}

ExpSum correlator(PauliAxis a, PauliAxis b, Ordering ordering, const SqueezedBath& bath, const AtomParams& atom) {
  return BlochModel::exact(bath, atom).correlator(a, b, ordering);
}

ExpSum correlator(const PauliOperator& a, const PauliOperator& b, Ordering ordering, const SqueezedBath& bath,
                  const AtomParams& atom) {
  return BlochModel::exact(bath, atom).correlator(a, b, ordering);
}

SpectralDecomposition spectral_decomposition(const SqueezedBath& bath, const AtomParams& atom) {
  return BlochModel::regularized(bath, atom).decomposition();
}

TraceMetadata model_metadata(const SqueezedBath& bath, const AtomParams& atom) {
  TraceMetadata meta;
  meta.units = FrequencyUnit::gamma;
  meta.gamma_hz = atom.gamma() / (2.0 * kPi);
  meta.eta_c = atom.eta_c();
  meta.phi_rad = bath.phi_raw();
  meta.rabi_hz = atom.rabi() * *meta.gamma_hz;
  meta.normalization = "model";
  return meta;
}

FluorescenceResult fluorescence_spectrum(const SqueezedBath& bath, const AtomParams& atom,
                                         std::span<const double> grid) {
  const SpectralDecomposition d = spectral_decomposition(bath, atom);
  std::vector<double> values(grid.size());
  std::transform(grid.begin(), grid.end(), values.begin(), [&](double w) { return d(w); });
  TraceMetadata meta = model_metadata(bath, atom);
  meta.normalization = "fluorescence";
  if (d.perturbed) meta.extra["degenerate_perturbed"] = "1";
  return {SpectrumTrace(std::vector<double>(grid.begin(), grid.end()), std::move(values), std::move(meta)),
          d.coherent_weight, d.perturbed};
}

std::string to_string(BackgroundShape s) {
  switch (s) {
    case BackgroundShape::flat: return "flat";
    case BackgroundShape::lorentzian_filtered: return "lorentzian-filtered";
    case BackgroundShape::parabolic: return "parabolic";
  }
  return "flat";
}

BackgroundShape background_shape_from_string(const std::string& s) {
  if (s == "flat") return BackgroundShape::flat;
  if (s == "lorentzian-filtered" || s == "lorentzian") return BackgroundShape::lorentzian_filtered;
  if (s == "parabolic") return BackgroundShape::parabolic;
  throw Error("unknown background shape '" + s + "'");
}

std::vector<double> squeezer_background(std::span<const double> grid, double n, const BackgroundModel& model) {
  if (n < 0.0) throw PhysicalityError("background photon number must be non-negative");
  const bool needs_bandwidth = model.shape != BackgroundShape::flat &&
                               !(model.shape == BackgroundShape::parabolic && std::isfinite(model.curvature));
  if (needs_bandwidth && !(model.bandwidth > 0.0)) {
    throw Error("filtered background shapes need a positive bandwidth");
  }
  std::vector<double> out(grid.size(), n);
  const double half = 0.5 * model.bandwidth;
  const double curvature = std::isfinite(model.curvature) ? model.curvature : 1.0 / (half * half);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double w = grid[i];
    switch (model.shape) {
      case BackgroundShape::flat: break;
      case BackgroundShape::lorentzian_filtered: out[i] = n * half * half / (half * half + w * w); break;
      case BackgroundShape::parabolic: out[i] = n * std::max(0.0, 1.0 - curvature * w * w); break;
    }
  }
  return out;
}

std::vector<double> squeezer_background(std::span<const double> grid, double n, double bandwidth,
                                        BackgroundShape shape) {
  BackgroundModel m;
  m.shape = shape;
  m.bandwidth = bandwidth;
  return squeezer_background(grid, n, m);
}

ReflectionEvaluator::ReflectionEvaluator(const SqueezedBath& bath, const AtomParams& atom, BackgroundModel background)
    : n_(bath.n()), eta_c_(atom.eta_c()), m_(bath.m_complex()), background_(background) {
  const BlochModel model = BlochModel::regularized(bath, atom);
  perturbed_ = model.perturbed();
  fluorescence_ = model.decomposition();
  const PauliOperator sp = PauliOperator::sigma_plus();
  const PauliOperator sm = PauliOperator::sigma_minus();
  pp_late_right_ = model.correlator(sp, sp, Ordering::later_right);
  pp_late_left_ = model.correlator(sp, sp, Ordering::later_left);
  mp_late_right_ = model.correlator(sm, sp, Ordering::later_right);
  // Validate the background parameters once.
  const double probe = 0.0;
  (void)squeezer_background(std::span<const double>(&probe, 1), n_ < 0.0 ? 0.0 : n_, background_);
}

double ReflectionEvaluator::background(double omega) const {
  if (background_.shape == BackgroundShape::flat) return n_ / (2.0 * kPi * eta_c_);
  const double n = squeezer_background(std::span<const double>(&omega, 1), n_, background_)[0];
  return n / (2.0 * kPi * eta_c_);
}

double ReflectionEvaluator::atomic(double omega) const {
  const Complex interference = m_ * (pp_late_right_.one_sided_transform(omega) -
                                     pp_late_left_.one_sided_transform(omega)) -
                               n_ * mp_late_right_.one_sided_transform(omega);
  return (n_ + eta_c_) * fluorescence_(omega) + interference.real() / kPi;
}

double ReflectionEvaluator::operator()(double omega) const { return background(omega) + atomic(omega); }

SpectrumTrace reflection_spectrum(const SqueezedBath& bath, const AtomParams& atom, std::span<const double> grid,
                                  const BackgroundModel& background) {
  const ReflectionEvaluator eval(bath, atom, background);
  std::vector<double> values(grid.size());
  std::transform(grid.begin(), grid.end(), values.begin(), [&](double w) { return eval(w); });
  TraceMetadata meta = model_metadata(bath, atom);
  meta.normalization = "reflection";
  meta.extra["background"] = to_string(background.shape);
  if (eval.perturbed()) meta.extra["degenerate_perturbed"] = "1";
  return SpectrumTrace(std::vector<double>(grid.begin(), grid.end()), std::move(values), std::move(meta));
}

WeakDriveTerms weak_drive_terms(const SqueezedBath& bath, const AtomParams& atom) {
  const double n = bath.n();
  const double m = bath.m();
  const double loss = (1.0 - atom.eta_c()) * n;
  WeakDriveTerms t;
  t.background = n / (2.0 * kPi * atom.eta_c());
  t.narrow_amplitude = (m - loss) / (2.0 * n + 1.0) / (2.0 * kPi);
  t.broad_amplitude = (m + loss) / (2.0 * n + 1.0) / (2.0 * kPi);
  t.g_x = n + m + 0.5;
  t.g_y = n - m + 0.5;
  return t;
}

SpectrumTrace weak_drive_reflection(const SqueezedBath& bath, const AtomParams& atom, std::span<const double> grid) {
  const WeakDriveTerms t = weak_drive_terms(bath, atom);
  std::vector<double> values(grid.size());
  std::transform(grid.begin(), grid.end(), values.begin(), [&](double w) { return t(w); });
  TraceMetadata meta = model_metadata(bath, atom.with_rabi(0.0));
  meta.normalization = "reflection-no-drive";
  return SpectrumTrace(std::vector<double>(grid.begin(), grid.end()), std::move(values), std::move(meta));
}

double StrongDriveTerms::operator()(double omega) const {
  auto lorentz = [](double amp, double hw, double x) { return amp * hw * hw / (x * x + hw * hw); };
  return background + lorentz(center_amplitude, center_hwhm, omega) +
         lorentz(sideband_amplitude, sideband_hwhm, omega - splitting) +
         lorentz(sideband_amplitude, sideband_hwhm, omega + splitting);
}

StrongDriveTerms strong_drive_terms(const SqueezedBath& bath, const AtomParams& atom) {
  const RateSet r = rates_from_params(bath, atom);
  const double eta = atom.eta_c();
  StrongDriveTerms t;
  t.background = bath.n() / (2.0 * kPi * eta);
  t.center_hwhm = r.g_plus;
  t.sideband_hwhm = 0.5 * (r.g_n + r.g_minus);
  // Areas eta_c/4 (center) and eta_c/8 (each sideband), the Mollow split of the
  // saturated emission gamma_ext <sigma_+ sigma_-> = eta_c gamma / 2.
  t.center_amplitude = eta / (4.0 * kPi * t.center_hwhm);
  t.sideband_amplitude = eta / (8.0 * kPi * t.sideband_hwhm);
  t.splitting = atom.rabi();
  return t;
}

SpectrumTrace strong_drive_reflection(const SqueezedBath& bath, const AtomParams& atom,
                                      std::span<const double> grid) {
  const StrongDriveTerms t = strong_drive_terms(bath, atom);
  std::vector<double> values(grid.size());
  std::transform(grid.begin(), grid.end(), values.begin(), [&](double w) { return t(w); });
  TraceMetadata meta = model_metadata(bath, atom);
  meta.normalization = "reflection-strong-drive";
  return SpectrumTrace(std::vector<double>(grid.begin(), grid.end()), std::move(values), std::move(meta));
}

std::vector<double> default_grid(const SqueezedBath& bath, const AtomParams& atom) {
  const RateSet r = rates_from_params(bath, atom);
  const double span = 8.0 * std::max(atom.rabi(), r.g_x);
  return uniform_grid(-span, span, 2001);
}

}  // namespace sqfluor
