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

#include "sqfluor/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fftw3.h>
#include <Eigen/Dense>

#include "sqfluor/error.hpp"

namespace sqfluor {
namespace {

constexpr Complex kI{0.0, 1.0};
using Vec4 = Eigen::Vector4cd;

Eigen::Matrix2cd dissipator(const Eigen::Matrix2cd& c, const Eigen::Matrix2cd& rho) {
  const Eigen::Matrix2cd cd = c.adjoint();
  const Eigen::Matrix2cd cdc = cd * c;
  return c * rho * cd - 0.5 * (cdc * rho + rho * cdc);
}

// Two-photon term: c rho c - (c c rho + rho c c) / 2.
Eigen::Matrix2cd squeeze_term(const Eigen::Matrix2cd& c, const Eigen::Matrix2cd& rho) {
  const Eigen::Matrix2cd cc = c * c;
  return c * rho * c - 0.5 * (cc * rho + rho * cc);
}

Vec4 vec(const Eigen::Matrix2cd& m) { return Eigen::Map<const Vec4>(m.data()); }

Eigen::Matrix2cd unvec(const Vec4& v) {
  Eigen::Matrix2cd m;
  Eigen::Map<Vec4>(m.data()) = v;
  return m;
}

// RK4 applied to a linear system is this polynomial in hL.
Eigen::Matrix4cd rk4_propagator(const Eigen::Matrix4cd& l, double h) {
  const Eigen::Matrix4cd a = h * l;
  const Eigen::Matrix4cd a2 = a * a;
  return Eigen::Matrix4cd::Identity() + a + a2 / 2.0 + a2 * a / 6.0 + a2 * a2 / 24.0;
}

double max_offset(std::span<const double> grid) {
  double w = 0.0;
  for (double x : grid) w = std::max(w, std::abs(x));
  return w;
}

double min_spacing(std::span<const double> grid) {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < grid.size(); ++i) d = std::min(d, grid[i] - grid[i - 1]);
  return d;
}

struct Samples {
  double h = 0.0;
  std::vector<Complex> g;  // fluctuating part of the correlator
  Complex slope0{};        // g'(0)
  Complex tail_rate{};     // exponent fitted to the last tenth
  bool has_tail = false;
};

// e^{i w T} [ -g(T)/(mu + i w) - (h^2/12) (mu + i w) g(T) ]: closed-form tail beyond
// the horizon plus the matching end-point correction.
Complex tail_terms(const Samples& s, double omega) {
  if (!s.has_tail) return 0.0;
  const double t_end = s.h * static_cast<double>(s.g.size() - 1);
  const Complex g_end = s.g.back();
  const Complex rate = s.tail_rate + kI * omega;
  const Complex phase = std::exp(kI * omega * t_end);
  return phase * (-g_end / rate - s.h * s.h / 12.0 * rate * g_end);
}

Complex start_correction(const Samples& s, double omega) {
  return s.h * s.h / 12.0 * (s.slope0 + kI * omega * s.g.front());
}

std::vector<double> trapezoid_spectrum(const Samples& s, std::span<const double> grid) {
  const std::size_t nw = grid.size();
  const std::size_t n = s.g.size();
  std::vector<double> zr(nw), zi(nw), wr(nw), wi(nw), ar(nw, 0.0), ai(nw, 0.0);
  for (std::size_t j = 0; j < nw; ++j) {
    zr[j] = 1.0;
    zi[j] = 0.0;
    wr[j] = std::cos(grid[j] * s.h);
    wi[j] = std::sin(grid[j] * s.h);
  }
  constexpr std::size_t kResync = 512;
  for (std::size_t k = 0; k < n; ++k) {
    const double weight = (k == 0 || k + 1 == n) ? 0.5 : 1.0;
    const double cr = weight * s.g[k].real();
    const double ci = weight * s.g[k].imag();
    for (std::size_t j = 0; j < nw; ++j) {
      ar[j] += cr * zr[j] - ci * zi[j];
      ai[j] += cr * zi[j] + ci * zr[j];
      const double nr = zr[j] * wr[j] - zi[j] * wi[j];
      zi[j] = zr[j] * wi[j] + zi[j] * wr[j];
      zr[j] = nr;
    }
    if ((k + 1) % kResync == 0) {
      const double t = s.h * static_cast<double>(k + 1);
      for (std::size_t j = 0; j < nw; ++j) {
        zr[j] = std::cos(grid[j] * t);
        zi[j] = std::sin(grid[j] * t);
      }
    }
  }
  std::vector<double> out(nw);
  for (std::size_t j = 0; j < nw; ++j) {
    const Complex integral = s.h * Complex(ar[j], ai[j]) + start_correction(s, grid[j]) + tail_terms(s, grid[j]);
    out[j] = integral.real() / kPi;
  }
  return out;
}

std::vector<double> fft_spectrum(const Samples& s, std::span<const double> grid, double slowest_decay) {
  const std::size_t n = s.g.size();
  // Lattice spacing fine enough for cubic interpolation of the narrowest line.
  const double spacing = std::min(grid.size() > 1 ? min_spacing(grid) / 4.0 : 1.0, slowest_decay / 8.0);
  std::size_t len = 1;
  while (static_cast<double>(len) < std::max(static_cast<double>(n), 2.0 * kPi / (s.h * spacing))) len <<= 1;
  if (len > (std::size_t{1} << 25)) throw NumericalError("fft quadrature would need more than 2^25 points");

  fftw_complex* buf = fftw_alloc_complex(len);
  fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(len), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  for (std::size_t k = 0; k < len; ++k) {
    const double weight = k < n ? ((k == 0 || k + 1 == n) ? 0.5 : 1.0) : 0.0;
    buf[k][0] = k < n ? weight * s.g[k].real() : 0.0;
    buf[k][1] = k < n ? weight * s.g[k].imag() : 0.0;
  }
  fftw_execute(plan);
  const double dw = 2.0 * kPi / (static_cast<double>(len) * s.h);
  auto lattice = [&](long j) {
    const std::size_t idx = static_cast<std::size_t>((j % static_cast<long>(len) + static_cast<long>(len)) %
                                                     static_cast<long>(len));
    return Complex(buf[idx][0], buf[idx][1]);
  };
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i] / dw;
    const long j0 = static_cast<long>(std::floor(x));
    const double u = x - static_cast<double>(j0);
    // Four-point Lagrange weights at offsets -1, 0, 1, 2.
    const double w[4] = {-u * (u - 1.0) * (u - 2.0) / 6.0, (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
                         -(u + 1.0) * u * (u - 2.0) / 2.0, (u + 1.0) * u * (u - 1.0) / 6.0};
    Complex sum{};
    for (int k = 0; k < 4; ++k) sum += w[k] * lattice(j0 - 1 + k);
    const Complex integral = s.h * sum + start_correction(s, grid[i]) + tail_terms(s, grid[i]);
    out[i] = integral.real() / kPi;
  }
  fftw_destroy_plan(plan);
  fftw_free(buf);
  return out;
}

}  // namespace

namespace pauli {
Eigen::Matrix2cd x() { return (Eigen::Matrix2cd() << 0.0, 1.0, 1.0, 0.0).finished(); }
Eigen::Matrix2cd y() { return (Eigen::Matrix2cd() << 0.0, -kI, kI, 0.0).finished(); }
Eigen::Matrix2cd z() { return (Eigen::Matrix2cd() << 1.0, 0.0, 0.0, -1.0).finished(); }
Eigen::Matrix2cd plus() { return (Eigen::Matrix2cd() << 0.0, 1.0, 0.0, 0.0).finished(); }
Eigen::Matrix2cd minus() { return (Eigen::Matrix2cd() << 0.0, 0.0, 1.0, 0.0).finished(); }
Eigen::Matrix2cd matrix(const PauliOperator& op) { return op.cx * x() + op.cy * y() + op.cz * z(); }
}  // namespace pauli

DensityMatrix2 DensityMatrix2::ground() { return DensityMatrix2((Eigen::Matrix2cd() << 0.0, 0.0, 0.0, 1.0).finished()); }
DensityMatrix2 DensityMatrix2::excited() { return DensityMatrix2((Eigen::Matrix2cd() << 1.0, 0.0, 0.0, 0.0).finished()); }

DensityMatrix2 DensityMatrix2::from_bloch(const BlochState& s) {
  return DensityMatrix2(0.5 * (Eigen::Matrix2cd::Identity() + s.sx * pauli::x() + s.sy * pauli::y() +
                               s.sz * pauli::z()));
}

BlochState DensityMatrix2::bloch() const {
  return {expectation(pauli::x()).real(), expectation(pauli::y()).real(), expectation(pauli::z()).real()};
}

double DensityMatrix2::hermiticity_error() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }
double DensityMatrix2::trace_error() const { return std::abs(m_.trace() - 1.0); }

double DensityMatrix2::min_eigenvalue() const {
  const double a = m_(0, 0).real();
  const double d = m_(1, 1).real();
  const Complex b = 0.5 * (m_(0, 1) + std::conj(m_(1, 0)));
  return 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + std::norm(b));
}

void DensityMatrix2::check(double tol) const {
  const double herm = hermiticity_error();
  const double tr = trace_error();
  const double eig = min_eigenvalue();
  if (herm > tol || tr > tol || eig < -1e-10 || !m_.allFinite()) {
    std::ostringstream msg;
    msg << "density matrix drifted: hermiticity " << herm << ", trace " << tr << ", min eigenvalue " << eig;
    throw InvariantViolation(msg.str());
  }
}

std::string to_string(Quadrature q) { return q == Quadrature::fft ? "fft" : "trapezoid-with-tail"; }

Quadrature quadrature_from_string(const std::string& s) {
  if (s == "fft") return Quadrature::fft;
  if (s == "trapezoid-with-tail" || s == "trapezoid") return Quadrature::trapezoid_with_tail;
  throw Error("unknown quadrature '" + s + "'");
}

Eigen::Matrix2cd lindblad_rhs(const Eigen::Matrix2cd& rho, const SqueezedBath& bath, const AtomParams& atom) {
  const Eigen::Matrix2cd sp = pauli::plus();
  const Eigen::Matrix2cd sm = pauli::minus();
  const Eigen::Matrix2cd h = 0.5 * atom.rabi() * pauli::x();
  const double n = bath.n();
  const Complex m = bath.m_complex();
  return -kI * (h * rho - rho * h) + (n + 1.0) * dissipator(sm, rho) + n * dissipator(sp, rho) -
         m * squeeze_term(sp, rho) - std::conj(m) * squeeze_term(sm, rho);
}

DensityMatrix2 lindblad_rhs(const DensityMatrix2& rho, const SqueezedBath& bath, const AtomParams& atom) {
  return DensityMatrix2(lindblad_rhs(rho.matrix(), bath, atom));
}

Eigen::Matrix4cd liouvillian(const SqueezedBath& bath, const AtomParams& atom) {
  Eigen::Matrix4cd l;
  for (int k = 0; k < 4; ++k) {
    Vec4 e = Vec4::Zero();
    e[k] = 1.0;
    l.col(k) = vec(lindblad_rhs(unvec(e), bath, atom));
  }
  return l;
}

std::vector<double> decay_rates(const SqueezedBath& bath, const AtomParams& atom) {
  Eigen::ComplexEigenSolver<Eigen::Matrix4cd> solver(liouvillian(bath, atom), false);
  std::vector<Complex> mu(solver.eigenvalues().begin(), solver.eigenvalues().end());
  std::sort(mu.begin(), mu.end(), [](Complex a, Complex b) { return std::abs(a) < std::abs(b); });
  std::vector<double> rates;
  for (std::size_t i = 1; i < mu.size(); ++i) rates.push_back(-mu[i].real());
  std::sort(rates.begin(), rates.end());
  return rates;
}

OracleConfig OracleConfig::automatic(const SqueezedBath& bath, const AtomParams& atom, Quadrature q) {
  const RateSet r = rates_from_params(bath, atom);
  OracleConfig c;
  c.step = std::min(0.01 / std::max({r.g_n, r.g_x, atom.rabi()}), 0.005);
  c.horizon = 20.0 / decay_rates(bath, atom).front();
  c.quadrature = q;
  return c;
}

OracleConfig OracleConfig::resolved(const SqueezedBath& bath, const AtomParams& atom) const {
  const OracleConfig def = automatic(bath, atom, quadrature);
  OracleConfig c = *this;
  if (c.step == 0.0) c.step = def.step;
  if (c.horizon == 0.0) c.horizon = def.horizon;
  constexpr double kSlack = 1e-12;
  if (!(c.step > 0.0) || c.step > def.step * (1.0 + kSlack)) {
    std::ostringstream msg;
    msg << "oracle step " << c.step << " must lie in (0, " << def.step << "]";
    throw Error(msg.str());
  }
  if (!(c.horizon >= def.horizon * (1.0 - kSlack))) {
    std::ostringstream msg;
    msg << "oracle horizon " << c.horizon << " is shorter than 20 / slowest decay = " << def.horizon;
    throw Error(msg.str());
  }
  return c;
}

DensityMatrix2 evolve(const DensityMatrix2& rho0, const SqueezedBath& bath, const AtomParams& atom, double t,
                      const OracleConfig& config) {
  if (t < 0.0) throw Error("evolution time must be non-negative");
  rho0.check(1e-8);
  const RateSet r = rates_from_params(bath, atom);
  const double max_step = config.step > 0.0 ? config.step
                                            : std::min(0.01 / std::max({r.g_n, r.g_x, atom.rabi()}), 0.005);
  const auto steps = static_cast<std::size_t>(std::ceil(t / max_step - 1e-9));
  if (steps == 0) return rho0;
  const double h = t / static_cast<double>(steps);
  Eigen::Matrix2cd rho = rho0.matrix();
  auto f = [&](const Eigen::Matrix2cd& x) { return lindblad_rhs(x, bath, atom); };
  for (std::size_t i = 0; i < steps; ++i) {
    const Eigen::Matrix2cd k1 = f(rho);
    const Eigen::Matrix2cd k2 = f(rho + 0.5 * h * k1);
    const Eigen::Matrix2cd k3 = f(rho + 0.5 * h * k2);
    const Eigen::Matrix2cd k4 = f(rho + h * k3);
    rho += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    DensityMatrix2(rho).check(1e-8);
  }
  return DensityMatrix2(rho);
}

DensityMatrix2 oracle_steady_state(const SqueezedBath& bath, const AtomParams& atom) {
  Eigen::Matrix<Complex, 5, 4> a;
  a.topRows<4>() = liouvillian(bath, atom);
  a.row(4) << 1.0, 0.0, 0.0, 1.0;
  Eigen::Matrix<Complex, 5, 1> b = Eigen::Matrix<Complex, 5, 1>::Zero();
  b[4] = 1.0;
  const Vec4 x = a.colPivHouseholderQr().solve(b);
  const Eigen::Matrix2cd rho = unvec(x);
  DensityMatrix2 out(0.5 * (rho + rho.adjoint()));
  out.check(1e-10);
  return out;
}

TimeSeries regression_correlator(const PauliOperator& a, const PauliOperator& b, Ordering ordering,
                                 const SqueezedBath& bath, const AtomParams& atom, const OracleConfig& config) {
  const OracleConfig c = config.resolved(bath, atom);
  const Eigen::Matrix2cd rho = oracle_steady_state(bath, atom).matrix();
  const Eigen::Matrix2cd ma = pauli::matrix(a);
  const Eigen::Matrix2cd mb = pauli::matrix(b);
  const bool left = ordering == Ordering::later_left;
  const Eigen::Matrix2cd lambda0 = left ? Eigen::Matrix2cd(mb * rho) : Eigen::Matrix2cd(rho * ma);
  const Eigen::Matrix2cd probe = left ? ma : mb;

  // Tr(X Lambda) as a row vector acting on vec(Lambda).
  Eigen::RowVector4cd tr;
  for (int row = 0; row < 2; ++row) {
    for (int col = 0; col < 2; ++col) tr[row * 2 + col] = probe(row, col);
  }
  const auto steps = static_cast<std::size_t>(std::ceil(c.horizon / c.step - 1e-9));
  const double h = c.horizon / static_cast<double>(steps);
  const Eigen::Matrix4cd p = rk4_propagator(liouvillian(bath, atom), h);

  TimeSeries out;
  out.dt = h;
  out.values.reserve(steps + 1);
  Vec4 v = vec(lambda0);
  out.values.push_back(tr * v);
  for (std::size_t i = 0; i < steps; ++i) {
    v = p * v;
    out.values.push_back(tr * v);
  }
  return out;
}

TimeSeries regression_correlator(PauliAxis a, PauliAxis b, Ordering ordering, const SqueezedBath& bath,
                                 const AtomParams& atom, const OracleConfig& config) {
  return regression_correlator(PauliOperator::axis(a), PauliOperator::axis(b), ordering, bath, atom, config);
}

SpectrumTrace spectrum_numeric(const SqueezedBath& bath, const AtomParams& atom, std::span<const double> grid,
                               const OracleConfig& config) {
  const OracleConfig c = config.resolved(bath, atom);
  const PauliOperator sp = PauliOperator::sigma_plus();
  const PauliOperator sm = PauliOperator::sigma_minus();
  const TimeSeries corr = regression_correlator(sp, sm, Ordering::later_left, bath, atom, c);

  const DensityMatrix2 rho = oracle_steady_state(bath, atom);
  const Complex coherent = rho.expectation(pauli::plus()) * rho.expectation(pauli::minus());

  // Quadrature stride: keep (max frequency) x (quadrature step) at or below 1/4.
  const double top = max_offset(grid) + atom.rabi() + 1.0;
  const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(0.25 / (top * corr.dt))));

  Samples s;
  s.h = corr.dt * static_cast<double>(stride);
  for (std::size_t k = 0; k < corr.size(); k += stride) s.g.push_back(corr.values[k] - coherent);
  if (s.g.size() < 20) throw NumericalError("correlation window holds too few samples");

  // g'(0) straight from the generator.
  const Eigen::Matrix2cd lambda0 = pauli::minus() * rho.matrix();
  s.slope0 = (pauli::plus() * lindblad_rhs(lambda0, bath, atom)).trace();

  const double g0 = std::abs(s.g.front());
  const double g_end = std::abs(s.g.back());
  if (g_end > 1e-6 * g0) {
    std::ostringstream msg;
    msg << "correlator decayed only to " << g_end / g0 << " of its initial value at the horizon";
    throw NumericalError(msg.str());
  }
  const std::size_t tenth = std::max<std::size_t>(1, s.g.size() / 10);
  const Complex early = s.g[s.g.size() - 1 - tenth];
  if (g_end > 0.0 && std::abs(early) > 0.0) {
    const Complex rate = std::log(s.g.back() / early) / (s.h * static_cast<double>(tenth));
    if (std::isfinite(rate.real()) && std::isfinite(rate.imag()) && rate.real() < 0.0) {
      s.tail_rate = rate;
      s.has_tail = true;
    }
  }

  std::vector<double> values = c.quadrature == Quadrature::fft
                                   ? fft_spectrum(s, grid, decay_rates(bath, atom).front())
                                   : trapezoid_spectrum(s, grid);
  TraceMetadata meta = model_metadata(bath, atom);
  meta.normalization = "fluorescence";
  meta.extra["source"] = "oracle";
  meta.extra["quadrature"] = to_string(c.quadrature);
  return SpectrumTrace(std::vector<double>(grid.begin(), grid.end()), std::move(values), std::move(meta));
}

double relative_linf(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("relative_linf needs equal lengths");
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

}  // namespace sqfluor
