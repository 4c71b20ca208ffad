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

#include "sqfluor/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "sqfluor/error.hpp"

namespace sqfluor {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Prepared {
  std::vector<double> omega;  // units of gamma, masked points dropped
  Eigen::VectorXd y;
  Eigen::VectorXd weight;  // 1 / sigma, or 1
  double span = 1.0;
};

Prepared prepare(const SpectrumTrace& trace) {
  const std::vector<double> omega = trace.offsets_in_gamma();
  Prepared p;
  for (double w : omega) p.span = std::max(p.span, std::abs(w));
  std::vector<double> y;
  std::vector<double> wt;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace.excluded(i)) continue;
    p.omega.push_back(omega[i]);
    y.push_back(trace.values()[i]);
    wt.push_back(trace.has_sigmas() ? 1.0 / trace.sigmas()[i] : 1.0);
  }
  p.y = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  p.weight = Eigen::Map<Eigen::VectorXd>(wt.data(), static_cast<Eigen::Index>(wt.size()));
  return p;
}

// Columns [model..., 1, x, x^2] for one trace.
using Columns = Eigen::MatrixXd;
using ColumnBuilder = std::function<std::vector<Columns>(const Eigen::VectorXd& physical)>;

struct Problem {
  std::vector<Prepared> traces;
  int degree = 2;
  int model_columns = 1;
  ColumnBuilder build;  // model columns only
  bool weighted = false;
  std::optional<double> fixed_scale;  // model columns enter with this known weight

  std::size_t points() const {
    std::size_t n = 0;
    for (const auto& t : traces) n += t.omega.size();
    return n;
  }

  int free_model_columns() const { return fixed_scale ? 0 : model_columns; }
  int linear_per_trace() const { return free_model_columns() + degree + 1; }

  Columns full_columns(std::size_t i, const Columns& model) const {
    const Prepared& t = traces[i];
    const int m = free_model_columns();
    Columns c(static_cast<Eigen::Index>(t.omega.size()), m + degree + 1);
    if (m > 0) c.leftCols(m) = model;
    for (Eigen::Index k = 0; k < c.rows(); ++k) {
      const double x = t.omega[static_cast<std::size_t>(k)] / t.span;
      double p = 1.0;
      for (int d = 0; d <= degree; ++d, p *= x) c(k, m + d) = p;
    }
    return c;
  }

  // Data minus the fixed-weight part of the model.
  Eigen::VectorXd target(std::size_t i, const Columns& model) const {
    if (!fixed_scale) return traces[i].y;
    return traces[i].y - *fixed_scale * model.rowwise().sum();
  }
};

struct Projection {
  Eigen::VectorXd residual;
  std::vector<Eigen::VectorXd> coefficients;
};

Projection project(const Problem& prob, const Eigen::VectorXd& physical) {
  const std::vector<Columns> model = prob.build(physical);
  Projection out;
  out.residual.resize(static_cast<Eigen::Index>(prob.points()));
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < prob.traces.size(); ++i) {
    const Prepared& t = prob.traces[i];
    const Columns a = t.weight.asDiagonal() * prob.full_columns(i, model[i]);
    const Eigen::VectorXd b = t.weight.cwiseProduct(prob.target(i, model[i]));
    Eigen::VectorXd coef = a.cols() > 0 ? Eigen::VectorXd(a.colPivHouseholderQr().solve(b)) : Eigen::VectorXd();
    const Eigen::VectorXd r = b - a * coef;
    out.residual.segment(at, r.size()) = r;
    at += r.size();
    out.coefficients.push_back(std::move(coef));
  }
  return out;
}

// Weighted residual of the complete model: physical nonlinear parameters followed by
// every trace's linear coefficients.
Eigen::VectorXd full_residual(const Problem& prob, int nonlinear, const Eigen::VectorXd& all) {
  const std::vector<Columns> model = prob.build(all.head(nonlinear));
  Eigen::VectorXd out(static_cast<Eigen::Index>(prob.points()));
  Eigen::Index at = 0;
  const int k = prob.linear_per_trace();
  for (std::size_t i = 0; i < prob.traces.size(); ++i) {
    const Prepared& t = prob.traces[i];
    const Eigen::VectorXd coef = all.segment(nonlinear + static_cast<Eigen::Index>(i) * k, k);
    const Eigen::VectorXd r = t.weight.cwiseProduct(prob.target(i, model[i]) - prob.full_columns(i, model[i]) * coef);
    out.segment(at, r.size()) = r;
    at += r.size();
  }
  return out;
}

struct Transform {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> to_physical;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> to_internal;
};

// Fills values, covariance, residual statistics and the scan fallback for flat directions.
// Parameters listed in `pinned` sit on a bound where the linearization says little;
// they get the scan treatment too, with the linear terms re-projected at each probe.
void finish(FitResult& res, const Problem& prob, int nonlinear, const Eigen::VectorXd& physical,
            const std::vector<Eigen::Index>& pinned = {}) {
  const Projection proj = project(prob, physical);
  Eigen::VectorXd all(nonlinear + static_cast<Eigen::Index>(prob.traces.size()) * prob.linear_per_trace());
  all.head(nonlinear) = physical;
  for (std::size_t i = 0; i < prob.traces.size(); ++i) {
    all.segment(nonlinear + static_cast<Eigen::Index>(i) * prob.linear_per_trace(), prob.linear_per_trace()) =
        proj.coefficients[i];
  }
  res.values = all;
  res.points = prob.points();
  const double cost = proj.residual.squaredNorm();
  res.residual_norm = std::sqrt(cost);
  const double dof = static_cast<double>(res.points) - static_cast<double>(all.size());
  res.chi2_per_dof = dof > 0.0 ? cost / dof : kInf;
  const double s2 = prob.weighted ? 1.0 : res.chi2_per_dof;

  const ResidualFunction f = [&](const Eigen::VectorXd& p) { return full_residual(prob, nonlinear, p); };
  const Eigen::MatrixXd j = central_jacobian(f, all, 1e-6);
  const Eigen::VectorXd norms = j.colwise().norm();
  const double top = norms.maxCoeff();
  std::vector<Eigen::Index> flat;
  std::vector<Eigen::Index> live;
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    const bool scan = norms[i] <= 1e-10 * top || std::find(pinned.begin(), pinned.end(), i) != pinned.end();
    (scan ? flat : live).push_back(i);
  }

  res.covariance = Eigen::MatrixXd::Zero(all.size(), all.size());
  if (!live.empty()) {
    Eigen::MatrixXd jl(j.rows(), static_cast<Eigen::Index>(live.size()));
    for (std::size_t k = 0; k < live.size(); ++k) jl.col(static_cast<Eigen::Index>(k)) = j.col(live[k]);
    const Eigen::MatrixXd inv =
        (jl.transpose() * jl).completeOrthogonalDecomposition().pseudoInverse() * s2;
    for (std::size_t a = 0; a < live.size(); ++a) {
      for (std::size_t b = 0; b < live.size(); ++b) {
        res.covariance(live[a], live[b]) = inv(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      }
    }
  }
  // Distance at which the cost rises by s2, searched in both directions.
  for (Eigen::Index i : flat) {
    const bool reproject = i < nonlinear;
    double best = kInf;
    for (double dir : {1.0, -1.0}) {
      auto rise = [&](double d) {
        Eigen::VectorXd p = all;
        p[i] += dir * d;
        try {
          const double c = reproject ? project(prob, p.head(nonlinear)).residual.squaredNorm() : f(p).squaredNorm();
          return std::isfinite(c) ? c - cost : kInf;
        } catch (const Error&) {
          return kInf;
        }
      };
      double hi = 1e-6 * std::max(std::abs(all[i]), 1.0);
      while (hi < 1e6 && rise(hi) < s2) hi *= 2.0;
      if (hi >= 1e6) continue;
      double lo = 0.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (rise(mid) < s2 ? lo : hi) = mid;
      }
      best = std::min(best, hi);
    }
    res.covariance(i, i) = best * best;
    res.warnings.push_back(res.names[static_cast<std::size_t>(i)] +
                           ": uncertainty from a cost scan (no usable curvature at the optimum)");
  }
}

void add_derived(FitResult& res, const std::string& name, double value, const Eigen::VectorXd& gradient) {
  res.derived[name] = value;
  const Eigen::Index n = gradient.size();
  const Eigen::MatrixXd cov = res.covariance.topLeftCorner(n, n);
  double var = gradient.dot(cov * gradient);
  if (!std::isfinite(var)) var = kInf;
  res.derived_sigma[name] = std::sqrt(std::max(var, 0.0));
}

void add_bath_derived(FitResult& res) {
  const double n = res.values[0];
  const double m = res.values[1];
  const double gy = n - m + 0.5;
  add_derived(res, "M-N", m - n, Eigen::Vector2d(-1.0, 1.0));
  const double k = 10.0 / std::log(10.0) / gy;
  add_derived(res, "squeezing_db", -10.0 * std::log10(gy / 0.5), Eigen::Vector2d(-k, k));
  add_derived(res, "gamma_y", gy, Eigen::Vector2d(1.0, -1.0));
  add_derived(res, "gamma_x", n + m + 0.5, Eigen::Vector2d(1.0, 1.0));
  const double mmax = std::sqrt(n * (n + 1.0));
  if (mmax > 0.0) {
    const double dmax = (2.0 * n + 1.0) / (2.0 * mmax);
    add_derived(res, "r", m / mmax, Eigen::Vector2d(-m * dmax / (mmax * mmax), 1.0 / mmax));
  }
}

std::vector<Eigen::Index> check_bath_bounds(FitResult& res, const Eigen::VectorXd& q, Coordinates coords) {
  const double n = q[0];
  const double m = q[1];
  const double mmax = std::sqrt(n * (n + 1.0));
  std::vector<Eigen::Index> pinned;
  if (n < 1e-6) {
    res.warnings.push_back("N pinned at its lower bound 0");
    pinned = {0, 1};
  } else if (coords == Coordinates::n_r && m > (1.0 - 1e-6) * mmax) {
    res.warnings.push_back("M pinned at the pure-state bound sqrt(N(N+1))");
    pinned = {1};
  } else if (std::abs(m) < 1e-2 * mmax || std::abs(m) < 1e-8) {
    res.warnings.push_back("M pinned at its lower bound 0");
    pinned = {1};
  }
  return pinned;
}

// Internal (u, v) <-> physical (N, M) for the first two slots; remaining slots pass through.
Eigen::VectorXd bath_to_physical(const Eigen::VectorXd& x, Coordinates coords) {
  Eigen::VectorXd q = x;
  const double n = x[0] * x[0];
  q[0] = n;
  if (coords == Coordinates::n_r) {
    const double s = std::sin(x[1]);
    q[1] = s * s * std::sqrt(n * (n + 1.0));
  } else {
    const double mmax = std::sqrt(n * (n + 1.0));
    if (std::abs(x[1]) > mmax + kPhysicalityTolerance) throw PhysicalityError("|M| above sqrt(N(N+1))");
  }
  return q;
}

Eigen::VectorXd bath_to_internal(const Eigen::VectorXd& q, Coordinates coords) {
  Eigen::VectorXd x = q;
  x[0] = std::sqrt(std::max(q[0], 0.0));
  if (coords == Coordinates::n_r) {
    const double mmax = std::sqrt(q[0] * (q[0] + 1.0));
    const double r = mmax > 0.0 ? std::clamp(q[1] / mmax, 0.0, 1.0) : 0.0;
    x[1] = std::asin(std::sqrt(r));
  }
  return x;
}

struct Candidate {
  LmResult lm;
  Eigen::VectorXd physical;
};

// Runs LM from each start and keeps the lowest cost.
Candidate multistart(const Problem& prob, const std::vector<Eigen::VectorXd>& starts,
                     const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& to_physical,
                     const LmOptions& lm) {
  const ResidualFunction f = [&](const Eigen::VectorXd& x) { return project(prob, to_physical(x)).residual; };
  std::optional<Candidate> best;
  std::string last_error;
  for (const auto& s : starts) {
    try {
      LmResult r = levenberg_marquardt(f, s, lm);
      if (!best || r.cost < best->lm.cost) best = Candidate{r, to_physical(r.x)};
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  if (!best) throw NumericalError("every fit start failed: " + last_error);
  return *best;
}

double baseline_of(const Prepared& t) {
  // Median of the outer fifth of the band.
  std::vector<double> outer;
  for (std::size_t i = 0; i < t.omega.size(); ++i) {
    if (std::abs(t.omega[i]) > 0.8 * t.span) outer.push_back(t.y[static_cast<Eigen::Index>(i)]);
  }
  if (outer.empty()) return 0.0;
  std::nth_element(outer.begin(), outer.begin() + static_cast<long>(outer.size() / 2), outer.end());
  return outer[outer.size() / 2];
}

// Half width at half maximum of the feature centred at `center`, baseline removed.
std::optional<double> measured_hwhm(const Prepared& t, double center, double base) {
  if (t.omega.empty()) return std::nullopt;
  std::size_t ic = 0;
  for (std::size_t i = 0; i < t.omega.size(); ++i) {
    if (std::abs(t.omega[i] - center) < std::abs(t.omega[ic] - center)) ic = i;
  }
  const double peak = t.y[static_cast<Eigen::Index>(ic)] - base;
  if (!(peak > 0.0)) return std::nullopt;
  for (std::size_t i = ic; i < t.omega.size(); ++i) {
    if (t.y[static_cast<Eigen::Index>(i)] - base < 0.5 * peak) {
      const double w = t.omega[i] - t.omega[ic];
      return w > 0.0 ? std::optional<double>(w) : std::nullopt;
    }
  }
  return std::nullopt;
}

// Strongest feature with |omega| > min_offset on the positive side.
std::optional<double> sideband_position(const Prepared& t, double min_offset) {
  const double base = baseline_of(t);
  std::optional<double> best;
  double best_val = 0.0;
  for (std::size_t i = 0; i < t.omega.size(); ++i) {
    if (t.omega[i] <= min_offset) continue;
    const double v = t.y[static_cast<Eigen::Index>(i)] - base;
    if (v > best_val) {
      best_val = v;
      best = t.omega[i];
    }
  }
  return best;
}

std::optional<double> metadata_rabi(const SpectrumTrace& t) {
  const auto& m = t.metadata();
  if (!m.rabi_hz || !m.gamma_hz || !(*m.gamma_hz > 0.0)) return std::nullopt;
  return *m.rabi_hz / *m.gamma_hz;
}

void name_linear(FitResult& res, std::size_t traces, const std::vector<std::string>& model_names, int degree,
                 bool suffix, bool model_free = true) {
  static const char* poly[] = {"offset", "c1", "c2", "c3", "c4"};
  for (std::size_t i = 0; i < traces; ++i) {
    const std::string tag = suffix ? "[" + std::to_string(i) + "]" : "";
    if (model_free) {
      for (const auto& n : model_names) res.names.push_back(n + tag);
    }
    for (int d = 0; d <= degree; ++d) res.names.push_back(std::string(poly[d]) + tag);
  }
}

void validate_degree(int degree) {
  if (degree < -1 || degree > 4) throw Error("background degree must lie in [-1, 4]");
}

}  // namespace

std::string to_string(FitKind k) {
  switch (k) {
    case FitKind::no_drive: return "no-drive";
    case FitKind::three_lorentzian: return "three-lorentzian";
    case FitKind::full_analytic: return "full-analytic";
  }
  return "no-drive";
}

FitKind fit_kind_from_string(const std::string& s) {
  if (s == "no-drive") return FitKind::no_drive;
  if (s == "three-lorentzian") return FitKind::three_lorentzian;
  if (s == "full-analytic") return FitKind::full_analytic;
  throw Error("unknown fit model '" + s + "'");
}

bool FitResult::has(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end() || derived.count(name) > 0;
}

double FitResult::value(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it != names.end()) return values[it - names.begin()];
  const auto d = derived.find(name);
  if (d != derived.end()) return d->second;
  throw Error("fit result has no parameter '" + name + "'");
}

double FitResult::sigma(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it != names.end()) {
    const auto i = it - names.begin();
    return std::sqrt(std::max(covariance(i, i), 0.0));
  }
  const auto d = derived_sigma.find(name);
  if (d != derived_sigma.end()) return d->second;
  throw Error("fit result has no parameter '" + name + "'");
}

FitResult fit_no_drive(const SpectrumTrace& trace, const AtomParams& fixed, const FitOptions& options) {
  validate_degree(options.background_degree);
  Problem prob;
  prob.traces.push_back(prepare(trace));
  prob.degree = options.background_degree;
  prob.weighted = trace.has_sigmas();
  prob.fixed_scale = options.fixed_scale;
  prob.build = [&](const Eigen::VectorXd& q) {
    const WeakDriveTerms t = weak_drive_terms(SqueezedBath::unchecked(q[0], q[1], 0.0), fixed);
    if (!(t.g_y > 0.0) || !(t.g_x > 0.0)) throw PhysicalityError("Lorentzian widths must stay positive");
    const Prepared& p = prob.traces[0];
    Columns c(static_cast<Eigen::Index>(p.omega.size()), 1);
    for (std::size_t i = 0; i < p.omega.size(); ++i) c(static_cast<Eigen::Index>(i), 0) = t(p.omega[i]);
    return std::vector<Columns>{c};
  };
  const Coordinates coords = options.coordinates;
  auto to_physical = [coords](const Eigen::VectorXd& x) { return bath_to_physical(x, coords); };

  std::vector<Eigen::VectorXd> starts;
  if (options.initial_n && options.initial_m) {
    starts.push_back(bath_to_internal(Eigen::Vector2d(*options.initial_n, *options.initial_m), coords));
  } else {
    const Prepared& p = prob.traces[0];
    const double gy = measured_hwhm(p, 0.0, baseline_of(p)).value_or(0.4);
    for (double n : {0.05, 0.3, 1.0, 3.0}) {
      const double mmax = std::sqrt(n * (n + 1.0));
      for (double m : {std::clamp(n + 0.5 - gy, 0.05 * mmax, 0.95 * mmax), 0.5 * mmax}) {
        starts.push_back(bath_to_internal(Eigen::Vector2d(n, m), coords));
      }
    }
  }
  const Candidate best = multistart(prob, starts, to_physical, options.lm);

  FitResult res;
  res.kind = FitKind::no_drive;
  res.names = {"N", "M"};
  name_linear(res, 1, {"scale"}, prob.degree, false, !prob.fixed_scale);
  res.iterations = best.lm.iterations;
  res.converged = best.lm.converged;
  finish(res, prob, 2, best.physical, check_bath_bounds(res, best.physical, coords));
  add_bath_derived(res);
  if (!res.converged) res.warnings.push_back("optimizer stopped at the iteration limit");
  return res;
}

FitResult fit_three_lorentzian(const SpectrumTrace& trace, const FitOptions& options) {
  validate_degree(options.background_degree);
  Problem prob;
  prob.traces.push_back(prepare(trace));
  prob.degree = options.background_degree;
  prob.model_columns = 3;
  prob.weighted = trace.has_sigmas();
  prob.build = [&](const Eigen::VectorXd& q) {
    const Prepared& p = prob.traces[0];
    Columns c(static_cast<Eigen::Index>(p.omega.size()), 3);
    for (int k = 0; k < 3; ++k) {
      const double h = q[3 + k];
      if (!(h > 0.0) || !std::isfinite(h)) throw NumericalError("width left its domain");
      for (std::size_t i = 0; i < p.omega.size(); ++i) {
        const double d = p.omega[i] - q[k];
        c(static_cast<Eigen::Index>(i), k) = h * h / (d * d + h * h);
      }
    }
    return std::vector<Columns>{c};
  };
  auto to_physical = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd q = x;
    for (int k = 3; k < 6; ++k) q[k] = std::exp(x[k]);
    return q;
  };

  const Prepared& p = prob.traces[0];
  double split = options.initial_rabi.value_or(0.0);
  if (!(split > 0.0)) {
    split = metadata_rabi(trace).value_or(0.0);
    if (!(split > 0.0)) split = sideband_position(p, 1.5).value_or(p.span / 4.0);
  }
  const double base = baseline_of(p);
  const double h0 = std::clamp(measured_hwhm(p, 0.0, base).value_or(0.5), 0.05, split / 2.0);
  std::vector<Eigen::VectorXd> starts;
  for (double f : {1.0, 0.5, 2.0}) {
    Eigen::VectorXd x(6);
    x << 0.0, -split, split, std::log(h0 * f), std::log(1.5 * h0 * f), std::log(1.5 * h0 * f);
    starts.push_back(x);
  }
  const Candidate best = multistart(prob, starts, to_physical, options.lm);

  FitResult res;
  res.kind = FitKind::three_lorentzian;
  res.names = {"center_0", "center_-", "center_+", "hwhm_0", "hwhm_-", "hwhm_+"};
  {
    std::vector<std::string> model_names = {"amp_0", "amp_-", "amp_+"};
    name_linear(res, 1, model_names, prob.degree, false);
  }
  res.iterations = best.lm.iterations;
  res.converged = best.lm.converged;
  finish(res, prob, 6, best.physical);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(6);
  g << 0.0, -0.5, 0.5, 0.0, 0.0, 0.0;
  const double splitting = 0.5 * (res.values[2] - res.values[1]);
  add_derived(res, "splitting", splitting, g);
  g << 0.0, 0.0, 0.0, 0.0, 0.5, 0.5;
  const double side = 0.5 * (res.values[4] + res.values[5]);
  add_derived(res, "hwhm_sideband", side, g);
  if (std::max(res.values[4], res.values[5]) > splitting) {
    res.warnings.push_back("sidebands unresolved: fitted sideband half width exceeds the splitting");
  }
  if (!res.converged) res.warnings.push_back("optimizer stopped at the iteration limit");
  return res;
}

FitResult fit_full_joint(std::span<const SpectrumTrace> traces, const AtomParams& fixed,
                         std::span<const double> phase_offsets, const FitOptions& options) {
  validate_degree(options.background_degree);
  if (traces.empty()) throw Error("joint fit needs at least one trace");
  if (phase_offsets.size() != traces.size()) throw Error("joint fit needs one phase offset per trace");
  Problem prob;
  prob.degree = options.background_degree;
  prob.weighted = true;
  prob.fixed_scale = options.fixed_scale;
  for (const auto& t : traces) {
    prob.traces.push_back(prepare(t));
    prob.weighted = prob.weighted && t.has_sigmas();
  }
  if (!prob.weighted) {
    for (auto& t : prob.traces) t.weight.setOnes();
  }
  const std::vector<double> offsets(phase_offsets.begin(), phase_offsets.end());
  const BackgroundModel background = options.background;
  prob.build = [&prob, offsets, background, fixed](const Eigen::VectorXd& q) {
    std::vector<Columns> out;
    for (std::size_t i = 0; i < prob.traces.size(); ++i) {
      const ReflectionEvaluator eval(SqueezedBath::unchecked(q[0], q[1], q[3] + offsets[i]),
                                     fixed.with_rabi(q[2]), background);
      const Prepared& p = prob.traces[i];
      Columns c(static_cast<Eigen::Index>(p.omega.size()), 1);
      for (std::size_t k = 0; k < p.omega.size(); ++k) c(static_cast<Eigen::Index>(k), 0) = eval(p.omega[k]);
      out.push_back(std::move(c));
    }
    return out;
  };
  const Coordinates coords = options.coordinates;
  auto to_physical = [coords](const Eigen::VectorXd& x) {
    Eigen::VectorXd q = bath_to_physical(x, coords);
    q[2] = x[2] * x[2];
    return q;
  };
  auto to_internal = [coords](const Eigen::VectorXd& q) {
    Eigen::VectorXd x = bath_to_internal(q, coords);
    x[2] = std::sqrt(std::max(q[2], 0.0));
    return x;
  };

  double rabi = options.initial_rabi.value_or(0.0);
  if (!(rabi > 0.0)) rabi = metadata_rabi(traces[0]).value_or(0.0);
  if (!(rabi > 0.0)) rabi = sideband_position(prob.traces[0], 1.5).value_or(1.0);
  std::vector<double> phis;
  if (options.initial_phi) {
    phis.push_back(*options.initial_phi);
  } else if (traces[0].metadata().phi_rad) {
    phis.push_back(*traces[0].metadata().phi_rad - offsets[0]);
  } else {
    phis = {0.0, kPi / 4.0, kPi / 2.0, 3.0 * kPi / 4.0};
  }
  std::vector<Eigen::VectorXd> starts;
  if (options.initial_n && options.initial_m) {
    for (double phi : phis) starts.push_back(to_internal(Eigen::Vector4d(*options.initial_n, *options.initial_m, rabi, phi)));
  } else {
    for (double n : {0.2, 1.0, 3.0}) {
      for (double r : {0.5, 0.95}) {
        for (double phi : phis) {
          starts.push_back(to_internal(Eigen::Vector4d(n, r * std::sqrt(n * (n + 1.0)), rabi, phi)));
        }
      }
    }
  }
  const Candidate best = multistart(prob, starts, to_physical, options.lm);

  FitResult res;
  res.kind = FitKind::full_analytic;
  res.names = {"N", "M", "rabi", "phi0"};
  name_linear(res, traces.size(), {"scale"}, prob.degree, true, !prob.fixed_scale);
  res.iterations = best.lm.iterations;
  res.converged = best.lm.converged;
  Eigen::VectorXd q = best.physical;
  q[3] = std::remainder(q[3], kPi);
  if (q[3] < 0.0) q[3] += kPi;
  finish(res, prob, 4, q, check_bath_bounds(res, q, coords));
  add_bath_derived(res);
  bool distinct_phase = false;
  for (double o : offsets) distinct_phase = distinct_phase || std::abs(std::sin(2.0 * (o - offsets[0]))) > 1e-6;
  if (!distinct_phase) {
    res.warnings.push_back("all traces share one phase; N, M and phi may be poorly separated");
  }
  if (!res.converged) res.warnings.push_back("optimizer stopped at the iteration limit");
  return res;
}

FitResult fit_efficiency(std::span<const GainSample> sweep) {
  if (sweep.size() < 3) throw Error("efficiency fit needs at least three gain points");
  bool varied = false;
  for (const auto& s : sweep) varied = varied || s.gain_db != sweep.front().gain_db;
  if (!varied) throw Error("efficiency fit is degenerate: all gains are equal");
  const bool weighted = std::all_of(sweep.begin(), sweep.end(), [](const GainSample& s) { return s.sigma > 0.0; });
  double sdd = 0.0;
  double sdy = 0.0;
  std::vector<double> d;
  for (const auto& s : sweep) {
    const SqueezedBath ideal = bath_from_gain({s.gain_db, 1.0});
    d.push_back(ideal.m() - ideal.n());
    const double w = weighted ? 1.0 / (s.sigma * s.sigma) : 1.0;
    sdd += w * d.back() * d.back();
    sdy += w * d.back() * s.m_minus_n;
  }
  if (!(sdd > 0.0)) throw Error("efficiency fit is degenerate: no gain above 0 dB");
  const double eta = sdy / sdd;
  double cost = 0.0;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const double w = weighted ? 1.0 / (sweep[i].sigma * sweep[i].sigma) : 1.0;
    cost += w * std::pow(sweep[i].m_minus_n - eta * d[i], 2);
  }
  const double dof = static_cast<double>(sweep.size() - 1);
  FitResult res;
  res.kind = FitKind::no_drive;
  res.names = {"eta"};
  res.values = Eigen::VectorXd::Constant(1, eta);
  res.points = sweep.size();
  res.residual_norm = std::sqrt(cost);
  res.chi2_per_dof = cost / dof;
  res.covariance = Eigen::MatrixXd::Constant(1, 1, (weighted ? 1.0 : res.chi2_per_dof) / sdd);
  res.converged = true;
  if (eta <= 0.0 || eta > 1.0) res.warnings.push_back("efficiency estimate outside (0, 1]");
  return res;
}

SpectrumTrace synthesize_trace(const SynthesisSpec& spec, const NoiseSpec& noise, std::span<const double> grid) {
  if (grid.empty()) throw Error("synthesis grid is empty");
  if (noise.relative_sigma < 0.0) throw Error("noise sigma must be non-negative");
  double span = 0.0;
  for (double w : grid) span = std::max(span, std::abs(w));
  if (span == 0.0) span = 1.0;

  std::function<double(double)> model;
  TraceMetadata meta = model_metadata(spec.bath, spec.atom);
  switch (spec.kind) {
    case FitKind::no_drive: {
      const WeakDriveTerms t = weak_drive_terms(spec.bath, spec.atom);
      model = [t](double w) { return t(w); };
      meta.rabi_hz = 0.0;
      break;
    }
    case FitKind::three_lorentzian: {
      const StrongDriveTerms t = strong_drive_terms(spec.bath, spec.atom);
      model = [t](double w) { return t(w); };
      break;
    }
    case FitKind::full_analytic: {
      auto eval = std::make_shared<ReflectionEvaluator>(spec.bath, spec.atom, spec.background);
      model = [eval](double w) { return (*eval)(w); };
      if (eval->perturbed()) meta.extra["degenerate_perturbed"] = "1";
      break;
    }
  }
  meta.normalization = "synthetic-" + to_string(spec.kind);

  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> values(grid.size());
  std::vector<double> sigmas;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i] / span;
    const double clean = spec.scale * model(grid[i]) + spec.offset + spec.linear * x + spec.quadratic * x * x;
    if (noise.relative_sigma > 0.0) {
      if (clean == 0.0) throw Error("multiplicative noise needs a nonzero model value at every sample");
      values[i] = clean * (1.0 + noise.relative_sigma * normal(rng));
      sigmas.push_back(noise.relative_sigma * std::abs(clean));
    } else {
      values[i] = clean;
    }
  }
  if (noise.relative_sigma > 0.0) meta.seed = noise.seed;
  meta.extra["noise_sigma"] = [&] {
    std::ostringstream s;
    s.precision(17);
    s << noise.relative_sigma;
    return s.str();
  }();
  if (spec.atom.rabi() > 0.0 && spec.kind != FitKind::no_drive) meta.mask = mask_around_zero(grid, 3);
  return SpectrumTrace(std::vector<double>(grid.begin(), grid.end()), std::move(values), std::move(meta),
                       std::move(sigmas));
}

double SinusoidFit::amplitude() const { return std::hypot(cos_coeff, sin_coeff); }
double SinusoidFit::phase() const { return 0.5 * std::atan2(sin_coeff, cos_coeff); }
double SinusoidFit::operator()(double phi) const {
  return mean + cos_coeff * std::cos(2.0 * phi) + sin_coeff * std::sin(2.0 * phi);
}

SinusoidFit fit_sinusoid(std::span<const double> phis, std::span<const double> values) {
  if (phis.size() != values.size() || phis.size() < 3) throw Error("sinusoid fit needs at least three points");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(phis.size()), 3);
  Eigen::VectorXd b(static_cast<Eigen::Index>(phis.size()));
  for (std::size_t i = 0; i < phis.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    a(r, 0) = 1.0;
    a(r, 1) = std::cos(2.0 * phis[i]);
    a(r, 2) = std::sin(2.0 * phis[i]);
    b[r] = values[i];
  }
  const Eigen::Vector3d c = a.colPivHouseholderQr().solve(b);
  return {c[0], c[1], c[2]};
}

double r_squared(std::span<const double> observed, std::span<const double> predicted) {
  if (observed.size() != predicted.size() || observed.empty()) throw Error("r_squared needs equal, non-empty inputs");
  double mean = 0.0;
  for (double v : observed) mean += v;
  mean /= static_cast<double>(observed.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    ss_res += std::pow(observed[i] - predicted[i], 2);
    ss_tot += std::pow(observed[i] - mean, 2);
  }
  return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : -kInf);
}

}  // namespace sqfluor
