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

#include "sqfluor/levenberg_marquardt.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "sqfluor/error.hpp"

namespace sqfluor {
namespace {

bool evaluate(const ResidualFunction& f, const Eigen::VectorXd& x, Eigen::VectorXd& out) {
  try {
    out = f(x);
  } catch (const Error&) {
    return false;
  }
  return out.allFinite();
}

double step_size(double x, double rel) { return rel * std::max(std::abs(x), 1.0); }

}  // namespace

Eigen::MatrixXd forward_jacobian(const ResidualFunction& f, const Eigen::VectorXd& x, const Eigen::VectorXd& fx,
                                 double rel_step) {
  Eigen::MatrixXd j(fx.size(), x.size());
  Eigen::VectorXd probe = x;
  Eigen::VectorXd fp;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step_size(x[i], rel_step);
    probe[i] = x[i] + h;
    if (evaluate(f, probe, fp)) {
      j.col(i) = (fp - fx) / h;
    } else {
      probe[i] = x[i] - h;
      if (!evaluate(f, probe, fp)) throw NumericalError("residual is infeasible on both sides of a parameter");
      j.col(i) = (fx - fp) / h;
    }
    probe[i] = x[i];
  }
  return j;
}

Eigen::MatrixXd central_jacobian(const ResidualFunction& f, const Eigen::VectorXd& x, double rel_step) {
  Eigen::VectorXd f0;
  if (!evaluate(f, x, f0)) throw NumericalError("residual is infeasible at the expansion point");
  Eigen::MatrixXd j(f0.size(), x.size());
  Eigen::VectorXd probe = x;
  Eigen::VectorXd fp;
  Eigen::VectorXd fm;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step_size(x[i], rel_step);
    probe[i] = x[i] + h;
    const bool up = evaluate(f, probe, fp);
    probe[i] = x[i] - h;
    const bool down = evaluate(f, probe, fm);
    probe[i] = x[i];
    if (up && down) {
      j.col(i) = (fp - fm) / (2.0 * h);
    } else if (up) {
      j.col(i) = (fp - f0) / h;
    } else if (down) {
      j.col(i) = (f0 - fm) / h;
    } else {
      throw NumericalError("residual is infeasible on both sides of a parameter");
    }
  }
  return j;
}

LmResult levenberg_marquardt(const ResidualFunction& f, const Eigen::VectorXd& x0, const LmOptions& options) {
  LmResult out;
  out.x = x0;
  if (!evaluate(f, x0, out.residual)) throw NumericalError("residual is infeasible at the starting point");
  out.cost = out.residual.squaredNorm();
  double damping = options.initial_damping;
  Eigen::VectorXd trial_r;

  for (out.iterations = 0; out.iterations < options.max_iterations;) {
    if (out.cost == 0.0) {
      out.converged = true;
      break;
    }
    ++out.iterations;
    const Eigen::MatrixXd j = forward_jacobian(f, out.x, out.residual, options.jacobian_step);
    const Eigen::MatrixXd a = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * out.residual;
    Eigen::VectorXd diag = a.diagonal();
    const double floor = std::max(diag.maxCoeff(), 1.0) * 1e-12;
    diag = diag.cwiseMax(floor);

    bool accepted = false;
    double new_cost = out.cost;
    while (!accepted) {
      Eigen::MatrixXd damped = a;
      damped.diagonal() += damping * diag;
      const Eigen::VectorXd delta = damped.ldlt().solve(-g);
      const Eigen::VectorXd trial = out.x + delta;
      if (delta.allFinite() && evaluate(f, trial, trial_r)) {
        new_cost = trial_r.squaredNorm();
        if (new_cost < out.cost) {
          accepted = true;
          out.x = trial;
          std::swap(out.residual, trial_r);
          damping = std::max(damping / 10.0, 1e-12);
          break;
        }
      }
      damping *= 10.0;
      if (damping > 1e16) break;
    }
    if (!accepted) {
      // No descent direction left at machine precision.
      out.converged = true;
      break;
    }
    const double decrease = (out.cost - new_cost) / out.cost;
    out.cost = new_cost;
    if (decrease < options.relative_tolerance) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace sqfluor
