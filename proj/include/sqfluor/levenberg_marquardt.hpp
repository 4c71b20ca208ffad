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
// Damped Gauss-Newton with Marquardt diagonal scaling and finite-difference Jacobians.

#include <functional>

#include <Eigen/Core>

namespace sqfluor {

struct LmOptions {
  int max_iterations = 200;
  double relative_tolerance = 1e-10;  // stop once an accepted step lowers the cost by less than this fraction
  double jacobian_step = 1e-6;        // relative forward-difference step
  double initial_damping = 1e-3;
};

struct LmResult {
  Eigen::VectorXd x;
  Eigen::VectorXd residual;
  double cost = 0.0;  // sum of squared residuals
  int iterations = 0;
  bool converged = false;
};

/// May throw sqfluor::Error for infeasible points; those are treated as rejected steps.
using ResidualFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Forward differences, stepping h_i = rel_step * max(|x_i|, 1); falls back to a
/// backward step when the forward point is infeasible.
Eigen::MatrixXd forward_jacobian(const ResidualFunction& f, const Eigen::VectorXd& x, const Eigen::VectorXd& fx,
                                 double rel_step);
Eigen::MatrixXd central_jacobian(const ResidualFunction& f, const Eigen::VectorXd& x, double rel_step);

LmResult levenberg_marquardt(const ResidualFunction& f, const Eigen::VectorXd& x0, const LmOptions& options = {});

}  // namespace sqfluor
