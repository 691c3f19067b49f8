#pragma once

#include <functional>
#include <string>
#include <vector>

#include "endogroup/core.hpp"

namespace endogroup {

// min f(x) s.t. c(x) = 0. `evaluate` fills f, its gradient, c and the
// constraint Jacobian (n_cons x n_vars) in one pass. It may throw
// NumericError; the line search treats that point as infeasible.
struct EqualityConstrainedProblem {
  int n_vars = 0;
  int n_cons = 0;
  std::function<void(const Vector& x, double& f, Vector& grad, Vector& c, Matrix& jac)> evaluate;
};

struct AugLagOptions {
  double tol_constraint = 1e-5;  // max |c|
  double tol_grad = 1e-6;        // max |grad f + J' lambda|
  int max_outer = 40;
  int max_inner = 400;           // BFGS iterations per subproblem
  int max_total_inner = 4000;
  int max_evaluations = 20000;
  double mu_init = 100.0;
  double mu_growth = 10.0;
  double mu_max = 1e12;
  // Penalty grows when |c| did not shrink by this factor.
  double required_decrease = 0.25;
};

struct MeritRecord {
  int outer;
  double merit;
};

struct AugLagResult {
  Vector x;
  Vector lambda;
  double f = 0.0;
  Vector c;
  Vector grad_lagrangian;
  int outer_iterations = 0;
  int inner_iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
  std::vector<MeritRecord> merit_trace;  // accepted inner steps
};

// Augmented Lagrangian outer loop with BFGS inner solves and a strong-Wolfe
// line search. Multipliers follow the first-order update
// lambda <- lambda + mu c.
AugLagResult minimize_augmented_lagrangian(const EqualityConstrainedProblem& problem, const Vector& x0,
                                           const AugLagOptions& options = {});

struct BfgsResult {
  Vector x;
  double f = 0.0;
  Vector grad;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> trace;
};

// Unconstrained BFGS; stops when max |grad| <= tol.
BfgsResult minimize_bfgs(const std::function<double(const Vector&, Vector&)>& fg, const Vector& x0, double tol,
                         int max_iter, Matrix* inverse_hessian = nullptr);

}  // namespace endogroup
