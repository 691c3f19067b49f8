#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "endogroup/optimizer.hpp"

using namespace endogroup;

TEST(Optimizer, BfgsSolvesRosenbrock) {
  auto fg = [](const Vector& x, Vector& g) {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    g.resize(2);
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  const auto r = minimize_bfgs(fg, Vector::Constant(2, -1.2), 1e-8, 500);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-6);
  EXPECT_NEAR(r.x[1], 1.0, 1e-6);
  for (std::size_t k = 1; k < r.trace.size(); ++k) EXPECT_LE(r.trace[k], r.trace[k - 1]);
}

TEST(Optimizer, AugmentedLagrangianMatchesKktSolution) {
  // min 1/2 x'Qx - b'x  s.t.  Ax = c, solved in closed form via the KKT system.
  Matrix Q(3, 3);
  Q << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  const Vector b = (Vector(3) << 1, -2, 0.5).finished();
  Matrix A(2, 3);
  A << 1, 1, 1, 1, -1, 2;
  const Vector c = (Vector(2) << 1, 0.3).finished();
  Matrix K = Matrix::Zero(5, 5);
  K.topLeftCorner(3, 3) = Q;
  K.topRightCorner(3, 2) = A.transpose();
  K.bottomLeftCorner(2, 3) = A;
  Vector rhs(5);
  rhs << b, c;
  const Vector kkt = K.fullPivLu().solve(rhs);

  EqualityConstrainedProblem prob;
  prob.n_vars = 3;
  prob.n_cons = 2;
  prob.evaluate = [&](const Vector& x, double& f, Vector& g, Vector& cv, Matrix& J) {
    f = 0.5 * x.dot(Q * x) - b.dot(x);
    g = Q * x - b;
    cv = A * x - c;
    J = A;
  };
  AugLagOptions opt;
  opt.tol_constraint = 1e-9;
  opt.tol_grad = 1e-9;
  const auto r = minimize_augmented_lagrangian(prob, Vector::Zero(3), opt);
  EXPECT_TRUE(r.converged) << r.message;
  EXPECT_LT((r.x - kkt.head(3)).cwiseAbs().maxCoeff(), 1e-7);
  // Sign convention: grad f + J' lambda = 0.
  EXPECT_LT((r.lambda - kkt.tail(2)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(r.c.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Optimizer, NonlinearConstraintOnCircle) {
  // min x + y  s.t.  x^2 + y^2 = 2  ->  (-1, -1).
  EqualityConstrainedProblem prob;
  prob.n_vars = 2;
  prob.n_cons = 1;
  prob.evaluate = [](const Vector& x, double& f, Vector& g, Vector& c, Matrix& J) {
    f = x[0] + x[1];
    g = Vector::Ones(2);
    c = Vector::Constant(1, x.squaredNorm() - 2.0);
    J = 2.0 * x.transpose();
  };
  const auto r = minimize_augmented_lagrangian(prob, (Vector(2) << 0.5, -0.2).finished());
  EXPECT_TRUE(r.converged) << r.message;
  EXPECT_NEAR(r.x[0], -1.0, 1e-5);
  EXPECT_NEAR(r.x[1], -1.0, 1e-5);
}

TEST(Optimizer, ReportsNonConvergenceWithinBudget) {
  EqualityConstrainedProblem prob;
  prob.n_vars = 2;
  prob.n_cons = 1;
  prob.evaluate = [](const Vector& x, double& f, Vector& g, Vector& c, Matrix& J) {
    f = x[0] + x[1];
    g = Vector::Ones(2);
    c = Vector::Constant(1, x.squaredNorm() - 2.0);
    J = 2.0 * x.transpose();
  };
  AugLagOptions opt;
  opt.max_total_inner = 2;
  const auto r = minimize_augmented_lagrangian(prob, (Vector(2) << 3.0, 2.0).finished(), opt);
  EXPECT_FALSE(r.converged);
  EXPECT_LE(r.inner_iterations, 2);
  EXPECT_FALSE(r.message.empty());
}
