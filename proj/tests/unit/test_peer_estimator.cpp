#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "endogroup/peer_estimator.hpp"
#include "endogroup/selection_basis.hpp"
#include "endogroup/simulator.hpp"

using namespace endogroup;

namespace {

BasisMatrix controls_from(const Matrix& B) {
  BasisMatrix b;
  b.B = B;
  for (int k = 0; k < B.cols(); ++k) {
    b.column_labels.push_back("b" + std::to_string(k));
    b.dummy_group.push_back(0);
  }
  return b;
}

Regressors toy(const Matrix& X, const Vector& y, const Matrix& B) {
  Regressors r;
  r.X = X;
  r.y = y;
  for (int k = 0; k < X.cols(); ++k) r.labels.push_back("x" + std::to_string(k));
  r.controls = controls_from(B);
  return r;
}

Matrix random_matrix(int n, int k, Rng& rng) {
  Matrix m(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) m(i, j) = rng.normal();
  return m;
}

Vector random_vector(int n, Rng& rng) { return random_matrix(n, 1, rng).col(0); }

Vector least_squares(const Matrix& A, const Vector& b) { return A.colPivHouseholderQr().solve(b); }

Matrix hc0(const Matrix& Xt, const Vector& e) {
  const Matrix bread = (Xt.transpose() * Xt).inverse();
  const Matrix meat = Xt.transpose() * e.cwiseAbs2().asDiagonal() * Xt;
  return bread * meat * bread;
}

}  // namespace

TEST(PeerEstimator, EmptyControlsGiveOls) {
  Rng rng(1);
  const Matrix X = random_matrix(100, 3, rng);
  const Vector y = X * Vector::LinSpaced(3, 1, 3) + random_vector(100, rng);
  const auto est = sieve_ols(toy(X, y, Matrix(100, 0)));
  EXPECT_LT((est.gamma_hat - least_squares(X, y)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(est.K_used, 0);
}

TEST(PeerEstimator, ConstantControlGivesOlsWithIntercept) {
  Rng rng(2);
  const Matrix X = random_matrix(100, 2, rng);
  const Vector y = Vector::Constant(100, 4.0) + X.col(0) - 2.0 * X.col(1) + random_vector(100, rng);
  Matrix XI(100, 3);
  XI << Vector::Ones(100), X;
  const Vector ref = least_squares(XI, y);
  const auto est = sieve_ols(toy(X, y, Matrix::Ones(100, 1)));
  EXPECT_LT((est.gamma_hat - ref.tail(2)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(est.sieve_coeffs[0], ref[0], 1e-11);
}

TEST(PeerEstimator, MatchesPseudoInverseOracle) {
  Rng rng(3);
  const Matrix X = random_matrix(8, 2, rng);
  const Matrix B = random_matrix(8, 2, rng);
  const Vector y = random_vector(8, rng);
  const Matrix Bp = B.completeOrthogonalDecomposition().pseudoInverse();
  const Matrix M = Matrix::Identity(8, 8) - B * Bp;
  const Vector ref = (X.transpose() * M * X).inverse() * (X.transpose() * M * y);
  const auto est = sieve_ols(toy(X, y, B));
  EXPECT_LT((est.gamma_hat - ref).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((M * M - M).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((M * B).cwiseAbs().maxCoeff(), 1e-10);
  // Residuals are the projection of y - X gamma.
  EXPECT_LT((est.residuals - M * (y - X * ref)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(PeerEstimatorProperty, ResidualMakerIsIdempotentAndAnnihilatesBasis) {
  Rng rng(14);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 10 + static_cast<int>(rng.uniform() * 30);
    const int K = 1 + static_cast<int>(rng.uniform() * 5);
    const Matrix B = random_matrix(n, K, rng);
    const Matrix X = random_matrix(n, 2, rng);
    const Vector y = random_vector(n, rng);
    const Matrix M = Matrix::Identity(n, n) - B * B.completeOrthogonalDecomposition().pseudoInverse();
    EXPECT_LT((M * M - M).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((M * B).cwiseAbs().maxCoeff(), 1e-10);
    const auto est = sieve_ols(toy(X, y, B));
    // The estimator's residuals are M applied to y - X gamma.
    EXPECT_LT((est.residuals - M * (y - X * est.gamma_hat)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(PeerEstimatorProperty, ResidualsAreOrthogonalToDesign) {
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix X = random_matrix(200, 3, rng);
    const Matrix B = random_matrix(200, 6, rng);
    const Vector y = random_vector(200, rng) + X.col(1) + B.col(2).cwiseAbs2();
    const auto est = sieve_ols(toy(X, y, B));
    EXPECT_LT((B.transpose() * est.residuals).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((X.transpose() * est.residuals).cwiseAbs().maxCoeff(), 1e-9);
    const Vector fit = X * est.gamma_hat + est.fitted_selection + est.group_effect + est.residuals;
    EXPECT_LT((fit - y).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(PeerEstimatorProperty, NoiselessRecovery) {
  Rng rng(5);
  const Matrix X = random_matrix(300, 3, rng);
  const Matrix B = random_matrix(300, 5, rng);
  const Vector gamma = (Vector(3) << 0.4, -1.2, 2.0).finished();
  const Vector y = X * gamma + B * Vector::LinSpaced(5, -1, 1);
  const auto est = sieve_ols(toy(X, y, B));
  EXPECT_LT((est.gamma_hat - gamma).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(PeerEstimatorProperty, FrischWaughLovell) {
  Rng rng(6);
  const Matrix X = random_matrix(150, 2, rng);
  const Matrix B = random_matrix(150, 4, rng);
  const Vector y = random_vector(150, rng) + X.col(0);
  Matrix XB(150, 6);
  XB << X, B;
  const Vector full = least_squares(XB, y);
  const auto est = sieve_ols(toy(X, y, B));
  EXPECT_LT((est.gamma_hat - full.head(2)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((est.sieve_coeffs - full.tail(4)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(PeerEstimator, RobustStandardErrorsMatchTextbookFormula) {
  Rng rng(7);
  const Matrix X = random_matrix(120, 2, rng);
  Vector y = X.col(0) + random_vector(120, rng);
  for (int i = 0; i < 120; ++i) y[i] += std::abs(X(i, 1)) * rng.normal();
  const auto est = sieve_ols(toy(X, y, Matrix(120, 0)));
  const Matrix V = hc0(X, y - X * est.gamma_hat);
  for (int k = 0; k < 2; ++k) EXPECT_NEAR(est.se[k], std::sqrt(V(k, k)), 1e-10);
  EXPECT_LT((est.vcov - V).cwiseAbs().maxCoeff(), 1e-10);
  // With controls, the formula applies to the partialled-out design.
  const Matrix B = random_matrix(120, 3, rng);
  const auto e2 = sieve_ols(toy(X, y, B));
  const Matrix M = Matrix::Identity(120, 120) - B * (B.transpose() * B).inverse() * B.transpose();
  const Matrix V2 = hc0(M * X, e2.residuals);
  EXPECT_LT((e2.vcov - V2).cwiseAbs().maxCoeff(), 1e-10);
  const auto se = standard_errors(toy(X, y, B), e2);
  EXPECT_LT((se.vcov - V2).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(PeerEstimatorProperty, ScaleEquivariance) {
  Rng rng(8);
  const Matrix X = random_matrix(200, 3, rng);
  const Matrix B = random_matrix(200, 4, rng);
  const Vector y = random_vector(200, rng) + X.col(2);
  const auto a = sieve_ols(toy(X, y, B));
  const auto b = sieve_ols(toy(X, 3.5 * y, B));
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(b.gamma_hat[k], 3.5 * a.gamma_hat[k], 1e-12 * std::max(1.0, std::abs(b.gamma_hat[k])));
    EXPECT_NEAR(b.se[k], 3.5 * a.se[k], 1e-12);
  }
  // Rescaling control columns leaves gamma unchanged.
  const auto c = sieve_ols(toy(X, y, B * 1e4));
  EXPECT_LT((c.gamma_hat - a.gamma_hat).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(PeerEstimator, VcovIsSymmetricPositiveSemidefinite) {
  Rng rng(9);
  const auto est = sieve_ols(toy(random_matrix(80, 3, rng), random_vector(80, rng), random_matrix(80, 2, rng)));
  EXPECT_LT((est.vcov - est.vcov.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  Eigen::SelfAdjointEigenSolver<Matrix> es(est.vcov);
  EXPECT_GE(es.eigenvalues().minCoeff(), 0.0);
}

TEST(PeerEstimator, DuplicatedColumnIsDiagnosedAndRejected) {
  Rng rng(10);
  Matrix X = random_matrix(100, 3, rng);
  X.col(2) = X.col(0);
  const auto reg = toy(X, random_vector(100, rng), Matrix::Ones(100, 1));
  const auto d = rank_diagnostic(reg);
  EXPECT_TRUE(d.ill_conditioned);
  EXPECT_LT(std::abs(d.min_eigenvalue), 1e-12);
  EXPECT_NEAR(std::abs(d.null_direction[0]), std::sqrt(0.5), 1e-6);
  EXPECT_NEAR(d.null_direction[0], -d.null_direction[2], 1e-6);
  EXPECT_FALSE(d.report.empty());
  try {
    sieve_ols(reg);
    FAIL() << "expected a rank condition failure";
  } catch (const RankConditionError& e) {
    EXPECT_GT(e.condition_number(), kRankConditionLimit);
  }
}

TEST(PeerEstimator, ThetaCorrectionVanishesWithoutFirstStageDependence) {
  Rng rng(11);
  const Matrix X = random_matrix(60, 2, rng);
  auto reg = toy(X, random_vector(60, rng), random_matrix(60, 2, rng));
  const auto est = sieve_ols(reg);
  EXPECT_THROW(standard_errors(reg, est, SEOptions{true, Matrix::Zero(60, 2), Vector::Zero(2),
                                                   [&](const Vector&) { return reg; }, 60}),
               ConfigError);
  for (int i = 0; i < 60; ++i) reg.pool_index.push_back(i);
  SEOptions opt;
  opt.include_theta_correction = true;
  opt.theta_hat = Vector::Zero(2);
  opt.theta_influence = random_matrix(60, 2, rng);
  opt.pool_size = 60;
  opt.rebuild = [&](const Vector&) { return reg; };
  const auto se = standard_errors(reg, est, opt);
  EXPECT_LT((se.vcov - est.vcov).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PeerEstimator, MakeRegressorsColumnOrder) {
  const auto W = build_group_average({1, 1, 2, 2, 2}, false);
  const Vector y = (Vector(5) << 1, 2, 3, 4, 5).finished();
  const Matrix x = (Matrix(5, 1) << 10, 20, 30, 40, 50).finished();
  const auto r = make_regressors(W, y, x, true, BasisMatrix{}, true);
  EXPECT_EQ(r.labels, (std::vector<std::string>{"Wy", "Wx", "x"}));
  EXPECT_EQ(r.X(0, 0), 2.0);
  EXPECT_EQ(r.X(2, 1), 45.0);
  EXPECT_EQ(r.X(4, 2), 50.0);
  ASSERT_EQ(r.controls.K(), 1);
  EXPECT_EQ(r.controls.dummy_group[0], -1);
  const auto d = group_dummy_basis({1, 1, 2, 2, 2}, 2);
  EXPECT_EQ(d.K(), 2);
  EXPECT_EQ(d.B(3, 1), 1.0);
  EXPECT_EQ(concat_controls(r.controls, d).K(), 3);
}

TEST(PeerEstimator, IncludeSelfAveragesWithDummiesAreNotIdentified) {
  SimConfig c;
  c.gamma = {0.5, 1.0, 1.0};
  c.adjacency_mode = AdjacencyMode::kGroupAvgInclude;
  const auto m = simulate_market(c, Rng(12));
  const auto& o = m.outcome;
  const auto reg = make_regressors(o.W, o.y, o.x, true, group_dummy_basis(o.group, 5), false);
  const auto d = rank_diagnostic(reg);
  EXPECT_GT(d.condition_number, kIllConditionedFlag);
  EXPECT_TRUE(d.ill_conditioned);
  EXPECT_THROW(sieve_ols(reg), RankConditionError);
}

TEST(PeerEstimator, ExcludeSelfWithSelectionBasisIsWellConditioned) {
  SimConfig c;
  c.gamma = {0.5, 1.0, 1.0};
  const auto m = simulate_market(c, Rng(13));
  const auto& f = m.formation;
  const auto& o = m.outcome;
  const auto panel = select_rows(
      compute_indices(to_panel(f.covariates), f.matching.assignment, true_params(c, f.matching.cutoffs)),
      o.matched);
  const auto basis = build_basis(panel, 2, true, true);
  const auto reg = make_regressors(o.W, o.y, o.x, true, basis, false);
  const auto d = rank_diagnostic(reg);
  EXPECT_LT(d.condition_number, 1e8);
  const auto est = sieve_ols(reg);
  EXPECT_NEAR(est.rank_condition_number, d.condition_number, 1e-6 * d.condition_number);
  EXPECT_NEAR(est.fitted_selection.mean(), 0.0, 1e-10);
}
