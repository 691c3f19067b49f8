#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "endogroup/adjacency.hpp"
#include "endogroup/core.hpp"
#include "endogroup/selection_basis.hpp"

namespace endogroup {

// Design for one outcome regression. `controls` are partialled out: a
// constant, group dummies and/or selection basis columns. Rows are matched
// agents; `pool_index` maps them back to the formation sample.
struct Regressors {
  Matrix X;
  Vector y;
  std::vector<std::string> labels;
  BasisMatrix controls;  // dummy_group: -1 constant, g >= 1 group dummy, 0 selection term
  IntVector pool_index;

  int n() const { return static_cast<int>(y.size()); }
};

// Columns (Wy if requested, Wx for each x column, x), in that order.
Regressors make_regressors(const AdjacencyMatrix& W, const Vector& y, const Matrix& x, bool include_wy,
                           const BasisMatrix& controls, bool add_constant);

// Group indicator columns for groups 1..G (the constant is then omitted).
BasisMatrix group_dummy_basis(const IntVector& group, int G);

// Concatenates two control blocks column-wise.
BasisMatrix concat_controls(const BasisMatrix& a, const BasisMatrix& b);

struct PeerEstimate {
  Vector gamma_hat;
  Vector se;
  Matrix vcov;
  std::vector<std::string> labels;
  Vector sieve_coeffs;       // coefficients on the control columns
  Vector fitted_selection;   // selection-term part of the control fit
  Vector group_effect;       // dummy (and constant) part of the control fit
  Vector residuals;
  int K_used = 0;
  double rank_condition_number = 0.0;
};

inline constexpr double kRankConditionLimit = 1e12;

// gamma = (X'MX)^-1 X'My with M the residual maker of the controls, all via
// pivoted QR. Throws RankConditionError when cond(X'MX/n) exceeds the limit.
// Standard errors are heteroskedasticity-robust, without first-stage
// correction.
PeerEstimate sieve_ols(const Regressors& reg);

struct SEOptions {
  bool include_theta_correction = false;
  // Pool-level influence of the formation estimate (N x P); theta-hat minus
  // theta is approximately its column mean.
  Matrix theta_influence;
  Vector theta_hat;
  // Rebuilds the regressors at a perturbed formation parameter.
  std::function<Regressors(const Vector& theta)> rebuild;
  int pool_size = 0;
};

struct StdErrors {
  Vector se;
  Matrix vcov;
};

StdErrors standard_errors(const Regressors& reg, const PeerEstimate& est, const SEOptions& options = {});

struct RankDiagnostic {
  double condition_number = 0.0;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  Vector null_direction;  // unit eigenvector of the smallest eigenvalue, in X coordinates
  bool ill_conditioned = false;
  std::string report;
};

inline constexpr double kIllConditionedFlag = 1e10;

// Spectrum of X'MX/n. Never throws on rank deficiency.
RankDiagnostic rank_diagnostic(const Regressors& reg);

}  // namespace endogroup
