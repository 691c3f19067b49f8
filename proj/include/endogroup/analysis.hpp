#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "endogroup/gf_estimator.hpp"
#include "endogroup/peer_estimator.hpp"
#include "endogroup/selection_basis.hpp"
#include "endogroup/simulator.hpp"

namespace endogroup {

enum class Estimator { kOLS, kOLSFE, kSieve, kSieveFE };
std::string to_string(Estimator e);
Estimator parse_estimator(const std::string& s);

// Outcome regression for matched agents. `panel` holds pool-level indices
// (rows = formation sample) and is required for the sieve estimators.
Regressors build_design(const OutcomeDraw& outcome, int groups, Estimator estimator, bool include_wy,
                        const IndexPanel* panel, int basis_order = 2);

struct MCReport {
  std::string design;
  std::string estimator;
  std::vector<std::string> params;
  int reps = 0;       // successful replications
  int failures = 0;   // replications where this estimator failed
  std::vector<int> rep_ids;
  Matrix estimates;   // reps x params
  Matrix truth;       // reps x params
  Matrix std_errors;  // reps x params, empty when not computed
  std::vector<double> condition_numbers;  // rank diagnostic per attempted rep
  Vector bias, std, rmse;
  std::uint64_t seed = 0;
  std::vector<std::string> failure_messages;

  // bias = mean error, std = sample sd of errors (divisor reps - 1, zero for
  // one rep), rmse = sqrt(mean squared error). Hence
  // rmse^2 = bias^2 + std^2 (reps - 1) / reps.
  void summarize();
};

struct OutcomeDesign {
  std::string label;
  OutcomeSpec spec;
  bool include_wy = false;
  std::vector<Estimator> menu{Estimator::kOLS, Estimator::kOLSFE, Estimator::kSieve};
};

struct StudyConfig {
  SimConfig sim;
  std::vector<OutcomeDesign> designs;
  int reps = 200;
  std::uint64_t base_seed = 20240601;
  int threads = 1;
  bool estimate_theta = true;  // false: sieve indices at the true parameters
  GFOptions gf;
  int basis_order = 2;
  double max_failure_rate = 0.05;
};

struct StudyResult {
  std::vector<MCReport> gamma;  // one per (design, estimator)
  MCReport formation;           // group-formation estimates vs realised truth
  std::vector<double> formation_residual;  // max |constraint residual|, aligned with formation.rep_ids
  int reps_attempted = 0;
  int reps_failed = 0;          // simulation or formation-estimation failures
  std::vector<std::string> warnings;
};

// Tables 1/2-style designs sharing formation draws: group averages and
// networks, exogenous (gamma1 = 0) and endogenous (gamma1 = 0.5).
std::vector<OutcomeDesign> standard_designs();

// Replication r uses Rng(base_seed).split(r); results do not depend on the
// thread count or execution order. Throws NumericError when more than
// `max_failure_rate` of replications fail.
StudyResult run_monte_carlo(const StudyConfig& config);

struct Decomposition {
  double var_total = 0, var_peer = 0, var_school = 0, var_selection = 0;
  double cov_peer_school = 0, cov_peer_sel = 0, cov_school_sel = 0;
  std::vector<std::string> warnings;

  double identity_gap() const {
    return var_total - (var_peer + var_school + var_selection +
                        2 * (cov_peer_school + cov_peer_sel + cov_school_sel));
  }
};

// Predicted-outcome components: peer = W-columns times their coefficients,
// school = group-dummy part of the control fit, selection = basis part.
// Sample (n - 1) moments.
Decomposition variance_decomposition(const Regressors& reg, const PeerEstimate& est);

struct RandomAssignmentResult {
  double coefficient = 0.0;
  double se = 0.0;                           // HC0
  std::optional<double> p_value;             // empty when the regression is skipped
  std::optional<double> p_value_asymptotic;  // normal approximation to the robust t
  int permutations = 0;
  int n_used = 0;
  int dropped_singletons = 0;
  std::string note;
};

struct RandomTestOptions {
  int permutations = 999;  // 0: report the asymptotic p-value
  std::uint64_t seed = 20240601;
};

// Regresses the characteristic on (leave-one-out cell mean minus
// leave-one-out group mean) with group dummies and optional extra controls.
// The p-value compares the robust (HC0) t statistic with its distribution
// under random permutations of cell labels within groups.
RandomAssignmentResult random_assignment_test(const Vector& characteristic, const IntVector& group,
                                              const IntVector& cell, const Matrix* extra_controls = nullptr,
                                              const RandomTestOptions& options = {});

}  // namespace endogroup
