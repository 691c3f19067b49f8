#pragma once

#include <optional>
#include <string>
#include <vector>

#include "endogroup/core.hpp"
#include "endogroup/model.hpp"
#include "endogroup/optimizer.hpp"
#include "endogroup/rng.hpp"

namespace endogroup {

// Observed group-formation data: covariates, chosen alternative (0 = outside)
// and capacities. Cutoffs are estimated for groups flagged in `binding`.
struct GFDataset {
  CovariatePanel z;
  IntVector choice;
  IntVector capacities;
  std::vector<bool> binding;

  int n() const { return z.n; }
  int groups() const { return z.groups; }
  void validate() const;
};

// Qualification shocks eta_ig = common_sd * e_i + idiosyncratic_sd * e_ig.
// The default is the equicorrelated law of the simulation design
// (variance 2, correlation 1/2); common_sd = 0 gives iid marginals.
struct EtaDistribution {
  double common_sd = 1.0;
  double idiosyncratic_sd = 1.0;
};

// Frozen simulation draws, laid out agent-major: eta(i, r, g).
class DrawSet {
 public:
  DrawSet() = default;
  DrawSet(int n, int R, int G) : n_(n), R_(R), G_(G), data_(static_cast<std::size_t>(n) * R * G, 0.0) {}

  static DrawSet Generate(int n, int R, int G, const EtaDistribution& dist, Rng& rng);

  int n() const { return n_; }
  int draws() const { return R_; }
  int groups() const { return G_; }
  double& operator()(int i, int r, int g) { return data_[index(i, r, g)]; }
  double operator()(int i, int r, int g) const { return data_[index(i, r, g)]; }
  const double* agent(int i) const { return data_.data() + index(i, 0, 0); }

 private:
  std::size_t index(int i, int r, int g) const {
    return (static_cast<std::size_t>(i) * R_ + r) * G_ + g;
  }
  int n_ = 0, R_ = 0, G_ = 0;
  std::vector<double> data_;
};

// Smoothed accept-reject choice probabilities, n x (G+1) with column 0 the
// outside option. The qualification indicator 1{v >= p} is replaced by a
// logistic kernel with bandwidth kappa; non-binding groups admit everyone.
Matrix smoothed_choice_probs(const GFParams& params, const CovariatePanel& z, const DrawSet& draws, double kappa);

inline constexpr double kProbabilityFloor = 1e-300;

// Sum over agents of log sigma_{observed choice}.
double simulated_loglik(const GFParams& params, const GFDataset& data, const DrawSet& draws, double kappa);

enum class GradientMethod { kAnalytic, kCentralDifference };

// Value and derivatives of the simulated likelihood and of the demand shares
// for the packed parameter vector.
struct GFEvaluation {
  double loglik = 0.0;
  Vector grad;          // d loglik / d theta
  Vector demand;        // length G, mean of sigma_g over agents
  Matrix demand_jac;    // G x P
  Matrix scores;        // n x P, per-agent d log sigma / d theta (optional)
  Matrix agent_probs;   // n x G, per-agent sigma_g (optional)
};

GFEvaluation evaluate_gf(const ParamLayout& layout, const Vector& theta, const GFDataset& data,
                         const DrawSet& draws, double kappa, GradientMethod method = GradientMethod::kAnalytic,
                         bool per_agent = false);

struct GFOptions {
  int draws = 300;
  double kappa = 0.05;
  double tol_constraint = 1e-5;
  double tol_grad = 1e-6;
  int max_iter = 2000;  // total BFGS iterations across outer rounds
  std::uint64_t seed = 1;
  EtaDistribution eta;
  GradientMethod gradient = GradientMethod::kAnalytic;
  bool std_errors = false;
};

struct GFEstimate {
  GFParams params;
  std::vector<std::string> names;
  Vector theta;                 // packed, see ParamLayout
  double loglik = 0.0;
  Vector constraint_residual;   // length G; zero for groups without a constraint
  int iterations = 0;
  int outer_iterations = 0;
  bool converged = false;
  double stationarity = 0.0;
  std::string message;
  std::optional<Vector> std_errors;
  Matrix influence;             // n x P, filled when std errors are requested
  std::vector<MeritRecord> merit_trace;
  double kappa = 0.05;
};

// Starting values: delta = zeta = 0 and each binding cutoff at the quantile
// of the pooled eta draws that matches the group's capacity share.
GFParams initial_params(const GFDataset& data, const DrawSet& draws);

// Maximises the simulated likelihood subject to D_n(theta) = capacities / n
// for binding groups. Objective and constraints are scaled per agent.
GFEstimate fit_constrained_mle(const GFDataset& data, const GFParams& init, const DrawSet& draws,
                               const GFOptions& options);

// Convenience: draws from options.seed, default start.
GFEstimate fit_constrained_mle(const GFDataset& data, const GFOptions& options);

}  // namespace endogroup
