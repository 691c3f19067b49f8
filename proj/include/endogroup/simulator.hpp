#pragma once

#include <array>
#include <cstdint>

#include "endogroup/adjacency.hpp"
#include "endogroup/core.hpp"
#include "endogroup/matching.hpp"
#include "endogroup/model.hpp"
#include "endogroup/rng.hpp"

namespace endogroup {

// Primitives of the simulated market. Defaults reproduce the Monte Carlo
// design: 2000 agents, five groups with 1680 seats.
struct SimConfig {
  int n_pool = 2000;
  IntVector capacities{280, 340, 200, 460, 400};
  std::array<double, 3> gamma{0.0, 1.0, 1.0};  // endogenous, contextual, own
  Vector zeta = (Vector(5) << 9.0, 6.0, 4.0, 2.0, 0.0).finished();
  std::array<double, 4> delta{-1.0, 1.0, 1.0, 1.0};  // (d1u, d2u, d1v, d2v)
  double cov_z2_x = 2.0;
  double x_mean = 5.0;
  double x_var = 25.0;
  double z2_mean = 2.0;
  double z2_var = 1.0;
  double z1_var = 9.0;
  AdjacencyMode adjacency_mode = AdjacencyMode::kGroupAvgExclude;
  double link_prob = 0.5;
  bool directed_links = true;
  std::uint64_t seed = 20240601;

  int groups() const { return static_cast<int>(capacities.size()); }
  void validate() const;
};

struct Covariates {
  Vector x;    // n
  Vector z2;   // n
  Matrix z1u;  // n x G
  Matrix z1v;  // n x G
};

struct ShockBlock {
  Vector eps;  // n
  Matrix xi;   // n x (G+1), column 0 is the outside option
  Matrix eta;  // n x G, eta_ig = eps_i + N(0,1)
};

// Covariates, shocks and the stable matching; everything that does not
// depend on the outcome equation.
struct FormationDraw {
  Covariates covariates;
  ShockBlock shocks;
  PreferenceProfile profile;
  MatchingResult matching;
};

struct OutcomeSpec {
  std::array<double, 3> gamma{0.0, 1.0, 1.0};
  AdjacencyMode mode = AdjacencyMode::kGroupAvgExclude;
  double link_prob = 0.5;
  bool directed_links = true;
};

// Outcome data on the matched sub-sample.
struct OutcomeDraw {
  IntVector matched;  // pool indices of matched agents, increasing
  IntVector group;    // group of each matched agent
  Vector x;
  Vector eps;
  AdjacencyMatrix W;
  Vector y;
};

struct SimulatedMarket {
  FormationDraw formation;
  OutcomeDraw outcome;
  SimConfig truth;
};

Covariates draw_covariates(const SimConfig& config, Rng& rng);
ShockBlock draw_unobservables(const SimConfig& config, Rng& rng);

CovariatePanel to_panel(const Covariates& c);
GFParams true_params(const SimConfig& config, const std::vector<Cutoff>& cutoffs);
PreferenceProfile build_profile(const SimConfig& config, const Covariates& c, const ShockBlock& s);

FormationDraw simulate_formation(const SimConfig& config, Rng& rng);
OutcomeDraw realize_outcomes(const FormationDraw& formation, const OutcomeSpec& spec, Rng& rng);

// Formation uses rng.split(0), the outcome stage rng.split(1).
SimulatedMarket simulate_market(const SimConfig& config, const Rng& rng);

// Demand shares at cutoffs p in a fresh population of `draws` agents.
Vector population_demand(const SimConfig& config, const std::vector<Cutoff>& cutoffs, int draws, Rng& rng);

}  // namespace endogroup
