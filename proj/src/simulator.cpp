#include "endogroup/simulator.hpp"

#include <cmath>

namespace endogroup {

void SimConfig::validate() const {
  require(n_pool > 0, "n_pool must be positive");
  require(!capacities.empty(), "at least one group is required");
  long seats = 0;
  for (int c : capacities) {
    require(c >= 0, "capacities must be non-negative");
    seats += c;
  }
  require(seats <= n_pool, "total capacity exceeds the pool size");
  require(zeta.size() == groups(), "zeta must have one entry per group");
  require(std::abs(gamma[0]) < 1.0, "|gamma1| must be below 1");
  require(x_var > 0 && z2_var > 0 && z1_var > 0, "variances must be positive");
  require(std::abs(cov_z2_x) <= std::sqrt(x_var * z2_var), "cov(z2, x) exceeds the Cauchy-Schwarz bound");
  require(link_prob >= 0.0 && link_prob <= 1.0, "link probability must lie in [0, 1]");
}

Covariates draw_covariates(const SimConfig& config, Rng& rng) {
  config.validate();
  const int n = config.n_pool;
  const int G = config.groups();
  // Cholesky factor of Cov(x, z2).
  const double l11 = std::sqrt(config.x_var);
  const double l21 = config.cov_z2_x / l11;
  const double l22 = std::sqrt(std::max(0.0, config.z2_var - l21 * l21));
  const double sd1 = std::sqrt(config.z1_var);
  Covariates c;
  c.x.resize(n);
  c.z2.resize(n);
  c.z1u.resize(n, G);
  c.z1v.resize(n, G);
  for (int i = 0; i < n; ++i) {
    const double a = rng.normal();
    const double b = rng.normal();
    c.x[i] = config.x_mean + l11 * a;
    c.z2[i] = config.z2_mean + l21 * a + l22 * b;
    for (int g = 0; g < G; ++g) c.z1u(i, g) = sd1 * rng.normal();
    for (int g = 0; g < G; ++g) c.z1v(i, g) = sd1 * rng.normal();
  }
  return c;
}

ShockBlock draw_unobservables(const SimConfig& config, Rng& rng) {
  config.validate();
  const int n = config.n_pool;
  const int G = config.groups();
  ShockBlock s;
  s.eps.resize(n);
  s.xi.resize(n, G + 1);
  s.eta.resize(n, G);
  for (int i = 0; i < n; ++i) {
    s.eps[i] = rng.normal();
    for (int g = 0; g <= G; ++g) s.xi(i, g) = rng.gumbel();
    for (int g = 0; g < G; ++g) s.eta(i, g) = s.eps[i] + rng.normal();
  }
  return s;
}

CovariatePanel to_panel(const Covariates& c) {
  CovariatePanel z;
  z.n = static_cast<int>(c.x.size());
  z.groups = static_cast<int>(c.z1u.cols());
  z.pair_u = {c.z1u};
  z.pair_v = {c.z1v};
  z.individual = c.z2;
  return z;
}

GFParams true_params(const SimConfig& config, const std::vector<Cutoff>& cutoffs) {
  GFParams p;
  p.delta_u = (Vector(2) << config.delta[0], config.delta[1]).finished();
  p.delta_v = (Vector(2) << config.delta[2], config.delta[3]).finished();
  p.zeta = config.zeta;
  p.cutoffs = cutoffs;
  return p;
}

PreferenceProfile build_profile(const SimConfig& config, const Covariates& c, const ShockBlock& s) {
  const CovariatePanel z = to_panel(c);
  const GFParams theta = true_params(config, std::vector<Cutoff>(config.groups(), Cutoff::NegInf()));
  PreferenceProfile p;
  p.U = compute_deterministic_utilities(z, theta).groups + s.xi.rightCols(config.groups());
  p.U0 = s.xi.col(0);
  p.V = compute_qualifications(z, theta) + s.eta;
  return p;
}

FormationDraw simulate_formation(const SimConfig& config, Rng& rng) {
  FormationDraw f;
  f.covariates = draw_covariates(config, rng);
  f.shocks = draw_unobservables(config, rng);
  f.profile = build_profile(config, f.covariates, f.shocks);
  f.matching = deferred_acceptance(f.profile, config.capacities);
  return f;
}

OutcomeDraw realize_outcomes(const FormationDraw& formation, const OutcomeSpec& spec, Rng& rng) {
  OutcomeDraw o;
  const auto& assign = formation.matching.assignment;
  for (int i = 0; i < static_cast<int>(assign.size()); ++i)
    if (assign[i] != kOutside) {
      o.matched.push_back(i);
      o.group.push_back(assign[i]);
    }
  const int m = static_cast<int>(o.matched.size());
  o.x.resize(m);
  o.eps.resize(m);
  for (int k = 0; k < m; ++k) {
    o.x[k] = formation.covariates.x[o.matched[k]];
    o.eps[k] = formation.shocks.eps[o.matched[k]];
  }
  switch (spec.mode) {
    case AdjacencyMode::kGroupAvgInclude: o.W = build_group_average(o.group, true); break;
    case AdjacencyMode::kGroupAvgExclude: o.W = build_group_average(o.group, false); break;
    case AdjacencyMode::kDyadicNetwork: o.W = build_dyadic_network(o.group, spec.link_prob, rng, spec.directed_links); break;
  }
  const Vector wx = o.W.multiply(o.x);
  const Vector rhs = spec.gamma[1] * wx + spec.gamma[2] * o.x + o.eps;
  o.y = solve_social_equilibrium(o.W, rhs, spec.gamma[0]);
  return o;
}

SimulatedMarket simulate_market(const SimConfig& config, const Rng& rng) {
  SimulatedMarket m;
  m.truth = config;
  Rng formation_rng = rng.split(0);
  Rng outcome_rng = rng.split(1);
  m.formation = simulate_formation(config, formation_rng);
  m.outcome = realize_outcomes(m.formation, {config.gamma, config.adjacency_mode, config.link_prob, config.directed_links}, outcome_rng);
  return m;
}

Vector population_demand(const SimConfig& config, const std::vector<Cutoff>& cutoffs, int draws, Rng& rng) {
  SimConfig big = config;
  big.n_pool = draws;
  long seats = 0;
  for (int c : big.capacities) seats += c;
  if (seats > draws) big.capacities.assign(big.capacities.size(), 0);
  const Covariates c = draw_covariates(big, rng);
  const ShockBlock s = draw_unobservables(big, rng);
  return realized_demand(build_profile(big, c, s), cutoffs);
}

}  // namespace endogroup
