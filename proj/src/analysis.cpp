#include "endogroup/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <thread>

#include <Eigen/QR>

namespace endogroup {

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::kOLS: return "OLS";
    case Estimator::kOLSFE: return "OLS+FE";
    case Estimator::kSieve: return "SieveOLS";
    case Estimator::kSieveFE: return "SieveOLS+FE";
  }
  return "?";
}

Estimator parse_estimator(const std::string& s) {
  if (s == "ols" || s == "OLS") return Estimator::kOLS;
  if (s == "ols-fe" || s == "OLS+FE") return Estimator::kOLSFE;
  if (s == "sieve" || s == "SieveOLS") return Estimator::kSieve;
  if (s == "sieve-fe" || s == "SieveOLS+FE") return Estimator::kSieveFE;
  throw ConfigError("unknown estimator '" + s + "' (expected ols, ols-fe, sieve, sieve-fe)");
}

Regressors build_design(const OutcomeDraw& outcome, int groups, Estimator estimator, bool include_wy,
                        const IndexPanel* panel, int basis_order) {
  const Matrix x = outcome.x;
  BasisMatrix controls;
  bool constant = false;
  switch (estimator) {
    case Estimator::kOLS:
      constant = true;
      break;
    case Estimator::kOLSFE:
      controls = group_dummy_basis(outcome.group, groups);
      break;
    case Estimator::kSieve:
    case Estimator::kSieveFE: {
      require(panel != nullptr, "sieve estimators need the index panel");
      const IndexPanel sub = select_rows(*panel, outcome.matched);
      const bool fe = estimator == Estimator::kSieveFE;
      controls = build_basis(sub, basis_order, fe, fe);
      constant = !fe;
      break;
    }
  }
  if (controls.K() == 0) controls.B.resize(static_cast<Eigen::Index>(outcome.y.size()), 0);
  Regressors r = make_regressors(outcome.W, outcome.y, x, include_wy, controls, constant);
  r.pool_index = outcome.matched;
  return r;
}

void MCReport::summarize() {
  const int p = static_cast<int>(params.size());
  reps = static_cast<int>(estimates.rows());
  bias = Vector::Zero(p);
  std = Vector::Zero(p);
  rmse = Vector::Zero(p);
  if (reps == 0) {
    bias.setConstant(kNaN);
    std.setConstant(kNaN);
    rmse.setConstant(kNaN);
    return;
  }
  const Matrix err = estimates - truth;
  bias = err.colwise().mean().transpose();
  rmse = (err.array().square().colwise().sum() / reps).sqrt().matrix().transpose();
  if (reps > 1) {
    const Matrix centered = err.rowwise() - bias.transpose();
    std = (centered.array().square().colwise().sum() / (reps - 1)).sqrt().matrix().transpose();
  }
}

std::vector<OutcomeDesign> standard_designs() {
  std::vector<OutcomeDesign> d;
  const std::vector<Estimator> menu{Estimator::kOLS, Estimator::kOLSFE, Estimator::kSieve};
  d.push_back({"exog_group_avg", {{0.0, 1.0, 1.0}, AdjacencyMode::kGroupAvgExclude, 0.5, true}, false, menu});
  d.push_back({"exog_network", {{0.0, 1.0, 1.0}, AdjacencyMode::kDyadicNetwork, 0.5, true}, false, menu});
  d.push_back({"endog_group_avg", {{0.5, 1.0, 1.0}, AdjacencyMode::kGroupAvgExclude, 0.5, true}, true, menu});
  d.push_back({"endog_network", {{0.5, 1.0, 1.0}, AdjacencyMode::kDyadicNetwork, 0.5, true}, true, menu});
  return d;
}

namespace {

struct EstimatorOutcome {
  bool ok = false;
  Vector estimate, truth, se;
  double condition = kNaN;
  std::string error;
};

struct RepOutcome {
  bool ok = false;
  std::string error;
  bool gf_ok = false;
  Vector gf_estimate, gf_truth;
  double gf_residual = kNaN;
  std::vector<std::vector<EstimatorOutcome>> cells;  // [design][estimator]
};

Vector true_gamma(const OutcomeDesign& d) {
  Vector g(d.include_wy ? 3 : 2);
  int k = 0;
  if (d.include_wy) g[k++] = d.spec.gamma[0];
  g[k++] = d.spec.gamma[1];
  g[k] = d.spec.gamma[2];
  return g;
}

RepOutcome run_rep(const StudyConfig& cfg, int rep) {
  RepOutcome out;
  out.cells.resize(cfg.designs.size());
  try {
    const Rng root = Rng(cfg.base_seed).split(static_cast<std::uint64_t>(rep));
    Rng frng = root.split(0);
    const FormationDraw formation = simulate_formation(cfg.sim, frng);
    const CovariatePanel z = to_panel(formation.covariates);
    const GFParams truth = true_params(cfg.sim, formation.matching.cutoffs);

    std::optional<GFParams> theta;
    if (cfg.estimate_theta) {
      GFDataset data{z, formation.matching.assignment, cfg.sim.capacities, formation.matching.binding};
      try {
        Rng drng = root.split(2);
        const DrawSet draws = DrawSet::Generate(data.n(), cfg.gf.draws, data.groups(), cfg.gf.eta, drng);
        const GFEstimate est = fit_constrained_mle(data, initial_params(data, draws), draws, cfg.gf);
        const ParamLayout layout = ParamLayout::For(z, data.binding);
        out.gf_estimate = est.theta;
        out.gf_truth = layout.pack(truth);
        out.gf_ok = est.converged;
        out.gf_residual = est.constraint_residual.size() ? est.constraint_residual.cwiseAbs().maxCoeff() : 0.0;
        if (est.converged) theta = est.params;
      } catch (const NumericError&) {
        out.gf_ok = false;
      }
    } else {
      theta = truth;
    }
    std::optional<IndexPanel> panel;
    if (theta) panel = compute_indices(z, formation.matching.assignment, *theta);

    for (std::size_t d = 0; d < cfg.designs.size(); ++d) {
      const OutcomeDesign& design = cfg.designs[d];
      Rng orng = root.split(10 + d);
      const OutcomeDraw outcome = realize_outcomes(formation, design.spec, orng);
      for (Estimator e : design.menu) {
        EstimatorOutcome eo;
        eo.truth = true_gamma(design);
        try {
          const bool sieve = e == Estimator::kSieve || e == Estimator::kSieveFE;
          if (sieve && !panel) throw NumericError("group-formation estimation did not converge");
          const Regressors reg = build_design(outcome, cfg.sim.groups(), e, design.include_wy,
                                              panel ? &*panel : nullptr, cfg.basis_order);
          eo.condition = rank_diagnostic(reg).condition_number;
          const PeerEstimate pe = sieve_ols(reg);
          eo.estimate = pe.gamma_hat;
          eo.se = pe.se;
          eo.ok = true;
        } catch (const NumericError& ex) {
          eo.error = ex.what();
        }
        out.cells[d].push_back(std::move(eo));
      }
    }
    out.ok = !cfg.estimate_theta || out.gf_ok;
    if (!out.ok) out.error = "group-formation estimation did not converge";
  } catch (const NumericError& ex) {
    out.ok = false;
    out.error = ex.what();
  }
  return out;
}

void append_row(Matrix& m, const Vector& v) {
  if (m.rows() == 0) m.resize(0, v.size());
  m.conservativeResize(m.rows() + 1, Eigen::NoChange);
  m.row(m.rows() - 1) = v.transpose();
}

}  // namespace

StudyResult run_monte_carlo(const StudyConfig& cfg) {
  require(cfg.reps >= 1, "reps must be at least 1");
  require(cfg.threads >= 1, "threads must be at least 1");
  require(cfg.basis_order == 1 || cfg.basis_order == 2, "basis order must be 1 or 2");
  cfg.sim.validate();
  std::vector<RepOutcome> reps(cfg.reps);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < cfg.reps; r = next++) reps[r] = run_rep(cfg, r);
  };
  const int nthreads = std::min(cfg.threads, cfg.reps);
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  StudyResult res;
  res.reps_attempted = cfg.reps;
  for (std::size_t d = 0; d < cfg.designs.size(); ++d) {
    const auto& design = cfg.designs[d];
    for (std::size_t k = 0; k < design.menu.size(); ++k) {
      MCReport rep;
      rep.design = design.label;
      rep.estimator = to_string(design.menu[k]);
      rep.seed = cfg.base_seed;
      if (design.include_wy) rep.params.push_back("gamma1");
      rep.params.push_back("gamma2");
      rep.params.push_back("gamma3");
      for (int r = 0; r < cfg.reps; ++r) {
        const auto& eo = reps[r].cells.empty() ? EstimatorOutcome{} : reps[r].cells[d][k];
        rep.condition_numbers.push_back(eo.condition);
        if (!eo.ok) {
          ++rep.failures;
          rep.failure_messages.push_back("rep " + std::to_string(r) + ": " +
                                         (eo.error.empty() ? reps[r].error : eo.error));
          continue;
        }
        rep.rep_ids.push_back(r);
        append_row(rep.estimates, eo.estimate);
        append_row(rep.truth, eo.truth);
        append_row(rep.std_errors, eo.se);
      }
      if (rep.estimates.rows() == 0) {
        rep.estimates.resize(0, static_cast<Eigen::Index>(rep.params.size()));
        rep.truth = rep.estimates;
      }
      rep.summarize();
      res.gamma.push_back(std::move(rep));
    }
  }
  MCReport& gf = res.formation;
  gf.design = "group_formation";
  gf.estimator = "MPEC";
  gf.seed = cfg.base_seed;
  for (int r = 0; r < cfg.reps; ++r) {
    if (!reps[r].ok) ++res.reps_failed;
    if (!cfg.estimate_theta) continue;
    if (!reps[r].gf_ok) {
      ++gf.failures;
      gf.failure_messages.push_back("rep " + std::to_string(r) + ": " + reps[r].error);
      continue;
    }
    gf.rep_ids.push_back(r);
    res.formation_residual.push_back(reps[r].gf_residual);
    append_row(gf.estimates, reps[r].gf_estimate);
    append_row(gf.truth, reps[r].gf_truth);
  }
  if (cfg.estimate_theta) {
    std::vector<bool> all_binding(cfg.sim.groups(), true);
    CovariatePanel shape;
    shape.n = 0;
    shape.groups = cfg.sim.groups();
    shape.pair_u.assign(1, Matrix(0, shape.groups));
    shape.pair_v.assign(1, Matrix(0, shape.groups));
    shape.individual.resize(0, 1);
    gf.params = ParamLayout::For(shape, all_binding).names();
    if (gf.estimates.rows() > 0 && gf.estimates.cols() != static_cast<Eigen::Index>(gf.params.size())) {
      gf.params.clear();
      for (int k = 0; k < gf.estimates.cols(); ++k) gf.params.push_back("theta_" + std::to_string(k + 1));
    }
    if (gf.estimates.rows() == 0) {
      gf.estimates.resize(0, static_cast<Eigen::Index>(gf.params.size()));
      gf.truth = gf.estimates;
    }
    gf.summarize();
  }
  if (res.reps_failed > cfg.max_failure_rate * cfg.reps)
    throw NumericError("Monte Carlo aborted: " + std::to_string(res.reps_failed) + " of " +
                       std::to_string(cfg.reps) + " replications failed");
  if (res.reps_failed > 0)
    res.warnings.push_back(std::to_string(res.reps_failed) + " replications failed and were excluded");
  return res;
}

Decomposition variance_decomposition(const Regressors& reg, const PeerEstimate& est) {
  const int n = reg.n();
  require(n >= 2, "decomposition needs at least two observations");
  require(est.gamma_hat.size() == reg.X.cols(), "estimate does not match the regressors");
  Decomposition d;
  Vector peer = Vector::Zero(n);
  for (int k = 0; k < reg.X.cols(); ++k)
    if (!reg.labels[k].empty() && reg.labels[k][0] == 'W') peer += reg.X.col(k) * est.gamma_hat[k];
  Vector school = est.group_effect.size() == n ? est.group_effect : Vector::Zero(n);
  const Vector selection = est.fitted_selection.size() == n ? est.fitted_selection : Vector::Zero(n);
  const bool has_dummies = std::any_of(reg.controls.dummy_group.begin(), reg.controls.dummy_group.end(),
                                       [](int g) { return g >= 1; });
  if (!has_dummies) {
    school.setZero();
    d.warnings.push_back("no group dummies; school component set to zero");
  }
  auto cov = [n](const Vector& a, const Vector& b) {
    return (a.array() - a.mean()).matrix().dot((b.array() - b.mean()).matrix()) / (n - 1);
  };
  const Vector total = peer + school + selection;
  d.var_total = cov(total, total);
  d.var_peer = cov(peer, peer);
  d.var_school = cov(school, school);
  d.var_selection = cov(selection, selection);
  d.cov_peer_school = cov(peer, school);
  d.cov_peer_sel = cov(peer, selection);
  d.cov_school_sel = cov(school, selection);
  return d;
}

namespace {

struct PeerGapStatistic {
  double coefficient = 0.0, se = 0.0, t = 0.0;
  bool ok = false;
};

// Leave-one-out cell mean minus leave-one-out group mean, for usable rows.
Vector peer_mean_gap(const Vector& c, const IntVector& g, const IntVector& cell, int groups, int cells) {
  const int m = static_cast<int>(c.size());
  std::vector<double> cs(static_cast<std::size_t>(groups) * cells, 0.0), gs(groups, 0.0);
  std::vector<int> cn(cs.size(), 0), gn(groups, 0);
  for (int k = 0; k < m; ++k) {
    const std::size_t ck = static_cast<std::size_t>(g[k]) * cells + cell[k];
    cs[ck] += c[k];
    ++cn[ck];
    gs[g[k]] += c[k];
    ++gn[g[k]];
  }
  Vector d(m);
  for (int k = 0; k < m; ++k) {
    const std::size_t ck = static_cast<std::size_t>(g[k]) * cells + cell[k];
    d[k] = (cs[ck] - c[k]) / (cn[ck] - 1) - (gs[g[k]] - c[k]) / (gn[g[k]] - 1);
  }
  return d;
}

PeerGapStatistic peer_gap_statistic(const Vector& d, const Vector& c_res, const Matrix& Q) {
  PeerGapStatistic s;
  const Vector dr = d - Q * (Q.transpose() * d);
  const double sxx = dr.squaredNorm();
  if (!(sxx > 1e-12 * std::max(d.squaredNorm(), 1e-300))) return s;
  s.coefficient = dr.dot(c_res) / sxx;
  const Vector e = c_res - dr * s.coefficient;
  s.se = std::sqrt((dr.array().square() * e.array().square()).sum()) / sxx;
  s.t = s.se > 0 ? s.coefficient / s.se : 0.0;
  s.ok = s.se > 0;
  return s;
}

}  // namespace

RandomAssignmentResult random_assignment_test(const Vector& characteristic, const IntVector& group,
                                              const IntVector& cell, const Matrix* extra_controls,
                                              const RandomTestOptions& options) {
  const int n = static_cast<int>(characteristic.size());
  require(static_cast<int>(group.size()) == n && static_cast<int>(cell.size()) == n,
          "characteristic, group and cell must have equal length");
  if (extra_controls) require(extra_controls->rows() == n, "extra controls must have one row per agent");
  require(options.permutations >= 0, "permutation count must be non-negative");
  RandomAssignmentResult res;

  std::map<std::pair<int, int>, int> cell_size;
  for (int i = 0; i < n; ++i) ++cell_size[{group[i], cell[i]}];
  std::vector<int> rows;
  for (int i = 0; i < n; ++i) {
    if (cell_size[{group[i], cell[i]}] < 2) {
      ++res.dropped_singletons;
      continue;
    }
    rows.push_back(i);
  }
  std::map<int, std::set<int>> cells_per_group;
  for (int i : rows) cells_per_group[group[i]].insert(cell[i]);
  for (const auto& [g, cs] : cells_per_group)
    require(cs.size() >= 2, "group " + std::to_string(g) + " has fewer than two usable cells");

  const int m = static_cast<int>(rows.size());
  res.n_used = m;
  if (m < 3) {
    res.note = "too few observations";
    return res;
  }
  // Dense relabelling of groups and of cells within groups.
  std::map<int, int> gindex;
  std::map<std::pair<int, int>, int> cindex;
  IntVector g(m), cl(m);
  Vector c(m);
  int cells = 0;
  for (int k = 0; k < m; ++k) {
    const int i = rows[k];
    c[k] = characteristic[i];
    g[k] = gindex.emplace(group[i], static_cast<int>(gindex.size())).first->second;
    auto it = cindex.find({group[i], cell[i]});
    if (it == cindex.end()) {
      int local = 0;
      for (const auto& [key, v] : cindex)
        if (key.first == group[i]) ++local;
      it = cindex.emplace(std::make_pair(group[i], cell[i]), local).first;
    }
    cl[k] = it->second;
    cells = std::max(cells, cl[k] + 1);
  }
  if ((c.array() - c.mean()).abs().maxCoeff() == 0.0) {
    res.note = "constant characteristic; test skipped";
    return res;
  }
  const int G = static_cast<int>(gindex.size());
  const int extra = extra_controls ? static_cast<int>(extra_controls->cols()) : 0;
  Matrix Z = Matrix::Zero(m, G + extra);
  for (int k = 0; k < m; ++k) {
    Z(k, g[k]) = 1.0;
    for (int e = 0; e < extra; ++e) Z(k, G + e) = (*extra_controls)(rows[k], e);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(Z);
  qr.setThreshold(1e-10);
  const Matrix Q = Matrix(qr.householderQ()).leftCols(qr.rank());
  const Vector c_res = c - Q * (Q.transpose() * c);

  const PeerGapStatistic obs = peer_gap_statistic(peer_mean_gap(c, g, cl, G, cells), c_res, Q);
  if (!obs.ok) {
    res.note = "peer-mean regressor is collinear with the controls; test skipped";
    return res;
  }
  res.coefficient = obs.coefficient;
  res.se = obs.se;
  res.p_value_asymptotic = std::erfc(std::abs(obs.t) / std::sqrt(2.0));
  if (options.permutations == 0) {
    res.p_value = res.p_value_asymptotic;
    res.note = "asymptotic normal p-value";
    return res;
  }
  std::vector<IntVector> members(G);
  for (int k = 0; k < m; ++k) members[g[k]].push_back(k);
  Rng rng(options.seed);
  IntVector perm = cl;
  int extreme = 0;
  for (int b = 0; b < options.permutations; ++b) {
    for (const auto& idx : members) {
      for (std::size_t a = idx.size() - 1; a > 0; --a) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform() * (a + 1));
        std::swap(perm[idx[a]], perm[idx[std::min(j, a)]]);
      }
    }
    const PeerGapStatistic s = peer_gap_statistic(peer_mean_gap(c, g, perm, G, cells), c_res, Q);
    if (!s.ok || std::abs(s.t) >= std::abs(obs.t)) ++extreme;
  }
  res.permutations = options.permutations;
  res.p_value = (1.0 + extreme) / (1.0 + options.permutations);
  return res;
}

}  // namespace endogroup
