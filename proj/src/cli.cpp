#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "endogroup/cli_io.hpp"

namespace endogroup {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  int threads = 0;
  long long seed = -1;
};

std::vector<std::pair<std::string, std::string>> collect_overrides(const Common& c,
                                                                    std::vector<std::pair<std::string, std::string>> extra) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  for (auto& e : extra) out.push_back(std::move(e));
  if (c.threads > 0) out.emplace_back("run.threads", std::to_string(c.threads));
  return out;
}

RunConfig resolve(const Common& c, std::vector<std::pair<std::string, std::string>> extra) {
  const auto ov = collect_overrides(c, std::move(extra));
  return c.config_path.empty() ? parse_config("", ov) : load_config(c.config_path, ov);
}

std::string out_file(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

GFDataset gf_dataset(const Dataset& d, const IntVector& capacities) {
  GFDataset g;
  g.z = to_panel(d.covariates);
  g.choice = d.group;
  const int G = d.groups();
  IntVector sizes(G, 0);
  for (int a : d.group)
    if (a > 0) ++sizes[a - 1];
  g.capacities = capacities.empty() ? sizes : capacities;
  require(static_cast<int>(g.capacities.size()) == G, "need one capacity per group");
  g.binding.resize(G);
  for (int k = 0; k < G; ++k) g.binding[k] = sizes[k] >= g.capacities[k];
  return g;
}

void print_warnings(const std::vector<std::string>& w) {
  for (const auto& s : w) std::cerr << "warning: " << s << "\n";
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Peer effects with endogenous group formation"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "Key-value configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", common.sets, "Override a configuration key (key=value)");
  app.add_option("--threads", common.threads, "Worker threads (default ENDOGROUP_THREADS or 1)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate a market and write its dataset");
  std::string sim_out = ".";
  std::string sim_adj;
  long long sim_seed = -1;
  sim->add_option("--out", sim_out, "Output directory");
  sim->add_option("--adjacency", sim_adj, "include | exclude | network");
  sim->add_option("--seed", sim_seed, "Simulation seed");

  // estimate-gf
  auto* egf = app.add_subcommand("estimate-gf", "Constrained simulated ML of group formation");
  std::string egf_data, egf_out = ".";
  std::vector<int> egf_caps;
  int egf_draws = 0;
  bool egf_se = false;
  egf->add_option("--data", egf_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  egf->add_option("--out", egf_out, "Output directory");
  egf->add_option("--capacities", egf_caps, "Group capacities (default: observed sizes)")->delimiter(',');
  egf->add_option("--draws", egf_draws, "Simulation draws per agent");
  egf->add_flag("--std-errors", egf_se, "Compute standard errors");
  std::string egf_kappa, egf_tol_c, egf_tol_g, egf_iter, egf_seed;
  egf->add_option("--kappa", egf_kappa, "Logistic smoothing bandwidth");
  egf->add_option("--tol-constraint", egf_tol_c, "Market-clearing tolerance");
  egf->add_option("--tol-grad", egf_tol_g, "Stationarity tolerance");
  egf->add_option("--max-iter", egf_iter, "Iteration budget");
  egf->add_option("--seed", egf_seed, "Simulation-draw seed");

  // estimate-peer
  auto* ep = app.add_subcommand("estimate-peer", "Sieve OLS of the peer-effect parameters");
  std::string ep_data, ep_theta, ep_out = ".", ep_net, ep_adj = "exclude", ep_est;
  int ep_order = 0;
  bool ep_dummies = false, ep_demean = false, ep_true = false, ep_no_wy = false;
  std::vector<int> ep_types;
  std::vector<int> ep_qual;
  ep->add_option("--data", ep_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  ep->add_option("--theta", ep_theta, "Group-formation parameter file");
  ep->add_option("--out", ep_out, "Output directory");
  ep->add_option("--network", ep_net, "Adjacency triplets CSV (i,j,w)");
  ep->add_option("--adjacency", ep_adj, "include | exclude (ignored with --network)");
  ep->add_option("--basis-order", ep_order, "Selection basis order (1 or 2)");
  ep->add_option("--estimator", ep_est, "ols | ols-fe | sieve | sieve-fe");
  ep->add_option("--by-type", ep_types, "Type label (0-based) of each group")->delimiter(',');
  ep->add_option("--qualifying-types", ep_qual, "Types with qualification indices")->delimiter(',');
  ep->add_flag("--group-dummies", ep_dummies, "Add group dummies to the sieve");
  ep->add_flag("--demean", ep_demean, "Demean basis columns");
  ep->add_flag("--use-true-theta", ep_true, "Use truth.csv next to the data");
  ep->add_flag("--no-wy", ep_no_wy, "Drop the endogenous regressor Wy");

  // montecarlo
  auto* mc = app.add_subcommand("montecarlo", "Monte Carlo study of the estimators");
  std::string mc_out = ".";
  int mc_reps = 0;
  long long mc_seed = -1;
  bool mc_true = false;
  mc->add_option("--out", mc_out, "Output directory");
  mc->add_option("--reps", mc_reps, "Replications");
  mc->add_option("--seed", mc_seed, "Base seed");
  mc->add_flag("--use-true-theta", mc_true, "Skip group-formation estimation");

  // decompose
  auto* dec = app.add_subcommand("decompose", "Variance decomposition of predicted outcomes");
  std::string dec_data, dec_theta, dec_out = ".", dec_net, dec_adj = "exclude";
  dec->add_option("--data", dec_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  dec->add_option("--theta", dec_theta, "Group-formation parameter file")->required()->check(CLI::ExistingFile);
  dec->add_option("--out", dec_out, "Output directory");
  dec->add_option("--network", dec_net, "Adjacency triplets CSV");
  dec->add_option("--adjacency", dec_adj, "include | exclude");

  // test-random
  auto* tr = app.add_subcommand("test-random", "Random-assignment test within groups");
  std::string tr_data, tr_out = ".", tr_group = "group", tr_cell = "cell";
  std::vector<std::string> tr_cols;
  tr->add_option("--data", tr_data, "CSV with characteristics, group and cell columns")->required()->check(CLI::ExistingFile);
  tr->add_option("--characteristics", tr_cols, "Columns to test")->required()->delimiter(',');
  tr->add_option("--group-col", tr_group, "Group column");
  tr->add_option("--cell-col", tr_cell, "Cell column");
  tr->add_option("--out", tr_out, "Output directory");
  RandomTestOptions tr_opt;
  tr->add_option("--permutations", tr_opt.permutations, "Within-group cell permutations (0: asymptotic p-value)");
  tr->add_option("--seed", tr_opt.seed, "Permutation seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sim) {
      std::vector<std::pair<std::string, std::string>> extra;
      if (!sim_adj.empty()) extra.emplace_back("sim.adjacency", sim_adj);
      if (sim_seed >= 0) extra.emplace_back("sim.seed", std::to_string(sim_seed));
      const RunConfig cfg = resolve(common, extra);
      const SimulatedMarket m = simulate_market(cfg.sim, Rng(cfg.sim.seed));
      const Dataset d = dataset_from_market(m);
      const std::string data_path = out_file(sim_out, "agents.csv");
      write_csv_dataset(data_path, d);
      write_provenance(data_path, "simulate", cfg.sim.seed, cfg);
      const std::string theta_path = out_file(sim_out, "truth.csv");
      write_theta_csv(theta_path, true_params(cfg.sim, m.formation.matching.cutoffs), to_panel(d.covariates));
      {
        std::ofstream truth(theta_path, std::ios::app);
        for (int k = 0; k < 3; ++k) truth << "gamma" << k + 1 << "," << format_full(cfg.sim.gamma[k]) << ",NA\n";
      }
      write_provenance(theta_path, "simulate", cfg.sim.seed, cfg);
      if (cfg.sim.adjacency_mode == AdjacencyMode::kDyadicNetwork) {
        const std::string net = out_file(sim_out, "network.csv");
        write_network_csv(net, d, m.outcome);
        write_provenance(net, "simulate", cfg.sim.seed, cfg);
      }
      std::cout << "simulated " << d.n() << " agents, " << m.outcome.matched.size() << " matched\n";
      return 0;
    }
    if (*egf) {
      std::vector<std::pair<std::string, std::string>> extra;
      if (egf_draws > 0) extra.emplace_back("gf.draws", std::to_string(egf_draws));
      if (egf_se) extra.emplace_back("gf.std_errors", "true");
      for (const auto& [key, v] : {std::pair{"gf.kappa", &egf_kappa}, {"gf.tol_constraint", &egf_tol_c},
                                   {"gf.tol_grad", &egf_tol_g}, {"gf.max_iter", &egf_iter}, {"gf.seed", &egf_seed}})
        if (!v->empty()) extra.emplace_back(key, *v);
      const RunConfig cfg = resolve(common, extra);
      const Dataset d = read_csv_dataset(egf_data);
      print_warnings(d.warnings);
      const GFDataset data = gf_dataset(d, egf_caps);
      const GFEstimate est = fit_constrained_mle(data, cfg.gf);
      const std::string path = out_file(egf_out, "gf_estimate.csv");
      write_theta_csv(path, est.params, data.z, est.std_errors);
      write_provenance(path, "estimate-gf", cfg.gf.seed, cfg, {egf_data});
      std::cout << "loglik " << format_sig6(est.loglik) << ", " << est.message << " after " << est.iterations
                << " iterations; max |constraint| " << format_sig6(est.constraint_residual.lpNorm<Eigen::Infinity>())
                << "\n";
      return est.converged ? 0 : 2;
    }
    if (*ep || *dec) {
      const bool is_dec = static_cast<bool>(*dec);
      std::vector<std::pair<std::string, std::string>> extra;
      if (ep_order > 0) extra.emplace_back("peer.basis_order", std::to_string(ep_order));
      if (!ep_est.empty()) extra.emplace_back("peer.estimator", ep_est);
      if (ep_dummies) extra.emplace_back("peer.group_dummies", "true");
      if (ep_demean) extra.emplace_back("peer.demean", "true");
      if (ep_true) extra.emplace_back("peer.use_true_theta", "true");
      if (ep_no_wy) extra.emplace_back("peer.include_wy", "false");
      const RunConfig cfg = resolve(common, extra);
      const std::string data_path = is_dec ? dec_data : ep_data;
      const Dataset d = read_csv_dataset(data_path);
      print_warnings(d.warnings);
      std::string theta_path = is_dec ? dec_theta : ep_theta;
      if (theta_path.empty() && cfg.peer.use_true_theta)
        theta_path = (fs::path(data_path).parent_path() / "truth.csv").string();
      const std::string net = is_dec ? dec_net : ep_net;
      const OutcomeDraw o = outcome_from_dataset(d, parse_adjacency_mode(is_dec ? dec_adj : ep_adj), net);
      const CovariatePanel z = to_panel(d.covariates);
      Estimator e = is_dec ? Estimator::kSieveFE : parse_estimator(cfg.peer.estimator);
      if (!is_dec && e == Estimator::kSieve && cfg.peer.group_dummies) e = Estimator::kSieveFE;
      std::optional<IndexPanel> panel;
      if (e == Estimator::kSieve || e == Estimator::kSieveFE) {
        if (theta_path.empty()) throw ConfigError("sieve estimation needs --theta or --use-true-theta");
        panel = compute_indices(z, d.group, read_theta_csv(theta_path, z));
      }
      Regressors reg;
      if (!is_dec && !ep_types.empty()) {
        require(panel.has_value(), "--by-type needs a sieve estimator");
        int T = 0;
        for (int t : ep_types) T = std::max(T, t + 1);
        std::vector<bool> qual(T, false);
        for (int q : ep_qual) {
          require(q >= 0 && q < T, "qualifying type out of range");
          qual[q] = true;
        }
        const bool fe = e == Estimator::kSieveFE;
        BasisMatrix b = build_basis_by_type(select_rows(*panel, o.matched), ep_types, cfg.peer.basis_order, qual,
                                            fe || cfg.peer.demean, fe);
        reg = make_regressors(o.W, o.y, o.x, cfg.peer.include_wy, b, !fe);
        reg.pool_index = o.matched;
      } else {
        reg = build_design(o, d.groups(), e, cfg.peer.include_wy, panel ? &*panel : nullptr, cfg.peer.basis_order);
      }
      print_warnings(reg.controls.warnings);
      const RankDiagnostic diag = rank_diagnostic(reg);
      std::cerr << diag.report << "\n";
      const PeerEstimate est = sieve_ols(reg);
      if (is_dec) {
        const Decomposition dc = variance_decomposition(reg, est);
        print_warnings(dc.warnings);
        std::string out = "component,value\n";
        const std::vector<std::pair<std::string, double>> rows{
            {"var_total", dc.var_total},         {"var_peer", dc.var_peer},
            {"var_school", dc.var_school},       {"var_selection", dc.var_selection},
            {"cov_peer_school", dc.cov_peer_school}, {"cov_peer_selection", dc.cov_peer_sel},
            {"cov_school_selection", dc.cov_school_sel}};
        for (const auto& [k, v] : rows) out += k + "," + format_sig6(v) + "\n";
        const std::string path = out_file(dec_out, "decomposition.csv");
        fs::create_directories(fs::path(dec_out));
        std::ofstream(path) << out;
        write_provenance(path, "decompose", 0, cfg, {dec_data, dec_theta});
        std::cout << out;
        return 0;
      }
      std::string out = "parameter,estimate,std_error\n";
      for (int k = 0; k < est.gamma_hat.size(); ++k)
        out += est.labels[k] + "," + format_sig6(est.gamma_hat[k]) + "," + format_sig6(est.se[k]) + "\n";
      const std::string path = out_file(ep_out, "peer_estimate.csv");
      fs::create_directories(fs::path(ep_out));
      std::ofstream(path) << out;
      write_provenance(path, "estimate-peer", 0, cfg, {ep_data, theta_path});
      std::string basis = "label,coefficient\n";
      for (int k = 0; k < reg.controls.K(); ++k)
        basis += reg.controls.column_labels[k] + "," + format_sig6(est.sieve_coeffs[k]) + "\n";
      const std::string bpath = out_file(ep_out, "peer_basis.csv");
      std::ofstream(bpath) << basis;
      write_provenance(bpath, "estimate-peer", 0, cfg, {ep_data, theta_path});
      std::cout << out;
      return 0;
    }
    if (*mc) {
      std::vector<std::pair<std::string, std::string>> extra;
      if (mc_reps > 0) extra.emplace_back("mc.reps", std::to_string(mc_reps));
      if (mc_seed >= 0) extra.emplace_back("mc.seed", std::to_string(mc_seed));
      if (mc_true) extra.emplace_back("mc.estimate_theta", "false");
      const RunConfig cfg = resolve(common, extra);
      StudyConfig study;
      study.sim = cfg.sim;
      study.designs = standard_designs();
      for (auto& dsg : study.designs) dsg.spec.link_prob = cfg.sim.link_prob;
      study.reps = cfg.mc.reps;
      study.base_seed = cfg.mc.seed;
      study.threads = cfg.threads;
      study.estimate_theta = cfg.mc.estimate_theta;
      study.gf = cfg.gf;
      study.basis_order = cfg.peer.basis_order;
      const StudyResult res = run_monte_carlo(study);
      print_warnings(res.warnings);
      write_mc_tables(mc_out, res);
      for (const char* f : {"table_gamma.csv", "raw_gamma.csv", "table_gf.csv", "raw_gf.csv"})
        write_provenance(out_file(mc_out, f), "montecarlo", cfg.mc.seed, cfg);
      std::cout << "wrote Monte Carlo tables for " << res.reps_attempted << " replications to " << mc_out << "\n";
      return 0;
    }
    if (*tr) {
      const RunConfig cfg = resolve(common, {});
      const auto cols = read_numeric_csv(tr_data);
      auto column = [&](const std::string& name) -> const std::vector<double>& {
        const auto it = cols.find(name);
        if (it == cols.end()) throw ConfigError(tr_data + ": missing column '" + name + "'");
        return it->second;
      };
      IntVector group, cell;
      for (double v : column(tr_group)) group.push_back(static_cast<int>(v));
      for (double v : column(tr_cell)) cell.push_back(static_cast<int>(v));
      std::string out =
          "characteristic,coefficient,std_error,p_value,p_value_asymptotic,permutations,n_used,dropped_singletons\n";
      for (const auto& name : tr_cols) {
        const auto& v = column(name);
        const Vector c = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
        const RandomAssignmentResult r = random_assignment_test(c, group, cell, nullptr, tr_opt);
        if (!r.note.empty()) std::cerr << name << ": " << r.note << "\n";
        out += name + "," + format_sig6(r.coefficient) + "," + format_sig6(r.se) + "," +
               (r.p_value ? format_sig6(*r.p_value) : "NA") + "," +
               (r.p_value_asymptotic ? format_sig6(*r.p_value_asymptotic) : "NA") + "," +
               std::to_string(r.permutations) + "," + std::to_string(r.n_used) + "," +
               std::to_string(r.dropped_singletons) + "\n";
      }
      const std::string path = out_file(tr_out, "random_assignment.csv");
      fs::create_directories(fs::path(tr_out));
      std::ofstream(path) << out;
      write_provenance(path, "test-random", tr_opt.seed, cfg, {tr_data});
      std::cout << out;
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace endogroup
