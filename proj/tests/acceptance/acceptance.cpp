// One line per acceptance criterion; exit status 0 only when all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "endogroup/analysis.hpp"
#include "endogroup/cli_io.hpp"

using namespace endogroup;
namespace fs = std::filesystem;

namespace {

int failures = 0;

// Mirrors stdout, since ctest only shows the output of failing tests.
std::ofstream& record() {
  static std::ofstream f(fs::path(ENDOGROUP_TEST_DIR) / "acceptance_results.txt");
  return f;
}

void emit(const std::string& text) {
  std::cout << text << std::endl;
  record() << text << std::endl;
}

void line(const std::string& id, bool pass, const std::string& detail) {
  emit((pass ? "PASS " : "FAIL ") + id + "  " + detail);
  if (!pass) ++failures;
}

void info(const std::string& id, const std::string& detail) { emit("INFO " + id + "  " + detail); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

const MCReport& find(const StudyResult& r, const std::string& design, const std::string& estimator) {
  for (const auto& m : r.gamma)
    if (m.design == design && m.estimator == estimator) return m;
  throw std::runtime_error("missing report " + design + "/" + estimator);
}

double bias_of(const MCReport& m, const std::string& param) {
  for (std::size_t k = 0; k < m.params.size(); ++k)
    if (m.params[k] == param) return m.bias[static_cast<Eigen::Index>(k)];
  throw std::runtime_error("missing parameter " + param);
}

int param_index(const MCReport& m, const std::string& param) {
  for (std::size_t k = 0; k < m.params.size(); ++k)
    if (m.params[k] == param) return static_cast<int>(k);
  throw std::runtime_error("missing parameter " + param);
}

double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::string reps_note(const MCReport& m) {
  return "(reps " + std::to_string(m.reps) + ", failed " + std::to_string(m.failures) + ")";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void study_criteria() {
  StudyConfig cfg;
  cfg.designs = standard_designs();
  OutcomeDesign incl;
  incl.label = "endog_group_avg_include";
  incl.spec.gamma = {0.5, 1.0, 1.0};
  incl.spec.mode = AdjacencyMode::kGroupAvgInclude;
  incl.include_wy = true;
  incl.menu = {Estimator::kOLSFE};
  cfg.designs.push_back(incl);
  cfg.reps = 200;
  cfg.threads = default_threads();
  cfg.max_failure_rate = 1.0;

  const auto t0 = std::chrono::steady_clock::now();
  const StudyResult r = run_monte_carlo(cfg);
  info("study", std::to_string(cfg.reps) + " replications, n=2000, estimated formation parameters, " +
                    std::to_string(cfg.threads) + " thread(s), " + fmt(seconds_since(t0)) + " s, " +
                    std::to_string(r.reps_failed) + " replications without a converged formation fit");
  const fs::path out = fs::path(ENDOGROUP_TEST_DIR) / "acceptance_tables";
  fs::create_directories(out);
  write_mc_tables(out.string(), r);

  {
    const auto& s = find(r, "exog_group_avg", "SieveOLS");
    const auto& o = find(r, "exog_group_avg", "OLS");
    const double b2 = bias_of(s, "gamma2"), b3 = bias_of(s, "gamma3"), ob = bias_of(o, "gamma2");
    line("C1a exog group avg, sieve |bias gamma2| <= 0.02", std::abs(b2) <= 0.02, "bias " + fmt(b2) + " " + reps_note(s));
    line("C1b exog group avg, sieve |bias gamma3| <= 0.003", std::abs(b3) <= 0.003, "bias " + fmt(b3));
    line("C1c exog group avg, OLS bias gamma2 in [0.35, 0.55]", ob >= 0.35 && ob <= 0.55, "bias " + fmt(ob));
    const int k = param_index(s, "gamma2");
    if (s.std_errors.rows() > 0)
      info("C1 se calibration", "mean se(gamma2) " + fmt(s.std_errors.col(k).mean()) + " vs MC std " +
                                    fmt(s.std[k]));
  }
  {
    const auto& s = find(r, "exog_network", "SieveOLS");
    const auto& o = find(r, "exog_network", "OLS");
    const double b2 = bias_of(s, "gamma2"), ob = bias_of(o, "gamma2");
    line("C2a exog network, sieve |bias gamma2| <= 0.015", std::abs(b2) <= 0.015, "bias " + fmt(b2) + " " + reps_note(s));
    line("C2b exog network, OLS bias gamma2 in [0.22, 0.37]", ob >= 0.22 && ob <= 0.37, "bias " + fmt(ob));
  }
  {
    const auto& s = find(r, "endog_network", "SieveOLS");
    const auto& o = find(r, "endog_network", "OLS");
    const auto& f = find(r, "endog_network", "OLS+FE");
    const double b1 = bias_of(s, "gamma1"), b2 = bias_of(s, "gamma2");
    const double ob = bias_of(o, "gamma1"), fb = bias_of(f, "gamma1");
    line("C3a endog network, sieve |bias gamma1| <= 0.01", std::abs(b1) <= 0.01, "bias " + fmt(b1) + " " + reps_note(s));
    line("C3b endog network, sieve |bias gamma2| <= 0.03", std::abs(b2) <= 0.03, "bias " + fmt(b2));
    line("C3c endog network, OLS bias gamma1 in [0.10, 0.17]", ob >= 0.10 && ob <= 0.17, "bias " + fmt(ob));
    line("C3d endog network, OLS+FE bias gamma1 in [-1.1, -0.6]", fb >= -1.1 && fb <= -0.6, "bias " + fmt(fb));
  }
  {
    const auto& m = find(r, "endog_group_avg_include", "OLS+FE");
    int flagged = 0, seen = 0;
    for (double c : m.condition_numbers) {
      if (std::isnan(c)) continue;
      ++seen;
      flagged += c > kIllConditionedFlag;
    }
    const double frac = seen ? static_cast<double>(flagged) / seen : 0.0;
    std::ostringstream os;
    os << flagged << "/" << seen << " reps flagged, median condition " << median(m.condition_numbers);
    line("C4 include-self averages + dummies, condition > 1e10 in >= 50% of reps", frac >= 0.5, os.str());
    const auto& x = find(r, "endog_group_avg", "OLS+FE");
    std::ostringstream ox;
    ox << "exclude-self averages + dummies: OLS+FE bias gamma1 " << fmt(bias_of(x, "gamma1")) << ", median condition "
       << median(x.condition_numbers);
    info("C4", ox.str());
  }
  {
    const auto& gf = r.formation;
    double slope = 0.0, cut = 0.0, fe = 0.0, resid = 0.0;
    std::ostringstream os;
    for (std::size_t k = 0; k < gf.params.size(); ++k) {
      const double b = gf.bias[static_cast<Eigen::Index>(k)];
      const auto& name = gf.params[k];
      if (name.starts_with("delta")) slope = std::max(slope, std::abs(b));
      else if (name.starts_with("zeta")) fe = std::max(fe, std::abs(b));
      else cut = std::max(cut, std::abs(b));
      os << name << " " << fmt(b) << "/" << fmt(gf.std[static_cast<Eigen::Index>(k)]) << " ";
    }
    for (double v : r.formation_residual) resid = std::max(resid, v);
    info("C5 bias/std", os.str());
    line("C5a formation slopes max |bias| <= 0.10", slope <= 0.10, "max " + fmt(slope) + " " + reps_note(gf));
    line("C5b formation cutoffs max |bias| <= 0.35", cut <= 0.35, "max " + fmt(cut));
    std::ostringstream rs;
    rs << "max " << resid << " over " << r.formation_residual.size() << " converged reps";
    line("C5c constraint residual < 1e-5 in every converged rep", !r.formation_residual.empty() && resid < 1e-5, rs.str());
    info("C5 fixed effects", "max |bias| " + fmt(fe));
  }
}

void property_criterion() {
  const std::vector<std::string> binaries{"test_matching",       "test_adjacency",      "test_simulator",
                                          "test_optimizer",      "test_gf_estimator",   "test_selection_basis",
                                          "test_peer_estimator", "test_analysis",       "test_cli_io"};
  const fs::path dir(ENDOGROUP_TEST_DIR);
  const fs::path log = dir / "acceptance_properties.log";
  fs::remove(log);
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string failed;
  for (const auto& b : binaries) {
    const std::string cmd = "\"" + (dir / b).string() + "\" --gtest_filter='*Property*' --gtest_brief=1 >> \"" +
                            log.string() + "\" 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      ok = false;
      failed += " " + b;
    }
  }
  const double secs = seconds_since(t0);
  line("C6 property suites pass in < 120 s", ok && secs < 120.0,
       fmt(secs) + " s" + (failed.empty() ? "" : ", failing:" + failed));
}

void random_assignment_criterion() {
  const auto t0 = std::chrono::steady_clock::now();
  const int sims = 500, groups = 10, per_group = 60, cells = 4;
  const int n = groups * per_group;
  int rejected_random = 0, rejected_sorted = 0, skipped = 0;
  for (int s = 0; s < sims; ++s) {
    Rng rng = Rng(20240601).split({7, static_cast<std::uint64_t>(s)});
    Vector c(n);
    IntVector g(n), cell(n), sorted_cell(n);
    for (int i = 0; i < n; ++i) {
      c[i] = rng.normal();
      g[i] = 1 + i / per_group;
      cell[i] = static_cast<int>(rng.uniform() * cells);
    }
    // Sorting: cells are quartiles of a noisy signal of the characteristic.
    for (int gg = 0; gg < groups; ++gg) {
      std::vector<std::pair<double, int>> key;
      for (int i = gg * per_group; i < (gg + 1) * per_group; ++i) key.push_back({c[i] + rng.normal(), i});
      std::sort(key.begin(), key.end());
      for (int k = 0; k < per_group; ++k) sorted_cell[key[k].second] = k * cells / per_group;
    }
    const auto a = random_assignment_test(c, g, cell);
    const auto b = random_assignment_test(c, g, sorted_cell);
    if (!a.p_value || !b.p_value) {
      ++skipped;
      continue;
    }
    rejected_random += *a.p_value < 0.05;
    rejected_sorted += *b.p_value < 0.05;
  }
  const double size = static_cast<double>(rejected_random) / (sims - skipped);
  const double power = static_cast<double>(rejected_sorted) / (sims - skipped);
  const double secs = seconds_since(t0);
  line("C7a random-assignment test size 0.05 +/- 0.02", std::abs(size - 0.05) <= 0.02 && skipped == 0,
       "size " + fmt(size) + " over " + std::to_string(sims - skipped) + " sims");
  line("C7b random-assignment test power >= 0.95 under sorting", power >= 0.95 && skipped == 0,
       "power " + fmt(power));
  line("C7c size/power simulations within 300 s", secs <= 300.0, fmt(secs) + " s");
}

}  // namespace

int main() {
  try {
    property_criterion();
    random_assignment_criterion();
    study_criteria();
  } catch (const std::exception& e) {
    emit(std::string("FAIL acceptance run aborted: ") + e.what());
    return 1;
  }
  emit(failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion line(s) failed");
  return failures == 0 ? 0 : 1;
}
