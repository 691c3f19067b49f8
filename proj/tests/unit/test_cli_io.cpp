#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "endogroup/cli_io.hpp"

using namespace endogroup;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("endogroup_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "endogroup");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  return run_cli(static_cast<int>(args.size()), argv.data());
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST(CliIo, EmptyConfigGivesDefaults) {
  const RunConfig c = parse_config("");
  const RunConfig d;
  EXPECT_EQ(dump_config(c), dump_config(d));
  EXPECT_EQ(c.sim.n_pool, 2000);
  EXPECT_EQ(c.sim.capacities, (IntVector{280, 340, 200, 460, 400}));
  EXPECT_EQ(c.gf.draws, 300);
  EXPECT_EQ(c.gf.kappa, 0.05);
  EXPECT_EQ(c.mc.reps, 200);
}

TEST(CliIo, FileValuesAndOverrides) {
  const std::string text = "# comment\n\nsim.n_pool = 500   # trailing\nsim.capacities = 50, 60\nsim.zeta = 1,0\n"
                           "gf.kappa=0.1\npeer.estimator = sieve-fe\n";
  const RunConfig c = parse_config(text, {{"sim.n_pool", "700"}, {"mc.reps", "12"}});
  EXPECT_EQ(c.sim.n_pool, 700);
  EXPECT_EQ(c.sim.capacities, (IntVector{50, 60}));
  EXPECT_EQ(c.gf.kappa, 0.1);
  EXPECT_EQ(c.mc.reps, 12);
  EXPECT_EQ(c.peer.estimator, "sieve-fe");
}

TEST(CliIo, ConfigErrorsNameLineOrKey) {
  EXPECT_NE(config_error("sim.n_pool = 10\n\nthis line is wrong\n").find("line 3"), std::string::npos);
  EXPECT_NE(config_error("sim.bogus = 1\n").find("sim.bogus"), std::string::npos);
  EXPECT_NE(config_error("gf.kappa = fast\n").find("gf.kappa"), std::string::npos);
  EXPECT_FALSE(config_error("gf.kappa = -1\n").empty());
  EXPECT_FALSE(config_error("sim.capacities = 1,2\n").empty());  // zeta length mismatch
}

TEST(CliIo, DumpParseRoundTrip) {
  RunConfig c = parse_config("gf.kappa = 0.0123456789012345\nsim.link_prob = 0.3\nsim.adjacency = network\n");
  const std::string once = dump_config(c);
  EXPECT_EQ(dump_config(parse_config(once)), once);
  for (const auto& k : config_keys()) EXPECT_NE(once.find(k + " = "), std::string::npos) << k;
}

TEST(CliIo, ThreadsFromEnvironment) {
  ::setenv("ENDOGROUP_THREADS", "3", 1);
  EXPECT_EQ(default_threads(), 3);
  ::unsetenv("ENDOGROUP_THREADS");
  EXPECT_EQ(default_threads(), 1);
}

TEST(CliIo, DatasetRoundTripIsBitwise) {
  const auto dir = fresh_dir("dataset");
  SimConfig c;
  c.n_pool = 200;
  c.capacities = {30, 30, 30, 30, 30};
  const auto d = dataset_from_market(simulate_market(c, Rng(3)));
  write_csv_dataset((dir / "d.csv").string(), d);
  const auto e = read_csv_dataset((dir / "d.csv").string());
  ASSERT_EQ(e.n(), d.n());
  ASSERT_EQ(e.groups(), 5);
  EXPECT_EQ(e.id, d.id);
  EXPECT_EQ(e.group, d.group);
  int na = 0;
  for (int i = 0; i < d.n(); ++i) {
    EXPECT_TRUE(same_bits(e.covariates.x[i], d.covariates.x[i]));
    EXPECT_TRUE(same_bits(e.covariates.z2[i], d.covariates.z2[i]));
    for (int g = 0; g < 5; ++g) {
      EXPECT_TRUE(same_bits(e.covariates.z1u(i, g), d.covariates.z1u(i, g)));
      EXPECT_TRUE(same_bits(e.covariates.z1v(i, g), d.covariates.z1v(i, g)));
    }
    if (d.group[i] == 0) {
      EXPECT_TRUE(std::isnan(e.y[i]));
      ++na;
    } else {
      EXPECT_TRUE(same_bits(e.y[i], d.y[i]));
    }
  }
  EXPECT_EQ(na, 50);
  write_csv_dataset((dir / "e.csv").string(), e);
  EXPECT_EQ(slurp(dir / "d.csv"), slurp(dir / "e.csv"));
}

TEST(CliIo, DatasetErrors) {
  const std::string header = "id,x,z2,z1_u_1,z1_u_2,z1_v_1,z1_v_2,group,y\n";
  EXPECT_NO_THROW(parse_csv_dataset(header + "1,0,0,0,0,0,0,2,1.5\n2,0,0,0,0,0,0,0,NA\n"));
  EXPECT_THROW(parse_csv_dataset(header + "1,0,0,0,0,0,0,7,1.5\n"), ConfigError);
  EXPECT_THROW(parse_csv_dataset(header + "1,0,0,0,0,0,0,1,1.5\n1,0,0,0,0,0,0,1,1\n"), ConfigError);
  try {
    parse_csv_dataset(header + "1,0,0,0,0,0,0,1,1\n2,0,abc,0,0,0,0,1,1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_csv_dataset("id,x,z2,group,y\n1,0,0,0,NA\n"), ConfigError);
  const auto extra = parse_csv_dataset("id,x,z2,z1_u_1,z1_v_1,group,y,note\n1,0,0,0,0,1,2,7\n");
  EXPECT_FALSE(extra.warnings.empty());
  EXPECT_THROW(read_csv_dataset("/nonexistent/d.csv"), IoError);
}

TEST(CliIo, NetworkAndThetaRoundTrip) {
  const auto dir = fresh_dir("network");
  SimConfig c;
  c.n_pool = 200;
  c.capacities = {30, 30, 30, 30, 30};
  c.adjacency_mode = AdjacencyMode::kDyadicNetwork;
  const auto m = simulate_market(c, Rng(4));
  const auto d = dataset_from_market(m);
  write_network_csv((dir / "n.csv").string(), d, m.outcome);
  const auto W = read_network_csv((dir / "n.csv").string(), d, m.outcome.matched);
  EXPECT_LT((W.to_dense() - m.outcome.W.to_dense()).cwiseAbs().maxCoeff(), 1e-15);

  const auto z = to_panel(m.formation.covariates);
  const auto p = true_params(c, m.formation.matching.cutoffs);
  write_theta_csv((dir / "t.csv").string(), p, z);
  const auto q = read_theta_csv((dir / "t.csv").string(), z);
  EXPECT_EQ(q.delta_u, p.delta_u);
  EXPECT_EQ(q.delta_v, p.delta_v);
  EXPECT_EQ(q.zeta, p.zeta);
  ASSERT_EQ(q.cutoffs.size(), p.cutoffs.size());
  for (std::size_t g = 0; g < p.cutoffs.size(); ++g) EXPECT_TRUE(q.cutoffs[g] == p.cutoffs[g]);
}

TEST(CliIo, McTableRoundTripAndEmptyReport) {
  const auto dir = fresh_dir("tables");
  StudyResult empty;
  write_mc_tables(dir.string(), empty);
  EXPECT_EQ(slurp(dir / "table_gamma.csv"), "design,estimator,parameter,bias,std,rmse,reps,failures\n");
  EXPECT_TRUE(read_mc_table((dir / "table_gamma.csv").string()).empty());

  StudyResult r;
  MCReport m;
  m.design = "exog_group_avg";
  m.estimator = "SieveOLS";
  m.params = {"Wx", "x"};
  m.reps = 3;
  m.rep_ids = {0, 1, 2};
  m.estimates = (Matrix(3, 2) << 1.1, 0.9, 0.95, 1.02, 1.3, 1.0).finished();
  m.truth = Matrix::Ones(3, 2);
  m.summarize();
  r.gamma.push_back(m);
  write_mc_tables(dir.string(), r);
  const auto back = read_mc_table((dir / "table_gamma.csv").string());
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].design, m.design);
  EXPECT_EQ(back[0].params, m.params);
  EXPECT_EQ(back[0].reps, 3);
  for (int k = 0; k < 2; ++k) {
    EXPECT_NEAR(back[0].bias[k], m.bias[k], 5e-6 * std::abs(m.bias[k]));
    EXPECT_NEAR(back[0].rmse[k], m.rmse[k], 5e-6 * m.rmse[k]);
  }
}

TEST(CliIo, Formatting) {
  EXPECT_EQ(format_sig6(kNaN), "NA");
  EXPECT_EQ(format_sig6(0.123456789), "0.123457");
  EXPECT_EQ(std::stod(format_full(0.1)), 0.1);
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST(CliIo, SimulateIsByteReproducible) {
  const auto a = fresh_dir("sim_a"), b = fresh_dir("sim_b");
  ASSERT_EQ(run({"simulate", "--out", a.string(), "--adjacency", "network", "--seed", "9"}), 0);
  ASSERT_EQ(run({"simulate", "--out", b.string(), "--adjacency", "network", "--seed", "9"}), 0);
  for (const char* f : {"agents.csv", "truth.csv", "network.csv", "agents.csv.provenance.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_NE(slurp(a / "agents.csv.provenance.json").find("\"seed\": 9"), std::string::npos);
  const std::string truth = slurp(a / "truth.csv");
  EXPECT_TRUE(truth.starts_with("name,value,std_error\n"));
  EXPECT_NE(truth.find("\ngamma1,0,NA\ngamma2,1,NA\ngamma3,1,NA\n"), std::string::npos);
}

TEST(CliIo, EndToEndPeerEstimate) {
  const auto d = fresh_dir("peer");
  ASSERT_EQ(run({"simulate", "--out", d.string(), "--set", "sim.n_pool=600", "--set",
                 "sim.capacities=84,102,60,138,120"}),
            0);
  ASSERT_EQ(run({"estimate-peer", "--data", (d / "agents.csv").string(), "--use-true-theta", "--no-wy", "--out",
                 d.string()}),
            0);
  std::istringstream est(slurp(d / "peer_estimate.csv"));
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(est, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_TRUE(rows[1].starts_with("Wx,"));
  EXPECT_TRUE(rows[2].starts_with("x,"));
  EXPECT_TRUE(fs::exists(d / "peer_basis.csv"));
}

TEST(CliIo, ExitCodes) {
  const auto d = fresh_dir("exit");
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_EQ(run({"no-such-command"}), 1);
  EXPECT_EQ(run({"simulate", "--out", d.string(), "--set", "sim.bogus=1"}), 1);
  EXPECT_EQ(run({"estimate-gf", "--data", (d / "missing.csv").string()}), 1);
  spit(d / "bad.cfg", "sim.n_pool 12\n");
  EXPECT_EQ(run({"--config", (d / "bad.cfg").string(), "simulate", "--out", d.string()}), 1);
  ASSERT_EQ(run({"simulate", "--out", d.string(), "--set", "sim.n_pool=300", "--set",
                 "sim.capacities=42,51,30,69,60"}),
            0);
  // An iteration budget of one cannot converge.
  EXPECT_EQ(run({"estimate-gf", "--data", (d / "agents.csv").string(), "--out", d.string(), "--draws", "10",
                 "--set", "gf.max_iter=1"}),
            2);
  EXPECT_TRUE(fs::exists(d / "gf_estimate.csv"));
  EXPECT_EQ(run({"estimate-gf", "--data", (d / "agents.csv").string(), "--out", d.string(), "--draws", "10",
                 "--max-iter", "1", "--kappa", "0.1", "--seed", "3"}),
            2);
  EXPECT_EQ(run({"estimate-gf", "--data", (d / "agents.csv").string(), "--kappa", "0"}), 1);
  EXPECT_EQ(slurp(d / "gf_estimate.csv").substr(0, 22), "name,value,std_error\nd");
}
