#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "endogroup/analysis.hpp"
#include "endogroup/gf_estimator.hpp"
#include "endogroup/simulator.hpp"

namespace endogroup {

// File could not be read or written. Exit code 1.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PeerOptions {
  int basis_order = 2;
  bool group_dummies = false;
  bool demean = false;
  bool use_true_theta = false;
  bool include_wy = true;
  std::string estimator = "sieve";
};

struct MCOptions {
  int reps = 200;
  std::uint64_t seed = 20240601;
  bool estimate_theta = true;
};

// Fully resolved run configuration. Keys use the flat form `section.key`.
struct RunConfig {
  SimConfig sim;
  GFOptions gf;
  PeerOptions peer;
  MCOptions mc;
  int threads = 1;
};

// Grammar: one `section.key = value` per line; `#` starts a comment; blank
// lines are ignored; lists are comma separated. Later assignments win.
// Overrides are applied after the file. Unknown keys, malformed lines and
// unparsable values raise ConfigError naming the key or line.
RunConfig parse_config(const std::string& text, const std::vector<std::pair<std::string, std::string>>& overrides = {});
RunConfig load_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Every key with its current value, sorted; parse_config(dump_config(c))
// reproduces c.
std::string dump_config(const RunConfig& config);
std::vector<std::string> config_keys();

// Default thread count from ENDOGROUP_THREADS, else 1.
int default_threads();

// Agent-level dataset. `group` is 0 for unmatched agents, whose y is NaN
// (written as NA).
struct Dataset {
  IntVector id;
  Covariates covariates;
  IntVector group;
  Vector y;
  std::vector<std::string> warnings;

  int n() const { return static_cast<int>(id.size()); }
  int groups() const { return static_cast<int>(covariates.z1u.cols()); }
};

Dataset dataset_from_market(const SimulatedMarket& market);
void write_csv_dataset(const std::string& path, const Dataset& data);
Dataset read_csv_dataset(const std::string& path);
Dataset parse_csv_dataset(const std::string& text);

// Generic numeric CSV, keyed by column name.
std::map<std::string, std::vector<double>> read_numeric_csv(const std::string& path);

// Triplets (i, j, w) over dataset ids.
void write_network_csv(const std::string& path, const Dataset& data, const OutcomeDraw& outcome);
AdjacencyMatrix read_network_csv(const std::string& path, const Dataset& data, const IntVector& matched);

// Outcome sample for matched agents, with W from the network file when
// given, otherwise group averages.
OutcomeDraw outcome_from_dataset(const Dataset& data, AdjacencyMode mode, const std::string& network_path = "");

// Parameter files: name, estimate, std_error.
void write_theta_csv(const std::string& path, const GFParams& params, const CovariatePanel& z,
                     const std::optional<Vector>& std_errors = std::nullopt);
GFParams read_theta_csv(const std::string& path, const CovariatePanel& z);

// Tables: design, estimator, parameter, bias, std, rmse, reps, failures
// (6 significant digits) and per-replication raw estimates (full precision).
void write_mc_tables(const std::string& dir, const StudyResult& result);
std::vector<MCReport> read_mc_table(const std::string& path);

std::string format_sig6(double v);
std::string format_full(double v);

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& text);

// Writes `<path>.provenance.json` with command, seed, config hash and version.
void write_provenance(const std::string& path, const std::string& command, std::uint64_t seed,
                      const RunConfig& config, const std::vector<std::string>& inputs = {});

inline constexpr const char* kVersion = "1.0.0";

// Full command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace endogroup
