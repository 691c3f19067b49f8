#include "endogroup/cli_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace endogroup {

namespace fs = std::filesystem;

std::string format_sig6(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string format_full(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int default_threads() {
  if (const char* s = std::getenv("ENDOGROUP_THREADS")) {
    const int v = std::atoi(s);
    if (v >= 1) return v;
  }
  return 1;
}

// ---------------------------------------------------------------- config

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

bool try_double(const std::string& raw, double& out) {
  const std::string s = trim(raw);
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (*b == '+') ++b;
  const auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e;
}

double to_double(const std::string& key, const std::string& s) {
  double v;
  if (!try_double(s, v)) throw ConfigError("key '" + key + "': expected a number, got '" + s + "'");
  return v;
}

long long to_integer(const std::string& key, const std::string& s) {
  const std::string t = trim(s);
  long long v = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw ConfigError("key '" + key + "': expected an integer, got '" + s + "'");
  return v;
}

int to_int(const std::string& key, const std::string& s) { return static_cast<int>(to_integer(key, s)); }

std::uint64_t to_u64(const std::string& key, const std::string& s) {
  const std::string t = trim(s);
  std::uint64_t v = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + s + "'");
}

std::vector<double> to_dlist(const std::string& key, const std::string& s, int expected = -1) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) out.push_back(to_double(key, part));
  if (expected >= 0 && static_cast<int>(out.size()) != expected)
    throw ConfigError("key '" + key + "': expected " + std::to_string(expected) + " values");
  return out;
}

std::string join_d(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + format_full(v[k]);
  return s;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

struct KeySpec {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define EG_DOUBLE(NAME, FIELD)                                                          \
  KeySpec {                                                                             \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = to_double(NAME, v); },     \
        [](const RunConfig& c) { return format_full(c.FIELD); }                         \
  }
#define EG_INT(NAME, FIELD)                                                             \
  KeySpec {                                                                             \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = to_int(NAME, v); },        \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                      \
  }
#define EG_U64(NAME, FIELD)                                                             \
  KeySpec {                                                                             \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = to_u64(NAME, v); },        \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                      \
  }
#define EG_BOOL(NAME, FIELD)                                                            \
  KeySpec {                                                                             \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = to_bool(NAME, v); },       \
        [](const RunConfig& c) { return bool_str(c.FIELD); }                            \
  }

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      EG_INT("sim.n_pool", sim.n_pool),
      {"sim.capacities",
       [](RunConfig& c, const std::string& v) {
         c.sim.capacities.clear();
         for (const auto& p : split(v, ',')) c.sim.capacities.push_back(to_int("sim.capacities", p));
       },
       [](const RunConfig& c) {
         std::string s;
         for (std::size_t k = 0; k < c.sim.capacities.size(); ++k) s += (k ? "," : "") + std::to_string(c.sim.capacities[k]);
         return s;
       }},
      {"sim.zeta",
       [](RunConfig& c, const std::string& v) {
         const auto d = to_dlist("sim.zeta", v);
         c.sim.zeta = Eigen::Map<const Vector>(d.data(), static_cast<Eigen::Index>(d.size()));
       },
       [](const RunConfig& c) { return join_d(std::vector<double>(c.sim.zeta.data(), c.sim.zeta.data() + c.sim.zeta.size())); }},
      {"sim.delta",
       [](RunConfig& c, const std::string& v) {
         const auto d = to_dlist("sim.delta", v, 4);
         std::copy(d.begin(), d.end(), c.sim.delta.begin());
       },
       [](const RunConfig& c) { return join_d({c.sim.delta.begin(), c.sim.delta.end()}); }},
      {"sim.gamma",
       [](RunConfig& c, const std::string& v) {
         const auto d = to_dlist("sim.gamma", v, 3);
         std::copy(d.begin(), d.end(), c.sim.gamma.begin());
       },
       [](const RunConfig& c) { return join_d({c.sim.gamma.begin(), c.sim.gamma.end()}); }},
      EG_DOUBLE("sim.cov_z2_x", sim.cov_z2_x),
      EG_DOUBLE("sim.x_mean", sim.x_mean),
      EG_DOUBLE("sim.x_var", sim.x_var),
      EG_DOUBLE("sim.z2_mean", sim.z2_mean),
      EG_DOUBLE("sim.z2_var", sim.z2_var),
      EG_DOUBLE("sim.z1_var", sim.z1_var),
      {"sim.adjacency",
       [](RunConfig& c, const std::string& v) {
         try {
           c.sim.adjacency_mode = parse_adjacency_mode(trim(v));
         } catch (const ConfigError&) {
           throw ConfigError("key 'sim.adjacency': expected include, exclude or network, got '" + v + "'");
         }
       },
       [](const RunConfig& c) { return to_string(c.sim.adjacency_mode); }},
      EG_DOUBLE("sim.link_prob", sim.link_prob),
      EG_BOOL("sim.directed_links", sim.directed_links),
      EG_U64("sim.seed", sim.seed),
      EG_INT("gf.draws", gf.draws),
      EG_DOUBLE("gf.kappa", gf.kappa),
      EG_DOUBLE("gf.tol_constraint", gf.tol_constraint),
      EG_DOUBLE("gf.tol_grad", gf.tol_grad),
      EG_INT("gf.max_iter", gf.max_iter),
      EG_U64("gf.seed", gf.seed),
      EG_BOOL("gf.std_errors", gf.std_errors),
      {"gf.gradient",
       [](RunConfig& c, const std::string& v) {
         const std::string t = trim(v);
         if (t == "analytic") {
           c.gf.gradient = GradientMethod::kAnalytic;
         } else if (t == "central") {
           c.gf.gradient = GradientMethod::kCentralDifference;
         } else {
           throw ConfigError("key 'gf.gradient': expected analytic or central, got '" + v + "'");
         }
       },
       [](const RunConfig& c) { return std::string(c.gf.gradient == GradientMethod::kAnalytic ? "analytic" : "central"); }},
      EG_DOUBLE("gf.eta_common_sd", gf.eta.common_sd),
      EG_DOUBLE("gf.eta_idiosyncratic_sd", gf.eta.idiosyncratic_sd),
      EG_INT("peer.basis_order", peer.basis_order),
      EG_BOOL("peer.group_dummies", peer.group_dummies),
      EG_BOOL("peer.demean", peer.demean),
      EG_BOOL("peer.use_true_theta", peer.use_true_theta),
      EG_BOOL("peer.include_wy", peer.include_wy),
      {"peer.estimator",
       [](RunConfig& c, const std::string& v) {
         parse_estimator(trim(v));
         c.peer.estimator = trim(v);
       },
       [](const RunConfig& c) { return c.peer.estimator; }},
      EG_INT("mc.reps", mc.reps),
      EG_U64("mc.seed", mc.seed),
      EG_BOOL("mc.estimate_theta", mc.estimate_theta),
      EG_INT("run.threads", threads),
  };
  return table;
}

#undef EG_DOUBLE
#undef EG_INT
#undef EG_U64
#undef EG_BOOL

const KeySpec& find_key(const std::string& raw) {
  const auto& table = key_table();
  for (const auto& k : table)
    if (k.key == raw) return k;
  if (raw.find('.') == std::string::npos) {
    const KeySpec* hit = nullptr;
    int matches = 0;
    for (const auto& k : table)
      if (k.key.substr(k.key.find('.') + 1) == raw) {
        hit = &k;
        ++matches;
      }
    if (matches == 1) return *hit;
    if (matches > 1) throw ConfigError("ambiguous key '" + raw + "'; qualify it with a section");
  }
  throw ConfigError("unknown configuration key '" + raw + "'");
}

void validate_run(const RunConfig& c) {
  c.sim.validate();
  require(c.gf.draws >= 1, "gf.draws must be at least 1");
  require(c.gf.kappa > 0.0, "gf.kappa must be positive");
  require(c.gf.max_iter >= 1, "gf.max_iter must be at least 1");
  require(c.peer.basis_order == 1 || c.peer.basis_order == 2, "peer.basis_order must be 1 or 2");
  require(c.mc.reps >= 1, "mc.reps must be at least 1");
  require(c.threads >= 1, "run.threads must be at least 1");
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : key_table()) out.push_back(k.key);
  std::sort(out.begin(), out.end());
  return out;
}

RunConfig parse_config(const std::string& text, const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  cfg.threads = default_threads();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'section.key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
    try {
      find_key(key).set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  for (const auto& [k, v] : overrides) find_key(k).set(cfg, v);
  validate_run(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::string dump_config(const RunConfig& config) {
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& k : key_table()) rows.emplace_back(k.key, k.get(config));
  std::sort(rows.begin(), rows.end());
  std::string out;
  for (const auto& [k, v] : rows) out += k + " = " + v + "\n";
  return out;
}

// ---------------------------------------------------------------- csv

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line;  // source line of each row
};

CsvTable parse_csv(const std::string& text, const std::string& what) {
  CsvTable t;
  std::istringstream in(text);
  std::string s;
  int lineno = 0;
  while (std::getline(in, s)) {
    ++lineno;
    if (!s.empty() && s.back() == '\r') s.pop_back();
    if (trim(s).empty()) continue;
    auto cells = split(s, ',');
    for (auto& c : cells) c = trim(c);
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    if (cells.size() != t.header.size())
      throw ConfigError(what + " line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " cells, found " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
    t.line.push_back(lineno);
  }
  if (t.header.empty()) throw ConfigError(what + ": missing header row");
  return t;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << content;
  if (!f) throw IoError("write failed for " + path);
}

int column(const CsvTable& t, const std::string& name, const std::string& what) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw ConfigError(what + ": missing column '" + name + "'");
  return static_cast<int>(it - t.header.begin());
}

double cell_double(const CsvTable& t, std::size_t r, int c, const std::string& what, bool allow_na = false) {
  const std::string& s = t.rows[r][c];
  if (allow_na && s == "NA") return kNaN;
  double v;
  if (!try_double(s, v))
    throw ConfigError(what + " line " + std::to_string(t.line[r]) + ", column '" + t.header[c] +
                      "': not a number ('" + s + "')");
  return v;
}

}  // namespace

Dataset dataset_from_market(const SimulatedMarket& market) {
  Dataset d;
  const auto& f = market.formation;
  const int n = static_cast<int>(f.covariates.x.size());
  d.id.resize(n);
  for (int i = 0; i < n; ++i) d.id[i] = i + 1;
  d.covariates = f.covariates;
  d.group = f.matching.assignment;
  d.y = Vector::Constant(n, kNaN);
  for (std::size_t k = 0; k < market.outcome.matched.size(); ++k)
    d.y[market.outcome.matched[k]] = market.outcome.y[static_cast<Eigen::Index>(k)];
  return d;
}

void write_csv_dataset(const std::string& path, const Dataset& data) {
  const int G = data.groups();
  std::string out = "id,x,z2";
  for (int g = 1; g <= G; ++g) out += ",z1_u_" + std::to_string(g);
  for (int g = 1; g <= G; ++g) out += ",z1_v_" + std::to_string(g);
  out += ",group,y\n";
  for (int i = 0; i < data.n(); ++i) {
    out += std::to_string(data.id[i]) + "," + format_full(data.covariates.x[i]) + "," +
           format_full(data.covariates.z2[i]);
    for (int g = 0; g < G; ++g) out += "," + format_full(data.covariates.z1u(i, g));
    for (int g = 0; g < G; ++g) out += "," + format_full(data.covariates.z1v(i, g));
    out += "," + std::to_string(data.group[i]) + "," + format_full(data.y[i]) + "\n";
  }
  write_file(path, out);
}

Dataset parse_csv_dataset(const std::string& text) {
  const std::string what = "dataset";
  const CsvTable t = parse_csv(text, what);
  int G = 0;
  while (std::find(t.header.begin(), t.header.end(), "z1_u_" + std::to_string(G + 1)) != t.header.end()) ++G;
  if (G == 0) throw ConfigError("dataset: missing column 'z1_u_1'");
  std::set<std::string> known{"id", "x", "z2", "group", "y"};
  std::vector<int> cu(G), cv(G);
  for (int g = 0; g < G; ++g) {
    cu[g] = column(t, "z1_u_" + std::to_string(g + 1), what);
    cv[g] = column(t, "z1_v_" + std::to_string(g + 1), what);
    known.insert("z1_u_" + std::to_string(g + 1));
    known.insert("z1_v_" + std::to_string(g + 1));
  }
  const int cid = column(t, "id", what), cx = column(t, "x", what), cz2 = column(t, "z2", what);
  const int cg = column(t, "group", what), cy = column(t, "y", what);
  Dataset d;
  for (const auto& h : t.header)
    if (!known.count(h)) d.warnings.push_back("ignoring extra column '" + h + "'");
  const int n = static_cast<int>(t.rows.size());
  d.id.resize(n);
  d.group.resize(n);
  d.y.resize(n);
  d.covariates.x.resize(n);
  d.covariates.z2.resize(n);
  d.covariates.z1u.resize(n, G);
  d.covariates.z1v.resize(n, G);
  std::set<int> seen;
  for (int r = 0; r < n; ++r) {
    const double idv = cell_double(t, r, cid, what);
    if (idv != std::floor(idv))
      throw ConfigError(what + " line " + std::to_string(t.line[r]) + ": id must be an integer");
    d.id[r] = static_cast<int>(idv);
    if (!seen.insert(d.id[r]).second)
      throw ConfigError(what + " line " + std::to_string(t.line[r]) + ": duplicate id " + std::to_string(d.id[r]));
    d.covariates.x[r] = cell_double(t, r, cx, what);
    d.covariates.z2[r] = cell_double(t, r, cz2, what);
    for (int g = 0; g < G; ++g) {
      d.covariates.z1u(r, g) = cell_double(t, r, cu[g], what);
      d.covariates.z1v(r, g) = cell_double(t, r, cv[g], what);
    }
    const double gv = cell_double(t, r, cg, what);
    if (gv != std::floor(gv) || gv < 0 || gv > G)
      throw ConfigError(what + " line " + std::to_string(t.line[r]) + ": group " + t.rows[r][cg] + " outside 0.." +
                        std::to_string(G));
    d.group[r] = static_cast<int>(gv);
    d.y[r] = cell_double(t, r, cy, what, true);
  }
  return d;
}

Dataset read_csv_dataset(const std::string& path) { return parse_csv_dataset(slurp(path)); }

std::map<std::string, std::vector<double>> read_numeric_csv(const std::string& path) {
  const CsvTable t = parse_csv(slurp(path), path);
  std::map<std::string, std::vector<double>> out;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    auto& col = out[t.header[c]];
    for (std::size_t r = 0; r < t.rows.size(); ++r) col.push_back(cell_double(t, r, static_cast<int>(c), path));
  }
  return out;
}

void write_network_csv(const std::string& path, const Dataset& data, const OutcomeDraw& outcome) {
  std::string out = "i,j,w\n";
  for (int r = 0; r < outcome.W.n(); ++r)
    outcome.W.for_row(r, [&](int c, double w) {
      out += std::to_string(data.id[outcome.matched[r]]) + "," + std::to_string(data.id[outcome.matched[c]]) + "," +
             format_full(w) + "\n";
    });
  write_file(path, out);
}

AdjacencyMatrix read_network_csv(const std::string& path, const Dataset& data, const IntVector& matched) {
  const std::string what = "network " + path;
  const CsvTable t = parse_csv(slurp(path), what);
  const int ci = column(t, "i", what), cj = column(t, "j", what), cw = column(t, "w", what);
  std::map<int, int> row_of;
  for (std::size_t k = 0; k < matched.size(); ++k) row_of[data.id[matched[k]]] = static_cast<int>(k);
  IntVector group(matched.size());
  for (std::size_t k = 0; k < matched.size(); ++k) group[k] = data.group[matched[k]];
  std::vector<std::vector<std::pair<int, double>>> rows(matched.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const int i = static_cast<int>(cell_double(t, r, ci, what));
    const int j = static_cast<int>(cell_double(t, r, cj, what));
    const double w = cell_double(t, r, cw, what);
    const auto a = row_of.find(i), b = row_of.find(j);
    if (a == row_of.end() || b == row_of.end())
      throw ConfigError(what + " line " + std::to_string(t.line[r]) + ": id not among matched agents");
    rows[a->second].emplace_back(b->second, w);
  }
  return AdjacencyMatrix::FromTriplets(group, AdjacencyMode::kDyadicNetwork, std::move(rows));
}

OutcomeDraw outcome_from_dataset(const Dataset& data, AdjacencyMode mode, const std::string& network_path) {
  OutcomeDraw o;
  for (int i = 0; i < data.n(); ++i)
    if (data.group[i] != kOutside) {
      if (std::isnan(data.y[i]))
        throw ConfigError("dataset id " + std::to_string(data.id[i]) + ": matched agent has y = NA");
      o.matched.push_back(i);
      o.group.push_back(data.group[i]);
    }
  const int m = static_cast<int>(o.matched.size());
  o.x.resize(m);
  o.y.resize(m);
  o.eps = Vector::Constant(m, kNaN);
  for (int k = 0; k < m; ++k) {
    o.x[k] = data.covariates.x[o.matched[k]];
    o.y[k] = data.y[o.matched[k]];
  }
  if (!network_path.empty()) {
    o.W = read_network_csv(network_path, data, o.matched);
  } else {
    require(mode != AdjacencyMode::kDyadicNetwork, "network adjacency needs a network file");
    o.W = build_group_average(o.group, mode == AdjacencyMode::kGroupAvgInclude);
  }
  return o;
}

void write_theta_csv(const std::string& path, const GFParams& params, const CovariatePanel& z,
                     const std::optional<Vector>& std_errors) {
  const ParamLayout layout = ParamLayout::For(z, params.binding_mask());
  const Vector theta = layout.pack(params);
  const auto names = layout.names();
  std::string out = "name,value,std_error\n";
  for (std::size_t k = 0; k < names.size(); ++k)
    out += names[k] + "," + format_full(theta[static_cast<Eigen::Index>(k)]) + "," +
           (std_errors ? format_full((*std_errors)[static_cast<Eigen::Index>(k)]) : "NA") + "\n";
  write_file(path, out);
}

GFParams read_theta_csv(const std::string& path, const CovariatePanel& z) {
  const std::string what = "parameter file " + path;
  const CsvTable t = parse_csv(slurp(path), what);
  const int cn = column(t, "name", what), ce = column(t, "value", what);
  std::map<std::string, double> val;
  for (std::size_t r = 0; r < t.rows.size(); ++r) val[t.rows[r][cn]] = cell_double(t, r, ce, what);
  auto get = [&](const std::string& name) {
    const auto it = val.find(name);
    if (it == val.end()) throw ConfigError(what + ": missing parameter '" + name + "'");
    return it->second;
  };
  GFParams p;
  p.delta_u.resize(z.dim_u());
  p.delta_v.resize(z.dim_v());
  p.zeta.resize(z.groups);
  for (int j = 0; j < z.dim_u(); ++j) p.delta_u[j] = get("delta_u_" + std::to_string(j + 1));
  for (int j = 0; j < z.dim_v(); ++j) p.delta_v[j] = get("delta_v_" + std::to_string(j + 1));
  for (int g = 0; g < z.groups; ++g) p.zeta[g] = get("zeta_" + std::to_string(g + 1));
  for (int g = 0; g < z.groups; ++g) {
    const auto it = val.find("p_" + std::to_string(g + 1));
    p.cutoffs.push_back(it == val.end() ? Cutoff::NegInf() : Cutoff::Finite(it->second));
  }
  return p;
}

void write_mc_tables(const std::string& dir, const StudyResult& result) {
  const std::string header = "design,estimator,parameter,bias,std,rmse,reps,failures\n";
  auto summary = [](const MCReport& r) {
    std::string s;
    for (std::size_t k = 0; k < r.params.size(); ++k) {
      const auto e = static_cast<Eigen::Index>(k);
      s += r.design + "," + r.estimator + "," + r.params[k] + "," + format_sig6(r.bias[e]) + "," +
           format_sig6(r.std[e]) + "," + format_sig6(r.rmse[e]) + "," + std::to_string(r.reps) + "," +
           std::to_string(r.failures) + "\n";
    }
    return s;
  };
  auto raw = [](const MCReport& r) {
    std::string s;
    for (int i = 0; i < r.estimates.rows(); ++i)
      for (std::size_t k = 0; k < r.params.size(); ++k) {
        const auto e = static_cast<Eigen::Index>(k);
        s += r.design + "," + r.estimator + "," + std::to_string(r.rep_ids[i]) + "," + r.params[k] + "," +
             format_full(r.estimates(i, e)) + "," + format_full(r.truth(i, e)) + "," +
             (r.std_errors.rows() > i ? format_full(r.std_errors(i, e)) : std::string("NA")) + "\n";
      }
    return s;
  };
  std::string gamma = header, gamma_raw = "design,estimator,rep,parameter,estimate,truth,std_error\n";
  for (const auto& r : result.gamma) {
    gamma += summary(r);
    gamma_raw += raw(r);
  }
  write_file((fs::path(dir) / "table_gamma.csv").string(), gamma);
  write_file((fs::path(dir) / "raw_gamma.csv").string(), gamma_raw);
  std::string gf = header, gf_raw = "design,estimator,rep,parameter,estimate,truth,std_error\n";
  if (!result.formation.params.empty()) {
    gf += summary(result.formation);
    gf_raw += raw(result.formation);
  }
  write_file((fs::path(dir) / "table_gf.csv").string(), gf);
  write_file((fs::path(dir) / "raw_gf.csv").string(), gf_raw);
}

std::vector<MCReport> read_mc_table(const std::string& path) {
  const std::string what = "table " + path;
  const CsvTable t = parse_csv(slurp(path), what);
  const int cd = column(t, "design", what), ce = column(t, "estimator", what), cp = column(t, "parameter", what);
  const int cb = column(t, "bias", what), cs = column(t, "std", what), cr = column(t, "rmse", what);
  const int cn = column(t, "reps", what), cf = column(t, "failures", what);
  std::vector<MCReport> out;
  std::vector<std::vector<double>> b, s, r;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& row = t.rows[k];
    if (out.empty() || out.back().design != row[cd] || out.back().estimator != row[ce]) {
      MCReport m;
      m.design = row[cd];
      m.estimator = row[ce];
      m.reps = static_cast<int>(cell_double(t, k, cn, what));
      m.failures = static_cast<int>(cell_double(t, k, cf, what));
      out.push_back(m);
      b.emplace_back();
      s.emplace_back();
      r.emplace_back();
    }
    out.back().params.push_back(row[cp]);
    b.back().push_back(cell_double(t, k, cb, what, true));
    s.back().push_back(cell_double(t, k, cs, what, true));
    r.back().push_back(cell_double(t, k, cr, what, true));
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].bias = Eigen::Map<Vector>(b[k].data(), static_cast<Eigen::Index>(b[k].size()));
    out[k].std = Eigen::Map<Vector>(s[k].data(), static_cast<Eigen::Index>(s[k].size()));
    out[k].rmse = Eigen::Map<Vector>(r[k].data(), static_cast<Eigen::Index>(r[k].size()));
  }
  return out;
}

void write_provenance(const std::string& path, const std::string& command, std::uint64_t seed,
                      const RunConfig& config, const std::vector<std::string>& inputs) {
  nlohmann::ordered_json j;
  j["tool"] = "endogroup";
  j["version"] = kVersion;
  j["command"] = command;
  j["output"] = fs::path(path).filename().string();
  j["seed"] = seed;
  j["config_hash"] = fnv1a_hex(dump_config(config));
  j["inputs"] = inputs;
  write_file(path + ".provenance.json", j.dump(2) + "\n");
}

}  // namespace endogroup
