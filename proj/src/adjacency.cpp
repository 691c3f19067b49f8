#include "endogroup/adjacency.hpp"

#include <algorithm>
#include <cmath>

namespace endogroup {

std::string to_string(AdjacencyMode m) {
  switch (m) {
    case AdjacencyMode::kGroupAvgInclude: return "include";
    case AdjacencyMode::kGroupAvgExclude: return "exclude";
    case AdjacencyMode::kDyadicNetwork: return "network";
  }
  return "?";
}

AdjacencyMode parse_adjacency_mode(const std::string& s) {
  if (s == "include") return AdjacencyMode::kGroupAvgInclude;
  if (s == "exclude") return AdjacencyMode::kGroupAvgExclude;
  if (s == "network") return AdjacencyMode::kDyadicNetwork;
  throw ConfigError("unknown adjacency mode '" + s + "' (expected include, exclude or network)");
}

double AdjacencyMatrix::weight(int i, int j) const {
  auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
  auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
  auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return 0.0;
  return vals_[static_cast<std::size_t>(it - cols_.begin())];
}

double AdjacencyMatrix::row_sum(int i) const {
  double s = 0.0;
  for_row(i, [&](int, double w) { s += w; });
  return s;
}

double AdjacencyMatrix::max_entry() const {
  double m = 0.0;
  for (double v : vals_) m = std::max(m, v);
  return m;
}

Vector AdjacencyMatrix::multiply(const Vector& v) const {
  require(v.size() == n(), "W * v: dimension mismatch");
  Vector out = Vector::Zero(n());
  for (int i = 0; i < n(); ++i) {
    double s = 0.0;
    for_row(i, [&](int j, double w) { s += w * v[j]; });
    out[i] = s;
  }
  return out;
}

Matrix AdjacencyMatrix::multiply(const Matrix& m) const {
  require(m.rows() == n(), "W * M: dimension mismatch");
  Matrix out = Matrix::Zero(n(), m.cols());
  for (int i = 0; i < n(); ++i) for_row(i, [&](int j, double w) { out.row(i) += w * m.row(j); });
  return out;
}

Matrix AdjacencyMatrix::to_dense() const {
  Matrix d = Matrix::Zero(n(), n());
  for (int i = 0; i < n(); ++i) for_row(i, [&](int j, double w) { d(i, j) = w; });
  return d;
}

std::vector<IntVector> AdjacencyMatrix::blocks() const {
  int G = 0;
  for (int g : group_of_) G = std::max(G, g);
  std::vector<IntVector> out(G);
  for (int i = 0; i < n(); ++i)
    if (group_of_[i] > 0) out[group_of_[i] - 1].push_back(i);
  return out;
}

AdjacencyMatrix AdjacencyMatrix::FromTriplets(const IntVector& group_of, AdjacencyMode mode,
                                              std::vector<std::vector<std::pair<int, double>>> rows) {
  require(rows.size() == group_of.size(), "adjacency rows must match the assignment length");
  AdjacencyMatrix W;
  W.group_of_ = group_of;
  W.mode_ = mode;
  const int n = static_cast<int>(group_of.size());
  for (int i = 0; i < n; ++i) {
    auto& row = rows[i];
    std::sort(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      const auto [j, w] = row[k];
      require(j >= 0 && j < n, "adjacency column out of range");
      require(k == 0 || row[k - 1].first != j, "duplicate adjacency entry");
      require(w >= 0.0 && std::isfinite(w), "adjacency weights must be finite and non-negative");
      require(group_of[i] > 0 && group_of[i] == group_of[j], "adjacency entry links agents in different groups");
      if (w == 0.0) continue;
      W.cols_.push_back(j);
      W.vals_.push_back(w);
      sum += w;
    }
    W.row_ptr_.push_back(W.cols_.size());
    if (group_of[i] > 0 && sum == 0.0) W.isolated_.push_back(i);
  }
  return W;
}

AdjacencyMatrix build_group_average(const IntVector& assignment, bool include_self) {
  const int n = static_cast<int>(assignment.size());
  int G = 0;
  for (int g : assignment) {
    require(g >= 0, "assignment codes must be non-negative");
    G = std::max(G, g);
  }
  std::vector<IntVector> members(G);
  for (int i = 0; i < n; ++i)
    if (assignment[i] > 0) members[assignment[i] - 1].push_back(i);
  std::vector<std::vector<std::pair<int, double>>> rows(n);
  for (const auto& grp : members) {
    const auto size = static_cast<double>(grp.size());
    const double denom = include_self ? size : size - 1.0;
    if (denom <= 0.0) continue;
    for (int i : grp)
      for (int j : grp)
        if (include_self || i != j) rows[i].emplace_back(j, 1.0 / denom);
  }
  return AdjacencyMatrix::FromTriplets(
      assignment, include_self ? AdjacencyMode::kGroupAvgInclude : AdjacencyMode::kGroupAvgExclude,
      std::move(rows));
}

AdjacencyMatrix build_dyadic_network(const IntVector& assignment, double link_prob, Rng& rng, bool directed) {
  require(link_prob >= 0.0 && link_prob <= 1.0, "link probability must lie in [0, 1]");
  const int n = static_cast<int>(assignment.size());
  int G = 0;
  for (int g : assignment) G = std::max(G, g);
  std::vector<IntVector> members(G);
  for (int i = 0; i < n; ++i)
    if (assignment[i] > 0) members[assignment[i] - 1].push_back(i);
  std::vector<IntVector> links(n);
  for (const auto& grp : members)
    for (std::size_t a = 0; a < grp.size(); ++a) {
      if (directed) {
        for (std::size_t b = 0; b < grp.size(); ++b)
          if (b != a && rng.bernoulli(link_prob)) links[grp[a]].push_back(grp[b]);
        continue;
      }
      for (std::size_t b = a + 1; b < grp.size(); ++b)
        if (rng.bernoulli(link_prob)) {
          links[grp[a]].push_back(grp[b]);
          links[grp[b]].push_back(grp[a]);
        }
    }
  std::vector<std::vector<std::pair<int, double>>> rows(n);
  for (int i = 0; i < n; ++i) {
    if (links[i].empty()) continue;
    std::sort(links[i].begin(), links[i].end());
    const double w = 1.0 / static_cast<double>(links[i].size());
    for (int j : links[i]) rows[i].emplace_back(j, w);
  }
  return AdjacencyMatrix::FromTriplets(assignment, AdjacencyMode::kDyadicNetwork, std::move(rows));
}

Vector solve_social_equilibrium(const AdjacencyMatrix& W, const Vector& b, double gamma1,
                                EquilibriumMethod method) {
  if (!(std::abs(gamma1) < 1.0)) throw ConfigError("social equilibrium requires |gamma1| < 1");
  require(b.size() == W.n(), "right-hand side length does not match W");
  if (gamma1 == 0.0) return b;
  if (method == EquilibriumMethod::kAuto)
    method = W.n() <= 4000 ? EquilibriumMethod::kDirect : EquilibriumMethod::kNeumann;

  if (method == EquilibriumMethod::kNeumann) {
    Vector y = b;
    Vector term = b;
    for (int k = 0; k < 100000; ++k) {
      term = gamma1 * W.multiply(term);
      y += term;
      if (term.lpNorm<Eigen::Infinity>() < 1e-12) return y;
    }
    throw NumericError("Neumann series for the social equilibrium did not converge");
  }

  Vector y = b;  // rows outside any group have no peers
  for (const IntVector& members : W.blocks()) {
    const int m = static_cast<int>(members.size());
    if (m == 0) continue;
    Matrix A = Matrix::Identity(m, m);
    Vector rhs(m);
    // Position of each global index inside the block.
    for (int a = 0; a < m; ++a) {
      rhs[a] = b[members[a]];
      W.for_row(members[a], [&](int j, double w) {
        const auto it = std::lower_bound(members.begin(), members.end(), j);
        A(a, static_cast<int>(it - members.begin())) -= gamma1 * w;
      });
    }
    const Vector sol = A.partialPivLu().solve(rhs);
    for (int a = 0; a < m; ++a) y[members[a]] = sol[a];
  }
  if (!y.allFinite()) throw NumericError("social equilibrium solve produced non-finite values");
  return y;
}

}  // namespace endogroup
