#include "endogroup/selection_basis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/QR>

#include "endogroup/matching.hpp"

namespace endogroup {

IndexPanel compute_indices(const CovariatePanel& z, const IntVector& assignment, const GFParams& params) {
  params.validate_against(z);
  require(static_cast<int>(assignment.size()) == z.n, "assignment must have one entry per agent");
  IndexPanel out;
  out.tau = compute_deterministic_utilities(z, params).groups;
  out.iota = compute_qualifications(z, params);
  out.binding = params.binding_mask();
  out.own_group = assignment;
  for (int g = 0; g < z.groups; ++g) {
    if (out.binding[g]) {
      out.iota.col(g).array() -= params.cutoffs[g].value();
    } else {
      out.iota.col(g).setConstant(-std::numeric_limits<double>::infinity());
    }
  }
  for (int i = 0; i < z.n; ++i)
    require(assignment[i] >= 0 && assignment[i] <= z.groups, "assignment out of range for agent " + std::to_string(i));
  return out;
}

IndexPanel select_rows(const IndexPanel& panel, const IntVector& rows) {
  IndexPanel out;
  out.binding = panel.binding;
  out.tau.resize(static_cast<Eigen::Index>(rows.size()), panel.groups());
  out.iota.resize(static_cast<Eigen::Index>(rows.size()), panel.groups());
  out.own_group.resize(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const int i = rows[k];
    require(i >= 0 && i < panel.n(), "row index out of range");
    out.tau.row(static_cast<Eigen::Index>(k)) = panel.tau.row(i);
    out.iota.row(static_cast<Eigen::Index>(k)) = panel.iota.row(i);
    out.own_group[k] = panel.own_group[i];
  }
  return out;
}

std::vector<double> elementary_symmetric_features(std::span<const std::pair<double, double>> alternatives,
                                                  int order) {
  require(order >= 1, "elementary symmetric order must be at least 1");
  // c[i][j]: coefficient of s^i t^j, truncated at total degree `order`.
  std::vector<std::vector<double>> c(order + 1, std::vector<double>(order + 1, 0.0));
  c[0][0] = 1.0;
  for (const auto& [a, b] : alternatives) {
    for (int d = order; d >= 1; --d)
      for (int i = d; i >= 0; --i) {
        const int j = d - i;
        double add = 0.0;
        if (i > 0) add += a * c[i - 1][j];
        if (j > 0) add += b * c[i][j - 1];
        c[i][j] += add;
      }
  }
  std::vector<double> out;
  for (int d = 1; d <= order; ++d) {
    out.push_back(c[d][0]);
    out.push_back(c[0][d]);
    for (int i = d - 1; i >= 1; --i) out.push_back(c[i][d - i]);
  }
  return out;
}

int BasisMatrix::selection_columns() const {
  return static_cast<int>(std::count(dummy_group.begin(), dummy_group.end(), 0));
}

namespace {

struct Term {
  std::string label;
  bool uses_own_iota;
};

// Aggregates for one agent, per type: sum dtau, sum iota and the within-type
// order-2 symmetric sums, all taken over alternatives sorted canonically so
// that relabeling groups reproduces the same floating-point sums.
struct TypeAggregates {
  double s_tau = 0, s_iota = 0, tt = 0, ii = 0, ti = 0;
};

class BasisBuilder {
 public:
  BasisBuilder(const IndexPanel& panel, std::vector<int> type_of, std::vector<bool> qualifying, int order)
      : panel_(panel), type_of_(std::move(type_of)), qual_(std::move(qualifying)), order_(order) {
    T_ = static_cast<int>(qual_.size());
  }

  // Column labels for agents whose own group has type `t`.
  std::vector<std::string> labels(int t) const {
    std::vector<std::string> out;
    const bool own = qual_[t];
    const auto aggs = aggregate_labels();
    if (own) out.push_back("iota_own");
    for (const auto& a : aggs) out.push_back(a);
    if (order_ < 2) return out;
    if (own) {
      out.push_back("iota_own^2");
      for (const auto& a : aggs) out.push_back("iota_own*" + a);
    }
    for (const auto& a : aggs) out.push_back(a + "^2");
    for (std::size_t x = 0; x < aggs.size(); ++x)
      for (std::size_t y = x + 1; y < aggs.size(); ++y) out.push_back(aggs[x] + "*" + aggs[y]);
    for (int u = 0; u < T_; ++u) {
      out.push_back("pairs_dtau_dtau" + suffix(u));
      if (qual_[u]) {
        out.push_back("pairs_iota_iota" + suffix(u));
        out.push_back("pairs_dtau_iota" + suffix(u));
      }
    }
    for (int u = 0; u < T_; ++u)
      for (int v = 0; v < T_; ++v) {
        if (u == v) continue;
        if (u < v) out.push_back("cross_dtau_dtau" + suffix(u) + suffix(v));
        if (qual_[v]) out.push_back("cross_dtau_iota" + suffix(u) + suffix(v));
      }
    return out;
  }

  std::vector<double> row(int i) const {
    const int g = panel_.own_group[i];
    const int t = type_of_[g - 1];
    const double tau_own = panel_.tau(i, g - 1);
    const double iota_own = panel_.binding[g - 1] ? panel_.iota(i, g - 1) : 0.0;
    std::vector<std::vector<std::pair<double, double>>> alts(T_);
    for (int h = 0; h < panel_.groups(); ++h) {
      if (h == g - 1) continue;
      const int u = type_of_[h];
      const double io = (qual_[u] && panel_.binding[h]) ? panel_.iota(i, h) : 0.0;
      alts[u].emplace_back(panel_.tau(i, h) - tau_own, io);
    }
    std::vector<TypeAggregates> agg(T_);
    for (int u = 0; u < T_; ++u) {
      std::sort(alts[u].begin(), alts[u].end());
      const auto f = elementary_symmetric_features(alts[u], std::max(order_, 2));
      agg[u] = {f[0], f[1], f[2], f[3], f[4]};
    }
    std::vector<double> aggs;
    for (int u = 0; u < T_; ++u) aggs.push_back(agg[u].s_tau);
    for (int u = 0; u < T_; ++u)
      if (qual_[u]) aggs.push_back(agg[u].s_iota);

    std::vector<double> out;
    const bool own = qual_[t];
    if (own) out.push_back(iota_own);
    out.insert(out.end(), aggs.begin(), aggs.end());
    if (order_ < 2) return out;
    if (own) {
      out.push_back(iota_own * iota_own);
      for (double a : aggs) out.push_back(iota_own * a);
    }
    for (double a : aggs) out.push_back(a * a);
    for (std::size_t x = 0; x < aggs.size(); ++x)
      for (std::size_t y = x + 1; y < aggs.size(); ++y) out.push_back(aggs[x] * aggs[y]);
    for (int u = 0; u < T_; ++u) {
      out.push_back(agg[u].tt);
      if (qual_[u]) {
        out.push_back(agg[u].ii);
        out.push_back(agg[u].ti);
      }
    }
    for (int u = 0; u < T_; ++u)
      for (int v = 0; v < T_; ++v) {
        if (u == v) continue;
        if (u < v) out.push_back(agg[u].s_tau * agg[v].s_tau);
        if (qual_[v]) out.push_back(agg[u].s_tau * agg[v].s_iota);
      }
    return out;
  }

  int own_type(int i) const { return type_of_[panel_.own_group[i] - 1]; }

 private:
  std::string suffix(int u) const { return T_ == 1 ? "" : "[t" + std::to_string(u + 1) + "]"; }

  std::vector<std::string> aggregate_labels() const {
    std::vector<std::string> out;
    for (int u = 0; u < T_; ++u) out.push_back("sum_dtau" + suffix(u));
    for (int u = 0; u < T_; ++u)
      if (qual_[u]) out.push_back("sum_iota" + suffix(u));
    return out;
  }

  const IndexPanel& panel_;
  std::vector<int> type_of_;
  std::vector<bool> qual_;
  int order_;
  int T_ = 0;
};

BasisMatrix assemble(const IndexPanel& panel, const std::vector<int>& type_of, const std::vector<bool>& qualifying,
                     int order, bool demean, bool include_group_dummies, bool typed) {
  require(order == 1 || order == 2, "basis order must be 1 or 2");
  const int n = panel.n();
  const int G = panel.groups();
  for (int i = 0; i < n; ++i)
    require(panel.own_group[i] >= 1 && panel.own_group[i] <= G,
            "selection basis needs every agent matched (row " + std::to_string(i) + ")");
  const int T = static_cast<int>(qualifying.size());
  BasisBuilder builder(panel, type_of, qualifying, order);

  BasisMatrix out;
  out.order = order;
  std::vector<int> offset(T, 0);
  int total = 0;
  for (int t = 0; t < T; ++t) {
    offset[t] = total;
    auto lab = builder.labels(t);
    for (auto& l : lab) {
      out.column_labels.push_back(T > 1 ? l + "|own=t" + std::to_string(t + 1) : l);
      out.dummy_group.push_back(0);
    }
    total += static_cast<int>(lab.size());
  }
  out.B = Matrix::Zero(n, total + (include_group_dummies ? G : 0));
  for (int i = 0; i < n; ++i) {
    const int t = builder.own_type(i);
    const auto r = builder.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) out.B(i, offset[t] + static_cast<int>(k)) = r[k];
  }
  if (!out.B.leftCols(total).allFinite()) throw NumericError("selection basis contains non-finite values");
  if (demean || include_group_dummies) {
    for (int k = 0; k < total; ++k) {
      // Constant columns demean to exact zero; drop_dependent_columns removes them.
      const double mean = out.B.col(k).mean();
      out.B.col(k).array() -= mean;
      if (out.B.col(k).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, std::abs(mean))) out.B.col(k).setZero();
    }
    out.demeaned = true;
  }
  if (include_group_dummies) {
    for (int g = 1; g <= G; ++g) {
      for (int i = 0; i < n; ++i) out.B(i, total + g - 1) = panel.own_group[i] == g ? 1.0 : 0.0;
      out.column_labels.push_back("group_" + std::to_string(g));
      out.dummy_group.push_back(g);
    }
  }
  if (typed) out.type_partition = type_of;
  drop_dependent_columns(out);
  if (out.K() >= n)
    throw ConfigError("basis has " + std::to_string(out.K()) + " columns for " + std::to_string(n) +
                      " observations; reduce the order");
  return out;
}

}  // namespace

void drop_dependent_columns(BasisMatrix& basis, double tol) {
  const int K = basis.K();
  if (K == 0) return;
  std::vector<int> keep;
  std::vector<int> nonzero;
  for (int k = 0; k < K; ++k) {
    if (basis.B.col(k).cwiseAbs().maxCoeff() == 0.0) {
      basis.warnings.push_back("dropped all-zero column " + basis.column_labels[k]);
    } else {
      nonzero.push_back(k);
    }
  }
  if (!nonzero.empty()) {
    // Greedy left-to-right Gram-Schmidt on unit-norm columns; the earliest
    // column of every dependent set survives.
    Matrix Q(basis.B.rows(), 0);
    for (int k : nonzero) {
      Vector v = basis.B.col(k) / basis.B.col(k).norm();
      Vector r = v;
      if (Q.cols() > 0) {
        r -= Q * (Q.transpose() * r);
        r -= Q * (Q.transpose() * r);
      }
      const double norm = r.norm();
      if (norm > tol) {
        Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
        Q.col(Q.cols() - 1) = r / norm;
        keep.push_back(k);
      } else {
        basis.warnings.push_back("dropped collinear column " + basis.column_labels[k]);
      }
    }
  }
  if (static_cast<int>(keep.size()) == K) return;
  Matrix B(basis.B.rows(), static_cast<Eigen::Index>(keep.size()));
  std::vector<std::string> labels;
  std::vector<int> dummies;
  for (std::size_t c = 0; c < keep.size(); ++c) {
    B.col(static_cast<Eigen::Index>(c)) = basis.B.col(keep[c]);
    labels.push_back(basis.column_labels[keep[c]]);
    dummies.push_back(basis.dummy_group[keep[c]]);
  }
  basis.B = std::move(B);
  basis.column_labels = std::move(labels);
  basis.dummy_group = std::move(dummies);
}

BasisMatrix build_basis(const IndexPanel& panel, int order, bool demean, bool include_group_dummies) {
  const std::vector<int> one_type(panel.groups(), 0);
  const bool any_binding = std::any_of(panel.binding.begin(), panel.binding.end(), [](bool b) { return b; });
  return assemble(panel, one_type, {any_binding}, order, demean, include_group_dummies, false);
}

BasisMatrix build_basis_by_type(const IndexPanel& panel, const std::vector<int>& type_of_group, int order,
                                const std::vector<bool>& qualifying_types, bool demean, bool include_group_dummies) {
  require(static_cast<int>(type_of_group.size()) == panel.groups(), "every group needs a type label");
  require(!qualifying_types.empty(), "at least one group type is required");
  for (int t : type_of_group)
    require(t >= 0 && t < static_cast<int>(qualifying_types.size()), "unknown group type label " + std::to_string(t));
  return assemble(panel, type_of_group, qualifying_types, order, demean, include_group_dummies, true);
}

}  // namespace endogroup
