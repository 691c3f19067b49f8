#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "endogroup/core.hpp"
#include "endogroup/model.hpp"

namespace endogroup {

// Preference indices tau_ig = zeta_g + z'delta_u and qualification indices
// net of the cutoff iota_ig = z'delta_v - p_g. Columns of non-binding
// groups hold -inf in `iota`.
struct IndexPanel {
  Matrix tau;                  // n x G
  Matrix iota;                 // n x G
  std::vector<bool> binding;   // length G
  IntVector own_group;         // length n, 0 = unmatched

  int n() const { return static_cast<int>(tau.rows()); }
  int groups() const { return static_cast<int>(tau.cols()); }
};

IndexPanel compute_indices(const CovariatePanel& z, const IntVector& assignment, const GFParams& params);

// Rows `rows` of the panel, in the given order.
IndexPanel select_rows(const IndexPanel& panel, const IntVector& rows);

// Coefficients of prod_h (1 + a_h s + b_h t) for monomials of total degree
// 1..order. Degree d contributes s^d, t^d, then s^(d-1) t, ..., s t^(d-1).
// For order 2: (sum a, sum b, sum_{h<k} a a, sum_{h<k} b b, sum_{h!=k} a_h b_k).
std::vector<double> elementary_symmetric_features(std::span<const std::pair<double, double>> alternatives,
                                                  int order);

struct BasisMatrix {
  Matrix B;                          // n x K
  std::vector<std::string> column_labels;
  std::vector<int> dummy_group;      // per column: group g >= 1 for dummies, 0 for selection terms
  int order = 0;
  bool demeaned = false;
  std::vector<int> type_partition;   // group -> type label, empty for the single-type basis
  std::vector<std::string> warnings;

  int K() const { return static_cast<int>(B.cols()); }
  int selection_columns() const;
};

// Selection basis from the own-group index, the aggregates of the other
// groups' (tau_h - tau_own, iota_h) and their order-2 products. With
// `include_group_dummies` one indicator per group is appended and the
// selection columns are demeaned.
BasisMatrix build_basis(const IndexPanel& panel, int order, bool demean, bool include_group_dummies);

// Variant for groups partitioned into types: aggregates are formed per
// type and each column is interacted with the own-group type indicator.
// Only types flagged in `qualifying_types` carry iota terms.
BasisMatrix build_basis_by_type(const IndexPanel& panel, const std::vector<int>& type_of_group, int order,
                                const std::vector<bool>& qualifying_types, bool demean = false,
                                bool include_group_dummies = false);

// Removes all-zero columns and columns that are linearly dependent on
// earlier ones (residual norm of the unit-scaled column below `tol`).
void drop_dependent_columns(BasisMatrix& basis, double tol = 1e-10);

}  // namespace endogroup
