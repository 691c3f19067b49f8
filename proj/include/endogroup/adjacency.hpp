#pragma once

#include <string>
#include <vector>

#include "endogroup/core.hpp"
#include "endogroup/rng.hpp"

namespace endogroup {

enum class AdjacencyMode { kGroupAvgInclude, kGroupAvgExclude, kDyadicNetwork };

std::string to_string(AdjacencyMode m);
AdjacencyMode parse_adjacency_mode(const std::string& s);

// Row-normalised peer weights with group-block structure, stored row-major
// sparse (CSR). Agents with assignment 0 belong to no group and have empty
// rows; agents in a group whose row is empty are listed in `isolated`.
class AdjacencyMatrix {
 public:
  AdjacencyMatrix() = default;

  int n() const { return static_cast<int>(group_of_.size()); }
  AdjacencyMode mode() const { return mode_; }
  const IntVector& group_of() const { return group_of_; }
  const IntVector& isolated() const { return isolated_; }

  double weight(int i, int j) const;
  double row_sum(int i) const;
  double max_entry() const;
  std::size_t nonzeros() const { return cols_.size(); }

  // Visits the stored entries of row i as (j, w_ij).
  template <class F>
  void for_row(int i, F&& f) const {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) f(cols_[k], vals_[k]);
  }

  Vector multiply(const Vector& v) const;
  Matrix multiply(const Matrix& m) const;
  Matrix to_dense() const;

  // Members of each group, indexed 0..G-1 for groups 1..G.
  std::vector<IntVector> blocks() const;

  // Builder used by the constructors below and the CSV reader. Entries must
  // be within-group; rows are normalised by the caller.
  static AdjacencyMatrix FromTriplets(const IntVector& group_of, AdjacencyMode mode,
                                      std::vector<std::vector<std::pair<int, double>>> rows);

 private:
  IntVector group_of_;
  AdjacencyMode mode_ = AdjacencyMode::kGroupAvgExclude;
  std::vector<std::size_t> row_ptr_{0};
  IntVector cols_;
  std::vector<double> vals_;
  IntVector isolated_;
};

AdjacencyMatrix build_group_average(const IntVector& assignment, bool include_self);

// Bernoulli(link_prob) friendships within each group, one independent draw
// per ordered pair (or per unordered pair when `directed` is false); rows
// average over friends, agents without friends get an empty row.
AdjacencyMatrix build_dyadic_network(const IntVector& assignment, double link_prob, Rng& rng, bool directed = true);

enum class EquilibriumMethod { kAuto, kDirect, kNeumann };

// Solves (I - gamma1 W) y = b. Direct solves are done block by block (W is
// block diagonal by group); the Neumann series stops when the increment
// max-norm drops below 1e-12.
Vector solve_social_equilibrium(const AdjacencyMatrix& W, const Vector& b, double gamma1,
                                EquilibriumMethod method = EquilibriumMethod::kAuto);

}  // namespace endogroup
