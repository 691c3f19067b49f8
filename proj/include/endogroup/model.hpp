#pragma once

#include <string>
#include <vector>

#include "endogroup/core.hpp"

namespace endogroup {

// Observed covariates entering group formation. Pair-specific covariates vary
// by (agent, group); individual covariates are shared by all groups. Both the
// utility and the qualification index load on the individual block.
struct CovariatePanel {
  int n = 0;
  int groups = 0;
  std::vector<Matrix> pair_u;  // each n x G
  std::vector<Matrix> pair_v;  // each n x G
  Matrix individual;           // n x k

  int dim_u() const { return static_cast<int>(pair_u.size() + individual.cols()); }
  int dim_v() const { return static_cast<int>(pair_v.size() + individual.cols()); }

  // Throws ConfigError on inconsistent shapes.
  void validate() const;
};

// Group-formation parameters theta = (delta, zeta, p). Slopes are common
// across groups and ordered pair-specific block first, then individual block.
// Group-specific slopes are expressed through pair-specific covariates
// (d_ig = s_i * 1{g = h}).
struct GFParams {
  Vector delta_u;
  Vector delta_v;
  Vector zeta;                  // length G
  std::vector<Cutoff> cutoffs;  // length G; finite <=> binding

  int groups() const { return static_cast<int>(zeta.size()); }
  std::vector<bool> binding_mask() const;
  void validate_against(const CovariatePanel& z) const;
};

// Packs the free parameters (delta_u, delta_v, zeta, binding cutoffs) into a
// flat vector for optimisation and reporting.
struct ParamLayout {
  int n_delta_u = 0;
  int n_delta_v = 0;
  int groups = 0;
  std::vector<int> binding_groups;  // 0-based group indices with a free cutoff

  static ParamLayout For(const CovariatePanel& z, const std::vector<bool>& binding);

  int size() const { return n_delta_u + n_delta_v + groups + static_cast<int>(binding_groups.size()); }
  int zeta_offset() const { return n_delta_u + n_delta_v; }
  int cutoff_offset() const { return zeta_offset() + groups; }

  Vector pack(const GFParams& p) const;
  GFParams unpack(const Vector& theta) const;
  std::vector<std::string> names() const;
};

}  // namespace endogroup
