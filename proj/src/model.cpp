#include "endogroup/model.hpp"

#include <cmath>

namespace endogroup {

void CovariatePanel::validate() const {
  require(n >= 0 && groups >= 1, "covariate panel needs at least one group");
  for (const auto& m : pair_u)
    require(m.rows() == n && m.cols() == groups, "pair-specific utility covariate must be n x G");
  for (const auto& m : pair_v)
    require(m.rows() == n && m.cols() == groups, "pair-specific qualification covariate must be n x G");
  require(individual.rows() == n || (individual.size() == 0 && individual.cols() == 0),
          "individual covariate block must have n rows");
}

std::vector<bool> GFParams::binding_mask() const {
  std::vector<bool> mask(cutoffs.size());
  for (std::size_t g = 0; g < cutoffs.size(); ++g) mask[g] = !cutoffs[g].is_neg_inf();
  return mask;
}

void GFParams::validate_against(const CovariatePanel& z) const {
  z.validate();
  require(delta_u.size() == z.dim_u(),
          "delta_u has " + std::to_string(delta_u.size()) + " entries, covariates need " +
              std::to_string(z.dim_u()));
  require(delta_v.size() == z.dim_v(),
          "delta_v has " + std::to_string(delta_v.size()) + " entries, covariates need " +
              std::to_string(z.dim_v()));
  require(zeta.size() == z.groups, "zeta length must equal the group count");
  require(static_cast<int>(cutoffs.size()) == z.groups, "cutoff vector length must equal the group count");
  require(delta_u.allFinite() && delta_v.allFinite() && zeta.allFinite(), "group-formation parameters must be finite");
}

ParamLayout ParamLayout::For(const CovariatePanel& z, const std::vector<bool>& binding) {
  require(static_cast<int>(binding.size()) == z.groups, "binding mask length must equal the group count");
  ParamLayout l;
  l.n_delta_u = z.dim_u();
  l.n_delta_v = z.dim_v();
  l.groups = z.groups;
  for (int g = 0; g < z.groups; ++g)
    if (binding[g]) l.binding_groups.push_back(g);
  return l;
}

Vector ParamLayout::pack(const GFParams& p) const {
  Vector theta(size());
  theta.head(n_delta_u) = p.delta_u;
  theta.segment(n_delta_u, n_delta_v) = p.delta_v;
  theta.segment(zeta_offset(), groups) = p.zeta;
  for (std::size_t k = 0; k < binding_groups.size(); ++k) {
    const Cutoff& c = p.cutoffs[binding_groups[k]];
    require(c.is_finite(), "binding group " + std::to_string(binding_groups[k] + 1) + " needs a finite cutoff");
    theta[cutoff_offset() + static_cast<int>(k)] = c.value();
  }
  return theta;
}

GFParams ParamLayout::unpack(const Vector& theta) const {
  require(theta.size() == size(), "parameter vector has wrong length");
  GFParams p;
  p.delta_u = theta.head(n_delta_u);
  p.delta_v = theta.segment(n_delta_u, n_delta_v);
  p.zeta = theta.segment(zeta_offset(), groups);
  p.cutoffs.assign(groups, Cutoff::NegInf());
  for (std::size_t k = 0; k < binding_groups.size(); ++k)
    p.cutoffs[binding_groups[k]] = Cutoff::Finite(theta[cutoff_offset() + static_cast<int>(k)]);
  return p;
}

std::vector<std::string> ParamLayout::names() const {
  std::vector<std::string> out;
  for (int j = 0; j < n_delta_u; ++j) out.push_back("delta_u_" + std::to_string(j + 1));
  for (int j = 0; j < n_delta_v; ++j) out.push_back("delta_v_" + std::to_string(j + 1));
  for (int g = 0; g < groups; ++g) out.push_back("zeta_" + std::to_string(g + 1));
  for (int g : binding_groups) out.push_back("p_" + std::to_string(g + 1));
  return out;
}

}  // namespace endogroup
