#pragma once

#include <functional>
#include <span>
#include <vector>

#include "endogroup/core.hpp"
#include "endogroup/model.hpp"

namespace endogroup {

// Total utilities and qualifications of one market. Ties are broken by lower
// agent index (groups' side) and lower alternative index with the outside
// option first (agents' side).
struct PreferenceProfile {
  Matrix U;   // n x G
  Vector U0;  // n, outside option
  Matrix V;   // n x G

  int n() const { return static_cast<int>(U.rows()); }
  int groups() const { return static_cast<int>(U.cols()); }
  void validate() const;
};

struct MatchingResult {
  IntVector assignment;         // 0 = outside, g in 1..G
  std::vector<Cutoff> cutoffs;  // per group
  std::vector<bool> binding;
  IntVector group_sizes;

  int matched() const;
};

struct BlockingPair {
  int agent;  // 0-based
  int group;  // 1..G; 0 marks an individual-rationality violation
};

struct StabilityReport {
  bool stable = true;
  std::vector<BlockingPair> violations;
};

struct DeterministicUtilities {
  Matrix groups;  // n x G, zeta_g + z_i' delta_u
  Vector outside;  // n, identically zero
};

DeterministicUtilities compute_deterministic_utilities(const CovariatePanel& z, const GFParams& params);

// z_i' delta_v, without the qualification shock.
Matrix compute_qualifications(const CovariatePanel& z, const GFParams& params);

// Individual-proposing deferred acceptance. The outcome does not depend on
// the order in which free agents propose; `proposal_order` exists so that
// property can be tested.
MatchingResult deferred_acceptance(const PreferenceProfile& profile, const IntVector& capacities);
MatchingResult deferred_acceptance(const PreferenceProfile& profile, const IntVector& capacities,
                                   std::span<const int> proposal_order);

// Fills cutoffs, binding flags and group sizes for an arbitrary assignment.
MatchingResult summarize_assignment(const PreferenceProfile& profile, const IntVector& capacities,
                                    IntVector assignment);

StabilityReport check_stability(const PreferenceProfile& profile, const IntVector& capacities,
                                const MatchingResult& result);

// Each agent's choice when facing cutoffs p: the best alternative among the
// outside option and the groups whose cutoff the agent meets.
IntVector choose_under_cutoffs(const PreferenceProfile& profile, const std::vector<Cutoff>& cutoffs);

// Share of the n agents choosing each group under cutoffs p.
Vector realized_demand(const PreferenceProfile& profile, const std::vector<Cutoff>& cutoffs);

using DemandFn = std::function<Vector(const std::vector<Cutoff>&)>;

// D_n(p) - capacities / n.
Vector market_clearing_residual(const std::vector<Cutoff>& cutoffs, const DemandFn& demand,
                                const IntVector& capacities, int n);

}  // namespace endogroup
