#include "endogroup/matching.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <queue>

namespace endogroup {

namespace {

// Agent i strictly prefers alternative a to b (0 = outside option).
bool agent_prefers(const PreferenceProfile& p, int i, int a, int b) {
  const double ua = a == kOutside ? p.U0[i] : p.U(i, a - 1);
  const double ub = b == kOutside ? p.U0[i] : p.U(i, b - 1);
  if (ua != ub) return ua > ub;
  return a < b;
}

// Group g (0-based) strictly prefers agent a to agent b.
bool group_prefers(const PreferenceProfile& p, int g, int a, int b) {
  const double va = p.V(a, g);
  const double vb = p.V(b, g);
  if (va != vb) return va > vb;
  return a < b;
}

void check_capacities(const PreferenceProfile& p, const IntVector& capacities) {
  require(static_cast<int>(capacities.size()) == p.groups(),
          "capacity vector length " + std::to_string(capacities.size()) + " does not match " +
              std::to_string(p.groups()) + " groups");
  for (int c : capacities) require(c >= 0, "capacities must be non-negative");
}

}  // namespace

void PreferenceProfile::validate() const {
  require(U.rows() == V.rows() && U.cols() == V.cols(), "U and V must have the same shape");
  require(U0.size() == U.rows(), "outside-option vector must have one entry per agent");
  require(U.allFinite() && V.allFinite() && U0.allFinite(), "utilities and qualifications must be finite");
}

int MatchingResult::matched() const {
  return static_cast<int>(std::count_if(assignment.begin(), assignment.end(), [](int g) { return g != kOutside; }));
}

DeterministicUtilities compute_deterministic_utilities(const CovariatePanel& z, const GFParams& params) {
  params.validate_against(z);
  DeterministicUtilities out;
  out.groups = Matrix::Zero(z.n, z.groups);
  out.outside = Vector::Zero(z.n);
  for (int g = 0; g < z.groups; ++g) out.groups.col(g).setConstant(params.zeta[g]);
  const int np = static_cast<int>(z.pair_u.size());
  for (int j = 0; j < np; ++j) out.groups += params.delta_u[j] * z.pair_u[j];
  for (int k = 0; k < z.individual.cols(); ++k)
    out.groups.colwise() += params.delta_u[np + k] * z.individual.col(k);
  return out;
}

Matrix compute_qualifications(const CovariatePanel& z, const GFParams& params) {
  params.validate_against(z);
  Matrix v = Matrix::Zero(z.n, z.groups);
  const int np = static_cast<int>(z.pair_v.size());
  for (int j = 0; j < np; ++j) v += params.delta_v[j] * z.pair_v[j];
  for (int k = 0; k < z.individual.cols(); ++k) v.colwise() += params.delta_v[np + k] * z.individual.col(k);
  return v;
}

MatchingResult deferred_acceptance(const PreferenceProfile& profile, const IntVector& capacities) {
  IntVector order(profile.n());
  std::iota(order.begin(), order.end(), 0);
  return deferred_acceptance(profile, capacities, order);
}

MatchingResult deferred_acceptance(const PreferenceProfile& profile, const IntVector& capacities,
                                   std::span<const int> proposal_order) {
  profile.validate();
  check_capacities(profile, capacities);
  const int n = profile.n();
  const int G = profile.groups();
  require(static_cast<int>(proposal_order.size()) == n, "proposal order must list every agent once");

  // Acceptable groups in decreasing preference.
  std::vector<IntVector> ranking(n);
  for (int i = 0; i < n; ++i) {
    for (int g = 1; g <= G; ++g)
      if (agent_prefers(profile, i, g, kOutside)) ranking[i].push_back(g);
    std::sort(ranking[i].begin(), ranking[i].end(),
              [&](int a, int b) { return agent_prefers(profile, i, a, b); });
  }

  // Per-group heap of tentatively held agents with the least preferred on top.
  using Held = std::priority_queue<int, std::vector<int>, std::function<bool(int, int)>>;
  std::vector<Held> held;
  held.reserve(G);
  for (int g = 0; g < G; ++g)
    held.emplace_back([&profile, g](int a, int b) { return group_prefers(profile, g, a, b); });

  std::vector<std::size_t> next(n, 0);
  std::deque<int> free_agents(proposal_order.begin(), proposal_order.end());
  while (!free_agents.empty()) {
    const int i = free_agents.front();
    free_agents.pop_front();
    if (next[i] >= ranking[i].size()) continue;  // exhausted: takes the outside option
    const int g = ranking[i][next[i]++] - 1;
    Held& h = held[g];
    if (static_cast<int>(h.size()) < capacities[g]) {
      h.push(i);
    } else if (capacities[g] > 0 && group_prefers(profile, g, i, h.top())) {
      free_agents.push_back(h.top());
      h.pop();
      h.push(i);
    } else {
      free_agents.push_back(i);
    }
  }

  IntVector assignment(n, kOutside);
  for (int g = 0; g < G; ++g) {
    Held& h = held[g];
    while (!h.empty()) {
      assignment[h.top()] = g + 1;
      h.pop();
    }
  }
  return summarize_assignment(profile, capacities, std::move(assignment));
}

MatchingResult summarize_assignment(const PreferenceProfile& profile, const IntVector& capacities,
                                    IntVector assignment) {
  check_capacities(profile, capacities);
  const int G = profile.groups();
  require(static_cast<int>(assignment.size()) == profile.n(), "assignment must have one entry per agent");
  MatchingResult r;
  r.group_sizes.assign(G, 0);
  std::vector<double> lowest(G, std::numeric_limits<double>::infinity());
  for (int i = 0; i < profile.n(); ++i) {
    const int g = assignment[i];
    require(g >= 0 && g <= G, "assignment code out of range for agent " + std::to_string(i));
    if (g == kOutside) continue;
    ++r.group_sizes[g - 1];
    lowest[g - 1] = std::min(lowest[g - 1], profile.V(i, g - 1));
  }
  r.binding.resize(G);
  r.cutoffs.assign(G, Cutoff::NegInf());
  for (int g = 0; g < G; ++g) {
    r.binding[g] = r.group_sizes[g] == capacities[g];
    if (!r.binding[g]) continue;
    r.cutoffs[g] = capacities[g] == 0 ? Cutoff::PosInf() : Cutoff::Finite(lowest[g]);
  }
  r.assignment = std::move(assignment);
  return r;
}

StabilityReport check_stability(const PreferenceProfile& profile, const IntVector& capacities,
                                const MatchingResult& result) {
  check_capacities(profile, capacities);
  const int n = profile.n();
  const int G = profile.groups();
  require(static_cast<int>(result.assignment.size()) == n && static_cast<int>(result.cutoffs.size()) == G &&
              static_cast<int>(result.group_sizes.size()) == G,
          "matching result dimensions do not match the profile");
  StabilityReport rep;
  auto flag = [&](int i, int g) {
    rep.stable = false;
    rep.violations.push_back({i, g});
  };
  for (int g = 0; g < G; ++g)
    if (result.group_sizes[g] > capacities[g]) flag(-1, g + 1);

  for (int i = 0; i < n; ++i) {
    const int cur = result.assignment[i];
    if (cur != kOutside) {
      if (!result.cutoffs[cur - 1].admits(profile.V(i, cur - 1))) flag(i, cur);
      if (agent_prefers(profile, i, kOutside, cur)) flag(i, kOutside);
    }
    for (int g = 1; g <= G; ++g) {
      if (g == cur || !agent_prefers(profile, i, g, cur)) continue;
      const bool vacancy = result.group_sizes[g - 1] < capacities[g - 1];
      if (vacancy || result.cutoffs[g - 1].strictly_below(profile.V(i, g - 1))) flag(i, g);
    }
  }
  return rep;
}

IntVector choose_under_cutoffs(const PreferenceProfile& profile, const std::vector<Cutoff>& cutoffs) {
  profile.validate();
  const int G = profile.groups();
  require(static_cast<int>(cutoffs.size()) == G, "cutoff vector length must equal the group count");
  IntVector choice(profile.n(), kOutside);
  for (int i = 0; i < profile.n(); ++i) {
    int best = kOutside;
    for (int g = 1; g <= G; ++g)
      if (cutoffs[g - 1].admits(profile.V(i, g - 1)) && agent_prefers(profile, i, g, best)) best = g;
    choice[i] = best;
  }
  return choice;
}

Vector realized_demand(const PreferenceProfile& profile, const std::vector<Cutoff>& cutoffs) {
  const IntVector choice = choose_under_cutoffs(profile, cutoffs);
  Vector d = Vector::Zero(profile.groups());
  for (int g : choice)
    if (g != kOutside) d[g - 1] += 1.0;
  if (profile.n() > 0) d /= static_cast<double>(profile.n());
  return d;
}

Vector market_clearing_residual(const std::vector<Cutoff>& cutoffs, const DemandFn& demand,
                                const IntVector& capacities, int n) {
  require(n > 0, "market size must be positive");
  require(capacities.size() == cutoffs.size(), "capacities and cutoffs must have the same length");
  Vector d = demand(cutoffs);
  require(d.size() == static_cast<int>(capacities.size()), "demand function returned the wrong length");
  for (std::size_t g = 0; g < capacities.size(); ++g) d[g] -= static_cast<double>(capacities[g]) / n;
  return d;
}

}  // namespace endogroup
