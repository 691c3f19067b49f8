#include "endogroup/gf_estimator.hpp"

#include "endogroup/matching.hpp"

#include <algorithm>
#include <cmath>

namespace endogroup {

void GFDataset::validate() const {
  z.validate();
  require(static_cast<int>(choice.size()) == z.n, "choice vector must have one entry per agent");
  require(static_cast<int>(capacities.size()) == z.groups, "capacities must have one entry per group");
  require(static_cast<int>(binding.size()) == z.groups, "binding mask must have one entry per group");
  for (std::size_t i = 0; i < choice.size(); ++i)
    require(choice[i] >= 0 && choice[i] <= z.groups, "choice of agent " + std::to_string(i) + " out of range");
}

DrawSet DrawSet::Generate(int n, int R, int G, const EtaDistribution& dist, Rng& rng) {
  require(n >= 0 && R >= 1 && G >= 1, "draw set needs R >= 1 and at least one group");
  DrawSet d(n, R, G);
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < R; ++r) {
      const double common = dist.common_sd * rng.normal();
      for (int g = 0; g < G; ++g) d(i, r, g) = common + dist.idiosyncratic_sd * rng.normal();
    }
  return d;
}

namespace {

// Per-agent kernel of the smoothed accept-reject simulator. Accumulates the
// draw-averaged probabilities and, when requested, the draw averages needed
// for analytic derivatives:
//   qq(k, g) = E_r[q_k q_g],  qt(k, g) = E_r[q_k q_g t_g],  dq(k) = E_r[q_k t_k]
// with t_g = (1 - s_g) / kappa the derivative of log s_g w.r.t. -p_g.
class AgentKernel {
 public:
  AgentKernel(int G, bool want_grad) : G_(G), grad_(want_grad), a_(G), vdet_(G), s_(G), num_(G), t_(G), q_(G + 1) {
    sigma_.resize(G + 1);
    if (grad_) {
      qq_.resize(G + 1, G);
      qt_.resize(G + 1, G);
      dq_.resize(G + 1);
    }
  }

  void run(const double* eta, int R, const Vector& cut, const std::vector<char>& bind, double inv_kappa) {
    const double amax = std::max(0.0, a_.maxCoeff());
    Vector A(G_);
    for (int g = 0; g < G_; ++g) A[g] = std::exp(a_[g] - amax);
    const double base0 = std::exp(-amax);
    sigma_.setZero();
    if (grad_) {
      qq_.setZero();
      qt_.setZero();
      dq_.setZero();
    }
    for (int r = 0; r < R; ++r, eta += G_) {
      double den = base0;
      for (int g = 0; g < G_; ++g) {
        double s = 1.0, om = 0.0;
        if (bind[g]) {
          const double c = (cut[g] - vdet_[g] - eta[g]) * inv_kappa;
          if (c > 0.0) {
            const double e = std::exp(-c);
            s = e / (1.0 + e);
            om = 1.0 / (1.0 + e);
          } else {
            const double e = std::exp(c);
            s = 1.0 / (1.0 + e);
            om = e / (1.0 + e);
          }
        }
        num_[g] = A[g] * s;
        t_[g] = om * inv_kappa;
        den += num_[g];
      }
      if (!(den > 0.0) || !std::isfinite(den)) {
        q_.setZero();
        q_[0] = 1.0;
      } else {
        const double inv = 1.0 / den;
        q_[0] = base0 * inv;
        for (int g = 0; g < G_; ++g) q_[g + 1] = num_[g] * inv;
      }
      sigma_ += q_;
      if (!grad_) continue;
      for (int g = 0; g < G_; ++g) {
        const double qg = q_[g + 1];
        const double qgt = qg * t_[g];
        dq_[g + 1] += qgt;
        for (int k = 0; k <= G_; ++k) {
          qq_(k, g) += q_[k] * qg;
          qt_(k, g) += q_[k] * qgt;
        }
      }
    }
    const double invR = 1.0 / R;
    sigma_ *= invR;
    if (grad_) {
      qq_ *= invR;
      qt_ *= invR;
      dq_ *= invR;
    }
  }

  // d sigma_k / d theta for the packed layout.
  void derivative(int k, int i, const CovariatePanel& z, const ParamLayout& L, Eigen::Ref<Vector> out) const {
    out.setZero();
    const int npu = static_cast<int>(z.pair_u.size());
    const int npv = static_cast<int>(z.pair_v.size());
    const int nind = static_cast<int>(z.individual.cols());
    const double own_sigma = k >= 1 ? sigma_[k] : 0.0;
    const double own_dq = k >= 1 ? dq_[k] : 0.0;
    const double qq_sum = qq_.row(k).sum();
    const double qt_sum = qt_.row(k).sum();
    for (int j = 0; j < npu; ++j) {
      double v = k >= 1 ? z.pair_u[j](i, k - 1) * own_sigma : 0.0;
      for (int g = 0; g < G_; ++g) v -= z.pair_u[j](i, g) * qq_(k, g);
      out[j] = v;
    }
    for (int m = 0; m < nind; ++m) out[npu + m] = z.individual(i, m) * (own_sigma - qq_sum);
    const int ov = L.n_delta_u;
    for (int j = 0; j < npv; ++j) {
      double v = k >= 1 ? z.pair_v[j](i, k - 1) * own_dq : 0.0;
      for (int g = 0; g < G_; ++g) v -= z.pair_v[j](i, g) * qt_(k, g);
      out[ov + j] = v;
    }
    for (int m = 0; m < nind; ++m) out[ov + npv + m] = z.individual(i, m) * (own_dq - qt_sum);
    const int oz = L.zeta_offset();
    for (int g = 0; g < G_; ++g) out[oz + g] = (k == g + 1 ? sigma_[k] : 0.0) - qq_(k, g);
    const int oc = L.cutoff_offset();
    for (std::size_t b = 0; b < L.binding_groups.size(); ++b) {
      const int g = L.binding_groups[b];
      out[oc + static_cast<int>(b)] = -((k == g + 1 ? dq_[k] : 0.0) - qt_(k, g));
    }
  }

  Vector& a() { return a_; }
  Vector& vdet() { return vdet_; }
  const Vector& sigma() const { return sigma_; }

 private:
  int G_;
  bool grad_;
  Vector a_, vdet_, s_, num_, t_, q_, sigma_, dq_;
  Matrix qq_, qt_;
};

struct Prepared {
  Matrix utility;  // n x G deterministic utilities incl. zeta
  Matrix qual;     // n x G deterministic qualifications
  Vector cut;      // G, finite cutoffs (unused for non-binding)
  std::vector<char> bind;
};

Prepared prepare(const GFParams& params, const CovariatePanel& z, const DrawSet& draws, double kappa) {
  if (!(kappa > 0.0)) throw ConfigError("smoothing bandwidth kappa must be positive");
  params.validate_against(z);
  require(draws.n() == z.n && draws.groups() == z.groups, "draw set does not match the data dimensions");
  require(draws.draws() >= 1, "at least one simulation draw is required");
  Prepared p;
  p.utility = compute_deterministic_utilities(z, params).groups;
  p.qual = compute_qualifications(z, params);
  p.cut = Vector::Zero(z.groups);
  p.bind.assign(z.groups, 0);
  for (int g = 0; g < z.groups; ++g) {
    const Cutoff& c = params.cutoffs[g];
    require(!c.is_pos_inf(), "smoothed simulator does not support +inf cutoffs");
    if (c.is_finite()) {
      p.bind[g] = 1;
      p.cut[g] = c.value();
    }
  }
  return p;
}

GFEvaluation evaluate_analytic(const ParamLayout& layout, const Vector& theta, const GFDataset& data,
                               const DrawSet& draws, double kappa, bool per_agent) {
  const GFParams params = layout.unpack(theta);
  const Prepared prep = prepare(params, data.z, draws, kappa);
  const int n = data.n();
  const int G = data.groups();
  const int P = layout.size();
  GFEvaluation ev;
  ev.grad = Vector::Zero(P);
  ev.demand = Vector::Zero(G);
  ev.demand_jac = Matrix::Zero(G, P);
  if (per_agent) {
    ev.scores = Matrix::Zero(n, P);
    ev.agent_probs = Matrix::Zero(n, G);
  }
  AgentKernel kernel(G, true);
  Vector d(P);
  const double inv_kappa = 1.0 / kappa;
  for (int i = 0; i < n; ++i) {
    kernel.a() = prep.utility.row(i).transpose();
    kernel.vdet() = prep.qual.row(i).transpose();
    kernel.run(draws.agent(i), draws.draws(), prep.cut, prep.bind, inv_kappa);
    const Vector& sigma = kernel.sigma();
    const int k = data.choice[i];
    const double pk = sigma[k];
    if (!std::isfinite(pk)) throw NumericError("simulated probability is not finite for agent " + std::to_string(i));
    ev.loglik += std::log(std::max(pk, kProbabilityFloor));
    if (pk > kProbabilityFloor) {
      kernel.derivative(k, i, data.z, layout, d);
      d /= pk;
      ev.grad += d;
      if (per_agent) ev.scores.row(i) = d.transpose();
    }
    for (int g = 1; g <= G; ++g) {
      ev.demand[g - 1] += sigma[g];
      kernel.derivative(g, i, data.z, layout, d);
      ev.demand_jac.row(g - 1) += d.transpose();
      if (per_agent) ev.agent_probs(i, g - 1) = sigma[g];
    }
  }
  if (n > 0) {
    ev.demand /= n;
    ev.demand_jac /= n;
  }
  return ev;
}

Vector demand_only(const GFParams& params, const GFDataset& data, const DrawSet& draws, double kappa,
                   double& loglik) {
  const Matrix probs = smoothed_choice_probs(params, data.z, draws, kappa);
  loglik = 0.0;
  for (int i = 0; i < data.n(); ++i) loglik += std::log(std::max(probs(i, data.choice[i]), kProbabilityFloor));
  Vector d = probs.rightCols(data.groups()).colwise().mean().transpose();
  return d;
}

}  // namespace

Matrix smoothed_choice_probs(const GFParams& params, const CovariatePanel& z, const DrawSet& draws, double kappa) {
  const Prepared prep = prepare(params, z, draws, kappa);
  Matrix out(z.n, z.groups + 1);
  AgentKernel kernel(z.groups, false);
  for (int i = 0; i < z.n; ++i) {
    kernel.a() = prep.utility.row(i).transpose();
    kernel.vdet() = prep.qual.row(i).transpose();
    kernel.run(draws.agent(i), draws.draws(), prep.cut, prep.bind, 1.0 / kappa);
    out.row(i) = kernel.sigma().transpose();
  }
  return out;
}

double simulated_loglik(const GFParams& params, const GFDataset& data, const DrawSet& draws, double kappa) {
  data.validate();
  const Matrix probs = smoothed_choice_probs(params, data.z, draws, kappa);
  double ll = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    const double p = probs(i, data.choice[i]);
    if (!std::isfinite(p)) throw NumericError("simulated probability is not finite for agent " + std::to_string(i));
    ll += std::log(std::max(p, kProbabilityFloor));
  }
  if (!std::isfinite(ll)) throw NumericError("simulated log-likelihood is not finite");
  return ll;
}

GFEvaluation evaluate_gf(const ParamLayout& layout, const Vector& theta, const GFDataset& data,
                         const DrawSet& draws, double kappa, GradientMethod method, bool per_agent) {
  if (method == GradientMethod::kAnalytic) return evaluate_analytic(layout, theta, data, draws, kappa, per_agent);
  require(!per_agent, "per-agent scores need analytic derivatives");
  const int P = layout.size();
  GFEvaluation ev;
  ev.demand = demand_only(layout.unpack(theta), data, draws, kappa, ev.loglik);
  ev.grad.resize(P);
  ev.demand_jac.resize(data.groups(), P);
  for (int j = 0; j < P; ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(theta[j]));
    Vector tp = theta, tm = theta;
    tp[j] += h;
    tm[j] -= h;
    double lp, lm;
    const Vector dp = demand_only(layout.unpack(tp), data, draws, kappa, lp);
    const Vector dm = demand_only(layout.unpack(tm), data, draws, kappa, lm);
    ev.grad[j] = (lp - lm) / (2 * h);
    ev.demand_jac.col(j) = (dp - dm) / (2 * h);
  }
  return ev;
}

GFParams initial_params(const GFDataset& data, const DrawSet& draws) {
  data.validate();
  GFParams p;
  p.delta_u = Vector::Zero(data.z.dim_u());
  p.delta_v = Vector::Zero(data.z.dim_v());
  p.zeta = Vector::Zero(data.groups());
  p.cutoffs.assign(data.groups(), Cutoff::NegInf());
  std::vector<double> pooled(static_cast<std::size_t>(draws.n()) * draws.draws());
  for (int g = 0; g < data.groups(); ++g) {
    if (!data.binding[g]) continue;
    std::size_t k = 0;
    for (int i = 0; i < draws.n(); ++i)
      for (int r = 0; r < draws.draws(); ++r) pooled[k++] = draws(i, r, g);
    const double share = std::clamp(static_cast<double>(data.capacities[g]) / data.n(), 0.0, 1.0);
    const auto pos = static_cast<std::size_t>(std::clamp((1.0 - share) * (pooled.size() - 1), 0.0,
                                                         static_cast<double>(pooled.size() - 1)));
    std::nth_element(pooled.begin(), pooled.begin() + static_cast<std::ptrdiff_t>(pos), pooled.end());
    p.cutoffs[g] = Cutoff::Finite(pooled[pos]);
  }
  return p;
}

GFEstimate fit_constrained_mle(const GFDataset& data, const GFParams& init, const DrawSet& draws,
                               const GFOptions& options) {
  data.validate();
  if (!(options.kappa > 0.0)) throw ConfigError("smoothing bandwidth kappa must be positive");
  require(data.n() > 0, "cannot estimate on an empty sample");
  const ParamLayout layout = ParamLayout::For(data.z, data.binding);
  const int m = static_cast<int>(layout.binding_groups.size());
  const double n = data.n();
  Vector supply(m);
  for (int b = 0; b < m; ++b) supply[b] = data.capacities[layout.binding_groups[b]] / n;

  EqualityConstrainedProblem problem;
  problem.n_vars = layout.size();
  problem.n_cons = m;
  problem.evaluate = [&](const Vector& x, double& f, Vector& g, Vector& c, Matrix& J) {
    const GFEvaluation ev = evaluate_gf(layout, x, data, draws, options.kappa, options.gradient);
    f = -ev.loglik / n;
    g = -ev.grad / n;
    c.resize(m);
    J.resize(m, layout.size());
    for (int b = 0; b < m; ++b) {
      c[b] = ev.demand[layout.binding_groups[b]] - supply[b];
      J.row(b) = ev.demand_jac.row(layout.binding_groups[b]);
    }
  };
  AugLagOptions al;
  al.tol_constraint = options.tol_constraint;
  al.tol_grad = options.tol_grad;
  al.max_inner = options.max_iter;
  al.max_total_inner = options.max_iter;
  const AugLagResult res = minimize_augmented_lagrangian(problem, layout.pack(init), al);

  GFEstimate est;
  est.theta = res.x;
  est.params = layout.unpack(res.x);
  est.names = layout.names();
  est.loglik = -res.f * n;
  est.constraint_residual = Vector::Zero(data.groups());
  for (int b = 0; b < m; ++b) est.constraint_residual[layout.binding_groups[b]] = res.c[b];
  est.iterations = res.inner_iterations;
  est.outer_iterations = res.outer_iterations;
  est.converged = res.converged;
  est.stationarity = res.grad_lagrangian.size() ? res.grad_lagrangian.lpNorm<Eigen::Infinity>() : 0.0;
  est.message = res.message;
  est.merit_trace = res.merit_trace;
  est.kappa = options.kappa;

  if (options.std_errors) {
    // Influence of each agent on theta-hat from the linearised first-order
    // conditions [H C'; C 0] [dtheta; dlambda] = -[score_i; sigma_i - S],
    // with H the outer-product approximation of the Hessian.
    const GFEvaluation ev = evaluate_gf(layout, res.x, data, draws, options.kappa, GradientMethod::kAnalytic, true);
    const int P = layout.size();
    Matrix K = Matrix::Zero(P + m, P + m);
    K.topLeftCorner(P, P) = -(ev.scores.transpose() * ev.scores) / n;
    for (int b = 0; b < m; ++b) {
      K.block(P + b, 0, 1, P) = ev.demand_jac.row(layout.binding_groups[b]);
      K.block(0, P + b, P, 1) = ev.demand_jac.row(layout.binding_groups[b]).transpose();
    }
    Matrix rhs(P + m, data.n());
    rhs.topRows(P) = ev.scores.transpose();
    for (int b = 0; b < m; ++b)
      rhs.row(P + b) = (ev.agent_probs.col(layout.binding_groups[b]).array() - supply[b]).matrix().transpose();
    const Eigen::FullPivLU<Matrix> lu(K);
    if (!lu.isInvertible()) throw NumericError("constrained information matrix is singular");
    est.influence = -(lu.solve(rhs).topRows(P)).transpose();
    const Matrix vcov = (est.influence.transpose() * est.influence) / (n * n);
    est.std_errors = vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  }
  return est;
}

GFEstimate fit_constrained_mle(const GFDataset& data, const GFOptions& options) {
  data.validate();
  Rng rng(options.seed);
  const DrawSet draws = DrawSet::Generate(data.n(), options.draws, data.groups(), options.eta, rng);
  return fit_constrained_mle(data, initial_params(data, draws), draws, options);
}

}  // namespace endogroup
