#include "endogroup/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace endogroup {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct LinePoint {
  double alpha = 0.0;
  double phi = kInf;
  double dphi = 0.0;
  Vector grad;
};

double cubic_min(const LinePoint& a, const LinePoint& b) {
  // Minimiser of the cubic interpolating (phi, dphi) at both ends; falls back
  // to bisection when the interpolant is degenerate or lands near an end.
  const double lo = std::min(a.alpha, b.alpha);
  const double hi = std::max(a.alpha, b.alpha);
  const double mid = 0.5 * (a.alpha + b.alpha);
  if (!std::isfinite(a.phi) || !std::isfinite(b.phi)) return mid;
  const double d1 = a.dphi + b.dphi - 3.0 * (a.phi - b.phi) / (a.alpha - b.alpha);
  const double disc = d1 * d1 - a.dphi * b.dphi;
  if (disc < 0.0) return mid;
  const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
  const double denom = b.dphi - a.dphi + 2.0 * d2;
  if (denom == 0.0) return mid;
  const double t = b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / denom;
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin) return mid;
  return t;
}

// Strong-Wolfe line search (Nocedal & Wright, Alg. 3.5/3.6).
class WolfeSearch {
 public:
  WolfeSearch(const std::function<double(const Vector&, Vector&)>& fg, const Vector& x, const Vector& d,
              double phi0, double dphi0, int& evals)
      : fg_(fg), x_(x), d_(d), phi0_(phi0), dphi0_(dphi0), evals_(evals) {}

  bool run(double alpha_init, LinePoint& out) {
    LinePoint prev{0.0, phi0_, dphi0_, {}};
    double alpha = alpha_init;
    for (int it = 0; it < 30; ++it) {
      LinePoint cur = eval(alpha);
      if (cur.phi > phi0_ + kC1 * alpha * dphi0_ || (it > 0 && cur.phi >= prev.phi))
        return zoom(prev, cur, out);
      if (std::abs(cur.dphi) <= -kC2 * dphi0_) {
        out = cur;
        return true;
      }
      if (cur.dphi >= 0.0) return zoom(cur, prev, out);
      prev = cur;
      alpha *= 2.0;
    }
    return best_armijo(out);
  }

 private:
  static constexpr double kC1 = 1e-4;
  static constexpr double kC2 = 0.9;

  LinePoint eval(double alpha) {
    LinePoint p;
    p.alpha = alpha;
    p.grad.resize(x_.size());
    ++evals_;
    try {
      p.phi = fg_(x_ + alpha * d_, p.grad);
    } catch (const NumericError&) {
      p.phi = kInf;
    }
    if (!std::isfinite(p.phi) || !p.grad.allFinite()) {
      p.phi = kInf;
      p.dphi = 0.0;
    } else {
      p.dphi = p.grad.dot(d_);
      if (p.phi <= phi0_ + kC1 * alpha * dphi0_ && p.phi < best_.phi) best_ = p;
    }
    return p;
  }

  bool zoom(LinePoint lo, LinePoint hi, LinePoint& out) {
    for (int it = 0; it < 40; ++it) {
      const double alpha = cubic_min(lo, hi);
      if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, std::abs(lo.alpha))) break;
      LinePoint cur = eval(alpha);
      if (cur.phi > phi0_ + kC1 * alpha * dphi0_ || cur.phi >= lo.phi) {
        hi = cur;
      } else {
        if (std::abs(cur.dphi) <= -kC2 * dphi0_) {
          out = cur;
          return true;
        }
        if (cur.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = cur;
      }
    }
    return best_armijo(out);
  }

  bool best_armijo(LinePoint& out) {
    if (!std::isfinite(best_.phi)) return false;
    out = best_;
    return true;
  }

  const std::function<double(const Vector&, Vector&)>& fg_;
  const Vector& x_;
  const Vector& d_;
  double phi0_;
  double dphi0_;
  int& evals_;
  LinePoint best_;
};

}  // namespace

BfgsResult minimize_bfgs(const std::function<double(const Vector&, Vector&)>& fg, const Vector& x0, double tol,
                         int max_iter, Matrix* inverse_hessian) {
  const int n = static_cast<int>(x0.size());
  BfgsResult r;
  r.x = x0;
  r.grad.resize(n);
  r.f = fg(r.x, r.grad);
  r.evaluations = 1;
  if (!std::isfinite(r.f) || !r.grad.allFinite()) throw NumericError("BFGS: objective is not finite at the start");
  r.trace.push_back(r.f);

  Matrix H_local;
  Matrix& H = inverse_hessian ? *inverse_hessian : H_local;
  bool fresh = H.rows() != n || H.cols() != n;
  if (fresh) H = Matrix::Identity(n, n);

  for (r.iterations = 0; r.iterations < max_iter; ++r.iterations) {
    if (r.grad.lpNorm<Eigen::Infinity>() <= tol) {
      r.converged = true;
      break;
    }
    Vector d = -H * r.grad;
    double dphi0 = r.grad.dot(d);
    if (!(dphi0 < 0.0)) {
      H.setIdentity();
      fresh = true;
      d = -r.grad;
      dphi0 = r.grad.dot(d);
    }
    const double alpha0 = fresh ? std::min(1.0, 1.0 / d.lpNorm<Eigen::Infinity>()) : 1.0;
    WolfeSearch ls(fg, r.x, d, r.f, dphi0, r.evaluations);
    LinePoint step;
    if (!ls.run(alpha0, step)) {
      if (fresh) break;  // steepest descent cannot make progress either
      H.setIdentity();
      fresh = true;
      continue;
    }
    const Vector s = step.alpha * d;
    const Vector y = step.grad - r.grad;
    const double sy = s.dot(y);
    r.x += s;
    r.f = step.phi;
    r.grad = step.grad;
    r.trace.push_back(r.f);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) {
        H = Matrix::Identity(n, n) * (sy / y.squaredNorm());
        fresh = false;
      }
      const double rho = 1.0 / sy;
      const Vector Hy = H * y;
      H += ((sy + y.dot(Hy)) * rho * rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
    }
    if (s.lpNorm<Eigen::Infinity>() <= 1e-15 * std::max(1.0, r.x.lpNorm<Eigen::Infinity>())) break;
  }
  if (!r.converged && r.grad.lpNorm<Eigen::Infinity>() <= tol) r.converged = true;
  return r;
}

AugLagResult minimize_augmented_lagrangian(const EqualityConstrainedProblem& problem, const Vector& x0,
                                           const AugLagOptions& options) {
  require(x0.size() == problem.n_vars, "augmented Lagrangian: starting point has the wrong length");
  const int m = problem.n_cons;
  AugLagResult res;
  res.x = x0;

  double f = 0.0;
  Vector g(problem.n_vars), c(m);
  Matrix J(m, problem.n_vars);
  problem.evaluate(res.x, f, g, c, J);
  ++res.evaluations;
  if (!std::isfinite(f) || !c.allFinite()) throw NumericError("augmented Lagrangian: non-finite start");

  // Least-squares multiplier estimate at the start.
  res.lambda = m > 0 ? Vector((J * J.transpose()).ldlt().solve(-J * g)) : Vector();
  if (!res.lambda.allFinite()) res.lambda = Vector::Zero(m);
  double mu = options.mu_init;
  double inner_tol = std::max(options.tol_grad, 1e-3);
  double prev_violation = c.size() ? c.lpNorm<Eigen::Infinity>() : 0.0;
  Matrix H;

  for (res.outer_iterations = 0; res.outer_iterations < options.max_outer; ++res.outer_iterations) {
    const Vector lambda = res.lambda;
    const int outer = res.outer_iterations;
    auto merit = [&](const Vector& x, Vector& grad) {
      double fx;
      Vector gx(problem.n_vars), cx(m);
      Matrix Jx(m, problem.n_vars);
      problem.evaluate(x, fx, gx, cx, Jx);
      if (!std::isfinite(fx) || !cx.allFinite()) return kInf;
      const Vector weights = lambda + mu * cx;
      grad = gx + Jx.transpose() * weights;
      return fx + lambda.dot(cx) + 0.5 * mu * cx.squaredNorm();
    };
    const int budget = std::min({options.max_inner, options.max_evaluations - res.evaluations,
                                  options.max_total_inner - res.inner_iterations});
    if (budget <= 0) break;
    BfgsResult inner = minimize_bfgs(merit, res.x, inner_tol, budget, &H);
    res.inner_iterations += inner.iterations;
    res.evaluations += inner.evaluations;
    for (double v : inner.trace) res.merit_trace.push_back({outer, v});
    res.x = inner.x;

    problem.evaluate(res.x, f, g, c, J);
    ++res.evaluations;
    const double violation = c.size() ? c.lpNorm<Eigen::Infinity>() : 0.0;
    res.lambda = lambda + mu * c;
    res.grad_lagrangian = g + J.transpose() * res.lambda;
    res.f = f;
    res.c = c;
    const double stationarity = res.grad_lagrangian.lpNorm<Eigen::Infinity>();
    if (violation < options.tol_constraint && stationarity < options.tol_grad) {
      res.converged = true;
      ++res.outer_iterations;
      res.message = "converged";
      return res;
    }
    if (violation > options.required_decrease * prev_violation && violation >= options.tol_constraint &&
        mu < options.mu_max) {
      mu = std::min(mu * options.mu_growth, options.mu_max);
      H.resize(0, 0);
    }
    prev_violation = violation;
    inner_tol = std::max(0.5 * options.tol_grad, 0.1 * inner_tol);
  }
  res.grad_lagrangian = g + J.transpose() * res.lambda;
  res.f = f;
  res.c = c;
  res.message = "iteration limit reached";
  return res;
}

}  // namespace endogroup
