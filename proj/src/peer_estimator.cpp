#include "endogroup/peer_estimator.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace endogroup {

Regressors make_regressors(const AdjacencyMatrix& W, const Vector& y, const Matrix& x, bool include_wy,
                           const BasisMatrix& controls, bool add_constant) {
  const int n = static_cast<int>(y.size());
  require(W.n() == n && x.rows() == n, "outcome, covariates and adjacency must have the same rows");
  require(controls.B.rows() == n || controls.K() == 0, "control rows do not match the outcome");
  Regressors r;
  r.y = y;
  const int dx = static_cast<int>(x.cols());
  r.X.resize(n, (include_wy ? 1 : 0) + 2 * dx);
  int c = 0;
  if (include_wy) {
    r.X.col(c++) = W.multiply(y);
    r.labels.push_back("Wy");
  }
  const Matrix wx = W.multiply(x);
  for (int k = 0; k < dx; ++k) {
    r.X.col(c++) = wx.col(k);
    r.labels.push_back(dx == 1 ? "Wx" : "Wx" + std::to_string(k + 1));
  }
  for (int k = 0; k < dx; ++k) {
    r.X.col(c++) = x.col(k);
    r.labels.push_back(dx == 1 ? "x" : "x" + std::to_string(k + 1));
  }
  if (add_constant) {
    BasisMatrix one;
    one.B = Matrix::Ones(n, 1);
    one.column_labels = {"const"};
    one.dummy_group = {-1};
    r.controls = concat_controls(one, controls);
  } else {
    r.controls = controls;
    if (r.controls.K() == 0) r.controls.B.resize(n, 0);
  }
  r.pool_index.resize(n);
  for (int i = 0; i < n; ++i) r.pool_index[i] = i;
  return r;
}

BasisMatrix group_dummy_basis(const IntVector& group, int G) {
  BasisMatrix b;
  b.B = Matrix::Zero(static_cast<Eigen::Index>(group.size()), G);
  for (std::size_t i = 0; i < group.size(); ++i) {
    require(group[i] >= 1 && group[i] <= G, "group dummies need every agent in a group");
    b.B(static_cast<Eigen::Index>(i), group[i] - 1) = 1.0;
  }
  for (int g = 1; g <= G; ++g) {
    b.column_labels.push_back("group_" + std::to_string(g));
    b.dummy_group.push_back(g);
  }
  return b;
}

BasisMatrix concat_controls(const BasisMatrix& a, const BasisMatrix& b) {
  if (b.K() == 0) return a;
  if (a.K() == 0) return b;
  require(a.B.rows() == b.B.rows(), "control blocks must have the same rows");
  BasisMatrix out = b;
  out.B.resize(a.B.rows(), a.K() + b.K());
  out.B << a.B, b.B;
  out.column_labels = a.column_labels;
  out.column_labels.insert(out.column_labels.end(), b.column_labels.begin(), b.column_labels.end());
  out.dummy_group = a.dummy_group;
  out.dummy_group.insert(out.dummy_group.end(), b.dummy_group.begin(), b.dummy_group.end());
  out.warnings = a.warnings;
  out.warnings.insert(out.warnings.end(), b.warnings.begin(), b.warnings.end());
  return out;
}

namespace {

// Residual maker of the (column-scaled) controls via pivoted QR.
class Projector {
 public:
  explicit Projector(const Matrix& B) {
    const int K = static_cast<int>(B.cols());
    scale_ = Vector::Ones(K);
    if (K == 0) return;
    for (int k = 0; k < K; ++k) {
      const double nrm = B.col(k).norm();
      scale_[k] = nrm > 0.0 ? 1.0 / nrm : 1.0;
    }
    Bs_ = B * scale_.asDiagonal();
    qr_.setThreshold(1e-10);
    qr_.compute(Bs_);
    rank_ = static_cast<int>(qr_.rank());
    Q_ = qr_.householderQ() * Matrix::Identity(B.rows(), rank_);
  }

  int rank() const { return rank_; }

  Matrix residualize(const Matrix& A) const {
    if (rank_ == 0) return A;
    return A - Q_ * (Q_.transpose() * A);
  }

  // Least-squares coefficients in original column units.
  Vector coefficients(const Vector& v) const {
    if (scale_.size() == 0) return Vector();
    return scale_.asDiagonal() * qr_.solve(v);
  }

 private:
  Vector scale_;
  Matrix Bs_, Q_;
  Eigen::ColPivHouseholderQR<Matrix> qr_;
  int rank_ = 0;
};

double condition_of(const Matrix& Xt, Vector* null_dir, double* lo, double* hi) {
  const double n = static_cast<double>(Xt.rows());
  const Matrix M = (Xt.transpose() * Xt) / n;
  Eigen::SelfAdjointEigenSolver<Matrix> es(M);
  const Vector ev = es.eigenvalues();
  *lo = ev[0];
  *hi = ev[ev.size() - 1];
  if (null_dir) *null_dir = es.eigenvectors().col(0);
  if (!(*lo > 0.0)) return std::numeric_limits<double>::infinity();
  return *hi / *lo;
}

}  // namespace

PeerEstimate sieve_ols(const Regressors& reg) {
  const int n = reg.n();
  const int dX = static_cast<int>(reg.X.cols());
  const int K = reg.controls.K();
  require(reg.X.rows() == n, "regressor rows do not match the outcome");
  require(K == 0 || reg.controls.B.rows() == n, "control rows do not match the outcome");
  require(n > K + dX, "need more observations than regressors plus controls");
  const Projector proj(K == 0 ? Matrix(n, 0) : reg.controls.B);
  const Matrix Xt = proj.residualize(reg.X);
  const Vector yt = proj.residualize(reg.y);

  PeerEstimate est;
  est.labels = reg.labels;
  est.K_used = proj.rank();
  double lo, hi;
  est.rank_condition_number = condition_of(Xt, nullptr, &lo, &hi);
  if (est.rank_condition_number > kRankConditionLimit) {
    std::ostringstream msg;
    msg << "rank condition fails: cond(X'MX/n) = " << est.rank_condition_number
        << "; regressors are (nearly) a function of the controls";
    throw RankConditionError(msg.str(), est.rank_condition_number);
  }
  Eigen::ColPivHouseholderQR<Matrix> qx(Xt);
  est.gamma_hat = qx.solve(yt);
  est.residuals = yt - Xt * est.gamma_hat;

  const Vector partial = reg.y - reg.X * est.gamma_hat;
  est.sieve_coeffs = K == 0 ? Vector() : proj.coefficients(partial);
  est.fitted_selection = Vector::Zero(n);
  est.group_effect = Vector::Zero(n);
  for (int k = 0; k < K; ++k) {
    const Vector part = reg.controls.B.col(k) * est.sieve_coeffs[k];
    if (reg.controls.dummy_group[k] == 0) {
      est.fitted_selection += part;
    } else {
      est.group_effect += part;
    }
  }
  const StdErrors se = standard_errors(reg, est);
  est.se = se.se;
  est.vcov = se.vcov;
  return est;
}

StdErrors standard_errors(const Regressors& reg, const PeerEstimate& est, const SEOptions& options) {
  const int n = reg.n();
  const int K = reg.controls.K();
  const Projector proj(K == 0 ? Matrix(n, 0) : reg.controls.B);
  const Matrix Xt = proj.residualize(reg.X);
  const Vector nu = proj.residualize(reg.y) - Xt * est.gamma_hat;
  const Matrix M = (Xt.transpose() * Xt) / n;
  const Eigen::FullPivLU<Matrix> lu(M);
  if (!lu.isInvertible()) throw RankConditionError("rank condition fails: X'MX is singular",
                                            std::numeric_limits<double>::infinity());
  const Matrix Minv = lu.inverse();
  const int d = static_cast<int>(reg.X.cols());

  Matrix vcov;
  if (!options.include_theta_correction) {
    const Matrix phi = Xt.array().colwise() * nu.array();
    const Matrix omega = (phi.transpose() * phi) / n;
    vcov = Minv * omega * Minv / n;
  } else {
    require(static_cast<bool>(options.rebuild), "theta correction needs a rebuild callback");
    const Matrix& infl = options.theta_influence;
    const int N = options.pool_size > 0 ? options.pool_size : static_cast<int>(infl.rows());
    const int P = static_cast<int>(options.theta_hat.size());
    require(infl.rows() == N && infl.cols() == P, "theta influence must be pool size x parameters");
    require(static_cast<int>(reg.pool_index.size()) == n, "theta correction needs a pool index per row");
    // Derivative of the moment n^-1 X~'(y~ - X~ gamma) with respect to theta.
    auto moment = [&](const Vector& theta) {
      const Regressors r = options.rebuild(theta);
      const Projector p(r.controls.K() == 0 ? Matrix(r.n(), 0) : r.controls.B);
      const Matrix xt = p.residualize(r.X);
      const Vector v = p.residualize(r.y) - xt * est.gamma_hat;
      return Vector((xt.transpose() * v) / r.n());
    };
    Matrix Mtheta(d, P);
    for (int j = 0; j < P; ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(options.theta_hat[j]));
      Vector tp = options.theta_hat, tm = options.theta_hat;
      tp[j] += h;
      tm[j] -= h;
      Mtheta.col(j) = (moment(tp) - moment(tm)) / (2 * h);
    }
    Matrix psi = (infl * Mtheta.transpose()) / N;  // N x d
    for (int i = 0; i < n; ++i) {
      const int pi = reg.pool_index[i];
      require(pi >= 0 && pi < N, "pool index out of range");
      psi.row(pi) += (Xt.row(i) * nu[i]) / n;
    }
    vcov = Minv * (psi.transpose() * psi) * Minv;
  }
  vcov = 0.5 * (vcov + vcov.transpose());
  return {vcov.diagonal().cwiseMax(0.0).cwiseSqrt(), vcov};
}

RankDiagnostic rank_diagnostic(const Regressors& reg) {
  const int n = reg.n();
  const int K = reg.controls.K();
  const Projector proj(K == 0 ? Matrix(n, 0) : reg.controls.B);
  const Matrix Xt = proj.residualize(reg.X);
  RankDiagnostic d;
  d.condition_number = condition_of(Xt, &d.null_direction, &d.min_eigenvalue, &d.max_eigenvalue);
  d.ill_conditioned = d.condition_number > kIllConditionedFlag;
  std::ostringstream os;
  os << "cond(X'MX/n) = " << d.condition_number;
  if (d.ill_conditioned) {
    os << "; near-null combination:";
    for (int k = 0; k < d.null_direction.size(); ++k)
      os << ' ' << (k < static_cast<int>(reg.labels.size()) ? reg.labels[k] : "c" + std::to_string(k)) << '='
         << d.null_direction[k];
  }
  d.report = os.str();
  return d;
}

}  // namespace endogroup
