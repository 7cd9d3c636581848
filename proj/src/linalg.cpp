#include "pilate/linalg.hpp"

#include <cmath>

namespace pilate {

int HacConfig::lags(int n) const {
  if (rule == Bandwidth::fixed) {
    if (fixed_lags < 0) fail_validation("bandwidth must be nonnegative");
    if (fixed_lags >= n) fail_validation("bandwidth " + std::to_string(fixed_lags) +
                                         " not below window length " + std::to_string(n));
    return fixed_lags;
  }
  if (n <= 1) return 0;
  int b = static_cast<int>(std::floor(std::cbrt(static_cast<double>(n)) + 1e-9));
  while (static_cast<long long>(b + 1) * (b + 1) * (b + 1) <= n) ++b;
  while (b > 0 && static_cast<long long>(b) * b * b > n) --b;
  return std::min(b, n - 1);
}

LrvEstimate newey_west_lags(const Eigen::MatrixXd& u, int b) {
  const int n = static_cast<int>(u.rows());
  if (n < 1) fail_validation("newey_west needs at least one observation");
  if (b < 0 || (b >= n && n > 1)) fail_validation("bandwidth must satisfy 0 <= b < n");
  Eigen::MatrixXd S = u.transpose() * u;
  for (int j = 1; j <= b; ++j) {
    const double w = 1.0 - static_cast<double>(j) / (b + 1);
    Eigen::MatrixXd G = u.bottomRows(n - j).transpose() * u.topRows(n - j);
    S += w * (G + G.transpose());
  }
  S /= n;
  LrvEstimate out;
  out.matrix = 0.5 * (S + S.transpose());
  out.bandwidth_used = b;
  out.window_length = n;
  return out;
}

LrvEstimate newey_west(const Eigen::MatrixXd& u_in, const HacConfig& cfg) {
  const int n = static_cast<int>(u_in.rows());
  if (n < 2) fail_validation("newey_west needs n >= 2");
  const Eigen::MatrixXd u = cfg.demean ? Eigen::MatrixXd(u_in.rowwise() - u_in.colwise().mean()) : u_in;
  LrvEstimate out;
  if (cfg.prewhiten && n > 3) {
    // VAR(1) prewhitening and recoloring
    const Eigen::MatrixXd lagged = u.topRows(n - 1);
    const Eigen::MatrixXd lead = u.bottomRows(n - 1);
    Eigen::MatrixXd A = (lagged.transpose() * lagged).ldlt().solve(lagged.transpose() * lead).transpose();
    Eigen::MatrixXd e = lead - lagged * A.transpose();
    out = newey_west_lags(e, cfg.lags(n - 1));
    Eigen::MatrixXd IA = Eigen::MatrixXd::Identity(A.rows(), A.cols()) - A;
    Eigen::MatrixXd inv = IA.inverse();
    out.matrix = inv * out.matrix * inv.transpose();
    out.matrix = 0.5 * (out.matrix + out.matrix.transpose());
    out.window_length = n;
  } else {
    out = newey_west_lags(u, cfg.lags(n));
  }
  if (cfg.psd_repair) out.matrix = psd_repair(out.matrix);
  return out;
}

int numerical_rank(const Eigen::MatrixXd& x) {
  if (x.cols() == 0) return 0;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  return static_cast<int>(qr.rank());
}

OlsFit ols(const Eigen::MatrixXd& y, const Eigen::MatrixXd& x) {
  if (y.rows() != x.rows()) fail_validation("ols: row mismatch");
  OlsFit fit;
  if (x.cols() == 0) {
    fit.coef = Eigen::MatrixXd(0, y.cols());
    fit.residuals = y;
    return fit;
  }
  if (x.rows() < x.cols()) throw SingularityError("ols: fewer rows than regressors");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) throw SingularityError("ols: regressor matrix is rank deficient");
  fit.coef = qr.solve(y);
  fit.residuals = y - x * fit.coef;
  return fit;
}

namespace {

Eigen::MatrixXd project_out(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x) {
  if (x.cols() == 0) return a;
  return ols(a, x).residuals;
}

}  // namespace

IvFit tsls(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::MatrixXd& x,
           const Eigen::MatrixXd& instruments, const HacConfig& hac) {
  const int T = static_cast<int>(y.size());
  if (d.size() != T || instruments.rows() != T || (x.cols() > 0 && x.rows() != T))
    fail_validation("tsls: row mismatch");
  const Eigen::VectorXd yt = project_out(y, x);
  const Eigen::VectorXd dt = project_out(d, x);
  const Eigen::MatrixXd zt = project_out(instruments, x);

  Eigen::VectorXd dhat = Eigen::VectorXd::Zero(T);
  if (zt.cols() > 0 && zt.norm() > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(zt);
    qr.setThreshold(1e-10);
    if (qr.rank() > 0) dhat = zt * qr.solve(dt);
  }
  // conditioning of the second-stage design [dhat_full : x]
  Eigen::MatrixXd W(T, 1 + x.cols());
  W.col(0) = dhat + (d - dt);
  if (x.cols() > 0) W.rightCols(x.cols()) = x;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(W);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0) || smax / smin > 1e12 || dhat.squaredNorm() <= 1e-24 * std::max(1.0, dt.squaredNorm()))
    throw WeakIdentificationError(
        "first-stage signal is numerically zero on this instrument set; use identification-robust inference");

  const double denom = dhat.dot(dt);
  IvFit fit;
  fit.beta = dhat.dot(yt) / denom;
  const Eigen::VectorXd u = yt - fit.beta * dt;
  Eigen::MatrixXd g = (dhat.array() * u.array()).matrix();
  const double J = newey_west(g, hac).matrix(0, 0);
  fit.se = std::sqrt(std::max(0.0, T * J)) / std::abs(denom);
  return fit;
}

IvFit tsls(const Dataset& ds, const Eigen::MatrixXd& instruments, const HacConfig& hac) {
  return tsls(ds.y, ds.d, ds.x, instruments, hac);
}

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd sym_inv_sqrt(const Eigen::MatrixXd& a, double floor_rel) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
  const double tr = a.trace();
  if (!(tr > 0)) throw SingularityError("inverse square root of a matrix with nonpositive trace");
  const double fl = floor_rel * tr;
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) ev(i) = 1.0 / std::sqrt(std::max(ev(i), fl));
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd psd_repair(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double min_eigenvalue(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace pilate
