#include "pilate/heterosked.hpp"

#include <cmath>

namespace pilate {

EventStudyFrame make_frame(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const std::vector<int>& policy) {
  const int T = static_cast<int>(y.size());
  if (d.size() != T || static_cast<int>(policy.size()) != T) fail_validation("frame series lengths differ");
  if (T < 4) fail_validation("frame needs at least 4 observations");
  for (int v : policy)
    if (v != 0 && v != 1) fail_validation("policy indicator must be 0/1");
  EventStudyFrame f;
  f.ytilde = (y.array() - y.mean()).matrix();
  f.dtilde = (d.array() - d.mean()).matrix();
  f.ystar = f.dtilde.cwiseProduct(f.ytilde);
  f.dstar = f.dtilde.cwiseAbs2();
  f.policy = policy;
  f.var_full_d = f.dtilde.squaredNorm() / (T - 1);
  return f;
}

EventStudyFrame make_frame(const Dataset& ds) {
  if (!ds.policy) fail_validation("heteroskedasticity-based identification needs a policy indicator column");
  return make_frame(ds.y, ds.d, *ds.policy);
}

namespace {

std::vector<char> row_mask(const EventStudyFrame& f, const std::optional<Partition>& P) {
  if (!P) return std::vector<char>(f.T(), 1);
  if (P->T() != f.T()) fail_validation("partition length differs from the frame");
  return P->mask();
}

struct Moments2 {
  double var = 0, cov = 0;
  int n = 0;
};

Moments2 group_moments(const EventStudyFrame& f, const std::vector<char>& mask, int group) {
  double sy = 0, sd = 0;
  int n = 0;
  for (int t = 0; t < f.T(); ++t)
    if (mask[t] && f.policy[t] == group) {
      sy += f.ytilde(t);
      sd += f.dtilde(t);
      ++n;
    }
  Moments2 m;
  m.n = n;
  if (n < 2) return m;
  const double my = sy / n, md = sd / n;
  for (int t = 0; t < f.T(); ++t)
    if (mask[t] && f.policy[t] == group) {
      const double a = f.dtilde(t) - md;
      m.var += a * a;
      m.cov += a * (f.ytilde(t) - my);
    }
  m.var /= n - 1;
  m.cov /= n - 1;
  return m;
}

}  // namespace

RigobonResult rigobon_estimand(const EventStudyFrame& f, const std::optional<Partition>& P) {
  const auto mask = row_mask(f, P);
  const Moments2 mp = group_moments(f, mask, 1), mc = group_moments(f, mask, 0);
  if (mp.n < 2) fail_validation("fewer than two policy dates in the subsample");
  if (mc.n < 2) fail_validation("fewer than two control dates in the subsample");
  RigobonResult r;
  r.var_policy = mp.var;
  r.var_control = mc.var;
  r.cov_policy = mp.cov;
  r.cov_control = mc.cov;
  r.n_policy = mp.n;
  r.n_control = mc.n;
  r.denominator = mp.var - mc.var;
  if (!(std::abs(r.denominator) >= 1e-8 * f.var_full_d) || f.var_full_d == 0)
    throw WeakIdentificationError(
        "policy and control variances of the policy variable are nearly equal; the ratio is not identified and "
        "any estimate would be highly imprecise");
  r.beta = (mp.cov - mc.cov) / r.denominator;
  return r;
}

IvReformulation iv_reformulation(const EventStudyFrame& f, const std::optional<Partition>& P, const HacConfig& hac) {
  const auto mask = row_mask(f, P);
  std::vector<int> rows;
  for (int t = 0; t < f.T(); ++t)
    if (mask[t]) rows.push_back(t);
  const int n = static_cast<int>(rows.size());
  if (n < 4) fail_validation("subsample too short for the IV reformulation");
  Eigen::VectorXd y(n), d(n);
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(n, 1), z(n, 1);
  for (int i = 0; i < n; ++i) {
    y(i) = f.ystar(rows[i]);
    d(i) = f.dstar(rows[i]);
    z(i, 0) = f.policy[rows[i]];
  }
  if ((d.array() - d.mean()).matrix().squaredNorm() == 0)
    throw WeakIdentificationError("squared policy variable has zero variance on the subsample");
  const double zs = z.sum();
  if (zs == 0 || zs == n) fail_validation("subsample needs both policy and control dates");
  const IvFit fit = tsls(y, d, x, z, hac);
  IvReformulation r;
  r.beta = fit.beta;
  r.se = fit.se;
  r.t_stat = fit.se > 0 ? fit.beta / fit.se : 0;
  r.n = n;
  return r;
}

}  // namespace pilate
