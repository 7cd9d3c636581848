#include "pilate/fstar.hpp"

#include <cmath>

namespace pilate {

void SearchConfig::validate(int T) const {
  if (!(eps > 0) || !(pi_l > 0) || pi_l > 1 || eps > pi_l + 1e-12) fail_validation("need 0 < eps <= pi_L <= 1");
  if (m_plus < 1) fail_validation("m_plus must be >= 1");
  if (floor_fraction(eps, T) < 1) fail_validation("eps * T must be at least 1");
  if (top_k < 1) fail_validation("top_k must be >= 1");
}

namespace {

// Running sums of x'x and x'[z : d] over a window of rows.
struct WindowSums {
  Eigen::MatrixXd xx;
  Eigen::MatrixXd xw;

  WindowSums(int p, int q) : xx(Eigen::MatrixXd::Zero(p, p)), xw(Eigen::MatrixXd::Zero(p, q + 1)) {}

  void add(const Dataset& ds, int t) {
    const int p = ds.p();
    if (p == 0) return;
    const Eigen::RowVectorXd xt = ds.x.row(t);
    xx.noalias() += xt.transpose() * xt;
    xw.leftCols(ds.q()).noalias() += xt.transpose() * ds.z.row(t);
    xw.col(ds.q()) += xt.transpose() * ds.d(t);
  }

  // Within-window coefficients of [z : d] on x; false when x is numerically rank deficient.
  bool coefficients(Eigen::MatrixXd& coef) const {
    if (xx.rows() == 0) return true;
    Eigen::LDLT<Eigen::MatrixXd> f(xx);
    const auto D = f.vectorD();
    const double top = D.cwiseAbs().maxCoeff();
    if (f.info() != Eigen::Success || !(top > 0) || D.minCoeff() <= 1e-10 * top) return false;
    coef = f.solve(xw);
    return true;
  }
};

double score_rows(const Dataset& ds, int s, int e, const Eigen::MatrixXd& coef, const HacConfig& hac,
                  ResidualChoice rc) {
  const int n = e - s;
  const int p = ds.p();
  const int q = ds.q();
  Eigen::MatrixXd zt = ds.z.middleRows(s, n);
  Eigen::VectorXd dt = ds.d.segment(s, n);
  if (p > 0) {
    const auto xs = ds.x.middleRows(s, n);
    zt.noalias() -= xs * coef.leftCols(q);
    dt.noalias() -= xs * coef.col(q);
  }
  const Eigen::VectorXd sv = zt.transpose() * dt;
  if (sv.squaredNorm() == 0) return 0.0;
  Eigen::VectorXd ehat = dt;
  if (rc == ResidualChoice::unrestricted) {
    Eigen::LDLT<Eigen::MatrixXd> zz(zt.transpose() * zt);
    ehat.noalias() -= zt * zz.solve(sv);
  }
  const Eigen::MatrixXd u = zt.array().colwise() * ehat.array();
  int b = 0;
  try {
    b = hac.lags(n);
  } catch (const ValidationError&) {
    return kNegInf;
  }
  const Eigen::MatrixXd J = newey_west_lags(u, b).matrix;
  if (q == 1) {
    const double j = J(0, 0);
    return j > 0 ? sv(0) * sv(0) / j : kNegInf;
  }
  Eigen::LDLT<Eigen::MatrixXd> f(J);
  const auto D = f.vectorD();
  if (f.info() != Eigen::Success || D.minCoeff() <= 1e-14 * std::max(J.trace(), 1e-300)) return kNegInf;
  return sv.dot(f.solve(sv));
}

}  // namespace

double segment_score(const Dataset& ds, int s, int e, const HacConfig& hac, ResidualChoice residuals) {
  if (s < 0 || e > ds.T() || s >= e) fail_validation("segment rows out of range");
  const int n = e - s;
  if (n <= ds.p() + ds.q() || n < 2) return kNegInf;
  WindowSums ws(ds.p(), ds.q());
  for (int t = s; t < e; ++t) ws.add(ds, t);
  Eigen::MatrixXd coef;
  if (!ws.coefficients(coef)) return kNegInf;
  return score_rows(ds, s, e, coef, hac, residuals);
}

SegmentTable segment_score_table(const Dataset& ds, int min_segment, const HacConfig& hac,
                                 ResidualChoice residuals) {
  const int T = ds.T();
  const int lmin = std::max(1, min_segment);
  SegmentTable w(T, lmin);
  Eigen::MatrixXd coef;
  for (int s = 0; s + lmin <= T; ++s) {
    WindowSums ws(ds.p(), ds.q());
    for (int t = s; t < s + lmin - 1; ++t) ws.add(ds, t);
    for (int e = s + lmin; e <= T; ++e) {
      ws.add(ds, e - 1);
      const int n = e - s;
      if (n <= ds.p() + ds.q() || n < 2 || !ws.coefficients(coef)) continue;
      w.set(s, e, score_rows(ds, s, e, coef, hac, residuals));
    }
  }
  return w;
}

double f_stat_segment_sum(const Dataset& ds, const Partition& P, const HacConfig& hac, ResidualChoice residuals) {
  const int L = P.total_length();
  const int dof = L - ds.p() - ds.q();
  if (dof <= 0) return kNegInf;
  double sum = 0;
  for (const auto& seg : P.segments()) {
    const double w = segment_score(ds, seg.start - 1, seg.end - 1, hac, residuals);
    if (w == kNegInf) return kNegInf;
    sum += w;
  }
  return sum / (static_cast<double>(ds.q()) * dof);
}

FStatResult f_stat_exact(const Dataset& ds, const Partition& P, const HacConfig& hac, ResidualChoice residuals) {
  if (P.T() != ds.T()) fail_validation("partition length differs from dataset T");
  const int q = ds.q();
  const int L = P.total_length();
  const int dof = L - ds.p() - q;
  if (dof <= 0) fail_validation("subsample of length " + std::to_string(L) + " leaves no degrees of freedom");
  const Eigen::MatrixXd zt = residualize(ds, P, Block::z);
  const Eigen::VectorXd dt = residualize(ds, P, Block::d);
  const Eigen::VectorXd sv = zt.transpose() * dt;
  FStatResult out;
  out.partition = P;
  out.dof_scale = static_cast<double>(q) * dof;
  Eigen::VectorXd ehat = dt;
  if (residuals == ResidualChoice::unrestricted) {
    const auto fit = ols(dt, zt);
    ehat = fit.residuals.col(0);
  }
  const Eigen::MatrixXd u = zt.array().colwise() * ehat.array();
  out.j_hat = newey_west(u, hac);
  if (sv.squaredNorm() == 0) {
    out.value = 0;
    return out;
  }
  const Eigen::MatrixXd& J = out.j_hat.matrix;
  Eigen::LDLT<Eigen::MatrixXd> f(J);
  const auto D = f.vectorD();
  if (f.info() != Eigen::Success || !(J.trace() > 0) || D.minCoeff() <= 1e-14 * J.trace())
    throw SingularityError("long-run variance is singular on subsample " + P.to_string());
  out.value = sv.dot(f.solve(sv)) / out.dof_scale;
  return out;
}

double fstar_objective(const Dataset& ds, const Partition& P, const SearchConfig& cfg) {
  if (cfg.objective == FStarObjective::segment_sum) return f_stat_segment_sum(ds, P, cfg.hac, cfg.residuals);
  try {
    return f_stat_exact(ds, P, cfg.hac, cfg.residuals).value;
  } catch (const ComputationError&) {
    return kNegInf;
  }
}

FStarResult fstar_search(const Dataset& ds, const SearchConfig& cfg) {
  ds.validate();
  const int T = ds.T();
  cfg.validate(T);
  const int pq = ds.p() + ds.q();
  LengthRules rules = search_rules(T, cfg.eps, cfg.pi_l, cfg.m_plus);
  rules.min_total = std::max(rules.min_total, pq + 1);
  if (rules.min_total > T) fail_validation("no admissible subsample leaves positive degrees of freedom");

  const bool joint = cfg.objective == FStarObjective::joint;
  const SegmentTable w = segment_score_table(ds, rules.min_segment, cfg.hac, cfg.residuals);
  const DpProfile prof = dp_profile(w, rules, joint ? cfg.top_k : 1);

  FStarResult res;
  const double qd = ds.q();
  for (int L = rules.min_total; L <= T; ++L)
    if (prof.best[L] > kNegInf) res.per_length_profile[L] = prof.best[L] / (qd * (L - pq));

  double best = kNegInf;
  Partition arg;
  auto offer = [&](const Partition& P, double v) {
    if (v == kNegInf) return;
    if (best == kNegInf || better_candidate(v, P, best, arg)) {
      best = v;
      arg = P;
    }
  };

  if (!joint) {
    for (int L = T; L >= rules.min_total; --L)
      if (!prof.top[L].empty()) offer(prof.top[L].front().partition, prof.best[L] / (qd * (L - pq)));
    if (best > kNegInf) res.refinement_log.emplace_back(arg, best);
  } else {
    for (int L = T; L >= rules.min_total; --L)
      for (const auto& c : prof.top[L]) {
        const double v = fstar_objective(ds, c.partition, cfg);
        res.refinement_log.emplace_back(c.partition, v);
        offer(c.partition, v);
      }
    if (cfg.enumeration_guard && count_partitions(rules, cfg.enumeration_bound) <= cfg.enumeration_bound) {
      for_each_partition(rules, [&](const Partition& P) {
        offer(P, fstar_objective(ds, P, cfg));
        return true;
      });
      res.enumerated = true;
    }
  }
  if (best == kNegInf) throw ComputationError("every admissible segment is degenerate; F* is undefined");
  res.value = best;
  res.argmax_partition = arg;
  return res;
}

TestReport fstar_decision(const FStarResult& result, int q, double pi_l, double alpha, const CvTable& table) {
  const auto cv = table.find(q, pi_l, alpha);
  if (!cv)
    fail_validation("no critical value for q=" + std::to_string(q) + ", pi_L=" + format_double(pi_l) +
                    ", alpha=" + format_double(alpha) + "; simulate one with `pilate cv` or pass --simulate-cv");
  TestReport r;
  r.test = "fstar";
  r.statistic = result.value;
  r.critical_value = *cv;
  r.alpha = alpha;
  r.reject = result.value > *cv;
  r.partition = result.argmax_partition;
  return r;
}

}  // namespace pilate
