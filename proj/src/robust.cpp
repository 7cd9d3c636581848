#include "pilate/robust.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>

#include "pilate/partition_dp.hpp"
#include "pilate/rng.hpp"

namespace pilate {

ReducedForm reduced_form_residuals(const Dataset& ds, const Partition& P) {
  ds.validate();
  const int T = ds.T(), p = ds.p(), q = ds.q();
  if (P.T() != T) fail_validation("partition length differs from dataset T");
  if (q + p >= T) fail_validation("need q + p < T for the reduced form");
  ReducedForm rf;
  rf.zbar = residualize(zero_fill(ds.z, P), ds.x);
  Eigen::MatrixXd Y(T, 2);
  Y.col(0) = ds.y;
  Y.col(1) = ds.d;
  Eigen::MatrixXd reg(T, q + p);
  reg << rf.zbar, ds.x;
  rf.vhat = ols(Y, reg).residuals;
  rf.sigma_v = rf.vhat.transpose() * rf.vhat / static_cast<double>(T - q - p);
  return rf;
}

RobustStatBundle robust_bundle(const Dataset& ds, const Partition& P, double beta0, const HacConfig& hac) {
  const ReducedForm rf = reduced_form_residuals(ds, P);
  const int T = ds.T(), q = ds.q();
  RobustStatBundle b;
  b.partition = P;
  b.sigma_v = rf.sigma_v;
  b.b0 << 1.0, -beta0;
  b.a0 << beta0, 1.0;
  const double det = rf.sigma_v.determinant();
  if (!(std::abs(det) > 1e-14 * std::max(1e-300, rf.sigma_v.trace() * rf.sigma_v.trace())))
    throw SingularityError("reduced-form error covariance is singular");
  const Eigen::Vector2d c2 = rf.sigma_v.inverse() * b.a0;

  const Eigen::VectorXd u1 = rf.vhat * b.b0;
  const Eigen::VectorXd u2 = rf.vhat * c2;
  Eigen::MatrixXd g(T, 2 * q);
  g.leftCols(q) = rf.zbar.array().colwise() * u1.array();
  g.rightCols(q) = rf.zbar.array().colwise() * u2.array();
  const Eigen::MatrixXd S = newey_west(g, hac).matrix;

  b.sigma_n1 = S.topLeftCorner(q, q);
  b.sigma_n1n2 = S.bottomLeftCorner(q, q);
  b.sigma_n2_star = S.bottomRightCorner(q, q);
  const double tr1 = b.sigma_n1.trace();
  if (!(tr1 > 0) || min_eigenvalue(b.sigma_n1) <= 1e-12 * tr1)
    throw SingularityError("long-run variance of the AR moment is singular on " + P.to_string());

  Eigen::MatrixXd Y(T, 2);
  Y.col(0) = ds.y;
  Y.col(1) = ds.d;
  const Eigen::MatrixXd zy = rf.zbar.transpose() * Y / std::sqrt(static_cast<double>(T));
  const Eigen::VectorXd s1 = zy * b.b0;
  const Eigen::VectorXd s2 = zy * c2;

  const Eigen::LDLT<Eigen::MatrixXd> f11(b.sigma_n1);
  b.sigma_n2 = b.sigma_n2_star - b.sigma_n1n2 * f11.solve(b.sigma_n1n2.transpose());
  b.sigma_n2 = 0.5 * (b.sigma_n2 + b.sigma_n2.transpose()).eval();
  if (min_eigenvalue(b.sigma_n2) < 0) {
    b.sigma_n2 = psd_repair(b.sigma_n2);
    b.psd_repaired = true;
  }
  b.n1 = sym_inv_sqrt(b.sigma_n1) * s1;
  if (b.sigma_n2.trace() > 0)
    b.n2 = sym_inv_sqrt(b.sigma_n2) * (s2 - b.sigma_n1n2 * f11.solve(s1));
  else
    b.n2 = Eigen::VectorXd::Zero(q);
  b.m1 = b.n1.squaredNorm();
  b.m2 = b.n2.squaredNorm();
  b.m12 = b.n1.dot(b.n2);
  return b;
}

ArLmLr ar_lm_lr(double m1, double m2, double m12) {
  ArLmLr r;
  r.ar = m1;
  if (m2 > 0) {
    r.lm = m12 * m12 / m2;
  } else {
    r.lm = std::numeric_limits<double>::quiet_NaN();
    r.lm_defined = false;
  }
  const double dm = m1 - m2;
  r.lr = 0.5 * (dm + std::sqrt(dm * dm + 4 * m12 * m12));
  return r;
}

ArLmLr ar_lm_lr(const RobustStatBundle& b) {
  ArLmLr r = ar_lm_lr(b.m1, b.m2, b.m12);
  if (b.n1.size() == 1) {
    // scalar case: the three statistics coincide algebraically
    r.lr = r.ar;
    if (r.lm_defined) r.lm = r.ar;
  }
  return r;
}

double chi2_quantile(double df, double prob) {
  if (prob <= 0) return 0;
  if (prob >= 1) return std::numeric_limits<double>::infinity();
  return boost::math::quantile(boost::math::chi_squared(df), prob);
}

namespace {

void draw_components(int q, int reps, std::uint64_t seed, std::vector<double>& z1sq, std::vector<double>& rest) {
  if (q < 1) fail_validation("q must be >= 1");
  if (reps < 10000) fail_validation("conditional critical values need at least 10000 replications");
  auto eng = stream_engine(seed, 0);
  std::normal_distribution<double> nd;
  z1sq.resize(reps);
  rest.resize(reps);
  for (int r = 0; r < reps; ++r) {
    const double z = nd(eng);
    z1sq[r] = z * z;
    double s = 0;
    for (int j = 1; j < q; ++j) {
      const double w = nd(eng);
      s += w * w;
    }
    rest[r] = s;
  }
}

double lr_quantile(const std::vector<double>& z1sq, const std::vector<double>& rest, double m2, double alpha) {
  const size_t R = z1sq.size();
  std::vector<double> v(R);
  for (size_t r = 0; r < R; ++r) {
    const double Q = z1sq[r] + rest[r];
    const double dm = Q - m2;
    v[r] = 0.5 * (dm + std::sqrt(dm * dm + 4 * m2 * z1sq[r]));
  }
  // type-7 quantile via two order statistics
  const double h = (static_cast<double>(R) - 1) * (1 - alpha);
  const auto lo = static_cast<size_t>(std::floor(h));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double a = v[lo];
  if (lo + 1 >= R) return a;
  const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return a + (h - static_cast<double>(lo)) * (b - a);
}

}  // namespace

ClrCritical::ClrCritical(int q, double alpha, int reps, std::uint64_t seed, int knots, double max_m2)
    : q_(q), alpha_(alpha) {
  if (!(alpha > 0) || !(alpha < 1)) fail_validation("alpha must lie in (0, 1)");
  if (knots < 3) fail_validation("need at least 3 knots");
  x_.resize(knots);
  x_[0] = 0;
  const double lo = std::log(1e-2), hi = std::log(max_m2);
  for (int i = 1; i < knots; ++i) x_[i] = std::exp(lo + (hi - lo) * (i - 1) / (knots - 2));
  y_.resize(knots);
  if (q == 1) {
    std::fill(y_.begin(), y_.end(), chi2_quantile(1, 1 - alpha));
  } else {
    draw_components(q, reps, seed, z1sq_, rest_);
    for (int i = 0; i < knots; ++i) y_[i] = lr_quantile(z1sq_, rest_, x_[i], alpha);
  }
  // Fritsch–Carlson slopes
  const int n = knots;
  std::vector<double> dl(n - 1);
  for (int i = 0; i + 1 < n; ++i) dl[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
  slope_.assign(n, 0.0);
  slope_[0] = dl[0];
  slope_[n - 1] = dl[n - 2];
  for (int i = 1; i + 1 < n; ++i) slope_[i] = dl[i - 1] * dl[i] <= 0 ? 0.0 : 0.5 * (dl[i - 1] + dl[i]);
  for (int i = 0; i + 1 < n; ++i) {
    if (dl[i] == 0) {
      slope_[i] = slope_[i + 1] = 0;
      continue;
    }
    const double a = slope_[i] / dl[i], b = slope_[i + 1] / dl[i];
    const double s = a * a + b * b;
    if (s > 9) {
      const double t = 3 / std::sqrt(s);
      slope_[i] = t * a * dl[i];
      slope_[i + 1] = t * b * dl[i];
    }
  }
}

double ClrCritical::simulate(double m2) const {
  if (q_ == 1) return y_.front();
  return lr_quantile(z1sq_, rest_, m2, alpha_);
}

double ClrCritical::operator()(double m2) const {
  if (!(m2 >= 0)) m2 = 0;
  if (m2 > x_.back()) return simulate(m2);
  const auto it = std::upper_bound(x_.begin(), x_.end(), m2);
  const size_t i = std::min<size_t>(static_cast<size_t>(it - x_.begin()), x_.size() - 1) - 1;
  const double h = x_[i + 1] - x_[i];
  const double t = (m2 - x_[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * slope_[i] + (-2 * t3 + 3 * t2) * y_[i + 1] +
         (t3 - t2) * h * slope_[i + 1];
}

const ClrCritical& ClrCritical::cached(int q, double alpha) {
  static std::mutex mu;
  static std::map<std::pair<int, long long>, std::unique_ptr<ClrCritical>> cache;
  const auto key = std::make_pair(q, std::llround(alpha * 1e9));
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[key];
  if (!slot) slot = std::make_unique<ClrCritical>(q, alpha);
  return *slot;
}

double clr_critical_value(const Eigen::VectorXd& n2, double alpha, int reps, std::uint64_t seed) {
  if (!(alpha > 0) || !(alpha < 1)) fail_validation("alpha must lie in (0, 1)");
  std::vector<double> z1sq, rest;
  draw_components(static_cast<int>(n2.size()), reps, seed, z1sq, rest);
  return lr_quantile(z1sq, rest, n2.squaredNorm(), alpha);
}

LengthRules M2SearchConfig::rules(int T) const {
  if (pi_l) return search_rules(T, eps, *pi_l, m_plus);
  return open_rules(T, eps, m_plus);
}

namespace {

double exact_m2(const Dataset& ds, const Partition& P, double beta0, const HacConfig& hac) {
  try {
    return robust_bundle(ds, P, beta0, hac).m2;
  } catch (const ComputationError&) {
    return kNegInf;
  }
}

}  // namespace

M2SearchResult shat_m2(const Dataset& ds, double beta0, const M2SearchConfig& cfg, const HacConfig& hac) {
  ds.validate();
  const int T = ds.T(), q = ds.q();
  if (cfg.top_k < 1) fail_validation("top_k must be >= 1");
  const LengthRules rules = cfg.rules(T);

  M2SearchResult res;
  double best = kNegInf;
  auto offer = [&](const Partition& P, double v) {
    if (v == kNegInf) return;
    if (best == kNegInf || better_candidate(v, P, best, res.partition)) {
      best = v;
      res.partition = P;
    }
  };

  if (cfg.enumeration_guard && count_partitions_cached(rules, cfg.enumeration_bound) <= cfg.enumeration_bound) {
    for_each_partition(rules, [&](const Partition& P) {
      offer(P, exact_m2(ds, P, beta0, hac));
      return true;
    });
    res.enumerated = true;
  } else {
    // Pilot on the full sample: the numerator of n2 is additive over selected rows given these weights.
    const RobustStatBundle pilot = robust_bundle(ds, Partition::full(T), beta0, hac);
    const Eigen::Vector2d c2 = pilot.sigma_v.inverse() * pilot.a0;
    const Eigen::MatrixXd R = pilot.sigma_n1n2 * pilot.sigma_n1.ldlt().solve(Eigen::MatrixXd::Identity(q, q));
    Eigen::MatrixXd Y(T, 2);
    Y.col(0) = ds.y;
    Y.col(1) = ds.d;
    const Eigen::MatrixXd yt = residualize(Y, ds.x);
    const Eigen::VectorXd u1 = yt * pilot.b0;
    const Eigen::VectorXd u2 = yt * c2;
    Eigen::MatrixXd h(T, q);
    for (int t = 0; t < T; ++t) h.row(t) = (ds.z.row(t) * u2(t)) - (R * ds.z.row(t).transpose() * u1(t)).transpose();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(T + 1, q);
    for (int t = 0; t < T; ++t) H.row(t + 1) = H.row(t) + h.row(t);
    Eigen::MatrixXd omega = pilot.sigma_n2;
    if (!(omega.trace() > 0) || min_eigenvalue(omega) <= 1e-12 * omega.trace()) omega = Eigen::MatrixXd::Identity(q, q);
    const Eigen::LDLT<Eigen::MatrixXd> fo(omega);

    auto surrogate = [&](const Partition& P) {
      Eigen::VectorXd s = Eigen::VectorXd::Zero(q);
      for (const auto& seg : P.segments()) s += (H.row(seg.end - 1) - H.row(seg.start - 1)).transpose();
      return s.dot(fo.solve(s)) / P.total_length();
    };

    std::vector<DpCandidate> cands;
    if (q == 1) {
      std::vector<double> hp(T + 1), hm(T + 1);
      for (int t = 0; t <= T; ++t) {
        hp[t] = H(t, 0);
        hm[t] = -H(t, 0);
      }
      for (const auto* series : {&hp, &hm}) {
        const DpProfile prof = dp_profile_linear(*series, rules, 1);
        for (int L = rules.min_total; L <= T; ++L)
          for (const auto& c : prof.top[L]) cands.push_back(c);
      }
    } else {
      SegmentTable w(T, rules.min_segment);
      for (int e = rules.min_segment; e <= T; ++e)
        for (int s = 0; s + rules.min_segment <= e; ++s) {
          const Eigen::VectorXd d = (H.row(e) - H.row(s)).transpose();
          w.set(s, e, d.dot(fo.solve(d)));
        }
      const DpProfile prof = dp_profile(w, rules, 1);
      for (int L = rules.min_total; L <= T; ++L)
        for (const auto& c : prof.top[L]) cands.push_back(c);
    }
    for (auto& c : cands) c.score = surrogate(c.partition);
    std::stable_sort(cands.begin(), cands.end(), [](const DpCandidate& a, const DpCandidate& b) {
      return better_candidate(a.score, a.partition, b.score, b.partition);
    });
    int taken = 0;
    std::vector<Partition> seen;
    for (const auto& c : cands) {
      if (taken >= cfg.top_k) break;
      if (std::find(seen.begin(), seen.end(), c.partition) != seen.end()) continue;
      seen.push_back(c.partition);
      ++taken;
      offer(c.partition, exact_m2(ds, c.partition, beta0, hac));
    }
  }
  if (best == kNegInf) throw ComputationError("no admissible subsample gives a finite identification statistic");
  res.m2 = best;
  return res;
}

std::string to_string(RobustMode m) {
  switch (m) {
    case RobustMode::full_sample: return "full_sample";
    case RobustMode::known_subsample: return "known_subsample";
    case RobustMode::estimated_subsample: return "estimated_subsample";
  }
  return "unknown";
}

RobustTestReport robust_test(const Dataset& ds, double beta0, double alpha, RobustMode mode,
                             const std::optional<Partition>& known, const M2SearchConfig& cfg, const HacConfig& hac) {
  if (!(alpha >= 0) || alpha > 1) fail_validation("alpha must lie in [0, 1]");
  ds.validate();
  RobustTestReport rep;
  rep.mode = mode;
  rep.alpha = alpha;
  rep.beta0 = beta0;
  switch (mode) {
    case RobustMode::full_sample: rep.partition = Partition::full(ds.T()); break;
    case RobustMode::known_subsample:
      if (!known) fail_validation("known-subsample mode needs a partition");
      rep.partition = *known;
      break;
    case RobustMode::estimated_subsample: rep.partition = shat_m2(ds, beta0, cfg, hac).partition; break;
  }
  const RobustStatBundle b = robust_bundle(ds, rep.partition, beta0, hac);
  if (b.psd_repaired) rep.warnings.push_back("Schur complement was not PSD after roundoff and was repaired");
  const ArLmLr s = ar_lm_lr(b);
  rep.ar = s.ar;
  rep.lm = s.lm;
  rep.lr = s.lr;
  rep.lm_defined = s.lm_defined;
  rep.m1 = b.m1;
  rep.m2 = b.m2;
  rep.m12 = b.m12;
  const int q = ds.q();
  const double inf = std::numeric_limits<double>::infinity();
  if (alpha <= 0) {
    rep.chi2_q = rep.chi2_1 = rep.kappa_alpha = inf;
  } else if (alpha >= 1) {
    rep.chi2_q = rep.chi2_1 = rep.kappa_alpha = -inf;
  } else {
    rep.chi2_q = chi2_quantile(q, 1 - alpha);
    rep.chi2_1 = chi2_quantile(1, 1 - alpha);
    rep.kappa_alpha = q == 1 ? rep.chi2_1 : ClrCritical::cached(q, alpha)(b.m2);
  }
  rep.reject_ar = rep.ar > rep.chi2_q;
  rep.reject_lm = s.lm_defined && rep.lm > rep.chi2_1;
  rep.reject_clr = rep.lr > rep.kappa_alpha;
  if (!s.lm_defined) rep.warnings.push_back("identification statistic m2 is zero; LM is undefined");
  return rep;
}

}  // namespace pilate
