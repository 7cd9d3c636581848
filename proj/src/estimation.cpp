#include "pilate/estimation.hpp"

#include <cmath>

#include "pilate/partition_dp.hpp"

namespace pilate {

LengthRules EstimationConfig::rules(int T) const {
  LengthRules r = exact_rules(T, eps, pi0, m0);
  if (!exact_length) r.max_total = T;
  return r;
}

namespace {

// Prefix sums of z z', z x', z [y d] and full-sample x quantities; the reduced-form fit on
// [C_S z : x] depends on S only through segment sums of the first three.
class Moments {
 public:
  explicit Moments(const Dataset& ds) : q_(ds.q()), p_(ds.p()), T_(ds.T()) {
    const int q = q_, p = p_;
    pzz_.assign(static_cast<size_t>(T_ + 1) * q * q, 0.0);
    pzx_.assign(static_cast<size_t>(T_ + 1) * q * p, 0.0);
    pzy_.assign(static_cast<size_t>(T_ + 1) * q * 2, 0.0);
    for (int t = 0; t < T_; ++t) {
      double* zz = &pzz_[static_cast<size_t>(t + 1) * q * q];
      double* zx = &pzx_[static_cast<size_t>(t + 1) * q * p];
      double* zy = &pzy_[static_cast<size_t>(t + 1) * q * 2];
      const double* zz0 = zz - q * q;
      const double* zx0 = zx - q * p;
      const double* zy0 = zy - q * 2;
      for (int i = 0; i < q; ++i) {
        const double zi = ds.z(t, i);
        for (int j = 0; j < q; ++j) zz[i * q + j] = zz0[i * q + j] + zi * ds.z(t, j);
        for (int j = 0; j < p; ++j) zx[i * p + j] = zx0[i * p + j] + zi * ds.x(t, j);
        zy[i * 2] = zy0[i * 2] + zi * ds.y(t);
        zy[i * 2 + 1] = zy0[i * 2 + 1] + zi * ds.d(t);
      }
    }
    Eigen::MatrixXd Y(T_, 2);
    Y.col(0) = ds.y;
    Y.col(1) = ds.d;
    if (p > 0) {
      if (numerical_rank(ds.x) < p) throw SingularityError("exogenous regressors are rank deficient");
      const Eigen::MatrixXd xx = ds.x.transpose() * ds.x;
      xxinv_ = xx.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
      gam_ = xxinv_ * (ds.x.transpose() * Y);
      const Eigen::MatrixXd r = Y - ds.x * gam_;
      yty_ = r.transpose() * r;
    } else {
      xxinv_.resize(0, 0);
      gam_.resize(0, 2);
      yty_ = Y.transpose() * Y;
    }
    h_.resize(static_cast<size_t>(q) * p);
    g_.resize(static_cast<size_t>(q) * q);
    a_.resize(static_cast<size_t>(q) * 2);
  }

  int q() const { return q_; }
  int p() const { return p_; }
  size_t nzz() const { return static_cast<size_t>(q_) * q_; }
  size_t nzx() const { return static_cast<size_t>(q_) * p_; }
  size_t nzy() const { return static_cast<size_t>(q_) * 2; }
  const Eigen::Matrix2d& yty() const { return yty_; }

  // acc += segment sums over rows [s, e)
  void add_segment(int s, int e, double* zz, double* zx, double* zy) const {
    const double* a = &pzz_[static_cast<size_t>(e) * nzz()];
    const double* b = &pzz_[static_cast<size_t>(s) * nzz()];
    for (size_t i = 0; i < nzz(); ++i) zz[i] += a[i] - b[i];
    a = &pzx_[static_cast<size_t>(e) * nzx()];
    b = &pzx_[static_cast<size_t>(s) * nzx()];
    for (size_t i = 0; i < nzx(); ++i) zx[i] += a[i] - b[i];
    a = &pzy_[static_cast<size_t>(e) * nzy()];
    b = &pzy_[static_cast<size_t>(s) * nzy()];
    for (size_t i = 0; i < nzy(); ++i) zy[i] += a[i] - b[i];
  }

  // tr(W A'G⁻¹A) with G = Szz − Szx (x'x)⁻¹ Szx', A = Szy − Szx Γ; −inf if G is not positive definite.
  double gain(const double* zz, const double* zx, const double* zy, const Eigen::Matrix2d& W) const {
    const int q = q_, p = p_;
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < p; ++j) {
        double v = 0;
        for (int k = 0; k < p; ++k) v += zx[i * p + k] * xxinv_(k, j);
        h_[i * p + j] = v;
      }
    for (int i = 0; i < q; ++i)
      for (int j = 0; j <= i; ++j) {
        double v = zz[i * q + j];
        for (int k = 0; k < p; ++k) v -= h_[i * p + k] * zx[j * p + k];
        g_[i * q + j] = v;
      }
    for (int i = 0; i < q; ++i)
      for (int c = 0; c < 2; ++c) {
        double v = zy[i * 2 + c];
        for (int k = 0; k < p; ++k) v -= zx[i * p + k] * gam_(k, c);
        a_[i * 2 + c] = v;
      }
    double scale = 0;
    for (int i = 0; i < q; ++i) scale = std::max(scale, std::abs(zz[i * q + i]));
    // Cholesky of the lower triangle in place, then forward-substitute A
    for (int j = 0; j < q; ++j) {
      double d = g_[j * q + j];
      for (int k = 0; k < j; ++k) d -= g_[j * q + k] * g_[j * q + k];
      if (!(d > 1e-12 * scale)) return kNegInf;
      d = std::sqrt(d);
      g_[j * q + j] = d;
      for (int i = j + 1; i < q; ++i) {
        double v = g_[i * q + j];
        for (int k = 0; k < j; ++k) v -= g_[i * q + k] * g_[j * q + k];
        g_[i * q + j] = v / d;
      }
    }
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < q; ++i) {
        double v = a_[i * 2 + c];
        for (int k = 0; k < i; ++k) v -= g_[i * q + k] * a_[k * 2 + c];
        a_[i * 2 + c] = v / g_[i * q + i];
      }
    double v00 = 0, v01 = 0, v11 = 0;
    for (int i = 0; i < q; ++i) {
      v00 += a_[i * 2] * a_[i * 2];
      v01 += a_[i * 2] * a_[i * 2 + 1];
      v11 += a_[i * 2 + 1] * a_[i * 2 + 1];
    }
    return W(0, 0) * v00 + 2 * W(0, 1) * v01 + W(1, 1) * v11;
  }

  double gain(const Partition& P, const Eigen::Matrix2d& W) const {
    std::vector<double> zz(nzz(), 0.0), zx(nzx(), 0.0), zy(nzy(), 0.0);
    for (const auto& s : P.segments()) add_segment(s.start - 1, s.end - 1, zz.data(), zx.data(), zy.data());
    return gain(zz.data(), zx.data(), zy.data(), W);
  }

 private:
  int q_, p_, T_;
  std::vector<double> pzz_, pzx_, pzy_;
  Eigen::MatrixXd xxinv_, gam_;
  Eigen::Matrix2d yty_;
  mutable std::vector<double> h_, g_, a_;
};

// Depth-first walk over the class carrying running segment sums, so each leaf costs one gain().
class Enumerator {
 public:
  Enumerator(const Moments& m, const LengthRules& r, const Eigen::Matrix2d& W) : m_(m), r_(r), W_(W) {
    const int K = r.max_count;
    zz_.assign(K + 1, std::vector<double>(m.nzz(), 0.0));
    zx_.assign(K + 1, std::vector<double>(m.nzx(), 0.0));
    zy_.assign(K + 1, std::vector<double>(m.nzy(), 0.0));
    cuts_.resize(2 * K);
  }

  void run() { walk(0, 0, 0); }
  bool found() const { return best_ > kNegInf; }
  double best_gain() const { return best_; }
  Partition best_partition() const {
    std::vector<Segment> segs;
    for (int i = 0; i < best_k_; ++i) segs.push_back({best_cuts_[2 * i] + 1, best_cuts_[2 * i + 1] + 1});
    return Partition(std::move(segs), r_.T);
  }

 private:
  void walk(int k, int next_start, int used) {
    if (k == r_.max_count) return;
    const int lmin = r_.min_segment;
    const int rem = r_.max_count - k - 1;  // segments that may still follow
    const int need_after = std::max(0, r_.min_count - k - 1);
    for (int s = next_start; s + lmin <= r_.T; ++s) {
      int e_lo = s + lmin;
      int e_hi = std::min(r_.T, s + (r_.max_total - used));
      // leave room for the segments still required
      e_hi = std::min(e_hi, r_.T - need_after * (lmin + 1));
      if (need_after == 0 && rem == 0) e_lo = std::max(e_lo, s + (r_.min_total - used));
      for (int e = e_lo; e <= e_hi; ++e) {
        const int u = used + (e - s);
        auto& zz = zz_[k + 1];
        auto& zx = zx_[k + 1];
        auto& zy = zy_[k + 1];
        zz = zz_[k];
        zx = zx_[k];
        zy = zy_[k];
        m_.add_segment(s, e, zz.data(), zx.data(), zy.data());
        cuts_[2 * k] = s;
        cuts_[2 * k + 1] = e;
        if (k + 1 >= r_.min_count && u >= r_.min_total && u <= r_.max_total) {
          const double g = m_.gain(zz.data(), zx.data(), zy.data(), W_);
          // enumeration order already prefers the earlier first start on ties
          if (g > best_ || (g == best_ && g > kNegInf && u > best_len_)) {
            best_ = g;
            best_len_ = u;
            best_k_ = k + 1;
            best_cuts_.assign(cuts_.begin(), cuts_.begin() + 2 * (k + 1));
          }
        }
        if (rem > 0 && u + lmin <= r_.max_total) walk(k + 1, e + 1, u);
      }
    }
  }

  const Moments& m_;
  const LengthRules& r_;
  Eigen::Matrix2d W_;
  std::vector<std::vector<double>> zz_, zx_, zy_;
  std::vector<int> cuts_, best_cuts_;
  double best_ = kNegInf;
  int best_len_ = 0;
  int best_k_ = 0;
};

SubsampleFit minimize(const Dataset& ds, const EstimationConfig& cfg, const Eigen::Matrix2d& W) {
  ds.validate();
  const LengthRules rules = cfg.rules(ds.T());
  if (rules.min_total <= ds.p() + ds.q()) fail_validation("subsample too short for the reduced-form regression");
  const Moments m(ds);
  SubsampleFit fit;
  double best = kNegInf;
  if (count_partitions_cached(rules, cfg.enumeration_bound) <= cfg.enumeration_bound) {
    Enumerator en(m, rules, W);
    en.run();
    if (en.found()) {
      best = en.best_gain();
      fit.partition = en.best_partition();
    }
    fit.enumerated = true;
  } else {
    const int T = ds.T();
    SegmentTable w(T, rules.min_segment);
    std::vector<double> zz(m.nzz()), zx(m.nzx()), zy(m.nzy());
    for (int s = 0; s + rules.min_segment <= T; ++s)
      for (int e = s + rules.min_segment; e <= T; ++e) {
        std::fill(zz.begin(), zz.end(), 0.0);
        std::fill(zx.begin(), zx.end(), 0.0);
        std::fill(zy.begin(), zy.end(), 0.0);
        m.add_segment(s, e, zz.data(), zx.data(), zy.data());
        w.set(s, e, m.gain(zz.data(), zx.data(), zy.data(), W));
      }
    const DpProfile prof = dp_profile(w, rules, cfg.top_k);
    for (int L = T; L >= rules.min_total; --L)
      for (const auto& c : prof.top[L]) {
        const double g = m.gain(c.partition, W);
        if (g > kNegInf && (best == kNegInf || better_candidate(g, c.partition, best, fit.partition))) {
          best = g;
          fit.partition = c.partition;
        }
      }
  }
  if (best == kNegInf) throw SingularityError("instrument design is singular on every admissible subsample");
  fit.criterion = (W.cwiseProduct(m.yty())).sum() - best;
  return fit;
}

}  // namespace

double reduced_form_criterion(const Dataset& ds, const Partition& P, const Eigen::Matrix2d& weight) {
  Eigen::MatrixXd R(ds.T(), ds.q() + ds.p());
  R.leftCols(ds.q()) = zero_fill(ds.z, P);
  if (ds.p() > 0) R.rightCols(ds.p()) = ds.x;
  Eigen::MatrixXd Y(ds.T(), 2);
  Y.col(0) = ds.y;
  Y.col(1) = ds.d;
  const Eigen::MatrixXd E = ols(Y, R).residuals;
  return (weight.cwiseProduct(E.transpose() * E)).sum();
}

SubsampleFit shat_weighted(const Dataset& ds, const EstimationConfig& cfg, const Eigen::Matrix2d& weight) {
  return minimize(ds, cfg, weight);
}

SubsampleFit shat_ols(const Dataset& ds, const EstimationConfig& cfg) {
  Eigen::Matrix2d W = Eigen::Matrix2d::Zero();
  W(1, 1) = 1.0;
  return minimize(ds, cfg, W);
}

Eigen::Matrix2d pilot_sigma(const Dataset& ds, const Partition& pilot) {
  const int T = ds.T();
  const IvFit iv = beta_on_subsample(ds, pilot);
  Eigen::MatrixXd R(T, ds.q() + ds.p());
  R.leftCols(ds.q()) = zero_fill(ds.z, pilot);
  if (ds.p() > 0) R.rightCols(ds.p()) = ds.x;
  const Eigen::VectorXd ehat = ols(ds.d, R).residuals.col(0);
  Eigen::VectorXd v1 = ds.y - iv.beta * (ds.d - ehat);
  if (ds.p() > 0) v1 -= ds.x * ols(ds.y - iv.beta * ds.d, ds.x).coef.col(0);
  Eigen::MatrixXd E(T, 2);
  E.col(0) = v1;
  E.col(1) = ehat;
  return E.transpose() * E / static_cast<double>(T - ds.q() - ds.p());
}

FglsFit shat_fgls(const Dataset& ds, const EstimationConfig& cfg, const Partition& pilot) {
  FglsFit out;
  Eigen::Matrix2d sigma;
  try {
    sigma = pilot_sigma(ds, pilot);
  } catch (const ComputationError& ex) {
    out.fell_back_to_ols = true;
    out.warning = std::string("pilot fit failed (") + ex.what() + "); using the OLS criterion";
  }
  if (!out.fell_back_to_ols) {
    const double det = sigma.determinant();
    const double tr = sigma.trace();
    if (!(tr > 0) || !(det > 1e-12 * tr * tr)) {
      out.fell_back_to_ols = true;
      out.warning = "reduced-form error covariance is singular; using the OLS criterion";
    }
  }
  SubsampleFit f;
  if (out.fell_back_to_ols) {
    f = shat_ols(ds, cfg);
  } else {
    out.sigma = sigma;
    f = minimize(ds, cfg, sigma.inverse());
  }
  out.partition = f.partition;
  out.criterion = f.criterion;
  out.enumerated = f.enumerated;
  return out;
}

IvFit beta_on_subsample(const Dataset& ds, const Partition& P, const HacConfig& hac) {
  if (P.T() != ds.T()) fail_validation("partition length differs from dataset T");
  return tsls(ds.y, ds.d, ds.x, zero_fill(ds.z, P), hac);
}

EstimationResult estimate(const Dataset& ds, const EstimationConfig& cfg, EstimationMethod method,
                          const HacConfig& hac) {
  EstimationResult r;
  r.method = method;
  const SubsampleFit ols_fit = shat_ols(ds, cfg);
  if (method == EstimationMethod::ols) {
    r.partition = ols_fit.partition;
    r.criterion = ols_fit.criterion;
  } else {
    const FglsFit g = shat_fgls(ds, cfg, ols_fit.partition);
    r.partition = g.partition;
    r.criterion = g.criterion;
    if (!g.fell_back_to_ols) r.sigma = g.sigma;
    if (!g.warning.empty()) r.warnings.push_back(g.warning);
  }
  const IvFit iv = beta_on_subsample(ds, r.partition, hac);
  r.beta = iv.beta;
  r.se = iv.se;
  return r;
}

}  // namespace pilate
