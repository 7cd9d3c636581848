#include "pilate/compliers.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>

#include "pilate/linalg.hpp"

namespace pilate {

void WindowSpec::validate() const {
  if (n0 < 2 || n1 < 2) fail_validation("window sizes n0 and n1 must be at least 2");
}

std::vector<int> nearest_window(const std::vector<int>& sorted, int anchor, int n, WindowSide side) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), anchor);
  const int k = static_cast<int>(it - sorted.begin());
  const bool member = it != sorted.end() && *it == anchor;
  int start;
  if (side == WindowSide::one_sided_left)
    start = member ? k - n + 1 : k - n;
  else
    start = member ? k - (n - 1) / 2 : k - n / 2;
  if (start < 0 || start + n > static_cast<int>(sorted.size())) return {};
  return std::vector<int>(sorted.begin() + start, sorted.begin() + start + n);
}

namespace {

struct Split {
  std::vector<int> policy, control;
};

Split split_rows(const std::vector<int>& indicator) {
  Split s;
  for (int t = 0; t < static_cast<int>(indicator.size()); ++t) (indicator[t] ? s.policy : s.control).push_back(t);
  return s;
}

double mean_of(const Eigen::VectorXd& x, const std::vector<int>& rows) {
  double s = 0;
  for (int r : rows) s += x(r);
  return s / static_cast<double>(rows.size());
}

Eigen::VectorXd gather(const Eigen::VectorXd& x, const std::vector<int>& rows) {
  Eigen::VectorXd out(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = x(rows[i]);
  return out;
}

// Newey–West variance of a series demeaned by its own mean, cube-root lags.
double demeaned_lrv(const Eigen::VectorXd& x) {
  HacConfig hac;
  hac.demean = true;
  return newey_west(Eigen::MatrixXd(x), hac).matrix(0, 0);
}

std::optional<WindowMeans> means_for(const Eigen::VectorXd& series, const Split& sp, const WindowSpec& spec,
                                     int t0, bool is_policy) {
  int anchor = t0;
  if (!is_policy) {
    if (sp.policy.empty()) return std::nullopt;
    const auto it = std::lower_bound(sp.policy.begin(), sp.policy.end(), t0);
    if (it == sp.policy.end())
      anchor = sp.policy.back();
    else if (it == sp.policy.begin())
      anchor = *it;
    else
      anchor = (t0 - *(it - 1) <= *it - t0) ? *(it - 1) : *it;
  }
  WindowMeans w;
  w.policy_rows = nearest_window(sp.policy, anchor, spec.n1, spec.side);
  w.control_rows = nearest_window(sp.control, t0, spec.n0, spec.side);
  if (w.policy_rows.empty() || w.control_rows.empty()) return std::nullopt;
  w.policy = mean_of(series, w.policy_rows);
  w.control = mean_of(series, w.control_rows);
  return w;
}

double upper_normal(double prob) {
  if (prob <= 0) return -std::numeric_limits<double>::infinity();
  if (prob >= 1) return std::numeric_limits<double>::infinity();
  return boost::math::quantile(boost::math::normal(), prob);
}

void check_indicator(const std::vector<int>& policy, int T) {
  if (static_cast<int>(policy.size()) != T) fail_validation("policy indicator length differs from the series");
  for (int v : policy)
    if (v != 0 && v != 1) fail_validation("policy indicator must be 0/1");
}

}  // namespace

std::optional<WindowMeans> rolling_means(const Eigen::VectorXd& series, const std::vector<int>& policy,
                                         const WindowSpec& spec, int t0) {
  spec.validate();
  check_indicator(policy, static_cast<int>(series.size()));
  if (t0 < 0 || t0 >= series.size()) fail_validation("date index out of range");
  return means_for(series, split_rows(policy), spec, t0, policy[t0] == 1);
}

std::string to_string(ComplierStatus s) {
  switch (s) {
    case ComplierStatus::complier: return "complier";
    case ComplierStatus::non_complier: return "non_complier";
    case ComplierStatus::undetermined: return "undetermined";
  }
  return "undetermined";
}

double ComplierReport::complier_share() const {
  const int c = count(ComplierStatus::complier);
  const int n = c + count(ComplierStatus::non_complier);
  return n > 0 ? static_cast<double>(c) / n : std::numeric_limits<double>::quiet_NaN();
}

int ComplierReport::count(ComplierStatus s) const {
  return static_cast<int>(std::count_if(dates.begin(), dates.end(), [&](const auto& d) { return d.status == s; }));
}

double mean_difference_t(const Eigen::VectorXd& a, const Eigen::VectorXd& b, MeanDiffVariance v) {
  if (a.size() < 1 || b.size() < 1) fail_validation("mean comparison needs observations on both sides");
  const double diff = a.mean() - b.mean();
  const double jb = b.size() >= 2 ? demeaned_lrv(b) : 0.0;
  double denom;
  if (v == MeanDiffVariance::control_only) {
    if (!(jb > 0)) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(static_cast<double>(b.size())) * diff / std::sqrt(jb);
  }
  const double ja = a.size() >= 2 ? demeaned_lrv(a) : 0.0;
  denom = jb / static_cast<double>(b.size()) + ja / static_cast<double>(a.size());
  if (!(denom > 0)) return std::numeric_limits<double>::quiet_NaN();
  return diff / std::sqrt(denom);
}

namespace {

DateClassification classify_one(const Eigen::VectorXd& x, const Split& sp, const std::vector<int>& policy, int t0,
                                 const ComplierConfig& cfg, double crit) {
  DateClassification dc;
  dc.row = t0;
  dc.policy = policy[t0] == 1;
  const auto w = means_for(x, sp, cfg.windows, t0, dc.policy);
  if (!w) {
    dc.t = std::numeric_limits<double>::quiet_NaN();
    return dc;
  }
  dc.windows_complete = true;
  dc.mean_policy = w->policy;
  dc.mean_control = w->control;
  dc.t = mean_difference_t(gather(x, w->policy_rows), gather(x, w->control_rows), cfg.variance);
  if (std::isnan(dc.t)) return dc;
  dc.status = dc.t > crit ? ComplierStatus::complier : ComplierStatus::non_complier;
  return dc;
}

Eigen::VectorXd transformed(const Eigen::VectorXd& d, Transform tr) {
  return tr == Transform::square ? Eigen::VectorXd(d.array().square()) : d;
}

}  // namespace

DateClassification complier_ttest(const Eigen::VectorXd& d, const std::vector<int>& policy, int t0,
                                  const ComplierConfig& cfg) {
  cfg.windows.validate();
  check_indicator(policy, static_cast<int>(d.size()));
  if (t0 < 0 || t0 >= d.size()) fail_validation("date index out of range");
  if (!(cfg.alpha >= 0) || cfg.alpha > 1) fail_validation("alpha must lie in [0, 1]");
  return classify_one(transformed(d, cfg.transform), split_rows(policy), policy, t0, cfg, upper_normal(1 - cfg.alpha));
}

ComplierReport classify_dates(const Eigen::VectorXd& d, const std::vector<int>& policy, const ComplierConfig& cfg) {
  cfg.windows.validate();
  check_indicator(policy, static_cast<int>(d.size()));
  if (!(cfg.alpha >= 0) || cfg.alpha > 1) fail_validation("alpha must lie in [0, 1]");
  const Eigen::VectorXd x = transformed(d, cfg.transform);
  const Split sp = split_rows(policy);
  const double crit = upper_normal(1 - cfg.alpha);
  ComplierReport rep;
  rep.alpha = cfg.alpha;
  int degenerate = 0;
  for (int t = 0; t < d.size(); ++t) {
    rep.dates.push_back(classify_one(x, sp, policy, t, cfg, crit));
    const auto& dc = rep.dates.back();
    if (dc.windows_complete && dc.status == ComplierStatus::undetermined) ++degenerate;
  }
  if (degenerate > 0)
    rep.warnings.push_back(std::to_string(degenerate) + " dates have a zero window variance and stay undetermined");
  return rep;
}

ComplierReport classify_dates(const Dataset& ds, const ComplierConfig& cfg) {
  if (!ds.policy) fail_validation("complier classification needs a policy indicator column");
  return classify_dates(ds.d, *ds.policy, cfg);
}

TestReport exclusion_test(const Eigen::VectorXd& outcome, const Eigen::VectorXd& d, const ComplierReport& report,
                          const ExclusionConfig& cfg) {
  if (outcome.size() != d.size()) fail_validation("outcome and policy variable lengths differ");
  if (!(cfg.alpha >= 0) || cfg.alpha > 1) fail_validation("alpha must lie in [0, 1]");
  if (cfg.min_size < 1) fail_validation("minimum group size must be >= 1");
  const double thr = cfg.threshold ? *cfg.threshold : d.mean();
  std::vector<int> pol, ctl;
  for (const auto& dc : report.dates) {
    if (dc.status != ComplierStatus::non_complier) continue;
    if (dc.row < 0 || dc.row >= d.size()) fail_validation("classification does not match the series length");
    if (cfg.subset == SubsetRule::above && !(d(dc.row) > thr)) continue;
    if (cfg.subset == SubsetRule::below && !(d(dc.row) < thr)) continue;
    (dc.policy ? pol : ctl).push_back(dc.row);
  }
  if (static_cast<int>(pol.size()) < cfg.min_size)
    fail_validation("policy-side non-complier subset has " + std::to_string(pol.size()) + " dates; need at least " +
                    std::to_string(cfg.min_size));
  if (static_cast<int>(ctl.size()) < cfg.min_size)
    fail_validation("control-side non-complier subset has " + std::to_string(ctl.size()) + " dates; need at least " +
                    std::to_string(cfg.min_size));
  const Eigen::VectorXd a = gather(outcome, pol), b = gather(outcome, ctl);
  TestReport r;
  r.test = "exclusion";
  r.alpha = cfg.alpha;
  r.statistic = mean_difference_t(a, b, cfg.variance);
  if (std::isnan(r.statistic)) {
    // zero estimated variance (e.g. one date per side): any nonzero gap is infinitely significant
    const double gap = a.mean() - b.mean();
    r.statistic = gap == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), gap);
    r.diagnostics["zero_variance"] = 1;
  }
  r.critical_value = upper_normal(1 - cfg.alpha / 2);
  r.reject = std::abs(r.statistic) > r.critical_value;
  r.diagnostics["n_policy"] = static_cast<double>(pol.size());
  r.diagnostics["n_control"] = static_cast<double>(ctl.size());
  r.diagnostics["mean_policy"] = a.mean();
  r.diagnostics["mean_control"] = b.mean();
  return r;
}

}  // namespace pilate
