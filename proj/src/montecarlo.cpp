#include "pilate/montecarlo.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "pilate/rng.hpp"

namespace pilate {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> calendar_of(const DgpSpec& s) {
  if (s.calendar) return *s.calendar;
  std::vector<int> c(s.T, 0);
  for (int t = s.calendar_period / 2; t < s.T; t += s.calendar_period) c[t] = 1;
  return c;
}

int regime_of(const std::pair<int, int>& b, int row1) {
  if (row1 <= b.first) return 0;
  if (row1 <= b.second) return 1;
  return 2;
}

Json spec_json(const DgpSpec& s) {
  Json j;
  j["kind"] = s.kind == DgpKind::calibrated ? "calibrated" : "linear_three_regime";
  j["T"] = s.T;
  j["pi0"] = s.pi0;
  j["theta"] = Json::array({s.theta1, s.theta2, s.theta3});
  j["rho"] = s.rho;
  j["rho_e"] = s.rho_e;
  j["rho_u"] = s.rho_u;
  j["beta"] = s.beta;
  j["gamma"] = Json::array({s.gamma1, s.gamma2});
  j["regressor"] = s.regressor == RegressorKind::intercept ? "intercept" : "gaussian";
  if (s.kind == DgpKind::calibrated) {
    j["sigma_v2"] = s.sigma_v2;
    j["calendar_period"] = s.calendar_period;
  }
  return j;
}

Json rate_json(const RateEstimate& r) {
  Json j;
  j["rate"] = r.rate;
  j["se"] = r.se;
  return j;
}

std::vector<char> exceeds(const std::vector<double>& x, double cv) {
  std::vector<char> h(x.size());
  for (size_t i = 0; i < x.size(); ++i) h[i] = std::isfinite(x[i]) && x[i] > cv;
  return h;
}

double finite_quantile(const std::vector<double>& x, double prob) {
  std::vector<double> f;
  for (double v : x)
    if (std::isfinite(v)) f.push_back(v);
  if (f.empty()) return kNaN;
  return quantile_type7(std::move(f), prob);
}

struct MomentSummary {
  double bias = kNaN, mse = kNaN, mse_se = kNaN;
  int used = 0;
};

MomentSummary summarize_errors(const std::vector<double>& est, double truth) {
  MomentSummary m;
  double s = 0, s2 = 0, s4 = 0;
  for (double v : est) {
    if (!std::isfinite(v)) continue;
    const double e = v - truth;
    s += e;
    s2 += e * e;
    s4 += e * e * e * e;
    ++m.used;
  }
  if (m.used == 0) return m;
  const double n = m.used;
  m.bias = s / n;
  m.mse = s2 / n;
  const double var_sq = s4 / n - m.mse * m.mse;
  m.mse_se = std::sqrt(std::max(0.0, var_sq) / n);
  return m;
}

Json moment_json(const MomentSummary& m) {
  Json j;
  j["bias"] = number(m.bias);
  j["mse"] = number(m.mse);
  j["mse_se"] = number(m.mse_se);
  j["used"] = m.used;
  return j;
}

// Paired mean and standard error of (a − truth)² − (b − truth)² over replications where both are finite.
Json paired_mse_difference(const std::vector<double>& a, const std::vector<double>& b, double truth) {
  double s = 0, s2 = 0;
  int n = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) continue;
    const double d = (a[i] - truth) * (a[i] - truth) - (b[i] - truth) * (b[i] - truth);
    s += d;
    s2 += d * d;
    ++n;
  }
  Json j;
  if (n < 2) {
    j["mean"] = nullptr;
    j["se"] = nullptr;
    return j;
  }
  const double mean = s / n;
  const double var = (s2 - n * mean * mean) / (n - 1);
  j["mean"] = mean;
  j["se"] = std::sqrt(std::max(0.0, var) / n);
  return j;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void check_run(const McRun& run) {
  if (run.reps < 1) fail_validation("replications must be >= 1");
  if (run.threads < 1) fail_validation("threads must be >= 1");
}

}  // namespace

void DgpSpec::validate() const {
  if (T < 8) fail_validation("T must be at least 8");
  if (!(pi0 > 0) || pi0 > 1) fail_validation("pi0 must lie in (0, 1]");
  if (!(std::abs(rho) < 1) || !(std::abs(rho_e) < 1) || !(std::abs(rho_u) < 1))
    fail_validation("correlation and AR coefficients must be below 1 in absolute value");
  if (burn_in < 0) fail_validation("burn-in must be nonnegative");
  if (kind == DgpKind::calibrated) {
    if (!(sigma_v2 > 0)) fail_validation("sigma_v2 must be positive");
    if (calendar_period < 2) fail_validation("calendar period must be >= 2");
    const auto c = calendar_of(*this);
    if (static_cast<int>(c.size()) != T) fail_validation("calendar length differs from T");
    int tp = 0;
    for (int v : c) {
      if (v != 0 && v != 1) fail_validation("calendar must be 0/1");
      tp += v;
    }
    if (tp == 0 || tp == T) fail_validation("calendar needs both policy and control dates");
  }
}

std::pair<int, int> DgpSpec::regime_bounds() const {
  const int b1 = T / 4;
  return {b1, b1 + floor_fraction(1.0 - pi0, T)};
}

Partition DgpSpec::outer_regimes() const {
  const auto [b1, b2] = regime_bounds();
  std::vector<Segment> segs;
  if (b1 >= 1) segs.push_back({1, b1 + 1});
  if (b2 < T) segs.push_back({b2 + 1, T + 1});
  return Partition(std::move(segs), T);
}

std::string DgpSpec::describe() const {
  std::ostringstream os;
  os << (kind == DgpKind::calibrated ? "calibrated" : "three_regime") << " T=" << T << " pi0=" << format_double(pi0)
     << " theta=(" << format_double(theta1) << "," << format_double(theta2) << "," << format_double(theta3)
     << ") rho=" << format_double(rho);
  return os.str();
}

double local_theta(double d, int T) { return d / std::sqrt(static_cast<double>(T)); }

Dataset gen_dataset(const DgpSpec& s, std::uint64_t seed, std::uint64_t index) {
  s.validate();
  auto eng = stream_engine(seed, index);
  std::normal_distribution<double> nd;
  const int T = s.T;
  const auto bounds = s.regime_bounds();
  const double theta[3] = {s.theta1, s.theta2, s.theta3};
  Eigen::VectorXd y(T), d(T);
  Eigen::MatrixXd x(T, 1), z(T, 1);

  if (s.kind == DgpKind::linear_three_regime) {
    // innovations first (burn-in included), then instruments, then regressors
    const double cr = std::sqrt(1 - s.rho * s.rho);
    Eigen::VectorXd e(T), u(T);
    double ep = 0, up = 0;
    for (int i = 0; i < s.burn_in + T; ++i) {
      const double ve = nd(eng);
      const double vu = s.rho * ve + cr * nd(eng);
      ep = s.rho_e * ep + ve;
      up = s.rho_u * up + vu;
      if (i >= s.burn_in) {
        e(i - s.burn_in) = ep;
        u(i - s.burn_in) = up;
      }
    }
    for (int t = 0; t < T; ++t) z(t, 0) = 1.0 + nd(eng);
    for (int t = 0; t < T; ++t) x(t, 0) = s.regressor == RegressorKind::intercept ? 1.0 : 1.0 + nd(eng);
    for (int t = 0; t < T; ++t) {
      d(t) = theta[regime_of(bounds, t + 1)] * z(t, 0) + s.gamma2 * x(t, 0) + e(t);
      y(t) = s.beta * d(t) + s.gamma1 * x(t, 0) + u(t);
    }
    return make_dataset(y, d, x, z);
  }

  const auto cal = calendar_of(s);
  int tp = 0;
  for (int v : cal) tp += v;
  const double zp = static_cast<double>(T) / tp, zc = -static_cast<double>(T) / (T - tp);
  const double sv = std::sqrt(s.sigma_v2);
  Eigen::VectorXd e(T);
  double ep = 0;
  for (int i = 0; i < s.burn_in + T; ++i) {
    ep = s.rho_e * ep + sv * nd(eng);
    if (i >= s.burn_in) e(i - s.burn_in) = ep;
  }
  for (int t = 0; t < T; ++t) {
    z(t, 0) = cal[t] ? zp : zc;
    x(t, 0) = 1.0;
    const double den = 1.0 - theta[regime_of(bounds, t + 1)] * z(t, 0);
    if (std::abs(den) < 1e-12) fail_validation("first-stage coefficient makes 1 - theta*Z vanish");
    d(t) = e(t) / den;
  }
  for (int t = 0; t < T; ++t) y(t) = s.beta * d(t) + nd(eng);
  return make_dataset(y, d, x, z, cal);
}

RateEstimate rate_of(const std::vector<char>& hits) {
  RateEstimate r;
  if (hits.empty()) return r;
  double k = 0;
  for (char h : hits) k += h ? 1 : 0;
  const double n = static_cast<double>(hits.size());
  r.rate = k / n;
  r.se = std::sqrt(r.rate * (1 - r.rate) / n);
  return r;
}

Json ExperimentReport::to_json(bool include_run_info) const {
  Json j = envelope("experiment");
  j["suite"] = suite;
  j["reps"] = run.reps;
  j["seed"] = run.seed;
  j["cells"] = cells;
  if (include_run_info) add_run_info(j, wall_seconds, run.threads);
  return j;
}

FStatDraws draw_f_stats(const DgpSpec& spec, const FTestConfig& cfg, const McRun& run) {
  check_run(run);
  spec.validate();
  cfg.search.validate(spec.T);
  FStatDraws out;
  out.full.assign(run.reps, kNaN);
  out.fstar.assign(run.reps, kNaN);
  std::vector<char> failed(run.reps, 0);
  parallel_for(run.reps, run.threads, [&](int r) {
    const Dataset ds = gen_dataset(spec, run.seed, static_cast<std::uint64_t>(r));
    try {
      out.full[r] = f_stat_exact(ds, Partition::full(ds.T()), cfg.hac, cfg.search.residuals).value;
    } catch (const ComputationError&) {
      failed[r] = 1;
    }
    try {
      out.fstar[r] = fstar_search(ds, cfg.search).value;
    } catch (const ComputationError&) {
      failed[r] = 1;
    }
  });
  for (char f : failed) out.failures += f;
  return out;
}

ExperimentReport size_power_f(const DgpSpec& null_spec, const std::vector<DgpSpec>& alternatives,
                              const FTestConfig& cfg, const McRun& run) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!(cfg.alpha >= 0) || cfg.alpha > 1) fail_validation("alpha must lie in [0, 1]");
  ExperimentReport rep;
  rep.suite = "fstar-size";
  rep.run = run;
  // α = 0 never rejects and α = 1 always does, whatever the tabulated values
  auto level_cv = [&](double cv) {
    if (cfg.alpha <= 0) return std::numeric_limits<double>::infinity();
    if (cfg.alpha >= 1) return -std::numeric_limits<double>::infinity();
    return cv;
  };
  auto hits = [&](const std::vector<double>& x, double cv) {
    if (cfg.alpha >= 1) return std::vector<char>(x.size(), 1);
    return exceeds(x, level_cv(cv));
  };
  const FStatDraws null = draw_f_stats(null_spec, cfg, run);
  const double q_full = finite_quantile(null.full, 1 - cfg.alpha);
  const double q_fstar = finite_quantile(null.fstar, 1 - cfg.alpha);
  {
    Json c;
    c["design"] = spec_json(null_spec);
    c["null"] = true;
    c["cv_full"] = cfg.cv_full;
    c["cv_fstar"] = cfg.cv_fstar;
    c["full_f"] = rate_json(rate_of(hits(null.full, cfg.cv_full)));
    c["fstar"] = rate_json(rate_of(hits(null.fstar, cfg.cv_fstar)));
    c["null_quantile_full"] = number(q_full);
    c["null_quantile_fstar"] = number(q_fstar);
    c["failures"] = null.failures;
    rep.cells.push_back(c);
  }
  for (const auto& alt : alternatives) {
    const FStatDraws a = draw_f_stats(alt, cfg, run);
    Json c;
    c["design"] = spec_json(alt);
    c["null"] = false;
    c["full_f"] = rate_json(rate_of(hits(a.full, cfg.cv_full)));
    c["fstar"] = rate_json(rate_of(hits(a.fstar, cfg.cv_fstar)));
    Json adj;
    adj["full_f"] = rate_json(rate_of(exceeds(a.full, q_full)));
    adj["fstar"] = rate_json(rate_of(exceeds(a.fstar, q_fstar)));
    c["size_adjusted"] = adj;
    // paired difference in size-adjusted rejections, F* minus full F
    std::vector<double> diff(run.reps);
    for (int r = 0; r < run.reps; ++r)
      diff[r] = (std::isfinite(a.fstar[r]) && a.fstar[r] > q_fstar) - (std::isfinite(a.full[r]) && a.full[r] > q_full);
    double s = 0, s2 = 0;
    for (double v : diff) {
      s += v;
      s2 += v * v;
    }
    const double n = run.reps, mean = s / n;
    Json dj;
    dj["mean"] = mean;
    dj["se"] = n > 1 ? std::sqrt(std::max(0.0, (s2 - n * mean * mean) / (n - 1)) / n) : 0.0;
    c["size_adjusted_gain"] = dj;
    c["failures"] = a.failures;
    rep.cells.push_back(c);
  }
  rep.wall_seconds = seconds_since(t0);
  return rep;
}

BetaDraws draw_betas(const DgpSpec& spec, const EstimationConfig& est, const HacConfig& hac, const McRun& run) {
  check_run(run);
  spec.validate();
  BetaDraws out;
  out.full.assign(run.reps, kNaN);
  out.ols.assign(run.reps, kNaN);
  out.fgls.assign(run.reps, kNaN);
  std::vector<char> failed(run.reps, 0);
  parallel_for(run.reps, run.threads, [&](int r) {
    const Dataset ds = gen_dataset(spec, run.seed, static_cast<std::uint64_t>(r));
    try {
      out.full[r] = tsls(ds, ds.z, hac).beta;
    } catch (const ComputationError&) {
      failed[r] = 1;
    }
    try {
      const SubsampleFit o = shat_ols(ds, est);
      out.ols[r] = beta_on_subsample(ds, o.partition, hac).beta;
      const FglsFit g = shat_fgls(ds, est, o.partition);
      out.fgls[r] = beta_on_subsample(ds, g.partition, hac).beta;
    } catch (const ComputationError&) {
      failed[r] = 1;
    }
  });
  for (char f : failed) out.failures += f;
  return out;
}

ExperimentReport bias_mse_beta(const std::vector<DgpSpec>& specs, const EstimationConfig& est, const HacConfig& hac,
                               const McRun& run) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport rep;
  rep.suite = "beta-mse";
  rep.run = run;
  for (const auto& s : specs) {
    const BetaDraws b = draw_betas(s, est, hac, run);
    Json c;
    c["design"] = spec_json(s);
    c["pi0"] = est.pi0;
    c["m0"] = est.m0;
    c["beta_full"] = moment_json(summarize_errors(b.full, s.beta));
    c["beta_ols"] = moment_json(summarize_errors(b.ols, s.beta));
    c["beta_fgls"] = moment_json(summarize_errors(b.fgls, s.beta));
    c["mse_diff_ols_minus_full"] = paired_mse_difference(b.ols, b.full, s.beta);
    c["mse_diff_fgls_minus_full"] = paired_mse_difference(b.fgls, b.full, s.beta);
    c["failures"] = b.failures;
    rep.cells.push_back(c);
  }
  rep.wall_seconds = seconds_since(t0);
  return rep;
}

RobustDraws draw_robust(const DgpSpec& spec, double beta0, const RobustConfig& cfg, const McRun& run) {
  check_run(run);
  spec.validate();
  const int n = run.reps;
  RobustDraws out;
  for (auto* v : {&out.ar_full, &out.lm_full, &out.clr_full, &out.ar_est, &out.lm_est, &out.clr_est}) v->assign(n, 0);
  out.lm_full_stat.assign(n, kNaN);
  out.lm_est_stat.assign(n, kNaN);
  std::vector<char> failed(n, 0);
  parallel_for(n, run.threads, [&](int r) {
    const Dataset ds = gen_dataset(spec, run.seed, static_cast<std::uint64_t>(r));
    try {
      const auto f = robust_test(ds, beta0, cfg.alpha, RobustMode::full_sample, std::nullopt, cfg.search, cfg.hac);
      out.ar_full[r] = f.reject_ar;
      out.lm_full[r] = f.reject_lm;
      out.clr_full[r] = f.reject_clr;
      if (f.lm_defined) out.lm_full_stat[r] = f.lm;
      const auto e =
          robust_test(ds, beta0, cfg.alpha, RobustMode::estimated_subsample, std::nullopt, cfg.search, cfg.hac);
      out.ar_est[r] = e.reject_ar;
      out.lm_est[r] = e.reject_lm;
      out.clr_est[r] = e.reject_clr;
      if (e.lm_defined) out.lm_est_stat[r] = e.lm;
    } catch (const ComputationError&) {
      failed[r] = 1;
    }
  });
  for (char f : failed) out.failures += f;
  return out;
}

ExperimentReport size_power_robust(const std::vector<DgpSpec>& specs, const RobustConfig& cfg, const McRun& run,
                                   const std::vector<double>& beta0_offsets) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport rep;
  rep.suite = "robust-size";
  rep.run = run;
  auto rates = [](const RobustDraws& d) {
    Json j;
    j["ar_full"] = rate_json(rate_of(d.ar_full));
    j["lm_full"] = rate_json(rate_of(d.lm_full));
    j["clr_full"] = rate_json(rate_of(d.clr_full));
    j["ar_est"] = rate_json(rate_of(d.ar_est));
    j["lm_est"] = rate_json(rate_of(d.lm_est));
    j["clr_est"] = rate_json(rate_of(d.clr_est));
    j["failures"] = d.failures;
    return j;
  };
  for (const auto& s : specs) {
    const RobustDraws null = draw_robust(s, s.beta, cfg, run);
    Json c;
    c["design"] = spec_json(s);
    c["alpha"] = cfg.alpha;
    c["null"] = rates(null);
    const double q_full = finite_quantile(null.lm_full_stat, 1 - cfg.alpha);
    const double q_est = finite_quantile(null.lm_est_stat, 1 - cfg.alpha);
    Json power = Json::array();
    for (double off : beta0_offsets) {
      const RobustDraws a = draw_robust(s, s.beta + off, cfg, run);
      Json p;
      p["beta0_offset"] = off;
      p["raw"] = rates(a);
      Json adj;
      adj["lm_full"] = rate_json(rate_of(exceeds(a.lm_full_stat, q_full)));
      adj["lm_est"] = rate_json(rate_of(exceeds(a.lm_est_stat, q_est)));
      p["size_adjusted"] = adj;
      power.push_back(p);
    }
    if (!beta0_offsets.empty()) c["power"] = power;
    rep.cells.push_back(c);
  }
  rep.wall_seconds = seconds_since(t0);
  return rep;
}

ExperimentReport run_suite(const std::string& suite, const McRun& run, const CvTable& table) {
  const auto t0 = std::chrono::steady_clock::now();
  if (suite == "fstar-size") {
    FTestConfig cfg;
    const auto cv_full = table.find(1, 1.0, cfg.alpha);
    const auto cv_star = table.find(1, cfg.search.pi_l, cfg.alpha);
    if (!cv_full || !cv_star) fail_validation("critical-value table lacks the q=1 cells for this suite");
    cfg.cv_full = *cv_full;
    cfg.cv_fstar = *cv_star;
    ExperimentReport all;
    all.suite = suite;
    all.run = run;
    for (double rho : {0.25, 0.75}) {
      DgpSpec null;
      null.T = 200;
      null.pi0 = 0.6;
      null.rho = rho;
      DgpSpec alt = null;
      alt.theta1 = alt.theta3 = local_theta(12, alt.T);
      alt.theta2 = -0.5;
      const auto r = size_power_f(null, {alt}, cfg, run);
      for (const auto& c : r.cells) all.cells.push_back(c);
    }
    all.wall_seconds = seconds_since(t0);
    return all;
  }
  if (suite == "beta-mse") {
    std::vector<DgpSpec> specs;
    for (double d : {16.0, 32.0}) {
      DgpSpec s;
      s.T = 200;
      s.pi0 = 0.6;
      s.rho = 0.25;
      s.beta = 1.0;
      s.theta1 = s.theta3 = local_theta(d, s.T);
      specs.push_back(s);
    }
    EstimationConfig est;
    est.pi0 = 0.6;
    est.m0 = 2;
    return bias_mse_beta(specs, est, HacConfig{}, run);
  }
  if (suite == "robust-size") {
    std::vector<DgpSpec> specs;
    for (double d : {4.0, 16.0}) {
      DgpSpec s;
      s.T = 400;
      s.pi0 = 0.6;
      s.rho = 0.25;
      s.theta1 = s.theta3 = local_theta(d, s.T);
      specs.push_back(s);
    }
    return size_power_robust(specs, RobustConfig{}, run);
  }
  fail_validation("unknown suite '" + suite + "' (expected fstar-size, beta-mse or robust-size)");
}

}  // namespace pilate
