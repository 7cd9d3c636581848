#include "doctest.h"
#include "oracles.hpp"
#include "pilate/compliers.hpp"

using namespace pilate;

namespace {

double lrv_demeaned(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  Eigen::MatrixXd u(v.size(), 1);
  for (size_t i = 0; i < v.size(); ++i) u(static_cast<Eigen::Index>(i), 0) = v[i] - m;
  return oracle::newey_west(u, oracle::cube_root_lags(static_cast<int>(v.size())))(0, 0);
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("nearest windows") {
  const std::vector<int> s = {0, 2, 4, 6, 8, 10};
  CHECK(nearest_window(s, 4, 3, WindowSide::two_sided) == std::vector<int>{2, 4, 6});
  CHECK(nearest_window(s, 5, 2, WindowSide::two_sided) == std::vector<int>{4, 6});
  CHECK(nearest_window(s, 4, 2, WindowSide::one_sided_left) == std::vector<int>{2, 4});
  CHECK(nearest_window(s, 5, 2, WindowSide::one_sided_left) == std::vector<int>{2, 4});
  CHECK(nearest_window(s, 0, 3, WindowSide::two_sided).empty());
  CHECK(nearest_window(s, 2, 3, WindowSide::one_sided_left).empty());
  CHECK(nearest_window(s, 10, 6, WindowSide::one_sided_left) == s);
}

TEST_CASE("control-window statistic matches a hand computation") {
  const int T = 40;
  Eigen::VectorXd d(T);
  std::vector<int> policy(T, 0);
  for (int t = 0; t < T; ++t) {
    d(t) = std::sin(0.7 * t) + 0.05 * t;
    if (t % 4 == 1) policy[t] = 1;
  }
  ComplierConfig cfg;
  cfg.windows.n0 = 9;
  cfg.windows.n1 = 3;
  const int t0 = 17;  // a policy date
  REQUIRE(policy[t0] == 1);
  const auto dc = complier_ttest(d, policy, t0, cfg);
  // policy window: 13, 17, 21; control window: nine non-policy dates centered on 17
  const std::vector<double> P = {d(13), d(17), d(21)};
  std::vector<double> C;
  for (int t : {12, 14, 15, 16, 18, 19, 20, 22, 23}) C.push_back(d(t));
  const double ref = std::sqrt(9.0) * (mean(P) - mean(C)) / std::sqrt(lrv_demeaned(C));
  CHECK(dc.t == doctest::Approx(ref).epsilon(1e-12));
  CHECK(dc.mean_policy == doctest::Approx(mean(P)));
  cfg.variance = MeanDiffVariance::welch;
  const double welch = (mean(P) - mean(C)) / std::sqrt(lrv_demeaned(C) / 9 + lrv_demeaned(P) / 3);
  CHECK(complier_ttest(d, policy, t0, cfg).t == doctest::Approx(welch).epsilon(1e-12));
}

TEST_CASE("control dates anchor on the nearest policy date") {
  const int T = 40;
  std::vector<int> policy(T, 0);
  for (int t : {5, 15, 25, 35}) policy[t] = 1;
  Eigen::VectorXd d = Eigen::VectorXd::LinSpaced(T, 0, 1);
  WindowSpec w;
  w.n0 = 5;
  w.n1 = 3;
  const auto m = rolling_means(d, policy, w, 19);
  REQUIRE(m);
  CHECK(m->policy_rows == std::vector<int>{5, 15, 25});
  const auto tie = rolling_means(d, policy, w, 20);
  REQUIRE(tie);
  CHECK(tie->policy_rows == std::vector<int>{5, 15, 25});
  const auto later = rolling_means(d, policy, w, 21);
  REQUIRE(later);
  CHECK(later->policy_rows == std::vector<int>{15, 25, 35});
  CHECK_FALSE(rolling_means(d, policy, w, 0).has_value());
}

TEST_CASE("variance shift on policy dates is detected with squared data") {
  const int T = 3000;
  std::mt19937_64 g(9);
  std::normal_distribution<double> nd;
  std::vector<int> policy(T, 0);
  Eigen::VectorXd d(T);
  for (int t = 0; t < T; ++t) {
    policy[t] = t % 8 == 3;
    d(t) = (policy[t] ? 2.0 : 1.0) * nd(g);
  }
  ComplierConfig cfg;
  cfg.transform = Transform::square;
  const auto rep = classify_dates(d, policy, cfg);
  int det = 0, tot = 0;
  for (const auto& dc : rep.dates)
    if (dc.policy && dc.status != ComplierStatus::undetermined) {
      ++tot;
      det += dc.status == ComplierStatus::complier;
    }
  REQUIRE(tot > 200);
  CHECK(static_cast<double>(det) / tot >= 0.9);
  CHECK(rep.count(ComplierStatus::undetermined) > 0);
}

TEST_CASE("constant control window stays undetermined") {
  Eigen::VectorXd d = Eigen::VectorXd::Ones(30);
  std::vector<int> policy(30, 0);
  for (int t = 2; t < 30; t += 5) policy[t] = 1;
  ComplierConfig cfg;
  cfg.windows.n0 = 5;
  cfg.windows.n1 = 3;
  const auto rep = classify_dates(d, policy, cfg);
  CHECK(rep.count(ComplierStatus::complier) == 0);
  CHECK(rep.count(ComplierStatus::non_complier) == 0);
  CHECK_FALSE(rep.warnings.empty());
  CHECK(std::isnan(rep.complier_share()));
}

TEST_CASE("exclusion test guards and diagnostics") {
  ComplierReport rep;
  Eigen::VectorXd y(4), d(4);
  y << 1.0, 2.0, 3.0, 5.0;
  d << 0.1, 0.2, 0.3, 0.4;
  for (int t = 0; t < 4; ++t) {
    DateClassification dc;
    dc.row = t;
    dc.policy = t % 2 == 0;
    dc.status = ComplierStatus::non_complier;
    rep.dates.push_back(dc);
  }
  ExclusionConfig cfg;
  CHECK_THROWS_WITH_AS(exclusion_test(y, d, rep, cfg), doctest::Contains("policy-side"), ValidationError);
  cfg.min_size = 1;
  const auto r = exclusion_test(y, d, rep, cfg);
  CHECK(r.diagnostics.at("n_policy") == 2);
  CHECK(r.diagnostics.at("mean_policy") == doctest::Approx(2.0));
  CHECK(r.diagnostics.at("mean_control") == doctest::Approx(3.5));
  CHECK(r.critical_value == doctest::Approx(1.959963984540054));
  cfg.subset = SubsetRule::above;
  const auto single = exclusion_test(y, d, rep, cfg);
  CHECK(single.diagnostics.at("n_policy") == 1);
  CHECK(single.diagnostics.at("n_control") == 1);
  CHECK(single.statistic == -std::numeric_limits<double>::infinity());
  CHECK(single.reject);
  cfg.min_size = 5;
  CHECK_THROWS_AS(exclusion_test(y, d, rep, cfg), ValidationError);
  cfg.min_size = 1;
  cfg.subset = SubsetRule::all;
  cfg.variance = MeanDiffVariance::welch;
  CHECK(std::isfinite(exclusion_test(y, d, rep, cfg).statistic));
}

TEST_CASE("exclusion test has power against a mean shift") {
  std::mt19937_64 g(2);
  std::normal_distribution<double> nd;
  const int n = 400;
  ComplierReport rep;
  Eigen::VectorXd y(n), d(n);
  for (int t = 0; t < n; ++t) {
    DateClassification dc;
    dc.row = t;
    dc.policy = t % 2 == 0;
    dc.status = ComplierStatus::non_complier;
    rep.dates.push_back(dc);
    y(t) = nd(g) + (dc.policy ? 1.0 : 0.0);
    d(t) = nd(g);
  }
  ExclusionConfig cfg;
  cfg.variance = MeanDiffVariance::welch;
  CHECK(exclusion_test(y, d, rep, cfg).reject);
}

TEST_CASE("invalid settings") {
  Eigen::VectorXd d = Eigen::VectorXd::Ones(10);
  std::vector<int> policy(10, 0);
  ComplierConfig cfg;
  cfg.windows.n0 = 1;
  CHECK_THROWS_AS(classify_dates(d, policy, cfg), ValidationError);
  cfg = ComplierConfig{};
  policy[3] = 2;
  CHECK_THROWS_AS(classify_dates(d, policy, cfg), ValidationError);
  CHECK_THROWS_AS(classify_dates(d, std::vector<int>(9, 0), cfg), ValidationError);
}
