#include "doctest.h"
#include "oracles.hpp"
#include "pilate/montecarlo.hpp"

using namespace pilate;

namespace {

double corr(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ca = a.array() - a.mean(), cb = b.array() - b.mean();
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

}  // namespace

TEST_CASE("regime bounds and outer regimes") {
  DgpSpec s;
  s.T = 200;
  s.pi0 = 0.6;
  CHECK(s.regime_bounds() == std::pair<int, int>{50, 130});
  CHECK(s.outer_regimes() == Partition({{1, 51}, {131, 201}}, 200));
  CHECK(s.outer_regimes().total_length() == 120);
  CHECK(local_theta(16, 400) == doctest::Approx(0.8));
}

TEST_CASE("null design has no first stage") {
  DgpSpec s;
  s.T = 4000;
  const Dataset ds = gen_dataset(s, 3, 0);
  CHECK(ds.T() == 4000);
  CHECK(std::abs(corr(ds.z.col(0), ds.d)) < 3 / std::sqrt(4000.0));
}

TEST_CASE("first stage is active only outside the middle regime") {
  DgpSpec s;
  s.T = 6000;
  s.theta1 = s.theta3 = 1.0;
  const Dataset ds = gen_dataset(s, 5, 1);
  const auto [b1, b2] = s.regime_bounds();
  Eigen::VectorXd zm = ds.z.col(0).segment(b1, b2 - b1), dm = ds.d.segment(b1, b2 - b1);
  CHECK(std::abs(corr(zm, dm)) < 3 / std::sqrt(static_cast<double>(b2 - b1)));
  Eigen::VectorXd zo = ds.z.col(0).head(b1), dout = ds.d.head(b1);
  CHECK(corr(zo, dout) > 0.5);
}

TEST_CASE("autoregressive first-stage errors") {
  DgpSpec s;
  s.T = 20000;
  s.rho_e = 0.5;
  const Dataset ds = gen_dataset(s, 9, 0);
  // with no first stage and an intercept regressor, d is the error process itself
  const Eigen::VectorXd e = ds.d;
  CHECK(corr(e.head(s.T - 1), e.tail(s.T - 1)) == doctest::Approx(0.5).epsilon(3 / std::sqrt(20000.0) / 0.5));
}

TEST_CASE("error correlation matches rho") {
  DgpSpec s;
  s.T = 20000;
  s.rho = 0.75;
  const Dataset ds = gen_dataset(s, 2, 4);
  // β = 0 and no first stage: y is u and d is e
  CHECK(corr(ds.y, ds.d) == doctest::Approx(0.75).epsilon(0.03));
}

TEST_CASE("datasets are a pure function of seed and index") {
  DgpSpec s;
  s.theta1 = s.theta3 = 0.5;
  const Dataset a = gen_dataset(s, 7, 12), b = gen_dataset(s, 7, 12), c = gen_dataset(s, 7, 13);
  CHECK(a.y == b.y);
  CHECK(a.d == b.d);
  CHECK(a.z == b.z);
  CHECK(a.y != c.y);
  DgpSpec cal;
  cal.kind = DgpKind::calibrated;
  cal.T = 150;
  cal.theta1 = cal.theta3 = 0.05;
  const Dataset ca = gen_dataset(cal, 1, 0);
  REQUIRE(ca.policy.has_value());
  int np = 0;
  for (int v : *ca.policy) np += v;
  CHECK(np > 0);
  CHECK(ca.z.col(0).sum() == doctest::Approx(0.0).scale(1.0));
  CHECK(gen_dataset(cal, 1, 0).d == ca.d);
}

TEST_CASE("invalid designs") {
  DgpSpec s;
  s.rho = 1.0;
  CHECK_THROWS_AS(gen_dataset(s, 1, 0), ValidationError);
  s = DgpSpec{};
  s.pi0 = 1.5;
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("rate estimates") {
  const auto r = rate_of({1, 0, 0, 1, 0, 0, 0, 0});
  CHECK(r.rate == doctest::Approx(0.25));
  CHECK(r.se == doctest::Approx(std::sqrt(0.25 * 0.75 / 8)));
  CHECK(rate_of({}).rate == 0);
}

TEST_CASE("level one rejects every replication") {
  DgpSpec s;
  s.T = 60;
  FTestConfig cfg;
  cfg.alpha = 1.0;
  cfg.cv_full = 3.85;
  cfg.cv_fstar = 8.28;
  McRun run;
  run.reps = 10;
  const auto rep = size_power_f(s, {}, cfg, run);
  REQUIRE(rep.cells.size() == 1);
  CHECK(rep.cells[0]["full_f"]["rate"].get<double>() == 1.0);
  CHECK(rep.cells[0]["fstar"]["rate"].get<double>() == 1.0);
  cfg.alpha = 0.0;
  const auto none = size_power_f(s, {}, cfg, run);
  CHECK(none.cells[0]["fstar"]["rate"].get<double>() == 0.0);
}

TEST_CASE("reports do not depend on the thread count") {
  DgpSpec s;
  s.T = 80;
  s.beta = 1.0;
  s.theta1 = s.theta3 = local_theta(16, s.T);
  EstimationConfig est;
  est.pi0 = 0.6;
  McRun run;
  run.reps = 12;
  run.threads = 1;
  const auto a = bias_mse_beta({s}, est, HacConfig{}, run);
  run.threads = 3;
  const auto b = bias_mse_beta({s}, est, HacConfig{}, run);
  CHECK(dump(a.to_json(false)) == dump(b.to_json(false)));
  CHECK(a.to_json().contains("run_info"));
  CHECK(without_run_info(a.to_json()) == a.to_json(false));
  CHECK(a.cells[0]["beta_full"]["used"].get<int>() == 12);
}

TEST_CASE("robust experiment reports null rates for each design") {
  DgpSpec s;
  s.T = 80;
  s.theta1 = s.theta3 = local_theta(16, s.T);
  McRun run;
  run.reps = 6;
  const auto rep = size_power_robust({s}, RobustConfig{}, run, {1.0});
  REQUIRE(rep.cells.size() == 1);
  const auto& c = rep.cells[0];
  for (const char* k : {"ar_full", "lm_full", "clr_full", "ar_est", "lm_est", "clr_est"}) {
    const double r = c["null"][k]["rate"].get<double>();
    CHECK(r >= 0);
    CHECK(r <= 1);
  }
  // one instrument: the three statistics coincide
  CHECK(c["null"]["ar_est"]["rate"] == c["null"]["lm_est"]["rate"]);
  CHECK(c["power"].size() == 1);
}

TEST_CASE("unknown suite") {
  CHECK_THROWS_AS(run_suite("nope", McRun{}, CvTable::builtin()), ValidationError);
}
