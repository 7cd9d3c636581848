#include "doctest.h"
#include "oracles.hpp"
#include "pilate/heterosked.hpp"

using namespace pilate;

namespace {

struct Sim {
  Eigen::VectorXd y, d;
  std::vector<int> policy;
};

// d = s_t·ε + η, y = β d + u with policy dates carrying the larger shock scale.
Sim simulate(int T, double beta, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> nd;
  Sim s;
  s.y.resize(T);
  s.d.resize(T);
  s.policy.assign(T, 0);
  for (int t = 0; t < T; ++t) {
    s.policy[t] = t % 5 == 0;
    const double eta = nd(g);
    s.d(t) = (s.policy[t] ? 3.0 : 1.0) * nd(g) + 0.5 * eta;
    s.y(t) = beta * s.d(t) + eta;
  }
  return s;
}

}  // namespace

TEST_CASE("estimand matches group moments computed directly") {
  const Sim s = simulate(200, 1.5, 3);
  const auto f = make_frame(s.y, s.d, s.policy);
  const Partition P({{11, 90}, {120, 201}}, 200);
  const auto r = rigobon_estimand(f, P);
  const auto mask = P.mask();
  double vp = 0, vc = 0, cp = 0, cc = 0;
  for (int g : {0, 1}) {
    std::vector<int> rows;
    for (int t = 0; t < 200; ++t)
      if (mask[t] && s.policy[t] == g) rows.push_back(t);
    double my = 0, md = 0;
    for (int t : rows) {
      my += f.ytilde(t);
      md += f.dtilde(t);
    }
    my /= rows.size();
    md /= rows.size();
    double v = 0, c = 0;
    for (int t : rows) {
      v += (f.dtilde(t) - md) * (f.dtilde(t) - md);
      c += (f.dtilde(t) - md) * (f.ytilde(t) - my);
    }
    v /= rows.size() - 1.0;
    c /= rows.size() - 1.0;
    (g ? vp : vc) = v;
    (g ? cp : cc) = c;
  }
  CHECK(r.var_policy == doctest::Approx(vp).epsilon(1e-12));
  CHECK(r.cov_control == doctest::Approx(cc).epsilon(1e-12));
  CHECK(r.beta == doctest::Approx((cp - cc) / (vp - vc)).epsilon(1e-12));
}

TEST_CASE("estimand recovers the structural slope") {
  const Sim s = simulate(20000, 0.7, 11);
  const auto r = rigobon_estimand(make_frame(s.y, s.d, s.policy));
  CHECK(r.beta == doctest::Approx(0.7).epsilon(0.05));
  const auto iv = iv_reformulation(make_frame(s.y, s.d, s.policy));
  CHECK(iv.beta == doctest::Approx(0.7).epsilon(0.05));
  CHECK(iv.n == 20000);
}

TEST_CASE("IV reformulation is the Wald ratio") {
  const Sim s = simulate(150, 1.0, 5);
  const auto f = make_frame(s.y, s.d, s.policy);
  double yp = 0, yc = 0, dp = 0, dc = 0;
  int np = 0, nc = 0;
  for (int t = 0; t < 150; ++t) {
    if (s.policy[t]) {
      yp += f.ystar(t);
      dp += f.dstar(t);
      ++np;
    } else {
      yc += f.ystar(t);
      dc += f.dstar(t);
      ++nc;
    }
  }
  const double wald = (yp / np - yc / nc) / (dp / np - dc / nc);
  CHECK(iv_reformulation(f).beta == doctest::Approx(wald).epsilon(1e-10));
}

TEST_CASE("equal variances are reported as weak identification") {
  Eigen::VectorXd d(8), y(8);
  d << 1, -1, 1, -1, 1, -1, 1, -1;
  y << 0.3, 0.1, -0.2, 0.5, 0.0, 0.4, -0.1, 0.2;
  const std::vector<int> policy = {1, 1, 0, 0, 1, 1, 0, 0};
  CHECK_THROWS_AS(rigobon_estimand(make_frame(y, d, policy)), WeakIdentificationError);
}

TEST_CASE("frame validation") {
  Eigen::VectorXd a = Eigen::VectorXd::Ones(6);
  CHECK_THROWS_AS(make_frame(a, a, std::vector<int>(5, 0)), ValidationError);
  CHECK_THROWS_AS(make_frame(a, a, std::vector<int>{0, 1, 2, 0, 1, 0}), ValidationError);
  const auto f = make_frame(a, a, std::vector<int>{1, 0, 0, 0, 0, 0});
  CHECK_THROWS_AS(rigobon_estimand(f), ValidationError);
  const Dataset ds = oracle::toy(20, 1, 0, 1);
  CHECK_THROWS_AS(make_frame(ds), ValidationError);
}
