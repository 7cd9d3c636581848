#include <boost/math/distributions/chi_squared.hpp>
#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"
#include "pilate/cv.hpp"
#include "pilate/partition_dp.hpp"

using namespace pilate;

namespace {

std::vector<double> brute_sup(const std::vector<double>& W, int q, int n, double eps, int m_plus,
                              const std::vector<double>& pis) {
  LengthRules r;
  r.T = n;
  r.min_segment = std::max(1, ceil_fraction(eps, n));
  r.min_total = r.min_segment;
  r.max_total = n;
  r.max_count = m_plus;
  std::vector<double> out;
  for (double pi : pis) {
    double best = kNegInf;
    for (const auto& P : oracle::partitions(r)) {
      const int L = P.total_length();
      if (L < std::max(floor_fraction(pi, n), r.min_segment)) continue;
      double s = 0;
      for (const auto& seg : P.segments())
        for (int j = 0; j < q; ++j) {
          const double d = W[j * (n + 1) + seg.end - 1] - W[j * (n + 1) + seg.start - 1];
          s += d * d;
        }
      best = std::max(best, s * n / (static_cast<double>(q) * L));
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace

TEST_CASE("sup over grid partitions equals enumeration") {
  std::mt19937_64 g(1);
  std::normal_distribution<double> nd;
  for (int inst = 0; inst < 40; ++inst) {
    const int n = 8 + inst % 7;
    const int q = 1 + inst % 2;
    std::vector<double> W(static_cast<size_t>(q) * (n + 1), 0.0);
    for (int j = 0; j < q; ++j)
      for (int t = 1; t <= n; ++t) W[j * (n + 1) + t] = W[j * (n + 1) + t - 1] + nd(g) / std::sqrt(n);
    const double eps = 2.0 / n;
    const int m = 1 + inst % 3;
    const std::vector<double> pis = {0.5, 0.7, 1.0};
    const auto mine = null_sup_from_paths(W, q, n, eps, m, pis);
    const auto ref = brute_sup(W, q, n, eps, m, pis);
    CAPTURE(inst);
    for (size_t k = 0; k < pis.size(); ++k) CHECK(mine[k] == doctest::Approx(ref[k]).epsilon(1e-10));
  }
}

TEST_CASE("type-7 quantiles") {
  CHECK(quantile_type7({4, 1, 3, 2}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile_type7({4, 1, 3, 2}, 0.9) == doctest::Approx(3.7));
  CHECK(quantile_type7({5}, 0.3) == 5);
  CHECK(quantile_type7({1, 2}, 1.0) == 2);
  CHECK_THROWS_AS(quantile_type7({}, 0.5), ValidationError);
}

TEST_CASE("built-in table spot values") {
  const CvTable t = CvTable::builtin();
  CHECK(*t.find(1, 0.6, 0.05) == 8.28);
  CHECK(*t.find(1, 0.5, 0.01) == 12.27);
  CHECK(*t.find(1, 1.0, 0.05) == 3.85);
  CHECK_FALSE(t.find(1, 0.55, 0.05).has_value());
  CHECK_FALSE(t.find(7, 0.6, 0.05).has_value());
}

TEST_CASE("full-sample limit is a scaled chi-square") {
  for (int q : {1, 2, 5}) {
    NullSupConfig c;
    c.q = q;
    c.pi_l = 1.0;
    c.n = 200;
    c.reps = 20000;
    const auto d = simulate_null_sup(c);
    const boost::math::chi_squared chi(q);
    for (double a : {0.10, 0.05, 0.01}) {
      const double x = boost::math::quantile(chi, 1 - a) / q;
      const double dens = q * boost::math::pdf(chi, q * x);
      const double se = std::sqrt(a * (1 - a) / c.reps) / dens;
      CAPTURE(q);
      CAPTURE(a);
      CHECK(std::abs(quantile_type7(d, 1 - a) - x) < 3 * se);
    }
  }
}

TEST_CASE("simulation is independent of the thread count") {
  NullSupConfig c;
  c.n = 60;
  c.reps = 300;
  c.threads = 1;
  const auto a = simulate_null_sup(c, {0.5, 0.6});
  c.threads = 3;
  const auto b = simulate_null_sup(c, {0.5, 0.6});
  CHECK(a == b);
  for (size_t r = 0; r < a[0].size(); ++r) CHECK(a[0][r] >= a[1][r]);
}

TEST_CASE("table json and file round trip") {
  NullSupConfig c;
  c.n = 50;
  c.reps = 200;
  c.pi_l = 0.55;
  CvTable t = CvTable::from_distribution(simulate_null_sup(c), c, {0.1, 0.05});
  const CvTable back = CvTable::from_json(t.to_json());
  REQUIRE(back.entries().size() == 2);
  CHECK(*back.find_simulated(c, 0.05) == *t.find_simulated(c, 0.05));
  NullSupConfig other = c;
  other.seed = 8;
  CHECK_FALSE(back.find_simulated(other, 0.05).has_value());
  CHECK(back.find(1, 0.55, 0.05, c.m_plus, c.eps).has_value());
  CHECK_FALSE(back.find(1, 0.55, 0.05, 5, 0.05).has_value());
  const auto path = std::filesystem::temp_directory_path() / "pilate_cv_roundtrip.json";
  t.save(path.string());
  CHECK(CvTable::load(path.string()).to_json() == t.to_json());
  std::filesystem::remove(path);
  t.merge(back);
  CHECK(t.entries().size() == 2);
  CHECK_THROWS_AS(CvTable::from_json("{\"entries\": 3}"), ValidationError);
}

TEST_CASE("invalid simulation settings") {
  NullSupConfig c;
  c.q = 0;
  CHECK_THROWS_AS(simulate_null_sup(c), ValidationError);
  c = NullSupConfig{};
  c.pi_l = 0.2;
  CHECK_THROWS_AS(simulate_null_sup(c), ValidationError);
  c = NullSupConfig{};
  CHECK_THROWS_AS(CvTable::from_distribution({1, 2, 3}, c, {1.5}), ValidationError);
}
