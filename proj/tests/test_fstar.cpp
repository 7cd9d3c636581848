#include "doctest.h"
#include "oracles.hpp"
#include "pilate/fstar.hpp"

using namespace pilate;

TEST_CASE("exact F matches the independent formula") {
  for (int p : {0, 1, 2})
    for (int q : {1, 2}) {
      const Dataset ds = oracle::toy(60, q, p, 100 + 10 * p + q);
      const Partition P({{3, 20}, {31, 58}}, 60);
      const double ref = oracle::f_stat(ds, oracle::rows(P));
      const auto r = f_stat_exact(ds, P);
      CHECK(r.value == doctest::Approx(ref).epsilon(1e-9));
      CHECK(r.dof_scale == q * (P.total_length() - p - q));
    }
}

TEST_CASE("short synthetic with a first stage on the opening block") {
  Eigen::VectorXd z(12), d(12);
  z << 1.2, -0.4, 0.9, 2.1, -1.3, 0.2, 0.7, -0.8, 1.5, -0.1, 0.6, -1.9;
  Eigen::VectorXd e(12);
  e << 0.3, -0.2, 0.1, 0.4, -0.5, 0.2, -0.3, 0.6, -0.1, 0.2, -0.4, 0.5;
  for (int t = 0; t < 12; ++t) d(t) = (t < 5 ? 0.5 * z(t) : 0.0) + e(t);
  const Dataset ds = make_dataset(d, d, Eigen::MatrixXd(12, 0), z);
  const Partition P({{1, 6}}, 12);
  CHECK(f_stat_exact(ds, P).value == doctest::Approx(oracle::f_stat(ds, {0, 1, 2, 3, 4})).epsilon(1e-9));
}

TEST_CASE("orthogonal instrument gives zero") {
  Eigen::VectorXd z(8), d(8);
  z << 1, -1, 1, -1, 1, -1, 1, -1;
  d << 1, 1, 2, 2, 3, 3, 4, 4;
  const Dataset ds = make_dataset(d, d, Eigen::MatrixXd(8, 0), z);
  CHECK(f_stat_exact(ds, Partition::full(8)).value == 0.0);
}

TEST_CASE("segment score of the full sample is scaled F") {
  const Dataset ds = oracle::toy(50, 2, 1, 3);
  const double w = segment_score(ds, 0, 50);
  CHECK(w == doctest::Approx(2.0 * (50 - 1 - 2) * f_stat_exact(ds, Partition::full(50)).value).epsilon(1e-9));
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(50);
  const Dataset flat = make_dataset(ds.y, zero, ds.x, ds.z);
  const SegmentTable tab = segment_score_table(flat, 5);
  for (int e = 5; e <= 50; ++e)
    for (int s = 0; s + 5 <= e; ++s) CHECK(tab(s, e) == 0.0);
}

TEST_CASE("segment score table equals per-segment computation") {
  const Dataset ds = oracle::toy(30, 1, 1, 8);
  const SegmentTable tab = segment_score_table(ds, 4);
  for (int e = 4; e <= 30; ++e)
    for (int s = 0; s + 4 <= e; ++s) {
      std::vector<int> rows;
      for (int t = s; t < e; ++t) rows.push_back(t);
      const double ref = oracle::f_stat(ds, rows) * (e - s - 2);
      CHECK(tab(s, e) == doctest::Approx(ref).epsilon(1e-8));
    }
}

TEST_CASE("single candidate reduces to the full-sample F") {
  const Dataset ds = oracle::toy(40, 1, 1, 9);
  SearchConfig cfg;
  cfg.pi_l = 1.0;
  cfg.m_plus = 1;
  for (auto obj : {FStarObjective::segment_sum, FStarObjective::joint}) {
    cfg.objective = obj;
    const auto r = fstar_search(ds, cfg);
    CHECK(r.argmax_partition == Partition::full(40));
    CHECK(r.value == doctest::Approx(f_stat_exact(ds, Partition::full(40)).value).epsilon(1e-12));
  }
}

TEST_CASE("search equals enumeration on small instances") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const Dataset ds = oracle::toy(24, 1 + static_cast<int>(seed % 2), static_cast<int>(seed % 3 == 0), seed);
    SearchConfig cfg;
    cfg.eps = 1.0 / 12;
    cfg.pi_l = 0.5;
    cfg.m_plus = 2;
    const LengthRules r = search_rules(24, cfg.eps, cfg.pi_l, cfg.m_plus);
    for (auto obj : {FStarObjective::segment_sum, FStarObjective::joint}) {
      cfg.objective = obj;
      double best = kNegInf;
      for (const auto& P : oracle::partitions(r)) {
        if (P.total_length() <= ds.p() + ds.q()) continue;
        best = std::max(best, fstar_objective(ds, P, cfg));
      }
      const auto res = fstar_search(ds, cfg);
      CAPTURE(seed);
      CHECK(res.value == doctest::Approx(best).epsilon(1e-9));
      CHECK(fstar_objective(ds, res.argmax_partition, cfg) == doctest::Approx(res.value).epsilon(1e-12));
      for (const auto& [P, v] : res.refinement_log) CHECK(v <= res.value + 1e-12);
    }
  }
}

TEST_CASE("instrument scaling invariance") {
  const Dataset ds = oracle::toy(80, 2, 1, 21);
  Dataset scaled = ds;
  scaled.z *= -3.7;
  const Partition P({{5, 30}, {50, 80}}, 80);
  CHECK(f_stat_exact(scaled, P).value == doctest::Approx(f_stat_exact(ds, P).value).epsilon(1e-9));
  SearchConfig cfg;
  CHECK(fstar_search(scaled, cfg).value == doctest::Approx(fstar_search(ds, cfg).value).epsilon(1e-9));
}

TEST_CASE("decision uses a strict inequality") {
  FStarResult r;
  r.argmax_partition = Partition::full(10);
  const CvTable t = CvTable::builtin();
  r.value = 8.09;
  CHECK(fstar_decision(r, 1, 1.0, 0.05, t).reject);
  CHECK(fstar_decision(r, 1, 1.0, 0.05, t).critical_value == 3.85);
  r.value = 3.85;
  CHECK_FALSE(fstar_decision(r, 1, 1.0, 0.05, t).reject);
  r.value = 0;
  CHECK_FALSE(fstar_decision(r, 1, 0.6, 0.05, t).reject);
  CHECK_THROWS_AS(fstar_decision(r, 1, 0.55, 0.05, t), ValidationError);
}

TEST_CASE("excluding a noise regime does not inflate F*") {
  // Strong first stage on the first half, pure noise on the second: the search should find a
  // subsample inside the identified block.
  const int T = 120;
  std::mt19937_64 g(5);
  std::normal_distribution<double> nd;
  Eigen::VectorXd z(T), d(T);
  for (int t = 0; t < T; ++t) {
    z(t) = 1 + nd(g);
    d(t) = (t < 60 ? 1.5 * z(t) : 0.0) + nd(g);
  }
  const Dataset ds = make_dataset(d, d, Eigen::MatrixXd::Ones(T, 1), Eigen::MatrixXd(z));
  SearchConfig cfg;
  cfg.pi_l = 0.3;
  const auto r = fstar_search(ds, cfg);
  int inside = 0;
  for (int t : r.argmax_partition.rows()) inside += t < 60;
  CHECK(inside >= 0.8 * r.argmax_partition.total_length());
  CHECK(r.value > f_stat_exact(ds, Partition::full(T)).value);
}

TEST_CASE("invalid configuration") {
  const Dataset ds = oracle::toy(30, 1, 0, 1);
  SearchConfig cfg;
  cfg.eps = 0.7;
  CHECK_THROWS_AS(fstar_search(ds, cfg), ValidationError);
  cfg = SearchConfig{};
  cfg.m_plus = 0;
  CHECK_THROWS_AS(fstar_search(ds, cfg), ValidationError);
}
