#include "doctest.h"
#include "oracles.hpp"
#include "pilate/partition_dp.hpp"

using namespace pilate;

namespace {

LengthRules random_rules(std::mt19937_64& g) {
  LengthRules r;
  r.T = 6 + static_cast<int>(g() % 11);
  r.min_segment = 1 + static_cast<int>(g() % 3);
  r.max_count = 1 + static_cast<int>(g() % 3);
  r.min_count = 1;
  r.min_total = r.min_segment + static_cast<int>(g() % (r.T / 2));
  r.max_total = r.T;
  return r;
}

double score_of(const Partition& P, const std::function<double(int, int)>& w) {
  double s = 0;
  for (const auto& seg : P.segments()) s += w(seg.start - 1, seg.end - 1);
  return s;
}

std::vector<double> brute_best(const LengthRules& r, const std::function<double(int, int)>& w) {
  std::vector<double> best(r.T + 1, kNegInf);
  for (const auto& P : oracle::partitions(r)) {
    const double v = score_of(P, w);
    best[P.total_length()] = std::max(best[P.total_length()], v);
  }
  return best;
}

}  // namespace

TEST_CASE("dp profile equals enumeration on random tables") {
  std::mt19937_64 g(42);
  std::normal_distribution<double> nd;
  for (int inst = 0; inst < 150; ++inst) {
    const LengthRules r = random_rules(g);
    SegmentTable tab(r.T, r.min_segment);
    for (int e = 1; e <= r.T; ++e)
      for (int s = 0; s < e; ++s) tab.set(s, e, (g() % 13 == 0) ? kNegInf : nd(g));
    const auto w = [&](int s, int e) { return tab(s, e); };
    const DpProfile prof = dp_profile(tab, r, 3);
    const auto ref = brute_best(r, w);
    CAPTURE(inst);
    for (int L = 0; L <= r.T; ++L) {
      if (ref[L] == kNegInf) {
        CHECK(prof.best[L] == kNegInf);
        continue;
      }
      CHECK(prof.best[L] == doctest::Approx(ref[L]).epsilon(1e-12));
      REQUIRE_FALSE(prof.top[L].empty());
      const auto& c = prof.top[L].front();
      CHECK(r.admits(c.partition));
      CHECK(c.partition.total_length() == L);
      CHECK(score_of(c.partition, w) == doctest::Approx(c.score).epsilon(1e-12));
      for (size_t i = 1; i < prof.top[L].size(); ++i) CHECK(prof.top[L][i].score <= prof.top[L][i - 1].score);
    }
  }
}

TEST_CASE("linear and squared-increment profiles equal enumeration") {
  std::mt19937_64 g(7);
  std::normal_distribution<double> nd;
  for (int inst = 0; inst < 120; ++inst) {
    const LengthRules r = random_rules(g);
    std::vector<double> H(r.T + 1, 0.0);
    for (int t = 1; t <= r.T; ++t) H[t] = H[t - 1] + nd(g);
    const auto lin = [&](int s, int e) { return H[e] - H[s]; };
    const auto sq = [&](int s, int e) { return (H[e] - H[s]) * (H[e] - H[s]); };
    const auto ref_lin = brute_best(r, lin);
    const auto ref_sq = brute_best(r, sq);
    const DpProfile pl = dp_profile_linear(H, r, 2);
    const auto ps = dp_profile_squared_increments(H, r);
    CAPTURE(inst);
    for (int L = 0; L <= r.T; ++L) {
      if (ref_lin[L] == kNegInf) {
        CHECK(pl.best[L] == kNegInf);
        CHECK(ps[L] == kNegInf);
        continue;
      }
      CHECK(pl.best[L] == doctest::Approx(ref_lin[L]).epsilon(1e-12));
      CHECK(ps[L] == doctest::Approx(ref_sq[L]).epsilon(1e-10));
      CHECK(score_of(pl.top[L].front().partition, lin) == doctest::Approx(ref_lin[L]).epsilon(1e-12));
    }
  }
}

TEST_CASE("tie-breaking prefers longer then earlier") {
  const Partition a({{1, 5}}, 10), b({{2, 8}}, 10), c({{3, 9}}, 10);
  CHECK(better_candidate(1.0, b, 1.0, a));
  CHECK(better_candidate(1.0, b, 1.0, c));
  CHECK_FALSE(better_candidate(1.0, a, 2.0, b));
}

TEST_CASE("infeasible lengths stay empty") {
  LengthRules r;
  r.T = 5;
  r.min_segment = 3;
  r.min_total = 3;
  r.max_total = 5;
  r.max_count = 2;
  SegmentTable tab(5, 3);
  for (int e = 3; e <= 5; ++e)
    for (int s = 0; s + 3 <= e; ++s) tab.set(s, e, 1.0);
  const auto prof = dp_profile(tab, r, 1);
  CHECK(prof.best[3] == 1.0);
  CHECK(prof.best[5] == 1.0);
  CHECK(prof.best[4] == 1.0);
  CHECK(prof.best[2] == kNegInf);
}
