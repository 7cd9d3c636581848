#include "doctest.h"
#include "oracles.hpp"
#include "pilate/data.hpp"

using namespace pilate;

TEST_CASE("csv parse and write round trip") {
  const std::string text = "date,y,d,z,w\n1,0.5,1,2,9\n2,-1.25,0,3,9\n3,2,1e-3,4,9\n4,0,1,5,9\n5,1,2,6,9\n";
  CsvSchema s;
  const Dataset ds = parse_csv(text, s);
  CHECK(ds.T() == 5);
  CHECK(ds.q() == 1);
  CHECK(ds.p() == 0);
  CHECK(ds.y(1) == -1.25);
  CHECK(ds.d(2) == 1e-3);
  const Dataset back = parse_csv(format_csv(ds), s);
  CHECK(back.y == ds.y);
  CHECK(back.d == ds.d);
  CHECK(back.z == ds.z);
}

TEST_CASE("malformed csv names row and column") {
  CsvSchema s;
  auto message = [&](const std::string& text) {
    try {
      parse_csv(text, s);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("y,d,z\n1,2,3\n1,x,3\n1,2,3\n4,5,6\n").find("row 2, column 'd'") != std::string::npos);
  CHECK(message("y,d,z\n1,2,3\n1,,3\n").find("missing value at row 2") != std::string::npos);
  CHECK(message("y,d,z\n1,2\n").find("row 1 has 2 cells") != std::string::npos);
  CHECK(message("y,d\n1,2\n").find("missing column 'z'") != std::string::npos);
  CHECK(message("").find("empty") != std::string::npos);
  CHECK_THROWS_AS(parse_csv("y,d,z,policy\n1,2,3,2\n1,2,3,0\n1,2,3,0\n1,2,3,0\n", CsvSchema{"y", "d", {}, {"z"}, "policy"}),
                  ValidationError);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678, 0.0})
    CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("partition basics") {
  const Partition P({{1, 4}, {6, 9}}, 10);
  CHECK(P.total_length() == 6);
  CHECK(P.strictly_gapped());
  CHECK(P.rows() == std::vector<int>{0, 1, 2, 5, 6, 7});
  CHECK_FALSE(Partition({{1, 4}, {4, 9}}, 10).strictly_gapped());
  CHECK(Partition::full(7).total_length() == 7);
  CHECK_THROWS_AS(Partition({{0, 3}}, 10), ValidationError);
  CHECK_THROWS_AS(Partition({{5, 12}}, 10), ValidationError);
}

TEST_CASE("rules floor fractions once") {
  const auto r = search_rules(200, 0.05, 0.6, 5);
  CHECK(r.min_segment == 10);
  CHECK(r.min_total == 120);
  CHECK(r.max_count == 5);
  const auto e = exact_rules(203, 0.05, 0.6, 2);
  CHECK(e.min_total == 121);
  CHECK(e.max_total == 121);
  CHECK(floor_fraction(0.3, 10) == 3);
  CHECK_THROWS_AS(search_rules(10, 0.05, 0.6, 2), ValidationError);
  CHECK_THROWS_AS(exact_rules(20, 0.3, 0.5, 2), ValidationError);
}

TEST_CASE("enumeration matches independent recursion") {
  for (int T : {6, 9, 12, 15})
    for (int m : {1, 2, 3})
      for (double pi : {0.4, 0.7, 1.0}) {
        const LengthRules r = search_rules(T, 2.0 / T, pi, m);
        const auto mine = enumerate_partitions(T, 2.0 / T, pi, m);
        const auto ref = oracle::partitions(r);
        CAPTURE(T);
        CAPTURE(m);
        REQUIRE(mine.size() == ref.size());
        for (const auto& P : ref) CHECK(std::find(mine.begin(), mine.end(), P) != mine.end());
        for (const auto& P : mine) CHECK(r.admits(P));
        CHECK(count_partitions(r, 1'000'000) == static_cast<long long>(ref.size()));
        CHECK(count_partitions_cached(r, 1'000'000) == static_cast<long long>(ref.size()));
      }
}

TEST_CASE("count saturates at limit plus one") {
  const LengthRules r = search_rules(40, 0.05, 0.5, 3);
  CHECK(count_partitions(r, 10) == 11);
}

TEST_CASE("residualize removes the within-subsample projection") {
  const Dataset ds = oracle::toy(30, 2, 2, 5);
  const Partition P({{2, 10}, {15, 29}}, 30);
  const Eigen::MatrixXd zt = residualize(ds, P, Block::z);
  const Eigen::MatrixXd ref = oracle::resid(oracle::rows_of(ds.z, oracle::rows(P)), oracle::rows_of(ds.x, oracle::rows(P)));
  CHECK((zt - ref).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((select_rows(ds.x, P).transpose() * zt).cwiseAbs().maxCoeff() < 1e-9);
  const Eigen::MatrixXd zf = zero_fill(ds.z, P);
  CHECK(zf(0, 0) == 0.0);
  CHECK(zf(1, 0) == ds.z(1, 0));
}

TEST_CASE("dataset validation") {
  Eigen::VectorXd y = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(make_dataset(y, y, Eigen::MatrixXd(2, 0), Eigen::MatrixXd::Ones(2, 1)), ValidationError);
  Eigen::VectorXd bad = Eigen::VectorXd::Ones(6);
  bad(2) = std::nan("");
  CHECK_THROWS_AS(make_dataset(bad, bad, Eigen::MatrixXd(6, 0), Eigen::MatrixXd::Ones(6, 1)), ValidationError);
}
