#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "pilate/report.hpp"

using namespace pilate;

TEST_CASE("envelope and run info") {
  Json j = envelope("fstar");
  CHECK(j["schema_version"] == 1);
  CHECK(j["kind"] == "fstar");
  add_run_info(j, 1.5, 4);
  CHECK(j["run_info"]["threads"] == 4);
  CHECK(j["run_info"]["wall_seconds"] == 1.5);
  CHECK(j["run_info"]["timestamp"].get<std::string>().size() == 20);
  const Json k = without_run_info(j);
  CHECK_FALSE(k.contains("run_info"));
  CHECK(k == envelope("fstar"));
}

TEST_CASE("non-finite numbers become null") {
  CHECK(number(std::numeric_limits<double>::quiet_NaN()).is_null());
  CHECK(number(std::numeric_limits<double>::infinity()).is_null());
  CHECK(number(2.5) == 2.5);
  Json j;
  j["x"] = std::numeric_limits<double>::quiet_NaN();
  CHECK(dump(j).find("null") != std::string::npos);
  CHECK(dump(j).back() == '\n');
}

TEST_CASE("partition round trip") {
  const Partition P({{1, 10}, {15, 31}}, 30);
  const Json a = to_json(P);
  CHECK(a.dump() == "[[1,10],[15,31]]");
  CHECK(partition_from_json(a, 30) == P);
  Json obj;
  obj["segments"] = a;
  CHECK(partition_from_json(obj, 30) == P);
  CHECK(partition_from_json(Json::parse(dump(obj)), 30) == P);
  CHECK_THROWS_AS(partition_from_json(Json::parse("{\"x\": 1}"), 30), ValidationError);
  CHECK_THROWS_AS(partition_from_json(Json::parse("[[1, 2, 3]]"), 30), ValidationError);
  CHECK_THROWS_AS(partition_from_json(Json::parse("[[\"a\", 2]]"), 30), ValidationError);
  CHECK_THROWS_AS(partition_from_json(Json::parse("[[1, 40]]"), 30), ValidationError);
}

TEST_CASE("result objects serialize their key fields") {
  const Dataset ds = oracle::toy(60, 1, 1, 3);
  SearchConfig cfg;
  cfg.pi_l = 0.6;
  const FStarResult r = fstar_search(ds, cfg);
  const Json j = to_json(r);
  CHECK(j["value"].get<double>() == doctest::Approx(r.value));
  CHECK(partition_from_json(j["segments"], 60) == r.argmax_partition);
  const Json back = Json::parse(dump(j));
  CHECK(back == j);
}
