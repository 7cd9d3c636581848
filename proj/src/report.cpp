#include "pilate/report.hpp"

#include <chrono>
#include <cmath>
#include <ctime>

namespace pilate {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json envelope(const std::string& kind) {
  Json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = kind;
  return j;
}

void add_run_info(Json& j, double wall_seconds, int threads) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  Json info;
  info["timestamp"] = buf;
  info["wall_seconds"] = wall_seconds;
  info["threads"] = threads;
  j["run_info"] = info;
}

Json without_run_info(Json j) {
  j.erase("run_info");
  return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json to_json(const Partition& P) {
  Json a = Json::array();
  for (const auto& s : P.segments()) a.push_back(Json::array({s.start, s.end}));
  return a;
}

Partition partition_from_json(const Json& j, int T) {
  const Json* segs = &j;
  if (j.is_object()) {
    if (!j.contains("segments")) fail_validation("subsample file needs a segments array");
    segs = &j["segments"];
  }
  if (!segs->is_array()) fail_validation("segments must be an array of [start, end) pairs");
  std::vector<Segment> out;
  try {
    for (const auto& s : *segs) {
      if (!s.is_array() || s.size() != 2) fail_validation("each segment must be a [start, end) pair");
      out.push_back({s[0].get<int>(), s[1].get<int>()});
    }
  } catch (const nlohmann::json::exception& ex) {
    fail_validation(std::string("malformed segment: ") + ex.what());
  }
  return Partition(std::move(out), T);
}

Json to_json(const TestReport& r) {
  Json j;
  j["test"] = r.test;
  j["statistic"] = number(r.statistic);
  j["critical_value"] = number(r.critical_value);
  j["alpha"] = r.alpha;
  j["reject"] = r.reject;
  if (r.partition) j["segments"] = to_json(*r.partition);
  if (!r.diagnostics.empty()) {
    Json d;
    for (const auto& [k, v] : r.diagnostics) d[k] = number(v);
    j["diagnostics"] = d;
  }
  return j;
}

Json to_json(const FStarResult& r) {
  Json j;
  j["value"] = number(r.value);
  j["segments"] = to_json(r.argmax_partition);
  j["subsample_length"] = r.argmax_partition.total_length();
  j["enumerated"] = r.enumerated;
  return j;
}

Json to_json(const EstimationResult& r) {
  Json j;
  j["method"] = r.method == EstimationMethod::ols ? "ols" : "fgls";
  j["segments"] = to_json(r.partition);
  j["beta"] = number(r.beta);
  j["se"] = number(r.se);
  j["criterion"] = number(r.criterion);
  if (r.sigma) {
    const auto& s = *r.sigma;
    j["sigma"] = Json::array({Json::array({s(0, 0), s(0, 1)}), Json::array({s(1, 0), s(1, 1)})});
  }
  j["warnings"] = r.warnings;
  return j;
}

Json to_json(const RobustTestReport& r) {
  Json j;
  j["mode"] = to_string(r.mode);
  j["beta0"] = r.beta0;
  j["alpha"] = r.alpha;
  j["segments"] = to_json(r.partition);
  j["subsample_length"] = r.partition.total_length();
  Json s;
  s["ar"] = number(r.ar);
  s["lm"] = r.lm_defined ? number(r.lm) : Json(nullptr);
  s["lr"] = number(r.lr);
  s["m1"] = number(r.m1);
  s["m2"] = number(r.m2);
  s["m12"] = number(r.m12);
  j["statistics"] = s;
  Json c;
  c["chi2_q"] = number(r.chi2_q);
  c["chi2_1"] = number(r.chi2_1);
  c["kappa_alpha"] = number(r.kappa_alpha);
  j["critical_values"] = c;
  Json d;
  d["ar"] = r.reject_ar;
  d["lm"] = r.reject_lm;
  d["clr"] = r.reject_clr;
  j["reject"] = d;
  j["warnings"] = r.warnings;
  return j;
}

Json to_json(const ComplierReport& r) {
  Json j;
  j["alpha"] = r.alpha;
  j["compliers"] = r.count(ComplierStatus::complier);
  j["non_compliers"] = r.count(ComplierStatus::non_complier);
  j["undetermined"] = r.count(ComplierStatus::undetermined);
  j["complier_share"] = number(r.complier_share());
  j["warnings"] = r.warnings;
  return j;
}

Json to_json(const RigobonResult& r) {
  Json j;
  j["beta"] = number(r.beta);
  j["denominator"] = number(r.denominator);
  j["var_policy"] = number(r.var_policy);
  j["var_control"] = number(r.var_control);
  j["cov_policy"] = number(r.cov_policy);
  j["cov_control"] = number(r.cov_control);
  j["n_policy"] = r.n_policy;
  j["n_control"] = r.n_control;
  return j;
}

Json to_json(const IvReformulation& r) {
  Json j;
  j["beta"] = number(r.beta);
  j["se"] = number(r.se);
  j["t_stat"] = number(r.t_stat);
  j["n"] = r.n;
  return j;
}

}  // namespace pilate
