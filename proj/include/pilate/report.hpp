#pragma once

#include <string>

#include "json.hpp"
#include "pilate/compliers.hpp"
#include "pilate/cv.hpp"
#include "pilate/data.hpp"
#include "pilate/estimation.hpp"
#include "pilate/fstar.hpp"
#include "pilate/heterosked.hpp"
#include "pilate/robust.hpp"

namespace pilate {

using Json = nlohmann::ordered_json;

inline constexpr int kReportSchemaVersion = 1;

// {"schema_version": 1, "kind": kind}
Json envelope(const std::string& kind);

// Adds "run_info" {timestamp, wall_seconds, threads}: the only fields that may differ between reruns.
void add_run_info(Json& j, double wall_seconds, int threads);
Json without_run_info(Json j);

// Indented, newline-terminated. Non-finite numbers are written as null.
std::string dump(const Json& j);

Json to_json(const Partition& P);
Partition partition_from_json(const Json& j, int T);

Json to_json(const TestReport& r);
Json to_json(const FStarResult& r);
Json to_json(const EstimationResult& r);
Json to_json(const RobustTestReport& r);
Json to_json(const ComplierReport& r);
Json to_json(const RigobonResult& r);
Json to_json(const IvReformulation& r);

// Number or null for non-finite values.
Json number(double v);

}  // namespace pilate
