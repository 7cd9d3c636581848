#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pilate/cv.hpp"
#include "pilate/data.hpp"
#include "pilate/linalg.hpp"
#include "pilate/partition_dp.hpp"

namespace pilate {

// restricted: first-stage residual taken as d̃ (valid under no first stage); unrestricted: d̃ − z̃θ̂.
enum class ResidualChoice { restricted, unrestricted };

// segment_sum: Σ_i s_i'Ĵ_i⁻¹s_i / (q(L − p − q)) with residualization and Ĵ local to each segment.
// joint: one annihilator and one Ĵ over the whole subsample.
enum class FStarObjective { segment_sum, joint };

struct SearchConfig {
  double pi_l = 0.6;
  double eps = 0.05;
  int m_plus = 5;
  HacConfig hac;
  ResidualChoice residuals = ResidualChoice::restricted;
  FStarObjective objective = FStarObjective::segment_sum;
  int top_k = 10;
  // Enumerate the class outright when it holds at most this many partitions (joint objective).
  long long enumeration_bound = 20000;
  bool enumeration_guard = true;

  void validate(int T) const;
};

struct FStatResult {
  double value = 0;
  Partition partition;
  LrvEstimate j_hat;
  double dof_scale = 0;  // q(L − p − q)
};

struct FStarResult {
  double value = 0;
  Partition argmax_partition;
  std::map<int, double> per_length_profile;  // L → best surrogate F
  std::vector<std::pair<Partition, double>> refinement_log;
  bool enumerated = false;
};

FStatResult f_stat_exact(const Dataset& ds, const Partition& P, const HacConfig& hac = {},
                         ResidualChoice residuals = ResidualChoice::restricted);

// s'Ĵ⁻¹s for the segment covering 0-based rows [s, e); −inf when the segment is degenerate.
double segment_score(const Dataset& ds, int s, int e, const HacConfig& hac = {},
                     ResidualChoice residuals = ResidualChoice::restricted);

SegmentTable segment_score_table(const Dataset& ds, int min_segment, const HacConfig& hac = {},
                                 ResidualChoice residuals = ResidualChoice::restricted);

// Segment-additive F of a partition; −inf when some segment is degenerate.
double f_stat_segment_sum(const Dataset& ds, const Partition& P, const HacConfig& hac = {},
                          ResidualChoice residuals = ResidualChoice::restricted);

// Objective value of P under cfg (segment_sum or joint exact F).
double fstar_objective(const Dataset& ds, const Partition& P, const SearchConfig& cfg);

FStarResult fstar_search(const Dataset& ds, const SearchConfig& cfg);

struct TestReport {
  std::string test;
  double statistic = 0;
  double critical_value = 0;
  double alpha = 0.05;
  bool reject = false;
  std::optional<Partition> partition;
  std::map<std::string, double> diagnostics;
};

// Rejects iff value > cv. Missing cells raise ValidationError.
TestReport fstar_decision(const FStarResult& result, int q, double pi_l, double alpha, const CvTable& table);

}  // namespace pilate
