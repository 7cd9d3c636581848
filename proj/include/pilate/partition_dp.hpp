#pragma once

#include <limits>
#include <vector>

#include "pilate/data.hpp"

namespace pilate {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Scores w(s, e) of the segment covering rows s..e-1 (cut positions 0 <= s < e <= T).
// Entries shorter than min_segment are never read; -inf marks an inadmissible segment.
class SegmentTable {
 public:
  SegmentTable(int T, int min_segment);
  double operator()(int s, int e) const { return w_[static_cast<size_t>(e) * (T_ + 1) + s]; }
  void set(int s, int e, double v) { w_[static_cast<size_t>(e) * (T_ + 1) + s] = v; }
  const double* column(int e) const { return &w_[static_cast<size_t>(e) * (T_ + 1)]; }
  int T() const { return T_; }
  int min_segment() const { return min_segment_; }

 private:
  int T_;
  int min_segment_;
  std::vector<double> w_;
};

struct DpCandidate {
  Partition partition;
  double score = kNegInf;
};

// Best additive score for every total length L, and up to top_k backtracked partitions per L
// (one per distinct final state: segment count and last cut), sorted by decreasing score.
struct DpProfile {
  std::vector<double> best;                   // index L in [0, T]
  std::vector<std::vector<DpCandidate>> top;  // index L
};

// Maximizes Σ_i w(s_i, e_i) over strictly gapped partitions admitted by rules.
DpProfile dp_profile(const SegmentTable& w, const LengthRules& rules, int top_k);

// Same class, objective Σ_i (H[e_i] − H[s_i]) for a cumulative series H (size T+1).
DpProfile dp_profile_linear(const std::vector<double>& H, const LengthRules& rules, int top_k);

// Values only, objective Σ_i (W[e_i] − W[s_i])² for a path W (size T+1); uses an upper-envelope
// (Li Chao) structure per DP diagonal instead of scanning all segment starts.
std::vector<double> dp_profile_squared_increments(const std::vector<double>& W, const LengthRules& rules);

// Ordering used for ties across lengths: higher value, then larger total length, then earlier first start.
bool better_candidate(double v1, const Partition& p1, double v2, const Partition& p2);

}  // namespace pilate
