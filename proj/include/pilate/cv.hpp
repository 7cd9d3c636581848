#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pilate {

// Segment-count cap and minimal segment fraction under which the simulated limit law
// reproduces the built-in q = 1 table (see README, "Critical values").
inline constexpr int kCalibratedMPlus = 2;
inline constexpr double kCalibratedEps = 0.35;

struct NullSupConfig {
  int q = 1;
  double pi_l = 0.6;
  int m_plus = kCalibratedMPlus;
  double eps = kCalibratedEps;
  int n = 1000;
  int reps = 10000;
  std::uint64_t seed = 7;
  int threads = 1;
};

// Draws of sup over admissible grid partitions of (1/(q·π)) Σ_i ‖W(λ_R,i) − W(λ_L,i)‖²,
// one vector per requested π_L (all share the same Brownian paths).
std::vector<std::vector<double>> simulate_null_sup(const NullSupConfig& cfg, const std::vector<double>& pi_ls);
std::vector<double> simulate_null_sup(const NullSupConfig& cfg);

// Sup statistic for one path set W (n+1 rows including W(0) = 0, q columns stored column-major
// as q consecutive blocks of n+1 values). Exposed for testing.
std::vector<double> null_sup_from_paths(const std::vector<double>& W, int q, int n, double eps, int m_plus,
                                        const std::vector<double>& pi_ls);

// Type-7 empirical quantile (linear interpolation between order statistics).
double quantile_type7(std::vector<double> x, double prob);

struct CvEntry {
  int q = 1;
  double pi_l = 0;
  double alpha = 0.05;
  double value = 0;
  // Simulation metadata; absent for the built-in table.
  std::optional<int> m_plus;
  std::optional<double> eps;
  std::optional<int> n;
  std::optional<int> reps;
  std::optional<std::uint64_t> seed;
};

class CvTable {
 public:
  CvTable() = default;
  explicit CvTable(std::vector<CvEntry> entries) : entries_(std::move(entries)) {}

  // The q ∈ {1,2,3,4,5,10}, π_L ∈ {0.5..1.0} table distributed with the method.
  static CvTable builtin();

  // Adds the (1 − α) quantiles of dist as entries carrying cfg's metadata.
  static CvTable from_distribution(const std::vector<double>& dist, const NullSupConfig& cfg,
                                   const std::vector<double>& levels);

  const std::vector<CvEntry>& entries() const { return entries_; }
  void add(const CvEntry& e);
  void merge(const CvTable& other);

  // First entry matching (q, π_L, α); when m_plus/eps are given they must match too.
  std::optional<double> find(int q, double pi_l, double alpha, std::optional<int> m_plus = std::nullopt,
                             std::optional<double> eps = std::nullopt) const;
  // Entry simulated under exactly this configuration.
  std::optional<double> find_simulated(const NullSupConfig& cfg, double alpha) const;

  std::string to_json() const;
  static CvTable from_json(const std::string& text);
  static CvTable load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::vector<CvEntry> entries_;
};

}  // namespace pilate
