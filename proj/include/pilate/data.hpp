#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pilate/errors.hpp"

namespace pilate {

enum class ColumnRole { outcome, endogenous, exogenous, instrument, policy, ignored };

struct Column {
  std::string name;
  ColumnRole role;
};

// Aligned series for one regression problem. x is T×p (p may be 0), z is T×q.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::VectorXd d;
  Eigen::MatrixXd x;
  Eigen::MatrixXd z;
  std::optional<std::vector<int>> policy;  // 0/1 per row
  std::vector<Column> columns;             // file layout, used when writing back

  int T() const { return static_cast<int>(y.size()); }
  int p() const { return static_cast<int>(x.cols()); }
  int q() const { return static_cast<int>(z.cols()); }

  // Throws ValidationError when shapes disagree or T < p + q + 2.
  void validate() const;
};

struct CsvSchema {
  std::string outcome = "y";
  std::string endogenous = "d";
  std::vector<std::string> exogenous;
  std::vector<std::string> instruments = {"z"};
  std::optional<std::string> policy;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema);
Dataset parse_csv(const std::string& text, const CsvSchema& schema);
std::string format_csv(const Dataset& ds);
void write_csv(const Dataset& ds, const std::string& path);

// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

// Build a dataset directly; columns get default names y, d, x1.., z1.., policy.
Dataset make_dataset(Eigen::VectorXd y, Eigen::VectorXd d, Eigen::MatrixXd x, Eigen::MatrixXd z,
                     std::optional<std::vector<int>> policy = std::nullopt);

// 1-based half-open [start, end).
struct Segment {
  int start;
  int end;
  int length() const { return end - start; }
  bool operator==(const Segment&) const = default;
};

class Partition {
 public:
  Partition() = default;
  Partition(std::vector<Segment> segments, int T);

  static Partition full(int T);

  const std::vector<Segment>& segments() const { return segments_; }
  int T() const { return T_; }
  int count() const { return static_cast<int>(segments_.size()); }
  int total_length() const;
  double fraction() const { return static_cast<double>(total_length()) / T_; }
  std::vector<int> rows() const;         // 0-based selected rows
  std::vector<char> mask() const;        // length T, 1 on selected rows
  bool strictly_gapped() const;          // end_i < start_{i+1}
  std::string to_string() const;

  bool operator==(const Partition&) const = default;

 private:
  std::vector<Segment> segments_;
  int T_ = 0;
};

// Integer constraints on a partition class after flooring fractions once.
struct LengthRules {
  int T = 0;
  int min_segment = 1;
  int min_total = 1;
  int max_total = 0;
  int min_count = 1;
  int max_count = 1;

  bool admits(const Partition& P) const;
};

int floor_fraction(double frac, int T);
int ceil_fraction(double frac, int T);

// Class of F* search: segments ≥ ⌊εT⌋, total ≥ ⌊π_L T⌋, 1..m₊ segments.
LengthRules search_rules(int T, double eps, double pi_l, int m_plus);
// Class for known (π₀, m₀): total exactly ⌊π₀T⌋, exactly m₀ segments.
LengthRules exact_rules(int T, double eps, double pi0, int m0);
// Class with π ∈ (ε, 1]: total > εT.
LengthRules open_rules(int T, double eps, int m_plus);

// Calls visit on every admissible strictly-gapped partition; stops early if visit returns false.
void for_each_partition(const LengthRules& rules, const std::function<bool(const Partition&)>& visit);
std::vector<Partition> enumerate_partitions(int T, double eps, double pi_l, int m_plus);
// Number of admissible partitions, or limit+1 once the count exceeds limit.
long long count_partitions(const LengthRules& rules, long long limit);
// Memoized across calls (thread-safe); Monte Carlo loops reuse one class many times.
long long count_partitions_cached(const LengthRules& rules, long long limit);

enum class Block { y, d, x, z };

const Eigen::MatrixXd block_matrix(const Dataset& ds, Block b);

// Rows of a matrix restricted to the partition.
Eigen::MatrixXd select_rows(const Eigen::MatrixXd& a, const Partition& P);
// C_T A: rows outside the partition set to zero.
Eigen::MatrixXd zero_fill(const Eigen::MatrixXd& a, const Partition& P);

// Selected rows of a block with the within-subsample projection onto selected x removed.
Eigen::MatrixXd residualize(const Dataset& ds, const Partition& P, Block b);
Eigen::MatrixXd residualize(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x);

}  // namespace pilate
