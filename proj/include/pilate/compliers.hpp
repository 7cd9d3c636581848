#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pilate/data.hpp"
#include "pilate/fstar.hpp"

namespace pilate {

enum class WindowSide { one_sided_left, two_sided };
enum class Transform { level, square };

// control_only: √n0·(D̄_P − D̄_C)/√J_C with the control-window long-run variance only.
// welch: (D̄_P − D̄_C)/√(J_C/n0 + J_P/n1), adding the policy-window sampling variance.
enum class MeanDiffVariance { control_only, welch };

struct WindowSpec {
  int n0 = 101;
  int n1 = 15;
  WindowSide side = WindowSide::two_sided;
  void validate() const;
};

// 0-based row indices of the n nearest members of `sorted` around `anchor`. One-sided windows take
// members at or before the anchor; two-sided windows center on it. Empty if the window does not fit.
std::vector<int> nearest_window(const std::vector<int>& sorted, int anchor, int n, WindowSide side);

struct WindowMeans {
  double policy = 0;
  double control = 0;
  std::vector<int> policy_rows;
  std::vector<int> control_rows;
};

// Window means of `series` around row t0; nullopt if either window is incomplete.
std::optional<WindowMeans> rolling_means(const Eigen::VectorXd& series, const std::vector<int>& policy,
                                         const WindowSpec& spec, int t0);

enum class ComplierStatus { complier, non_complier, undetermined };
std::string to_string(ComplierStatus s);

struct DateClassification {
  int row = 0;
  bool policy = false;
  bool windows_complete = false;
  double t = 0;
  double mean_policy = 0;
  double mean_control = 0;
  ComplierStatus status = ComplierStatus::undetermined;
};

struct ComplierReport {
  std::vector<DateClassification> dates;
  double alpha = 0.05;
  std::vector<std::string> warnings;
  double complier_share() const;  // among determined dates
  int count(ComplierStatus s) const;
};

struct ComplierConfig {
  WindowSpec windows;
  double alpha = 0.05;
  Transform transform = Transform::level;
  MeanDiffVariance variance = MeanDiffVariance::control_only;
};

DateClassification complier_ttest(const Eigen::VectorXd& d, const std::vector<int>& policy, int t0,
                                  const ComplierConfig& cfg);

ComplierReport classify_dates(const Eigen::VectorXd& d, const std::vector<int>& policy, const ComplierConfig& cfg);
ComplierReport classify_dates(const Dataset& ds, const ComplierConfig& cfg);

enum class SubsetRule { all, above, below };

struct ExclusionConfig {
  SubsetRule subset = SubsetRule::all;
  std::optional<double> threshold;  // defaults to the mean of d
  double alpha = 0.05;
  int min_size = 5;
  MeanDiffVariance variance = MeanDiffVariance::control_only;
};

// Compares outcome means of non-compliers on policy vs control dates.
TestReport exclusion_test(const Eigen::VectorXd& outcome, const Eigen::VectorXd& d, const ComplierReport& report,
                          const ExclusionConfig& cfg);

// Two-sample mean comparison with Newey–West variances; shared by the classification and exclusion tests.
double mean_difference_t(const Eigen::VectorXd& a_policy, const Eigen::VectorXd& b_control, MeanDiffVariance v);

}  // namespace pilate
