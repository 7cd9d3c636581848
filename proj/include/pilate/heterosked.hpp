#pragma once

#include <optional>
#include <vector>

#include "pilate/data.hpp"
#include "pilate/linalg.hpp"

namespace pilate {

// Outcome and policy-variable changes demeaned once over the full sample, with the derived
// product y* = d̃·ỹ and square d* = d̃².
struct EventStudyFrame {
  Eigen::VectorXd ytilde, dtilde, ystar, dstar;
  std::vector<int> policy;
  double var_full_d = 0;
  int T() const { return static_cast<int>(ytilde.size()); }
};

EventStudyFrame make_frame(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const std::vector<int>& policy);
EventStudyFrame make_frame(const Dataset& ds);

struct RigobonResult {
  double beta = 0;
  double denominator = 0;  // Var_P(d̃) − Var_C(d̃)
  double var_policy = 0, var_control = 0;
  double cov_policy = 0, cov_control = 0;
  int n_policy = 0, n_control = 0;
};

// Ratio of policy-minus-control differences in Cov(ỹ, d̃) and Var(d̃) over the rows of P
// (all rows when P is empty). Sample moments use group means and n − 1.
RigobonResult rigobon_estimand(const EventStudyFrame& f, const std::optional<Partition>& P = std::nullopt);

struct IvReformulation {
  double beta = 0;
  double se = 0;
  double t_stat = 0;
  int n = 0;
};

// 2SLS of y* on d* with an intercept, instrumented by the policy-date dummy, over the rows of P.
IvReformulation iv_reformulation(const EventStudyFrame& f, const std::optional<Partition>& P = std::nullopt,
                                 const HacConfig& hac = {});

}  // namespace pilate
