#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pilate/data.hpp"
#include "pilate/linalg.hpp"

namespace pilate {

struct ReducedForm {
  Eigen::MatrixXd vhat;   // T×2 residuals of [y : d]
  Eigen::Matrix2d sigma_v;
  Eigen::MatrixXd zbar;   // M_X C_S z, T×q
};

// Residuals of [y : d] after projecting off the zero-filled, x-residualized instruments and off x.
ReducedForm reduced_form_residuals(const Dataset& ds, const Partition& P);

struct RobustStatBundle {
  Eigen::VectorXd n1, n2;
  double m1 = 0, m2 = 0, m12 = 0;
  Eigen::MatrixXd sigma_n1, sigma_n1n2, sigma_n2_star, sigma_n2;
  Eigen::Matrix2d sigma_v;
  Eigen::Vector2d b0, a0;
  Partition partition;
  bool psd_repaired = false;
};

RobustStatBundle robust_bundle(const Dataset& ds, const Partition& P, double beta0, const HacConfig& hac = {});

struct ArLmLr {
  double ar = 0;
  double lm = 0;  // NaN when m2 = 0
  double lr = 0;
  bool lm_defined = true;
};

ArLmLr ar_lm_lr(double m1, double m2, double m12);
ArLmLr ar_lm_lr(const RobustStatBundle& b);

// Conditional critical value of the LR statistic as a function of m2 = ‖n2‖², tabulated on a grid
// of knots with common random numbers and interpolated monotonically.
class ClrCritical {
 public:
  ClrCritical(int q, double alpha, int reps = 100000, std::uint64_t seed = 11, int knots = 200,
              double max_m2 = 1e4);
  double operator()(double m2) const;
  // Process-wide instance for (q, alpha) with default settings.
  static const ClrCritical& cached(int q, double alpha);

  const std::vector<double>& knots() const { return x_; }
  const std::vector<double>& values() const { return y_; }

 private:
  double simulate(double m2) const;

  int q_;
  double alpha_;
  std::vector<double> z1sq_, rest_;  // Z₁² and Σ_{j≥2} Z_j²
  std::vector<double> x_, y_, slope_;
};

// Direct simulation of κ_α at a given n2; depends on n2 only through its squared norm.
double clr_critical_value(const Eigen::VectorXd& n2, double alpha, int reps = 100000, std::uint64_t seed = 11);

double chi2_quantile(double df, double prob);

struct M2SearchConfig {
  double eps = 0.05;
  int m_plus = 5;
  std::optional<double> pi_l;  // lower bound on the subsample fraction; default π ∈ (ε, 1]
  int top_k = 10;
  long long enumeration_bound = 20000;
  bool enumeration_guard = true;

  LengthRules rules(int T) const;
};

struct M2SearchResult {
  Partition partition;
  double m2 = 0;
  bool enumerated = false;
};

// Maximizer of the exact m2 over the configured class: linear (q = 1) or quadratic surrogate profile,
// exact refinement of the top candidates, enumeration when the class is small.
M2SearchResult shat_m2(const Dataset& ds, double beta0, const M2SearchConfig& cfg, const HacConfig& hac = {});

enum class RobustMode { full_sample, known_subsample, estimated_subsample };

struct RobustTestReport {
  double ar = 0, lm = 0, lr = 0;
  bool lm_defined = true;
  double m1 = 0, m2 = 0, m12 = 0;
  double chi2_q = 0, chi2_1 = 0, kappa_alpha = 0;
  bool reject_ar = false, reject_lm = false, reject_clr = false;
  double alpha = 0.05;
  double beta0 = 0;
  Partition partition;
  RobustMode mode = RobustMode::full_sample;
  std::vector<std::string> warnings;
};

std::string to_string(RobustMode m);

RobustTestReport robust_test(const Dataset& ds, double beta0, double alpha, RobustMode mode,
                             const std::optional<Partition>& known = std::nullopt, const M2SearchConfig& cfg = {},
                             const HacConfig& hac = {});

}  // namespace pilate
