#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pilate/estimation.hpp"
#include "pilate/fstar.hpp"
#include "pilate/report.hpp"
#include "pilate/robust.hpp"

namespace pilate {

enum class DgpKind { calibrated, linear_three_regime };
enum class RegressorKind { intercept, gaussian };

struct DgpSpec {
  DgpKind kind = DgpKind::linear_three_regime;
  int T = 200;
  double pi0 = 0.6;
  double theta1 = 0, theta2 = 0, theta3 = 0;
  double rho = 0.25;  // corr(u, e) innovations
  double rho_e = 0, rho_u = 0;
  double beta = 0;
  double gamma1 = 0, gamma2 = 0;
  RegressorKind regressor = RegressorKind::intercept;
  // calibrated kind
  double sigma_v2 = 1.0;
  int calendar_period = 31;
  std::optional<std::vector<int>> calendar;
  int burn_in = 200;

  void validate() const;
  // 1-based last rows of the first and second regimes.
  std::pair<int, int> regime_bounds() const;
  // Rows outside the middle regime, where the first stage is switched on in the standard designs.
  Partition outer_regimes() const;
  std::string describe() const;
};

// θ = d/√T.
double local_theta(double d, int T);

// One synthetic dataset; a pure function of (spec, seed, index).
Dataset gen_dataset(const DgpSpec& spec, std::uint64_t seed, std::uint64_t index);

struct RateEstimate {
  double rate = 0;
  double se = 0;
};
RateEstimate rate_of(const std::vector<char>& hits);

struct McRun {
  int reps = 1000;
  std::uint64_t seed = 7;
  int threads = 1;
};

struct ExperimentReport {
  std::string suite;
  McRun run;
  Json cells = Json::array();
  double wall_seconds = 0;

  Json to_json(bool include_run_info = true) const;
};

struct FTestConfig {
  SearchConfig search;
  HacConfig hac;
  double alpha = 0.05;
  double cv_full = 0;   // critical value for the full-sample F
  double cv_fstar = 0;  // critical value for F*
};

struct FStatDraws {
  std::vector<double> full, fstar;
  int failures = 0;
};

FStatDraws draw_f_stats(const DgpSpec& spec, const FTestConfig& cfg, const McRun& run);

// Null rejection rates for the null design and raw plus size-adjusted power for each alternative.
ExperimentReport size_power_f(const DgpSpec& null_spec, const std::vector<DgpSpec>& alternatives,
                              const FTestConfig& cfg, const McRun& run);

struct BetaDraws {
  std::vector<double> full, ols, fgls;
  int failures = 0;
};

BetaDraws draw_betas(const DgpSpec& spec, const EstimationConfig& est, const HacConfig& hac, const McRun& run);

ExperimentReport bias_mse_beta(const std::vector<DgpSpec>& specs, const EstimationConfig& est, const HacConfig& hac,
                               const McRun& run);

struct RobustConfig {
  M2SearchConfig search;
  HacConfig hac;
  double alpha = 0.05;
};

struct RobustDraws {
  // per replication: AR, LM, CLR rejections for full-sample and estimated-subsample modes
  std::vector<char> ar_full, lm_full, clr_full, ar_est, lm_est, clr_est;
  std::vector<double> lm_full_stat, lm_est_stat;
  int failures = 0;
};

RobustDraws draw_robust(const DgpSpec& spec, double beta0, const RobustConfig& cfg, const McRun& run);

// Null rejection frequencies at β₀ = spec.beta, plus power at β₀ = spec.beta + offset (raw and size-adjusted
// for LM) for each offset.
ExperimentReport size_power_robust(const std::vector<DgpSpec>& specs, const RobustConfig& cfg, const McRun& run,
                                   const std::vector<double>& beta0_offsets = {});

// Default designs for the CLI suites.
ExperimentReport run_suite(const std::string& suite, const McRun& run, const CvTable& table);

}  // namespace pilate
