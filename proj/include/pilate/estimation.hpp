#pragma once

#include <string>
#include <vector>

#include "pilate/data.hpp"
#include "pilate/linalg.hpp"

namespace pilate {

struct EstimationConfig {
  double pi0 = 0.8;
  int m0 = 2;
  double eps = 0.05;
  bool exact_length = true;  // |S| = ⌊π₀T⌋; false relaxes to |S| ≥ ⌊π₀T⌋
  int top_k = 10;
  long long enumeration_bound = 2000000;

  LengthRules rules(int T) const;
};

struct SubsampleFit {
  Partition partition;
  double criterion = 0;  // weighted reduced-form SSR at the partition
  bool enumerated = false;
};

// Weighted reduced-form criterion tr(W·E'E), E the residuals of [y : d] on [C_S z : x].
double reduced_form_criterion(const Dataset& ds, const Partition& P, const Eigen::Matrix2d& weight);

// Minimizes the reduced-form criterion with the given (y, d) weight over the configured class.
SubsampleFit shat_weighted(const Dataset& ds, const EstimationConfig& cfg, const Eigen::Matrix2d& weight);

// SSR of d on [C_S z : x].
SubsampleFit shat_ols(const Dataset& ds, const EstimationConfig& cfg);

struct FglsFit : SubsampleFit {
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Identity();
  bool fell_back_to_ols = false;
  std::string warning;
};

// Residual covariance of the two reduced-form equations at a pilot partition.
Eigen::Matrix2d pilot_sigma(const Dataset& ds, const Partition& pilot);

FglsFit shat_fgls(const Dataset& ds, const EstimationConfig& cfg, const Partition& pilot);

IvFit beta_on_subsample(const Dataset& ds, const Partition& P, const HacConfig& hac = {});

enum class EstimationMethod { ols, fgls };

struct EstimationResult {
  Partition partition;
  double beta = 0;
  double se = 0;
  double criterion = 0;
  EstimationMethod method = EstimationMethod::ols;
  std::optional<Eigen::Matrix2d> sigma;
  std::vector<std::string> warnings;
};

EstimationResult estimate(const Dataset& ds, const EstimationConfig& cfg, EstimationMethod method,
                          const HacConfig& hac = {});

}  // namespace pilate
