#pragma once

#include <Eigen/Dense>

#include "pilate/data.hpp"

namespace pilate {

struct HacConfig {
  enum class Bandwidth { fixed, cube_root };
  Bandwidth rule = Bandwidth::cube_root;
  int fixed_lags = 0;
  bool prewhiten = false;
  bool psd_repair = false;
  bool demean = false;  // center the series before estimating

  static HacConfig fixed(int b) {
    HacConfig c;
    c.rule = Bandwidth::fixed;
    c.fixed_lags = b;
    return c;
  }
  // ⌊n^{1/3}⌋ for cube_root, capped below n.
  int lags(int n) const;
};

struct LrvEstimate {
  Eigen::MatrixXd matrix;
  int bandwidth_used = 0;
  int window_length = 0;
};

// Bartlett-kernel long-run variance (1/n)[Γ0 + Σ_j (1 − j/(b+1))(Γj + Γj')]; no demeaning.
LrvEstimate newey_west(const Eigen::MatrixXd& u, const HacConfig& cfg);
LrvEstimate newey_west_lags(const Eigen::MatrixXd& u, int b);

struct OlsFit {
  Eigen::MatrixXd coef;
  Eigen::MatrixXd residuals;
};

// Least squares by column-pivoted QR; rank below r throws SingularityError.
OlsFit ols(const Eigen::MatrixXd& y, const Eigen::MatrixXd& x);

// Numerical rank with relative tolerance 1e-10 × leading |R| diagonal.
int numerical_rank(const Eigen::MatrixXd& x);

struct IvFit {
  double beta = 0;
  double se = 0;
};

// 2SLS of y on d with exogenous x and the given instrument matrix (zero-filled outside a subsample
// when restricting). Standard error is Newey–West with the default cube-root bandwidth.
IvFit tsls(const Dataset& ds, const Eigen::MatrixXd& instruments, const HacConfig& hac = {});
IvFit tsls(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::MatrixXd& x,
           const Eigen::MatrixXd& instruments, const HacConfig& hac = {});

// Symmetric square roots via eigendecomposition; eigenvalues below floor_rel × trace are floored.
Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& a);
Eigen::MatrixXd sym_inv_sqrt(const Eigen::MatrixXd& a, double floor_rel = 1e-12);
Eigen::MatrixXd psd_repair(const Eigen::MatrixXd& a);
double min_eigenvalue(const Eigen::MatrixXd& a);

}  // namespace pilate
