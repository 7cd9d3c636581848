#include "doctest.h"
#include "oracles.hpp"
#include "pilate/linalg.hpp"

using namespace pilate;

namespace {

Eigen::MatrixXd random_matrix(int n, int k, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) m(i, j) = nd(g) + (i > 0 ? 0.5 * m(i - 1, j) : 0.0);
  return m;
}

}  // namespace

TEST_CASE("newey-west matches the double-loop estimator") {
  for (int b : {0, 1, 3, 7}) {
    const Eigen::MatrixXd u = random_matrix(40, 3, 10 + b);
    const Eigen::MatrixXd mine = newey_west_lags(u, b).matrix;
    CHECK((mine - oracle::newey_west(u, b)).cwiseAbs().maxCoeff() < 1e-12);
  }
  const Eigen::MatrixXd u = random_matrix(64, 2, 3);
  const auto est = newey_west(u, HacConfig{});
  CHECK(est.bandwidth_used == 4);
  CHECK((est.matrix - oracle::newey_west(u, 4)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("newey-west lag zero is the outer-product mean") {
  Eigen::MatrixXd u(4, 1);
  u << 1, -2, 3, 0;
  CHECK(newey_west_lags(u, 0).matrix(0, 0) == doctest::Approx(14.0 / 4));
}

TEST_CASE("newey-west is positive semidefinite") {
  for (std::uint64_t s = 0; s < 200; ++s) {
    std::mt19937_64 g(s);
    const int n = 5 + static_cast<int>(g() % 60);
    const int k = 1 + static_cast<int>(g() % 4);
    const int b = static_cast<int>(g() % n);
    const Eigen::MatrixXd u = random_matrix(n, k, s + 1000);
    const Eigen::MatrixXd J = newey_west_lags(u, b).matrix;
    CHECK(min_eigenvalue(J) >= -1e-10 * std::max(1.0, J.trace()));
  }
}

TEST_CASE("demeaned option centers the series") {
  Eigen::MatrixXd u = random_matrix(30, 2, 9);
  HacConfig c;
  c.demean = true;
  const Eigen::MatrixXd centered = u.rowwise() - u.colwise().mean();
  CHECK((newey_west(u, c).matrix - newey_west(centered, HacConfig{}).matrix).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("bandwidth rules") {
  CHECK(HacConfig{}.lags(200) == 5);
  CHECK(HacConfig{}.lags(27) == 3);
  CHECK(HacConfig{}.lags(8) == 2);
  CHECK(HacConfig::fixed(2).lags(10) == 2);
  CHECK_THROWS_AS(HacConfig::fixed(10).lags(10), ValidationError);
}

TEST_CASE("ols matches normal equations and rejects rank deficiency") {
  const Eigen::MatrixXd x = random_matrix(25, 3, 1);
  const Eigen::MatrixXd y = random_matrix(25, 2, 2);
  CHECK((ols(y, x).residuals - oracle::resid(y, x)).cwiseAbs().maxCoeff() < 1e-10);
  Eigen::MatrixXd xd(25, 2);
  xd.col(0) = x.col(0);
  xd.col(1) = 2 * x.col(0);
  CHECK_THROWS_AS(ols(y, xd), SingularityError);
  CHECK(numerical_rank(xd) == 1);
}

TEST_CASE("just-identified 2SLS is the ratio of cross moments") {
  const Eigen::MatrixXd m = random_matrix(50, 3, 4);
  const Eigen::VectorXd z = m.col(0);
  const Eigen::VectorXd d = z + 0.3 * m.col(1);
  const Eigen::VectorXd y = 2 * d + m.col(2);
  const auto fit = tsls(y, d, Eigen::MatrixXd(50, 0), z);
  CHECK(fit.beta == doctest::Approx(z.dot(y) / z.dot(d)).epsilon(1e-12));
  const Eigen::VectorXd u = y - fit.beta * d;
  const Eigen::VectorXd dhat = z * (z.dot(d) / z.dot(z));
  Eigen::MatrixXd g(50, 1);
  g.col(0) = dhat.cwiseProduct(u);
  const double se = std::sqrt(50 * oracle::newey_west(g, 3)(0, 0)) / std::abs(dhat.dot(d));
  CHECK(fit.se == doctest::Approx(se).epsilon(1e-10));
  CHECK_THROWS_AS(tsls(y, d, Eigen::MatrixXd(50, 0), Eigen::MatrixXd::Zero(50, 1)), WeakIdentificationError);
}

TEST_CASE("symmetric square roots") {
  const Eigen::MatrixXd a = random_matrix(10, 3, 6);
  const Eigen::MatrixXd s = a.transpose() * a;
  const Eigen::MatrixXd r = sym_sqrt(s);
  CHECK((r * r - s).cwiseAbs().maxCoeff() < 1e-9);
  const Eigen::MatrixXd ri = sym_inv_sqrt(s);
  CHECK((ri * s * ri - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-9);
  Eigen::Matrix2d neg;
  neg << 1, 2, 2, 1;
  CHECK(min_eigenvalue(psd_repair(neg)) >= -1e-12);
}
