#pragma once

// Straightforward reimplementations used as references in tests. Deliberately loop-based and
// independent of the library's algorithms.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "pilate/data.hpp"

namespace oracle {

// Bartlett LRV with explicit double loop, 1/n normalization, no demeaning.
inline Eigen::MatrixXd newey_west(const Eigen::MatrixXd& u, int b) {
  const int n = static_cast<int>(u.rows()), k = static_cast<int>(u.cols());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(k, k);
  for (int t = 0; t < n; ++t)
    for (int s = 0; s < n; ++s) {
      const int lag = std::abs(t - s);
      if (lag > b) continue;
      const double w = 1.0 - lag / (b + 1.0);
      for (int a = 0; a < k; ++a)
        for (int c = 0; c < k; ++c) J(a, c) += w * u(t, a) * u(s, c);
    }
  return J / n;
}

inline int cube_root_lags(int n) {
  int b = static_cast<int>(std::floor(std::cbrt(static_cast<double>(n)) + 1e-12));
  return std::min(b, n - 1);
}

// Residuals of y on x via normal equations.
inline Eigen::MatrixXd resid(const Eigen::MatrixXd& y, const Eigen::MatrixXd& x) {
  if (x.cols() == 0) return y;
  const Eigen::MatrixXd xtx = x.transpose() * x;
  return y - x * xtx.inverse() * (x.transpose() * y);
}

inline Eigen::MatrixXd rows_of(const Eigen::MatrixXd& a, const std::vector<int>& rows) {
  Eigen::MatrixXd out(rows.size(), a.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = a.row(rows[i]);
  return out;
}

// F on the rows of P with restricted residuals, residualizing on x within the subsample.
inline double f_stat(const pilate::Dataset& ds, const std::vector<int>& rows) {
  const Eigen::MatrixXd x = rows_of(ds.x, rows);
  const Eigen::MatrixXd z = resid(rows_of(ds.z, rows), x);
  const Eigen::MatrixXd d = resid(rows_of(ds.d, rows), x);
  const int n = static_cast<int>(rows.size());
  Eigen::MatrixXd u(n, z.cols());
  for (int t = 0; t < n; ++t) u.row(t) = z.row(t) * d(t, 0);
  const Eigen::VectorXd s = z.transpose() * d;
  const Eigen::MatrixXd J = newey_west(u, cube_root_lags(n));
  const int q = static_cast<int>(z.cols()), p = static_cast<int>(x.cols());
  return s.dot(J.inverse() * s) / (q * static_cast<double>(n - p - q));
}

// Every strictly gapped partition admitted by the rules, by direct recursion over 1-based starts.
inline std::vector<pilate::Partition> partitions(const pilate::LengthRules& r) {
  std::vector<pilate::Partition> out;
  std::vector<pilate::Segment> cur;
  std::function<void(int, int)> rec = [&](int first_start, int total) {
    const int k = static_cast<int>(cur.size());
    if (k >= r.min_count && total >= r.min_total && total <= r.max_total) out.emplace_back(cur, r.T);
    if (k == r.max_count) return;
    for (int s = first_start; s <= r.T; ++s)
      for (int e = s + r.min_segment; e <= r.T + 1; ++e) {
        if (total + (e - s) > r.max_total) break;
        cur.push_back({s, e});
        rec(e + 1, total + (e - s));
        cur.pop_back();
      }
  };
  rec(1, 0);
  return out;
}

inline std::vector<int> rows(const pilate::Partition& P) {
  std::vector<int> r;
  for (const auto& s : P.segments())
    for (int t = s.start; t < s.end; ++t) r.push_back(t - 1);
  return r;
}

// Random first-stage dataset: θ on the first and last thirds, none in the middle.
inline pilate::Dataset toy(int T, int q, int p, std::uint64_t seed, double theta = 0.8) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd z(T, q), x(T, p);
  Eigen::VectorXd d(T), y(T);
  for (int t = 0; t < T; ++t) {
    const bool on = t < T / 3 || t >= 2 * T / 3;
    for (int j = 0; j < p; ++j) x(t, j) = j == 0 ? 1.0 : n(g);
    double fs = 0;
    for (int j = 0; j < q; ++j) {
      z(t, j) = 1.0 + n(g);
      fs += on ? theta * z(t, j) : 0.0;
    }
    const double e = n(g);
    d(t) = fs + e + (p > 0 ? 0.3 * x(t, 0) : 0.0);
    y(t) = 0.5 * d(t) + 0.4 * e + n(g);
  }
  return pilate::make_dataset(y, d, x, z);
}

}  // namespace oracle
