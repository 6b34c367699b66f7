#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mmce/types.hpp"

namespace mmce {

/// Hungarian algorithm (potentials + augmenting rows), O(n^3). Returns the
/// column assigned to each row of a square cost matrix.
inline std::vector<int> hungarian_assignment(const Matrix<double>& cost) {
  const Index n = cost.rows();
  if (cost.cols() != n) throw std::invalid_argument("hungarian: square matrix");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(std::size_t(n) + 1), v(std::size_t(n) + 1);
  std::vector<int> p(std::size_t(n) + 1), way(std::size_t(n) + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(std::size_t(n) + 1, inf);
    std::vector<char> used(std::size_t(n) + 1, false);
    do {
      used[std::size_t(j0)] = true;
      const int i0 = p[std::size_t(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[std::size_t(j)]) continue;
        const double cur =
            cost(i0 - 1, j - 1) - u[std::size_t(i0)] - v[std::size_t(j)];
        if (cur < minv[std::size_t(j)]) {
          minv[std::size_t(j)] = cur;
          way[std::size_t(j)] = j0;
        }
        if (minv[std::size_t(j)] < delta) {
          delta = minv[std::size_t(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[std::size_t(j)]) {
          u[std::size_t(p[std::size_t(j)])] += delta;
          v[std::size_t(j)] -= delta;
        } else {
          minv[std::size_t(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[std::size_t(j0)] != 0);
    do {
      const int j1 = way[std::size_t(j0)];
      p[std::size_t(j0)] = p[std::size_t(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(std::size_t(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[std::size_t(j)] > 0) row_to_col[std::size_t(p[std::size_t(j)] - 1)] = j - 1;
  return row_to_col;
}

struct MatchedErrors {
  std::vector<double> theta_err_deg;  // per true path, matched estimate
  std::vector<double> doppler_err;
  std::vector<int> assignment;  // estimate index per true path, -1 if none
  double total_cost = 0;
};

/// Optimal pairing of true and estimated (theta, doppler) lists under the
/// weighted distance |dtheta| / angle_scale_deg + |df| / doppler_scale, with
/// circular Doppler distance on [0, 1). Unequal list sizes are padded; padded
/// matches cost zero and report as unmatched.
inline MatchedErrors match_paths(const std::vector<double>& theta_true_deg,
                                 const std::vector<double>& f_true,
                                 const std::vector<double>& theta_hat_deg,
                                 const std::vector<double>& f_hat,
                                 double angle_scale_deg = 1.0,
                                 double doppler_scale = 0.01) {
  const Index k_true = Index(theta_true_deg.size());
  const Index k_hat = Index(theta_hat_deg.size());
  const Index n = std::max<Index>(std::max(k_true, k_hat), 1);
  Matrix<double> cost = Matrix<double>::Zero(n, n);
  for (Index i = 0; i < k_true; ++i)
    for (Index j = 0; j < k_hat; ++j) {
      const double dt =
          std::abs(theta_true_deg[std::size_t(i)] - theta_hat_deg[std::size_t(j)]);
      double df = std::abs(f_true[std::size_t(i)] - f_hat[std::size_t(j)]);
      df = std::min(df, 1.0 - df);
      cost(i, j) = dt / angle_scale_deg + df / doppler_scale;
    }
  const std::vector<int> assign = hungarian_assignment(cost);

  MatchedErrors out;
  out.assignment.assign(std::size_t(k_true), -1);
  for (Index i = 0; i < k_true; ++i) {
    const int j = assign[std::size_t(i)];
    if (j < 0 || j >= int(k_hat)) continue;
    out.assignment[std::size_t(i)] = j;
    const double dt =
        std::abs(theta_true_deg[std::size_t(i)] - theta_hat_deg[std::size_t(j)]);
    double df = std::abs(f_true[std::size_t(i)] - f_hat[std::size_t(j)]);
    df = std::min(df, 1.0 - df);
    out.theta_err_deg.push_back(dt);
    out.doppler_err.push_back(df);
    out.total_cost += cost(i, Index(j));
  }
  return out;
}

}  // namespace mmce
