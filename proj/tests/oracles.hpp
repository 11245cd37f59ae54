// Independent reference implementations used only by tests. Everything here
// deliberately avoids the library's state-space code path: likelihoods come
// from the innovations algorithm run directly on the model's autocovariance,
// regressions from normal equations, segmentations from brute force.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "tsdiag/arma.hpp"
#include "tsdiag/segment.hpp"
#include "tsdiag/series.hpp"

namespace oracles {

// psi-weights of the causal representation y_t = sum_j psi_j z_{t-j}.
inline std::vector<double> psi_weights(const std::vector<double>& ar,
                                       const std::vector<double>& ma,
                                       std::size_t count) {
  std::vector<double> psi(count, 0.0);
  psi[0] = 1.0;
  for (std::size_t j = 1; j < count; ++j) {
    double v = (j <= ma.size()) ? ma[j - 1] : 0.0;
    for (std::size_t k = 1; k <= ar.size() && k <= j; ++k)
      v += ar[k - 1] * psi[j - k];
    psi[j] = v;
  }
  return psi;
}

// Autocovariance gamma(0..max_lag) via a long truncated psi expansion.
inline std::vector<double> arma_autocovariance(const tsdiag::ArmaModel& model,
                                               std::size_t max_lag) {
  const std::size_t m = 6000;
  const auto psi = psi_weights(model.ar, model.ma, m + max_lag + 1);
  std::vector<double> gamma(max_lag + 1, 0.0);
  for (std::size_t h = 0; h <= max_lag; ++h) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += psi[j] * psi[j + h];
    gamma[h] = model.noise_variance * s;
  }
  return gamma;
}

// Exact Gaussian log-likelihood by the general innovations algorithm applied
// to kappa(i,j) = gamma(|i-j|). O(n^3), fine for n <= 200.
inline double innovations_loglik(const tsdiag::ArmaModel& model,
                                 const tsdiag::TimeSeries& series) {
  const std::size_t n = series.size();
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = series.values[t] - model.mean;

  const auto gamma = arma_autocovariance(model, n);
  std::vector<std::vector<double>> th(n);
  std::vector<double> v(n), xhat(n, 0.0);
  v[0] = gamma[0];

  double ll = -0.5 * (std::log(2.0 * M_PI * v[0]) + x[0] * x[0] / v[0]);
  for (std::size_t t = 1; t < n; ++t) {
    th[t].resize(t);
    for (std::size_t k = 0; k < t; ++k) {
      double s = gamma[t - k];
      for (std::size_t j = 0; j < k; ++j) s -= th[k][j] * th[t][j] * v[j];
      th[t][k] = s / v[k];
    }
    double vt = gamma[0];
    for (std::size_t j = 0; j < t; ++j) vt -= th[t][j] * th[t][j] * v[j];
    v[t] = vt;
    double pred = 0.0;
    for (std::size_t i = 0; i < t; ++i) pred += th[t][i] * (x[i] - xhat[i]);
    xhat[t] = pred;
    const double e = x[t] - xhat[t];
    ll -= 0.5 * (std::log(2.0 * M_PI * v[t]) + e * e / v[t]);
  }
  return ll;
}

// Ordinary least squares through the normal equations; the closed-form
// solution a white-error transfer fit must reproduce.
inline Eigen::VectorXd ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  return (x.transpose() * x).ldlt().solve(x.transpose() * y);
}

// Per-segment MDL term computed the slow way: explicit regression rows and a
// QR solve, no prefix sums, no global centering.
inline double naive_segment_term(const std::vector<double>& values,
                                 std::size_t i, std::size_t j, int p) {
  const std::size_t len = j - i;
  double mu = 0.0;
  for (std::size_t t = i; t < j; ++t) mu += values[t];
  mu /= static_cast<double>(len);

  const std::size_t rows = len - static_cast<std::size_t>(p);
  double rss;
  if (p == 0) {
    rss = 0.0;
    for (std::size_t t = i; t < j; ++t)
      rss += (values[t] - mu) * (values[t] - mu);
  } else {
    Eigen::MatrixXd x(rows, p);
    Eigen::VectorXd y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t t = i + static_cast<std::size_t>(p) + r;
      y(static_cast<Eigen::Index>(r)) = values[t] - mu;
      for (int a = 1; a <= p; ++a)
        x(static_cast<Eigen::Index>(r), a - 1) =
            values[t - static_cast<std::size_t>(a)] - mu;
    }
    const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
    rss = (y - x * beta).squaredNorm();
  }
  const double sigma2 = std::max(rss / static_cast<double>(rows), 1e-300);
  return std::log(static_cast<double>(std::max(p, 1))) +
         0.5 * (p + 2) * std::log(static_cast<double>(len)) +
         0.5 * static_cast<double>(len) * std::log(2.0 * M_PI * sigma2);
}

// Exhaustive minimum-MDL search over at most two breakpoints, sharing the
// library's cost table but none of its dynamic program. Tie rules mirror the
// library: fewer breaks first, then lexicographically smaller breakpoints.
struct EnumeratedSegmentation {
  std::vector<std::size_t> breakpoints;
  double mdl = std::numeric_limits<double>::infinity();
};

inline EnumeratedSegmentation enumerate_segmentation(
    const tsdiag::TimeSeries& series, int max_breaks, int max_order,
    std::size_t min_len) {
  const std::size_t n = series.size();
  const tsdiag::detail::ArCostTable table(series.values, max_order);
  const double log_n = std::log(static_cast<double>(n));
  EnumeratedSegmentation best;

  const auto consider = [&](const std::vector<std::size_t>& bps) {
    double total = std::log(static_cast<double>(bps.size() + 1)) +
                   static_cast<double>(bps.size() + 1) * log_n;
    std::size_t begin = 0;
    for (std::size_t b = 0; b <= bps.size(); ++b) {
      const std::size_t end = (b < bps.size()) ? bps[b] : n;
      total += table.best_term(begin, end, max_order).first;
      begin = end;
    }
    if (total < best.mdl) {
      best.mdl = total;
      best.breakpoints = bps;
    }
  };

  consider({});
  if (max_breaks >= 1 && n >= 2 * min_len)
    for (std::size_t t1 = min_len; t1 + min_len <= n; ++t1)
      consider({t1});
  if (max_breaks >= 2 && n >= 3 * min_len)
    for (std::size_t t1 = min_len; t1 + 2 * min_len <= n; ++t1)
      for (std::size_t t2 = t1 + min_len; t2 + min_len <= n; ++t2)
        consider({t1, t2});
  return best;
}

}  // namespace oracles
