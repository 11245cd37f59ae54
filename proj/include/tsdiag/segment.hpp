#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "tsdiag/errors.hpp"
#include "tsdiag/series.hpp"

namespace tsdiag {

struct SegmentModel {
  std::size_t begin = 0;   // index into the series
  std::size_t length = 0;
  int order = 0;
  std::vector<double> ar;
  double mean = 0.0;
  double noise_variance = 0.0;
};

struct Segmentation {
  std::vector<std::size_t> breakpoints;  // first index of each later segment
  std::vector<SegmentModel> segments;
  double mdl = 0.0;

  std::size_t m() const { return breakpoints.size(); }
};

namespace detail {

inline constexpr double kMinInnovationVariance = 1e-300;

// Windowed conditional-least-squares AR costs backed by prefix sums, so a
// single (window, order) evaluation is O(order^2) after O(n·order) setup.
// Values are pre-centered globally; the per-segment mean is still removed
// exactly, centering only improves the conditioning of the prefix sums.
class ArCostTable {
 public:
  ArCostTable(const std::vector<double>& values, int max_order)
      : n_(values.size()), max_order_(max_order), w_(values) {
    double mean = 0.0;
    for (double v : w_) mean += v;
    mean /= static_cast<double>(n_);
    for (double& v : w_) v -= mean;

    sum_.assign(n_ + 1, 0.0);
    for (std::size_t s = 0; s < n_; ++s) sum_[s + 1] = sum_[s] + w_[s];
    prod_.assign(static_cast<std::size_t>(max_order) + 1,
                 std::vector<double>(n_ + 1, 0.0));
    for (int d = 0; d <= max_order; ++d) {
      auto& pp = prod_[static_cast<std::size_t>(d)];
      for (std::size_t s = static_cast<std::size_t>(d); s < n_; ++s)
        pp[s + 1] = pp[s] + w_[s] * w_[s - static_cast<std::size_t>(d)];
    }
  }

  struct Cls {
    std::vector<double> ar;
    double mean = 0.0;
    double noise_variance = 0.0;
  };

  // Demeaned cross-moments over regression rows t = i+p .. j-1:
  //   M(a,b) = sum_t (w[t-a] - mu)(w[t-b] - mu),  mu = window mean.
  // AR coefficients solve M[1..p,1..p] phi = M[1..p,0].
  Cls cls(std::size_t i, std::size_t j, int p) const {
    const std::size_t up = static_cast<std::size_t>(p);
    const double len = static_cast<double>(j - i);
    const double rows = static_cast<double>(j - i - up);
    const double mu = (sum_[j] - sum_[i]) / len;

    Eigen::MatrixXd m(p + 1, p + 1);
    for (int a = 0; a <= p; ++a) {
      const std::size_t ua = static_cast<std::size_t>(a);
      const double sum_a = sum_[j - ua] - sum_[i + up - ua];
      for (int b = a; b <= p; ++b) {
        const std::size_t ub = static_cast<std::size_t>(b);
        const std::size_t d = ub - ua;
        const double raw = prod_[d][j - ua] - prod_[d][i + up - ua];
        const double sum_b = sum_[j - ub] - sum_[i + up - ub];
        m(a, b) = m(b, a) = raw - mu * (sum_a + sum_b) + rows * mu * mu;
      }
    }

    Cls out;
    out.mean = mu;
    double rss;
    if (p == 0) {
      rss = m(0, 0);
    } else {
      const Eigen::MatrixXd a = m.bottomRightCorner(p, p);
      const Eigen::VectorXd c = m.col(0).tail(p);
      const Eigen::VectorXd phi = a.ldlt().solve(c);
      rss = m(0, 0) - 2.0 * phi.dot(c) + phi.dot(a * phi);
      out.ar.assign(phi.data(), phi.data() + p);
    }
    out.noise_variance =
        std::max(rss / rows, kMinInnovationVariance);
    return out;
  }

  // Per-segment MDL contribution at a fixed order.
  double term(std::size_t i, std::size_t j, int p) const {
    const double len = static_cast<double>(j - i);
    const auto fit = cls(i, j, p);
    if (!std::isfinite(fit.noise_variance) || fit.noise_variance <= 0.0)
      return std::numeric_limits<double>::infinity();
    return std::log(static_cast<double>(std::max(p, 1))) +
           0.5 * (p + 2) * std::log(len) +
           0.5 * len * std::log(2.0 * M_PI * fit.noise_variance);
  }

  // Minimum over orders 0..p_cap admissible for the window length; ties go
  // to the smaller order.
  std::pair<double, int> best_term(std::size_t i, std::size_t j,
                                   int p_cap) const {
    double best = std::numeric_limits<double>::infinity();
    int best_p = -1;
    for (int p = 0; p <= p_cap; ++p) {
      if (j - i < static_cast<std::size_t>(p) + 2) break;
      const double t = term(i, j, p);
      if (t < best) {
        best = t;
        best_p = p;
      }
    }
    return {best, best_p};
  }

  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  int max_order_;
  std::vector<double> w_;
  std::vector<double> sum_;
  std::vector<std::vector<double>> prod_;
};

inline std::vector<double> checked_values(const TimeSeries& series,
                                          const char* who) {
  if (series.values.empty()) throw EmptySeries(std::string(who) + ": empty series");
  if (!series.complete())
    throw UnsupportedInput(std::string(who) +
                           ": missing values are not supported");
  return series.values;
}

}  // namespace detail

/// MDL of a fixed segmentation: ln(m+1) + (m+1)·ln n plus per-segment terms
/// ln max(p,1) + ((p+2)/2)·ln n_j + (n_j/2)·ln(2π σ̂²), with σ̂² the
/// conditional-least-squares AR(p) innovation variance of the segment.
inline double mdl_score(const TimeSeries& series,
                        const std::vector<std::size_t>& breakpoints,
                        const std::vector<int>& orders) {
  const auto values = detail::checked_values(series, "mdl_score");
  const std::size_t n = values.size();
  if (orders.size() != breakpoints.size() + 1)
    throw InvalidArgument("mdl_score: need one order per segment");
  for (std::size_t b = 0; b < breakpoints.size(); ++b) {
    if (breakpoints[b] == 0 || breakpoints[b] >= n)
      throw InvalidArgument("mdl_score: breakpoints must be interior");
    if (b > 0 && breakpoints[b] <= breakpoints[b - 1])
      throw InvalidArgument("mdl_score: breakpoints must be increasing");
  }
  int max_order = 0;
  for (int p : orders) {
    if (p < 0) throw InvalidArgument("mdl_score: negative order");
    max_order = std::max(max_order, p);
  }

  const detail::ArCostTable table(values, max_order);
  const double m = static_cast<double>(breakpoints.size());
  double total = std::log(m + 1.0) +
                 (m + 1.0) * std::log(static_cast<double>(n));
  std::size_t begin = 0;
  for (std::size_t seg = 0; seg <= breakpoints.size(); ++seg) {
    const std::size_t end = (seg < breakpoints.size()) ? breakpoints[seg] : n;
    const int p = orders[seg];
    if (end - begin < static_cast<std::size_t>(p) + 2)
      throw InvalidArgument("mdl_score: segment too short for its order");
    total += table.term(begin, end, p);
    begin = end;
  }
  return total;
}

/// Exact minimum-MDL piecewise-AR segmentation via dynamic programming over
/// all breakpoint placements (stride 1) and per-segment orders. Ties prefer
/// fewer breaks, then the lexicographically smallest breakpoint vector.
inline Segmentation segment(const TimeSeries& series, int max_breaks,
                            int max_order, int min_seg_len) {
  const auto values = detail::checked_values(series, "segment");
  const std::size_t n = values.size();
  if (n > 10000) throw InvalidArgument("segment: series exceeds the DP budget");
  if (max_breaks < 0 || max_breaks > 10)
    throw InvalidArgument("segment: max_breaks must be in 0..10");
  if (max_order < 0) throw InvalidArgument("segment: negative max_order");
  if (min_seg_len < max_order + 2)
    throw InvalidArgument("segment: min_seg_len must be >= max_order + 2");
  if (n < static_cast<std::size_t>(min_seg_len))
    throw InvalidArgument("segment: series shorter than min_seg_len");
  {
    double mean = 0.0, ss = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    for (double v : values) ss += (v - mean) * (v - mean);
    if (!(ss > 0.0)) throw DegenerateSeries("segment: constant series");
  }

  const detail::ArCostTable table(values, max_order);
  const std::size_t min_len = static_cast<std::size_t>(min_seg_len);
  const std::size_t k_cap = static_cast<std::size_t>(max_breaks) + 1;
  const double inf = std::numeric_limits<double>::infinity();

  // suffix[k][i]: minimal sum of segment terms covering [i, n) with exactly
  // k segments; suffix[0][n] = 0 anchors the recursion.
  std::vector<std::vector<double>> suffix(
      k_cap + 1, std::vector<double>(n + 1, inf));
  suffix[0][n] = 0.0;
  for (std::size_t i = n - std::min(n, min_len);; --i) {
    if (i + min_len <= n) {
      for (std::size_t j = i + min_len; j <= n; ++j) {
        const double c = table.best_term(i, j, max_order).first;
        for (std::size_t k = 1; k <= k_cap; ++k) {
          const double prev = suffix[k - 1][j];
          if (prev < inf && c + prev < suffix[k][i])
            suffix[k][i] = c + prev;
        }
      }
    }
    if (i == 0) break;
  }

  std::size_t best_k = 0;
  double best_total = inf;
  for (std::size_t k = 1; k <= k_cap; ++k) {
    if (!(suffix[k][0] < inf)) continue;
    const double total = std::log(static_cast<double>(k)) +
                         static_cast<double>(k) *
                             std::log(static_cast<double>(n)) +
                         suffix[k][0];
    if (total < best_total) {
      best_total = total;
      best_k = k;
    }
  }
  if (best_k == 0)
    throw InvalidArgument("segment: no admissible segmentation");

  // Greedy smallest-first reconstruction; stored DP values are recomputed
  // with identical arithmetic, so exact equality identifies the optimum.
  Segmentation out;
  out.mdl = best_total;
  std::size_t begin = 0;
  for (std::size_t k = best_k; k >= 1; --k) {
    std::size_t end = n;
    if (k > 1) {
      bool found = false;
      for (std::size_t j = begin + min_len; j + min_len <= n; ++j) {
        const double c = table.best_term(begin, j, max_order).first;
        if (c + suffix[k - 1][j] == suffix[k][begin]) {
          end = j;
          found = true;
          break;
        }
      }
      if (!found) throw std::logic_error("segment: reconstruction failed");
      out.breakpoints.push_back(end);
    }
    const auto [cost, order] = table.best_term(begin, end, max_order);
    const auto fit = table.cls(begin, end, order);
    SegmentModel seg;
    seg.begin = begin;
    seg.length = end - begin;
    seg.order = order;
    seg.ar = fit.ar;
    seg.noise_variance = fit.noise_variance;
    // cls() works on globally centered values; report the window mean of the
    // original series.
    double mu = 0.0;
    for (std::size_t t = begin; t < end; ++t) mu += values[t];
    seg.mean = mu / static_cast<double>(end - begin);
    out.segments.push_back(seg);
    begin = end;
  }
  return out;
}

}  // namespace tsdiag
