#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "tsdiag/arma.hpp"
#include "tsdiag/errors.hpp"
#include "tsdiag/series.hpp"

namespace tsdiag {

enum class CcfMode { raw, prewhitened_x, prewhitened_both };

inline const char* to_string(CcfMode mode) {
  switch (mode) {
    case CcfMode::raw: return "raw";
    case CcfMode::prewhitened_x: return "prewhitened-x";
    case CcfMode::prewhitened_both: return "prewhitened-both";
  }
  return "?";
}

/// Correlations corr(y_{t+h}, x_t) for h = −max_lag..max_lag: positive lag
/// means x leads y. Bound is the constant white-noise band 1.96/√n with n the
/// overlap length.
struct CcfResult {
  std::vector<int> lags;
  std::vector<double> correlations;
  std::size_t n = 0;
  double bound = 0.0;
  CcfMode mode = CcfMode::raw;
  int prewhiten_p = -1;  // ARMA order selected for x; -1 in raw mode
  int prewhiten_q = -1;

  int max_lag() const { return lags.empty() ? 0 : lags.back(); }
  double at(int lag) const {
    if (lag < -max_lag() || lag > max_lag())
      throw InvalidArgument("CcfResult: lag out of range");
    return correlations[static_cast<std::size_t>(lag + max_lag())];
  }
};

namespace detail {

struct Overlap {
  std::vector<double> x;
  std::vector<double> y;
  int start_time = 0;
};

inline Overlap align(const TimeSeries& x, const TimeSeries& y, int max_lag,
                     const char* who) {
  const int t0 = std::max(x.start_time, y.start_time);
  const int t1 = std::min(x.end_time(), y.end_time());
  const long count = static_cast<long>(t1) - t0 + 1;
  if (count - max_lag < 10)
    throw InvalidArgument(std::string(who) +
                          ": insufficient overlap between the series");
  Overlap ov;
  ov.start_time = t0;
  ov.x.reserve(static_cast<std::size_t>(count));
  ov.y.reserve(static_cast<std::size_t>(count));
  for (int t = t0; t <= t1; ++t) {
    const double xv = x.values[static_cast<std::size_t>(t - x.start_time)];
    const double yv = y.values[static_cast<std::size_t>(t - y.start_time)];
    if (is_missing(xv) || is_missing(yv))
      throw UnsupportedInput(std::string(who) +
                             ": missing values in the overlap window");
    ov.x.push_back(xv);
    ov.y.push_back(yv);
  }
  return ov;
}

}  // namespace detail

inline CcfResult cross_correlation(const TimeSeries& x, const TimeSeries& y,
                                   int max_lag) {
  if (max_lag < 1)
    throw InvalidArgument("cross_correlation: max_lag must be positive");
  const auto ov = detail::align(x, y, max_lag, "cross_correlation");
  const std::size_t n = ov.x.size();
  const double n_d = static_cast<double>(n);

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += ov.x[i];
    my += ov.y[i];
  }
  mx /= n_d;
  my /= n_d;
  double cxx = 0.0, cyy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cxx += (ov.x[i] - mx) * (ov.x[i] - mx);
    cyy += (ov.y[i] - my) * (ov.y[i] - my);
  }
  cxx /= n_d;
  cyy /= n_d;
  if (!(cxx > 0.0) || !(cyy > 0.0))
    throw DegenerateSeries("cross_correlation: constant series in overlap");
  const double scale = std::sqrt(cxx * cyy);

  CcfResult result;
  result.n = n;
  result.bound = 1.96 / std::sqrt(n_d);
  for (int h = -max_lag; h <= max_lag; ++h) {
    const std::size_t lo = static_cast<std::size_t>(std::max(0, -h));
    const std::size_t hi = n - static_cast<std::size_t>(std::max(0, h));
    double c = 0.0;
    for (std::size_t i = lo; i < hi; ++i)
      c += (ov.y[static_cast<std::size_t>(static_cast<long>(i) + h)] - my) *
           (ov.x[i] - mx);
    result.lags.push_back(h);
    result.correlations.push_back(c / n_d / scale);
  }
  return result;
}

/// Paper-style prewhitening: fit an ARMA model to x by AICc, replace x with
/// its whitened residuals, then cross-correlate. prewhitened_both also runs y
/// through x's filter (with y's own level) before correlating.
inline CcfResult prewhitened_ccf(const TimeSeries& x, const TimeSeries& y,
                                 int max_lag, int p_max, int q_max,
                                 CcfMode mode = CcfMode::prewhitened_x) {
  if (mode == CcfMode::raw) return cross_correlation(x, y, max_lag);
  const auto [p, q, report] = select_order(x, p_max, q_max);
  const TimeSeries xw = whiten_with_model(x, report.model);

  TimeSeries y_in = y;
  if (mode == CcfMode::prewhitened_both) {
    ArmaModel filter = report.model;
    double my = 0.0;
    std::size_t count = 0;
    for (double v : y.values)
      if (!is_missing(v)) {
        my += v;
        ++count;
      }
    if (count == 0) throw EmptySeries("prewhitened_ccf: y is all missing");
    filter.mean = my / static_cast<double>(count);
    y_in = whiten_with_model(y, filter);
  }

  CcfResult result = cross_correlation(xw, y_in, max_lag);
  result.mode = mode;
  result.prewhiten_p = p;
  result.prewhiten_q = q;
  return result;
}

/// Lags whose correlation exceeds the significance bound, strongest first;
/// ties by smaller |lag|, then the negative lag before the positive one.
inline std::vector<std::pair<int, double>> significant_lags(
    const CcfResult& result) {
  std::vector<std::pair<int, double>> out;
  for (std::size_t i = 0; i < result.lags.size(); ++i)
    if (std::abs(result.correlations[i]) > result.bound)
      out.emplace_back(result.lags[i], result.correlations[i]);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    const double ca = std::abs(a.second), cb = std::abs(b.second);
    if (ca != cb) return ca > cb;
    if (std::abs(a.first) != std::abs(b.first))
      return std::abs(a.first) < std::abs(b.first);
    return a.first < b.first;
  });
  return out;
}

}  // namespace tsdiag
