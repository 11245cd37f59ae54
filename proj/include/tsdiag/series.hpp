#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "tsdiag/errors.hpp"

namespace tsdiag {

/// Missing observations are carried as quiet NaN.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/// Regularly sampled series on a consecutive integer time axis (calendar
/// years in the intended use): values[i] is the observation at start_time + i.
struct TimeSeries {
  int start_time = 0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  int time_at(std::size_t i) const { return start_time + static_cast<int>(i); }
  int end_time() const {
    return start_time + static_cast<int>(values.size()) - 1;
  }

  std::size_t missing_count() const {
    return static_cast<std::size_t>(
        std::count_if(values.begin(), values.end(),
                      [](double v) { return is_missing(v); }));
  }
  std::size_t observed_count() const { return size() - missing_count(); }
  bool complete() const { return missing_count() == 0; }
};

/// Sample autocorrelations for lags 0..max_lag with the white-noise
/// significance bound ±1.96/√n.
struct AcfResult {
  std::vector<int> lags;
  std::vector<double> correlations;
  std::size_t n = 0;
  double bound = 0.0;

  double at(int lag) const {
    return correlations.at(static_cast<std::size_t>(lag));
  }
  int max_lag() const { return lags.empty() ? 0 : lags.back(); }
};

struct SummaryStats {
  double mean = 0.0;
  double variance = 0.0;  // divisor n
  double min = 0.0;
  double max = 0.0;
  std::size_t missing = 0;
};

/// Lag-d difference: out[t] = in[t+d] − in[t]. The output is d shorter and
/// starts d later; any pair touching a missing value is missing.
inline TimeSeries difference(const TimeSeries& series, int lag = 1) {
  if (lag < 1) throw InvalidArgument("difference: lag must be positive");
  if (series.size() <= static_cast<std::size_t>(lag))
    throw InvalidArgument("difference: series length must exceed the lag");
  TimeSeries out;
  out.start_time = series.start_time + lag;
  out.values.resize(series.size() - lag);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double a = series.values[i];
    const double b = series.values[i + lag];
    out.values[i] = (is_missing(a) || is_missing(b)) ? kMissing : b - a;
  }
  return out;
}

/// Sample ACF with divisor-n autocovariances,
///   γ̂(h) = (1/n) Σ (y_{t+h}−ȳ)(y_t−ȳ),
/// so the sequence is nonnegative definite. Missing values are dropped
/// pairwise in the numerator while n stays the full non-missing count.
inline AcfResult sample_acf(const TimeSeries& series, int max_lag) {
  const auto& y = series.values;
  if (max_lag < 1 || static_cast<std::size_t>(max_lag) >= y.size())
    throw InvalidArgument("sample_acf: need 1 <= max_lag < length");

  std::size_t n = 0;
  double sum = 0.0;
  for (double v : y) {
    if (is_missing(v)) continue;
    sum += v;
    ++n;
  }
  if (n < 2) throw InvalidArgument("sample_acf: need >= 2 observed values");
  const double mean = sum / static_cast<double>(n);

  double gamma0 = 0.0;
  for (double v : y) {
    if (is_missing(v)) continue;
    gamma0 += (v - mean) * (v - mean);
  }
  gamma0 /= static_cast<double>(n);
  if (gamma0 <= 0.0)
    throw DegenerateSeries("sample_acf: series is constant");

  AcfResult result;
  result.n = n;
  result.bound = 1.96 / std::sqrt(static_cast<double>(n));
  result.lags.reserve(static_cast<std::size_t>(max_lag) + 1);
  result.correlations.reserve(static_cast<std::size_t>(max_lag) + 1);
  for (int h = 0; h <= max_lag; ++h) {
    double acc = 0.0;
    for (std::size_t t = 0; t + static_cast<std::size_t>(h) < y.size(); ++t) {
      const double a = y[t];
      const double b = y[t + static_cast<std::size_t>(h)];
      if (is_missing(a) || is_missing(b)) continue;
      acc += (a - mean) * (b - mean);
    }
    result.lags.push_back(h);
    result.correlations.push_back(acc / static_cast<double>(n) / gamma0);
  }
  return result;
}

inline SummaryStats summary_stats(const TimeSeries& series) {
  SummaryStats stats;
  stats.missing = series.missing_count();
  const std::size_t n = series.size() - stats.missing;
  if (n == 0) throw EmptySeries("summary_stats: all values are missing");

  double sum = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : series.values) {
    if (is_missing(v)) continue;
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  stats.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : series.values) {
    if (is_missing(v)) continue;
    ss += (v - stats.mean) * (v - stats.mean);
  }
  stats.variance = ss / static_cast<double>(n);
  stats.min = lo;
  stats.max = hi;
  return stats;
}

}  // namespace tsdiag
