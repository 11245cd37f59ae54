#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

#include "tsdiag/errors.hpp"
#include "tsdiag/rng.hpp"
#include "tsdiag/series.hpp"

namespace tsdiag {

/// Gaussian ARMA(p,q) in the Box–Jenkins convention:
///   y_t − mean = Σ_i ar[i] (y_{t−i} − mean) + z_t + Σ_j ma[j] z_{t−j},
/// with z_t ~ N(0, noise_variance).
struct ArmaModel {
  std::vector<double> ar;
  std::vector<double> ma;
  double mean = 0.0;
  double noise_variance = 1.0;

  int p() const { return static_cast<int>(ar.size()); }
  int q() const { return static_cast<int>(ma.size()); }
};

struct FitReport {
  ArmaModel model;
  TimeSeries residuals;  // one-step innovations rescaled to the data scale
  double loglik = 0.0;
  double aicc = 0.0;
  bool converged = false;
  int iterations = 0;
};

namespace detail {

// Spectral radius of the companion matrix of 1 − c_1 z − ... − c_m z^m.
// All roots of the polynomial lie outside the unit circle iff this is < 1.
inline double companion_spectral_radius(const std::vector<double>& coef) {
  const int m = static_cast<int>(coef.size());
  if (m == 0) return 0.0;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) c(0, i) = coef[static_cast<std::size_t>(i)];
  if (m > 1) c.block(1, 0, m - 1, m - 1).setIdentity();
  return c.eigenvalues().cwiseAbs().maxCoeff();
}

inline constexpr double kUnitRootMargin = 1e-8;

inline bool is_causal(const std::vector<double>& ar) {
  return companion_spectral_radius(ar) < 1.0 - kUnitRootMargin;
}

// 1 + θ_1 z + ... + θ_q z^q has all roots outside the unit circle iff the
// negated coefficients form a causal AR polynomial.
inline bool is_invertible(const std::vector<double>& ma) {
  std::vector<double> neg(ma.size());
  std::transform(ma.begin(), ma.end(), neg.begin(),
                 [](double v) { return -v; });
  return is_causal(neg);
}

inline void validate_model(const ArmaModel& model, bool require_invertible) {
  if (!(model.noise_variance > 0.0))
    throw InvalidModel("arma: noise_variance must be positive");
  if (!is_causal(model.ar))
    throw InvalidModel("arma: AR polynomial is not causal");
  if (require_invertible && !is_invertible(model.ma))
    throw InvalidModel("arma: MA polynomial is not invertible");
}

// State space with transition first column (φ_1..φ_r), superdiagonal ones,
// impulse vector (1, θ_1, ..., θ_{r−1}), r = max(p, q+1). Observation reads
// the first state component.
struct StateSpace {
  Eigen::MatrixXd transition;
  Eigen::VectorXd impulse;
  Eigen::MatrixXd stationary_cov;
};

inline StateSpace make_state_space(const std::vector<double>& ar,
                                   const std::vector<double>& ma) {
  const int p = static_cast<int>(ar.size());
  const int q = static_cast<int>(ma.size());
  const int r = std::max(p, q + 1);

  StateSpace ss;
  ss.transition = Eigen::MatrixXd::Zero(r, r);
  for (int i = 0; i < p; ++i)
    ss.transition(i, 0) = ar[static_cast<std::size_t>(i)];
  for (int i = 0; i + 1 < r; ++i) ss.transition(i, i + 1) = 1.0;

  ss.impulse = Eigen::VectorXd::Zero(r);
  ss.impulse(0) = 1.0;
  for (int j = 0; j < q; ++j)
    ss.impulse(j + 1) = ma[static_cast<std::size_t>(j)];

  // Stationary covariance from the discrete Lyapunov equation
  // P = T P T' + R R', solved directly via vec(P) = (I − T⊗T)^{-1} vec(RR').
  const Eigen::MatrixXd rr = ss.impulse * ss.impulse.transpose();
  Eigen::MatrixXd kron = Eigen::MatrixXd::Zero(r * r, r * r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      kron.block(i * r, j * r, r, r) = ss.transition(i, j) * ss.transition;
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(r * r, r * r) - kron;
  Eigen::VectorXd vec_rr(r * r);
  for (int j = 0; j < r; ++j) vec_rr.segment(j * r, r) = rr.col(j);
  Eigen::VectorXd vec_p = lhs.fullPivLu().solve(vec_rr);
  ss.stationary_cov.resize(r, r);
  for (int j = 0; j < r; ++j) ss.stationary_cov.col(j) = vec_p.segment(j * r, r);
  ss.stationary_cov = 0.5 * (ss.stationary_cov +
                             ss.stationary_cov.transpose().eval());
  return ss;
}

// Kalman innovations with the noise variance concentrated out: errors are on
// the data scale, variances are relative to σ² = 1.
struct FilterResult {
  std::vector<double> errors;
  std::vector<double> variances;
  double sumlog = 0.0;  // Σ ln v_t
  double ssq = 0.0;     // Σ e_t² / v_t
};

inline FilterResult kalman_innovations(const std::vector<double>& centered,
                                       const std::vector<double>& ar,
                                       const std::vector<double>& ma) {
  const StateSpace ss = make_state_space(ar, ma);
  const int r = static_cast<int>(ss.impulse.size());
  Eigen::VectorXd state = Eigen::VectorXd::Zero(r);
  Eigen::MatrixXd cov = ss.stationary_cov;
  const Eigen::MatrixXd rr = ss.impulse * ss.impulse.transpose();

  // Once the prediction variance stops moving the filter has reached steady
  // state; the gain is then constant and the covariance recursion can stop.
  bool frozen = false;
  int stable_steps = 0;
  double prev_v = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd gain = Eigen::VectorXd::Zero(r);
  double v = 0.0;

  FilterResult out;
  out.errors.reserve(centered.size());
  out.variances.reserve(centered.size());
  for (std::size_t t = 0; t < centered.size(); ++t) {
    if (t > 0) state = ss.transition * state;
    if (!frozen) {
      if (t > 0) {
        cov = ss.transition * cov * ss.transition.transpose() + rr;
        cov = 0.5 * (cov + cov.transpose().eval());
      }
      v = cov(0, 0);
      gain = cov.col(0) / v;
      if (std::abs(v - prev_v) <= 1e-13 * std::abs(v)) {
        if (++stable_steps >= 3) frozen = true;
      } else {
        stable_steps = 0;
      }
      prev_v = v;
      cov -= gain * cov.row(0);
      cov = 0.5 * (cov + cov.transpose().eval());
    }
    const double e = centered[t] - state(0);
    out.errors.push_back(e);
    out.variances.push_back(v);
    out.ssq += e * e / v;
    out.sumlog += std::log(v);
    state += gain * e;
  }
  return out;
}

inline std::vector<double> center_values(const TimeSeries& series,
                                         double mean) {
  std::vector<double> w(series.values);
  for (auto& v : w) v -= mean;
  return w;
}

// Filters the whole record, then continues prediction-only steps: mean and
// variance (relative to sigma^2 = 1) of the process `horizon` steps past the
// last observation. Exact recursion, no steady-state shortcut.
struct ForecastResult {
  std::vector<double> mean;
  std::vector<double> variance_rel;
};

inline ForecastResult kalman_forecast(const std::vector<double>& centered,
                                      const std::vector<double>& ar,
                                      const std::vector<double>& ma,
                                      std::size_t horizon) {
  const StateSpace ss = make_state_space(ar, ma);
  const int r = static_cast<int>(ss.impulse.size());
  Eigen::VectorXd state = Eigen::VectorXd::Zero(r);
  Eigen::MatrixXd cov = ss.stationary_cov;
  const Eigen::MatrixXd rr = ss.impulse * ss.impulse.transpose();
  for (std::size_t t = 0; t < centered.size(); ++t) {
    if (t > 0) {
      state = ss.transition * state;
      cov = ss.transition * cov * ss.transition.transpose() + rr;
      cov = 0.5 * (cov + cov.transpose().eval());
    }
    const double v = cov(0, 0);
    const Eigen::VectorXd gain = cov.col(0) / v;
    state += gain * (centered[t] - state(0));
    cov -= gain * cov.row(0);
    cov = 0.5 * (cov + cov.transpose().eval());
  }
  ForecastResult out;
  for (std::size_t h = 0; h < horizon; ++h) {
    state = ss.transition * state;
    cov = ss.transition * cov * ss.transition.transpose() + rr;
    cov = 0.5 * (cov + cov.transpose().eval());
    out.mean.push_back(state(0));
    out.variance_rel.push_back(cov(0, 0));
  }
  return out;
}

}  // namespace detail

struct SimulateOptions {
  // Permits |θ| at or beyond the invertibility boundary; needed to generate
  // the overdifferenced MA(1) unit-root signature.
  bool allow_noninvertible = false;
};

/// Simulates n observations after discarding a burn-in of max(p,q)+100 draws
/// so the output is approximately stationary. Deterministic for a fixed seed.
inline TimeSeries simulate(const ArmaModel& model, std::size_t n,
                           std::uint64_t seed, SimulateOptions opts = {}) {
  if (n == 0) throw InvalidArgument("simulate: n must be positive");
  if (!(model.noise_variance > 0.0))
    throw InvalidModel("simulate: noise_variance must be positive");
  if (!detail::is_causal(model.ar))
    throw InvalidModel("simulate: AR polynomial is not causal");
  if (!opts.allow_noninvertible && !detail::is_invertible(model.ma))
    throw InvalidModel("simulate: MA polynomial is not invertible");

  const std::size_t p = model.ar.size();
  const std::size_t q = model.ma.size();
  const std::size_t burn = std::max(p, q) + 100;
  const double sigma = std::sqrt(model.noise_variance);

  NormalSampler rng(seed);
  std::vector<double> noise(burn + n);
  std::vector<double> dev(burn + n);
  TimeSeries out;
  out.values.reserve(n);
  for (std::size_t t = 0; t < burn + n; ++t) {
    noise[t] = sigma * rng.next();
    double v = noise[t];
    for (std::size_t i = 0; i < p && i < t; ++i)
      v += model.ar[i] * dev[t - i - 1];
    for (std::size_t j = 0; j < q && j < t; ++j)
      v += model.ma[j] * noise[t - j - 1];
    dev[t] = v;
    if (t >= burn) out.values.push_back(model.mean + v);
  }
  return out;
}

/// Exact Gaussian log-likelihood via the state-space recursion with the
/// stationary initial covariance.
inline double log_likelihood(const ArmaModel& model, const TimeSeries& series) {
  detail::validate_model(model, /*require_invertible=*/true);
  if (series.values.empty()) throw EmptySeries("log_likelihood: empty series");
  if (!series.complete())
    throw UnsupportedInput("log_likelihood: missing values are not supported");

  const auto filt = detail::kalman_innovations(
      detail::center_values(series, model.mean), model.ar, model.ma);
  const double n = static_cast<double>(series.size());
  const double s2 = model.noise_variance;
  return -0.5 * (n * std::log(2.0 * M_PI) + filt.sumlog + n * std::log(s2) +
                 filt.ssq / s2);
}

namespace detail {

// Expansion of reflection coefficients in (−1,1)^m to the coefficients of a
// causal polynomial 1 − c_1 z − ... − c_m z^m (Durbin–Levinson recursion).
inline std::vector<double> pacf_to_ar(const std::vector<double>& pacf) {
  std::vector<double> coef(pacf);
  std::vector<double> work(coef);
  for (std::size_t j = 1; j < coef.size(); ++j) {
    for (std::size_t k = 0; k < j; ++k)
      work[k] = coef[k] - coef[j] * coef[j - 1 - k];
    std::copy(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(j),
              coef.begin());
  }
  return coef;
}

inline constexpr double kPacfClamp = 1.0 - 1e-6;

inline std::vector<double> unconstrained_to_pacf(const double* raw,
                                                 std::size_t m) {
  std::vector<double> pacf(m);
  for (std::size_t i = 0; i < m; ++i)
    pacf[i] = std::clamp(std::tanh(raw[i]), -kPacfClamp, kPacfClamp);
  return pacf;
}

// (raw_ar, raw_ma) in R^{p+q} −> causal AR and invertible MA coefficients.
inline std::pair<std::vector<double>, std::vector<double>> decode_coefficients(
    const Eigen::VectorXd& x, int p, int q) {
  std::vector<double> ar =
      pacf_to_ar(unconstrained_to_pacf(x.data(), static_cast<std::size_t>(p)));
  std::vector<double> ma =
      pacf_to_ar(unconstrained_to_pacf(x.data() + p, static_cast<std::size_t>(q)));
  for (auto& v : ma) v = -v;  // invertible region is the negated causal region
  return {std::move(ar), std::move(ma)};
}

struct SimplexResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

// Nelder–Mead with standard coefficients. Stops when the simplex diameter
// (max ∞-distance from the best vertex) drops below diameter_tol.
inline SimplexResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& start, double step, int max_iterations,
    double diameter_tol) {
  const int d = static_cast<int>(start.size());
  std::vector<Eigen::VectorXd> vertex(static_cast<std::size_t>(d) + 1, start);
  std::vector<double> value(static_cast<std::size_t>(d) + 1);
  for (int i = 0; i < d; ++i) vertex[static_cast<std::size_t>(i) + 1](i) += step;
  for (std::size_t i = 0; i < vertex.size(); ++i) value[i] = objective(vertex[i]);

  std::vector<std::size_t> order(vertex.size());
  SimplexResult result;
  for (int iter = 0; iter < max_iterations; ++iter) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return value[a] < value[b];
                     });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[order.size() - 2];

    double diameter = 0.0;
    for (std::size_t i = 0; i < vertex.size(); ++i)
      diameter = std::max(
          diameter, (vertex[i] - vertex[best]).cwiseAbs().maxCoeff());
    result.iterations = iter;
    if (diameter < diameter_tol) {
      result.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < vertex.size(); ++i)
      if (i != worst) centroid += vertex[i];
    centroid /= static_cast<double>(d);

    const Eigen::VectorXd reflected = centroid + (centroid - vertex[worst]);
    const double f_reflected = objective(reflected);
    if (f_reflected < value[best]) {
      const Eigen::VectorXd expanded =
          centroid + 2.0 * (centroid - vertex[worst]);
      const double f_expanded = objective(expanded);
      if (f_expanded < f_reflected) {
        vertex[worst] = expanded;
        value[worst] = f_expanded;
      } else {
        vertex[worst] = reflected;
        value[worst] = f_reflected;
      }
    } else if (f_reflected < value[second_worst]) {
      vertex[worst] = reflected;
      value[worst] = f_reflected;
    } else {
      const Eigen::VectorXd contracted =
          centroid + 0.5 * (vertex[worst] - centroid);
      const double f_contracted = objective(contracted);
      if (f_contracted < value[worst]) {
        vertex[worst] = contracted;
        value[worst] = f_contracted;
      } else {
        for (std::size_t i = 0; i < vertex.size(); ++i) {
          if (i == best) continue;
          vertex[i] = vertex[best] + 0.5 * (vertex[i] - vertex[best]);
          value[i] = objective(vertex[i]);
        }
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < vertex.size(); ++i)
    if (value[i] < value[best]) best = i;
  result.x = vertex[best];
  result.value = value[best];
  return result;
}

}  // namespace detail

struct FitOptions {
  // When false, the model mean is pinned to fixed_mean instead of being
  // estimated (regression-with-ARMA-errors keeps the level in the design).
  bool include_mean = true;
  double fixed_mean = 0.0;
};

/// Maximum-likelihood ARMA(p,q) fit. The causal/invertible constraint is
/// enforced by searching over reflection coefficients mapped through tanh,
/// so the simplex runs unconstrained; restarts from 5 deterministic points.
inline FitReport fit(const TimeSeries& series, int p, int q,
                     FitOptions opts = {}) {
  if (p < 0 || q < 0) throw InvalidArgument("fit: negative order");
  if (!series.complete())
    throw UnsupportedInput("fit: missing values are not supported");
  const std::size_t n = series.size();
  if (n < 10 * static_cast<std::size_t>(p + q + 1))
    throw InvalidArgument("fit: need n >= 10*(p+q+1) observations");

  const double n_d = static_cast<double>(n);
  double y_mean = 0.0;
  for (double v : series.values) y_mean += v;
  y_mean /= n_d;
  double y_var = 0.0;
  for (double v : series.values) y_var += (v - y_mean) * (v - y_mean);
  y_var /= n_d;
  if (!(y_var > 0.0)) throw DegenerateSeries("fit: series is constant");
  const double y_sd = std::sqrt(y_var);

  const int k = p + q + 1 + (opts.include_mean ? 1 : 0);
  const auto finalize = [&](const ArmaModel& model, bool converged,
                            int iterations) {
    FitReport report;
    report.model = model;
    const auto filt = detail::kalman_innovations(
        detail::center_values(series, model.mean), model.ar, model.ma);
    report.residuals.start_time = series.start_time;
    report.residuals.values.resize(n);
    for (std::size_t t = 0; t < n; ++t)
      report.residuals.values[t] =
          filt.errors[t] / std::sqrt(filt.variances[t]);
    const double s2 = model.noise_variance;
    report.loglik = -0.5 * (n_d * std::log(2.0 * M_PI) + filt.sumlog +
                            n_d * std::log(s2) + filt.ssq / s2);
    report.aicc = -2.0 * report.loglik +
                  2.0 * k * n_d / (n_d - static_cast<double>(k) - 1.0);
    report.converged = converged;
    report.iterations = iterations;
    return report;
  };

  if (p == 0 && q == 0) {
    ArmaModel model;
    model.mean = opts.include_mean ? y_mean : opts.fixed_mean;
    double s2 = 0.0;
    for (double v : series.values) s2 += (v - model.mean) * (v - model.mean);
    s2 /= n_d;
    if (!(s2 > 0.0)) throw DegenerateSeries("fit: zero innovation variance");
    model.noise_variance = s2;
    return finalize(model, true, 0);
  }

  // Coordinates: p+q reflection coefficients (pre-tanh) and, when estimated,
  // the mean standardized by the sample deviation so all axes are O(1).
  const int dim = p + q + (opts.include_mean ? 1 : 0);
  const auto decode_mean = [&](const Eigen::VectorXd& x) {
    return opts.include_mean ? y_mean + x(p + q) * y_sd : opts.fixed_mean;
  };
  const auto objective = [&](const Eigen::VectorXd& x) -> double {
    auto [ar, ma] = detail::decode_coefficients(x, p, q);
    const auto filt = detail::kalman_innovations(
        detail::center_values(series, decode_mean(x)), ar, ma);
    if (!(filt.ssq > 0.0) || !std::isfinite(filt.ssq) ||
        !std::isfinite(filt.sumlog))
      return 1e10;
    return 0.5 * (n_d * std::log(filt.ssq / n_d) + filt.sumlog);
  };

  constexpr int kMaxIterations = 2000;
  constexpr double kDiameterTol = 1e-8;
  const double starts[5][2] = {
      {0.0, 0.0}, {0.5, 0.0}, {-0.5, 0.0}, {0.0, 0.5}, {0.0, -0.5}};
  detail::SimplexResult best;
  int total_iterations = 0;
  for (const auto& s : starts) {
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < p; ++i) x0(i) = s[0];
    for (int j = 0; j < q; ++j) x0(p + j) = s[1];
    auto run = detail::nelder_mead(objective, x0, 0.25, kMaxIterations,
                                   kDiameterTol);
    total_iterations += run.iterations;
    if (run.value < best.value ||
        (run.value == best.value && run.converged && !best.converged))
      best = run;
  }

  auto [ar, ma] = detail::decode_coefficients(best.x, p, q);
  ArmaModel model;
  model.ar = std::move(ar);
  model.ma = std::move(ma);
  model.mean = decode_mean(best.x);
  const auto filt = detail::kalman_innovations(
      detail::center_values(series, model.mean), model.ar, model.ma);
  model.noise_variance = filt.ssq / n_d;
  if (!(model.noise_variance > 0.0))
    throw DegenerateSeries("fit: zero innovation variance");
  return finalize(model, best.converged, total_iterations);
}

/// Fits every (p,q) on the grid and keeps the smallest AICc; ties go to
/// smaller p+q, then smaller p. Cells whose fit fails are skipped.
inline std::tuple<int, int, FitReport> select_order(const TimeSeries& series,
                                                    int p_max, int q_max) {
  if (p_max < 0 || p_max > 5 || q_max < 0 || q_max > 5)
    throw InvalidArgument("select_order: p_max and q_max must be in 0..5");

  bool found = false;
  std::tuple<double, int, int> best_key;
  int best_p = 0, best_q = 0;
  FitReport best_report;
  std::string first_failure;
  for (int p = 0; p <= p_max; ++p) {
    for (int q = 0; q <= q_max; ++q) {
      FitReport report;
      try {
        report = fit(series, p, q);
      } catch (const Error& e) {
        if (first_failure.empty()) first_failure = e.what();
        continue;
      }
      const std::tuple<double, int, int> key{report.aicc, p + q, p};
      if (!found || key < best_key) {
        found = true;
        best_key = key;
        best_p = p;
        best_q = q;
        best_report = std::move(report);
      }
    }
  }
  if (!found)
    throw NoModel("select_order: no (p,q) cell produced a fit" +
                  (first_failure.empty() ? "" : " (" + first_failure + ")"));
  return {best_p, best_q, std::move(best_report)};
}

/// One-step innovations of `model` applied to `series`, rescaled to the data
/// scale (e_t/√v_t). The filter is linear in the input series.
inline TimeSeries whiten_with_model(const TimeSeries& series,
                                    const ArmaModel& model) {
  detail::validate_model(model, /*require_invertible=*/true);
  if (!series.complete())
    throw UnsupportedInput("whiten: missing values are not supported");
  const auto filt = detail::kalman_innovations(
      detail::center_values(series, model.mean), model.ar, model.ma);
  TimeSeries out;
  out.start_time = series.start_time;
  out.values.resize(series.size());
  for (std::size_t t = 0; t < series.size(); ++t)
    out.values[t] = filt.errors[t] / std::sqrt(filt.variances[t]);
  return out;
}

/// Residual series û_t for the fitted model. The report must have been
/// produced from this series.
inline TimeSeries whiten(const TimeSeries& series, const FitReport& report) {
  if (series.size() != report.residuals.size() ||
      series.start_time != report.residuals.start_time)
    throw InvalidArgument("whiten: report does not match the series");
  return whiten_with_model(series, report.model);
}

struct ResidualDiagnostics {
  std::vector<int> outlier_times;
  std::vector<double> outlier_scores;  // robust z-scores of the flagged times
  double variance_ratio = 0.0;         // last third vs first two thirds
  double variance_p_value = 1.0;
  int split_time = 0;                  // first time of the final third
};

/// Flags |robust z| > 3 outliers (median/MAD scale) and tests for a variance
/// change between the first two thirds and the final third of the series.
inline ResidualDiagnostics residual_diagnostics(const TimeSeries& residuals) {
  if (!residuals.complete())
    throw UnsupportedInput("residual_diagnostics: missing values");
  const std::size_t n = residuals.size();
  if (n < 30)
    throw InvalidArgument("residual_diagnostics: need at least 30 residuals");

  std::vector<double> sorted(residuals.values);
  std::sort(sorted.begin(), sorted.end());
  const auto median_of = [](const std::vector<double>& v) {
    const std::size_t m = v.size();
    return (m % 2 == 1) ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
  };
  const double med = median_of(sorted);
  std::vector<double> abs_dev(n);
  for (std::size_t i = 0; i < n; ++i)
    abs_dev[i] = std::abs(residuals.values[i] - med);
  std::sort(abs_dev.begin(), abs_dev.end());
  const double scale =
      std::max(1.4826 * median_of(abs_dev), std::numeric_limits<double>::min());

  ResidualDiagnostics diag;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = (residuals.values[i] - med) / scale;
    if (std::abs(z) > 3.0) {
      diag.outlier_times.push_back(residuals.time_at(i));
      diag.outlier_scores.push_back(z);
    }
  }

  const std::size_t n2 = n / 3;
  const std::size_t n1 = n - n2;
  const auto sample_var = [&](std::size_t begin, std::size_t end) {
    double m = 0.0;
    for (std::size_t i = begin; i < end; ++i) m += residuals.values[i];
    m /= static_cast<double>(end - begin);
    double ss = 0.0;
    for (std::size_t i = begin; i < end; ++i)
      ss += (residuals.values[i] - m) * (residuals.values[i] - m);
    return ss / static_cast<double>(end - begin - 1);
  };
  const double var_head = sample_var(0, n1);
  const double var_tail = sample_var(n1, n);
  diag.split_time = residuals.time_at(n1);
  if (var_head > 0.0) {
    diag.variance_ratio = var_tail / var_head;
    const boost::math::fisher_f f(static_cast<double>(n2 - 1),
                                  static_cast<double>(n1 - 1));
    const double cdf = boost::math::cdf(f, diag.variance_ratio);
    diag.variance_p_value = std::min(1.0, 2.0 * std::min(cdf, 1.0 - cdf));
  } else {
    diag.variance_ratio = std::numeric_limits<double>::infinity();
    diag.variance_p_value = 0.0;
  }
  return diag;
}

struct LjungBoxResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int lags = 0;
  int fit_df = 0;
};

/// Portmanteau whiteness statistic Q = n(n+2) Σ ρ̂_k²/(n−k), referred to
/// χ²(lags − fit_df).
inline LjungBoxResult ljung_box(const TimeSeries& series, int lags,
                                int fit_df = 0) {
  if (lags < 1) throw InvalidArgument("ljung_box: need at least one lag");
  if (fit_df < 0 || fit_df >= lags)
    throw InvalidArgument("ljung_box: fit_df must be in [0, lags)");
  const auto acf = sample_acf(series, lags);
  const double n = static_cast<double>(acf.n);
  double q = 0.0;
  for (int k = 1; k <= lags; ++k)
    q += acf.at(k) * acf.at(k) / (n - static_cast<double>(k));
  q *= n * (n + 2.0);

  LjungBoxResult result;
  result.statistic = q;
  result.lags = lags;
  result.fit_df = fit_df;
  const boost::math::chi_squared chi(static_cast<double>(lags - fit_df));
  result.p_value = boost::math::cdf(boost::math::complement(chi, q));
  return result;
}

}  // namespace tsdiag
