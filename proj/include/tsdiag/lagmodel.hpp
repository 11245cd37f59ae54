#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "tsdiag/arma.hpp"
#include "tsdiag/ccf.hpp"
#include "tsdiag/errors.hpp"
#include "tsdiag/series.hpp"

namespace tsdiag {

/// Offsets are stored as "response_t regressed on covariate_{t+offset}":
/// a negative offset means the covariate value comes from the past.
struct LagSpec {
  std::string covariate;
  std::vector<int> offsets;
};

struct Regressor {
  TimeSeries series;
  LagSpec spec;
};

struct TransferCoefficient {
  std::string covariate;
  int offset = 0;
  double estimate = 0.0;
  double std_error = 0.0;
};

struct TransferModel {
  double intercept = 0.0;
  double intercept_std_error = 0.0;
  std::vector<TransferCoefficient> coefficients;
  Eigen::MatrixXd coef_cov;  // (1 + #coefficients)^2, intercept first
  ArmaModel noise;           // zero-mean error model
  int fit_start = 0;
  int fit_end = 0;
  TimeSeries residuals;      // y - Xbeta on the fit window
  double loglik = 0.0;
  bool converged = false;
  int rounds = 0;

  std::string equation() const {
    std::string eq = "response_t = intercept";
    for (const auto& c : coefficients) {
      eq += " + b(" + c.covariate + (c.offset >= 0 ? "@t+" : "@t-") +
            std::to_string(std::abs(c.offset)) + ")*" + c.covariate + "_{t" +
            (c.offset >= 0 ? "+" : "-") + std::to_string(std::abs(c.offset)) +
            "}";
    }
    return eq + " + e_t";
  }
};

struct LagScanEntry {
  int offset = 0;
  double correlation = 0.0;
  bool significant = false;
};

/// CCF-based lag ranking between a response and one covariate. Offsets are
/// CCF lags (positive = covariate leads the response); significant entries
/// come first, in significant_lags order, followed by the insignificant
/// lags ranked the same way. A scan inspects every lag at once, so the
/// significance flag uses the Bonferroni-adjusted band for the whole scan
/// rather than the per-lag 1.96/√n band.
inline std::vector<LagScanEntry> lag_scan(const TimeSeries& y,
                                          const TimeSeries& x, int max_lag,
                                          bool prewhiten) {
  {
    const int t0 = std::max(x.start_time, y.start_time);
    const int t1 = std::min(x.end_time(), y.end_time());
    if (static_cast<long>(t1) - t0 + 1 - max_lag < 20)
      throw InvalidArgument("lag_scan: insufficient overlap");
  }
  const CcfResult ccf = prewhiten ? prewhitened_ccf(x, y, max_lag, 2, 1)
                                  : cross_correlation(x, y, max_lag);
  const double scans = static_cast<double>(ccf.lags.size());
  const boost::math::normal_distribution<double> gauss;
  const double scan_bound =
      boost::math::quantile(gauss, 1.0 - 0.025 / scans) /
      std::sqrt(static_cast<double>(ccf.n));
  std::vector<LagScanEntry> out;
  for (std::size_t i = 0; i < ccf.lags.size(); ++i)
    out.push_back({ccf.lags[i], ccf.correlations[i],
                   std::abs(ccf.correlations[i]) > scan_bound});
  std::stable_sort(out.begin(), out.end(),
                   [](const LagScanEntry& a, const LagScanEntry& b) {
                     if (a.significant != b.significant) return a.significant;
                     const double ca = std::abs(a.correlation);
                     const double cb = std::abs(b.correlation);
                     if (ca != cb) return ca > cb;
                     if (std::abs(a.offset) != std::abs(b.offset))
                       return std::abs(a.offset) < std::abs(b.offset);
                     return a.offset < b.offset;
                   });
  return out;
}

namespace detail {

struct DesignColumn {
  std::string covariate;  // empty for the intercept
  int offset = 0;
  std::string name() const {
    return covariate.empty()
               ? "intercept"
               : covariate + "@t" + (offset >= 0 ? "+" : "") +
                     std::to_string(offset);
  }
};

// Innovations filter as a linear map (model mean ignored): the GLS transform.
inline std::vector<double> whiten_vector(const std::vector<double>& values,
                                         const ArmaModel& model) {
  const auto filt = kalman_innovations(values, model.ar, model.ma);
  std::vector<double> out(values.size());
  for (std::size_t t = 0; t < values.size(); ++t)
    out[t] = filt.errors[t] / std::sqrt(filt.variances[t]);
  return out;
}

}  // namespace detail

/// Lagged regression with ARMA(p,q) errors, estimated by alternating exact
/// GLS for the coefficients with exact-likelihood fitting of the error model
/// on the current residuals.
inline TransferModel fit_transfer(const TimeSeries& y,
                                  const std::vector<Regressor>& covariates,
                                  int error_p, int error_q) {
  // Fit window: response times where every lagged regressor is available.
  int t0 = y.start_time;
  int t1 = y.end_time();
  if (y.values.empty()) throw EmptySeries("fit_transfer: empty response");
  std::set<std::pair<std::string, int>> seen;
  for (const auto& reg : covariates) {
    if (reg.spec.offsets.empty())
      throw InvalidArgument("fit_transfer: covariate \"" + reg.spec.covariate +
                            "\" has no offsets");
    for (int off : reg.spec.offsets) {
      if (std::abs(off) > 40)
        throw InvalidArgument("fit_transfer: |offset| must be <= 40");
      if (!seen.insert({reg.spec.covariate, off}).second)
        throw InvalidArgument("fit_transfer: duplicate offset for \"" +
                              reg.spec.covariate + "\"");
      t0 = std::max(t0, reg.series.start_time - off);
      t1 = std::min(t1, reg.series.end_time() - off);
    }
  }
  const long window = static_cast<long>(t1) - t0 + 1;
  std::size_t n_coef = 0;
  for (const auto& reg : covariates) n_coef += reg.spec.offsets.size();
  if (window < 20 || static_cast<long>(n_coef) > window / 10)
    throw InvalidArgument(
        "fit_transfer: fit window too short for the coefficient count");
  const std::size_t n = static_cast<std::size_t>(window);

  std::vector<detail::DesignColumn> columns;
  columns.push_back({});
  Eigen::MatrixXd x(n, 1 + n_coef);
  Eigen::VectorXd yv(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int t = t0 + static_cast<int>(i);
    const double v = y.values[static_cast<std::size_t>(t - y.start_time)];
    if (is_missing(v))
      throw UnsupportedInput("fit_transfer: missing response value in window");
    yv(static_cast<Eigen::Index>(i)) = v;
    x(static_cast<Eigen::Index>(i), 0) = 1.0;
  }
  {
    Eigen::Index col = 1;
    for (const auto& reg : covariates) {
      for (int off : reg.spec.offsets) {
        columns.push_back({reg.spec.covariate, off});
        for (std::size_t i = 0; i < n; ++i) {
          const int t = t0 + static_cast<int>(i) + off;
          const double v =
              reg.series.values[static_cast<std::size_t>(t -
                                                         reg.series.start_time)];
          if (is_missing(v))
            throw UnsupportedInput("fit_transfer: missing covariate \"" +
                                   reg.spec.covariate + "\" in window");
          x(static_cast<Eigen::Index>(i), col) = v;
        }
        ++col;
      }
    }
  }

  // Bitwise-identical columns are flagged; a lone all-zero column is merely
  // uninformative and is pinned at coefficient zero instead.
  const Eigen::Index total_cols = x.cols();
  const auto collinear = [](std::vector<std::string> names) {
    std::string msg = "collinear design columns:";
    for (const auto& name : names) msg += " " + name;
    return CollinearityError(msg, std::move(names));
  };
  for (Eigen::Index a = 0; a < total_cols; ++a)
    for (Eigen::Index b = a + 1; b < total_cols; ++b)
      if (x.col(a) == x.col(b))
        throw collinear({columns[static_cast<std::size_t>(a)].name(),
                         columns[static_cast<std::size_t>(b)].name()});
  std::vector<Eigen::Index> active;
  for (Eigen::Index c = 0; c < total_cols; ++c)
    if (x.col(c).cwiseAbs().maxCoeff() > 0.0) active.push_back(c);
  Eigen::MatrixXd xa(n, static_cast<Eigen::Index>(active.size()));
  for (std::size_t c = 0; c < active.size(); ++c)
    xa.col(static_cast<Eigen::Index>(c)) = x.col(active[c]);
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xa);
    if (qr.rank() < xa.cols()) {
      std::vector<std::string> dependent;
      const auto perm = qr.colsPermutation().indices();
      for (Eigen::Index k = qr.rank(); k < xa.cols(); ++k)
        dependent.push_back(
            columns[static_cast<std::size_t>(active[static_cast<std::size_t>(
                        perm(k))])]
                .name());
      std::sort(dependent.begin(), dependent.end());
      throw collinear(std::move(dependent));
    }
  }

  // Alternate: (a) error model on current residuals, (b) GLS through the
  // error model's whitening filter.
  Eigen::VectorXd beta = xa.colPivHouseholderQr().solve(yv);
  ArmaModel noise;
  Eigen::MatrixXd xw = xa;
  double prev_ll = -std::numeric_limits<double>::infinity();
  double loglik = 0.0;
  bool converged = false;
  int rounds = 0;
  FitReport noise_report;
  constexpr int kMaxRounds = 50;
  for (; rounds < kMaxRounds; ++rounds) {
    TimeSeries resid;
    resid.start_time = t0;
    const Eigen::VectorXd r = yv - xa * beta;
    resid.values.assign(r.data(), r.data() + r.size());
    noise_report = fit(resid, error_p, error_q,
                       {.include_mean = false, .fixed_mean = 0.0});
    noise = noise_report.model;
    loglik = noise_report.loglik;
    if (std::abs(loglik - prev_ll) <=
        1e-10 * std::max(1.0, std::abs(loglik))) {
      converged = noise_report.converged;
      ++rounds;
      break;
    }
    prev_ll = loglik;

    std::vector<double> col(n);
    for (Eigen::Index c = 0; c < xa.cols(); ++c) {
      Eigen::VectorXd::Map(col.data(), static_cast<Eigen::Index>(n)) =
          xa.col(c);
      const auto w = detail::whiten_vector(col, noise);
      for (std::size_t i = 0; i < n; ++i)
        xw(static_cast<Eigen::Index>(i), c) = w[i];
    }
    std::vector<double> yvec(yv.data(), yv.data() + yv.size());
    const auto yw = detail::whiten_vector(yvec, noise);
    Eigen::VectorXd ywv(n);
    for (std::size_t i = 0; i < n; ++i) ywv(static_cast<Eigen::Index>(i)) = yw[i];
    beta = xw.colPivHouseholderQr().solve(ywv);
  }

  const Eigen::MatrixXd xtx_inv =
      (xw.transpose() * xw).ldlt().solve(Eigen::MatrixXd::Identity(
          xw.cols(), xw.cols()));

  TransferModel model;
  model.noise = noise;
  model.fit_start = t0;
  model.fit_end = t1;
  model.loglik = loglik;
  model.converged = converged;
  model.rounds = rounds;
  model.residuals.start_time = t0;
  const Eigen::VectorXd r = yv - xa * beta;
  model.residuals.values.assign(r.data(), r.data() + r.size());

  std::vector<double> estimates(static_cast<std::size_t>(total_cols), 0.0);
  model.coef_cov = Eigen::MatrixXd::Zero(total_cols, total_cols);
  for (std::size_t a = 0; a < active.size(); ++a) {
    estimates[static_cast<std::size_t>(active[a])] =
        beta(static_cast<Eigen::Index>(a));
    for (std::size_t b = 0; b < active.size(); ++b)
      model.coef_cov(active[a], active[b]) =
          noise.noise_variance * xtx_inv(static_cast<Eigen::Index>(a),
                                         static_cast<Eigen::Index>(b));
  }
  model.intercept = estimates[0];
  model.intercept_std_error = std::sqrt(model.coef_cov(0, 0));
  for (std::size_t c = 1; c < static_cast<std::size_t>(total_cols); ++c)
    model.coefficients.push_back(
        {columns[c].covariate, columns[c].offset, estimates[c],
         std::sqrt(model.coef_cov(static_cast<Eigen::Index>(c),
                                  static_cast<Eigen::Index>(c)))});
  return model;
}

struct PredictionResult {
  TimeSeries mean;
  TimeSeries std_error;
};

/// Conditional mean Xβ on [start_time, start_time + length), with the ARMA
/// error forecast continued past the fit window. Standard errors combine the
/// coefficient covariance with the error-process variance at each horizon.
inline PredictionResult predict(const TransferModel& model,
                                const std::vector<Regressor>& covariates,
                                int start_time, std::size_t length) {
  if (length == 0) throw InvalidArgument("predict: empty target window");
  const auto lookup = [&](const std::string& name, int time,
                          int offset) -> double {
    const auto fail = [&]() -> CoverageError {
      return CoverageError("predict: covariate " + name + " has no value at " +
                               std::to_string(time + offset) +
                               " (time " + std::to_string(time) + ", offset " +
                               std::to_string(offset) + ")",
                           time, offset);
    };
    for (const auto& reg : covariates) {
      if (reg.spec.covariate != name) continue;
      const int t = time + offset;
      if (t < reg.series.start_time || t > reg.series.end_time()) throw fail();
      const double v =
          reg.series.values[static_cast<std::size_t>(t -
                                                     reg.series.start_time)];
      if (is_missing(v)) throw fail();
      return v;
    }
    throw fail();
  };

  const detail::StateSpace ss =
      detail::make_state_space(model.noise.ar, model.noise.ma);
  const double gamma0 = ss.stationary_cov(0, 0) * model.noise.noise_variance;

  detail::ForecastResult forecast;
  const long beyond =
      static_cast<long>(start_time) + static_cast<long>(length) - 1 -
      model.fit_end;
  if (beyond > 0)
    forecast = detail::kalman_forecast(model.residuals.values, model.noise.ar,
                                       model.noise.ma,
                                       static_cast<std::size_t>(beyond));

  PredictionResult out;
  out.mean.start_time = start_time;
  out.std_error.start_time = start_time;
  Eigen::VectorXd row(1 + static_cast<Eigen::Index>(model.coefficients.size()));
  for (std::size_t i = 0; i < length; ++i) {
    const int t = start_time + static_cast<int>(i);
    row(0) = 1.0;
    double mean = model.intercept;
    for (std::size_t c = 0; c < model.coefficients.size(); ++c) {
      const auto& coef = model.coefficients[c];
      const double v = lookup(coef.covariate, t, coef.offset);
      mean += coef.estimate * v;
      row(static_cast<Eigen::Index>(c) + 1) = v;
    }
    const double coef_var = row.dot(model.coef_cov * row);
    double err_mean = 0.0;
    double err_var = gamma0;
    if (t > model.fit_end) {
      const std::size_t h = static_cast<std::size_t>(t - model.fit_end) - 1;
      err_mean = forecast.mean[h];
      err_var = forecast.variance_rel[h] * model.noise.noise_variance;
    }
    out.mean.values.push_back(mean + err_mean);
    out.std_error.values.push_back(std::sqrt(coef_var + err_var));
  }
  return out;
}

struct HoldoutBlock {
  int start_time = 0;
  int length = 0;
};

struct HoldoutReport {
  std::vector<double> block_rmse;
  double pooled_rmse = 0.0;
};

/// A builder sees the response with the held-out block masked to missing and
/// returns predictions for every time in the block.
using ModelBuilder = std::function<std::vector<double>(
    const TimeSeries& masked, const HoldoutBlock& block)>;

inline HoldoutReport holdout_eval(const TimeSeries& y,
                                  const ModelBuilder& builder,
                                  const std::vector<HoldoutBlock>& blocks) {
  if (blocks.empty()) throw InvalidArgument("holdout_eval: no blocks");
  for (std::size_t a = 0; a < blocks.size(); ++a) {
    const auto& blk = blocks[a];
    if (blk.length < 5)
      throw InvalidArgument("holdout_eval: block length must be >= 5");
    if (blk.start_time < y.start_time ||
        blk.start_time + blk.length - 1 > y.end_time())
      throw InvalidArgument("holdout_eval: block exceeds the series range");
    for (std::size_t b = a + 1; b < blocks.size(); ++b) {
      const auto& other = blocks[b];
      if (blk.start_time <= other.start_time + other.length - 1 &&
          other.start_time <= blk.start_time + blk.length - 1)
        throw InvalidArgument("holdout_eval: blocks overlap");
    }
  }

  HoldoutReport report;
  double pooled_ss = 0.0;
  std::size_t pooled_n = 0;
  for (const auto& blk : blocks) {
    TimeSeries masked = y;
    for (int i = 0; i < blk.length; ++i) {
      const std::size_t idx =
          static_cast<std::size_t>(blk.start_time - y.start_time + i);
      if (is_missing(y.values[idx]))
        throw InvalidArgument("holdout_eval: block covers a missing value");
      masked.values[idx] = kMissing;
    }
    const auto preds = builder(masked, blk);
    if (preds.size() != static_cast<std::size_t>(blk.length))
      throw InvalidArgument("holdout_eval: builder returned a wrong-size block");
    double ss = 0.0;
    for (int i = 0; i < blk.length; ++i) {
      const double truth =
          y.values[static_cast<std::size_t>(blk.start_time - y.start_time + i)];
      const double d = preds[static_cast<std::size_t>(i)] - truth;
      ss += d * d;
    }
    report.block_rmse.push_back(std::sqrt(ss / blk.length));
    pooled_ss += ss;
    pooled_n += static_cast<std::size_t>(blk.length);
  }
  report.pooled_rmse = std::sqrt(pooled_ss / static_cast<double>(pooled_n));
  return report;
}

/// Predicts every block time at the mean of the unmasked observations.
inline ModelBuilder mean_builder() {
  return [](const TimeSeries& masked, const HoldoutBlock& block) {
    const auto stats = summary_stats(masked);
    return std::vector<double>(static_cast<std::size_t>(block.length),
                               stats.mean);
  };
}

/// Trains a transfer model on the longest contiguous complete run of the
/// masked response, then predicts the block from the covariates.
inline ModelBuilder transfer_builder(std::vector<Regressor> regressors,
                                     int error_p, int error_q) {
  return [regressors = std::move(regressors), error_p, error_q](
             const TimeSeries& masked, const HoldoutBlock& block) {
    std::size_t best_begin = 0, best_len = 0, begin = 0, len = 0;
    for (std::size_t i = 0; i <= masked.size(); ++i) {
      if (i < masked.size() && !is_missing(masked.values[i])) {
        if (len == 0) begin = i;
        ++len;
        continue;
      }
      if (len > best_len) {
        best_len = len;
        best_begin = begin;
      }
      len = 0;
    }
    if (best_len == 0)
      throw DegenerateSeries("transfer_builder: nothing left to train on");
    TimeSeries train;
    train.start_time = masked.start_time + static_cast<int>(best_begin);
    train.values.assign(masked.values.begin() +
                            static_cast<std::ptrdiff_t>(best_begin),
                        masked.values.begin() +
                            static_cast<std::ptrdiff_t>(best_begin + best_len));
    const auto model = fit_transfer(train, regressors, error_p, error_q);
    const auto pred = predict(model, regressors, block.start_time,
                              static_cast<std::size_t>(block.length));
    return pred.mean.values;
  };
}

}  // namespace tsdiag
