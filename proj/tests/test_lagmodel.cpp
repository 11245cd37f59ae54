#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "tsdiag/arma.hpp"
#include "tsdiag/lagmodel.hpp"
#include "tsdiag/rng.hpp"
#include "tsdiag/series.hpp"

using tsdiag::HoldoutBlock;
using tsdiag::LagSpec;
using tsdiag::Regressor;
using tsdiag::TimeSeries;

namespace {

TimeSeries gaussian_series(std::size_t n, std::uint64_t seed, int start = 0) {
  tsdiag::NormalSampler rng(seed);
  TimeSeries s;
  s.start_time = start;
  s.values = rng.draw(n);
  return s;
}

// y_t = intercept + slope * x_{t-3} + noise_sd * e_t on x's time axis.
struct Lag3System {
  TimeSeries x;
  TimeSeries y;
};

Lag3System lag3_system(std::size_t n, double slope, double noise_sd,
                       std::uint64_t seed, double intercept = 0.0) {
  tsdiag::NormalSampler rng(seed);
  Lag3System sys;
  sys.x.start_time = 0;
  sys.x.values = rng.draw(n);
  sys.y.start_time = 3;
  for (std::size_t t = 3; t < n; ++t)
    sys.y.values.push_back(intercept + slope * sys.x.values[t - 3] +
                           noise_sd * rng.next());
  return sys;
}

}  // namespace

TEST_CASE("lag_scan ranks a shifted copy at the true offset") {
  const auto sys = lag3_system(500, 1.0, 0.1, 5);
  const auto scan = tsdiag::lag_scan(sys.y, sys.x, 10, false);
  REQUIRE(scan.size() == 21);
  REQUIRE(scan[0].offset == 3);
  REQUIRE(scan[0].significant);
  REQUIRE(scan[0].correlation > 0.9);
}

TEST_CASE("lag_scan flags nothing on independent series") {
  int clean = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto x = gaussian_series(150, 3000 + 2 * seed);
    const auto y = gaussian_series(150, 3001 + 2 * seed);
    const auto scan = tsdiag::lag_scan(y, x, 20, false);
    bool any = false;
    for (const auto& e : scan) any = any || e.significant;
    if (!any) ++clean;
  }
  REQUIRE(clean >= 180);
}

TEST_CASE("lag_scan ordering mirrors significant_lags") {
  const auto sys = lag3_system(400, 1.0, 0.5, 9);
  const auto scan = tsdiag::lag_scan(sys.y, sys.x, 8, false);
  const auto ccf = tsdiag::cross_correlation(sys.x, sys.y, 8);
  const auto sig = tsdiag::significant_lags(ccf);
  // The per-lag-significant prefix appears in the same order at the top of
  // the scan whenever it clears the scan-wide band too.
  REQUIRE(scan[0].offset == sig[0].first);
  REQUIRE(scan[0].correlation == Catch::Approx(sig[0].second));

  REQUIRE_THROWS_AS(tsdiag::lag_scan(sys.y, sys.x, 390, false),
                    tsdiag::InvalidArgument);
}

TEST_CASE("white-error transfer fit equals ordinary least squares") {
  const auto sys = lag3_system(1000, 2.0, 1.0, 11);
  const auto model =
      tsdiag::fit_transfer(sys.y, {{sys.x, {"x", {-3}}}}, 0, 0);
  REQUIRE(model.coefficients.size() == 1);
  REQUIRE(model.coefficients[0].covariate == "x");
  REQUIRE(model.coefficients[0].offset == -3);
  REQUIRE(model.coefficients[0].estimate == Catch::Approx(2.0).margin(0.1));
  REQUIRE(model.noise.noise_variance == Catch::Approx(1.0).margin(0.1));
  REQUIRE(model.converged);

  // Closed-form check on the same fit window.
  const std::size_t n = sys.y.size();
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(static_cast<Eigen::Index>(i), 0) = 1.0;
    x(static_cast<Eigen::Index>(i), 1) = sys.x.values[i];
    y(static_cast<Eigen::Index>(i)) = sys.y.values[i];
  }
  const Eigen::VectorXd beta = oracles::ols(x, y);
  REQUIRE(model.intercept == Catch::Approx(beta(0)).margin(1e-8));
  REQUIRE(model.coefficients[0].estimate ==
          Catch::Approx(beta(1)).margin(1e-8));
}

TEST_CASE("the lagged signal is invisible contemporaneously") {
  const auto sys = lag3_system(1000, 2.0, 1.0, 13);
  const auto model = tsdiag::fit_transfer(sys.y, {{sys.x, {"x", {0}}}}, 0, 0);
  REQUIRE(std::abs(model.coefficients[0].estimate) < 0.2);
  double var_y = 0.0, mean_y = 0.0;
  for (double v : sys.y.values) mean_y += v;
  mean_y /= static_cast<double>(sys.y.size());
  for (double v : sys.y.values) var_y += (v - mean_y) * (v - mean_y);
  var_y /= static_cast<double>(sys.y.size());
  double var_r = 0.0;
  for (double v : model.residuals.values) var_r += v * v;
  var_r /= static_cast<double>(model.residuals.size());
  const double r2 = 1.0 - var_r / var_y;
  REQUIRE(r2 < 0.02);
}

TEST_CASE("transfer fit without covariates reduces to an ARMA fit") {
  tsdiag::ArmaModel truth;
  truth.ar = {0.6};
  truth.mean = 5.0;
  const auto y = tsdiag::simulate(truth, 500, 17);
  const auto transfer = tsdiag::fit_transfer(y, {}, 1, 0);
  const auto direct = tsdiag::fit(y, 1, 0);
  REQUIRE(transfer.coefficients.empty());
  REQUIRE(transfer.loglik == Catch::Approx(direct.loglik).margin(1e-6));
  REQUIRE(transfer.intercept ==
          Catch::Approx(direct.model.mean).margin(1e-3));
  REQUIRE(transfer.noise.ar[0] ==
          Catch::Approx(direct.model.ar[0]).margin(1e-3));
}

TEST_CASE("transfer fit recovers coefficients under AR(1) errors") {
  tsdiag::NormalSampler rng(19);
  TimeSeries x, y;
  x.start_time = 0;
  y.start_time = 3;
  x.values = rng.draw(800);
  double e = 0.0;
  for (std::size_t t = 3; t < 800; ++t) {
    e = 0.7 * e + rng.next();
    y.values.push_back(1.0 + 2.0 * x.values[t - 3] + e);
  }
  const auto model = tsdiag::fit_transfer(y, {{x, {"x", {-3}}}}, 1, 0);
  REQUIRE(model.coefficients[0].estimate == Catch::Approx(2.0).margin(0.1));
  REQUIRE(model.noise.ar[0] == Catch::Approx(0.7).margin(0.1));
  REQUIRE(model.intercept == Catch::Approx(1.0).margin(0.5));
  REQUIRE(model.converged);
  REQUIRE(model.rounds <= 50);
}

TEST_CASE("duplicate and dependent designs raise collinearity errors") {
  const auto sys = lag3_system(300, 1.0, 1.0, 23);
  try {
    tsdiag::fit_transfer(sys.y, {{sys.x, {"a", {0}}}, {sys.x, {"b", {0}}}}, 0,
                         0);
    FAIL("expected collinearity error");
  } catch (const tsdiag::CollinearityError& e) {
    REQUIRE(e.columns.size() == 2);
    REQUIRE(e.columns[0] == "a@t+0");
    REQUIRE(e.columns[1] == "b@t+0");
  }

  // x3 = x1 + x2 is dependent without being a bitwise duplicate.
  const auto x1 = gaussian_series(300, 24);
  const auto x2 = gaussian_series(300, 25);
  TimeSeries x3 = x1;
  for (std::size_t i = 0; i < 300; ++i) x3.values[i] += x2.values[i];
  auto y = gaussian_series(300, 26);
  REQUIRE_THROWS_AS(
      tsdiag::fit_transfer(
          y, {{x1, {"x1", {0}}}, {x2, {"x2", {0}}}, {x3, {"x3", {0}}}}, 0, 0),
      tsdiag::CollinearityError);

  REQUIRE_THROWS_AS(
      tsdiag::fit_transfer(y, {{x1, {"x1", {0, 0}}}}, 0, 0),
      tsdiag::InvalidArgument);
  REQUIRE_THROWS_AS(tsdiag::fit_transfer(y, {{x1, {"x1", {41}}}}, 0, 0),
                    tsdiag::InvalidArgument);
}

TEST_CASE("an all-zero covariate is pinned at zero without error") {
  const auto sys = lag3_system(500, 2.0, 1.0, 27);
  TimeSeries zeros;
  zeros.start_time = 0;
  zeros.values.assign(500, 0.0);

  const auto base = tsdiag::fit_transfer(sys.y, {{sys.x, {"x", {-3}}}}, 0, 0);
  const auto padded = tsdiag::fit_transfer(
      sys.y, {{sys.x, {"x", {-3}}}, {zeros, {"z", {0}}}}, 0, 0);
  REQUIRE(padded.coefficients.size() == 2);
  REQUIRE(padded.coefficients[1].estimate == 0.0);

  const auto pb = tsdiag::predict(base, {{sys.x, {"x", {-3}}}}, 100, 10);
  const auto pp = tsdiag::predict(
      padded, {{sys.x, {"x", {-3}}}, {zeros, {"z", {0}}}}, 100, 10);
  for (std::size_t i = 0; i < 10; ++i)
    REQUIRE(pp.mean.values[i] == Catch::Approx(pb.mean.values[i]).margin(1e-8));

  // The same zero covariate twice is a duplicated column.
  REQUIRE_THROWS_AS(
      tsdiag::fit_transfer(
          sys.y, {{sys.x, {"x", {-3}}}, {zeros, {"z1", {0}}},
                  {zeros, {"z2", {0}}}},
          0, 0),
      tsdiag::CollinearityError);
}

TEST_CASE("white-error predictions are the linear mean with flat bands") {
  const auto sys = lag3_system(1000, 2.0, 1.0, 29);
  const auto model = tsdiag::fit_transfer(sys.y, {{sys.x, {"x", {-3}}}}, 0, 0);
  const auto pred =
      tsdiag::predict(model, {{sys.x, {"x", {-3}}}}, 200, 50);
  const double sigma = std::sqrt(model.noise.noise_variance);
  for (std::size_t i = 0; i < 50; ++i) {
    const int t = 200 + static_cast<int>(i);
    const double expect =
        model.intercept +
        model.coefficients[0].estimate *
            sys.x.values[static_cast<std::size_t>(t - 3)];
    REQUIRE(pred.mean.values[i] == Catch::Approx(expect).margin(1e-10));
    REQUIRE(pred.std_error.values[i] == Catch::Approx(sigma).epsilon(0.01));
  }
}

TEST_CASE("predict reproduces fitted values on the training window") {
  const auto sys = lag3_system(400, 1.5, 0.8, 31);
  const auto model = tsdiag::fit_transfer(sys.y, {{sys.x, {"x", {-3}}}}, 1, 0);
  const auto pred = tsdiag::predict(model, {{sys.x, {"x", {-3}}}},
                                    model.fit_start, sys.y.size());
  for (std::size_t i = 0; i < sys.y.size(); ++i)
    REQUIRE(sys.y.values[i] - model.residuals.values[i] ==
            Catch::Approx(pred.mean.values[i]).margin(1e-8));
}

TEST_CASE("one step beyond the window the AR(1) error forecast applies") {
  tsdiag::NormalSampler rng(33);
  TimeSeries y;
  y.start_time = 0;
  double e = 0.0;
  for (int t = 0; t < 400; ++t) {
    e = 0.6 * e + rng.next();
    y.values.push_back(3.0 + e);
  }
  const auto model = tsdiag::fit_transfer(y, {}, 1, 0);
  const auto pred = tsdiag::predict(model, {}, 400, 1);
  const double phi = model.noise.ar[0];
  const double last = model.residuals.values.back();
  REQUIRE(pred.mean.values[0] ==
          Catch::Approx(model.intercept + phi * last).margin(1e-9));
  REQUIRE(pred.std_error.values[0] >=
          std::sqrt(model.noise.noise_variance) * 0.99);
}

TEST_CASE("prediction bands are calibrated on a holdout stretch") {
  int covered = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    tsdiag::NormalSampler rng(7000 + seed);
    TimeSeries x, y;
    x.start_time = 0;
    y.start_time = 3;
    x.values = rng.draw(500);
    double e = 0.0;
    std::vector<double> all_y;
    for (std::size_t t = 3; t < 500; ++t) {
      e = 0.5 * e + rng.next();
      all_y.push_back(1.0 + 2.0 * x.values[t - 3] + e);
    }
    TimeSeries train = y;
    train.values.assign(all_y.begin(), all_y.end() - 50);
    const auto model =
        tsdiag::fit_transfer(train, {{x, {"x", {-3}}}}, 1, 0);
    const auto pred = tsdiag::predict(model, {{x, {"x", {-3}}}},
                                      train.end_time() + 1, 50);
    for (std::size_t i = 0; i < 50; ++i) {
      const double truth = all_y[all_y.size() - 50 + i];
      if (std::abs(truth - pred.mean.values[i]) <=
          1.96 * pred.std_error.values[i])
        ++covered;
      ++total;
    }
  }
  const double coverage = static_cast<double>(covered) / total;
  REQUIRE(coverage >= 0.90);
  REQUIRE(coverage <= 0.99);
}

TEST_CASE("predict demands covariate coverage") {
  const auto sys = lag3_system(200, 1.0, 1.0, 37);
  const auto model = tsdiag::fit_transfer(sys.y, {{sys.x, {"x", {-3}}}}, 0, 0);
  try {
    tsdiag::predict(model, {{sys.x, {"x", {-3}}}}, 200, 5);
    FAIL("expected coverage error");
  } catch (const tsdiag::CoverageError& e) {
    REQUIRE(e.time == 203);
    REQUIRE(e.offset == -3);
  }
  REQUIRE_THROWS_AS(tsdiag::predict(model, {}, 50, 5), tsdiag::CoverageError);
}

TEST_CASE("holdout with a perfect builder scores zero") {
  const auto y = gaussian_series(200, 41);
  const auto oracle = [&y](const TimeSeries&, const HoldoutBlock& block) {
    std::vector<double> out;
    for (int i = 0; i < block.length; ++i)
      out.push_back(
          y.values[static_cast<std::size_t>(block.start_time - y.start_time +
                                            i)]);
    return out;
  };
  const auto report =
      tsdiag::holdout_eval(y, oracle, {{20, 30}, {100, 50}});
  REQUIRE(report.block_rmse.size() == 2);
  REQUIRE(report.block_rmse[0] == 0.0);
  REQUIRE(report.block_rmse[1] == 0.0);
  REQUIRE(report.pooled_rmse == 0.0);
}

TEST_CASE("mean builder scores near the noise scale") {
  const auto y = gaussian_series(300, 43);
  const auto report =
      tsdiag::holdout_eval(y, tsdiag::mean_builder(), {{100, 50}});
  REQUIRE(report.pooled_rmse == Catch::Approx(1.0).epsilon(0.1));
}

TEST_CASE("lagged information beats contemporaneous in held-out skill") {
  int lagged_wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto sys = lag3_system(500, 2.0, 1.0, 9000 + seed);
    const std::vector<HoldoutBlock> blocks = {{250, 50}};
    const auto lagged = tsdiag::holdout_eval(
        sys.y, tsdiag::transfer_builder({{sys.x, {"x", {-3}}}}, 0, 0), blocks);
    const auto contemp = tsdiag::holdout_eval(
        sys.y, tsdiag::transfer_builder({{sys.x, {"x", {0}}}}, 0, 0), blocks);
    if (lagged.pooled_rmse < contemp.pooled_rmse) ++lagged_wins;
  }
  REQUIRE(lagged_wins >= 95);
}

TEST_CASE("holdout block validation") {
  const auto y = gaussian_series(100, 47);
  const auto builder = tsdiag::mean_builder();
  REQUIRE_THROWS_AS(tsdiag::holdout_eval(y, builder, {}),
                    tsdiag::InvalidArgument);
  REQUIRE_THROWS_AS(tsdiag::holdout_eval(y, builder, {{10, 4}}),
                    tsdiag::InvalidArgument);
  REQUIRE_THROWS_AS(tsdiag::holdout_eval(y, builder, {{95, 10}}),
                    tsdiag::InvalidArgument);
  REQUIRE_THROWS_AS(tsdiag::holdout_eval(y, builder, {{10, 20}, {25, 10}}),
                    tsdiag::InvalidArgument);
}
