#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tsdiag/arma.hpp"
#include "tsdiag/rng.hpp"
#include "tsdiag/series.hpp"

using tsdiag::ArmaModel;
using tsdiag::TimeSeries;

namespace {

TimeSeries gaussian_series(std::size_t n, std::uint64_t seed) {
  tsdiag::NormalSampler rng(seed);
  TimeSeries s;
  s.values = rng.draw(n);
  return s;
}

ArmaModel ar1(double phi, double mean = 0.0, double s2 = 1.0) {
  ArmaModel m;
  m.ar = {phi};
  m.mean = mean;
  m.noise_variance = s2;
  return m;
}

// Random causal+invertible model via bounded reflection coefficients.
ArmaModel random_model(std::mt19937_64& gen, int p, int q) {
  std::uniform_real_distribution<double> pacf(-0.85, 0.85);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> rho_ar(static_cast<std::size_t>(p));
  std::vector<double> rho_ma(static_cast<std::size_t>(q));
  for (auto& r : rho_ar) r = pacf(gen);
  for (auto& r : rho_ma) r = pacf(gen);
  ArmaModel m;
  m.ar = tsdiag::detail::pacf_to_ar(rho_ar);
  m.ma = tsdiag::detail::pacf_to_ar(rho_ma);
  for (auto& v : m.ma) v = -v;
  m.mean = 4.0 * (unif(gen) - 0.5);
  m.noise_variance = 0.25 + 2.0 * unif(gen);
  return m;
}

}  // namespace

TEST_CASE("simulate with p=q=0 reproduces the raw draw stream") {
  ArmaModel white;
  const auto y = tsdiag::simulate(white, 5, 123);
  tsdiag::NormalSampler rng(123);
  const auto raw = rng.draw(105);  // burn-in of max(p,q)+100 draws precedes
  for (std::size_t i = 0; i < 5; ++i) REQUIRE(y.values[i] == raw[100 + i]);
}

TEST_CASE("simulate AR(1) reaches the stationary variance") {
  const auto y = tsdiag::simulate(ar1(0.9), 50000, 7);
  const auto stats = tsdiag::summary_stats(y);
  REQUIRE(stats.variance == Catch::Approx(1.0 / (1.0 - 0.81)).epsilon(0.03));
}

TEST_CASE("simulate validates the model") {
  REQUIRE_THROWS_AS(tsdiag::simulate(ar1(1.01), 100, 0), tsdiag::InvalidModel);
  ArmaModel boundary;
  boundary.ma = {-1.0};
  REQUIRE_THROWS_AS(tsdiag::simulate(boundary, 100, 0), tsdiag::InvalidModel);
  REQUIRE_NOTHROW(
      tsdiag::simulate(boundary, 100, 0, {.allow_noninvertible = true}));
  ArmaModel bad_var;
  bad_var.noise_variance = 0.0;
  REQUIRE_THROWS_AS(tsdiag::simulate(bad_var, 100, 0), tsdiag::InvalidModel);
  REQUIRE_THROWS_AS(tsdiag::simulate(ar1(0.5), 0, 0), tsdiag::InvalidArgument);
}

TEST_CASE("log_likelihood of white noise at zero data") {
  ArmaModel white;
  TimeSeries zeros;
  zeros.values.assign(20, 0.0);
  REQUIRE(tsdiag::log_likelihood(white, zeros) ==
          Catch::Approx(-10.0 * std::log(2.0 * M_PI)).margin(1e-12));
}

TEST_CASE("log_likelihood with phi=0 equals the white-noise value") {
  const auto y = gaussian_series(80, 3);
  ArmaModel white;
  REQUIRE(tsdiag::log_likelihood(ar1(0.0), y) ==
          Catch::Approx(tsdiag::log_likelihood(white, y)).margin(1e-12));
}

TEST_CASE("log_likelihood matches the innovations algorithm on ARMA(2,1)") {
  std::mt19937_64 gen(2024);
  ArmaModel model = random_model(gen, 2, 1);
  const auto y = tsdiag::simulate(model, 100, 55);
  REQUIRE(tsdiag::log_likelihood(model, y) ==
          Catch::Approx(oracles::innovations_loglik(model, y)).margin(1e-8));
}

TEST_CASE("log_likelihood agrees with the innovations oracle on 50 pairs") {
  std::mt19937_64 gen(991);
  std::uniform_int_distribution<int> order(0, 3);
  std::uniform_int_distribution<std::size_t> len(20, 200);
  for (int trial = 0; trial < 50; ++trial) {
    const ArmaModel model = random_model(gen, order(gen), order(gen));
    const auto y =
        tsdiag::simulate(model, len(gen), 7000 + static_cast<unsigned>(trial));
    const double kalman = tsdiag::log_likelihood(model, y);
    const double innov = oracles::innovations_loglik(model, y);
    INFO("trial " << trial << " p=" << model.p() << " q=" << model.q());
    REQUIRE(kalman == Catch::Approx(innov).margin(1e-8));
  }
}

TEST_CASE("log_likelihood input validation") {
  ArmaModel white;
  TimeSeries empty;
  REQUIRE_THROWS_AS(tsdiag::log_likelihood(white, empty), tsdiag::EmptySeries);
  TimeSeries holey;
  holey.values = {1.0, tsdiag::kMissing, 2.0};
  REQUIRE_THROWS_AS(tsdiag::log_likelihood(white, holey),
                    tsdiag::UnsupportedInput);
  const auto y = gaussian_series(50, 1);
  REQUIRE_THROWS_AS(tsdiag::log_likelihood(ar1(1.5), y), tsdiag::InvalidModel);
}

TEST_CASE("fit with p=q=0 returns sample moments") {
  const auto y = gaussian_series(500, 21);
  const auto stats = tsdiag::summary_stats(y);
  const auto report = tsdiag::fit(y, 0, 0);
  REQUIRE(report.model.mean == Catch::Approx(stats.mean).margin(1e-8));
  REQUIRE(report.model.noise_variance ==
          Catch::Approx(stats.variance).margin(1e-8));
  REQUIRE(report.converged);
}

TEST_CASE("fit recovers an AR(1) coefficient") {
  const auto y = tsdiag::simulate(ar1(0.5, 2.0), 2000, 31);
  const auto report = tsdiag::fit(y, 1, 0);
  REQUIRE(report.model.ar[0] == Catch::Approx(0.5).margin(0.06));
  REQUIRE(report.model.mean == Catch::Approx(2.0).margin(0.2));
  REQUIRE(report.converged);
  REQUIRE(report.residuals.size() == y.size());
}

TEST_CASE("fit recovers an MA(1) coefficient") {
  ArmaModel model;
  model.ma = {-0.8};
  const auto y = tsdiag::simulate(model, 2000, 77);
  const auto report = tsdiag::fit(y, 0, 1);
  REQUIRE(report.model.ma[0] == Catch::Approx(-0.8).margin(0.05));
}

TEST_CASE("fit is scale-equivariant") {
  const auto y = tsdiag::simulate(ar1(0.6, 1.0), 1200, 13);
  TimeSeries z = y;
  const double a = 3.0, b = -40.0;
  for (auto& v : z.values) v = a * v + b;
  const auto ry = tsdiag::fit(y, 1, 1);
  const auto rz = tsdiag::fit(z, 1, 1);
  REQUIRE(rz.model.ar[0] == Catch::Approx(ry.model.ar[0]).margin(1e-4));
  REQUIRE(rz.model.ma[0] == Catch::Approx(ry.model.ma[0]).margin(1e-4));
  REQUIRE(rz.model.mean == Catch::Approx(a * ry.model.mean + b).margin(1e-3));
  REQUIRE(rz.model.noise_variance ==
          Catch::Approx(a * a * ry.model.noise_variance).epsilon(1e-4));
}

TEST_CASE("fit rejects bad input") {
  TimeSeries constant;
  constant.values.assign(100, 3.0);
  REQUIRE_THROWS_AS(tsdiag::fit(constant, 0, 0), tsdiag::DegenerateSeries);
  REQUIRE_THROWS_AS(tsdiag::fit(gaussian_series(15, 1), 1, 0),
                    tsdiag::InvalidArgument);
  REQUIRE_THROWS_AS(tsdiag::fit(gaussian_series(100, 1), -1, 0),
                    tsdiag::InvalidArgument);
  TimeSeries holey = gaussian_series(100, 2);
  holey.values[50] = tsdiag::kMissing;
  REQUIRE_THROWS_AS(tsdiag::fit(holey, 1, 0), tsdiag::UnsupportedInput);
}

TEST_CASE("fit aicc bookkeeping") {
  const auto y = gaussian_series(300, 41);
  const auto report = tsdiag::fit(y, 1, 1);
  const double n = 300.0, k = 1.0 + 1.0 + 2.0;
  REQUIRE(report.aicc ==
          Catch::Approx(-2.0 * report.loglik + 2.0 * k * n / (n - k - 1.0)));
  // The report's likelihood is reproducible from the fitted model.
  REQUIRE(report.loglik ==
          Catch::Approx(tsdiag::log_likelihood(report.model, y)).margin(1e-6));
}

TEST_CASE("true model beats coefficient perturbations on average") {
  ArmaModel truth;
  truth.ar = {0.5};
  truth.ma = {0.3};
  double gap_ar_up = 0.0, gap_ar_down = 0.0, gap_ma_up = 0.0, gap_ma_down = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto y = tsdiag::simulate(truth, 2000, 300 + seed);
    const double base = tsdiag::log_likelihood(truth, y);
    ArmaModel m = truth;
    m.ar[0] = 0.7;
    gap_ar_up += base - tsdiag::log_likelihood(m, y);
    m.ar[0] = 0.3;
    gap_ar_down += base - tsdiag::log_likelihood(m, y);
    m = truth;
    m.ma[0] = 0.5;
    gap_ma_up += base - tsdiag::log_likelihood(m, y);
    m.ma[0] = 0.1;
    gap_ma_down += base - tsdiag::log_likelihood(m, y);
  }
  REQUIRE(gap_ar_up > 0.0);
  REQUIRE(gap_ar_down > 0.0);
  REQUIRE(gap_ma_up > 0.0);
  REQUIRE(gap_ma_down > 0.0);
}

TEST_CASE("select_order picks white noise on white noise") {
  int picked_white = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto y = gaussian_series(1000, 5000 + seed);
    const auto [p, q, report] = tsdiag::select_order(y, 1, 0);
    if (p == 0 && q == 0) ++picked_white;
  }
  REQUIRE(picked_white >= 80);
}

TEST_CASE("select_order finds at least AR(2) structure on AR(2) data") {
  ArmaModel truth;
  truth.ar = {1.2, -0.5};
  int picked = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto y = tsdiag::simulate(truth, 2000, 9000 + seed);
    const auto [p, q, report] = tsdiag::select_order(y, 3, 1);
    if (p >= 2) ++picked;
  }
  REQUIRE(picked >= 90);
}

TEST_CASE("select_order with no viable cell raises no-model") {
  REQUIRE_THROWS_AS(tsdiag::select_order(gaussian_series(9, 1), 5, 5),
                    tsdiag::NoModel);
  REQUIRE_THROWS_AS(tsdiag::select_order(gaussian_series(100, 1), 6, 0),
                    tsdiag::InvalidArgument);
}

TEST_CASE("whiten with a (0,0) fit centers the input") {
  const auto y = gaussian_series(400, 61);
  const auto report = tsdiag::fit(y, 0, 0);
  const auto w = tsdiag::whiten(y, report);
  for (std::size_t t = 0; t < y.size(); ++t)
    REQUIRE(w.values[t] ==
            Catch::Approx(y.values[t] - report.model.mean).margin(1e-12));
  const auto acf = tsdiag::sample_acf(w, 20);
  for (int h = 1; h <= 20; ++h)
    REQUIRE(std::abs(acf.at(h)) < 3.0 / std::sqrt(400.0));
}

TEST_CASE("whiten an AR(1) series passes the portmanteau check") {
  const auto y = tsdiag::simulate(ar1(0.9), 1000, 71);
  const auto report = tsdiag::fit(y, 1, 0);
  const auto w = tsdiag::whiten(y, report);
  const auto lb = tsdiag::ljung_box(w, 20, 1);
  REQUIRE(lb.statistic < 36.19);  // chi^2_{0.99}(19)
}

TEST_CASE("whiten rejects a mismatched report") {
  const auto y = gaussian_series(100, 81);
  const auto report = tsdiag::fit(y, 0, 0);
  auto other = gaussian_series(101, 82);
  REQUIRE_THROWS_AS(tsdiag::whiten(other, report), tsdiag::InvalidArgument);
}

TEST_CASE("whitening a correctly specified model kills lag-1 correlation") {
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto y = tsdiag::simulate(ar1(0.7), 5000, 40000 + seed);
    const auto report = tsdiag::fit(y, 1, 0);
    const auto acf = tsdiag::sample_acf(tsdiag::whiten(y, report), 1);
    if (std::abs(acf.at(1)) < acf.bound) ++inside;
  }
  REQUIRE(inside >= 90);
}

TEST_CASE("residual_diagnostics on clean noise flags few outliers") {
  const auto diag = tsdiag::residual_diagnostics(gaussian_series(1000, 91));
  REQUIRE(diag.outlier_times.size() <= 9);
  REQUIRE(diag.variance_p_value > 0.001);
}

TEST_CASE("residual_diagnostics pinpoints a single spike") {
  TimeSeries y;
  y.start_time = 1900;
  for (int t = 0; t < 100; ++t) y.values.push_back(1e-3 * std::sin(t));
  y.values[30] = 10.0;
  const auto diag = tsdiag::residual_diagnostics(y);
  REQUIRE(diag.outlier_times == std::vector<int>{1930});
  REQUIRE(diag.outlier_scores.size() == 1);
  REQUIRE(diag.outlier_scores[0] > 3.0);
}

TEST_CASE("residual_diagnostics detects a variance increase") {
  tsdiag::NormalSampler rng(101);
  TimeSeries y;
  for (int t = 0; t < 100; ++t) y.values.push_back(rng.next());
  for (int t = 0; t < 50; ++t) y.values.push_back(2.0 * rng.next());
  const auto diag = tsdiag::residual_diagnostics(y);
  REQUIRE(diag.variance_ratio > 2.5);
  REQUIRE(diag.variance_p_value < 0.01);
  REQUIRE(diag.split_time == 100);
}

TEST_CASE("residual_diagnostics requires 30 observations") {
  REQUIRE_THROWS_AS(tsdiag::residual_diagnostics(gaussian_series(29, 1)),
                    tsdiag::InvalidArgument);
}

TEST_CASE("ljung_box separates white from autocorrelated input") {
  const auto white = gaussian_series(1000, 111);
  REQUIRE(tsdiag::ljung_box(white, 20).p_value > 0.001);
  const auto correlated = tsdiag::simulate(ar1(0.8), 1000, 112);
  REQUIRE(tsdiag::ljung_box(correlated, 20).p_value < 1e-10);
  REQUIRE_THROWS_AS(tsdiag::ljung_box(white, 0), tsdiag::InvalidArgument);
  REQUIRE_THROWS_AS(tsdiag::ljung_box(white, 5, 5), tsdiag::InvalidArgument);
}
