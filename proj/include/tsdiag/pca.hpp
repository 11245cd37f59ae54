#pragma once

#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "tsdiag/errors.hpp"
#include "tsdiag/series.hpp"

namespace tsdiag {

/// Year-aligned panel of proxy columns; gaps are kMissing entries.
struct ProxyPanel {
  int start_time = 0;
  std::vector<std::string> proxy_ids;
  Eigen::MatrixXd values;  // n_years x n_proxies

  std::size_t n_years() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t n_proxies() const {
    return static_cast<std::size_t>(values.cols());
  }
};

struct PcaDecomposition {
  Eigen::MatrixXd loadings;  // n_proxies x k, orthonormal columns
  Eigen::MatrixXd scores;    // n_years x k
  std::vector<double> explained_variance;  // nonincreasing, s_j^2 / n_years
  std::vector<double> column_means;
  std::vector<double> column_scales;  // all 1 when standardize is off
  int start_time = 0;
  std::size_t imputed_count = 0;
  bool standardized = true;

  std::size_t k() const { return static_cast<std::size_t>(loadings.cols()); }
};

/// SVD principal components of the mean-imputed, centered (and optionally
/// unit-variance) panel. Signs are pinned so each loading column's entry of
/// largest magnitude is positive.
inline PcaDecomposition decompose(const ProxyPanel& panel, std::size_t k,
                                  bool standardize = true) {
  const std::size_t n = panel.n_years();
  const std::size_t m = panel.n_proxies();
  if (n < 2) throw InvalidArgument("decompose: panel needs at least 2 years");
  if (panel.proxy_ids.size() != m)
    throw InvalidArgument("decompose: label count does not match columns");
  const std::set<std::string> unique(panel.proxy_ids.begin(),
                                     panel.proxy_ids.end());
  if (unique.size() != m)
    throw InvalidArgument("decompose: duplicate proxy labels");
  const std::size_t k_max = std::min(n - 1, m);
  if (k < 1 || k > k_max)
    throw InvalidArgument("decompose: k must be in 1.." +
                          std::to_string(k_max));

  PcaDecomposition out;
  out.start_time = panel.start_time;
  out.standardized = standardize;
  out.column_means.resize(m);
  out.column_scales.resize(m);

  Eigen::MatrixXd x = panel.values;
  const double n_d = static_cast<double>(n);
  for (std::size_t j = 0; j < m; ++j) {
    double sum = 0.0;
    std::size_t observed = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = x(t, j);
      if (!is_missing(v)) {
        sum += v;
        ++observed;
      }
    }
    if (observed == 0)
      throw DegenerateColumn("decompose: column \"" + panel.proxy_ids[j] +
                             "\" has no observations");
    const double mean = sum / static_cast<double>(observed);
    for (std::size_t t = 0; t < n; ++t) {
      if (is_missing(x(t, j))) {
        x(t, j) = 0.0;  // imputed at the column mean, centered below
        ++out.imputed_count;
      } else {
        x(t, j) -= mean;
      }
    }
    out.column_means[j] = mean;
    double ss = 0.0;
    for (std::size_t t = 0; t < n; ++t) ss += x(t, j) * x(t, j);
    const double sd = std::sqrt(ss / n_d);
    if (standardize) {
      if (!(sd > 0.0))
        throw DegenerateColumn("decompose: column \"" + panel.proxy_ids[j] +
                               "\" has zero variance");
      x.col(static_cast<Eigen::Index>(j)) /= sd;
      out.column_scales[j] = sd;
    } else {
      out.column_scales[j] = 1.0;
    }
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(x,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Index kk = static_cast<Eigen::Index>(k);
  out.loadings = svd.matrixV().leftCols(kk);
  out.explained_variance.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double s = svd.singularValues()(static_cast<Eigen::Index>(j));
    out.explained_variance[j] = s * s / n_d;
  }

  for (Eigen::Index j = 0; j < kk; ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < out.loadings.rows(); ++i)
      if (std::abs(out.loadings(i, j)) > best) {
        best = std::abs(out.loadings(i, j));
        arg = i;
      }
    if (out.loadings(arg, j) < 0.0) out.loadings.col(j) = -out.loadings.col(j);
  }
  out.scores = x * out.loadings;
  return out;
}

/// Score column as a series on the panel's year axis.
inline TimeSeries score_series(const PcaDecomposition& decomp,
                               std::size_t component) {
  if (component >= decomp.k())
    throw InvalidArgument("score_series: component index out of range");
  TimeSeries s;
  s.start_time = decomp.start_time;
  const auto col = decomp.scores.col(static_cast<Eigen::Index>(component));
  s.values.assign(col.data(), col.data() + col.size());
  return s;
}

}  // namespace tsdiag
