#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tsdiag/tsdiag.hpp"

using ordered_json = nlohmann::ordered_json;

namespace {

// All emitted numbers pass through a 15-significant-digit round trip, so the
// JSON and CSV encodings agree and reruns are byte-identical.
ordered_json jnum(double v) {
  if (!std::isfinite(v)) return nullptr;
  return std::strtod(tsdiag::format_number(v).c_str(), nullptr);
}

ordered_json jvec(const std::vector<double>& values) {
  ordered_json arr = ordered_json::array();
  for (double v : values) arr.push_back(jnum(v));
  return arr;
}

ordered_json series_json(const tsdiag::TimeSeries& series) {
  ordered_json j;
  j["start_time"] = series.start_time;
  j["values"] = jvec(series.values);
  return j;
}

ordered_json model_json(const tsdiag::ArmaModel& model) {
  ordered_json j;
  j["p"] = model.p();
  j["q"] = model.q();
  j["ar"] = jvec(model.ar);
  j["ma"] = jvec(model.ma);
  j["mean"] = jnum(model.mean);
  j["noise_variance"] = jnum(model.noise_variance);
  return j;
}

std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

ordered_json file_entry(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw tsdiag::ParseError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  ordered_json j;
  j["path"] = path;
  j["bytes"] = bytes.size();
  j["fnv1a64"] = fnv1a64_hex(bytes);
  return j;
}

ordered_json make_manifest(long long seed) {
  ordered_json m;
  m["tool"] = "tsdiag";
  m["version"] = tsdiag::kVersion;
  m["seed"] = seed;
  m["inputs"] = ordered_json::array();
  m["outputs"] = ordered_json::array();
  return m;
}

// JSON mode embeds the manifest in the document; CSV mode keeps stdout pure
// data and sends the manifest to stderr as one JSON line.
void emit(const std::string& command, ordered_json params,
          ordered_json results, ordered_json manifest,
          const std::string& out_format, const std::string& csv_body) {
  if (out_format == "csv") {
    std::cout << csv_body;
    std::cerr << manifest.dump() << "\n";
    return;
  }
  ordered_json doc;
  doc["command"] = command;
  doc["params"] = std::move(params);
  doc["results"] = std::move(results);
  doc["manifest"] = std::move(manifest);
  std::cout << doc.dump(2) << "\n";
}

struct CommonOpts {
  long long seed = 0;
  std::string out = "json";
  std::string plot;
};

void add_common(CLI::App* sub, CommonOpts& common, bool with_plot = true) {
  sub->add_option("--seed", common.seed, "deterministic seed recorded in the manifest")
      ->capture_default_str();
  sub->add_option("--out", common.out, "stdout format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  if (with_plot)
    sub->add_option("--plot", common.plot, "write an SVG plot to this path");
}

tsdiag::TimeSeries pick_series(const tsdiag::CsvTable& table,
                               const std::string& column,
                               std::string* resolved = nullptr) {
  const std::string name = column.empty() ? table.columns.front() : column;
  if (resolved) *resolved = name;
  return table.to_series(name);
}

std::string series_csv(const tsdiag::TimeSeries& series,
                       const std::string& name) {
  std::ostringstream out;
  tsdiag::save_csv(out, tsdiag::table_from_series(series, name));
  return out.str();
}

void plot_series(const CommonOpts& common, const tsdiag::TimeSeries& series,
                 ordered_json& manifest) {
  if (common.plot.empty()) return;
  tsdiag::write_series_svg(common.plot, series.start_time, series.values);
  manifest["outputs"].push_back(file_entry(common.plot));
}

// ---------------------------------------------------------------- diff ----

struct DiffOpts {
  CommonOpts common;
  std::string input, column;
  int lag = 1;
};

void run_diff(const DiffOpts& o) {
  const auto table = tsdiag::load_csv(o.input, tsdiag::CsvRole::response);
  std::string column;
  const auto series = pick_series(table, o.column, &column);
  const auto diffed = tsdiag::difference(series, o.lag);

  ordered_json params{{"input", o.input}, {"column", column}, {"lag", o.lag}};
  ordered_json results;
  results["lag"] = o.lag;
  results["start_time"] = diffed.start_time;
  results["values"] = jvec(diffed.values);

  ordered_json manifest = make_manifest(o.common.seed);
  manifest["inputs"].push_back(file_entry(o.input));
  plot_series(o.common, diffed, manifest);
  emit("diff", std::move(params), std::move(results), std::move(manifest),
       o.common.out, series_csv(diffed, "diff"));
}

// ----------------------------------------------------------------- acf ----

struct AcfOpts {
  CommonOpts common;
  std::string input, column;
  int difference = 0;
  int max_lag = 40;
};

void run_acf(const AcfOpts& o) {
  if (o.difference < 0)
    throw tsdiag::InvalidArgument("acf: --difference must be >= 0");
  const auto table = tsdiag::load_csv(o.input, tsdiag::CsvRole::response);
  std::string column;
  auto series = pick_series(table, o.column, &column);
  for (int d = 0; d < o.difference; ++d) series = tsdiag::difference(series, 1);
  const auto acf = tsdiag::sample_acf(series, o.max_lag);

  ordered_json params{{"input", o.input},
                      {"column", column},
                      {"difference", o.difference},
                      {"max_lag", o.max_lag}};
  ordered_json results;
  results["n"] = acf.n;
  results["bound"] = jnum(acf.bound);
  results["lags"] = acf.lags;
  results["correlations"] = jvec(acf.correlations);

  ordered_json manifest = make_manifest(o.common.seed);
  manifest["inputs"].push_back(file_entry(o.input));
  if (!o.common.plot.empty()) {
    tsdiag::write_correlogram_svg(o.common.plot, acf.lags, acf.correlations,
                                  acf.bound);
    manifest["outputs"].push_back(file_entry(o.common.plot));
  }

  std::ostringstream csv;
  csv << "lag,correlation\n";
  for (std::size_t i = 0; i < acf.lags.size(); ++i)
    csv << acf.lags[i] << ',' << tsdiag::format_number(acf.correlations[i])
        << '\n';
  emit("acf", std::move(params), std::move(results), std::move(manifest),
       o.common.out, csv.str());
}

// ------------------------------------------------------------ fit-arma ----

struct FitArmaOpts {
  CommonOpts common;
  std::string input, column;
  int p = -1, q = -1;
  int max_p = 5, max_q = 5;
  bool no_mean = false;
};

void run_fit_arma(const FitArmaOpts& o) {
  const auto table = tsdiag::load_csv(o.input, tsdiag::CsvRole::response);
  std::string column;
  const auto series = pick_series(table, o.column, &column);

  tsdiag::FitReport report;
  int p = o.p, q = o.q;
  if (p >= 0 && q >= 0) {
    report = tsdiag::fit(series, p, q, {.include_mean = !o.no_mean});
  } else {
    if (o.no_mean)
      throw CLI::ValidationError("--no-mean requires explicit --p and --q");
    std::tie(p, q, report) = tsdiag::select_order(series, o.max_p, o.max_q);
  }

  ordered_json params{{"input", o.input},  {"column", column},
                      {"p", o.p},          {"q", o.q},
                      {"max_p", o.max_p},  {"max_q", o.max_q},
                      {"include_mean", !o.no_mean}};
  ordered_json results;
  results["model"] = model_json(report.model);
  results["loglik"] = jnum(report.loglik);
  results["aicc"] = jnum(report.aicc);
  results["converged"] = report.converged;
  results["iterations"] = report.iterations;

  ordered_json manifest = make_manifest(o.common.seed);
  manifest["inputs"].push_back(file_entry(o.input));
  plot_series(o.common, report.residuals, manifest);

  std::ostringstream csv;
  csv << "field,value\n";
  csv << "p," << p << "\nq," << q << '\n';
  for (std::size_t i = 0; i < report.model.ar.size(); ++i)
    csv << "ar" << i + 1 << ',' << tsdiag::format_number(report.model.ar[i])
        << '\n';
  for (std::size_t i = 0; i < report.model.ma.size(); ++i)
    csv << "ma" << i + 1 << ',' << tsdiag::format_number(report.model.ma[i])
        << '\n';
  csv << "mean," << tsdiag::format_number(report.model.mean) << '\n';
  csv << "noise_variance,"
      << tsdiag::format_number(report.model.noise_variance) << '\n';
  csv << "loglik," << tsdiag::format_number(report.loglik) << '\n';
  csv << "aicc," << tsdiag::format_number(report.aicc) << '\n';
  csv << "converged," << (report.converged ? 1 : 0) << '\n';
  csv << "iterations," << report.iterations << '\n';
  emit("fit-arma", std::move(params), std::move(results), std::move(manifest),
       o.common.out, csv.str());
}

// -------------------------------------------------------------- whiten ----

struct WhitenOpts {
  CommonOpts common;
  std::string input, column;
  int p = -1, q = -1;
  int max_p = 5, max_q = 5;
};

void run_whiten(const WhitenOpts& o) {
  const auto table = tsdiag::load_csv(o.input, tsdiag::CsvRole::response);
  std::string column;
  const auto series = pick_series(table, o.column, &column);

  tsdiag::FitReport report;
  int p = o.p, q = o.q;
  if (p >= 0 && q >= 0)
    report = tsdiag::fit(series, p, q);
  else
    std::tie(p, q, report) = tsdiag::select_order(series, o.max_p, o.max_q);

  ordered_json params{{"input", o.input}, {"column", column},
                      {"p", o.p},         {"q", o.q},
                      {"max_p", o.max_p}, {"max_q", o.max_q}};
  ordered_json results;
  results["model"] = model_json(report.model);
  results["residuals"] = series_json(report.residuals);

  ordered_json manifest = make_manifest(o.common.seed);
  manifest["inputs"].push_back(file_entry(o.input));
  plot_series(o.common, report.residuals, manifest);
  emit("whiten", std::move(params), std::move(results), std::move(manifest),
       o.common.out, series_csv(report.residuals, "residual"));
}

// ----------------------------------------------------------------- ccf ----

struct CcfOpts {
  CommonOpts common;
  std::string response, response_column;
  std::string covariate, covariate_column;
  std::string panel;
  int pca_component = 0;
  std::string prewhiten = "x";
  int max_lag = 40;
  int max_p = 5, max_q = 5;
  bool no_standardize = false;
};

void run_ccf(const CcfOpts& o) {
  if (o.covariate.empty() == o.panel.empty())
    throw CLI::ValidationError(
        "ccf: exactly one of --covariate or --panel is required");

  const auto ytable = tsdiag::load_csv(o.response, tsdiag::CsvRole::response);
  std::string ycolumn;
  const auto y = pick_series(ytable, o.response_column, &ycolumn);

  tsdiag::TimeSeries x;
  std::string xlabel;
  ordered_json manifest = make_manifest(o.common.seed);
  manifest["inputs"].push_back(file_entry(o.response));
  if (!o.covariate.empty()) {
    const auto xtable =
        tsdiag::load_csv(o.covariate, tsdiag::CsvRole::response);
    x = pick_series(xtable, o.covariate_column, &xlabel);
    manifest["inputs"].push_back(file_entry(o.covariate));
  } else {
    const auto ptable = tsdiag::load_csv(o.panel, tsdiag::CsvRole::panel);
    const auto panel = ptable.to_panel();
    if (o.pca_component < 0)
      throw tsdiag::InvalidArgument("ccf: --pca-component must be >= 0");
    const auto decomp =
        tsdiag::decompose(panel, static_cast<std::size_t>(o.pca_component) + 1,
                          !o.no_standardize);
    x = tsdiag::score_series(decomp,
                             static_cast<std::size_t>(o.pca_component));
    xlabel = "pc" + std::to_string(o.pca_component);
    manifest["inputs"].push_back(file_entry(o.panel));
  }

  tsdiag::CcfMode mode = tsdiag::CcfMode::prewhitened_x;
  if (o.prewhiten == "none") mode = tsdiag::CcfMode::raw;
  if (o.prewhiten == "both") mode = tsdiag::CcfMode::prewhitened_both;
  const auto ccf =
      mode == tsdiag::CcfMode::raw
          ? tsdiag::cross_correlation(x, y, o.max_lag)
          : tsdiag::prewhitened_ccf(x, y, o.max_lag, o.max_p, o.max_q, mode);
  const auto significant = tsdiag::significant_lags(ccf);

  ordered_json params{{"response", o.response},
                      {"response_column", ycolumn},
                      {"covariate", o.covariate},
                      {"panel", o.panel},
                      {"pca_component", o.pca_component},
                      {"covariate_label", xlabel},
                      {"prewhiten", o.prewhiten},
                      {"max_lag", o.max_lag},
                      {"max_p", o.max_p},
                      {"max_q", o.max_q},
                      {"standardize", !o.no_standardize}};

  ordered_json results;
  results["mode"] = tsdiag::to_string(ccf.mode);
  results["n"] = ccf.n;
  results["bound"] = jnum(ccf.bound);
  results["prewhiten_p"] = ccf.prewhiten_p;
  results["prewhiten_q"] = ccf.prewhiten_q;
  results["lags"] = ccf.lags;
  results["correlations"] = jvec(ccf.correlations);
  ordered_json sig_lags = ordered_json::array();
  ordered_json sig_detail = ordered_json::array();
  for (const auto& [lag, corr] : significant) {
    sig_lags.push_back(lag);
    sig_detail.push_back(
        ordered_json{{"lag", lag}, {"correlation", jnum(corr)}});
  }
  results["significant_lags"] = std::move(sig_lags);
  results["significant"] = std::move(sig_detail);

  manifest["alignment"] =
      ordered_json{{"response", {y.start_time, y.end_time()}},
                   {"covariate", {x.start_time, x.end_time()}},
                   {"common",
                    {std::max(y.start_time, x.start_time),
                     std::min(y.end_time(), x.end_time())}}};
  if (!o.common.plot.empty()) {
    tsdiag::write_correlogram_svg(o.common.plot, ccf.lags, ccf.correlations,
                                  ccf.bound);
    manifest["outputs"].push_back(file_entry(o.common.plot));
  }

  std::ostringstream csv;
  csv << "lag,correlation,significant\n";
  for (std::size_t i = 0; i < ccf.lags.size(); ++i)
    csv << ccf.lags[i] << ','
        << tsdiag::format_number(ccf.correlations[i]) << ','
        << (std::abs(ccf.correlations[i]) > ccf.bound ? 1 : 0) << '\n';
  emit("ccf", std::move(params), std::move(results), std::move(manifest),
       o.common.out, csv.str());
}

// ----------------------------------------------------------------- pca ----

struct PcaOpts {
  CommonOpts common;
  std::string panel;
  int components = 0;  // 0 = min(10, n_proxies)
  bool no_standardize = false;
};

void run_pca(const PcaOpts& o) {
  const auto table = tsdiag::load_csv(o.panel, tsdiag::CsvRole::panel);
  const auto panel = table.to_panel();
  const std::size_t k =
      o.components > 0
          ? static_cast<std::size_t>(o.components)
          : std::min<std::size_t>(10, panel.n_proxies());
  const auto decomp = tsdiag::decompose(panel, k, !o.no_standardize);

  ordered_json params{{"panel", o.panel},
                      {"components", k},
                      {"standardize", !o.no_standardize}};
  ordered_json results;
  results["n_years"] = panel.n_years();
  results["n_proxies"] = panel.n_proxies();
  results["k"] = decomp.k();
  results["standardized"] = decomp.standardized;
  results["imputed_count"] = decomp.imputed_count;
  results["proxy_ids"] = panel.proxy_ids;
  results["explained_variance"] = jvec(decomp.explained_variance);
  ordered_json loadings = ordered_json::array();
  for (std::size_t j = 0; j < decomp.k(); ++j) {
    ordered_json col = ordered_json::array();
    for (Eigen::Index i = 0; i < decomp.loadings.rows(); ++i)
      col.push_back(jnum(decomp.loadings(i, static_cast<Eigen::Index>(j))));
    loadings.push_back(std::move(col));
  }
  results["loadings"] = std::move(loadings);
  ordered_json scores;
  scores["start_time"] = decomp.start_time;
  ordered_json score_cols = ordered_json::array();
  for (std::size_t j = 0; j < decomp.k(); ++j) {
    const auto s = tsdiag::score_series(decomp, j);
    score_cols.push_back(jvec(s.values));
  }
  scores["components"] = std::move(score_cols);
  results["scores"] = std::move(scores);

  ordered_json manifest = make_manifest(o.common.seed);
  manifest["inputs"].push_back(file_entry(o.panel));
  plot_series(o.common, tsdiag::score_series(decomp, 0), manifest);

  std::ostringstream csv;
  csv << "year";
  for (std::size_t j = 0; j < decomp.k(); ++j) csv << ",pc" << j;
  csv << '\n';
  for (Eigen::Index r = 0; r < decomp.scores.rows(); ++r) {
    csv << decomp.start_time + static_cast<int>(r);
    for (std::size_t j = 0; j < decomp.k(); ++j)
      csv << ','
          << tsdiag::format_number(
                 decomp.scores(r, static_cast<Eigen::Index>(j)));
    csv << '\n';
  }
  emit("pca", std::move(params), std::move(results), std::move(manifest),
       o.common.out, csv.str());
}

// -------------------------------------------------------------- segment ---

struct SegmentOpts {
  CommonOpts common;
  std::string input, column;
  int max_breaks = 5;
  int max_order = 5;
  int min_seg_len = 20;
};

void run_segment(const SegmentOpts& o) {
  const auto table = tsdiag::load_csv(o.input, tsdiag::CsvRole::response);
  std::string column;
  const auto series = pick_series(table, o.column, &column);
  const auto seg =
      tsdiag::segment(series, o.max_breaks, o.max_order, o.min_seg_len);

  ordered_json params{{"input", o.input},
                      {"column", column},
                      {"max_breaks", o.max_breaks},
                      {"max_order", o.max_order},
                      {"min_seg_len", o.min_seg_len}};
  ordered_json results;
  results["mdl"] = jnum(seg.mdl);
  results["breaks"] = seg.m();
  ordered_json breaks = ordered_json::array();
  for (std::size_t b : seg.breakpoints)
    breaks.push_back(series.start_time + static_cast<int>(b));
  results["breakpoints"] = std::move(breaks);
  ordered_json segments = ordered_json::array();
  for (const auto& s : seg.segments) {
    ordered_json j;
    j["start_time"] = series.start_time + static_cast<int>(s.begin);
    j["length"] = s.length;
    j["order"] = s.order;
    j["ar"] = jvec(s.ar);
    j["mean"] = jnum(s.mean);
    j["noise_variance"] = jnum(s.noise_variance);
    segments.push_back(std::move(j));
  }
  results["segments"] = std::move(segments);

  ordered_json manifest = make_manifest(o.common.seed);
  manifest["inputs"].push_back(file_entry(o.input));
  plot_series(o.common, series, manifest);

  std::ostringstream csv;
  csv << "segment,start,length,order,mean,noise_variance,ar\n";
  for (std::size_t i = 0; i < seg.segments.size(); ++i) {
    const auto& s = seg.segments[i];
    csv << i << ',' << series.start_time + static_cast<int>(s.begin) << ','
        << s.length << ',' << s.order << ',' << tsdiag::format_number(s.mean)
        << ',' << tsdiag::format_number(s.noise_variance) << ',';
    for (std::size_t a = 0; a < s.ar.size(); ++a)
      csv << (a ? ";" : "") << tsdiag::format_number(s.ar[a]);
    csv << '\n';
  }
  emit("segment", std::move(params), std::move(results), std::move(manifest),
       o.common.out, csv.str());
}

// -------------------------------------------------------------- lagscan ---

struct LagScanOpts {
  CommonOpts common;
  std::string response, response_column;
  std::string covariate, covariate_column;
  int max_lag = 20;
  bool raw = false;
};

void run_lagscan(const LagScanOpts& o) {
  const auto ytable = tsdiag::load_csv(o.response, tsdiag::CsvRole::response);
  const auto xtable = tsdiag::load_csv(o.covariate, tsdiag::CsvRole::response);
  std::string ycolumn, xcolumn;
  const auto y = pick_series(ytable, o.response_column, &ycolumn);
  const auto x = pick_series(xtable, o.covariate_column, &xcolumn);
  const auto entries = tsdiag::lag_scan(y, x, o.max_lag, !o.raw);

  ordered_json params{{"response", o.response},
                      {"response_column", ycolumn},
                      {"covariate", o.covariate},
                      {"covariate_column", xcolumn},
                      {"max_lag", o.max_lag},
                      {"prewhiten", !o.raw}};
  ordered_json results;
  ordered_json list = ordered_json::array();
  for (const auto& e : entries)
    list.push_back(ordered_json{{"offset", e.offset},
                                {"correlation", jnum(e.correlation)},
                                {"significant", e.significant}});
  results["entries"] = std::move(list);

  ordered_json manifest = make_manifest(o.common.seed);
  manifest["inputs"].push_back(file_entry(o.response));
  manifest["inputs"].push_back(file_entry(o.covariate));

  std::ostringstream csv;
  csv << "offset,correlation,significant\n";
  for (const auto& e : entries)
    csv << e.offset << ',' << tsdiag::format_number(e.correlation) << ','
        << (e.significant ? 1 : 0) << '\n';
  emit("lagscan", std::move(params), std::move(results), std::move(manifest),
       o.common.out, csv.str());
}

// ------------------------------------------------------------- transfer ---

struct TransferOpts {
  CommonOpts common;
  std::string response, response_column;
  std::string covariate, covariate_column;
  std::vector<int> offsets;
  int error_p = 0, error_q = 0;
  int predict_start = INT_MIN;
  int predict_length = 0;
};

void run_transfer(const TransferOpts& o) {
  const auto ytable = tsdiag::load_csv(o.response, tsdiag::CsvRole::response);
  const auto xtable = tsdiag::load_csv(o.covariate, tsdiag::CsvRole::response);
  std::string ycolumn, xlabel;
  const auto y = pick_series(ytable, o.response_column, &ycolumn);
  const auto x = pick_series(xtable, o.covariate_column, &xlabel);
  const std::vector<tsdiag::Regressor> regressors = {
      {x, {xlabel, o.offsets}}};
  const auto model =
      tsdiag::fit_transfer(y, regressors, o.error_p, o.error_q);

  ordered_json params{{"response", o.response},
                      {"response_column", ycolumn},
                      {"covariate", o.covariate},
                      {"covariate_column", xlabel},
                      {"offsets", o.offsets},
                      {"error_p", o.error_p},
                      {"error_q", o.error_q}};
  ordered_json results;
  results["intercept"] = jnum(model.intercept);
  results["intercept_std_error"] = jnum(model.intercept_std_error);
  ordered_json coefs = ordered_json::array();
  for (const auto& c : model.coefficients)
    coefs.push_back(ordered_json{{"covariate", c.covariate},
                                 {"offset", c.offset},
                                 {"estimate", jnum(c.estimate)},
                                 {"std_error", jnum(c.std_error)}});
  results["coefficients"] = std::move(coefs);
  results["error_model"] = model_json(model.noise);
  results["loglik"] = jnum(model.loglik);
  results["converged"] = model.converged;
  results["rounds"] = model.rounds;
  results["fit_start"] = model.fit_start;
  results["fit_end"] = model.fit_end;
  results["equation"] = model.equation();
  results["residuals"] = series_json(model.residuals);

  if (o.predict_length > 0) {
    const int start =
        o.predict_start == INT_MIN ? model.fit_end + 1 : o.predict_start;
    const auto pred =
        tsdiag::predict(model, regressors, start,
                        static_cast<std::size_t>(o.predict_length));
    ordered_json p;
    p["start_time"] = pred.mean.start_time;
    p["mean"] = jvec(pred.mean.values);
    p["std_error"] = jvec(pred.std_error.values);
    results["prediction"] = std::move(p);
  }

  ordered_json manifest = make_manifest(o.common.seed);
  manifest["inputs"].push_back(file_entry(o.response));
  manifest["inputs"].push_back(file_entry(o.covariate));
  plot_series(o.common, model.residuals, manifest);

  std::ostringstream csv;
  csv << "term,offset,estimate,std_error\n";
  csv << "intercept,," << tsdiag::format_number(model.intercept) << ','
      << tsdiag::format_number(model.intercept_std_error) << '\n';
  for (const auto& c : model.coefficients)
    csv << c.covariate << ',' << c.offset << ','
        << tsdiag::format_number(c.estimate) << ','
        << tsdiag::format_number(c.std_error) << '\n';
  emit("transfer", std::move(params), std::move(results), std::move(manifest),
       o.common.out, csv.str());
}

// -------------------------------------------------------------- holdout ---

struct HoldoutOpts {
  CommonOpts common;
  std::string response, response_column;
  std::string covariate, covariate_column;
  std::vector<int> offsets;
  int error_p = 0, error_q = 0;
  std::string blocks;
};

std::vector<tsdiag::HoldoutBlock> parse_blocks(const std::string& text) {
  std::vector<tsdiag::HoldoutBlock> blocks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw CLI::ValidationError("--blocks expects start:length[,...]");
    try {
      blocks.push_back({std::stoi(item.substr(0, colon)),
                        std::stoi(item.substr(colon + 1))});
    } catch (const std::exception&) {
      throw CLI::ValidationError("--blocks expects start:length[,...]");
    }
  }
  return blocks;
}

void run_holdout(const HoldoutOpts& o) {
  const auto ytable = tsdiag::load_csv(o.response, tsdiag::CsvRole::response);
  std::string ycolumn;
  const auto y = pick_series(ytable, o.response_column, &ycolumn);
  const auto blocks = parse_blocks(o.blocks);

  ordered_json manifest = make_manifest(o.common.seed);
  manifest["inputs"].push_back(file_entry(o.response));

  tsdiag::ModelBuilder builder;
  std::string builder_name = "mean";
  std::string xlabel;
  if (!o.covariate.empty()) {
    if (o.offsets.empty())
      throw CLI::ValidationError("--covariate requires --offsets");
    const auto xtable =
        tsdiag::load_csv(o.covariate, tsdiag::CsvRole::response);
    const auto x = pick_series(xtable, o.covariate_column, &xlabel);
    builder = tsdiag::transfer_builder({{x, {xlabel, o.offsets}}}, o.error_p,
                                       o.error_q);
    builder_name = "transfer";
    manifest["inputs"].push_back(file_entry(o.covariate));
  } else {
    builder = tsdiag::mean_builder();
  }
  const auto report = tsdiag::holdout_eval(y, builder, blocks);

  ordered_json params{{"response", o.response},
                      {"response_column", ycolumn},
                      {"covariate", o.covariate},
                      {"covariate_column", xlabel},
                      {"offsets", o.offsets},
                      {"error_p", o.error_p},
                      {"error_q", o.error_q},
                      {"blocks", o.blocks},
                      {"builder", builder_name}};
  ordered_json results;
  results["builder"] = builder_name;
  ordered_json blist = ordered_json::array();
  for (std::size_t i = 0; i < blocks.size(); ++i)
    blist.push_back(ordered_json{{"start_time", blocks[i].start_time},
                                 {"length", blocks[i].length},
                                 {"rmse", jnum(report.block_rmse[i])}});
  results["blocks"] = std::move(blist);
  results["pooled_rmse"] = jnum(report.pooled_rmse);

  std::ostringstream csv;
  csv << "block_start,block_length,rmse\n";
  for (std::size_t i = 0; i < blocks.size(); ++i)
    csv << blocks[i].start_time << ',' << blocks[i].length << ','
        << tsdiag::format_number(report.block_rmse[i]) << '\n';
  csv << "pooled,," << tsdiag::format_number(report.pooled_rmse) << '\n';
  emit("holdout", std::move(params), std::move(results), std::move(manifest),
       o.common.out, csv.str());
}

// ------------------------------------------------------------- simulate ---

struct SimulateOpts {
  CommonOpts common;
  std::string kind;
  int n = 150;
  int start_year = 1850;
  // arma
  std::vector<double> ar, ma;
  double mean = 0.0, variance = 1.0;
  std::string output;
  // lag fixtures
  int lag = -1;
  double slope = std::nan("");
  double noise_sd = std::nan("");
  std::string response_out, covariate_out, panel_out;
  // lag-panel extras
  int proxies = 50;
  double proxy_noise_sd = 1.0;
  std::vector<double> factor_ar = {0.5, 0.2};
};

void run_simulate(const SimulateOpts& o) {
  if (o.n < 10) throw tsdiag::InvalidArgument("simulate: --n must be >= 10");
  ordered_json manifest = make_manifest(o.common.seed);
  ordered_json params{{"kind", o.kind},
                      {"n", o.n},
                      {"start_year", o.start_year},
                      {"seed", o.common.seed}};
  ordered_json results;
  results["kind"] = o.kind;
  tsdiag::TimeSeries primary;  // what --plot and --out csv show
  std::string primary_name;

  if (o.kind == "arma") {
    if (o.output.empty())
      throw CLI::ValidationError("simulate arma requires --output");
    tsdiag::ArmaModel model;
    model.ar = o.ar;
    model.ma = o.ma;
    model.mean = o.mean;
    model.noise_variance = o.variance;
    auto series = tsdiag::simulate(
        model, static_cast<std::size_t>(o.n),
        static_cast<std::uint64_t>(o.common.seed));
    series.start_time = o.start_year;
    tsdiag::save_csv(o.output, tsdiag::table_from_series(series, "value"));
    manifest["outputs"].push_back(file_entry(o.output));
    params["ar"] = jvec(o.ar);
    params["ma"] = jvec(o.ma);
    params["mean"] = jnum(o.mean);
    params["variance"] = jnum(o.variance);
    results["output"] = o.output;
    primary = series;
    primary_name = "value";
  } else if (o.kind == "lag-pair") {
    if (o.response_out.empty() || o.covariate_out.empty())
      throw CLI::ValidationError(
          "simulate lag-pair requires --response-out and --covariate-out");
    const int lag = o.lag < 0 ? 3 : o.lag;
    const double slope = std::isnan(o.slope) ? 2.0 : o.slope;
    const double noise_sd = std::isnan(o.noise_sd) ? 1.0 : o.noise_sd;
    tsdiag::NormalSampler rng(static_cast<std::uint64_t>(o.common.seed));
    tsdiag::TimeSeries x, y;
    x.start_time = o.start_year - lag;
    x.values = rng.draw(static_cast<std::size_t>(o.n + lag));
    y.start_time = o.start_year;
    for (int i = 0; i < o.n; ++i)
      y.values.push_back(slope * x.values[static_cast<std::size_t>(i)] +
                         noise_sd * rng.next());
    tsdiag::save_csv(o.covariate_out, tsdiag::table_from_series(x, "x"));
    tsdiag::save_csv(o.response_out, tsdiag::table_from_series(y, "y"));
    manifest["outputs"].push_back(file_entry(o.covariate_out));
    manifest["outputs"].push_back(file_entry(o.response_out));
    params["lag"] = lag;
    params["slope"] = jnum(slope);
    params["noise_sd"] = jnum(noise_sd);
    results["covariate_out"] = o.covariate_out;
    results["response_out"] = o.response_out;
    primary = y;
    primary_name = "y";
  } else {  // lag-panel
    if (o.response_out.empty() || o.panel_out.empty())
      throw CLI::ValidationError(
          "simulate lag-panel requires --response-out and --panel-out");
    if (o.proxies < 2)
      throw tsdiag::InvalidArgument("simulate: --proxies must be >= 2");
    const int lag = o.lag < 0 ? 14 : o.lag;
    const double slope = std::isnan(o.slope) ? 0.5 : o.slope;
    const double noise_sd = std::isnan(o.noise_sd) ? 0.75 : o.noise_sd;
    if (!tsdiag::detail::is_causal(o.factor_ar))
      throw tsdiag::InvalidModel("simulate: --factor-ar is not causal");

    tsdiag::NormalSampler rng(static_cast<std::uint64_t>(o.common.seed));
    const std::size_t total = static_cast<std::size_t>(o.n + lag);
    std::vector<double> buf(100 + total, 0.0);
    for (std::size_t t = 0; t < buf.size(); ++t) {
      double v = rng.next();
      for (std::size_t i = 0; i < o.factor_ar.size(); ++i)
        if (t > i) v += o.factor_ar[i] * buf[t - 1 - i];
      buf[t] = v;
    }
    // factor[j] sits at year start_year - lag + j
    const std::vector<double> factor(buf.end() - static_cast<long>(total),
                                     buf.end());

    std::vector<double> loadings(static_cast<std::size_t>(o.proxies));
    for (auto& l : loadings) l = rng.next();

    tsdiag::ProxyPanel panel;
    panel.start_time = o.start_year;
    panel.values.resize(o.n, o.proxies);
    for (int j = 0; j < o.proxies; ++j)
      panel.proxy_ids.push_back("p" + std::to_string(j + 1));
    for (int t = 0; t < o.n; ++t)
      for (int j = 0; j < o.proxies; ++j)
        panel.values(t, j) =
            loadings[static_cast<std::size_t>(j)] *
                factor[static_cast<std::size_t>(lag + t)] +
            o.proxy_noise_sd * rng.next();

    tsdiag::TimeSeries y;
    y.start_time = o.start_year;
    for (int t = 0; t < o.n; ++t)
      y.values.push_back(slope * factor[static_cast<std::size_t>(t)] +
                         noise_sd * rng.next());

    tsdiag::save_csv(o.panel_out, tsdiag::table_from_panel(panel));
    tsdiag::save_csv(o.response_out, tsdiag::table_from_series(y, "temp"));
    manifest["outputs"].push_back(file_entry(o.panel_out));
    manifest["outputs"].push_back(file_entry(o.response_out));
    params["lag"] = lag;
    params["slope"] = jnum(slope);
    params["noise_sd"] = jnum(noise_sd);
    params["proxies"] = o.proxies;
    params["proxy_noise_sd"] = jnum(o.proxy_noise_sd);
    params["factor_ar"] = jvec(o.factor_ar);
    results["panel_out"] = o.panel_out;
    results["response_out"] = o.response_out;
    primary = y;
    primary_name = "temp";
  }

  results["n"] = o.n;
  results["start_year"] = o.start_year;
  plot_series(o.common, primary, manifest);
  emit("simulate", std::move(params), std::move(results), std::move(manifest),
       o.common.out, series_csv(primary, primary_name));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-series diagnostics and reconstruction toolkit"};
  app.require_subcommand(1);

  DiffOpts diffo;
  auto* diff = app.add_subcommand("diff", "difference a series at a lag");
  diff->add_option("--input", diffo.input, "input CSV")->required();
  diff->add_option("--column", diffo.column, "column name (default: first)");
  diff->add_option("--lag", diffo.lag, "difference lag")->capture_default_str();
  add_common(diff, diffo.common);
  diff->callback([&] { run_diff(diffo); });

  AcfOpts acfo;
  auto* acf = app.add_subcommand("acf", "sample autocorrelation function");
  acf->add_option("--input", acfo.input, "input CSV")->required();
  acf->add_option("--column", acfo.column, "column name (default: first)");
  acf->add_option("--difference", acfo.difference,
                  "apply this many lag-1 differences first")
      ->capture_default_str();
  acf->add_option("--max-lag", acfo.max_lag, "largest lag")
      ->capture_default_str();
  add_common(acf, acfo.common);
  acf->callback([&] { run_acf(acfo); });

  FitArmaOpts fito;
  auto* fit = app.add_subcommand(
      "fit-arma", "fit an ARMA model (explicit order or AICc selection)");
  fit->add_option("--input", fito.input, "input CSV")->required();
  fit->add_option("--column", fito.column, "column name (default: first)");
  fit->add_option("--p", fito.p, "AR order (omit to select by AICc)");
  fit->add_option("--q", fito.q, "MA order (omit to select by AICc)");
  fit->add_option("--max-p", fito.max_p, "selection grid AR bound")
      ->capture_default_str();
  fit->add_option("--max-q", fito.max_q, "selection grid MA bound")
      ->capture_default_str();
  fit->add_flag("--no-mean", fito.no_mean, "fix the mean at zero");
  add_common(fit, fito.common);
  fit->callback([&] { run_fit_arma(fito); });

  WhitenOpts whiteno;
  auto* whiten = app.add_subcommand(
      "whiten", "residuals of a fitted ARMA model (prewhitening filter)");
  whiten->add_option("--input", whiteno.input, "input CSV")->required();
  whiten->add_option("--column", whiteno.column,
                     "column name (default: first)");
  whiten->add_option("--p", whiteno.p, "AR order (omit to select by AICc)");
  whiten->add_option("--q", whiteno.q, "MA order (omit to select by AICc)");
  whiten->add_option("--max-p", whiteno.max_p, "selection grid AR bound")
      ->capture_default_str();
  whiten->add_option("--max-q", whiteno.max_q, "selection grid MA bound")
      ->capture_default_str();
  add_common(whiten, whiteno.common);
  whiten->callback([&] { run_whiten(whiteno); });

  CcfOpts ccfo;
  auto* ccf = app.add_subcommand(
      "ccf", "cross-correlation of a response with a covariate or PCA score");
  ccf->add_option("--response", ccfo.response, "response CSV")->required();
  ccf->add_option("--response-column", ccfo.response_column,
                  "response column (default: first)");
  ccf->add_option("--covariate", ccfo.covariate, "covariate CSV");
  ccf->add_option("--covariate-column", ccfo.covariate_column,
                  "covariate column (default: first)");
  ccf->add_option("--panel", ccfo.panel, "proxy panel CSV");
  ccf->add_option("--pca-component", ccfo.pca_component,
                  "score used as the covariate when --panel is given")
      ->capture_default_str();
  ccf->add_option("--prewhiten", ccfo.prewhiten, "none, x, or both")
      ->check(CLI::IsMember({"none", "x", "both"}))
      ->capture_default_str();
  ccf->add_option("--max-lag", ccfo.max_lag, "largest lag")
      ->capture_default_str();
  ccf->add_option("--max-p", ccfo.max_p, "prewhitening grid AR bound")
      ->capture_default_str();
  ccf->add_option("--max-q", ccfo.max_q, "prewhitening grid MA bound")
      ->capture_default_str();
  ccf->add_flag("--no-standardize", ccfo.no_standardize,
                "PCA on centered, not unit-variance, columns");
  add_common(ccf, ccfo.common);
  ccf->callback([&] { run_ccf(ccfo); });

  PcaOpts pcao;
  auto* pca = app.add_subcommand("pca", "principal components of a panel");
  pca->add_option("--panel", pcao.panel, "proxy panel CSV")->required();
  pca->add_option("--components", pcao.components,
                  "number of components (default: min(10, proxies))");
  pca->add_flag("--no-standardize", pcao.no_standardize,
                "centered, not unit-variance, columns");
  add_common(pca, pcao.common);
  pca->callback([&] { run_pca(pcao); });

  SegmentOpts sego;
  auto* seg = app.add_subcommand(
      "segment", "minimum-description-length piecewise AR segmentation");
  seg->add_option("--input", sego.input, "input CSV")->required();
  seg->add_option("--column", sego.column, "column name (default: first)");
  seg->add_option("--max-breaks", sego.max_breaks, "breakpoint budget")
      ->capture_default_str();
  seg->add_option("--max-order", sego.max_order, "per-segment AR bound")
      ->capture_default_str();
  seg->add_option("--min-seg-len", sego.min_seg_len, "shortest segment")
      ->capture_default_str();
  add_common(seg, sego.common);
  seg->callback([&] { run_segment(sego); });

  LagScanOpts scano;
  auto* scan = app.add_subcommand(
      "lagscan", "rank covariate offsets by cross-correlation strength");
  scan->add_option("--response", scano.response, "response CSV")->required();
  scan->add_option("--response-column", scano.response_column,
                   "response column (default: first)");
  scan->add_option("--covariate", scano.covariate, "covariate CSV")
      ->required();
  scan->add_option("--covariate-column", scano.covariate_column,
                   "covariate column (default: first)");
  scan->add_option("--max-lag", scano.max_lag, "largest offset scanned")
      ->capture_default_str();
  scan->add_flag("--raw", scano.raw, "skip prewhitening");
  add_common(scan, scano.common, /*with_plot=*/false);
  scan->callback([&] { run_lagscan(scano); });

  TransferOpts transo;
  auto* trans = app.add_subcommand(
      "transfer", "distributed-lag regression with ARMA errors");
  trans->add_option("--response", transo.response, "response CSV")->required();
  trans->add_option("--response-column", transo.response_column,
                    "response column (default: first)");
  trans->add_option("--covariate", transo.covariate, "covariate CSV")
      ->required();
  trans->add_option("--covariate-column", transo.covariate_column,
                    "covariate column (default: first)");
  trans->add_option("--offsets", transo.offsets,
                    "comma-separated covariate offsets, e.g. -3,0")
      ->required()
      ->delimiter(',');
  trans->add_option("--error-p", transo.error_p, "error model AR order")
      ->capture_default_str();
  trans->add_option("--error-q", transo.error_q, "error model MA order")
      ->capture_default_str();
  trans->add_option("--predict-start", transo.predict_start,
                    "first predicted time (default: after the fit window)");
  trans->add_option("--predict-length", transo.predict_length,
                    "how many times to predict")
      ->capture_default_str();
  add_common(trans, transo.common);
  trans->callback([&] { run_transfer(transo); });

  HoldoutOpts holdo;
  auto* hold = app.add_subcommand(
      "holdout", "blocked holdout evaluation of a forecaster");
  hold->add_option("--response", holdo.response, "response CSV")->required();
  hold->add_option("--response-column", holdo.response_column,
                   "response column (default: first)");
  hold->add_option("--covariate", holdo.covariate,
                   "covariate CSV (omit for the mean forecaster)");
  hold->add_option("--covariate-column", holdo.covariate_column,
                   "covariate column (default: first)");
  hold->add_option("--offsets", holdo.offsets,
                   "comma-separated covariate offsets")
      ->delimiter(',');
  hold->add_option("--error-p", holdo.error_p, "error model AR order")
      ->capture_default_str();
  hold->add_option("--error-q", holdo.error_q, "error model MA order")
      ->capture_default_str();
  hold->add_option("--blocks", holdo.blocks, "start:length[,start:length...]")
      ->required();
  add_common(hold, holdo.common, /*with_plot=*/false);
  hold->callback([&] { run_holdout(holdo); });

  SimulateOpts simo;
  auto* sim = app.add_subcommand(
      "simulate", "generate fixture data (ARMA series, lagged pair, panel)");
  sim->add_option("--kind", simo.kind, "arma, lag-pair, or lag-panel")
      ->required()
      ->check(CLI::IsMember({"arma", "lag-pair", "lag-panel"}));
  sim->add_option("--n", simo.n, "series length")->capture_default_str();
  sim->add_option("--start-year", simo.start_year, "first year")
      ->capture_default_str();
  sim->add_option("--ar", simo.ar, "AR coefficients (arma kind)")
      ->delimiter(',');
  sim->add_option("--ma", simo.ma, "MA coefficients (arma kind)")
      ->delimiter(',');
  sim->add_option("--mean", simo.mean, "series mean (arma kind)")
      ->capture_default_str();
  sim->add_option("--variance", simo.variance, "noise variance (arma kind)")
      ->capture_default_str();
  sim->add_option("--output", simo.output, "output CSV (arma kind)");
  sim->add_option("--lag", simo.lag,
                  "signal lag (default 3 for lag-pair, 14 for lag-panel)");
  sim->add_option("--slope", simo.slope,
                  "signal slope (default 2 for lag-pair, 0.5 for lag-panel)");
  sim->add_option("--noise-sd", simo.noise_sd,
                  "response noise s.d. (default 1 / 0.75)");
  sim->add_option("--response-out", simo.response_out, "response CSV path");
  sim->add_option("--covariate-out", simo.covariate_out,
                  "covariate CSV path (lag-pair)");
  sim->add_option("--panel-out", simo.panel_out, "panel CSV path (lag-panel)");
  sim->add_option("--proxies", simo.proxies, "panel width (lag-panel)")
      ->capture_default_str();
  sim->add_option("--proxy-noise-sd", simo.proxy_noise_sd,
                  "idiosyncratic noise s.d. (lag-panel)")
      ->capture_default_str();
  sim->add_option("--factor-ar", simo.factor_ar,
                  "factor AR coefficients (lag-panel)")
      ->delimiter(',');
  add_common(sim, simo.common);
  sim->callback([&] { run_simulate(simo); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "tsdiag: " << e.what() << "\n";
    return 2;
  } catch (const tsdiag::Error& e) {
    std::cerr << "tsdiag: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "tsdiag: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
