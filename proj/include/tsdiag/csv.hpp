#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tsdiag/errors.hpp"
#include "tsdiag/pca.hpp"
#include "tsdiag/series.hpp"

namespace tsdiag {

/// How strictly the year axis is enforced. A response must be gap-free; a
/// panel may skip years, which are re-inserted as all-missing rows so the
/// axis stays contiguous.
enum class CsvRole { response, panel };

/// One parsed (or to-be-written) file: a contiguous year axis plus one value
/// vector per named column. `values[c][r]` is column c at years[r].
struct CsvTable {
  std::string path;
  std::vector<std::string> columns;
  std::vector<int> years;
  std::vector<std::vector<double>> values;
  std::size_t rows_read = 0;      // data rows present in the file
  std::size_t missing_count = 0;  // NA/empty cells plus masked gap years

  std::size_t n_rows() const { return years.size(); }
  std::size_t n_columns() const { return columns.size(); }

  TimeSeries to_series(std::size_t column = 0) const {
    if (column >= columns.size())
      throw InvalidArgument("CsvTable: column index out of range");
    TimeSeries s;
    s.start_time = years.empty() ? 0 : years.front();
    s.values = values[column];
    return s;
  }

  TimeSeries to_series(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
      if (columns[c] == name) return to_series(c);
    throw InvalidArgument("CsvTable: no column named " + name);
  }

  ProxyPanel to_panel() const {
    ProxyPanel panel;
    panel.start_time = years.empty() ? 0 : years.front();
    panel.proxy_ids = columns;
    panel.values.resize(static_cast<Eigen::Index>(n_rows()),
                        static_cast<Eigen::Index>(n_columns()));
    for (std::size_t c = 0; c < n_columns(); ++c)
      for (std::size_t r = 0; r < n_rows(); ++r)
        panel.values(static_cast<Eigen::Index>(r),
                     static_cast<Eigen::Index>(c)) = values[c][r];
    return panel;
  }
};

/// Shortest decimal form with 15 significant digits; what both CSV and JSON
/// emitters use, so a load/save cycle is the identity on such payloads.
inline std::string format_number(double v) {
  if (is_missing(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    std::size_t b = f.find_first_not_of(" \t");
    std::size_t e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

}  // namespace detail

/// Reads `year,<name>...` with strictly increasing integer years. "NA" or an
/// empty cell is missing. Row numbers in errors count data rows from 1.
inline CsvTable load_csv(const std::string& path, CsvRole role) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  const auto fail = [&](std::size_t row, const std::string& what) {
    throw ParseError(path + ": row " + std::to_string(row) + ": " + what);
  };

  CsvTable table;
  table.path = path;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header[0] != "year")
    throw ParseError(path + ": header must start with 'year' and name at "
                            "least one value column");
  table.columns.assign(header.begin() + 1, header.end());
  table.values.resize(table.columns.size());

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      fail(row, "expected " + std::to_string(header.size()) + " fields, got " +
                    std::to_string(fields.size()));

    char* end = nullptr;
    const long year = std::strtol(fields[0].c_str(), &end, 10);
    if (fields[0].empty() || *end != '\0')
      fail(row, "column 1: year '" + fields[0] + "' is not an integer");
    if (!table.years.empty()) {
      const int prev = table.years.back();
      if (year <= prev)
        fail(row, "years must be strictly increasing (" +
                      std::to_string(year) + " after " + std::to_string(prev) +
                      ")");
      if (year != prev + 1) {
        if (role == CsvRole::response)
          fail(row, "year gap (" + std::to_string(year) + " after " +
                        std::to_string(prev) + ")");
        for (int y = prev + 1; y < year; ++y) {
          table.years.push_back(y);
          for (auto& col : table.values) col.push_back(kMissing);
          table.missing_count += table.columns.size();
        }
      }
    }
    table.years.push_back(static_cast<int>(year));

    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      const std::string& cell = fields[c + 1];
      if (cell.empty() || cell == "NA") {
        table.values[c].push_back(kMissing);
        ++table.missing_count;
        continue;
      }
      const double v = std::strtod(cell.c_str(), &end);
      if (*end != '\0')
        fail(row, "column " + std::to_string(c + 2) + ": '" + cell +
                      "' is not numeric");
      table.values[c].push_back(v);
    }
  }
  if (row == 0) throw ParseError(path + ": no data rows");
  table.rows_read = row;
  return table;
}

inline void save_csv(std::ostream& out, const CsvTable& table) {
  out << "year";
  for (const auto& name : table.columns) out << ',' << name;
  out << '\n';
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    out << table.years[r];
    for (std::size_t c = 0; c < table.n_columns(); ++c)
      out << ',' << format_number(table.values[c][r]);
    out << '\n';
  }
}

inline void save_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open file for writing");
  save_csv(out, table);
}

inline CsvTable table_from_series(const TimeSeries& series,
                                  const std::string& name) {
  CsvTable table;
  table.columns = {name};
  table.values = {series.values};
  for (std::size_t i = 0; i < series.size(); ++i)
    table.years.push_back(series.start_time + static_cast<int>(i));
  return table;
}

inline CsvTable table_from_panel(const ProxyPanel& panel) {
  CsvTable table;
  table.columns = panel.proxy_ids;
  table.values.resize(panel.n_proxies());
  for (std::size_t c = 0; c < panel.n_proxies(); ++c) {
    table.values[c].resize(panel.n_years());
    for (std::size_t r = 0; r < panel.n_years(); ++r)
      table.values[c][r] = panel.values(static_cast<Eigen::Index>(r),
                                        static_cast<Eigen::Index>(c));
  }
  for (std::size_t r = 0; r < panel.n_years(); ++r)
    table.years.push_back(panel.start_time + static_cast<int>(r));
  return table;
}

}  // namespace tsdiag
