#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mlcore/core.hpp"

namespace mlcore {

struct CsvOptions {
  bool header = false;
  char delimiter = ',';
  // Column holding the target. Negative values count from the end (-1 = last);
  // nullopt reads every column as a feature.
  std::optional<long> label_column = -1;
};

/// Raw rectangular table, before it is split into samples and targets.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  Index columns = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// Lines and columns in errors are 1-based and count from the top of the
/// input, header included. Blank lines are skipped.
inline CsvTable read_csv_table(std::istream& in, const CsvOptions& opt = {}) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  bool header_pending = opt.header;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line, opt.delimiter);
    if (header_pending) {
      header_pending = false;
      for (auto f : fields) t.header.emplace_back(f);
      t.columns = fields.size();
      continue;
    }
    if (t.columns == 0) t.columns = fields.size();
    if (fields.size() != t.columns)
      throw ParseError("line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                           " fields, expected " + std::to_string(t.columns),
                       lineno);
    std::vector<double> row;
    row.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto v = detail::parse_number(fields[c]);
      if (!v)
        throw ParseError("non-numeric cell '" + std::string(fields[c]) + "' at row " + std::to_string(lineno) +
                             " column " + std::to_string(c + 1),
                         lineno, c + 1);
      row.push_back(*v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) throw ParseError("no data rows", lineno);
  return t;
}

inline CsvTable read_csv_table(const std::string& path, const CsvOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw InvalidData("cannot open '" + path + "'");
  return read_csv_table(in, opt);
}

/// Resolve the target column against the table width.
inline Index label_index(const CsvOptions& opt, Index columns) {
  const long c = *opt.label_column;
  const long resolved = c < 0 ? long(columns) + c : c;
  if (resolved < 0 || resolved >= long(columns))
    throw InvalidParameter("label column " + std::to_string(c) + " outside " + std::to_string(columns) + " columns");
  return Index(resolved);
}

inline LabeledDataset to_dataset(const CsvTable& t, const CsvOptions& opt = {}) {
  if (!opt.label_column) throw InvalidParameter("a labeled dataset needs a label column");
  if (t.columns < 2) throw InvalidData("need at least one feature column besides the label");
  const Index lc = label_index(opt, t.columns);
  RowMatrix x(Eigen::Index(t.rows.size()), Eigen::Index(t.columns - 1));
  Vector y(static_cast<Eigen::Index>(t.rows.size()));
  for (Index i = 0; i < t.rows.size(); ++i) {
    Eigen::Index j = 0;
    for (Index c = 0; c < t.columns; ++c) {
      if (c == lc) y[Eigen::Index(i)] = t.rows[i][c];
      else x(Eigen::Index(i), j++) = t.rows[i][c];
    }
  }
  return LabeledDataset(SampleMatrix(std::move(x)), std::move(y));
}

inline SampleMatrix to_samples(const CsvTable& t) {
  RowMatrix x(Eigen::Index(t.rows.size()), Eigen::Index(t.columns));
  for (Index i = 0; i < t.rows.size(); ++i)
    for (Index c = 0; c < t.columns; ++c) x(Eigen::Index(i), Eigen::Index(c)) = t.rows[i][c];
  return SampleMatrix(std::move(x));
}

inline LabeledDataset parse_csv(std::istream& in, const CsvOptions& opt = {}) {
  return to_dataset(read_csv_table(in, opt), opt);
}

inline LabeledDataset parse_csv(const std::string& path, const CsvOptions& opt = {}) {
  return to_dataset(read_csv_table(path, opt), opt);
}

inline LabeledDataset parse_csv_text(const std::string& text, const CsvOptions& opt = {}) {
  std::istringstream in(text);
  return parse_csv(in, opt);
}

/// Every column as a feature.
inline SampleMatrix parse_csv_samples(const std::string& path, const CsvOptions& opt = {}) {
  return to_samples(read_csv_table(path, opt));
}

}  // namespace mlcore
