#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "clusteriv/estimators.hpp"

namespace clusteriv {

enum class MissingPolicy { error, drop_row };

struct InputSpec {
  std::string path;
  std::string outcome_col;
  std::string treatment_col;
  std::string instrument_col;
  std::string cluster_col;
  std::vector<std::string> covariate_cols;
  MissingPolicy missing_policy = MissingPolicy::error;

  void validate() const {
    std::set<std::string> names = {outcome_col, treatment_col, instrument_col,
                                   cluster_col};
    for (const auto& c : covariate_cols) names.insert(c);
    if (names.size() != 4 + covariate_cols.size())
      throw ParseError("InputSpec: column names must be distinct");
  }
};

namespace detail {

// RFC 4180 record reader: quoted fields, embedded commas/quotes/newlines.
inline bool read_record(std::istream& in, std::vector<std::string>& fields,
                        std::size_t& line_no) {
  fields.clear();
  std::string field;
  bool in_quotes = false, any = false;
  int ch;
  while ((ch = in.get()) != EOF) {
    any = true;
    char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line_no;
        field += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c == '\r') {
      // swallow; record ends at the \n
    } else if (c == '\n') {
      ++line_no;
      fields.push_back(field);
      return true;
    } else {
      field += c;
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted field at end of file");
  if (any) {
    fields.push_back(field);
    return true;
  }
  return false;
}

inline double parse_number(const std::string& s, std::size_t line,
                           const std::string& col) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line) + ", column " + col +
                     ": not a number: '" + s + "'");
  }
  if (pos != s.size())
    throw ParseError("line " + std::to_string(line) + ", column " + col +
                     ": trailing characters in '" + s + "'");
  return v;
}

}  // namespace detail

inline Dataset load_csv_stream(std::istream& in, const InputSpec& spec) {
  spec.validate();
  std::size_t line_no = 1;
  std::vector<std::string> header;
  if (!detail::read_record(in, header, line_no))
    throw ParseError("empty file: no header row");

  auto col_index = [&](const std::string& name) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    throw ParseError("column '" + name + "' not found in header");
  };
  const int jy = col_index(spec.outcome_col);
  const int jd = col_index(spec.treatment_col);
  const int jz = col_index(spec.instrument_col);
  const int jc = col_index(spec.cluster_col);
  std::vector<int> jx;
  for (const auto& c : spec.covariate_cols) jx.push_back(col_index(c));

  std::vector<double> y, d, z;
  std::vector<std::vector<double>> x(jx.size());
  std::vector<std::string> labels;
  std::vector<std::string> fields;
  std::size_t row_line;
  while (row_line = line_no, detail::read_record(in, fields, line_no)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != header.size())
      throw ParseError("line " + std::to_string(row_line) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    bool missing = false;
    auto needed = [&](int j) { return fields[j].empty() ? (missing = true, true) : false; };
    needed(jy);
    needed(jd);
    needed(jz);
    needed(jc);
    for (int j : jx) needed(j);
    if (missing) {
      if (spec.missing_policy == MissingPolicy::drop_row) continue;
      throw MissingValue("line " + std::to_string(row_line) +
                         ": missing value");
    }
    auto binary = [&](int j, const std::string& col) {
      const double v = detail::parse_number(fields[j], row_line, col);
      if (v != 0.0 && v != 1.0)
        throw NonBinaryColumn("line " + std::to_string(row_line) +
                              ", column " + col + ": value '" + fields[j] +
                              "' is not 0/1");
      return v;
    };
    y.push_back(detail::parse_number(fields[jy], row_line, spec.outcome_col));
    d.push_back(binary(jd, spec.treatment_col));
    z.push_back(binary(jz, spec.instrument_col));
    labels.push_back(fields[jc]);
    for (std::size_t k = 0; k < jx.size(); ++k)
      x[k].push_back(
          detail::parse_number(fields[jx[k]], row_line, spec.covariate_cols[k]));
  }
  if (y.empty()) throw ParseError("no data rows");

  Dataset data;
  const auto n = static_cast<Eigen::Index>(y.size());
  data.y = Eigen::Map<Eigen::VectorXd>(y.data(), n);
  data.d = Eigen::Map<Eigen::VectorXd>(d.data(), n);
  data.z = Eigen::Map<Eigen::VectorXd>(z.data(), n);
  if (!jx.empty()) {
    data.x.resize(n, static_cast<Eigen::Index>(jx.size()));
    for (std::size_t k = 0; k < jx.size(); ++k)
      data.x.col(static_cast<Eigen::Index>(k)) =
          Eigen::Map<Eigen::VectorXd>(x[k].data(), n);
  }
  data.covariate_names = spec.covariate_cols;
  data.idx = ClusterIndex::from_labels(labels);
  data.validate();
  return data;
}

inline Dataset load_csv(const InputSpec& spec) {
  std::ifstream in(spec.path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + spec.path);
  return load_csv_stream(in, spec);
}

}  // namespace clusteriv
