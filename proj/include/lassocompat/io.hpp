#pragma once

#include "lassocompat/core.hpp"
#include "lassocompat/designs.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace lassocompat {

using Json = nlohmann::ordered_json;

/// 17 significant digits: enough for a lossless double round trip.
inline std::string fmt17(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline double parse_double(const std::string& token) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    throw ParseError("not a number: '" + token + "'");
  }
  while (used < token.size() && std::isspace(static_cast<unsigned char>(token[used]))) ++used;
  if (used != token.size()) throw ParseError("not a number: '" + token + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

/// Comma-separated reals, e.g. "1,0.5,0".
inline Vector parse_vector(const std::string& text) {
  const auto parts = split(text, ',');
  Vector v(static_cast<int>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v[i] = parse_double(parts[i]);
  return v;
}

/// Comma-separated 1-based column indices, returned 0-based and sorted.
inline IndexSet parse_set(const std::string& text) {
  IndexSet s;
  if (text.empty()) return s;
  for (const std::string& part : split(text, ',')) {
    const double v = parse_double(part);
    if (v != std::floor(v) || v < 1) throw ParseError("bad column index '" + part + "'");
    s.push_back(static_cast<int>(v) - 1);
  }
  return normalize_set(s);
}

/// Headerless comma-separated matrix.
inline Matrix parse_matrix_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    for (const std::string& cell : split(line, ',')) row.push_back(parse_double(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError("ragged matrix: row " + std::to_string(rows.size() + 1) + " has " +
                       std::to_string(row.size()) + " entries");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("empty matrix");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

inline Matrix read_matrix_csv(const std::string& path) { return parse_matrix_csv(read_text_file(path)); }

inline std::string matrix_to_csv(const Matrix& m) {
  std::string out;
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += fmt17(m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

/// Index sets are written 1-based.
inline Json set_to_json(const IndexSet& s) {
  Json a = Json::array();
  for (int j : s) a.push_back(j + 1);
  return a;
}

inline Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw ParseError("expected an array of numbers");
  Vector v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

inline IndexSet set_from_json(const Json& j) {
  IndexSet s;
  for (const auto& e : j) {
    const int v = e.get<int>();
    if (v < 1) throw ParseError("column indices are 1-based");
    s.push_back(v - 1);
  }
  return normalize_set(s);
}

inline Json spec_to_json(const DesignSpec& spec) {
  Json j;
  j["family"] = std::string(family_name(spec.family));
  const DesignParams& q = spec.params;
  if (!q.rho.empty()) j["rho"] = q.rho;
  if (!q.c.empty()) j["c"] = q.c;
  if (!q.tau2.empty()) j["tau2"] = q.tau2;
  if (spec.family == Family::ChildParentGamma || spec.family == Family::ChildParentSym)
    j["theta"] = q.theta;
  if (!q.gamma.empty()) j["gamma"] = q.gamma;
  if (q.m0) j["m0"] = q.m0;
  if (spec.custom) {
    Json rows = Json::array();
    for (int r = 0; r < spec.custom->rows(); ++r) rows.push_back(to_json(spec.custom->row(r).transpose()));
    j["matrix"] = rows;
  }
  return j;
}

namespace detail {

inline std::vector<double> number_list(const Json& j, const char* key) {
  if (!j.contains(key)) return {};
  const Json& v = j.at(key);
  if (v.is_number()) return {v.get<double>()};
  return v.get<std::vector<double>>();
}

} // namespace detail

/// Inverse of spec_to_json. Scalars are accepted where lists are expected.
/// The gamma design takes either both weights or just gamma3.
inline DesignSpec spec_from_json(const Json& j) {
  const std::string name = j.at("family").get<std::string>();
  const auto fam = family_from_name(name);
  if (!fam) throw ParseError("unknown design family '" + name + "'");
  DesignSpec spec;
  spec.family = *fam;
  spec.params.rho = detail::number_list(j, "rho");
  spec.params.c = detail::number_list(j, "c");
  spec.params.tau2 = detail::number_list(j, "tau2");
  spec.params.gamma = detail::number_list(j, "gamma");
  if (j.contains("theta")) spec.params.theta = j.at("theta").get<double>();
  if (j.contains("m0")) spec.params.m0 = j.at("m0").get<int>();
  if (spec.family == Family::ChildParentGamma && spec.params.gamma.size() == 1)
    spec.params.gamma.push_back(1.0 - spec.params.gamma[0]);
  if (spec.family == Family::Custom) {
    if (!j.contains("matrix")) throw ParseError("custom design needs a 'matrix' entry");
    const Json& rows = j.at("matrix");
    Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != static_cast<std::size_t>(m.cols())) throw ParseError("ragged matrix");
      for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c].get<double>();
    }
    spec.custom = m;
  }
  return spec;
}

} // namespace lassocompat
