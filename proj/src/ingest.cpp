#include "matcpd/ingest.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <vector>

namespace matcpd {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail_line(const std::string& origin, std::size_t line,
                            const std::string& what) {
  throw Error(errc::invalid_data,
              origin + ": line " + std::to_string(line) + ": " + what);
}

Eigen::Index parse_index(std::string_view field, const std::string& origin,
                         std::size_t line, const char* name) {
  field = trim(field);
  Eigen::Index v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || v < 1)
    fail_line(origin, line,
              std::string("invalid ") + name + " '" + std::string(field) +
                  "' (expected a positive integer)");
  return v;
}

double parse_value(std::string_view field, const std::string& origin, std::size_t line) {
  field = trim(field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    fail_line(origin, line, "invalid x '" + std::string(field) + "'");
  if (!std::isfinite(v))
    fail_line(origin, line, "non-finite x '" + std::string(field) + "'");
  return v;
}

std::string cell_name(Eigen::Index t, Eigen::Index i, Eigen::Index j) {
  return "(t=" + std::to_string(t) + ",i=" + std::to_string(i) + ",j=" +
         std::to_string(j) + ")";
}

}  // namespace

MatrixSeriesXd parse_long_csv(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line))
    throw Error(errc::invalid_data, origin + ": empty input");
  ++lineno;
  if (trim(line) != "t,i,j,x")
    throw Error(errc::schema, origin + ": line 1: expected header 't,i,j,x', got '" +
                                  std::string(trim(line)) + "'");

  struct Rec {
    Eigen::Index t, i, j;
    double x;
    std::size_t line;
  };
  std::vector<Rec> recs;
  Eigen::Index max_t = 0, max_i = 0, max_j = 0;

  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::string_view rest(line);
    std::string_view fields[4];
    int nf = 0;
    while (nf < 3) {
      const std::size_t comma = rest.find(',');
      if (comma == std::string_view::npos) break;
      fields[nf++] = rest.substr(0, comma);
      rest = rest.substr(comma + 1);
    }
    if (nf != 3 || rest.find(',') != std::string_view::npos)
      fail_line(origin, lineno, "expected 4 comma-separated fields");
    fields[3] = rest;
    Rec r;
    r.t = parse_index(fields[0], origin, lineno, "t");
    r.i = parse_index(fields[1], origin, lineno, "i");
    r.j = parse_index(fields[2], origin, lineno, "j");
    r.x = parse_value(fields[3], origin, lineno);
    r.line = lineno;
    max_t = std::max(max_t, r.t);
    max_i = std::max(max_i, r.i);
    max_j = std::max(max_j, r.j);
    recs.push_back(r);
  }
  if (recs.empty()) throw Error(errc::invalid_data, origin + ": no data rows");

  const Eigen::Index n = max_t, p1 = max_i, p2 = max_j;
  if (static_cast<double>(n) * static_cast<double>(p1) * static_cast<double>(p2) > 2e8)
    throw Error(errc::invalid_data,
                origin + ": inferred dimensions N=" + std::to_string(n) + ", p1=" +
                    std::to_string(p1) + ", p2=" + std::to_string(p2) +
                    " are implausibly large for " + std::to_string(recs.size()) +
                    " rows");
  MatrixSeriesXd x(p1, p2, n);
  std::vector<std::size_t> seen_at(static_cast<std::size_t>(n * p1 * p2), 0);
  for (const Rec& r : recs) {
    const auto flat = static_cast<std::size_t>(
        (r.t - 1) * p1 * p2 + (r.j - 1) * p1 + (r.i - 1));
    if (seen_at[flat] != 0)
      throw Error(errc::schema,
                  origin + ": duplicate cell " + cell_name(r.t, r.i, r.j) + " at line " +
                      std::to_string(r.line) + " (first at line " +
                      std::to_string(seen_at[flat]) + ")");
    seen_at[flat] = r.line;
    x.flat()((r.j - 1) * p1 + (r.i - 1), r.t - 1) = r.x;
  }

  std::size_t missing = 0;
  std::string examples;
  for (Eigen::Index t = 1; t <= n && missing <= 10; ++t)
    for (Eigen::Index i = 1; i <= p1 && missing <= 10; ++i)
      for (Eigen::Index j = 1; j <= p2 && missing <= 10; ++j) {
        const auto flat =
            static_cast<std::size_t>((t - 1) * p1 * p2 + (j - 1) * p1 + (i - 1));
        if (seen_at[flat] == 0) {
          ++missing;
          if (missing <= 10) {
            if (!examples.empty()) examples += ", ";
            examples += cell_name(t, i, j);
          }
        }
      }
  if (missing > 0) {
    const auto expected = static_cast<std::size_t>(n * p1 * p2);
    throw Error(errc::schema,
                origin + ": incomplete series for inferred dimensions N=" +
                    std::to_string(n) + ", p1=" + std::to_string(p1) + ", p2=" +
                    std::to_string(p2) + " (" + std::to_string(recs.size()) + " of " +
                    std::to_string(expected) + " cells); first missing: " + examples +
                    (missing > 10 ? ", ..." : ""));
  }
  return x;
}

MatrixSeriesXd read_long_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(errc::invalid_data, path + ": cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_long_csv(buf.str(), path);
}

std::string format_long_csv(const MatrixSeriesXd& x) {
  std::string out = "t,i,j,x\n";
  char num[64];
  for (Eigen::Index t = 1; t <= x.n(); ++t)
    for (Eigen::Index i = 1; i <= x.p1(); ++i)
      for (Eigen::Index j = 1; j <= x.p2(); ++j) {
        std::snprintf(num, sizeof num, "%.17g", x.flat()((j - 1) * x.p1() + (i - 1), t - 1));
        out += std::to_string(t);
        out += ',';
        out += std::to_string(i);
        out += ',';
        out += std::to_string(j);
        out += ',';
        out += num;
        out += '\n';
      }
  return out;
}

void write_long_csv(const std::string& path, const MatrixSeriesXd& x) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(errc::invalid_data, path + ": cannot open for writing");
  out << format_long_csv(x);
  if (!out) throw Error(errc::invalid_data, path + ": write failed");
}

}  // namespace matcpd
