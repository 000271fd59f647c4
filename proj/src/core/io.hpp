#pragma once

// Versioned text artifacts. Every file starts with its format tag and every
// reader rejects tags it does not know. Numbers are written with %.17g so a
// double survives a write/read round trip bit-exactly.
//
//   plastisim-actions/1   line 1 tag; line 2 "T d"; T rows of d numbers
//   plastisim-dump/1      line 1 tag; line 2 "n step"; n rows "x y z vx vy vz"
//   plastisim-metrics/1   line 1 "# tag"; line 2 CSV header; data rows
//   plastisim-report/1    line 1 "format=tag"; "key=value" lines

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "state.hpp"

namespace plastisim {

inline constexpr const char* kActionsFormat = "plastisim-actions/1";
inline constexpr const char* kDumpFormat = "plastisim-dump/1";
inline constexpr const char* kMetricsFormat = "plastisim-metrics/1";
inline constexpr const char* kReportFormat = "plastisim-report/1";

namespace detail {

inline std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_num(const std::string& tok, const char* what) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    fail(ErrorCode::Io, std::string("malformed number \"") + tok + "\" in " + what);
  return v;
}

inline std::string read_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line))
    fail(ErrorCode::Io, std::string("truncated ") + what);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

inline void expect_tag(std::istream& in, const std::string& want,
                       const char* what) {
  std::string got = read_line(in, what);
  if (got != want)
    fail(ErrorCode::Io, std::string("unsupported ") + what + " format \"" + got +
                            "\" (expected " + want + ")");
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

// ------------------------------------------------------------------- actions

template <class T>
void save_actions(std::ostream& out, const std::vector<std::vector<T>>& a) {
  size_t d = a.empty() ? 0 : a[0].size();
  out << kActionsFormat << "\n" << a.size() << " " << d << "\n";
  for (const auto& row : a) {
    if (row.size() != d) fail(ErrorCode::Invalid, "ragged action matrix");
    for (size_t i = 0; i < d; i++)
      out << (i ? " " : "") << detail::g17(double(row[i]));
    out << "\n";
  }
}

inline std::vector<std::vector<double>> load_actions(std::istream& in) {
  detail::expect_tag(in, kActionsFormat, "actions");
  std::istringstream hdr(detail::read_line(in, "actions header"));
  long steps = -1, dim = -1;
  hdr >> steps >> dim;
  if (!hdr || steps < 0 || dim < 0)
    fail(ErrorCode::Io, "malformed actions header (want \"T d\")");
  std::vector<std::vector<double>> a(steps, std::vector<double>(dim));
  for (long t = 0; t < steps; t++) {
    std::istringstream row(detail::read_line(in, "actions row"));
    for (long i = 0; i < dim; i++) {
      std::string tok;
      row >> tok;
      if (tok.empty()) fail(ErrorCode::Io, "short actions row");
      a[t][i] = detail::parse_num(tok, "actions");
    }
  }
  return a;
}

// --------------------------------------------------------------------- dumps

template <class T>
void save_dump(std::ostream& out, const Particles<T>& ps, int step) {
  out << kDumpFormat << "\n" << ps.size() << " " << step << "\n";
  for (size_t p = 0; p < ps.size(); p++) {
    const auto& x = ps.x[p];
    const auto& v = ps.v[p];
    out << detail::g17(double(x.x)) << " " << detail::g17(double(x.y)) << " "
        << detail::g17(double(x.z)) << " " << detail::g17(double(v.x)) << " "
        << detail::g17(double(v.y)) << " " << detail::g17(double(v.z)) << "\n";
  }
}

struct DumpData {
  int step = 0;
  std::vector<Vec3<double>> x, v;
};

inline DumpData load_dump(std::istream& in) {
  detail::expect_tag(in, kDumpFormat, "dump");
  std::istringstream hdr(detail::read_line(in, "dump header"));
  long n = -1;
  DumpData d;
  hdr >> n >> d.step;
  if (!hdr || n < 0) fail(ErrorCode::Io, "malformed dump header (want \"n step\")");
  d.x.resize(n);
  d.v.resize(n);
  for (long p = 0; p < n; p++) {
    std::istringstream row(detail::read_line(in, "dump row"));
    double c[6];
    for (double& ci : c) {
      std::string tok;
      row >> tok;
      if (tok.empty()) fail(ErrorCode::Io, "short dump row");
      ci = detail::parse_num(tok, "dump");
    }
    d.x[p] = {c[0], c[1], c[2]};
    d.v[p] = {c[3], c[4], c[5]};
  }
  return d;
}

// --------------------------------------------------------------- metrics CSV

class MetricsWriter {
 public:
  MetricsWriter(std::ostream& out, const std::vector<std::string>& cols)
      : out_(out), ncols_(cols.size()) {
    out_ << "# " << kMetricsFormat << "\n";
    for (size_t i = 0; i < cols.size(); i++) out_ << (i ? "," : "") << cols[i];
    out_ << "\n";
  }
  void row(const std::vector<double>& vals) {
    if (vals.size() != ncols_) fail(ErrorCode::Invalid, "metrics row width mismatch");
    for (size_t i = 0; i < vals.size(); i++)
      out_ << (i ? "," : "") << detail::g17(vals[i]);
    out_ << "\n";
  }

 private:
  std::ostream& out_;
  size_t ncols_;
};

struct MetricsData {
  std::vector<std::string> cols;
  std::vector<std::vector<double>> rows;
};

inline MetricsData load_metrics(std::istream& in) {
  detail::expect_tag(in, std::string("# ") + kMetricsFormat, "metrics");
  MetricsData m;
  m.cols = detail::split(detail::read_line(in, "metrics header"), ',');
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> toks = detail::split(line, ',');
    if (toks.size() != m.cols.size())
      fail(ErrorCode::Io, "metrics row width mismatch");
    std::vector<double> row(toks.size());
    for (size_t i = 0; i < toks.size(); i++)
      row[i] = detail::parse_num(toks[i], "metrics");
    m.rows.push_back(std::move(row));
  }
  return m;
}

// ------------------------------------------------------------ key=value report

inline void save_report(std::ostream& out,
                        const std::vector<std::pair<std::string, std::string>>& kv) {
  out << "format=" << kReportFormat << "\n";
  for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
}

inline std::vector<std::pair<std::string, std::string>> load_report(
    std::istream& in) {
  detail::expect_tag(in, std::string("format=") + kReportFormat, "report");
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::Io, "report line without '=': " + line);
    kv.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return kv;
}

inline std::string report_value(
    const std::vector<std::pair<std::string, std::string>>& kv,
    const std::string& key) {
  for (const auto& [k, v] : kv)
    if (k == key) return v;
  fail(ErrorCode::Io, "report is missing key \"" + key + "\"");
}

// ------------------------------------------------------------------ file io

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) fail(ErrorCode::Io, "short write to " + path);
}

template <class Fn>
void with_output_file(const std::string& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  fn(out);
  out.flush();
  if (!out) fail(ErrorCode::Io, "short write to " + path);
}

template <class Fn>
auto with_input_file(const std::string& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  return fn(in);
}

}  // namespace plastisim
