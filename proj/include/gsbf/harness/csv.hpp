#pragma once

// CSV persistence: comma separated, '.' decimals, LF line endings, header row,
// floating-point values with 17 significant digits.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsbf/harness/summary.hpp"
#include "gsbf/harness/trials.hpp"
#include "gsbf/trace.hpp"

namespace gsbf::harness {

inline constexpr const char* kRecordsHeader =
    "seed,sinr_db,method,total_w,transmit_w,compute_w,task_count,iterations,status,wall_ms";
inline constexpr const char* kTraceHeader = "iteration,omega,delta_g,displacement,residual_bound";
inline constexpr const char* kSummaryHeader =
    "sinr_db,method,trials,ok,total_w_mean,total_w_std,transmit_w_mean,transmit_w_std,task_count_mean,task_count_std";

/// 17 significant digits, so every double survives a write/read cycle.
inline std::string fmt_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class CsvError : public std::runtime_error {
 public:
  explicit CsvError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CsvError(path.string() + ": cannot open for writing");
  return out;
}

inline void close_checked(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw CsvError(path.string() + ": write failed");
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> f;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) f.push_back(cur);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  return f;
}

inline double parse_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw CsvError(where + ": not a number '" + s + "'");
  return v;
}

}  // namespace detail

inline std::string record_line(const TrialRecord& r) {
  return std::to_string(r.seed) + "," + fmt_double(r.sinr_db) + "," + r.method + "," + fmt_double(r.total_w) + "," +
         fmt_double(r.transmit_w) + "," + fmt_double(r.compute_w) + "," + std::to_string(r.task_count) + "," +
         std::to_string(r.iterations) + "," + r.status + "," + fmt_double(r.wall_ms);
}

inline void write_records_csv(const std::filesystem::path& path, const std::vector<TrialRecord>& records) {
  std::ofstream out = detail::open_out(path);
  out << kRecordsHeader << '\n';
  for (const TrialRecord& r : records) out << record_line(r) << '\n';
  detail::close_checked(out, path);
}

inline std::vector<TrialRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError(path.string() + ": cannot open");
  std::string line;
  if (!std::getline(in, line) || line != kRecordsHeader) throw CsvError(path.string() + ":1: unexpected header");
  std::vector<TrialRecord> out;
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const std::vector<std::string> f = detail::split(line);
    if (f.size() != 10) throw CsvError(where + ": expected 10 fields, got " + std::to_string(f.size()));
    TrialRecord r;
    r.seed = std::strtoull(f[0].c_str(), nullptr, 10);
    r.sinr_db = detail::parse_double(f[1], where);
    r.method = f[2];
    r.total_w = detail::parse_double(f[3], where);
    r.transmit_w = detail::parse_double(f[4], where);
    r.compute_w = detail::parse_double(f[5], where);
    r.task_count = static_cast<int>(detail::parse_double(f[6], where));
    r.iterations = static_cast<int>(detail::parse_double(f[7], where));
    r.status = f[8];
    r.wall_ms = detail::parse_double(f[9], where);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string trace_file_name(double sinr_db, std::uint64_t seed) {
  return "trace_sinr" + fmt_double(sinr_db) + "_seed" + std::to_string(seed) + ".csv";
}

/// One row per iterate, iterations + 1 rows; undefined quantities of row 0 are "nan".
inline std::string trace_csv(const ConvergenceTrace& trace) {
  std::string s = std::string(kTraceHeader) + "\n";
  for (const TraceRow& r : trace.rows)
    s += std::to_string(r.iteration) + "," + fmt_double(r.omega) + "," + fmt_double(r.delta_g) + "," +
         fmt_double(r.displacement) + "," + fmt_double(r.residual_bound) + "\n";
  return s;
}

inline void write_trace_csv(const std::filesystem::path& path, const ConvergenceTrace& trace) {
  std::ofstream out = detail::open_out(path);
  out << trace_csv(trace);
  detail::close_checked(out, path);
}

inline void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out = detail::open_out(path);
  out << kSummaryHeader << '\n';
  for (const SummaryRow& r : rows)
    out << fmt_double(r.sinr_db) << ',' << r.method << ',' << r.trials << ',' << r.ok << ','
        << fmt_double(r.total_w.mean) << ',' << fmt_double(r.total_w.stddev) << ',' << fmt_double(r.transmit_w.mean)
        << ',' << fmt_double(r.transmit_w.stddev) << ',' << fmt_double(r.task_count.mean) << ','
        << fmt_double(r.task_count.stddev) << '\n';
  detail::close_checked(out, path);
}

/// Writes records.csv, summary.csv, summary.txt and traces/trace_*.csv under `dir`.
inline void export_results(const TrialResults& res, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "traces", ec);
  if (ec) throw CsvError((dir / "traces").string() + ": " + ec.message());
  write_records_csv(dir / "records.csv", res.records);
  const std::vector<SummaryRow> rows = summarize(res.records);
  write_summary_csv(dir / "summary.csv", rows);
  {
    std::ofstream out = detail::open_out(dir / "summary.txt");
    out << format_summary(rows);
    detail::close_checked(out, dir / "summary.txt");
  }
  for (const TrialTrace& t : res.traces) write_trace_csv(dir / "traces" / trace_file_name(t.sinr_db, t.seed), t.trace);
}

}  // namespace gsbf::harness
