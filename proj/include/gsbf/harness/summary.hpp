#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gsbf/harness/config.hpp"
#include "gsbf/harness/trials.hpp"

namespace gsbf::harness {

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single value
};

inline Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return {NAN, NAN};
  double s = 0.0;
  for (double x : xs) s += x;
  m.mean = s / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double q = 0.0;
    for (double x : xs) q += (x - m.mean) * (x - m.mean);
    m.stddev = std::sqrt(q / static_cast<double>(xs.size() - 1));
  }
  return m;
}

struct SummaryRow {
  double sinr_db = 0.0;
  std::string method;
  int trials = 0;  // records in the group
  int ok = 0;      // records that enter the statistics
  Moments total_w;
  Moments transmit_w;
  Moments task_count;
};

/// Per (sinr_db, method) statistics over ok records, SINR ascending then canonical method order.
/// Values are summed in (seed, method) order so the result does not depend on record order.
inline std::vector<SummaryRow> summarize(std::vector<TrialRecord> records) {
  std::sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
    if (a.sinr_db != b.sinr_db) return a.sinr_db < b.sinr_db;
    if (method_rank(a.method) != method_rank(b.method)) return method_rank(a.method) < method_rank(b.method);
    if (a.method != b.method) return a.method < b.method;
    return a.seed < b.seed;
  });
  std::vector<SummaryRow> out;
  for (std::size_t i = 0; i < records.size();) {
    std::size_t j = i;
    std::vector<double> tot, tx, cnt;
    SummaryRow row;
    row.sinr_db = records[i].sinr_db;
    row.method = records[i].method;
    for (; j < records.size() && records[j].sinr_db == row.sinr_db && records[j].method == row.method; ++j) {
      ++row.trials;
      if (!records[j].ok()) continue;
      ++row.ok;
      tot.push_back(records[j].total_w);
      tx.push_back(records[j].transmit_w);
      cnt.push_back(records[j].task_count);
    }
    row.total_w = moments(tot);
    row.transmit_w = moments(tx);
    row.task_count = moments(cnt);
    out.push_back(std::move(row));
    i = j;
  }
  return out;
}

inline const SummaryRow* find_row(const std::vector<SummaryRow>& rows, double sinr_db, const std::string& method) {
  for (const SummaryRow& r : rows)
    if (r.sinr_db == sinr_db && r.method == method) return &r;
  return nullptr;
}

/// Aligned text table.
inline std::string format_summary(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%8s  %-10s %6s  %21s  %21s  %17s\n", "sinr_db", "method", "ok", "total_w (mean/std)",
                "transmit_w (mean/std)", "tasks (mean/std)");
  os << buf;
  for (const SummaryRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%8.2f  %-10s %2d/%-3d  %10.4f %10.4f  %10.4f %10.4f  %8.2f %8.2f\n", r.sinr_db,
                  r.method.c_str(), r.ok, r.trials, r.total_w.mean, r.total_w.stddev, r.transmit_w.mean,
                  r.transmit_w.stddev, r.task_count.mean, r.task_count.stddev);
    os << buf;
  }
  return os.str();
}

}  // namespace gsbf::harness
