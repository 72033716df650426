#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "gsbf/types.hpp"

namespace gsbf {

/// One row per Stage-1 iterate. Row 0 is the starting point; row i >= 1 describes
/// the step v^{i-1} -> v^i taken with the weights stored in row i-1.
struct TraceRow {
  static constexpr double kNone = std::numeric_limits<double>::quiet_NaN();

  int iteration = 0;
  double omega = 0.0;              // log-sum objective at v^i
  double j = 0.0;                  // J(v^i); equals omega since every iterate is feasible
  double delta_g = kNone;          // model reduction of the step
  double displacement = kNone;     // ||v^i - v^{i-1}||
  double residual_bound = kNone;   // displacement bound on the optimality residual
  double weight_change = kNone;    // ||w^i - w^{i-1}||_1
  RVector weights;                 // w^i, the weights of the next subproblem
  double wall_seconds = 0.0;       // time spent producing this row
  bool feasible = true;            // v^i passed validation
};

struct ConvergenceTrace {
  std::vector<TraceRow> rows;
  bool converged = false;  // stopped on the weight-change test rather than iter_max

  int iterations() const { return rows.empty() ? 0 : static_cast<int>(rows.size()) - 1; }
  bool empty() const { return rows.empty(); }
  const TraceRow& back() const { return rows.back(); }
};

}  // namespace gsbf
