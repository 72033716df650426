#pragma once

// Exhaustive search over task supports for desk-scale instances.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "gsbf/conic/builders.hpp"
#include "gsbf/conic/solver.hpp"
#include "gsbf/netmodel.hpp"
#include "gsbf/task_selection.hpp"

namespace gsbf {

inline constexpr int kOracleMaxTasks = 12;

/// Every support (as a selection) in increasing bitmask order, bit g = flat task g.
/// With `prune`, supports leaving some user unserved are skipped.
inline std::vector<TaskSelection> enumerate_supports(int num_bs, int num_users, bool prune = true) {
  if (num_bs < 1 || num_users < 1) throw std::invalid_argument("enumerate_supports: empty network");
  const int NK = num_bs * num_users;
  if (NK > kOracleMaxTasks)
    throw std::invalid_argument("enumerate_supports: N*K = " + std::to_string(NK) + " exceeds the limit of " +
                                std::to_string(kOracleMaxTasks));
  std::vector<TaskSelection> out;
  for (std::uint32_t mask = 0; mask < (1u << NK); ++mask) {
    TaskSelection s = TaskSelection::none(num_bs, num_users);
    for (int g = 0; g < NK; ++g)
      if (mask & (1u << g)) s.set(task_at(g, num_users), true);
    if (prune && !s.covers_all_users()) continue;
    out.push_back(std::move(s));
  }
  return out;
}

struct OracleOptions {
  double solver_tol = conic::kDefaultSolverTol;
  double zero_tol = kDefaultZeroTol;
  int workers = 1;
  bool prune = true;
  double tie_rel = 1e-12;  // totals this close (relative) fall through to the cardinality/lex tie-break
};

struct OracleResult {
  TaskSelection support;
  BeamformingSolution beam;
  PowerBreakdown power;
  double total_w = std::numeric_limits<double>::infinity();
  int enumerated = 0;
  int feasible = 0;
  int failed = 0;  // solver breakdowns, excluded from the minimum
};

namespace detail {

struct PatternOutcome {
  conic::SolveStatus status = conic::SolveStatus::failure;
  std::optional<BeamformingSolution> beam;
  PowerBreakdown power;
};

/// Smaller total, then fewer tasks, then lexicographically smaller sorted task list.
inline bool better_support(double total_a, const TaskSelection& a, double total_b, const TaskSelection& b,
                           double tie_rel) {
  if (std::abs(total_a - total_b) > tie_rel * std::max(1.0, std::min(std::abs(total_a), std::abs(total_b))))
    return total_a < total_b;
  if (a.count() != b.count()) return a.count() < b.count();
  std::vector<int> fa, fb;
  for (const TaskId& t : a.tasks()) fa.push_back(flat_index(t, a.num_users));
  for (const TaskId& t : b.tasks()) fb.push_back(flat_index(t, b.num_users));
  return fa < fb;
}

}  // namespace detail

/// Global minimum of transmit plus compute power over all supports.
inline OracleResult oracle_min_power(const ChannelRealization& ch, const NetworkConfig& cfg,
                                     const OracleOptions& opt = {}) {
  const std::vector<TaskSelection> supports = enumerate_supports(cfg.num_bs, cfg.num_users, opt.prune);
  std::vector<detail::PatternOutcome> outcomes(supports.size());

  auto solve_one = [&](std::size_t i) {
    const conic::SolveResult r =
        conic::solve(conic::build_refinement(conic::inactive_tasks(supports[i]), ch, cfg), opt.solver_tol);
    detail::PatternOutcome& o = outcomes[i];
    o.status = r.status;
    if (!r.has_primal()) return;
    BeamformingSolution v(cfg.num_bs, cfg.num_users, cfg.antennas, opt.zero_tol);
    for (int g = 0; g < cfg.num_tasks(); ++g) v.set_group(g, r.beam->group(g));
    o.power = power_breakdown(v, supports[i], cfg);
    o.beam = std::move(v);
  };

  const int workers = std::max(1, std::min<int>(opt.workers, static_cast<int>(supports.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < supports.size(); ++i) solve_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < supports.size();) solve_one(i);
      });
    for (std::thread& t : pool) t.join();
  }

  // Reduction in enumeration order, independent of completion order.
  OracleResult best;
  best.enumerated = static_cast<int>(supports.size());
  for (std::size_t i = 0; i < supports.size(); ++i) {
    const detail::PatternOutcome& o = outcomes[i];
    if (o.status == conic::SolveStatus::failure) ++best.failed;
    if (!o.beam) continue;
    ++best.feasible;
    if (best.feasible == 1 ||
        detail::better_support(o.power.total_w, supports[i], best.total_w, best.support, opt.tie_rel)) {
      best.support = supports[i];
      best.beam = *o.beam;
      best.power = o.power;
      best.total_w = o.power.total_w;
    }
  }
  if (best.feasible == 0) throw InstanceInfeasible("oracle: no feasible support");
  return best;
}

}  // namespace gsbf
