#pragma once

// Three-stage group sparse beamforming:
//   1. proximal iteratively reweighted log-sum minimization (or one weighted l1,2 solve),
//   2. task ordering by priority and a scan for the shortest feasible prefix,
//   3. transmit-power refinement on the selected support.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsbf/conic/builders.hpp"
#include "gsbf/conic/solver.hpp"
#include "gsbf/diagnostics.hpp"
#include "gsbf/netmodel.hpp"
#include "gsbf/task_selection.hpp"
#include "gsbf/trace.hpp"

namespace gsbf {

enum class Stage2Search { linear, bisection };

inline std::string to_string(Stage2Search s) { return s == Stage2Search::linear ? "linear" : "bisection"; }

struct AlgorithmParams {
  double p = 100.0;
  double beta = 0.1;
  int iter_max = 25;
  double eps = 1e-5;
  double zero_tol = kDefaultZeroTol;
  double solver_tol = conic::kDefaultSolverTol;
  Stage2Search stage2_search = Stage2Search::linear;

  void validate() const {
    if (!(p > 0.0) || !(beta > 0.0) || iter_max < 1 || !(eps > 0.0) || !(zero_tol > 0.0) || !(solver_tol > 0.0))
      throw std::invalid_argument("AlgorithmParams: p, beta, iter_max, eps, zero_tol and solver_tol must be positive");
  }

  friend bool operator==(const AlgorithmParams&, const AlgorithmParams&) = default;
};

/// Stage-1 breakdown; carries the iterations completed before the failing solve.
class Stage1Failure : public SolverFailure {
 public:
  Stage1Failure(const std::string& what, ConvergenceTrace trace) : SolverFailure(what), trace_(std::move(trace)) {}
  const ConvergenceTrace& trace() const { return trace_; }

 private:
  ConvergenceTrace trace_;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Solves and maps statuses onto the error contract of the pipeline.
inline conic::SolveResult solve_or_throw(const conic::SocProgram& prog, double tol, const std::string& what) {
  conic::SolveResult r = conic::solve(prog, tol);
  if (r.status == conic::SolveStatus::infeasible) throw InstanceInfeasible(what + ": infeasible");
  if (!r.has_primal()) throw SolverFailure(what + ": " + r.message);
  return r;
}

inline BeamformingSolution with_zero_tol(const BeamformingSolution& v, double zero_tol) {
  BeamformingSolution out(v.num_bs(), v.num_users(), v.antennas(), zero_tol);
  for (int g = 0; g < v.num_groups(); ++g) out.set_group(g, v.group(g));
  return out;
}

}  // namespace detail

/// rho_nk = sqrt(P^c_nk / eta_n), BS-major.
inline RVector rho_weights(const NetworkConfig& cfg) {
  RVector rho(cfg.num_tasks());
  for (int n = 0; n < cfg.num_bs; ++n)
    for (int k = 0; k < cfg.num_users; ++k) rho[n * cfg.num_users + k] = std::sqrt(cfg.p_compute(n, k) / cfg.eta[n]);
  return rho;
}

/// w_nk = p rho_nk / (p ||v_nk|| + 1).
inline RVector update_weights(const BeamformingSolution& sol, const RVector& rho, double p) {
  if (!(p > 0.0)) throw std::invalid_argument("update_weights: p must be positive");
  if (rho.size() != sol.num_groups()) throw std::invalid_argument("update_weights: one rho per group");
  RVector w(sol.num_groups());
  for (int g = 0; g < sol.num_groups(); ++g) w[g] = p * rho[g] / (p * sol.group_norm(g) + 1.0);
  return w;
}

/// Coordinated-beamforming solution, used as the feasible starting point.
inline BeamformingSolution initial_point(const ChannelRealization& ch, const NetworkConfig& cfg,
                                         const AlgorithmParams& params) {
  const conic::SolveResult r = detail::solve_or_throw(conic::build_cb(ch, cfg), params.solver_tol, "initial point");
  return detail::with_zero_tol(*r.beam, params.zero_tol);
}

struct Stage1Result {
  BeamformingSolution v;
  ConvergenceTrace trace;
};

/// Proximal iteratively reweighted minimization of the log-sum objective.
/// `start` overrides the initial point (it must be the CB solution or another feasible point).
inline Stage1Result prox_irw(const ChannelRealization& ch, const NetworkConfig& cfg, const AlgorithmParams& params,
                             const std::optional<BeamformingSolution>& start = std::nullopt) {
  params.validate();
  auto t0 = detail::Clock::now();
  BeamformingSolution v = start ? detail::with_zero_tol(*start, params.zero_tol) : initial_point(ch, cfg, params);
  const RVector rho = rho_weights(cfg);
  const CertificateParams cert{rho.maxCoeff(), params.p, params.beta};
  const TaskSelection all = TaskSelection::all(cfg.num_bs, cfg.num_users);
  const ValidationTolerance vtol;

  ConvergenceTrace trace;
  TraceRow row0;
  row0.iteration = 0;
  row0.omega = row0.j = log_sum_objective(v, rho, params.p);
  row0.weights = RVector::Ones(cfg.num_tasks());
  row0.feasible = validate(v, all, ch, cfg, vtol).passed();
  row0.wall_seconds = detail::seconds_since(t0);
  trace.rows.push_back(row0);

  for (int i = 1; i <= params.iter_max; ++i) {
    t0 = detail::Clock::now();
    const RVector& w = trace.rows.back().weights;
    const conic::SolveResult r = conic::solve(conic::build_stage1(w, v, params.beta, ch, cfg), params.solver_tol);
    if (!r.has_primal())
      throw Stage1Failure("stage 1 iteration " + std::to_string(i) + ": " + conic::to_string(r.status) + " (" +
                              r.message + ")",
                          trace);
    const BeamformingSolution next = detail::with_zero_tol(*r.beam, params.zero_tol);

    TraceRow row;
    row.iteration = i;
    row.omega = row.j = log_sum_objective(next, rho, params.p);
    row.delta_g = model_reduction(v, next, w, params.beta);
    row.displacement = distance(v, next);
    row.residual_bound = residual_bound(row.displacement, cert);
    row.weights = update_weights(next, rho, params.p);
    row.weight_change = (row.weights - w).lpNorm<1>();
    row.feasible = validate(next, all, ch, cfg, vtol).passed();
    row.wall_seconds = detail::seconds_since(t0);
    trace.rows.push_back(std::move(row));
    v = next;
    if (trace.rows.back().weight_change <= params.eps) {
      trace.converged = true;
      break;
    }
  }
  return {std::move(v), std::move(trace)};
}

/// theta_nk = sqrt(||h_nk||^2 eta_n / P^c_nk) ||v_nk||; tasks with P^c = 0 get +inf.
inline RVector task_priorities(const BeamformingSolution& sol, const ChannelRealization& ch, const NetworkConfig& cfg) {
  RVector theta(cfg.num_tasks());
  for (int n = 0; n < cfg.num_bs; ++n)
    for (int k = 0; k < cfg.num_users; ++k) {
      const int g = n * cfg.num_users + k;
      const double pc = cfg.p_compute(n, k);
      theta[g] = pc > 0.0 ? std::sqrt(ch.h(n, k).squaredNorm() * cfg.eta[n] / pc) * sol.group_norm(g)
                          : std::numeric_limits<double>::infinity();
    }
  return theta;
}

/// Tasks by decreasing priority; ties keep BS-major (n, k) order.
inline std::vector<TaskId> priority_order(const RVector& theta, int num_users) {
  std::vector<int> idx(static_cast<std::size_t>(theta.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return theta[a] > theta[b]; });
  std::vector<TaskId> order;
  order.reserve(idx.size());
  for (int g : idx) order.push_back(task_at(g, num_users));
  return order;
}

struct Stage2Probe {
  int cut = 0;
  bool solved = false;  // false: rejected without a solve because some user was uncovered
  bool feasible = false;
  conic::SolveStatus status = conic::SolveStatus::infeasible;
};

/// Is the prefix of length `cut` feasible? Uncovered users make it infeasible without a solve.
inline Stage2Probe probe_cut(const std::vector<TaskId>& order, int cut, const ChannelRealization& ch,
                             const NetworkConfig& cfg, double solver_tol) {
  Stage2Probe pr;
  pr.cut = cut;
  const TaskSelection sel = TaskSelection::from_prefix(cfg.num_bs, cfg.num_users, order, cut);
  if (!sel.covers_all_users()) return pr;
  pr.solved = true;
  const conic::SolveResult r = conic::solve(conic::build_feasibility(conic::inactive_tasks(sel), ch, cfg), solver_tol);
  pr.status = r.status;
  pr.feasible = r.has_primal();
  return pr;
}

/// Shortest feasible prefix of the priority order, scanning cuts from `first_cut` (default K) upward.
inline TaskSelection select_tasks(const RVector& priorities, const ChannelRealization& ch, const NetworkConfig& cfg,
                                  const AlgorithmParams& params, std::vector<Stage2Probe>* probes = nullptr,
                                  int first_cut = -1) {
  const int NK = cfg.num_tasks();
  if (priorities.size() != NK) throw std::invalid_argument("select_tasks: one priority per task");
  const std::vector<TaskId> order = priority_order(priorities, cfg.num_users);
  const int lo_cut = std::clamp(first_cut < 0 ? cfg.num_users : first_cut, 0, NK);
  auto probe = [&](int cut) {
    Stage2Probe pr = probe_cut(order, cut, ch, cfg, params.solver_tol);
    if (probes) probes->push_back(pr);
    return pr;
  };
  auto finish = [&](int cut) { return TaskSelection::from_prefix(cfg.num_bs, cfg.num_users, order, cut); };

  if (params.stage2_search == Stage2Search::linear) {
    for (int t = lo_cut; t <= NK; ++t) {
      const Stage2Probe pr = probe(t);
      if (pr.feasible) return finish(t);
      if (t == NK && pr.status == conic::SolveStatus::failure)
        throw SolverFailure("stage 2: full-support feasibility solve failed");
    }
    throw InstanceInfeasible("stage 2: infeasible even with every task selected");
  }

  // Bisection on the monotone predicate "prefix t is feasible".
  const Stage2Probe full = probe(NK);
  if (!full.feasible) {
    if (full.status == conic::SolveStatus::failure) throw SolverFailure("stage 2: full-support feasibility solve failed");
    throw InstanceInfeasible("stage 2: infeasible even with every task selected");
  }
  int lo = lo_cut - 1;  // largest cut known (or assumed) infeasible
  int hi = NK;          // smallest cut known feasible
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    if (probe(mid).feasible)
      hi = mid;
    else
      lo = mid;
  }
  return finish(hi);
}

/// Minimum transmit power beamformer on the selected support.
inline BeamformingSolution refine(const TaskSelection& selection, const ChannelRealization& ch,
                                  const NetworkConfig& cfg, const AlgorithmParams& params) {
  const conic::SolveResult r = detail::solve_or_throw(
      conic::build_refinement(conic::inactive_tasks(selection), ch, cfg), params.solver_tol, "refinement");
  return detail::with_zero_tol(*r.beam, params.zero_tol);
}

struct StageTimings {
  double stage1 = 0.0;
  double stage2 = 0.0;
  double stage3 = 0.0;
  double total() const { return stage1 + stage2 + stage3; }
};

struct PipelineResult {
  std::string method;
  std::optional<BeamformingSolution> stage1;  // absent for CB
  ConvergenceTrace trace;                      // empty unless log-sum Stage 1 ran
  RVector priorities;
  std::vector<Stage2Probe> probes;
  TaskSelection selection;
  BeamformingSolution refined;
  PowerBreakdown power;
  ConstraintReport report;
  StageTimings timings;
  std::string status = "ok";

  int task_count() const { return selection.count(); }
  int iterations() const { return trace.iterations(); }
  bool ok() const { return status == "ok"; }
};

namespace detail {

/// Stages 2 and 3 shared by both sparse methods. If the refinement of a cut
/// disagrees with its feasibility probe (a borderline instance), the scan resumes past it.
inline void stages_2_3(PipelineResult& out, const ChannelRealization& ch, const NetworkConfig& cfg,
                       const AlgorithmParams& params) {
  auto t0 = Clock::now();
  out.priorities = task_priorities(*out.stage1, ch, cfg);
  int first_cut = -1;
  for (;;) {
    t0 = Clock::now();
    out.selection = select_tasks(out.priorities, ch, cfg, params, &out.probes, first_cut);
    out.timings.stage2 += seconds_since(t0);
    t0 = Clock::now();
    try {
      out.refined = refine(out.selection, ch, cfg, params);
      out.timings.stage3 += seconds_since(t0);
      return;
    } catch (const InstanceInfeasible&) {
      out.timings.stage3 += seconds_since(t0);
      if (out.selection.count() >= cfg.num_tasks()) throw;
      first_cut = out.selection.count() + 1;
    }
  }
}

inline void finalize(PipelineResult& out, const ChannelRealization& ch, const NetworkConfig& cfg) {
  out.power = power_breakdown(out.refined, out.selection, cfg);
  out.report = validate(out.refined, out.selection, ch, cfg, ValidationTolerance{});
  out.status = out.report.passed() ? "ok" : "validation_failed";
}

template <class F>
auto annotate(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Stage1Failure&) {
    throw;
  } catch (const InstanceInfeasible& e) {
    throw InstanceInfeasible(stage + ": " + e.what());
  } catch (const SolverFailure& e) {
    throw SolverFailure(stage + ": " + e.what());
  }
}

}  // namespace detail

/// Log-sum three-stage pipeline. `cb_start` may carry a precomputed CB solution.
inline PipelineResult run_three_stage(const ChannelRealization& ch, const NetworkConfig& cfg,
                                      const AlgorithmParams& params,
                                      const std::optional<BeamformingSolution>& cb_start = std::nullopt) {
  PipelineResult out;
  out.method = "logsum";
  auto t0 = detail::Clock::now();
  Stage1Result s1 = detail::annotate("logsum stage 1", [&] { return prox_irw(ch, cfg, params, cb_start); });
  out.timings.stage1 = detail::seconds_since(t0);
  out.stage1 = std::move(s1.v);
  out.trace = std::move(s1.trace);
  detail::annotate("logsum stages 2-3", [&] { detail::stages_2_3(out, ch, cfg, params); });
  detail::finalize(out, ch, cfg);
  return out;
}

/// Coordinated beamforming: every task is executed, transmit power minimized.
inline PipelineResult run_cb(const ChannelRealization& ch, const NetworkConfig& cfg, const AlgorithmParams& params) {
  PipelineResult out;
  out.method = "cb";
  auto t0 = detail::Clock::now();
  out.selection = TaskSelection::all(cfg.num_bs, cfg.num_users);
  out.refined = detail::annotate("cb", [&] { return initial_point(ch, cfg, params); });
  out.timings.stage3 = detail::seconds_since(t0);
  detail::finalize(out, ch, cfg);
  return out;
}

/// Same Stages 2-3 as the log-sum pipeline after one weighted l1,2 solve.
inline PipelineResult run_mixed_l12(const ChannelRealization& ch, const NetworkConfig& cfg,
                                    const AlgorithmParams& params) {
  PipelineResult out;
  out.method = "mixed_l12";
  auto t0 = detail::Clock::now();
  const conic::SolveResult r = detail::annotate("mixed_l12 stage 1", [&] {
    return detail::solve_or_throw(conic::build_mixed_l12(rho_weights(cfg), ch, cfg), params.solver_tol, "solve");
  });
  out.stage1 = detail::with_zero_tol(*r.beam, params.zero_tol);
  out.timings.stage1 = detail::seconds_since(t0);
  detail::annotate("mixed_l12 stages 2-3", [&] { detail::stages_2_3(out, ch, cfg, params); });
  detail::finalize(out, ch, cfg);
  return out;
}

}  // namespace gsbf
