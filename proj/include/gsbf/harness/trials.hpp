#pragma once

// Seeded Monte Carlo trials. Every method sees the same realization for a given
// (sinr_db, seed), so per-trial comparisons are paired.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gsbf/harness/config.hpp"
#include "gsbf/oracle.hpp"
#include "gsbf/pipeline.hpp"

namespace gsbf::harness {

struct TrialRecord {
  std::uint64_t seed = 0;
  double sinr_db = 0.0;
  std::string method;
  double total_w = 0.0;
  double transmit_w = 0.0;
  double compute_w = 0.0;
  int task_count = 0;
  int iterations = 0;
  std::string status;  // ok | infeasible | solver_failure | validation_failed | error
  double wall_ms = 0.0;

  bool ok() const { return status == "ok"; }
};

/// Stage-1 trace of one log-sum run.
struct TrialTrace {
  std::uint64_t seed = 0;
  double sinr_db = 0.0;
  ConvergenceTrace trace;
};

struct TrialResults {
  std::vector<TrialRecord> records;  // sweep order, then seed, then canonical method order
  std::vector<TrialTrace> traces;
};

inline bool record_less(const TrialRecord& a, const TrialRecord& b, const std::vector<double>& sweep) {
  auto idx = [&](double db) { return std::find(sweep.begin(), sweep.end(), db) - sweep.begin(); };
  if (a.sinr_db != b.sinr_db) return idx(a.sinr_db) < idx(b.sinr_db);
  if (a.seed != b.seed) return a.seed < b.seed;
  return method_rank(a.method) < method_rank(b.method);
}

/// Realization for trial seed `seed`. With resample_topology off, positions come from base_seed.
inline ChannelRealization trial_channels(const ExperimentConfig& cfg, const NetworkConfig& net, std::uint64_t seed) {
  const Topology topo = generate_topology(cfg.resample_topology ? seed : cfg.base_seed, net);
  return generate_channels(seed, topo, net);
}

namespace detail {

inline TrialRecord record_from(const PipelineResult& r) {
  TrialRecord rec;
  rec.method = r.method;
  rec.total_w = r.power.total_w;
  rec.transmit_w = r.power.transmit_w;
  rec.compute_w = r.power.compute_w;
  rec.task_count = r.task_count();
  rec.iterations = r.iterations();
  rec.status = r.status;
  return rec;
}

/// Runs one method and maps its outcome onto a record; never throws.
template <class F>
TrialRecord guarded(const std::string& method, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  TrialRecord rec;
  try {
    rec = f();
  } catch (const InstanceInfeasible&) {
    rec = TrialRecord{};
    rec.status = "infeasible";
  } catch (const Stage1Failure& e) {
    rec = TrialRecord{};
    rec.status = "solver_failure";
    rec.iterations = e.trace().iterations();
  } catch (const SolverFailure&) {
    rec = TrialRecord{};
    rec.status = "solver_failure";
  } catch (const std::exception&) {
    rec = TrialRecord{};
    rec.status = "error";
  }
  rec.method = method;
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace detail

/// All requested methods on one (sinr_db, seed) realization.
inline std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, double sinr_db, std::uint64_t seed,
                                          std::optional<TrialTrace>* trace_out = nullptr) {
  const NetworkConfig net = cfg.network_at(sinr_db);
  const ChannelRealization ch = trial_channels(cfg, net, seed);
  const AlgorithmParams& ap = cfg.algorithm;
  auto wants = [&](const std::string& m) { return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end(); };

  std::vector<TrialRecord> out;
  std::optional<BeamformingSolution> cb_beam;
  if (wants("cb"))
    out.push_back(detail::guarded("cb", [&] {
      PipelineResult r = run_cb(ch, net, ap);
      cb_beam = r.refined;
      return detail::record_from(r);
    }));
  if (wants("logsum"))
    out.push_back(detail::guarded("logsum", [&] {
      PipelineResult r = run_three_stage(ch, net, ap, cb_beam);
      if (trace_out) *trace_out = TrialTrace{seed, sinr_db, r.trace};
      return detail::record_from(r);
    }));
  if (wants("mixed_l12"))
    out.push_back(detail::guarded("mixed_l12", [&] { return detail::record_from(run_mixed_l12(ch, net, ap)); }));
  if (wants("oracle"))
    out.push_back(detail::guarded("oracle", [&] {
      OracleOptions opt;
      opt.solver_tol = ap.solver_tol;
      opt.zero_tol = ap.zero_tol;
      const OracleResult o = oracle_min_power(ch, net, opt);
      TrialRecord rec;
      rec.total_w = o.power.total_w;
      rec.transmit_w = o.power.transmit_w;
      rec.compute_w = o.power.compute_w;
      rec.task_count = o.support.count();
      rec.status = validate(o.beam, o.support, ch, net).passed() ? "ok" : "validation_failed";
      return rec;
    }));
  for (TrialRecord& r : out) {
    r.seed = seed;
    r.sinr_db = sinr_db;
  }
  std::sort(out.begin(), out.end(),
            [](const TrialRecord& a, const TrialRecord& b) { return method_rank(a.method) < method_rank(b.method); });
  return out;
}

/// Called once per finished trial, serialized; records arrive in completion order.
using TrialCallback = std::function<void(const std::vector<TrialRecord>&, const std::optional<TrialTrace>&)>;

/// Trial j at every swept SINR uses seed base_seed + j. Trials run on `workers` threads.
inline TrialResults run_trials(const ExperimentConfig& cfg, int workers = 1, const TrialCallback& on_trial = {}) {
  cfg.validate();
  struct Job {
    double db;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double db : cfg.sinr_sweep_db)
    for (int j = 0; j < cfg.trials; ++j) jobs.push_back({db, cfg.base_seed + static_cast<std::uint64_t>(j)});

  std::vector<std::vector<TrialRecord>> recs(jobs.size());
  std::vector<std::optional<TrialTrace>> traces(jobs.size());
  std::mutex emit;
  auto work = [&](std::size_t i) {
    recs[i] = run_trial(cfg, jobs[i].db, jobs[i].seed, &traces[i]);
    if (on_trial) {
      std::lock_guard<std::mutex> lock(emit);
      on_trial(recs[i], traces[i]);
    }
  };

  workers = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) work(i);
      });
    for (std::thread& t : pool) t.join();
  }

  TrialResults res;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    res.records.insert(res.records.end(), recs[i].begin(), recs[i].end());
    if (traces[i]) res.traces.push_back(std::move(*traces[i]));
  }
  return res;
}

}  // namespace gsbf::harness
