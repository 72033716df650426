#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gsbf/pipeline.hpp"

using namespace gsbf;

namespace {

struct Instance {
  NetworkConfig cfg;
  ChannelRealization ch;
};

Instance seeded(int N, int K, double db, std::uint64_t seed, double pc = 0.45) {
  NetworkConfig cfg = NetworkConfig::uniform(N, K, 2, 1.0, 0.25, pc, 1.0, 1.0);
  cfg.set_sinr_db(db);
  return {cfg, generate_channels(seed, generate_topology(seed, cfg), cfg)};
}

Instance single_link(double gamma, double p_max = 1.0) {
  NetworkConfig cfg = NetworkConfig::uniform(1, 1, 2, p_max, 0.25, 0.45, gamma, 1.0);
  ChannelRealization ch(1, 1, 2);
  ch.h(0, 0) << Complex(1.0, 0.0), Complex(0.0, 1.0);
  return {cfg, ch};
}

}  // namespace

TEST(AlgorithmParams, DefaultsAndValidation) {
  const AlgorithmParams a;
  EXPECT_EQ(a.p, 100.0);
  EXPECT_EQ(a.beta, 0.1);
  EXPECT_EQ(a.iter_max, 25);
  EXPECT_EQ(a.eps, 1e-5);
  EXPECT_NO_THROW(a.validate());
  AlgorithmParams b = a;
  b.beta = 0.0;
  EXPECT_THROW(b.validate(), std::invalid_argument);
  b = a;
  b.iter_max = 0;
  EXPECT_THROW(b.validate(), std::invalid_argument);
}

TEST(Weights, RhoFromComputePowerAndEfficiency) {
  NetworkConfig cfg = NetworkConfig::uniform(2, 2, 1, 1.0, 0.25, 0.45, 1.0, 1.0);
  EXPECT_NEAR(rho_weights(cfg)[3], std::sqrt(1.8), 1e-15);
  cfg.p_compute(1, 0) = 0.0;
  EXPECT_EQ(rho_weights(cfg)[2], 0.0);
  cfg.eta[0] = 0.125;
  EXPECT_NEAR(rho_weights(cfg)[0] / rho_weights(cfg)[3], std::sqrt(2.0), 1e-14);
}

TEST(Weights, UpdateRule) {
  BeamformingSolution v(1, 2, 1);
  v.set(0, 1, CVector::Constant(1, 1.0));
  const RVector w = update_weights(v, RVector::Constant(2, std::sqrt(1.8)), 100.0);
  EXPECT_NEAR(w[0], 100.0 * std::sqrt(1.8), 1e-12);
  EXPECT_NEAR(w[1], 1.32836, 1e-5);
  EXPECT_THROW(update_weights(v, RVector::Ones(2), 0.0), std::invalid_argument);
}

TEST(Weights, DecreaseWithNormAndStayInRange) {
  const double rho = 1.3;
  double prev = std::numeric_limits<double>::infinity();
  for (double norm : {0.0, 1e-4, 1e-2, 0.1, 1.0, 10.0}) {
    BeamformingSolution v(1, 1, 1);
    v.set(0, 0, CVector::Constant(1, norm));
    const double w = update_weights(v, RVector::Constant(1, rho), 100.0)[0];
    EXPECT_GT(w, 0.0);
    EXPECT_LE(w, 100.0 * rho);
    EXPECT_LT(w, prev);
    prev = w;
  }
}

TEST(InitialPoint, InfeasibleInstanceThrows) {
  const Instance in = single_link(1e6, 1e-3);
  EXPECT_THROW(initial_point(in.ch, in.cfg, {}), InstanceInfeasible);
  EXPECT_THROW(run_three_stage(in.ch, in.cfg, {}), InstanceInfeasible);
}

TEST(InitialPoint, ErrorsNameTheStage) {
  const Instance in = single_link(1e6, 1e-3);
  try {
    run_mixed_l12(in.ch, in.cfg, {});
    FAIL() << "expected InstanceInfeasible";
  } catch (const InstanceInfeasible& e) {
    EXPECT_NE(std::string(e.what()).find("mixed_l12"), std::string::npos);
  }
}

TEST(ProxIrw, SingleLinkStopsAfterTwoIterations) {
  const Instance in = single_link(1.0);
  const Stage1Result r = prox_irw(in.ch, in.cfg, {});
  EXPECT_LE(r.trace.iterations(), 2);
  EXPECT_TRUE(r.trace.converged);
  EXPECT_NEAR(r.v.group_norm(0), std::sqrt(0.5), 1e-6);
}

TEST(ProxIrw, TraceInvariantsOnSeededInstances) {
  const AlgorithmParams params;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Instance in = seeded(3, 3, 4.0, seed);
    const Stage1Result r = prox_irw(in.ch, in.cfg, params);
    const ConvergenceTrace& t = r.trace;
    ASSERT_EQ(static_cast<int>(t.rows.size()), t.iterations() + 1);
    EXPECT_LE(t.iterations(), params.iter_max);
    EXPECT_TRUE(std::isnan(t.rows[0].delta_g));
    const double cert = CertificateParams::from(rho_weights(in.cfg), params.p, params.beta).residual_coefficient();
    for (int i = 0; i <= t.iterations(); ++i) {
      const TraceRow& row = t.rows[i];
      EXPECT_EQ(row.iteration, i);
      EXPECT_TRUE(row.feasible) << "seed " << seed << " iterate " << i;
      if (i == 0) continue;
      const double tol = 1e-6 * std::max(1.0, std::abs(t.rows[i - 1].omega));
      EXPECT_LE(row.omega, t.rows[i - 1].omega + tol) << "seed " << seed << " iterate " << i;
      EXPECT_GE(row.delta_g, 0.5 * params.beta * row.displacement * row.displacement - 1e-6);
      EXPECT_NEAR(row.residual_bound, cert * row.displacement, 1e-9 * std::max(1.0, row.residual_bound));
    }
    if (t.converged) EXPECT_LE(t.back().weight_change, params.eps);
  }
}

TEST(ProxIrw, GivenStartMatchesComputedStart) {
  const Instance in = seeded(2, 3, 4.0, 1);
  const AlgorithmParams params;
  const Stage1Result a = prox_irw(in.ch, in.cfg, params);
  const Stage1Result b = prox_irw(in.ch, in.cfg, params, initial_point(in.ch, in.cfg, params));
  ASSERT_EQ(a.trace.iterations(), b.trace.iterations());
  for (int i = 0; i <= a.trace.iterations(); ++i) EXPECT_EQ(a.trace.rows[i].omega, b.trace.rows[i].omega);
}

TEST(ProxIrw, IterationCapIsRespected) {
  const Instance in = seeded(3, 3, 4.0, 2);
  AlgorithmParams params;
  params.iter_max = 1;
  const Stage1Result r = prox_irw(in.ch, in.cfg, params);
  EXPECT_EQ(r.trace.iterations(), 1);
}

TEST(Priorities, FormulaAndZeroComputePower) {
  Instance in = seeded(2, 2, 4.0, 3);
  in.cfg.p_compute(1, 1) = 0.0;
  BeamformingSolution v(2, 2, 2);
  for (int g = 0; g < 4; ++g) v.set_group(g, CVector::Constant(2, Complex(0.1 * (g + 1), 0.0)));
  const RVector theta = task_priorities(v, in.ch, in.cfg);
  EXPECT_NEAR(theta[1], std::sqrt(in.ch.h(0, 1).squaredNorm() * 0.25 / 0.45) * v.group_norm(1), 1e-15);
  EXPECT_TRUE(std::isinf(theta[3]));
}

TEST(Priorities, TiesKeepFlatIndexOrder) {
  const RVector theta = (RVector(6) << 1.0, 2.0, 1.0, 2.0, 0.0, 2.0).finished();
  const std::vector<TaskId> order = priority_order(theta, 3);
  const std::vector<int> flat{1, 3, 5, 0, 2, 4};
  ASSERT_EQ(order.size(), flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) EXPECT_EQ(flat_index(order[i], 3), flat[i]);
}

TEST(Stage2, SingleBaseStationSelectsEveryTask) {
  const Instance in = seeded(1, 2, -10.0, 4);
  const RVector theta = (RVector(2) << 0.1, 0.3).finished();
  std::vector<Stage2Probe> probes;
  const TaskSelection sel = select_tasks(theta, in.ch, in.cfg, {}, &probes);
  EXPECT_EQ(sel.count(), 2);
  ASSERT_EQ(probes.size(), 1u);
  EXPECT_EQ(probes[0].cut, 2);
}

TEST(Stage2, UncoveredCutsAreRejectedWithoutASolve) {
  const Instance in = seeded(3, 3, 4.0, 5);
  // Every task of BS 0 first: cuts up to 3 serve only BS 0, later cuts may still miss users.
  const RVector theta = (RVector(9) << 9, 8, 7, 6, 5, 4, 3, 2, 1).finished();
  std::vector<Stage2Probe> probes;
  select_tasks(theta, in.ch, in.cfg, {}, &probes);
  const std::vector<TaskId> order = priority_order(theta, 3);
  for (const Stage2Probe& pr : probes) {
    const bool covered = TaskSelection::from_prefix(3, 3, order, pr.cut).covers_all_users();
    EXPECT_EQ(pr.solved, covered);
    if (!pr.solved) EXPECT_FALSE(pr.feasible);
  }
}

TEST(Stage2, PrefixFeasibilityIsMonotone) {
  const AlgorithmParams params;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Instance in = seeded(3, 3, 6.0, seed);
    const Stage1Result s1 = prox_irw(in.ch, in.cfg, params);
    const std::vector<TaskId> order = priority_order(task_priorities(s1.v, in.ch, in.cfg), 3);
    bool seen = false;
    for (int t = 0; t <= 9; ++t) {
      const bool f = probe_cut(order, t, in.ch, in.cfg, params.solver_tol).feasible;
      if (seen) EXPECT_TRUE(f) << "seed " << seed << " cut " << t;
      seen = seen || f;
    }
  }
}

TEST(Stage2, BisectionMatchesLinearScan) {
  AlgorithmParams lin, bis;
  bis.stage2_search = Stage2Search::bisection;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Instance in = seeded(3, 4, 4.0, seed);
    const RVector theta = task_priorities(initial_point(in.ch, in.cfg, lin), in.ch, in.cfg);
    const TaskSelection a = select_tasks(theta, in.ch, in.cfg, lin);
    const TaskSelection b = select_tasks(theta, in.ch, in.cfg, bis);
    EXPECT_EQ(a.active, b.active) << "seed " << seed;
  }
}

TEST(Refine, FullSupportReproducesCoordinatedBeamforming) {
  const Instance in = seeded(2, 3, 4.0, 6);
  const AlgorithmParams params;
  const BeamformingSolution cb = initial_point(in.ch, in.cfg, params);
  const BeamformingSolution r = refine(TaskSelection::all(2, 3), in.ch, in.cfg, params);
  const TaskSelection all = TaskSelection::all(2, 3);
  EXPECT_NEAR(power_breakdown(r, all, in.cfg).transmit_w, power_breakdown(cb, all, in.cfg).transmit_w, 1e-7);
}

TEST(Pipeline, AllMethodsProduceValidatedSolutions) {
  const AlgorithmParams params;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Instance in = seeded(3, 3, 4.0, seed);
    const PipelineResult cb = run_cb(in.ch, in.cfg, params);
    const PipelineResult ls = run_three_stage(in.ch, in.cfg, params, cb.refined);
    const PipelineResult mx = run_mixed_l12(in.ch, in.cfg, params);
    for (const PipelineResult* r : {&cb, &ls, &mx}) {
      EXPECT_EQ(r->status, "ok") << r->method;
      EXPECT_TRUE(r->report.passed()) << r->method;
      EXPECT_TRUE(r->selection.covers_all_users()) << r->method;
      EXPECT_NEAR(r->power.total_w, r->power.transmit_w + r->power.compute_w, 1e-12);
    }
    EXPECT_EQ(cb.task_count(), 9);
    EXPECT_EQ(cb.iterations(), 0);
    EXPECT_TRUE(cb.trace.empty());
    EXPECT_FALSE(ls.trace.empty());
    EXPECT_EQ(ls.iterations(), ls.trace.iterations());
    // CB is the minimum transmit power over the full support.
    EXPECT_LE(cb.power.transmit_w, ls.power.transmit_w + 1e-6);
    EXPECT_LE(cb.power.transmit_w, mx.power.transmit_w + 1e-6);
  }
}

TEST(Pipeline, LargeComputePowerFavoursTaskSelection) {
  const AlgorithmParams params;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Instance in = seeded(3, 3, 2.0, seed, 100.0);
    const PipelineResult cb = run_cb(in.ch, in.cfg, params);
    const PipelineResult ls = run_three_stage(in.ch, in.cfg, params, cb.refined);
    EXPECT_LE(ls.power.total_w, cb.power.total_w + 1e-6);
    EXPECT_LE(ls.task_count(), cb.task_count());
  }
}

TEST(Pipeline, DeterministicAcrossRuns) {
  const Instance in = seeded(3, 3, 4.0, 7);
  const PipelineResult a = run_three_stage(in.ch, in.cfg, {});
  const PipelineResult b = run_three_stage(in.ch, in.cfg, {});
  EXPECT_EQ(a.selection.active, b.selection.active);
  EXPECT_EQ(a.power.total_w, b.power.total_w);
  ASSERT_EQ(a.trace.rows.size(), b.trace.rows.size());
  for (std::size_t i = 0; i < a.trace.rows.size(); ++i) EXPECT_EQ(a.trace.rows[i].omega, b.trace.rows[i].omega);
}
