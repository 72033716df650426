#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gsbf/netmodel.hpp"

using namespace gsbf;

namespace {

std::vector<CVector> ones_fading(const NetworkConfig& cfg) {
  return std::vector<CVector>(static_cast<std::size_t>(cfg.num_tasks()), CVector::Ones(cfg.antennas));
}

CVector random_block(std::mt19937_64& rng, int L, double scale = 1.0) {
  std::normal_distribution<double> g;
  CVector v(L);
  for (int l = 0; l < L; ++l) v[l] = scale * Complex(g(rng), g(rng));
  return v;
}

// SINR with per-user sums restricted to the support, computed block by block.
double sinr_from_support(const BeamformingSolution& v, const ChannelRealization& ch, const NetworkConfig& cfg, int k) {
  const std::vector<TaskId> supp = v.support();
  auto in_support = [&](int n, int l) { return std::find(supp.begin(), supp.end(), TaskId{n, l}) != supp.end(); };
  auto gain = [&](int l) {
    Complex acc = 0.0;
    for (int n = 0; n < cfg.num_bs; ++n)
      if (in_support(n, l))
        for (int a = 0; a < cfg.antennas; ++a) acc += std::conj(ch.h(n, k)[a]) * v.v(n, l)[a];
    return std::norm(acc);
  };
  double interference = 0.0;
  for (int l = 0; l < cfg.num_users; ++l)
    if (l != k) interference += gain(l);
  return gain(k) / (interference + cfg.noise_power[k]);
}

}  // namespace

TEST(NetworkConfig, DefaultsMatchTheExperimentalSetup) {
  const NetworkConfig c = NetworkConfig::default_setup();
  EXPECT_EQ(c.num_bs, 8);
  EXPECT_EQ(c.num_users, 15);
  EXPECT_EQ(c.antennas, 2);
  EXPECT_EQ(c.num_tasks(), 120);
  EXPECT_DOUBLE_EQ(c.p_compute(3, 7), 0.45);
  EXPECT_DOUBLE_EQ(c.eta[0], 0.25);
  EXPECT_DOUBLE_EQ(c.p_max[5], 1.0);
  EXPECT_EQ(c.channel_mode, ChannelMode::normalized);
  EXPECT_NO_THROW(c.validate());
}

TEST(NetworkConfig, SinrInDecibelsConvertsToLinear) {
  NetworkConfig c = NetworkConfig::default_setup();
  c.set_sinr_db(4.0);
  EXPECT_NEAR(c.gamma[0], 2.5118864315095801, 1e-15);
  c.set_sinr_db(0.0);
  EXPECT_DOUBLE_EQ(c.gamma[14], 1.0);
}

TEST(NetworkConfig, RejectsInvalidFields) {
  NetworkConfig c = NetworkConfig::default_setup();
  c.eta[2] = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = NetworkConfig::default_setup();
  c.p_compute(0, 0) = -0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = NetworkConfig::default_setup();
  c.p_compute(0, 0) = 0.0;  // zero compute power is allowed
  EXPECT_NO_THROW(c.validate());
  c.gamma[1] = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = NetworkConfig::default_setup();
  c.p_max.resize(3);
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Topology, PointsLieInsideTheRegionAndAreSeeded) {
  const NetworkConfig c = NetworkConfig::default_setup();
  const Topology a = generate_topology(11, c);
  const Topology b = generate_topology(11, c);
  const Topology other = generate_topology(12, c);
  ASSERT_EQ(a.bs.size(), 8u);
  ASSERT_EQ(a.users.size(), 15u);
  for (const auto* pts : {&a.bs, &a.users})
    for (const Point& p : *pts) {
      EXPECT_LE(std::abs(p.x), c.region_half_width_km);
      EXPECT_LE(std::abs(p.y), c.region_half_width_km);
    }
  EXPECT_EQ(a.users[3].x, b.users[3].x);
  EXPECT_NE(a.users[3].x, other.users[3].x);
}

TEST(Channels, PathLossAtOneKilometre) {
  EXPECT_NEAR(path_loss_db(1.0), 128.1, 1e-12);
  NetworkConfig c = NetworkConfig::uniform(1, 1, 2, 1.0, 0.25, 0.45, 1.0, 1e-13, 2.0, ChannelMode::path_loss);
  Topology t{{{0.0, 0.0}}, {{1.0, 0.0}}};
  const ChannelRealization ch = assemble_channels(t, c, ones_fading(c));
  EXPECT_NEAR(ch.h(0, 0)[0].real(), 3.936e-7, 1e-10);
  EXPECT_NEAR(ch.h(0, 0)[1].real(), 3.936e-7, 1e-10);
  EXPECT_EQ(ch.h(0, 0)[0].imag(), 0.0);

  c.channel_mode = ChannelMode::normalized;
  const ChannelRealization nch = assemble_channels(t, c, ones_fading(c));
  EXPECT_NEAR(nch.h(0, 0)[0].real(), ch.h(0, 0)[0].real() / std::sqrt(1e-13), 1e-12);
}

TEST(Channels, DistanceIsClampedToOneMetre) {
  const NetworkConfig c = NetworkConfig::uniform(1, 1, 1, 1.0, 0.25, 0.45, 1.0, 1e-13, 0.5, ChannelMode::path_loss);
  const ChannelRealization same = assemble_channels(Topology{{{0.1, 0.1}}, {{0.1, 0.1}}}, c, ones_fading(c));
  EXPECT_NEAR(std::abs(same.h(0, 0)[0]), path_loss_amplitude(1e-3), 1e-15);
  EXPECT_TRUE(same.all_finite());
}

TEST(Channels, MeanGainMatchesPathLossOverManyDraws) {
  // 100 users at 0.3 km from a single BS, 1000 seeds: 10^5 Rayleigh draws.
  NetworkConfig c = NetworkConfig::uniform(1, 100, 2, 1.0, 0.25, 0.45, 1.0, 1e-13, 0.5, ChannelMode::path_loss);
  Topology t;
  t.bs = {{0.0, 0.0}};
  t.users.assign(100, Point{0.3, 0.0});
  double acc = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const ChannelRealization ch = generate_channels(seed, t, c);
    for (int k = 0; k < 100; ++k) acc += ch.h(0, k).squaredNorm();
  }
  const double expected = 2.0 * std::pow(10.0, -path_loss_db(0.3) / 10.0);
  EXPECT_NEAR(acc / 1e5 / expected, 1.0, 0.02);
}

TEST(Channels, SameSeedGivesIdenticalRealization) {
  const NetworkConfig c = NetworkConfig::default_setup();
  const Topology t = generate_topology(5, c);
  EXPECT_TRUE(generate_channels(5, t, c) == generate_channels(5, t, c));
  EXPECT_FALSE(generate_channels(5, t, c) == generate_channels(6, t, c));
}

TEST(Channels, FadingHookRejectsWrongShapes) {
  const NetworkConfig c = NetworkConfig::uniform(2, 2, 2, 1.0, 0.25, 0.45, 1.0, 1.0);
  const Topology t = generate_topology(0, c);
  EXPECT_THROW(assemble_channels(t, c, std::vector<CVector>(3, CVector::Ones(2))), std::invalid_argument);
  EXPECT_THROW(assemble_channels(t, c, std::vector<CVector>(4, CVector::Ones(3))), std::invalid_argument);
}

TEST(Sinr, SingleLinkRatio) {
  const NetworkConfig c = NetworkConfig::uniform(1, 1, 2, 1.0, 0.25, 0.45, 1.0, 1.0);
  ChannelRealization ch(1, 1, 2);
  ch.h(0, 0) << Complex(1, 0), Complex(0, 0);
  BeamformingSolution v(1, 1, 2);
  v.set(0, 0, (CVector(2) << Complex(2, 0), Complex(0, 0)).finished());
  EXPECT_DOUBLE_EQ(sinr_per_user(v, ch, c)[0], 4.0);
  EXPECT_DOUBLE_EQ(sinr_per_user(BeamformingSolution(1, 1, 2), ch, c)[0], 0.0);
}

TEST(Sinr, AggregatedFormMatchesSupportRestrictedSums) {
  std::mt19937_64 rng(2024);
  std::bernoulli_distribution keep(0.6);
  for (int trial = 0; trial < 100; ++trial) {
    const int N = 2 + trial % 3;
    const int K = 2 + trial % 2;
    NetworkConfig c = NetworkConfig::uniform(N, K, 2, 1.0, 0.25, 0.45, 1.0, 1.0);
    c.noise_power = RVector::LinSpaced(K, 0.5, 1.5);
    ChannelRealization ch(N, K, 2);
    BeamformingSolution v(N, K, 2);
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < K; ++k) {
        ch.h(n, k) = random_block(rng, 2);
        if (keep(rng)) v.set(n, k, random_block(rng, 2, 0.7));
      }
    const RVector s = sinr_per_user(v, ch, c);
    for (int k = 0; k < K; ++k) EXPECT_NEAR(s[k], sinr_from_support(v, ch, c, k), 1e-10 * std::max(1.0, s[k]));
  }
}

TEST(Sinr, DimensionMismatchThrows) {
  const NetworkConfig c = NetworkConfig::uniform(2, 2, 2, 1.0, 0.25, 0.45, 1.0, 1.0);
  EXPECT_THROW(sinr_per_user(BeamformingSolution(2, 3, 2), ChannelRealization(2, 2, 2), c), std::invalid_argument);
}

TEST(PowerBreakdown, SingleSelectedTask) {
  const NetworkConfig c = NetworkConfig::uniform(1, 1, 1, 1.0, 0.25, 0.45, 1.0, 1.0);
  BeamformingSolution v(1, 1, 1);
  v.set(0, 0, CVector::Constant(1, Complex(std::sqrt(0.5), 0.0)));
  const PowerBreakdown p = power_breakdown(v, TaskSelection::all(1, 1), c);
  EXPECT_NEAR(p.transmit_w, 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(p.compute_w, 0.45);
  EXPECT_NEAR(p.total_w, 2.45, 1e-15);
}

TEST(PowerBreakdown, EmptySelectionAndFullSelection) {
  const NetworkConfig small = NetworkConfig::uniform(2, 2, 2, 1.0, 0.25, 0.45, 1.0, 1.0);
  const PowerBreakdown zero = power_breakdown(BeamformingSolution::zeros(small), TaskSelection::none(2, 2), small);
  EXPECT_EQ(zero.transmit_w, 0.0);
  EXPECT_EQ(zero.compute_w, 0.0);
  EXPECT_EQ(zero.total_w, 0.0);

  const NetworkConfig c = NetworkConfig::default_setup();
  const TaskSelection all = TaskSelection::all(8, 15);
  EXPECT_EQ(all.count(), 120);
  EXPECT_NEAR(power_breakdown(BeamformingSolution::zeros(c), all, c).compute_w, 54.0, 1e-12);
}

TEST(PowerBreakdown, NonzeroBlockOutsideSelectionThrows) {
  const NetworkConfig c = NetworkConfig::uniform(1, 2, 1, 1.0, 0.25, 0.45, 1.0, 1.0);
  BeamformingSolution v(1, 2, 1);
  v.set(0, 1, CVector::Constant(1, Complex(0.1, 0.0)));
  EXPECT_THROW(power_breakdown(v, TaskSelection::from_tasks(1, 2, {{0, 0}}), c), std::invalid_argument);
  v.set(0, 1, CVector::Constant(1, Complex(1e-9, 0.0)));  // below zero_tol
  EXPECT_NO_THROW(power_breakdown(v, TaskSelection::from_tasks(1, 2, {{0, 0}}), c));
}

TEST(Validate, ReportsEachKindOfViolation) {
  NetworkConfig c = NetworkConfig::uniform(1, 2, 1, 1.0, 0.25, 0.45, 1.0, 1.0);
  ChannelRealization ch(1, 2, 1);
  ch.h(0, 0)[0] = 1.0;
  ch.h(0, 1)[0] = 0.0;
  BeamformingSolution v(1, 2, 1);
  v.set(0, 0, CVector::Constant(1, std::sqrt(1.01)));
  const ConstraintReport r = validate(v, TaskSelection::from_tasks(1, 2, {{0, 0}}), ch, c);
  EXPECT_FALSE(r.passed());
  EXPECT_TRUE(r.power_ok == false);
  EXPECT_NEAR(r.worst_power_violation, 0.01, 1e-12);
  EXPECT_FALSE(r.sinr_ok);  // user 1 has no channel
  EXPECT_EQ(r.worst_sinr_user, 1);
  EXPECT_TRUE(r.zero_blocks_ok);

  v.set(0, 1, CVector::Constant(1, 0.2));
  const ConstraintReport z = validate(v, TaskSelection::from_tasks(1, 2, {{0, 0}}), ch, c);
  EXPECT_FALSE(z.zero_blocks_ok);
  EXPECT_NEAR(z.worst_zero_block_norm, 0.2, 1e-15);
}

TEST(Validate, FeasiblePointPasses) {
  const NetworkConfig c = NetworkConfig::uniform(1, 1, 1, 1.0, 0.25, 0.45, 1.0, 1.0);
  ChannelRealization ch(1, 1, 1);
  ch.h(0, 0)[0] = 2.0;
  BeamformingSolution v(1, 1, 1);
  v.set(0, 0, CVector::Constant(1, 0.5));  // SINR = 1
  const ConstraintReport r = validate(v, TaskSelection::all(1, 1), ch, c);
  EXPECT_TRUE(r.passed());
  EXPECT_NEAR(r.sinr[0], 1.0, 1e-15);
}

TEST(TaskSelection, PrefixAndCoverage) {
  const std::vector<TaskId> order{{1, 0}, {0, 1}, {0, 0}, {1, 1}};
  const TaskSelection one = TaskSelection::from_prefix(2, 2, order, 1);
  EXPECT_FALSE(one.covers_all_users());
  const TaskSelection two = TaskSelection::from_prefix(2, 2, order, 2);
  EXPECT_TRUE(two.covers_all_users());
  EXPECT_EQ(two.count(), 2);
  EXPECT_EQ(two.cut, 2);
  EXPECT_EQ(two.users_of(0), std::vector<int>{1});
  EXPECT_EQ(two.users_of(1), std::vector<int>{0});
  EXPECT_THROW(TaskSelection::from_prefix(2, 2, order, 5), std::invalid_argument);
}

TEST(BeamformingSolution, SupportUsesZeroTolerance) {
  BeamformingSolution v(2, 2, 1, 1e-6);
  v.set(0, 1, CVector::Constant(1, 1e-7));
  v.set(1, 0, CVector::Constant(1, 1e-5));
  EXPECT_EQ(v.support(), (std::vector<TaskId>{{1, 0}}));
  EXPECT_NEAR(v.squared_norm(), 1e-14 + 1e-10, 1e-24);
}
