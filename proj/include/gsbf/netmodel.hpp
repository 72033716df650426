#pragma once

// Physical model of the cooperative edge-inference downlink: topology,
// channels, SINR, power accounting and constraint validation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsbf/task_selection.hpp"
#include "gsbf/types.hpp"

namespace gsbf {

/// How channel amplitudes and noise are scaled.
///  - path_loss:  h = 10^(-PL(d)/20) xi, noise_power in watts (default 1e-13 W).
///  - normalized: same channels divided by sqrt(reference_noise_w), so the
///                noise variance is 1 and SINR is unchanged.
enum class ChannelMode { normalized, path_loss };

inline constexpr double kDefaultReferenceNoiseW = 1e-13;  // -100 dBm
inline constexpr double kMinDistanceKm = 1e-3;             // 1 m clamp
inline constexpr double kDefaultZeroTol = 1e-6;

inline std::string to_string(ChannelMode m) { return m == ChannelMode::normalized ? "normalized" : "path_loss"; }

struct NetworkConfig {
  int num_bs = 8;
  int num_users = 15;
  int antennas = 2;
  RVector p_max;         // N, watts
  RVector eta;           // N, amplifier efficiency in (0, 1]
  RMatrix p_compute;     // N x K, watts
  RVector gamma;         // K, linear SINR targets
  RVector noise_power;   // K, watts (1 in normalized mode)
  double region_half_width_km = 0.5;
  ChannelMode channel_mode = ChannelMode::normalized;
  double reference_noise_w = kDefaultReferenceNoiseW;

  int num_tasks() const { return num_bs * num_users; }

  /// Uniform configuration with every per-BS / per-user / per-task field set to the same value.
  static NetworkConfig uniform(int num_bs, int num_users, int antennas, double p_max_w, double eta,
                               double p_compute_w, double gamma_linear, double noise_w,
                               double half_width_km = 0.5, ChannelMode mode = ChannelMode::normalized) {
    NetworkConfig c;
    c.num_bs = num_bs;
    c.num_users = num_users;
    c.antennas = antennas;
    c.p_max = RVector::Constant(num_bs, p_max_w);
    c.eta = RVector::Constant(num_bs, eta);
    c.p_compute = RMatrix::Constant(num_bs, num_users, p_compute_w);
    c.gamma = RVector::Constant(num_users, gamma_linear);
    c.noise_power = RVector::Constant(num_users, noise_w);
    c.region_half_width_km = half_width_km;
    c.channel_mode = mode;
    return c;
  }

  /// 8 two-antenna BSs, 15 users, P^c = 0.45 W, P_max = 1 W, eta = 25 %, 0 dB target, normalized noise.
  static NetworkConfig default_setup() { return uniform(8, 15, 2, 1.0, 0.25, 0.45, 1.0, 1.0); }

  void set_sinr_db(double db) { gamma = RVector::Constant(num_users, std::pow(10.0, db / 10.0)); }

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("NetworkConfig: " + m); };
    if (num_bs <= 0 || num_users <= 0 || antennas <= 0) fail("counts must be positive");
    if (p_max.size() != num_bs || eta.size() != num_bs) fail("per-BS vectors must have length num_bs");
    if (p_compute.rows() != num_bs || p_compute.cols() != num_users) fail("p_compute must be num_bs x num_users");
    if (gamma.size() != num_users || noise_power.size() != num_users)
      fail("per-user vectors must have length num_users");
    if (!(region_half_width_km > 0.0)) fail("region_half_width_km must be positive");
    if (!(reference_noise_w > 0.0)) fail("reference_noise_w must be positive");
    for (int n = 0; n < num_bs; ++n) {
      if (!(p_max[n] > 0.0) || !std::isfinite(p_max[n])) fail("p_max must be positive");
      if (!(eta[n] > 0.0 && eta[n] <= 1.0)) fail("eta must lie in (0, 1]");
    }
    if (!p_compute.allFinite() || (p_compute.array() < 0.0).any()) fail("p_compute must be finite and >= 0");
    for (int k = 0; k < num_users; ++k) {
      if (!(gamma[k] > 0.0) || !std::isfinite(gamma[k])) fail("gamma must be finite and positive");
      if (!(noise_power[k] > 0.0) || !std::isfinite(noise_power[k])) fail("noise_power must be positive");
    }
  }
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance_km(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Topology {
  std::vector<Point> bs;
  std::vector<Point> users;
};

/// Log-distance path loss in dB, distance in km.
inline double path_loss_db(double d_km) {
  if (!(d_km > 0.0)) throw std::domain_error("path_loss_db: distance must be positive");
  return 128.1 + 37.6 * std::log10(d_km);
}

/// Amplitude gain 10^(-PL/20) after clamping the distance to 1 m.
inline double path_loss_amplitude(double d_km) {
  return std::pow(10.0, -path_loss_db(std::max(d_km, kMinDistanceKm)) / 20.0);
}

namespace detail {
// Disjoint RNG streams for the same trial seed.
enum class Stream : std::uint32_t { topology = 1, fading = 2 };

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}
}  // namespace detail

inline Topology generate_topology(std::uint64_t seed, const NetworkConfig& cfg) {
  auto rng = detail::make_rng(seed, detail::Stream::topology);
  const double w = cfg.region_half_width_km;
  std::uniform_real_distribution<double> coord(-w, w);
  Topology t;
  t.bs.resize(static_cast<std::size_t>(cfg.num_bs));
  t.users.resize(static_cast<std::size_t>(cfg.num_users));
  for (auto& p : t.bs) p = {coord(rng), coord(rng)};
  for (auto& p : t.users) p = {coord(rng), coord(rng)};
  return t;
}

/// Channel vectors h_nk (length L) for every BS/user pair.
class ChannelRealization {
 public:
  ChannelRealization() = default;
  ChannelRealization(int num_bs, int num_users, int antennas)
      : num_bs_(num_bs), num_users_(num_users), antennas_(antennas),
        blocks_(static_cast<std::size_t>(num_bs * num_users), CVector::Zero(antennas)) {}

  int num_bs() const { return num_bs_; }
  int num_users() const { return num_users_; }
  int antennas() const { return antennas_; }

  const CVector& h(int bs, int user) const { return blocks_[index(bs, user)]; }
  CVector& h(int bs, int user) { return blocks_[index(bs, user)]; }

  /// Stack [h_1k; ...; h_Nk] of length N*L.
  CVector aggregated(int user) const {
    CVector out(num_bs_ * antennas_);
    for (int n = 0; n < num_bs_; ++n) out.segment(n * antennas_, antennas_) = h(n, user);
    return out;
  }

  bool all_finite() const {
    return std::all_of(blocks_.begin(), blocks_.end(), [](const CVector& b) { return b.allFinite(); });
  }

  friend bool operator==(const ChannelRealization& a, const ChannelRealization& b) {
    if (a.num_bs_ != b.num_bs_ || a.num_users_ != b.num_users_ || a.antennas_ != b.antennas_) return false;
    for (std::size_t i = 0; i < a.blocks_.size(); ++i)
      if (a.blocks_[i] != b.blocks_[i]) return false;
    return true;
  }

 private:
  std::size_t index(int bs, int user) const { return static_cast<std::size_t>(bs * num_users_ + user); }

  int num_bs_ = 0;
  int num_users_ = 0;
  int antennas_ = 0;
  std::vector<CVector> blocks_;
};

/// Scales the given small-scale fading blocks (BS-major, N*K vectors of length L)
/// by the path-loss amplitude of each link and the channel-mode normalization.
inline ChannelRealization assemble_channels(const Topology& topo, const NetworkConfig& cfg,
                                            const std::vector<CVector>& fading) {
  if (static_cast<int>(fading.size()) != cfg.num_tasks())
    throw std::invalid_argument("assemble_channels: need one fading block per BS/user pair");
  const double mode_scale =
      cfg.channel_mode == ChannelMode::normalized ? 1.0 / std::sqrt(cfg.reference_noise_w) : 1.0;
  ChannelRealization ch(cfg.num_bs, cfg.num_users, cfg.antennas);
  for (int n = 0; n < cfg.num_bs; ++n) {
    for (int k = 0; k < cfg.num_users; ++k) {
      const CVector& xi = fading[static_cast<std::size_t>(n * cfg.num_users + k)];
      if (xi.size() != cfg.antennas) throw std::invalid_argument("assemble_channels: fading block length != L");
      const double d = distance_km(topo.bs[static_cast<std::size_t>(n)], topo.users[static_cast<std::size_t>(k)]);
      ch.h(n, k) = (mode_scale * path_loss_amplitude(d)) * xi;
    }
  }
  return ch;
}

/// Rayleigh fading: xi ~ CN(0, I).
inline ChannelRealization generate_channels(std::uint64_t seed, const Topology& topo, const NetworkConfig& cfg) {
  auto rng = detail::make_rng(seed, detail::Stream::fading);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  std::vector<CVector> fading(static_cast<std::size_t>(cfg.num_tasks()), CVector(cfg.antennas));
  for (auto& xi : fading)
    for (int l = 0; l < cfg.antennas; ++l) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      xi[l] = Complex(re, im);
    }
  return assemble_channels(topo, cfg, fading);
}

/// Grouped beamformer: N*K blocks of length L, BS-major.
class BeamformingSolution {
 public:
  BeamformingSolution() = default;
  BeamformingSolution(int num_bs, int num_users, int antennas, double zero_tol = kDefaultZeroTol)
      : num_bs_(num_bs), num_users_(num_users), antennas_(antennas), zero_tol_(zero_tol),
        groups_(static_cast<std::size_t>(num_bs * num_users), CVector::Zero(antennas)) {}

  static BeamformingSolution zeros(const NetworkConfig& cfg, double zero_tol = kDefaultZeroTol) {
    return BeamformingSolution(cfg.num_bs, cfg.num_users, cfg.antennas, zero_tol);
  }

  int num_bs() const { return num_bs_; }
  int num_users() const { return num_users_; }
  int antennas() const { return antennas_; }
  int num_groups() const { return num_bs_ * num_users_; }
  double zero_tol() const { return zero_tol_; }

  const CVector& v(int bs, int user) const { return groups_[index(bs, user)]; }
  void set(int bs, int user, const CVector& block) {
    if (block.size() != antennas_) throw std::invalid_argument("BeamformingSolution: block length != L");
    groups_[index(bs, user)] = block;
  }
  const CVector& group(int flat) const { return groups_[static_cast<std::size_t>(flat)]; }
  void set_group(int flat, const CVector& block) { set(flat / num_users_, flat % num_users_, block); }

  double group_norm(int flat) const { return group(flat).norm(); }
  RVector group_norms() const {
    RVector out(num_groups());
    for (int g = 0; g < num_groups(); ++g) out[g] = group_norm(g);
    return out;
  }

  /// Groups whose norm exceeds zero_tol.
  std::vector<TaskId> support() const {
    std::vector<TaskId> out;
    for (int g = 0; g < num_groups(); ++g)
      if (group_norm(g) > zero_tol_) out.push_back(task_at(g, num_users_));
    return out;
  }

  /// Aggregated beamformer v_k = [v_1k; ...; v_Nk].
  CVector aggregated(int user) const {
    CVector out(num_bs_ * antennas_);
    for (int n = 0; n < num_bs_; ++n) out.segment(n * antennas_, antennas_) = v(n, user);
    return out;
  }

  /// Full stacked vector [v_11; ...; v_1K; ...; v_NK].
  CVector stacked() const {
    CVector out(num_groups() * antennas_);
    for (int g = 0; g < num_groups(); ++g) out.segment(g * antennas_, antennas_) = group(g);
    return out;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& b : groups_) s += b.squaredNorm();
    return s;
  }

  friend double distance(const BeamformingSolution& a, const BeamformingSolution& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.groups_.size(); ++i) s += (a.groups_[i] - b.groups_[i]).squaredNorm();
    return std::sqrt(s);
  }

  friend bool operator==(const BeamformingSolution& a, const BeamformingSolution& b) {
    if (a.num_bs_ != b.num_bs_ || a.num_users_ != b.num_users_ || a.antennas_ != b.antennas_) return false;
    for (std::size_t i = 0; i < a.groups_.size(); ++i)
      if (a.groups_[i] != b.groups_[i]) return false;
    return true;
  }

 private:
  std::size_t index(int bs, int user) const {
    if (bs < 0 || bs >= num_bs_ || user < 0 || user >= num_users_)
      throw std::out_of_range("BeamformingSolution: index out of range");
    return static_cast<std::size_t>(bs * num_users_ + user);
  }

  int num_bs_ = 0;
  int num_users_ = 0;
  int antennas_ = 0;
  double zero_tol_ = kDefaultZeroTol;
  std::vector<CVector> groups_;
};

namespace detail {
inline void check_dims(const BeamformingSolution& sol, const ChannelRealization& ch, const NetworkConfig& cfg) {
  if (sol.num_bs() != cfg.num_bs || sol.num_users() != cfg.num_users || sol.antennas() != cfg.antennas ||
      ch.num_bs() != cfg.num_bs || ch.num_users() != cfg.num_users || ch.antennas() != cfg.antennas)
    throw std::invalid_argument("dimension mismatch between solution, channels and config");
}
}  // namespace detail

/// SINR_k = |h_k^H v_k|^2 / (sum_{l != k} |h_k^H v_l|^2 + sigma_k^2), aggregated form.
inline RVector sinr_per_user(const BeamformingSolution& sol, const ChannelRealization& ch,
                             const NetworkConfig& cfg) {
  detail::check_dims(sol, ch, cfg);
  const int K = cfg.num_users;
  std::vector<CVector> vk(static_cast<std::size_t>(K));
  for (int l = 0; l < K; ++l) vk[static_cast<std::size_t>(l)] = sol.aggregated(l);
  RVector out(K);
  for (int k = 0; k < K; ++k) {
    const CVector hk = ch.aggregated(k);
    double signal = 0.0;
    double interference = 0.0;
    for (int l = 0; l < K; ++l) {
      const double g = std::norm(hk.dot(vk[static_cast<std::size_t>(l)]));  // dot() conjugates hk
      (l == k ? signal : interference) += g;
    }
    out[k] = signal / (interference + cfg.noise_power[k]);
  }
  return out;
}

struct PowerBreakdown {
  double transmit_w = 0.0;
  double compute_w = 0.0;
  double total_w = 0.0;
};

/// Transmit power sum ||v_nk||^2 / eta_n plus compute power of the selected tasks.
inline PowerBreakdown power_breakdown(const BeamformingSolution& sol, const TaskSelection& selection,
                                      const NetworkConfig& cfg) {
  if (selection.num_bs != cfg.num_bs || selection.num_users != cfg.num_users || sol.num_bs() != cfg.num_bs ||
      sol.num_users() != cfg.num_users)
    throw std::invalid_argument("power_breakdown: dimension mismatch");
  PowerBreakdown p;
  for (int g = 0; g < cfg.num_tasks(); ++g) {
    const TaskId t = task_at(g, cfg.num_users);
    const double norm = sol.group_norm(g);
    if (!selection.contains(g) && norm > sol.zero_tol())
      throw std::invalid_argument("power_breakdown: nonzero beamformer outside the task selection");
    p.transmit_w += norm * norm / cfg.eta[t.bs];
    if (selection.contains(g)) p.compute_w += cfg.p_compute(t.bs, t.user);
  }
  p.total_w = p.transmit_w + p.compute_w;
  return p;
}

struct ValidationTolerance {
  double sinr_rel = 1e-5;
  double power_abs = 1e-5;
  double zero_block = kDefaultZeroTol;

  ValidationTolerance() = default;
  explicit ValidationTolerance(double tol) : sinr_rel(tol), power_abs(tol), zero_block(kDefaultZeroTol) {}
  ValidationTolerance(double sinr, double power, double zero) : sinr_rel(sinr), power_abs(power), zero_block(zero) {}
};

struct ConstraintReport {
  RVector sinr;
  double worst_sinr_shortfall = 0.0;     // max_k max(0, (gamma_k - SINR_k) / gamma_k)
  int worst_sinr_user = -1;
  double worst_power_violation = 0.0;    // max_n max(0, sum_k ||v_nk||^2 - P_max_n)
  int worst_power_bs = -1;
  double worst_zero_block_norm = 0.0;    // largest block norm outside the selection
  bool sinr_ok = true;
  bool power_ok = true;
  bool zero_blocks_ok = true;

  bool passed() const { return sinr_ok && power_ok && zero_blocks_ok; }
};

inline ConstraintReport validate(const BeamformingSolution& sol, const TaskSelection& selection,
                                 const ChannelRealization& ch, const NetworkConfig& cfg,
                                 const ValidationTolerance& tol = ValidationTolerance{}) {
  detail::check_dims(sol, ch, cfg);
  ConstraintReport r;
  r.sinr = sinr_per_user(sol, ch, cfg);
  for (int k = 0; k < cfg.num_users; ++k) {
    const double shortfall = std::max(0.0, (cfg.gamma[k] - r.sinr[k]) / cfg.gamma[k]);
    if (r.worst_sinr_user < 0 || shortfall > r.worst_sinr_shortfall) {
      r.worst_sinr_shortfall = shortfall;
      r.worst_sinr_user = k;
    }
  }
  for (int n = 0; n < cfg.num_bs; ++n) {
    double used = 0.0;
    for (int k = 0; k < cfg.num_users; ++k) used += sol.v(n, k).squaredNorm();
    const double violation = std::max(0.0, used - cfg.p_max[n]);
    if (r.worst_power_bs < 0 || violation > r.worst_power_violation) {
      r.worst_power_violation = violation;
      r.worst_power_bs = n;
    }
  }
  for (int g = 0; g < cfg.num_tasks(); ++g)
    if (!selection.contains(g)) r.worst_zero_block_norm = std::max(r.worst_zero_block_norm, sol.group_norm(g));
  r.sinr_ok = r.worst_sinr_shortfall <= tol.sinr_rel;
  r.power_ok = r.worst_power_violation <= tol.power_abs;
  r.zero_blocks_ok = r.worst_zero_block_norm <= tol.zero_block;
  return r;
}

}  // namespace gsbf
