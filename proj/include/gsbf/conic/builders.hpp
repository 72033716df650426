#pragma once

// Convex subproblems of the sparse beamforming pipeline as SocPrograms.
//
// Every cone is written so its entries are O(1) for typical instances: the
// QoS cone of user k is divided by sigma_k, which makes its noise entry 1.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsbf/conic/program.hpp"
#include "gsbf/netmodel.hpp"
#include "gsbf/task_selection.hpp"

namespace gsbf::conic {

/// How blocks that must be zero enter a program.
enum class ZeroBlocks {
  eliminate,  // dropped from the variable vector
  pin,        // kept, with equality rows v_nk = 0
};

inline std::string task_name(const std::string& prefix, int flat, int num_users) {
  const TaskId t = task_at(flat, num_users);
  return prefix + "(" + std::to_string(t.bs) + "," + std::to_string(t.user) + ")";
}

/// Complement of a selection, in BS-major order.
inline std::vector<TaskId> inactive_tasks(const TaskSelection& sel) {
  std::vector<TaskId> out;
  for (int g = 0; g < sel.num_bs * sel.num_users; ++g)
    if (!sel.contains(g)) out.push_back(task_at(g, sel.num_users));
  return out;
}

inline std::vector<bool> active_mask(const NetworkConfig& cfg, const std::vector<TaskId>& inactive) {
  std::vector<bool> mask(static_cast<std::size_t>(cfg.num_bs * cfg.num_users), true);
  for (const TaskId& t : inactive) {
    if (t.bs < 0 || t.bs >= cfg.num_bs || t.user < 0 || t.user >= cfg.num_users)
      throw std::out_of_range("inactive task outside the network");
    mask[static_cast<std::size_t>(flat_index(t, cfg.num_users))] = false;
  }
  return mask;
}

inline void check_dims(const ChannelRealization& ch, const NetworkConfig& cfg) {
  if (ch.num_bs() != cfg.num_bs || ch.num_users() != cfg.num_users || ch.antennas() != cfg.antennas)
    throw std::invalid_argument("channel dimensions do not match the network config");
}

/// One cone per user k:
///   || [Re, Im of h_k^H v_l for l != k ; sigma_k] || <= Re(h_k^H v_k) / sqrt(gamma_k),
/// divided through by sigma_k. Dimension 2K.
inline void build_qos_constraints(ProgramBuilder& pb, const RealChannel& rc, const NetworkConfig& cfg) {
  const BeamLayout& lay = pb.layout();
  const int N = cfg.num_bs;
  const int K = cfg.num_users;
  for (int k = 0; k < K; ++k) {
    const double inv_sigma = 1.0 / std::sqrt(cfg.noise_power[k]);
    const int row = pb.begin_cone(2 * K, "qos(" + std::to_string(k) + ")");
    for (int n = 0; n < N; ++n)
      if (lay.present(TaskId{n, k}))
        pb.add_block_row(row, lay.offset(TaskId{n, k}), rc.at(n, k), 0, inv_sigma / std::sqrt(cfg.gamma[k]));
    int r = row + 1;
    for (int l = 0; l < K; ++l) {
      if (l == k) continue;
      for (int n = 0; n < N; ++n) {
        if (!lay.present(TaskId{n, l})) continue;
        pb.add_block_row(r, lay.offset(TaskId{n, l}), rc.at(n, k), 0, inv_sigma);
        pb.add_block_row(r + 1, lay.offset(TaskId{n, l}), rc.at(n, k), 1, inv_sigma);
      }
      r += 2;
    }
    pb.set_h(r, 1.0);
  }
}

/// One cone per BS: ||(v_n1, ..., v_nK)|| <= sqrt(P_n^max). BSs with no present block are skipped.
inline void build_power_constraints(ProgramBuilder& pb, const NetworkConfig& cfg) {
  const BeamLayout& lay = pb.layout();
  const int w = lay.group_width();
  for (int n = 0; n < cfg.num_bs; ++n) {
    std::vector<int> offs;
    for (int k = 0; k < cfg.num_users; ++k)
      if (lay.present(TaskId{n, k})) offs.push_back(lay.offset(TaskId{n, k}));
    if (offs.empty()) continue;
    const int row = pb.begin_cone(1 + w * static_cast<int>(offs.size()), "power(" + std::to_string(n) + ")");
    pb.set_h(row, std::sqrt(cfg.p_max[n]));
    int r = row + 1;
    for (int off : offs)
      for (int j = 0; j < w; ++j) pb.add_G(r++, off + j, -1.0);
  }
}

/// Adds sum_g weight_g ||v_g|| to the objective through epigraphs t_g >= ||v_g||.
/// Groups with zero weight (or eliminated) get no epigraph.
inline void build_group_norm_objective(ProgramBuilder& pb, const RVector& weights) {
  const BeamLayout& lay = pb.layout();
  const int G = lay.num_bs() * lay.num_users();
  if (weights.size() != G) throw std::invalid_argument("one weight per (BS, user) group expected");
  const int w = lay.group_width();
  for (int g = 0; g < G; ++g) {
    if (weights[g] < 0.0 || !std::isfinite(weights[g])) throw std::invalid_argument("weights must be finite and >= 0");
    if (!lay.present(g) || weights[g] == 0.0) continue;
    const int t = pb.add_aux(task_name("t", g, lay.num_users()));
    const int row = pb.begin_cone(w + 1, task_name("norm", g, lay.num_users()));
    pb.add_G(row, t, -1.0);
    for (int j = 0; j < w; ++j) pb.add_G(row + 1 + j, lay.offset(g) + j, -1.0);
    pb.set_objective(t, weights[g]);
  }
}

/// q >= sum_j d_j^2 (x_j - center_j)^2 over the beam variables, as the rotated cone
/// ||(2 d (x - center), q - 1)|| <= q + 1. Returns the index of q.
inline int build_quadratic_epigraph(ProgramBuilder& pb, const RVector& center, const RVector& d, const std::string& name) {
  const int nb = pb.layout().size();
  if (center.size() != nb || d.size() != nb) throw std::invalid_argument("quadratic epigraph: size mismatch");
  const int q = pb.add_aux(name);
  const int row = pb.begin_cone(nb + 2, name);
  pb.add_G(row, q, -1.0);
  pb.set_h(row, 1.0);
  pb.add_G(row + 1, q, -1.0);
  pb.set_h(row + 1, -1.0);
  for (int j = 0; j < nb; ++j) {
    pb.add_G(row + 2 + j, j, -2.0 * d[j]);
    pb.set_h(row + 2 + j, -2.0 * d[j] * center[j]);
  }
  return q;
}

namespace detail {

inline ProgramBuilder constrained_builder(const std::vector<TaskId>& inactive, const ChannelRealization& ch,
                                          const NetworkConfig& cfg, ZeroBlocks mode) {
  check_dims(ch, cfg);
  const std::vector<bool> mask = active_mask(cfg, inactive);
  BeamLayout lay = (mode == ZeroBlocks::eliminate)
                       ? BeamLayout(cfg.num_bs, cfg.num_users, cfg.antennas, mask)
                       : BeamLayout::full(cfg.num_bs, cfg.num_users, cfg.antennas);
  ProgramBuilder pb(std::move(lay));
  const RealChannel rc = realify(ch);
  build_qos_constraints(pb, rc, cfg);
  build_power_constraints(pb, cfg);
  if (mode == ZeroBlocks::pin)
    for (std::size_t g = 0; g < mask.size(); ++g)
      if (!mask[g])
        for (int j = 0; j < pb.layout().group_width(); ++j)
          pb.add_equality({{pb.layout().offset(static_cast<int>(g)) + j, 1.0}}, 0.0);
  return pb;
}

/// 1/sqrt(eta_n) for every real coordinate of every present block.
inline RVector inverse_sqrt_eta(const BeamLayout& lay, const NetworkConfig& cfg) {
  RVector d(lay.size());
  for (int g = 0; g < lay.num_bs() * lay.num_users(); ++g) {
    if (!lay.present(g)) continue;
    const double s = 1.0 / std::sqrt(cfg.eta[task_at(g, lay.num_users()).bs]);
    d.segment(lay.offset(g), lay.group_width()).setConstant(s);
  }
  return d;
}

}  // namespace detail

/// minimize sum w_g ||v_g|| + (beta/2) ||v - v_prev||^2 subject to QoS and power cones.
/// beta = 0 drops the proximal term.
inline SocProgram build_stage1(const RVector& weights, const BeamformingSolution& v_prev, double beta,
                               const ChannelRealization& ch, const NetworkConfig& cfg) {
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  ProgramBuilder pb = detail::constrained_builder({}, ch, cfg, ZeroBlocks::eliminate);
  build_group_norm_objective(pb, weights);
  if (beta > 0.0) {
    RVector center = RVector::Zero(pb.layout().size());
    for (int g = 0; g < cfg.num_bs * cfg.num_users; ++g)
      center.segment(pb.layout().offset(g), pb.layout().group_width()) = to_real(v_prev.group(g));
    const int q = build_quadratic_epigraph(pb, center, RVector::Ones(pb.layout().size()), "prox");
    pb.set_objective(q, beta / 2.0);
  }
  return pb.build();
}

/// Zero objective; feasible iff the QoS targets are reachable with the inactive blocks at zero.
inline SocProgram build_feasibility(const std::vector<TaskId>& inactive, const ChannelRealization& ch,
                                    const NetworkConfig& cfg, ZeroBlocks mode = ZeroBlocks::eliminate) {
  return detail::constrained_builder(inactive, ch, cfg, mode).build();
}

/// minimize sum ||v_nk||^2 / eta_n over the blocks that are not inactive.
inline SocProgram build_refinement(const std::vector<TaskId>& inactive, const ChannelRealization& ch,
                                   const NetworkConfig& cfg, ZeroBlocks mode = ZeroBlocks::eliminate) {
  ProgramBuilder pb = detail::constrained_builder(inactive, ch, cfg, mode);
  const RVector d = detail::inverse_sqrt_eta(pb.layout(), cfg);
  const int q = build_quadratic_epigraph(pb, RVector::Zero(pb.layout().size()), d, "transmit");
  pb.set_objective(q, 1.0);
  return pb.build();
}

/// Coordinated beamforming: every BS serves every user.
inline SocProgram build_cb(const ChannelRealization& ch, const NetworkConfig& cfg) {
  return build_refinement({}, ch, cfg);
}

/// minimize sum rho_g ||v_g|| subject to QoS and power cones.
inline SocProgram build_mixed_l12(const RVector& rho, const ChannelRealization& ch, const NetworkConfig& cfg) {
  ProgramBuilder pb = detail::constrained_builder({}, ch, cfg, ZeroBlocks::eliminate);
  build_group_norm_objective(pb, rho);
  return pb.build();
}

}  // namespace gsbf::conic
