#pragma once

// Runtime certificates for the proximal reweighted iteration: log-sum objective,
// convex surrogate, model reduction, residual bound and the ergodic rate envelope.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "gsbf/netmodel.hpp"
#include "gsbf/trace.hpp"

namespace gsbf {

/// Omega(v) = sum rho_g log(1 + p ||v_g||).
inline double log_sum_objective(const BeamformingSolution& sol, const RVector& rho, double p) {
  if (rho.size() != sol.num_groups()) throw std::invalid_argument("log_sum_objective: one rho per group");
  if (!(p > 0.0)) throw std::invalid_argument("log_sum_objective: p must be positive");
  double acc = 0.0;
  for (int g = 0; g < sol.num_groups(); ++g) acc += rho[g] * std::log1p(p * sol.group_norm(g));
  return acc;
}

/// G(v; v_prev) = sum w_g ||v_g|| + (beta/2) ||v - v_prev||^2, without the indicator of the constraint set.
inline double surrogate_G(const BeamformingSolution& v, const RVector& weights, const BeamformingSolution& v_prev,
                          double beta) {
  if (weights.size() != v.num_groups()) throw std::invalid_argument("surrogate_G: one weight per group");
  double acc = 0.0;
  for (int g = 0; g < v.num_groups(); ++g) acc += weights[g] * v.group_norm(g);
  const double d = distance(v, v_prev);
  return acc + 0.5 * beta * d * d;
}

struct SurrogateValue {
  double value = 0.0;
  bool feasible = true;  // false: the indicator term would be +inf
};

/// Surrogate with the constraint set checked instead of folded in as +inf.
inline SurrogateValue surrogate_G(const BeamformingSolution& v, const RVector& weights,
                                  const BeamformingSolution& v_prev, double beta, const ChannelRealization& ch,
                                  const NetworkConfig& cfg, const ValidationTolerance& tol = {}) {
  const TaskSelection all = TaskSelection::all(cfg.num_bs, cfg.num_users);
  return {surrogate_G(v, weights, v_prev, beta), validate(v, all, ch, cfg, tol).passed()};
}

/// Delta G = G(v_prev; v_prev) - G(v_next; v_prev).
inline double model_reduction(const BeamformingSolution& v_prev, const BeamformingSolution& v_next,
                              const RVector& weights, double beta) {
  return surrogate_G(v_prev, weights, v_prev, beta) - surrogate_G(v_next, weights, v_prev, beta);
}

struct CertificateParams {
  double kappa = 0.0;  // max rho
  double p = 0.0;
  double beta = 0.0;

  static CertificateParams from(const RVector& rho, double p, double beta) {
    CertificateParams c{rho.size() ? rho.maxCoeff() : 0.0, p, beta};
    c.check();
    return c;
  }

  void check() const {
    if (!(kappa > 0.0) || !(p > 0.0) || !(beta > 0.0))
      throw std::invalid_argument("CertificateParams: kappa, p and beta must be positive");
  }

  /// beta^2 + 2 beta kappa p^2 + kappa^2 p^4
  double residual_coefficient_sq() const {
    const double p2 = p * p;
    return beta * beta + 2.0 * beta * kappa * p2 + kappa * kappa * p2 * p2;
  }
  double residual_coefficient() const { return std::sqrt(residual_coefficient_sq()); }

  /// (2/beta) (beta^2 + 2 beta kappa p^2 + kappa^2 p^4)
  double envelope_coefficient() const { return 2.0 / beta * residual_coefficient_sq(); }
};

inline double residual_bound(double displacement, const CertificateParams& params) {
  return params.residual_coefficient() * displacement;
}

/// Upper bound on the optimality residual at v_next from the displacement of the step.
inline double residual_bound(const BeamformingSolution& v_prev, const BeamformingSolution& v_next,
                             const CertificateParams& params) {
  return residual_bound(distance(v_prev, v_next), params);
}

struct RateCertificate {
  std::vector<double> running_min_sq;  // t = 1..T: min over the first t steps of residual_bound^2
  std::vector<double> envelope;        // t = 1..T: C (J(v^0) - J_final) / t
  double j_initial = 0.0;
  double j_final = 0.0;
  bool holds = true;                   // running_min_sq[t] <= envelope[t] for every t
  bool running_min_nonincreasing = true;
  int first_violation = -1;            // t of the first violated inequality, -1 if none

  /// Allows for rounding in the comparison: lhs <= rhs + slack * max(1, rhs).
  static bool within(double lhs, double rhs, double slack) { return lhs <= rhs + slack * std::max(1.0, std::abs(rhs)); }
};

/// Checks min_{i<=t} bound_i^2 <= (2/beta)(beta^2 + 2 beta kappa p^2 + kappa^2 p^4)(J(v^0) - J_final) / t.
inline RateCertificate rate_certificate(const ConvergenceTrace& trace, const CertificateParams& params,
                                        double slack = 0.0) {
  RateCertificate rc;
  if (trace.rows.empty()) return rc;
  rc.j_initial = trace.rows.front().j;
  rc.j_final = trace.rows.back().j;
  const double c = params.envelope_coefficient();
  double best = std::numeric_limits<double>::infinity();
  for (int t = 1; t <= trace.iterations(); ++t) {
    const double b = trace.rows[static_cast<std::size_t>(t)].residual_bound;
    const double prev = best;
    best = std::min(best, b * b);
    rc.running_min_sq.push_back(best);
    const double env = c * (rc.j_initial - rc.j_final) / t;
    rc.envelope.push_back(env);
    if (best > prev) rc.running_min_nonincreasing = false;
    if (!RateCertificate::within(best, env, slack) && rc.holds) {
      rc.holds = false;
      rc.first_violation = t;
    }
  }
  return rc;
}

}  // namespace gsbf
