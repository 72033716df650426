#pragma once

// Primal-dual interior-point method for SocProgram.
//
// Homogeneous self-dual embedding (so infeasibility is certified rather than
// guessed), Nesterov-Todd scaling, Mehrotra predictor-corrector. Each Newton
// system is reduced to the normal matrix H = G' W^-2 G, which is dense here
// and factored with Cholesky; equality rows are handled by a Schur complement.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "gsbf/conic/program.hpp"

namespace gsbf::conic {

enum class SolveStatus { optimal, infeasible, inaccurate, failure };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::inaccurate: return "inaccurate";
    case SolveStatus::failure: return "failure";
  }
  return "failure";
}

inline constexpr double kDefaultSolverTol = 1e-8;

struct SolverSettings {
  double tol = kDefaultSolverTol;
  double inaccurate_tol = 1e-5;
  int max_iter = 100;
  double step_fraction = 0.99;
  int refinement_steps = 3;
  bool verbose = false;
};

struct SolveResult {
  SolveStatus status = SolveStatus::failure;
  RVector x;  // primal (empty unless has_primal())
  RVector s;
  RVector y;
  RVector z;
  std::optional<BeamformingSolution> beam;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double achieved_tol = std::numeric_limits<double>::infinity();
  double solve_seconds = 0.0;
  int iterations = 0;
  std::string message;

  bool has_primal() const { return status == SolveStatus::optimal || status == SolveStatus::inaccurate; }
};

namespace detail {

struct SocBlock {
  int offset = 0;
  int dim = 0;
  std::vector<int> cols;  // columns of G touched by this cone
  RMatrix B;              // dense G rows restricted to cols (dim x cols)
  RMatrix Gs;             // W^-1 B for the current scaling
  RMatrix H;              // Gs' Gs (lower triangle)
  RVector wbar;           // NT scaling point, wbar' J wbar = 1
  double eta = 1.0;
};

struct LinearRow {
  std::vector<int> cols;
  std::vector<double> vals;
};

inline double jdot(const Eigen::Ref<const RVector>& u, const Eigen::Ref<const RVector>& v) {
  return u[0] * v[0] - u.tail(u.size() - 1).dot(v.tail(v.size() - 1));
}

/// u0 - ||u1||, computed as a difference of squares for accuracy: (u0^2 - ||u1||^2) / (u0 + ||u1||).
inline double soc_margin(const Eigen::Ref<const RVector>& u) {
  const double t = u.tail(u.size() - 1).norm();
  return u[0] - t;
}

/// Largest alpha >= 0 with u + alpha d in the cone (u strictly inside).
inline double soc_max_step(const Eigen::Ref<const RVector>& u, const Eigen::Ref<const RVector>& d) {
  const double unorm = u.tail(u.size() - 1).norm();
  const double c = (u[0] - unorm) * (u[0] + unorm);
  const double b = jdot(u, d);
  const double a = jdot(d, d);
  const double inf = std::numeric_limits<double>::infinity();
  // (u + alpha d)' J (u + alpha d) = a alpha^2 + 2 b alpha + c; first positive root.
  if (a >= 0.0 && b >= 0.0) return inf;
  const double disc = b * b - a * c;
  if (a > 0.0 && disc < 0.0) return inf;
  const double denom = -b + std::sqrt(std::max(disc, 0.0));
  if (denom <= 0.0) return inf;
  return c / denom;
}

}  // namespace detail

class InteriorPointSolver {
 public:
  explicit InteriorPointSolver(const SocProgram& prog, SolverSettings settings = {})
      : prog_(prog), settings_(settings) {
    prog_.check();
    n_ = prog_.num_vars;
    p_ = prog_.num_equalities();
    m_ = prog_.num_cone_rows();
    setup_cones();
  }

  SolveResult solve() {
    const auto t0 = std::chrono::steady_clock::now();
    SolveResult r = (n_ == 0) ? solve_constant() : run();
    r.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.has_primal()) {
      r.objective = prog_.c.dot(r.x) + prog_.objective_offset;
      r.beam = prog_.beamformer(r.x);
    }
    return r;
  }

 private:
  // --- cone bookkeeping --------------------------------------------------

  void setup_cones() {
    const SparseMatrix& G = prog_.G;
    lin_.resize(static_cast<std::size_t>(prog_.num_linear));
    for (int i = 0; i < prog_.num_linear; ++i)
      for (SparseMatrix::InnerIterator it(G, i); it; ++it) {
        lin_[static_cast<std::size_t>(i)].cols.push_back(static_cast<int>(it.col()));
        lin_[static_cast<std::size_t>(i)].vals.push_back(it.value());
      }
    int row = prog_.num_linear;
    std::vector<int> mark(static_cast<std::size_t>(n_), -1);
    for (int dim : prog_.soc_dims) {
      detail::SocBlock blk;
      blk.offset = row;
      blk.dim = dim;
      for (int r = row; r < row + dim; ++r)
        for (SparseMatrix::InnerIterator it(G, r); it; ++it) {
          const int col = static_cast<int>(it.col());
          if (mark[static_cast<std::size_t>(col)] != blk.offset) {
            mark[static_cast<std::size_t>(col)] = blk.offset;
            blk.cols.push_back(col);
          }
        }
      std::sort(blk.cols.begin(), blk.cols.end());
      std::vector<int> local(static_cast<std::size_t>(n_), -1);
      for (std::size_t j = 0; j < blk.cols.size(); ++j) local[static_cast<std::size_t>(blk.cols[j])] = static_cast<int>(j);
      blk.B = RMatrix::Zero(dim, static_cast<Eigen::Index>(blk.cols.size()));
      for (int r = row; r < row + dim; ++r)
        for (SparseMatrix::InnerIterator it(G, r); it; ++it)
          blk.B(r - row, local[static_cast<std::size_t>(it.col())]) = it.value();
      blk.wbar = RVector::Zero(dim);
      blk.wbar[0] = 1.0;
      soc_.push_back(std::move(blk));
      row += dim;
    }
    degree_ = prog_.num_linear + static_cast<int>(soc_.size());
    lin_scale_ = RVector::Ones(prog_.num_linear);
  }

  void set_identity_scaling() {
    lin_scale_.setOnes();
    for (auto& blk : soc_) {
      blk.wbar.setZero();
      blk.wbar[0] = 1.0;
      blk.eta = 1.0;
    }
  }

  /// NT scaling from the current (s, z). Returns false if either left the cone interior.
  bool update_scaling(const RVector& s, const RVector& z, RVector& lambda) {
    lambda.resize(m_);
    for (int i = 0; i < prog_.num_linear; ++i) {
      if (!(s[i] > 0.0) || !(z[i] > 0.0)) return false;
      lin_scale_[i] = std::sqrt(s[i] / z[i]);
      lambda[i] = std::sqrt(s[i] * z[i]);
    }
    for (auto& blk : soc_) {
      const auto sb = s.segment(blk.offset, blk.dim);
      const auto zb = z.segment(blk.offset, blk.dim);
      const double sres = detail::jdot(sb, sb);
      const double zres = detail::jdot(zb, zb);
      if (!(sres > 0.0) || !(zres > 0.0) || sb[0] <= 0.0 || zb[0] <= 0.0) return false;
      const RVector sbar = sb / std::sqrt(sres);
      const RVector zbar = zb / std::sqrt(zres);
      const double gamma = std::sqrt(std::max((1.0 + sbar.dot(zbar)) / 2.0, 0.0));
      if (!(gamma > 0.0)) return false;
      RVector jz = zbar;
      jz.tail(blk.dim - 1) *= -1.0;
      blk.wbar = (sbar + jz) / (2.0 * gamma);
      blk.eta = std::pow(sres / zres, 0.25);
      lambda.segment(blk.offset, blk.dim) = apply_w_block(blk, zb);
    }
    return true;
  }

  static RVector apply_w_block(const detail::SocBlock& blk, const Eigen::Ref<const RVector>& u) {
    const double w0 = blk.wbar[0];
    const auto w1 = blk.wbar.tail(blk.dim - 1);
    const double a = w1.dot(u.tail(blk.dim - 1));
    RVector out(blk.dim);
    out[0] = blk.eta * (w0 * u[0] + a);
    out.tail(blk.dim - 1) = blk.eta * (u.tail(blk.dim - 1) + (u[0] + a / (1.0 + w0)) * w1);
    return out;
  }

  static RVector apply_winv_block(const detail::SocBlock& blk, const Eigen::Ref<const RVector>& u) {
    const double w0 = blk.wbar[0];
    const auto w1 = blk.wbar.tail(blk.dim - 1);
    const double a = w1.dot(u.tail(blk.dim - 1));
    RVector out(blk.dim);
    out[0] = (w0 * u[0] - a) / blk.eta;
    out.tail(blk.dim - 1) = (u.tail(blk.dim - 1) + (-u[0] + a / (1.0 + w0)) * w1) / blk.eta;
    return out;
  }

  RVector apply_w(const RVector& u) const {
    RVector out(m_);
    out.head(prog_.num_linear) = lin_scale_.cwiseProduct(u.head(prog_.num_linear));
    for (const auto& blk : soc_) out.segment(blk.offset, blk.dim) = apply_w_block(blk, u.segment(blk.offset, blk.dim));
    return out;
  }

  RVector apply_winv(const RVector& u) const {
    RVector out(m_);
    out.head(prog_.num_linear) = u.head(prog_.num_linear).cwiseQuotient(lin_scale_);
    for (const auto& blk : soc_)
      out.segment(blk.offset, blk.dim) = apply_winv_block(blk, u.segment(blk.offset, blk.dim));
    return out;
  }

  RVector apply_w2(const RVector& u) const { return apply_w(apply_w(u)); }
  RVector apply_w2inv(const RVector& u) const { return apply_winv(apply_winv(u)); }

  // Jordan product u o v and its inverse.
  RVector circ(const RVector& u, const RVector& v) const {
    RVector out(m_);
    out.head(prog_.num_linear) = u.head(prog_.num_linear).cwiseProduct(v.head(prog_.num_linear));
    for (const auto& blk : soc_) {
      const auto ub = u.segment(blk.offset, blk.dim);
      const auto vb = v.segment(blk.offset, blk.dim);
      out[blk.offset] = ub.dot(vb);
      out.segment(blk.offset + 1, blk.dim - 1) = ub[0] * vb.tail(blk.dim - 1) + vb[0] * ub.tail(blk.dim - 1);
    }
    return out;
  }

  /// Solves lambda o u = d for u.
  RVector circ_solve(const RVector& lambda, const RVector& d) const {
    RVector out(m_);
    out.head(prog_.num_linear) = d.head(prog_.num_linear).cwiseQuotient(lambda.head(prog_.num_linear));
    for (const auto& blk : soc_) {
      const auto lb = lambda.segment(blk.offset, blk.dim);
      const auto db = d.segment(blk.offset, blk.dim);
      const double l0 = lb[0];
      const auto l1 = lb.tail(blk.dim - 1);
      const double rho = detail::jdot(lb, lb);
      const double u0 = (l0 * db[0] - l1.dot(db.tail(blk.dim - 1))) / rho;
      out[blk.offset] = u0;
      out.segment(blk.offset + 1, blk.dim - 1) = (db.tail(blk.dim - 1) - u0 * l1) / l0;
    }
    return out;
  }

  RVector unit_e() const {
    RVector e = RVector::Zero(m_);
    e.head(prog_.num_linear).setOnes();
    for (const auto& blk : soc_) e[blk.offset] = 1.0;
    return e;
  }

  double max_step(const RVector& u, const RVector& d) const {
    double alpha = std::numeric_limits<double>::infinity();
    for (int i = 0; i < prog_.num_linear; ++i)
      if (d[i] < 0.0) alpha = std::min(alpha, -u[i] / d[i]);
    for (const auto& blk : soc_)
      alpha = std::min(alpha, detail::soc_max_step(u.segment(blk.offset, blk.dim), d.segment(blk.offset, blk.dim)));
    return alpha;
  }

  /// Shifts u along e so it lies strictly inside the cone.
  void bring_to_cone(RVector& u) const {
    double worst = 0.0;
    for (int i = 0; i < prog_.num_linear; ++i) worst = std::max(worst, -u[i]);
    for (const auto& blk : soc_) worst = std::max(worst, -detail::soc_margin(u.segment(blk.offset, blk.dim)));
    bool interior = true;
    for (int i = 0; i < prog_.num_linear && interior; ++i) interior = u[i] > 0.0;
    for (const auto& blk : soc_) interior = interior && detail::soc_margin(u.segment(blk.offset, blk.dim)) > 0.0;
    if (!interior) u += (1.0 + worst) * unit_e();
  }

  // --- linear algebra ----------------------------------------------------

  // Normal matrix H = Gs' Gs with Gs = W^-1 G (scaled rows), so the accuracy of the
  // computed direction degrades like cond(W) rather than cond(W)^2.
  bool factor() {
    H_.setZero(n_, n_);
    for (int i = 0; i < prog_.num_linear; ++i) {
      const auto& row = lin_[static_cast<std::size_t>(i)];
      const double d = 1.0 / (lin_scale_[i] * lin_scale_[i]);
      for (std::size_t a = 0; a < row.cols.size(); ++a)
        for (std::size_t b = 0; b < row.cols.size(); ++b)
          H_(row.cols[a], row.cols[b]) += d * row.vals[a] * row.vals[b];
    }
    for (auto& blk : soc_) {
      const int nc = static_cast<int>(blk.cols.size());
      if (nc == 0) continue;
      blk.Gs.resize(blk.dim, nc);
      for (int j = 0; j < nc; ++j) blk.Gs.col(j) = apply_winv_block(blk, blk.B.col(j));
      blk.H.setZero(nc, nc);
      blk.H.selfadjointView<Eigen::Lower>().rankUpdate(blk.Gs.transpose());
      for (int b = 0; b < nc; ++b) {
        const int cb = blk.cols[static_cast<std::size_t>(b)];
        for (int a = b; a < nc; ++a) {
          const double v = blk.H(a, b);
          const int ca = blk.cols[static_cast<std::size_t>(a)];
          H_(ca, cb) += v;
          if (a != b) H_(cb, ca) += v;
        }
      }
    }
    // Regularize only when the plain factorization breaks down: a static shift of the
    // size of the small eigenvalues would stall iterative refinement near the optimum.
    const double max_diag = std::max(1.0, H_.diagonal().cwiseAbs().maxCoeff());
    llt_.compute(H_);
    double reg = 1e-15 * max_diag;
    while (llt_.info() != Eigen::Success) {
      if (reg > 1e-6 * max_diag) return false;
      RMatrix Hr = H_;
      Hr.diagonal().array() += reg;
      llt_.compute(Hr);
      reg *= 100.0;
    }
    if (p_ > 0) {
      const RMatrix At = RMatrix(prog_.A.transpose());
      HinvAt_ = llt_.solve(At);
      RMatrix S = RMatrix(prog_.A) * HinvAt_;
      S.diagonal().array() += 1e-14 * std::max(1.0, S.diagonal().cwiseAbs().maxCoeff());
      schur_.compute(S);
      if (schur_.info() != Eigen::Success) return false;
    }
    return true;
  }

  // Gs' u (u in scaled cone space, length m).
  RVector scaled_transpose(const RVector& u) const {
    RVector out = RVector::Zero(n_);
    for (int i = 0; i < prog_.num_linear; ++i) {
      const auto& row = lin_[static_cast<std::size_t>(i)];
      const double f = u[i] / lin_scale_[i];
      for (std::size_t a = 0; a < row.cols.size(); ++a) out[row.cols[a]] += f * row.vals[a];
    }
    for (const auto& blk : soc_) {
      if (blk.cols.empty()) continue;
      const RVector g = blk.Gs.transpose() * u.segment(blk.offset, blk.dim);
      for (std::size_t j = 0; j < blk.cols.size(); ++j) out[blk.cols[j]] += g[static_cast<Eigen::Index>(j)];
    }
    return out;
  }

  // Gs x.
  RVector scaled_apply(const RVector& x) const {
    RVector out = RVector::Zero(m_);
    for (int i = 0; i < prog_.num_linear; ++i) {
      const auto& row = lin_[static_cast<std::size_t>(i)];
      double acc = 0.0;
      for (std::size_t a = 0; a < row.cols.size(); ++a) acc += row.vals[a] * x[row.cols[a]];
      out[i] = acc / lin_scale_[i];
    }
    for (const auto& blk : soc_) {
      if (blk.cols.empty()) continue;
      RVector xs(static_cast<Eigen::Index>(blk.cols.size()));
      for (std::size_t j = 0; j < blk.cols.size(); ++j) xs[static_cast<Eigen::Index>(j)] = x[blk.cols[j]];
      out.segment(blk.offset, blk.dim) = blk.Gs * xs;
    }
    return out;
  }

  void reduced_solve(const RVector& t, const RVector& r2, RVector& dx, RVector& dy) const {
    if (p_ > 0) {
      const RVector Hinv_t = llt_.solve(t);
      dy = schur_.solve(prog_.A * Hinv_t - r2);
      dx = Hinv_t - HinvAt_ * dy;
    } else {
      dx = llt_.solve(t);
      dy.resize(0);
    }
  }

  /// Solves  [0 A' G'; A 0 0; G 0 -W^2] [dx; dy; dz] = [r1; r2; r3].
  /// With dzs = W dz and r3s = W^-1 r3 the last row reads Gs dx - dzs = r3s.
  void kkt_solve(const RVector& r1, const RVector& r2, const RVector& r3, RVector& dx, RVector& dy,
                 RVector& dz) const {
    const SparseMatrix& G = prog_.G;
    const RVector r3s = apply_winv(r3);
    reduced_solve(r1 + scaled_transpose(r3s), r2, dx, dy);
    RVector dzs = scaled_apply(dx) - r3s;
    dz = apply_winv(dzs);
    const double scale = 1.0 + std::max({r1.lpNorm<Eigen::Infinity>(), r2.size() ? r2.lpNorm<Eigen::Infinity>() : 0.0,
                                         r3.lpNorm<Eigen::Infinity>()});
    for (int it = 0; it < settings_.refinement_steps; ++it) {
      RVector e1 = r1 - G.transpose() * dz;
      if (p_ > 0) e1 -= prog_.A.transpose() * dy;
      const RVector e2 = (p_ > 0) ? RVector(r2 - prog_.A * dx) : RVector(0);
      const double err = std::max(e1.lpNorm<Eigen::Infinity>(), e2.size() ? e2.lpNorm<Eigen::Infinity>() : 0.0);
      if (settings_.verbose)
        std::fprintf(stderr, "    refine %d: err %.2e row3 %.2e\n", it, err, (G * dx - apply_w2(dz) - r3).norm());
      if (err <= 1e-15 * scale) break;
      RVector cx, cy;
      reduced_solve(e1, e2, cx, cy);
      dx += cx;
      if (p_ > 0) dy += cy;
      dzs += scaled_apply(cx);
      dz = apply_winv(dzs);
    }
  }

  // --- main loop ---------------------------------------------------------

  SolveResult solve_constant() const {
    // No variables: feasible iff h lies in the cone and b == 0.
    SolveResult r;
    r.x = RVector::Zero(0);
    bool ok = prog_.b.size() == 0 || prog_.b.lpNorm<Eigen::Infinity>() <= settings_.tol;
    for (int i = 0; i < prog_.num_linear && ok; ++i) ok = prog_.h[i] >= -settings_.tol;
    for (const auto& blk : soc_) ok = ok && detail::soc_margin(prog_.h.segment(blk.offset, blk.dim)) >= -settings_.tol;
    r.status = ok ? SolveStatus::optimal : SolveStatus::infeasible;
    r.achieved_tol = 0.0;
    if (ok) r.s = prog_.h;
    return r;
  }

  struct Iterate {
    RVector x, y, z, s;
    double tau = 1.0;
    double kappa = 1.0;
  };

  struct Metrics {
    double pres = 0.0, dres = 0.0, gap = 0.0, pcost = 0.0, dcost = 0.0;
    double pinf = std::numeric_limits<double>::infinity();
    double dinf = std::numeric_limits<double>::infinity();
    bool pinf_candidate = false, dinf_candidate = false;
    double merit = std::numeric_limits<double>::infinity();  // worst of the three optimality measures
  };

  struct Residuals {
    RVector rx, ry, rz;
    double rt = 0.0;
  };

  Residuals residuals(const Iterate& it) const {
    const SparseMatrix& G = prog_.G;
    Residuals r;
    r.rx = G.transpose() * it.z + prog_.c * it.tau;
    if (p_ > 0) r.rx += prog_.A.transpose() * it.y;
    r.ry = (p_ > 0) ? RVector(prog_.A * it.x - prog_.b * it.tau) : RVector(0);
    r.rz = it.s + G * it.x - prog_.h * it.tau;
    r.rt = it.kappa + prog_.c.dot(it.x) + (p_ > 0 ? prog_.b.dot(it.y) : 0.0) + prog_.h.dot(it.z);
    return r;
  }

  Metrics metrics(const Iterate& it, const Residuals& r) const {
    const RVector& c = prog_.c;
    const RVector& h = prog_.h;
    const RVector& b = prog_.b;
    const double tol = settings_.tol;
    Metrics mt;
    const double cx = c.dot(it.x);
    const double by = p_ > 0 ? b.dot(it.y) : 0.0;
    const double hz = h.dot(it.z);
    const double nx = it.x.norm();
    const double ny = p_ > 0 ? it.y.norm() : 0.0;
    const double nz = it.z.norm();
    const double ns = it.s.norm();
    const double pres_y = p_ > 0 ? r.ry.norm() / std::max(1.0, (b.size() ? b.norm() : 0.0) + nx / it.tau) : 0.0;
    const double pres_z = r.rz.norm() / std::max(1.0, h.norm() + (nx + ns) / it.tau);
    mt.pres = std::max(pres_y, pres_z) / it.tau;
    mt.dres = r.rx.norm() / std::max(1.0, c.norm() + (ny + nz) / it.tau) / it.tau;
    mt.gap = it.s.dot(it.z) / (it.tau * it.tau);
    mt.pcost = cx / it.tau;
    mt.dcost = -(by + hz) / it.tau;
    const double scale = std::max(1.0, std::min(std::abs(mt.pcost), std::abs(mt.dcost)));
    mt.merit = std::max({mt.pres, mt.dres, mt.gap / scale, std::abs(mt.pcost - mt.dcost) / scale});

    const double nyz = std::max(1.0, ny + nz);
    mt.pinf_candidate = (hz + by) / nyz < -tol;
    if (mt.pinf_candidate) {
      RVector gz = prog_.G.transpose() * it.z;
      if (p_ > 0) gz += prog_.A.transpose() * it.y;
      mt.pinf = gz.norm() / nyz;
    }
    const double nxm = std::max(1.0, nx);
    mt.dinf_candidate = cx / nxm < -tol;
    if (mt.dinf_candidate) {
      const double ax = p_ > 0 ? (prog_.A * it.x).norm() / nxm : 0.0;
      mt.dinf = std::max(ax, (prog_.G * it.x + it.s).norm() / std::max(1.0, nx + ns));
    }
    return mt;
  }

  SolveResult finish(SolveStatus status, const Iterate& it, const Metrics& mt, int iter, std::string msg) const {
    SolveResult result;
    result.status = status;
    result.iterations = iter;
    result.message = std::move(msg);
    result.achieved_tol = mt.merit;
    if (status == SolveStatus::optimal || status == SolveStatus::inaccurate) {
      result.x = it.x / it.tau;
      result.s = it.s / it.tau;
      result.y = it.y / it.tau;
      result.z = it.z / it.tau;
    } else if (status == SolveStatus::infeasible) {
      result.achieved_tol = mt.pinf;
      result.y = it.y;
      result.z = it.z;
    }
    return result;
  }

  SolveResult run() {
    const SparseMatrix& G = prog_.G;
    const RVector& c = prog_.c;
    const RVector& h = prog_.h;
    const RVector& b = prog_.b;
    const double tol = settings_.tol;

    // Initial point from two least-squares problems with W = I.
    set_identity_scaling();
    if (!factor()) return finish(SolveStatus::failure, Iterate{}, Metrics{}, 0, "singular initial normal matrix");
    Iterate it;
    RVector dz;
    kkt_solve(RVector::Zero(n_), b, h, it.x, it.y, dz);
    it.s = -dz;
    bring_to_cone(it.s);
    RVector dx, dy;
    kkt_solve(-c, RVector::Zero(p_), RVector::Zero(m_), dx, it.y, it.z);
    bring_to_cone(it.z);

    const RVector e = unit_e();
    RVector lambda;
    Iterate best = it;
    Metrics best_mt;
    int best_iter = 0;
    int worse_streak = 0;
    Metrics mt;
    int iter = 0;

    for (;; ++iter) {
      const Residuals res = residuals(it);
      mt = metrics(it, res);
      if (settings_.verbose)
        std::fprintf(stderr, "%3d pcost %+.6e dcost %+.6e gap %.2e pres %.2e dres %.2e tau %.2e kap %.2e\n", iter,
                     mt.pcost, mt.dcost, mt.gap, mt.pres, mt.dres, it.tau, it.kappa);
      const double scale = std::max(1.0, std::min(std::abs(mt.pcost), std::abs(mt.dcost)));
      if (mt.pres <= tol && mt.dres <= tol && mt.gap <= tol * scale)
        return finish(SolveStatus::optimal, it, mt, iter, "converged");
      if (mt.pinf_candidate && mt.pinf <= tol && it.tau < it.kappa)
        return finish(SolveStatus::infeasible, it, mt, iter, "primal infeasibility certificate");
      if (mt.dinf_candidate && mt.dinf <= tol && it.tau < it.kappa)
        return finish(SolveStatus::failure, it, mt, iter, "problem appears unbounded");

      if (mt.merit < best_mt.merit) {
        best = it;
        best_mt = mt;
        best_iter = iter;
        worse_streak = 0;
      } else if (mt.merit > 10.0 * best_mt.merit && best_mt.merit < 1e-3) {
        // Directions have lost accuracy; further steps only degrade the iterate.
        if (++worse_streak >= 3) break;
      }
      if (iter >= settings_.max_iter) break;

      if (!update_scaling(it.s, it.z, lambda) || !factor()) break;
      const double tau = it.tau;
      const double kappa = it.kappa;
      const double mu = (it.s.dot(it.z) + tau * kappa) / (degree_ + 1.0);

      // tau column: K u1 = [-c; b; h]
      RVector x1, y1, z1;
      kkt_solve(-c, b, h, x1, y1, z1);
      const double denom = c.dot(x1) + (p_ > 0 ? b.dot(y1) : 0.0) + h.dot(z1) - kappa / tau;

      auto direction = [&](double res_weight, const RVector& ds_target, double dkap_target, RVector& ddx, RVector& ddy,
                           RVector& ddz, RVector& dds, double& dtau, double& dkap) {
        const RVector w_lam_ds = apply_w(circ_solve(lambda, ds_target));
        RVector x2, y2, z2;
        kkt_solve(-res_weight * res.rx, -res_weight * res.ry, -res_weight * res.rz - w_lam_ds, x2, y2, z2);
        const double num =
            -res_weight * res.rt - dkap_target / tau - (c.dot(x2) + (p_ > 0 ? b.dot(y2) : 0.0) + h.dot(z2));
        dtau = num / denom;
        ddx = x2 + dtau * x1;
        ddy = (p_ > 0) ? RVector(y2 + dtau * y1) : RVector(0);
        ddz = z2 + dtau * z1;
        // From the linearized primal row rather than W(lambda \ ds) - W^2 dz: the latter loses
        // accuracy when W is badly conditioned near the cone boundary.
        dds = -res_weight * res.rz - G * ddx + h * dtau;
        dkap = (dkap_target - kappa * dtau) / tau;
      };

      auto step_length = [&](const RVector& dds, const RVector& ddz, double dtau, double dkap) {
        double a = std::min(max_step(it.s, dds), max_step(it.z, ddz));
        if (dtau < 0.0) a = std::min(a, -tau / dtau);
        if (dkap < 0.0) a = std::min(a, -kappa / dkap);
        return a;
      };

      // Predictor.
      RVector dx_a, dy_a, dz_a, ds_a;
      double dtau_a = 0.0, dkap_a = 0.0;
      const RVector lam2 = circ(lambda, lambda);
      direction(1.0, -lam2, -tau * kappa, dx_a, dy_a, dz_a, ds_a, dtau_a, dkap_a);
      const double alpha_a = std::min(1.0, step_length(ds_a, dz_a, dtau_a, dkap_a));
      const double sigma = std::clamp(std::pow(1.0 - alpha_a, 3), 0.0, 1.0);

      // Corrector.
      const RVector ds_target = -lam2 - circ(apply_winv(ds_a), apply_w(dz_a)) + sigma * mu * e;
      const double dkap_target = -tau * kappa - dtau_a * dkap_a + sigma * mu;
      RVector ds;
      double dtau = 0.0, dkap = 0.0;
      direction(1.0 - sigma, ds_target, dkap_target, dx, dy, dz, ds, dtau, dkap);
      double alpha = std::min(1.0, settings_.step_fraction * step_length(ds, dz, dtau, dkap));
      if (!(alpha > 1e-10) || !std::isfinite(alpha)) break;

      it.x += alpha * dx;
      if (p_ > 0) it.y += alpha * dy;
      it.z += alpha * dz;
      it.s += alpha * ds;
      it.tau += alpha * dtau;
      it.kappa += alpha * dkap;
      if (!(it.tau > 0.0) || !(it.kappa > 0.0) || !it.x.allFinite() || !it.z.allFinite()) break;
    }

    // Stalled or out of iterations: fall back to the best iterate seen.
    if (best_mt.merit <= settings_.inaccurate_tol)
      return finish(SolveStatus::inaccurate, best, best_mt, iter, "reduced accuracy (best iterate " +
                                                                    std::to_string(best_iter) + ")");
    if (mt.pinf_candidate && mt.pinf <= settings_.inaccurate_tol && it.tau < it.kappa)
      return finish(SolveStatus::infeasible, it, mt, iter, "primal infeasibility certificate (reduced accuracy)");
    return finish(SolveStatus::failure, it, mt, iter, "no convergence");
  }

  const SocProgram& prog_;
  SolverSettings settings_;
  int n_ = 0;
  int p_ = 0;
  int m_ = 0;
  int degree_ = 0;
  std::vector<detail::LinearRow> lin_;
  std::vector<detail::SocBlock> soc_;
  RVector lin_scale_;
  RMatrix H_;
  Eigen::LLT<RMatrix> llt_;
  RMatrix HinvAt_;
  Eigen::LLT<RMatrix> schur_;
};

/// Solves a program with the built-in interior-point backend.
inline SolveResult solve(const SocProgram& prog, const SolverSettings& settings) {
  return InteriorPointSolver(prog, settings).solve();
}

inline SolveResult solve(const SocProgram& prog, double tol = kDefaultSolverTol) {
  SolverSettings s;
  s.tol = tol;
  return solve(prog, s);
}

}  // namespace gsbf::conic
