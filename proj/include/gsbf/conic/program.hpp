#pragma once

// Real second-order-cone program description:
//
//   minimize    c'x + offset
//   subject to  h - G x in K,   K = R_+^{num_linear} x Q^{d_1} x ... x Q^{d_m}
//               A x = b
//
// where Q^d = {(s0, s1) : s0 >= ||s1||}. Beamformer blocks are stored as
// real variables with (Re, Im) interleaved per antenna.

#include <algorithm>
#include <array>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "gsbf/netmodel.hpp"
#include "gsbf/task_selection.hpp"
#include "gsbf/types.hpp"

namespace gsbf::conic {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

/// Where each real variable lives: a beamformer coordinate or an auxiliary epigraph variable.
struct VariableLabel {
  enum class Kind { beam_re, beam_im, aux };
  Kind kind = Kind::aux;
  TaskId task{};
  int antenna = -1;
  std::string aux_name;  // e.g. "t(0,3)" or "prox"
};

/// Maps beamformer blocks (n,k) to their position in the real variable vector.
/// Eliminated blocks have offset -1 and are identically zero.
class BeamLayout {
 public:
  BeamLayout() = default;
  BeamLayout(int num_bs, int num_users, int antennas, const std::vector<bool>& present)
      : num_bs_(num_bs), num_users_(num_users), antennas_(antennas),
        offsets_(static_cast<std::size_t>(num_bs * num_users), -1) {
    if (static_cast<int>(present.size()) != num_bs * num_users)
      throw std::invalid_argument("BeamLayout: mask size must equal N*K");
    int next = 0;
    for (std::size_t g = 0; g < present.size(); ++g)
      if (present[g]) {
        offsets_[g] = next;
        next += 2 * antennas;
      }
    size_ = next;
  }

  static BeamLayout full(int num_bs, int num_users, int antennas) {
    return BeamLayout(num_bs, num_users, antennas, std::vector<bool>(static_cast<std::size_t>(num_bs * num_users), true));
  }

  int num_bs() const { return num_bs_; }
  int num_users() const { return num_users_; }
  int antennas() const { return antennas_; }
  int group_width() const { return 2 * antennas_; }
  /// Number of real beamformer variables.
  int size() const { return size_; }
  int offset(int flat) const { return offsets_[static_cast<std::size_t>(flat)]; }
  int offset(TaskId t) const { return offset(flat_index(t, num_users_)); }
  bool present(int flat) const { return offset(flat) >= 0; }
  bool present(TaskId t) const { return offset(t) >= 0; }

 private:
  int num_bs_ = 0;
  int num_users_ = 0;
  int antennas_ = 0;
  int size_ = 0;
  std::vector<int> offsets_;
};

/// v (complex, length L) -> [Re v_0, Im v_0, Re v_1, Im v_1, ...]
inline RVector to_real(const CVector& v) {
  RVector out(2 * v.size());
  for (Eigen::Index l = 0; l < v.size(); ++l) {
    out[2 * l] = v[l].real();
    out[2 * l + 1] = v[l].imag();
  }
  return out;
}

inline CVector to_complex(const RVector& x) {
  if (x.size() % 2 != 0) throw std::invalid_argument("to_complex: odd length");
  CVector out(x.size() / 2);
  for (Eigen::Index l = 0; l < out.size(); ++l) out[l] = Complex(x[2 * l], x[2 * l + 1]);
  return out;
}

/// Two real rows R (2 x 2L) with R * to_real(v) = [Re(h^H v), Im(h^H v)].
/// For h = a + ib and v = x + iy: h^H v = (a x + b y) + i (a y - b x).
inline Eigen::Matrix<double, 2, Eigen::Dynamic> inner_product_rows(const CVector& h) {
  Eigen::Matrix<double, 2, Eigen::Dynamic> R(2, 2 * h.size());
  for (Eigen::Index l = 0; l < h.size(); ++l) {
    const double a = h[l].real();
    const double b = h[l].imag();
    R(0, 2 * l) = a;
    R(0, 2 * l + 1) = b;
    R(1, 2 * l) = -b;
    R(1, 2 * l + 1) = a;
  }
  return R;
}

/// Real embedding of every h_nk.
struct RealChannel {
  int num_bs = 0;
  int num_users = 0;
  int antennas = 0;
  std::vector<Eigen::Matrix<double, 2, Eigen::Dynamic>> rows;  // BS-major

  const Eigen::Matrix<double, 2, Eigen::Dynamic>& at(int bs, int user) const {
    return rows[static_cast<std::size_t>(bs * num_users + user)];
  }
};

inline RealChannel realify(const ChannelRealization& ch) {
  RealChannel rc;
  rc.num_bs = ch.num_bs();
  rc.num_users = ch.num_users();
  rc.antennas = ch.antennas();
  rc.rows.reserve(static_cast<std::size_t>(rc.num_bs * rc.num_users));
  for (int n = 0; n < rc.num_bs; ++n)
    for (int k = 0; k < rc.num_users; ++k) rc.rows.push_back(inner_product_rows(ch.h(n, k)));
  return rc;
}

struct SocProgram {
  int num_vars = 0;
  RVector c;
  double objective_offset = 0.0;
  SparseMatrix G;
  RVector h;
  int num_linear = 0;
  std::vector<int> soc_dims;
  SparseMatrix A;
  RVector b;

  BeamLayout layout;
  std::vector<VariableLabel> labels;
  std::vector<std::string> cone_names;  // one per second-order cone

  int num_cone_rows() const {
    int rows = num_linear;
    for (int d : soc_dims) rows += d;
    return rows;
  }
  int num_equalities() const { return static_cast<int>(A.rows()); }

  /// Throws std::logic_error when dimensions or the variable map are inconsistent.
  void check() const {
    auto fail = [](const std::string& m) { throw std::logic_error("SocProgram: " + m); };
    if (c.size() != num_vars) fail("objective length != num_vars");
    if (G.cols() != num_vars || A.cols() != num_vars) fail("constraint matrices must have num_vars columns");
    if (G.rows() != num_cone_rows() || h.size() != G.rows()) fail("cone rows do not match declared cone dimensions");
    if (A.rows() != b.size()) fail("equality rows != rhs length");
    if (std::any_of(soc_dims.begin(), soc_dims.end(), [](int d) { return d < 1; })) fail("empty cone");
    if (static_cast<int>(labels.size()) != num_vars) fail("every variable needs a label");
    // Beam variables must be exactly the layout's slots, each labelled once.
    std::vector<int> seen(static_cast<std::size_t>(num_vars), 0);
    int beam_vars = 0;
    for (int g = 0; g < layout.num_bs() * layout.num_users(); ++g) {
      const int off = layout.offset(g);
      if (off < 0) continue;
      for (int j = 0; j < layout.group_width(); ++j) {
        const int idx = off + j;
        if (idx >= num_vars) fail("layout offset beyond variable vector");
        const VariableLabel& lab = labels[static_cast<std::size_t>(idx)];
        const auto want = (j % 2 == 0) ? VariableLabel::Kind::beam_re : VariableLabel::Kind::beam_im;
        if (lab.kind != want || lab.task != task_at(g, layout.num_users()) || lab.antenna != j / 2)
          fail("label does not match layout");
        ++seen[static_cast<std::size_t>(idx)];
        ++beam_vars;
      }
    }
    for (int i = 0; i < num_vars; ++i) {
      const bool is_beam = labels[static_cast<std::size_t>(i)].kind != VariableLabel::Kind::aux;
      if (is_beam && seen[static_cast<std::size_t>(i)] != 1) fail("beam label not covered by layout");
    }
    if (beam_vars != layout.size()) fail("layout size mismatch");
  }

  /// Regroups the beamformer part of a primal vector.
  BeamformingSolution beamformer(const RVector& x, double zero_tol = kDefaultZeroTol) const {
    BeamformingSolution sol(layout.num_bs(), layout.num_users(), layout.antennas(), zero_tol);
    for (int g = 0; g < layout.num_bs() * layout.num_users(); ++g) {
      const int off = layout.offset(g);
      if (off >= 0) sol.set_group(g, to_complex(x.segment(off, layout.group_width())));
    }
    return sol;
  }

  /// Inverse of beamformer(): writes a grouped beamformer into the beam slots of x.
  /// Blocks that are eliminated in the layout must be zero.
  void scatter_beamformer(const BeamformingSolution& sol, RVector& x) const {
    for (int g = 0; g < layout.num_bs() * layout.num_users(); ++g) {
      const int off = layout.offset(g);
      if (off >= 0)
        x.segment(off, layout.group_width()) = to_real(sol.group(g));
      else if (sol.group_norm(g) != 0.0)
        throw std::invalid_argument("scatter_beamformer: nonzero block is eliminated in this program");
    }
  }
};

/// Incremental builder: allocate variables, append cones row by row.
class ProgramBuilder {
 public:
  explicit ProgramBuilder(BeamLayout layout) : layout_(std::move(layout)) {
    labels_.resize(static_cast<std::size_t>(layout_.size()));
    for (int g = 0; g < layout_.num_bs() * layout_.num_users(); ++g) {
      const int off = layout_.offset(g);
      if (off < 0) continue;
      for (int l = 0; l < layout_.antennas(); ++l) {
        labels_[static_cast<std::size_t>(off + 2 * l)] = {VariableLabel::Kind::beam_re, task_at(g, layout_.num_users()), l, {}};
        labels_[static_cast<std::size_t>(off + 2 * l + 1)] = {VariableLabel::Kind::beam_im, task_at(g, layout_.num_users()), l, {}};
      }
    }
  }

  const BeamLayout& layout() const { return layout_; }
  int num_vars() const { return static_cast<int>(labels_.size()); }

  int add_aux(std::string name) {
    labels_.push_back({VariableLabel::Kind::aux, {}, -1, std::move(name)});
    return num_vars() - 1;
  }

  /// Starts a second-order cone of the given dimension; returns its first row.
  int begin_cone(int dim, std::string name) {
    const int first = rows_;
    soc_dims_.push_back(dim);
    cone_names_.push_back(std::move(name));
    rows_ += dim;
    h_.resize(static_cast<std::size_t>(rows_), 0.0);
    return first;
  }

  /// Adds coefficient to G(row, col): the cone slot is h(row) - sum G(row, :) x.
  void add_G(int row, int col, double value) {
    if (value != 0.0) g_triplets_.emplace_back(row, col, value);
  }
  void set_h(int row, double value) { h_[static_cast<std::size_t>(row)] = value; }

  /// Cone slot row := coeff * (R x_block) component `comp` where R is a 2 x 2L embedding.
  template <class Rows>
  void add_block_row(int row, int block_offset, const Rows& R, int comp, double coeff) {
    for (Eigen::Index j = 0; j < R.cols(); ++j) add_G(row, block_offset + static_cast<int>(j), -coeff * R(comp, j));
  }

  void add_equality(const std::vector<std::pair<int, double>>& coeffs, double rhs) {
    const int row = static_cast<int>(b_.size());
    for (const auto& [col, v] : coeffs) a_triplets_.emplace_back(row, col, v);
    b_.push_back(rhs);
  }

  void set_objective(int col, double value) {
    if (c_.size() < labels_.size()) c_.resize(labels_.size(), 0.0);
    c_[static_cast<std::size_t>(col)] = value;
  }
  void set_objective_offset(double offset) { offset_ = offset; }

  SocProgram build() const {
    SocProgram p;
    p.num_vars = num_vars();
    p.c = RVector::Zero(p.num_vars);
    for (std::size_t i = 0; i < c_.size(); ++i) p.c[static_cast<Eigen::Index>(i)] = c_[i];
    p.objective_offset = offset_;
    p.G.resize(rows_, p.num_vars);
    p.G.setFromTriplets(g_triplets_.begin(), g_triplets_.end());
    p.h = Eigen::Map<const RVector>(h_.data(), rows_);
    p.num_linear = 0;
    p.soc_dims = soc_dims_;
    p.cone_names = cone_names_;
    p.A.resize(static_cast<Eigen::Index>(b_.size()), p.num_vars);
    p.A.setFromTriplets(a_triplets_.begin(), a_triplets_.end());
    p.b = Eigen::Map<const RVector>(b_.data(), static_cast<Eigen::Index>(b_.size()));
    p.layout = layout_;
    p.labels = labels_;
    p.check();
    return p;
  }

 private:
  BeamLayout layout_;
  std::vector<VariableLabel> labels_;
  std::vector<double> c_;
  double offset_ = 0.0;
  int rows_ = 0;
  std::vector<double> h_;
  std::vector<int> soc_dims_;
  std::vector<std::string> cone_names_;
  std::vector<Triplet> g_triplets_;
  std::vector<Triplet> a_triplets_;
  std::vector<double> b_;
};

}  // namespace gsbf::conic
