#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dslap {

using State = Eigen::VectorXd;
using Control = Eigen::VectorXd;
using LatticeIndex = std::int32_t;

inline constexpr int kMaxDims = 4;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// State and control domains.  Position dimensions come first (n_q of them),
/// the remaining n_r state dimensions after.  `scale[d]` maps lattice units to
/// physical units (x = scale * z); the lattice h_p*Z^n lives in the z frame.
/// Controls are either an interval box (lattice h_p*Z^{n_u}) or, when
/// `control_values` is non-empty, that fixed finite set.
struct Bounds {
  std::vector<Interval> state;
  int n_q = 0;
  std::vector<double> scale;
  std::vector<Interval> control;
  std::vector<Control> control_values;

  int n_x() const { return static_cast<int>(state.size()); }
  int n_r() const { return n_x() - n_q; }
  int n_u() const {
    return control_values.empty() ? static_cast<int>(control.size())
                                  : static_cast<int>(control_values.front().size());
  }
  double scale_of(int d) const { return scale.empty() ? 1.0 : scale[d]; }
  void validate() const;
};

/// Inclusive integer box of lattice coordinates.
struct LatticeBox {
  int dims = 0;
  std::array<int, kMaxDims> lo{};
  std::array<int, kMaxDims> hi{};

  bool empty() const {
    for (int d = 0; d < dims; ++d)
      if (lo[d] > hi[d]) return true;
    return dims == 0;
  }
  std::int64_t count() const {
    if (empty()) return 0;
    std::int64_t n = 1;
    for (int d = 0; d < dims; ++d) n *= hi[d] - lo[d] + 1;
    return n;
  }
  bool contains(const std::array<int, kMaxDims>& c) const {
    for (int d = 0; d < dims; ++d)
      if (c[d] < lo[d] || c[d] > hi[d]) return false;
    return true;
  }
};

/// Dyadic lattice X_p = h_p Z^{n_x} ∩ X (scaled frame) and control set U_p.
/// Immutable; enumeration order is lexicographic on integer coordinates, which
/// is also increasing linear index.
class GridSpec {
 public:
  GridSpec() = default;

  int level() const { return p_; }
  double step() const { return h_; }
  int dims() const { return static_cast<int>(lower_.size()); }
  int n_q() const { return n_q_; }
  std::size_t size() const { return size_; }
  std::size_t num_controls() const { return controls_.size(); }
  const Bounds& bounds() const { return bounds_; }

  int lower(int d) const { return lower_[d]; }
  int extent(int d) const { return extent_[d]; }
  std::int64_t stride(int d) const { return stride_[d]; }

  const std::vector<Control>& controls() const { return controls_; }
  const Control& control(std::size_t k) const { return controls_[k]; }

  std::array<int, kMaxDims> coords_of(LatticeIndex idx) const;
  /// -1 when the coordinates are outside the lattice.
  LatticeIndex index_of(const std::array<int, kMaxDims>& coords) const;
  /// Lattice point in the scaled frame.
  State point(LatticeIndex idx) const;
  /// Lattice point in physical units.
  State physical_point(LatticeIndex idx) const;

  State to_lattice_frame(const State& physical) const;
  State to_physical(const State& z) const;

  /// Lattice points within inf-norm distance r of `center` (scaled frame),
  /// clipped to the lattice.
  LatticeBox ball_box(const State& center, double r) const;
  /// Bounds of the whole lattice as a box.
  LatticeBox full_box() const;
  LatticeBox clip(LatticeBox box) const;

  /// Visit every index inside `box` in lexicographic order.
  template <typename Fn>
  void for_each_in(const LatticeBox& box, Fn&& fn) const;

  friend GridSpec make_grid(int p, const Bounds& bounds);

 private:
  int p_ = 0;
  double h_ = 1.0;
  int n_q_ = 0;
  Bounds bounds_;
  std::vector<int> lower_;
  std::vector<int> extent_;
  std::vector<std::int64_t> stride_;
  std::size_t size_ = 0;
  std::vector<Control> controls_;
};

/// h_p = 2^-p, X_p = h_p Z^{n_x} ∩ X, U_p = h_p Z^{n_u} ∩ U (or the explicit set).
/// Throws std::invalid_argument for p < 1, degenerate bounds or an empty lattice.
GridSpec make_grid(int p, const Bounds& bounds);

/// Number of lattice points along one dimension: floor(hi/h) - ceil(lo/h) + 1.
int lattice_count(Interval iv, double h);

template <typename DerivedA, typename DerivedB>
double rho(const Eigen::MatrixBase<DerivedA>& x, const Eigen::MatrixBase<DerivedB>& y) {
  if (x.size() == 0) return 0.0;
  return (x - y).cwiseAbs().maxCoeff();
}

/// inf over a finite set; +infinity for an empty set.
double rho_to_set(const State& x, std::span<const State> set);

/// Minimizer of rho over `set`; ties go to the lexicographically smallest element.
/// Throws std::invalid_argument on an empty set.
std::size_t nearest(const State& x, std::span<const State> set);

/// Nearest lattice point among `candidates` (lattice indices), ties to the
/// smallest index.  Throws on an empty candidate list.
LatticeIndex nearest(const State& x, const GridSpec& grid, std::span<const LatticeIndex> candidates);

/// Nearest point of the whole lattice X_p (same tie-break), without enumeration.
LatticeIndex nearest_lattice_point(const State& x, const GridSpec& grid);

/// B(center, r) ∩ X_p, in lexicographic order.
std::vector<LatticeIndex> ball_points(const State& center, double r, const GridSpec& grid);

/// inf-norm distance from a point to an axis-aligned box (0 inside).
template <typename Derived>
double rho_to_box(const Eigen::MatrixBase<Derived>& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) d = std::max({d, lo[i] - x[i], x[i] - hi[i]});
  return d;
}

template <typename Fn>
void GridSpec::for_each_in(const LatticeBox& box, Fn&& fn) const {
  if (box.empty()) return;
  const int n = dims();
  std::array<int, kMaxDims> c = box.lo;
  while (true) {
    std::int64_t idx = 0;
    for (int d = 0; d < n; ++d) idx += static_cast<std::int64_t>(c[d] - lower_[d]) * stride_[d];
    fn(static_cast<LatticeIndex>(idx));
    int d = n - 1;
    while (d >= 0) {
      if (++c[d] <= box.hi[d]) break;
      c[d] = box.lo[d];
      --d;
    }
    if (d < 0) break;
  }
}

}  // namespace dslap
