#include "dslap/grid.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace dslap {

namespace {

// Lattice membership tests divide by h; a few ulps of slack keeps points that
// sit exactly on a bound (0, 1, 100, ...) inside after the division.
constexpr double kSnap = 1e-9;

bool lex_less(const State& a, const State& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

}  // namespace

void Bounds::validate() const {
  if (state.empty()) throw std::invalid_argument("bounds: empty state space");
  if (n_q < 0 || n_q > n_x()) throw std::invalid_argument("bounds: n_q out of range");
  if (n_x() > kMaxDims) throw std::invalid_argument("bounds: at most 4 state dimensions supported");
  if (!scale.empty() && static_cast<int>(scale.size()) != n_x())
    throw std::invalid_argument("bounds: scale must have one entry per state dimension");
  for (double s : scale)
    if (!(s > 0.0)) throw std::invalid_argument("bounds: scale entries must be positive");
  for (const auto& iv : state)
    if (!(iv.lo <= iv.hi)) throw std::invalid_argument("bounds: state interval with lo > hi");
  for (const auto& iv : control)
    if (!(iv.lo <= iv.hi)) throw std::invalid_argument("bounds: control interval with lo > hi");
  if (control.empty() && control_values.empty()) throw std::invalid_argument("bounds: no controls");
  for (const auto& u : control_values)
    if (u.size() != control_values.front().size())
      throw std::invalid_argument("bounds: control values of mixed dimension");
}

int lattice_count(Interval iv, double h) {
  const auto lo = static_cast<long long>(std::ceil(iv.lo / h - kSnap));
  const auto hi = static_cast<long long>(std::floor(iv.hi / h + kSnap));
  return static_cast<int>(std::max(0LL, hi - lo + 1));
}

GridSpec make_grid(int p, const Bounds& bounds) {
  if (p < 1) throw std::invalid_argument("make_grid: p must be >= 1");
  if (p > 30) throw std::invalid_argument("make_grid: p too large");
  bounds.validate();

  GridSpec g;
  g.p_ = p;
  g.h_ = std::ldexp(1.0, -p);
  g.n_q_ = bounds.n_q;
  g.bounds_ = bounds;

  const int n = bounds.n_x();
  g.lower_.resize(n);
  g.extent_.resize(n);
  g.stride_.resize(n);
  std::int64_t total = 1;
  for (int d = 0; d < n; ++d) {
    const double s = bounds.scale_of(d);
    const Interval z{bounds.state[d].lo / s, bounds.state[d].hi / s};
    g.lower_[d] = static_cast<int>(std::ceil(z.lo / g.h_ - kSnap));
    g.extent_[d] = lattice_count(z, g.h_);
    if (g.extent_[d] == 0)
      throw std::invalid_argument("make_grid: empty lattice in dimension " + std::to_string(d));
    total *= g.extent_[d];
  }
  if (total > std::numeric_limits<LatticeIndex>::max())
    throw std::invalid_argument("make_grid: lattice too large for 32-bit indices");
  std::int64_t stride = 1;
  for (int d = n - 1; d >= 0; --d) {
    g.stride_[d] = stride;
    stride *= g.extent_[d];
  }
  g.size_ = static_cast<std::size_t>(total);

  if (!bounds.control_values.empty()) {
    g.controls_ = bounds.control_values;
  } else {
    const int nu = static_cast<int>(bounds.control.size());
    std::vector<int> lo(nu), cnt(nu);
    for (int d = 0; d < nu; ++d) {
      lo[d] = static_cast<int>(std::ceil(bounds.control[d].lo / g.h_ - kSnap));
      cnt[d] = lattice_count(bounds.control[d], g.h_);
      if (cnt[d] == 0) throw std::invalid_argument("make_grid: empty control lattice");
    }
    std::vector<int> c(nu, 0);
    while (true) {
      Control u(nu);
      for (int d = 0; d < nu; ++d) u[d] = (lo[d] + c[d]) * g.h_;
      g.controls_.push_back(u);
      int d = nu - 1;
      while (d >= 0 && ++c[d] == cnt[d]) c[d--] = 0;
      if (d < 0) break;
    }
  }
  return g;
}

std::array<int, kMaxDims> GridSpec::coords_of(LatticeIndex idx) const {
  std::array<int, kMaxDims> c{};
  std::int64_t rem = idx;
  for (int d = 0; d < dims(); ++d) {
    c[d] = lower_[d] + static_cast<int>(rem / stride_[d]);
    rem %= stride_[d];
  }
  return c;
}

LatticeIndex GridSpec::index_of(const std::array<int, kMaxDims>& coords) const {
  std::int64_t idx = 0;
  for (int d = 0; d < dims(); ++d) {
    const int off = coords[d] - lower_[d];
    if (off < 0 || off >= extent_[d]) return -1;
    idx += off * stride_[d];
  }
  return static_cast<LatticeIndex>(idx);
}

State GridSpec::point(LatticeIndex idx) const {
  const auto c = coords_of(idx);
  State z(dims());
  for (int d = 0; d < dims(); ++d) z[d] = c[d] * h_;
  return z;
}

State GridSpec::physical_point(LatticeIndex idx) const { return to_physical(point(idx)); }

State GridSpec::to_lattice_frame(const State& physical) const {
  State z(physical.size());
  for (int d = 0; d < dims(); ++d) z[d] = physical[d] / bounds_.scale_of(d);
  return z;
}

State GridSpec::to_physical(const State& z) const {
  State x(z.size());
  for (int d = 0; d < dims(); ++d) x[d] = z[d] * bounds_.scale_of(d);
  return x;
}

LatticeBox GridSpec::full_box() const {
  LatticeBox b;
  b.dims = dims();
  for (int d = 0; d < dims(); ++d) {
    b.lo[d] = lower_[d];
    b.hi[d] = lower_[d] + extent_[d] - 1;
  }
  return b;
}

LatticeBox GridSpec::clip(LatticeBox box) const {
  for (int d = 0; d < dims(); ++d) {
    box.lo[d] = std::max(box.lo[d], lower_[d]);
    box.hi[d] = std::min(box.hi[d], lower_[d] + extent_[d] - 1);
  }
  return box;
}

LatticeBox GridSpec::ball_box(const State& center, double r) const {
  LatticeBox b;
  b.dims = dims();
  for (int d = 0; d < dims(); ++d) {
    const double lo = std::ceil((center[d] - r) / h_ - kSnap);
    const double hi = std::floor((center[d] + r) / h_ + kSnap);
    // Clamp in floating point first so a far-away center cannot overflow int.
    const double lmin = lower_[d], lmax = lower_[d] + extent_[d] - 1;
    b.lo[d] = static_cast<int>(std::clamp(lo, lmin - 1.0, lmax + 1.0));
    b.hi[d] = static_cast<int>(std::clamp(hi, lmin - 1.0, lmax + 1.0));
  }
  return clip(b);
}

double rho_to_set(const State& x, std::span<const State> set) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& y : set) best = std::min(best, rho(x, y));
  return best;
}

std::size_t nearest(const State& x, std::span<const State> set) {
  if (set.empty()) throw std::invalid_argument("nearest: empty set");
  std::size_t best = 0;
  double bd = rho(x, set[0]);
  for (std::size_t i = 1; i < set.size(); ++i) {
    const double d = rho(x, set[i]);
    if (d < bd || (d == bd && lex_less(set[i], set[best]))) {
      bd = d;
      best = i;
    }
  }
  return best;
}

LatticeIndex nearest(const State& x, const GridSpec& grid, std::span<const LatticeIndex> candidates) {
  if (candidates.empty()) throw std::invalid_argument("nearest: empty candidate set");
  LatticeIndex best = -1;
  double bd = std::numeric_limits<double>::infinity();
  for (LatticeIndex c : candidates) {
    const double d = rho(x, grid.point(c));
    if (d < bd || (d == bd && c < best)) {
      bd = d;
      best = c;
    }
  }
  return best;
}

LatticeIndex nearest_lattice_point(const State& x, const GridSpec& grid) {
  // Under the inf-norm the minimizers form a box: every coordinate may move
  // anywhere within the largest per-axis residual.  Taking the smallest
  // admissible coordinate on each axis gives the lexicographic minimizer.
  const int n = grid.dims();
  const double h = grid.step();
  std::array<int, kMaxDims> best{};
  double worst = 0.0;
  for (int d = 0; d < n; ++d) {
    const int lo = grid.lower(d), hi = grid.lower(d) + grid.extent(d) - 1;
    const double t = std::clamp(x[d] / h, lo - 1.0, hi + 1.0);
    int c = std::clamp(static_cast<int>(std::floor(t)), lo, hi);
    if (c < hi && std::abs((c + 1) * h - x[d]) < std::abs(c * h - x[d])) ++c;
    best[d] = c;
    worst = std::max(worst, std::abs(c * h - x[d]));
  }
  for (int d = 0; d < n; ++d) {
    const int lo = grid.lower(d);
    while (best[d] > lo && std::abs((best[d] - 1) * h - x[d]) <= worst) --best[d];
  }
  return grid.index_of(best);
}

std::vector<LatticeIndex> ball_points(const State& center, double r, const GridSpec& grid) {
  std::vector<LatticeIndex> out;
  const LatticeBox box = grid.ball_box(center, r);
  out.reserve(static_cast<std::size_t>(box.count()));
  grid.for_each_in(box, [&](LatticeIndex i) { out.push_back(i); });
  return out;
}

}  // namespace dslap
