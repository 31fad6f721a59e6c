#include "dslap/safety.hpp"

#include <deque>
#include <ostream>
#include <stdexcept>

namespace dslap {

double rho_to_obstacles(const State& z, const Obstacles& obs, const GridSpec& grid) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& box : obs.boxes) {
    double d = 0.0;
    for (int i = 0; i < grid.n_q(); ++i) {
      const double s = grid.bounds().scale_of(i);
      d = std::max({d, box[i].lo / s - z[i], z[i] - box[i].hi / s});
    }
    best = std::min(best, d);
  }
  return best;
}

SafeControlMap::SafeControlMap(std::size_t num_states, std::size_t num_controls)
    : nu_(num_controls), unsafe_(num_states, 0) {
  if (num_controls == 0 || num_controls > 64) throw std::invalid_argument("safe map: 1..64 controls supported");
  const std::uint64_t all = num_controls == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << num_controls) - 1;
  mask_.assign(num_states, all);
}

std::size_t SafeControlMap::safe_count() const {
  std::size_t n = 0;
  for (auto u : unsafe_) n += u == 0;
  return n;
}

std::vector<LatticeIndex> SafeControlMap::safe_states() const {
  std::vector<LatticeIndex> out;
  for (std::size_t x = 0; x < unsafe_.size(); ++x)
    if (!unsafe_[x]) out.push_back(static_cast<LatticeIndex>(x));
  return out;
}

bool SafeControlMap::remove(LatticeIndex x, std::size_t u) {
  auto& m = mask_[static_cast<std::size_t>(x)];
  const std::uint64_t bit = std::uint64_t{1} << u;
  if (!(m & bit)) return false;
  m &= ~bit;
  return true;
}

bool collision(std::span<const LatticeIndex> fr_set, const GridSpec& grid, const Obstacles& obs, double margin) {
  for (LatticeIndex y : fr_set)
    if (rho_to_obstacles(grid.point(y), obs, grid) <= margin) return true;
  return false;
}

BoxCounter::BoxCounter(const GridSpec& grid, const std::vector<std::uint8_t>& marked) : grid_(&grid) {
  const int n = grid.dims();
  pstride_.assign(n, 1);
  std::int64_t total = 1;
  for (int d = n - 1; d >= 0; --d) {
    pstride_[d] = total;
    total *= grid.extent(d) + 1;
  }
  prefix_.assign(static_cast<std::size_t>(total), 0);
  for (std::size_t x = 0; x < marked.size(); ++x) {
    if (!marked[x]) continue;
    const auto c = grid.coords_of(static_cast<LatticeIndex>(x));
    std::int64_t k = 0;
    for (int d = 0; d < n; ++d) k += (c[d] - grid.lower(d) + 1) * pstride_[d];
    prefix_[static_cast<std::size_t>(k)] = 1;
  }
  // Running sums along each axis in turn give the n-D inclusive prefix.
  for (int d = 0; d < n; ++d) {
    const std::int64_t s = pstride_[d];
    const std::int64_t len = grid.extent(d) + 1;
    for (std::int64_t k = 0; k < total; ++k)
      if ((k / s) % len != 0) prefix_[static_cast<std::size_t>(k)] += prefix_[static_cast<std::size_t>(k - s)];
  }
}

std::int64_t BoxCounter::count(const LatticeBox& raw) const {
  const LatticeBox b = grid_->clip(raw);
  if (b.empty()) return 0;
  const int n = grid_->dims();
  std::int64_t sum = 0;
  for (int corner = 0; corner < (1 << n); ++corner) {
    std::int64_t k = 0;
    int sign = 1;
    for (int d = 0; d < n; ++d) {
      if (corner & (1 << d)) {
        k += (b.lo[d] - grid_->lower(d)) * pstride_[d];
        sign = -sign;
      } else {
        k += (b.hi[d] - grid_->lower(d) + 1) * pstride_[d];
      }
    }
    sum += sign * static_cast<std::int64_t>(prefix_[static_cast<std::size_t>(k)]);
  }
  return sum;
}

std::vector<LatticeIndex> unsafe_update(SafeControlMap& map, const BackwardAdjacency& br,
                                        const std::vector<LatticeIndex>& seed, WorklistOrder order,
                                        SafetyCounters* counters) {
  std::deque<LatticeIndex> work;
  std::vector<LatticeIndex> added;
  for (LatticeIndex y : seed) {
    if (map.unsafe(y)) continue;
    map.mark_unsafe(y);
    work.push_back(y);
    added.push_back(y);
    if (counters) ++counters->seeded;
  }
  while (!work.empty()) {
    LatticeIndex y;
    if (order == WorklistOrder::Fifo) {
      y = work.front();
      work.pop_front();
    } else {
      y = work.back();
      work.pop_back();
    }
    for (std::size_t u = 0; u < map.num_controls(); ++u)
      for (LatticeIndex x : br.of(y, u)) {
        if (!map.remove(x, u)) continue;
        if (counters) ++counters->removals;
        if (map.controls(x) == 0 && !map.unsafe(x)) {
          map.mark_unsafe(x);
          work.push_back(x);
          added.push_back(x);
          if (counters) ++counters->closed;
        }
      }
  }
  return added;
}

std::vector<LatticeIndex> unsafe_update_sweep(SafeControlMap& map, const ReachGraph& graph,
                                              const std::vector<LatticeIndex>& seed, SafetyCounters* counters) {
  const GridSpec& grid = graph.grid();
  std::vector<LatticeIndex> added;
  for (LatticeIndex y : seed) {
    if (map.unsafe(y)) continue;
    map.mark_unsafe(y);
    added.push_back(y);
    if (counters) ++counters->seeded;
  }
  if (added.empty()) return added;
  const auto nx = static_cast<LatticeIndex>(grid.size());
  const std::size_t nu = graph.num_controls();
  while (true) {
    const BoxCounter unsafe(grid, map.unsafe_flags());
    if (counters) ++counters->sweeps;
    std::vector<LatticeIndex> fresh;
    for (LatticeIndex x = 0; x < nx; ++x) {
      if (map.unsafe(x) || !graph.expanded(x)) continue;
      const std::uint64_t m = map.controls(x);
      for (std::size_t u = 0; u < nu; ++u) {
        if (!((m >> u) & 1u)) continue;
        if (unsafe.any(graph.box(x, u))) {
          map.remove(x, u);
          if (counters) ++counters->removals;
        }
      }
      if (map.controls(x) == 0) fresh.push_back(x);
    }
    if (fresh.empty()) break;
    for (LatticeIndex x : fresh) {
      map.mark_unsafe(x);
      added.push_back(x);
      if (counters) ++counters->closed;
    }
  }
  return added;
}

namespace {

std::vector<LatticeIndex> close_unsafe(SafeControlMap& map, const ReachGraph& graph,
                                       const std::vector<LatticeIndex>& seed, const SafetyOptions& opt,
                                       SafetyCounters* counters) {
  bool worklist = opt.engine == UnsafeEngine::Worklist;
  if (opt.engine == UnsafeEngine::Auto) worklist = graph.num_edges() <= opt.max_edges;
  if (worklist) return unsafe_update(map, graph.backward(), seed, opt.order, counters);
  return unsafe_update_sweep(map, graph, seed, counters);
}

}  // namespace

std::vector<std::uint8_t> near_obstacle_mask(const GridSpec& grid, const Obstacles& obs, double margin) {
  std::vector<std::uint8_t> near(grid.size(), 0);
  if (obs.empty()) return near;
  // Distance depends on position only; evaluate once per position block.
  std::int64_t block = 1;
  for (int d = grid.n_q(); d < grid.dims(); ++d) block *= grid.extent(d);
  for (std::size_t x = 0; x < near.size(); x += static_cast<std::size_t>(block)) {
    const bool hit = rho_to_obstacles(grid.point(static_cast<LatticeIndex>(x)), obs, grid) <= margin;
    if (hit) std::fill(near.begin() + static_cast<std::ptrdiff_t>(x), near.begin() + static_cast<std::ptrdiff_t>(x + block), 1);
  }
  return near;
}

OcaResult oca(const GridSpec& grid, const ReachGraph& graph, const Obstacles& obs, double margin,
              const SafetyOptions& opt) {
  OcaResult r;
  r.map = SafeControlMap(grid.size(), grid.num_controls());
  r.near = near_obstacle_mask(grid, obs, margin);
  const auto nx = static_cast<LatticeIndex>(grid.size());
  for (LatticeIndex x = 0; x < nx; ++x)
    if (r.near[static_cast<std::size_t>(x)]) r.seed.push_back(x);

  // Collision(FR(x,u)) holds exactly when the box reaches a near state.
  const BoxCounter near(grid, r.near);
  for (LatticeIndex x = 0; x < nx; ++x) {
    if (r.near[static_cast<std::size_t>(x)] || !graph.expanded(x)) continue;
    for (std::size_t u = 0; u < graph.num_controls(); ++u)
      if (near.any(graph.box(x, u))) {
        r.map.remove(x, u);
        ++r.counters.removals;
      }
    if (r.map.controls(x) == 0) r.seed.push_back(x);
  }
  std::sort(r.seed.begin(), r.seed.end());
  r.closure = close_unsafe(r.map, graph, r.seed, opt, &r.counters);
  r.empty = r.map.safe_count() == 0;
  return r;
}

double tube_radius(double xi, double m, double zeta, double eps, double alpha, double h) {
  return 2 * xi * m + 2 * zeta + m * eps + 0.5 * alpha + 3 * h;
}

ReachTube broadcast_tube(int sender, const State& z, const ReachParams& params, double xi, double zeta,
                         const GridSpec& grid) {
  const double h = grid.step();
  ReachTube t;
  t.sender = sender;
  t.center = z.head(grid.n_q());
  const double zeta_scaled = zeta / grid.bounds().scale_of(0);
  t.radius = tube_radius(xi, params.m, zeta_scaled, params.eps, dilation(params.eps, h, params.ell, params.m), h);
  return t;
}

std::vector<LatticeIndex> tube_seed(const GridSpec& grid, const ReachTube& tube, double dilate) {
  std::vector<LatticeIndex> out;
  const double r = tube.radius + dilate;
  LatticeBox b = grid.full_box();
  const double h = grid.step();
  for (int d = 0; d < grid.n_q(); ++d) {
    b.lo[d] = static_cast<int>(std::clamp(std::ceil((tube.center[d] - r) / h - 1e-9), -1e9, 1e9));
    b.hi[d] = static_cast<int>(std::clamp(std::floor((tube.center[d] + r) / h + 1e-9), -1e9, 1e9));
  }
  grid.for_each_in(grid.clip(b), [&](LatticeIndex x) { out.push_back(x); });
  return out;
}

std::vector<LatticeIndex> ica(SafeControlMap& map, const ReachGraph& graph, const std::vector<ReachTube>& received,
                              double dilate, const SafetyOptions& opt, SafetyCounters* counters) {
  if (received.empty()) return {};
  std::vector<std::uint8_t> seen(graph.grid().size(), 0);
  std::vector<LatticeIndex> seed;
  for (const auto& t : received)
    for (LatticeIndex x : tube_seed(graph.grid(), t, dilate))
      if (!seen[static_cast<std::size_t>(x)]) {
        seen[static_cast<std::size_t>(x)] = 1;
        seed.push_back(x);
      }
  std::sort(seed.begin(), seed.end());
  return close_unsafe(map, graph, seed, opt, counters);
}

int heading_coord(const GridSpec& grid, double theta) {
  const int d = grid.n_q();
  const double z = theta / grid.bounds().scale_of(d);
  const int c = static_cast<int>(std::lround(z / grid.step()));
  return std::clamp(c, grid.lower(d), grid.lower(d) + grid.extent(d) - 1);
}

void write_safe_set_csv(std::ostream& os, const GridSpec& grid, const SafeControlMap& map,
                        const std::vector<int>& heading_coords, bool header) {
  if (grid.dims() != 3) throw std::invalid_argument("safe set dump: 3-D lattice expected");
  if (header) os << "x1,x2,heading_index,safe\n";
  std::vector<int> hs = heading_coords;
  if (hs.empty())
    for (int c = 0; c < grid.extent(2); ++c) hs.push_back(grid.lower(2) + c);
  const double h = grid.step();
  for (int hc : hs)
    for (int i = 0; i < grid.extent(0); ++i)
      for (int j = 0; j < grid.extent(1); ++j) {
        const std::array<int, kMaxDims> c{grid.lower(0) + i, grid.lower(1) + j, hc, 0};
        const LatticeIndex x = grid.index_of(c);
        if (x < 0) continue;
        os << c[0] * h * grid.bounds().scale_of(0) << ',' << c[1] * h * grid.bounds().scale_of(1) << ',' << hc << ','
           << (map.safe(x) ? 1 : 0) << '\n';
      }
}

}  // namespace dslap
