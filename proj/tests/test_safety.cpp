#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>

#include "dslap/disturbance.hpp"
#include "dslap/safety.hpp"

using namespace dslap;

namespace {

Bounds plane(int n1, int n2, int nu) {
  Bounds b;
  b.state = {{0, 0.5 * (n1 - 1)}, {0, 0.5 * (n2 - 1)}};
  b.n_q = 2;
  for (int k = 0; k < nu; ++k) {
    Control c(1);
    c << k;
    b.control_values.push_back(c);
  }
  return b;
}

// Random forward boxes on a small plane lattice (h = 1/2).
ReachGraph random_graph(const GridSpec& g, std::mt19937_64& rng, int max_side) {
  ReachGraph graph(g, g.num_controls());
  std::uniform_int_distribution<int> side(0, max_side);
  for (LatticeIndex x = 0; x < static_cast<LatticeIndex>(g.size()); ++x) {
    graph.mark_expanded(x);
    for (std::size_t u = 0; u < g.num_controls(); ++u) {
      LatticeBox b;
      b.dims = 2;
      for (int d = 0; d < 2; ++d) {
        std::uniform_int_distribution<int> at(g.lower(d), g.lower(d) + g.extent(d) - 1);
        b.lo[d] = at(rng);
        b.hi[d] = std::min(b.lo[d] + side(rng), g.lower(d) + g.extent(d) - 1);
      }
      graph.set_box(x, u, b);
    }
  }
  return graph;
}

Bounds boat_bounds() {
  Bounds b;
  b.state = {{0, 8}, {0, 8}, {-std::numbers::pi, std::numbers::pi}};
  b.n_q = 2;
  b.scale = {2, 2, 0.92};
  for (double u : {-0.3, -0.15, 0.0, 0.15, 0.3}) {
    Control c(1);
    c << u * std::numbers::pi;
    b.control_values.push_back(c);
  }
  return b;
}

// Every safe state keeps a control, and every surviving control stays inside
// the safe set.
std::size_t invariance_violations(const GridSpec& g, const ReachGraph& graph, const SafeControlMap& map) {
  const BoxCounter unsafe(g, map.unsafe_flags());
  std::size_t bad = 0;
  for (LatticeIndex x = 0; x < static_cast<LatticeIndex>(g.size()); ++x) {
    if (!map.safe(x)) continue;
    if (map.controls(x) == 0) ++bad;
    for (std::size_t u = 0; u < g.num_controls(); ++u)
      if (map.allowed(x, u) && unsafe.any(graph.box(x, u))) ++bad;
  }
  return bad;
}

}  // namespace

TEST_CASE("box counter agrees with a scan") {
  const GridSpec g = make_grid(1, plane(7, 5, 1));
  std::mt19937_64 rng(1);
  std::vector<std::uint8_t> marked(g.size());
  for (auto& m : marked) m = rng() % 3 == 0;
  const BoxCounter bc(g, marked);
  const ReachGraph graph = random_graph(g, rng, 4);
  for (LatticeIndex x = 0; x < static_cast<LatticeIndex>(g.size()); ++x) {
    std::int64_t n = 0;
    g.for_each_in(graph.box(x, 0), [&](LatticeIndex y) { n += marked[static_cast<std::size_t>(y)]; });
    CHECK(bc.count(graph.box(x, 0)) == n);
  }
}

TEST_CASE("worklist orders and the sweep reach the same fixpoint") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const GridSpec g = make_grid(1, plane(6, 5, 3));
    const ReachGraph graph = random_graph(g, rng, 2);
    std::vector<LatticeIndex> seed;
    for (LatticeIndex x = 0; x < static_cast<LatticeIndex>(g.size()); ++x)
      if (rng() % 6 == 0) seed.push_back(x);
    SafeControlMap a(g.size(), 3), b(g.size(), 3), c(g.size(), 3);
    unsafe_update(a, graph.backward(), seed, WorklistOrder::Fifo);
    unsafe_update(b, graph.backward(), seed, WorklistOrder::Lifo);
    unsafe_update_sweep(c, graph, seed);
    CHECK(a.unsafe_flags() == b.unsafe_flags());
    CHECK(a.unsafe_flags() == c.unsafe_flags());
    for (LatticeIndex x = 0; x < static_cast<LatticeIndex>(g.size()); ++x) {
      if (a.unsafe(x)) continue;
      CHECK(a.controls(x) == b.controls(x));
      CHECK(a.controls(x) == c.controls(x));
    }
    CHECK(invariance_violations(g, graph, a) == 0);
  }
}

TEST_CASE("the worked graph example") {
  // A line of states 0..4 with 2 controls; state 4 is unsafe.  Control 1
  // always steps right, control 0 stays put, except state 3 where both step
  // right: 3 loses both controls, 2 keeps only control 0.
  const GridSpec g = make_grid(1, plane(5, 1, 2));
  ReachGraph graph(g, 2);
  auto at = [](int i) {
    LatticeBox b;
    b.dims = 2;
    b.lo = {i, 0, 0, 0};
    b.hi = {i, 0, 0, 0};
    return b;
  };
  for (int i = 0; i < 5; ++i) {
    graph.mark_expanded(i);
    graph.set_box(i, 0, at(i == 3 ? 4 : i));
    graph.set_box(i, 1, at(std::min(i + 1, 4)));
  }
  SafeControlMap map(g.size(), 2);
  const auto added = unsafe_update(map, graph.backward(), {4}, WorklistOrder::Fifo);
  CHECK(added == std::vector<LatticeIndex>{4, 3});
  CHECK(map.safe(2));
  CHECK(map.allowed(2, 0));
  CHECK(!map.allowed(2, 1));
  CHECK(map.controls(1) == 3u);
}

TEST_CASE("obstacle avoidance on a boat lattice is invariant") {
  const BoatModel boat;
  const GridSpec g = make_grid(3, boat_bounds());
  Obstacles obs;
  obs.boxes.push_back({{3.2, 4.8}, {3.2, 4.8}});
  ReachParams params;
  // A long step keeps the forward motion well above the box radius;
  // otherwise the closure swallows the whole lattice.
  params.eps = 2.0;
  params.ell = 0.05;
  params.m = 0.6;
  const double margin = params.m * params.eps + g.step();
  const ZeroModel zero({0});
  const auto near = near_obstacle_mask(g, obs, margin);
  const ReachGraph graph = build_reach_graph(boat, zero, params, g, near);
  for (UnsafeEngine e : {UnsafeEngine::Worklist, UnsafeEngine::Sweep}) {
    SafetyOptions opt;
    opt.engine = e;
    const OcaResult r = oca(g, graph, obs, margin, opt);
    CHECK(!r.empty);
    CHECK(invariance_violations(g, graph, r.map) == 0);
    for (LatticeIndex x = 0; x < static_cast<LatticeIndex>(g.size()); ++x) {
      const bool close = rho_to_obstacles(g.point(x), obs, g) <= margin;
      CHECK(static_cast<bool>(r.near[static_cast<std::size_t>(x)]) == close);
      if (close) CHECK(r.map.unsafe(x));
    }
  }
  SafetyOptions w, s;
  w.engine = UnsafeEngine::Worklist;
  s.engine = UnsafeEngine::Sweep;
  CHECK(oca(g, graph, obs, margin, w).map.unsafe_flags() == oca(g, graph, obs, margin, s).map.unsafe_flags());
}

TEST_CASE("collision predicate") {
  const GridSpec g = make_grid(1, plane(9, 9, 1));
  Obstacles obs;
  obs.boxes.push_back({{2.0, 2.5}, {2.0, 2.5}});
  const LatticeIndex far = g.index_of({0, 0, 0, 0}), close = g.index_of({3, 4, 0, 0});
  CHECK(!collision(std::vector<LatticeIndex>{far}, g, obs, 0.5));
  CHECK(collision(std::vector<LatticeIndex>{far, close}, g, obs, 0.5));
  CHECK(std::isinf(rho_to_obstacles(g.point(far), Obstacles{}, g)));
}

TEST_CASE("tube radius and inter-robot avoidance") {
  CHECK(tube_radius(8, 0.5, 0.1, 0.5, 0.2, 0.0625) == doctest::Approx(8 + 0.2 + 0.25 + 0.1 + 0.1875));
  const GridSpec g = make_grid(1, plane(9, 9, 2));
  std::mt19937_64 rng(3);
  const ReachGraph graph = random_graph(g, rng, 1);
  ReachTube t;
  t.center = Eigen::Vector2d(2.0, 2.0);
  t.radius = 0.5;
  const auto seed = tube_seed(g, t, 0.0);
  CHECK(seed.size() == 9u);
  for (LatticeIndex x : seed) CHECK(rho(g.point(x), t.center) <= 0.5 + 1e-12);
  SafeControlMap map(g.size(), 2);
  SafetyCounters counters;
  ica(map, graph, {t}, 0.0, {}, &counters);
  for (LatticeIndex x : seed) CHECK(map.unsafe(x));
  CHECK(counters.removals <= static_cast<std::int64_t>(g.size() * g.num_controls()));
  CHECK(invariance_violations(g, graph, map) == 0);
  CHECK(ica(map, graph, {}, 0.0).empty());
}
