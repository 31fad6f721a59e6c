#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dslap/mpc.hpp"

using namespace dslap;

namespace {

Bounds plane(int n1, int n2, int nu) {
  Bounds b;
  b.state = {{0, 0.5 * (n1 - 1)}, {0, 0.5 * (n2 - 1)}};
  b.n_q = 2;
  for (int k = 0; k < nu; ++k) {
    Control c(1);
    c << 0.5 * k;
    b.control_values.push_back(c);
  }
  return b;
}

struct Instance {
  std::shared_ptr<GridSpec> grid;
  std::shared_ptr<ReachGraph> graph;
  std::shared_ptr<SafeControlMap> map;
  std::shared_ptr<GpModel> model;
};

Instance random_instance(std::mt19937_64& rng, int nu) {
  Instance in;
  in.grid = std::make_shared<GridSpec>(make_grid(1, plane(3, 4, nu)));
  const GridSpec& g = *in.grid;
  in.graph = std::make_shared<ReachGraph>(g, g.num_controls());
  in.map = std::make_shared<SafeControlMap>(g.size(), g.num_controls());
  std::uniform_int_distribution<int> side(0, 1);
  for (LatticeIndex x = 0; x < static_cast<LatticeIndex>(g.size()); ++x) {
    in.graph->mark_expanded(x);
    for (std::size_t u = 0; u < g.num_controls(); ++u) {
      LatticeBox b;
      b.dims = 2;
      for (int d = 0; d < 2; ++d) {
        std::uniform_int_distribution<int> at(g.lower(d), g.lower(d) + g.extent(d) - 1);
        b.lo[d] = at(rng);
        b.hi[d] = std::min(b.lo[d] + side(rng), g.lower(d) + g.extent(d) - 1);
      }
      in.graph->set_box(x, u, b);
      if (rng() % 4 == 0) in.map->remove(x, u);
    }
    if (rng() % 5 == 0) in.map->mark_unsafe(x);
  }
  // A posterior with a few points makes sigma vary over the pairs.
  Dataset d;
  const int n = 3;
  d.Z.resize(n, 3);
  d.Y = Eigen::MatrixXd::Zero(n, 1);
  std::uniform_real_distribution<double> u01(0, 1.5);
  for (int i = 0; i < n; ++i) d.Z.row(i) << u01(rng), u01(rng), 0.5 * (rng() % nu);
  d.batches = {static_cast<std::size_t>(n)};
  in.model = std::make_shared<GpModel>(std::make_shared<Posterior>(Posterior::fit({0.0025, 1.0}, 0.01, 3, 1, d)),
                                       std::vector<int>{0});
  return in;
}

struct Best {
  double value = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> controls;
};

// Enumerates every (control, successor) path; the first strictly better path
// in (control, successor) lexicographic order wins.
void enumerate(const Policy& pol, const Instance& in, int stage, int phi, LatticeIndex x, std::vector<std::size_t>& us,
               std::vector<double>& rs, Best& best) {
  const GridSpec& g = *in.grid;
  if (stage == phi) {
    double v = (1 - pol.weight()) * goal_distance(g, g.point(x), pol.snapshot().config.goal);
    for (int t = phi - 1; t >= 0; --t) v = rs[static_cast<std::size_t>(t)] + v;
    if (v < best.value) best = {v, us};
    return;
  }
  if (!in.map->safe(x)) return;
  for (std::size_t u = 0; u < g.num_controls(); ++u) {
    if (!in.map->allowed(x, u)) continue;
    g.for_each_in(in.graph->box(x, u), [&](LatticeIndex y) {
      if (!in.map->safe(y)) return;
      us.push_back(u);
      rs.push_back(pol.weight() * pol.utility(x, u));
      enumerate(pol, in, stage + 1, phi, y, us, rs, best);
      us.pop_back();
      rs.pop_back();
    });
  }
}

}  // namespace

TEST_CASE("weights decay as e^{-psi k}") {
  CHECK(mpc_weight(0, 1.0) == 1.0);
  CHECK(mpc_weight(3, 0.5) == doctest::Approx(std::exp(-1.5)));
  CHECK_THROWS_AS(mpc_weight(-1, 1.0), std::invalid_argument);
}

TEST_CASE("goal distance is zero inside the goal") {
  const GridSpec g = make_grid(1, plane(5, 5, 1));
  GoalRegion goal;
  goal.center = Eigen::Vector2d(1.0, 1.0);
  goal.radius = 0.5;
  CHECK(goal_distance(g, Eigen::Vector2d(1.2, 0.6), goal) == 0.0);
  CHECK(goal_distance(g, Eigen::Vector2d(2.0, 1.0), goal) == doctest::Approx(0.5));
  CHECK(goal.contains(Eigen::Vector2d(1.5, 0.5)));
}

TEST_CASE("dynamic programming equals enumeration") {
  std::mt19937_64 rng(17);
  int solved = 0;
  for (int t = 0; t < 50; ++t) {
    const Instance in = random_instance(rng, 2 + static_cast<int>(t % 2));
    PolicySnapshot s{in.grid, in.graph, in.map, in.model, {}, static_cast<int>(t % 4)};
    s.config.horizon = 1 + t % 3;
    s.config.goal.center = Eigen::Vector2d(0.5 * (rng() % 3), 0.5 * (rng() % 4));
    s.config.goal.radius = 0.0;
    const Policy pol(s);
    for (LatticeIndex x = 0; x < static_cast<LatticeIndex>(in.grid->size()); ++x) {
      if (!in.map->safe(x)) continue;
      Best best;
      std::vector<std::size_t> us;
      std::vector<double> rs;
      enumerate(pol, in, 0, s.config.horizon, x, us, rs, best);
      const MpcSolution sol = pol.solve(x);
      CHECK(sol.feasible == std::isfinite(best.value));
      if (!sol.feasible) continue;
      ++solved;
      CHECK(sol.value == doctest::Approx(best.value).epsilon(1e-12));
      CHECK(sol.controls.front() == best.controls.front());
      CHECK(sol.controls.size() == static_cast<std::size_t>(s.config.horizon));
      CHECK(sol.value == doctest::Approx(sol.goal_term + sol.explore_term).epsilon(1e-12));
    }
  }
  CHECK(solved > 100);
}

TEST_CASE("projection is the nearest safe state") {
  std::mt19937_64 rng(4);
  const Instance in = random_instance(rng, 2);
  const GridSpec& g = *in.grid;
  std::uniform_real_distribution<double> u(-0.3, 1.8);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Vector2d z(u(rng), u(rng));
    LatticeIndex best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (LatticeIndex x = 0; x < static_cast<LatticeIndex>(g.size()); ++x)
      if (in.map->safe(x) && rho(z, g.point(x)) < bd) {
        bd = rho(z, g.point(x));
        best = x;
      }
    CHECK(project_safe(z, *in.map, g) == best);
  }
  SafeControlMap none(g.size(), g.num_controls());
  for (LatticeIndex x = 0; x < static_cast<LatticeIndex>(g.size()); ++x) none.mark_unsafe(x);
  CHECK_THROWS_AS(project_safe(Eigen::Vector2d(0, 0), none, g), std::runtime_error);
}

TEST_CASE("shrinking exploration weight never increases the goal term") {
  std::mt19937_64 rng(8);
  const Instance in = random_instance(rng, 3);
  for (LatticeIndex x = 0; x < static_cast<LatticeIndex>(in.grid->size()); ++x) {
    if (!in.map->safe(x)) continue;
    double last = std::numeric_limits<double>::infinity();
    for (int k : {0, 1, 3, 50}) {
      PolicySnapshot s{in.grid, in.graph, in.map, in.model, {}, k};
      s.config.goal.center = Eigen::Vector2d(1.0, 1.5);
      const MpcSolution sol = Policy(s).solve(x);
      if (!sol.feasible) break;
      const double d = goal_distance(*in.grid, in.grid->point(sol.states.back()), s.config.goal);
      CHECK(d <= last + 1e-12);
      last = d;
    }
  }
}

TEST_CASE("nominal tie-break steers through exact ties") {
  // Two controls whose boxes both contain the goal: the lexicographic rule takes control 0,
  // the nominal rule prefers the one whose box center is nearer the goal.
  // Both boxes contain the goal state, so the optimistic values tie.
  const auto g = std::make_shared<GridSpec>(make_grid(1, plane(5, 1, 2)));
  auto graph = std::make_shared<ReachGraph>(*g, 2);
  auto map = std::make_shared<SafeControlMap>(g->size(), 2);
  auto span = [](int lo, int hi) {
    LatticeBox b;
    b.dims = 2;
    b.lo = {lo, 0, 0, 0};
    b.hi = {hi, 0, 0, 0};
    return b;
  };
  for (int i = 0; i < 5; ++i) {
    graph->mark_expanded(i);
    graph->set_box(i, 0, span(0, 2));
    graph->set_box(i, 1, span(2, 3));
  }
  const auto zero = std::make_shared<GpModel>(
      std::make_shared<Posterior>(Posterior::fit({0.0025, 1.0}, 0.01, 3, 1)), std::vector<int>{0});
  PolicySnapshot s{g, graph, map, zero, {}, 40};
  s.config.horizon = 1;
  s.config.goal.center = Eigen::Vector2d(1.0, 0.0);
  s.config.goal.radius = 0.0;
  CHECK(Policy(s).solve(0).controls.front() == 0u);
  s.config.nominal_tiebreak = true;
  CHECK(Policy(s).solve(0).controls.front() == 1u);
}
