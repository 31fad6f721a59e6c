#include "dslap/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dslap {

bool GoalRegion::contains(const State& x) const {
  for (Eigen::Index i = 0; i < center.size(); ++i)
    if (std::abs(x[i] - center[i]) > radius) return false;
  return true;
}

double mpc_weight(int k, double psi) {
  if (k < 0) throw std::invalid_argument("mpc_weight: k must be >= 0");
  return std::exp(-psi * k);
}

double goal_distance(const GridSpec& grid, const State& z, const GoalRegion& goal) {
  double d = 0.0;
  for (int i = 0; i < grid.n_q(); ++i) {
    const double s = grid.bounds().scale_of(i);
    const double lo = (goal.center[i] - goal.radius) / s, hi = (goal.center[i] + goal.radius) / s;
    d = std::max({d, lo - z[i], z[i] - hi});
  }
  return d;
}

LatticeIndex project_safe(const State& z, const SafeControlMap& map, const GridSpec& grid) {
  const int n = grid.dims();
  const double h = grid.step();
  std::array<int, kMaxDims> base{};
  int reach = 0;
  for (int d = 0; d < n; ++d) {
    const int lo = grid.lower(d), hi = lo + grid.extent(d) - 1;
    base[d] = static_cast<int>(std::clamp(std::floor(z[d] / h), lo - 1.0, hi + 1.0));
    reach = std::max({reach, base[d] - lo + 1, hi - base[d] + 1});
  }
  // Every lattice point outside [base - k, base + 1 + k] is at least (k+1)h
  // away, so once the best candidate beats that bound the search is exact.
  LatticeIndex best = -1;
  double bd = std::numeric_limits<double>::infinity();
  for (int k = 0;; ++k) {
    LatticeBox box;
    box.dims = n;
    for (int d = 0; d < n; ++d) {
      box.lo[d] = base[d] - k;
      box.hi[d] = base[d] + 1 + k;
    }
    best = -1;
    bd = std::numeric_limits<double>::infinity();
    grid.for_each_in(grid.clip(box), [&](LatticeIndex y) {
      if (!map.safe(y)) return;
      const double d = rho(z, grid.point(y));
      if (d < bd) {  // visited in increasing index, so ties keep the smallest
        bd = d;
        best = y;
      }
    });
    if (best >= 0 && bd < (k + 1) * h) return best;
    if (k > reach) break;
  }
  if (best < 0) throw std::runtime_error("no safe state");
  return best;
}

Policy::Policy(PolicySnapshot snap) : snap_(std::move(snap)) {
  if (!snap_.grid || !snap_.graph || !snap_.map || !snap_.model) throw std::invalid_argument("policy: incomplete snapshot");
  if (snap_.config.horizon < 1) throw std::invalid_argument("policy: horizon must be >= 1");
  w_ = mpc_weight(snap_.iteration, snap_.config.psi);
  memo_.resize(static_cast<std::size_t>(snap_.config.horizon));
}

double Policy::utility(LatticeIndex x, std::size_t u) const {
  if (snap_.model->exact()) return 0.0;
  std::lock_guard lock(mu_);
  const auto key = static_cast<std::int64_t>(x) * static_cast<std::int64_t>(snap_.grid->num_controls()) +
                   static_cast<std::int64_t>(u);
  auto it = sigma_.find(key);
  if (it != sigma_.end()) return -it->second;
  const double s = snap_.model->sigma(*snap_.grid, x, u);
  sigma_.emplace(key, s);
  return -s;
}

void Policy::prefetch_sigma(const std::vector<LatticeIndex>& states) const {
  if (snap_.model->exact()) return;
  const std::size_t nu = snap_.grid->num_controls();
  std::vector<std::pair<LatticeIndex, std::size_t>> todo;
  for (LatticeIndex x : states)
    for (std::size_t u = 0; u < nu; ++u) {
      if (!snap_.map->allowed(x, u)) continue;
      const auto key = static_cast<std::int64_t>(x) * static_cast<std::int64_t>(nu) + static_cast<std::int64_t>(u);
      if (!sigma_.count(key)) todo.emplace_back(x, u);
    }
  if (todo.empty()) return;
  std::vector<double> s;
  snap_.model->sigma_batch(*snap_.grid, todo, s);
  for (std::size_t i = 0; i < todo.size(); ++i)
    sigma_.emplace(static_cast<std::int64_t>(todo[i].first) * static_cast<std::int64_t>(nu) +
                       static_cast<std::int64_t>(todo[i].second),
                   s[i]);
}

double Policy::terminal(LatticeIndex y) const {
  if (terminal_.empty()) {
    const GridSpec& g = *snap_.grid;
    terminal_.assign(g.size(), std::numeric_limits<double>::infinity());
    for (LatticeIndex i = 0; i < static_cast<LatticeIndex>(g.size()); ++i)
      if (snap_.map->safe(i)) terminal_[static_cast<std::size_t>(i)] = (1.0 - w_) * goal_distance(g, g.point(i), snap_.config.goal);
  }
  return terminal_[static_cast<std::size_t>(y)];
}

std::pair<double, LatticeIndex> Policy::best_successor(int stage, LatticeIndex x, std::size_t u) const {
  const bool adv = snap_.config.adversarial;
  double best = adv ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  LatticeIndex arg = -1;
  snap_.grid->for_each_in(snap_.graph->box(x, u), [&](LatticeIndex y) {
    if (!snap_.map->safe(y)) return;
    const double v = value(stage + 1, y);
    if (adv ? v > best : v < best) {
      best = v;
      arg = y;
    }
  });
  if (arg < 0) return {std::numeric_limits<double>::infinity(), -1};
  return {best, arg};
}

double Policy::value(int stage, LatticeIndex x) const {
  const int phi = snap_.config.horizon;
  if (stage == phi) return terminal(x);
  auto& memo = memo_[static_cast<std::size_t>(stage)];
  if (stage > 0) {
    if (memo.empty()) memo.assign(snap_.grid->size(), std::numeric_limits<double>::quiet_NaN());
    const double m = memo[static_cast<std::size_t>(x)];
    if (!std::isnan(m)) return m;
  }
  double best = std::numeric_limits<double>::infinity();
  if (snap_.graph->expanded(x) && snap_.map->safe(x)) {
    for (std::size_t u = 0; u < snap_.grid->num_controls(); ++u) {
      if (!snap_.map->allowed(x, u)) continue;
      const auto [v, y] = best_successor(stage, x, u);
      if (y < 0) continue;
      best = std::min(best, w_ * utility(x, u) + v);
    }
  }
  if (stage > 0) memo[static_cast<std::size_t>(x)] = best;
  return best;
}

double Policy::nominal_distance(LatticeIndex x, std::size_t u, int steps) const {
  const GridSpec& g = *snap_.grid;
  const auto lattice_center = [&](LatticeIndex y) {
    const LatticeBox b = snap_.graph->box(y, u);
    State c(g.dims());
    for (int d = 0; d < g.dims(); ++d) c[d] = 0.5 * (b.lo[d] + b.hi[d]) * g.step();
    return c;
  };
  State c = g.point(x);
  for (int s = 0; s < steps; ++s) {
    c = lattice_center(x);
    if (s + 1 == steps) break;
    std::array<int, kMaxDims> k{};
    for (int d = 0; d < g.dims(); ++d)
      k[d] = std::clamp(static_cast<int>(std::lround(c[d] / g.step())), g.lower(d), g.lower(d) + g.extent(d) - 1);
    x = g.index_of(k);
    if (!snap_.graph->expanded(x)) break;
  }
  double d2 = 0.0;
  for (int i = 0; i < g.n_q(); ++i) {
    const double e = c[i] - snap_.config.goal.center[i] / g.bounds().scale_of(i);
    d2 += e * e;
  }
  return std::sqrt(d2);
}

MpcSolution Policy::solve(LatticeIndex x_hat) const {
  std::lock_guard lock(mu_);
  const int phi = snap_.config.horizon;
  const GridSpec& g = *snap_.grid;

  // Batch the sigma evaluations the recursion is about to need, stage by stage.
  if (!snap_.model->exact()) {
    std::vector<LatticeIndex> frontier{x_hat};
    std::vector<std::uint8_t> seen(g.size(), 0);
    for (int t = 0; t < phi && !frontier.empty(); ++t) {
      prefetch_sigma(frontier);
      if (t + 1 == phi) break;
      std::vector<LatticeIndex> next;
      std::fill(seen.begin(), seen.end(), 0);
      auto& memo = memo_[static_cast<std::size_t>(t + 1)];
      for (LatticeIndex x : frontier)
        for (std::size_t u = 0; u < g.num_controls(); ++u) {
          if (!snap_.map->allowed(x, u) || !snap_.graph->expanded(x)) continue;
          g.for_each_in(snap_.graph->box(x, u), [&](LatticeIndex y) {
            if (seen[static_cast<std::size_t>(y)] || !snap_.map->safe(y)) return;
            if (!memo.empty() && !std::isnan(memo[static_cast<std::size_t>(y)])) return;
            seen[static_cast<std::size_t>(y)] = 1;
            next.push_back(y);
          });
        }
      frontier = std::move(next);
    }
  }

  MpcSolution sol;
  sol.states.push_back(x_hat);
  LatticeIndex x = x_hat;
  for (int t = 0; t < phi; ++t) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bu = 0;
    LatticeIndex by = -1;
    if (snap_.graph->expanded(x) && snap_.map->safe(x)) {
      for (std::size_t u = 0; u < g.num_controls(); ++u) {
        if (!snap_.map->allowed(x, u)) continue;
        const auto [v, y] = best_successor(t, x, u);
        if (y < 0) continue;
        const double total = w_ * utility(x, u) + v;
        if (total < best) {
          best = total;
          bu = u;
          by = y;
        }
      }
    }
    if (by < 0) {
      sol.feasible = false;
      if (t == 0) {
        // No plan: fall back to the lowest surviving control, if any.
        for (std::size_t u = 0; u < g.num_controls(); ++u)
          if (snap_.map->allowed(x, u)) {
            sol.controls.push_back(u);
            break;
          }
      }
      return sol;
    }
    if (snap_.config.nominal_tiebreak) {
      // Re-pick among the exact ties by the nominal rollout.
      double bn = std::numeric_limits<double>::infinity();
      for (std::size_t u = 0; u < g.num_controls(); ++u) {
        if (!snap_.map->allowed(x, u)) continue;
        const auto [v, y] = best_successor(t, x, u);
        if (y < 0 || w_ * utility(x, u) + v != best) continue;
        const double nd = nominal_distance(x, u, phi - t);
        if (nd < bn) {
          bn = nd;
          bu = u;
          by = y;
        }
      }
    }
    if (t == 0) sol.value = best;
    sol.explore_term += w_ * utility(x, bu);
    sol.controls.push_back(bu);
    sol.states.push_back(by);
    x = by;
  }
  sol.feasible = true;
  sol.goal_term = terminal(x);
  return sol;
}

PolicyDecision Policy::eval(const State& x) const {
  const GridSpec& g = *snap_.grid;
  const State z = g.to_lattice_frame(x);
  PolicyDecision d;
  d.projected = project_safe(z, *snap_.map, g);
  d.near_safe = rho(z, g.point(d.projected)) <= g.step();
  d.plan = solve(d.projected);
  if (!d.plan.controls.empty()) d.control = d.plan.controls.front();
  return d;
}

}  // namespace dslap
