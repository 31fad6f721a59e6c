#include "dslap/sim.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace dslap {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

DisturbanceField belief_field(const World& w) {
  switch (w.cfg.variant) {
    case Variant::Vanilla: return DisturbanceField::zero(3);
    case Variant::Robust: {
      DisturbanceField g = DisturbanceField::constant(3, w.learned, w.cfg.robust_r_hat * w.cfg.boat.v);
      return g;
    }
    default: return w.truth;
  }
}

}  // namespace

World make_world(const SimConfig& cfg) {
  WindSpec spec = cfg.wind;
  spec.v = cfg.boat.v;
  return make_world(cfg, gen_wind_field(spec, cfg.x1, cfg.x2));
}

World make_world(const SimConfig& cfg, WindField wind) {
  cfg.validate();
  World w;
  w.cfg = cfg;
  w.bounds = cfg.bounds();
  w.wind = std::move(wind);
  w.learned = cfg.disturbed_coords();
  w.truth = w.wind.as_disturbance(3, w.learned);
  w.constants = estimate_constants(cfg.boat, w.bounds, belief_field(w));
  return w;
}

bool in_obstacle(const State& xq, const Obstacles& obs) {
  for (const auto& box : obs.boxes) {
    bool inside = true;
    for (std::size_t d = 0; d < box.size() && inside; ++d)
      inside = xq[static_cast<Eigen::Index>(d)] >= box[d].lo && xq[static_cast<Eigen::Index>(d)] <= box[d].hi;
    if (inside) return true;
  }
  return false;
}

bool check_free(const State& xq, std::span<const State> others, const Obstacles& obs, double zeta) {
  if (in_obstacle(xq, obs)) return false;
  for (const State& o : others)
    if (rho(xq.head(2), o.head(2)) <= 2.0 * zeta) return false;
  return true;
}

Dataset collect_data(std::span<const State> xs, std::span<const Control> us, const DisturbanceField& g,
                     const std::vector<int>& outputs, double sigma_e, std::mt19937_64& rng) {
  if (xs.size() != us.size()) throw std::invalid_argument("collect_data: states and controls differ in length");
  Dataset d;
  if (xs.empty()) return d;
  const auto n = static_cast<Eigen::Index>(xs.size());
  const auto nx = xs.front().size(), nu = us.front().size();
  d.Z.resize(n, nx + nu);
  d.Y.resize(n, static_cast<Eigen::Index>(outputs.size()));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Eigen::Index r = 0; r < n; ++r) {
    const State& x = xs[static_cast<std::size_t>(r)];
    const Control& u = us[static_cast<std::size_t>(r)];
    d.Z.row(r) << x.transpose(), u.transpose();
    const State gx = g(x, u);
    for (std::size_t o = 0; o < outputs.size(); ++o)
      d.Y(r, static_cast<Eigen::Index>(o)) = gx[outputs[o]] + sigma_e * noise(rng);
  }
  d.batches.push_back(xs.size());
  return d;
}

std::shared_ptr<const DisturbanceModel> make_model(const World& w, std::shared_ptr<const Posterior> post) {
  switch (w.cfg.variant) {
    case Variant::Dslap: return std::make_shared<GpModel>(std::move(post), w.learned);
    case Variant::Vanilla: return std::make_shared<ZeroModel>(w.learned);
    case Variant::Robust: return std::make_shared<RobustModel>(w.learned, w.cfg.robust_r_hat * w.cfg.boat.v);
    case Variant::Known: return std::make_shared<KnownModel>(w.truth);
  }
  throw std::logic_error("make_model: bad variant");
}

ReachParams reach_params(const World& w) {
  ReachParams p;
  p.eps = w.cfg.eps();
  p.gamma = w.cfg.gamma;
  p.ell = w.constants.ell;
  p.m = w.constants.m;
  p.tight_sigma = w.cfg.tight_sigma;
  p.periodic = {2};
  return p;
}

Plan compute_plan(const World& w, std::shared_ptr<const GridSpec> grid, std::shared_ptr<const DisturbanceModel> model,
                  const GoalRegion& goal, int iteration, const std::vector<std::pair<int, State>>& higher) {
  const SimConfig& cfg = w.cfg;
  const GridSpec& g = *grid;
  const ReachParams params = reach_params(w);
  const double margin = params.m * params.eps + g.step();
  SafetyOptions opt;
  opt.engine = cfg.engine;

  Plan plan;
  plan.grid = grid;
  plan.level = g.level();
  plan.tube_sources = higher;

  auto t0 = Clock::now();
  plan.uncertainty = model->uncertainty(g, params.gamma);
  const std::vector<std::uint8_t> near = near_obstacle_mask(g, cfg.obstacles, margin);

  // The harness knows g, so it can tell whether this model's tube holds on
  // every pair the forward sets are built from.
  Eigen::MatrixXd truth_block;
  int truth_lead = -1;
  double err = 0.0;
  auto observe = [&](int lead, std::size_t u, const Eigen::MatrixXd& mean) {
    const auto rows = g.stride(0);
    const LatticeIndex first = static_cast<LatticeIndex>(lead * rows);
    if (truth_lead != lead) {
      truth_block.resize(rows, g.dims());
      for (Eigen::Index r = 0; r < rows; ++r)
        truth_block.row(r) = w.truth(g.physical_point(first + static_cast<LatticeIndex>(r)), g.control(u)).transpose();
      truth_lead = lead;
    }
    for (Eigen::Index r = 0; r < rows; ++r)
      if (!near[static_cast<std::size_t>(first + r)]) err = std::max(err, (mean.row(r) - truth_block.row(r)).cwiseAbs().maxCoeff());
  };
  auto graph = std::make_shared<ReachGraph>(build_reach_graph(w.cfg.boat, *model, params, g, near, observe));
  plan.tube_error = err;
  plan.tube_ok = err <= plan.uncertainty + 1e-12;

  OcaResult o = oca(g, *graph, cfg.obstacles, margin, opt);
  plan.oca_counters = o.counters;
  plan.t_oca = seconds_since(t0);

  t0 = Clock::now();
  std::vector<ReachTube> tubes;
  for (const auto& [sender, x] : higher)
    tubes.push_back(broadcast_tube(sender, g.to_lattice_frame(x), params, cfg.xi, cfg.zeta, g));
  const double dilate = params.eps * model->normalized(g, plan.uncertainty);
  ica(o.map, *graph, tubes, dilate, opt, &plan.ica_counters);
  plan.t_ica = seconds_since(t0);

  plan.safe_count = o.map.safe_count();
  if (plan.safe_count > 0) {
    PolicySnapshot snap;
    snap.grid = grid;
    snap.graph = graph;
    snap.map = std::make_shared<SafeControlMap>(std::move(o.map));
    snap.model = std::move(model);
    snap.config = cfg.mpc;
    snap.config.goal = goal;
    snap.iteration = iteration;
    plan.policy = std::make_shared<Policy>(std::move(snap));
  }
  return plan;
}

namespace {

struct Robot {
  int id = 0;
  State x;
  bool active = true;
  GoalRegion goal;
  std::shared_ptr<const Posterior> post;
  Plan plan;
  std::mt19937_64 rng;
  RobotOutcome out;
};

std::size_t zero_control(const GridSpec& g) {
  std::size_t best = 0;
  for (std::size_t u = 1; u < g.num_controls(); ++u)
    if (g.control(u).cwiseAbs().maxCoeff() < g.control(best).cwiseAbs().maxCoeff()) best = u;
  return best;
}

bool inside_domain(const State& x, const Bounds& b) {
  for (int d = 0; d < b.n_q; ++d)
    if (x[d] < b.state[d].lo || x[d] > b.state[d].hi) return false;
  return true;
}

}  // namespace

Trace run_mission(const World& w, const MissionHooks& hooks) {
  const SimConfig& cfg = w.cfg;
  const int n = static_cast<int>(cfg.robots.size());
  Trace trace;
  trace.robots.resize(static_cast<std::size_t>(n));
  if (cfg.k_tilde == 0) return trace;

  std::vector<int> order = cfg.priority;
  if (order.empty())
    for (int i = 0; i < n; ++i) order.push_back(i);

  std::map<int, std::shared_ptr<const GridSpec>> grids;
  auto grid_at = [&](int p) {
    auto& g = grids[p];
    if (!g) g = std::make_shared<GridSpec>(make_grid(p, w.bounds));
    return g;
  };

  std::vector<Robot> robots(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Robot& r = robots[static_cast<std::size_t>(i)];
    r.id = i;
    r.x = cfg.robots[static_cast<std::size_t>(i)].start;
    r.x[2] = wrap_angle(r.x[2]);
    r.goal.center = cfg.robots[static_cast<std::size_t>(i)].goal;
    r.goal.radius = cfg.robots[static_cast<std::size_t>(i)].goal_radius;
    r.post = std::make_shared<Posterior>(
        Posterior::fit(cfg.kernel, cfg.noise.sigma_e, 4, static_cast<int>(w.learned.size())));
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(i), 0x5eedu};
    r.rng.seed(seq);
  }

  // Plans for every active robot, highest priority first; tubes come from the
  // given iteration-start states.
  auto plan_all = [&](int k, int p, const std::vector<State>& starts) {
    const auto grid = grid_at(p);
    std::vector<std::pair<int, State>> higher;
    for (int i : order) {
      Robot& r = robots[static_cast<std::size_t>(i)];
      if (!r.active) continue;
      r.plan = compute_plan(w, grid, make_model(w, r.post), r.goal, k, higher);
      higher.emplace_back(i, starts[static_cast<std::size_t>(i)]);
      if (hooks.on_plan) hooks.on_plan(k, i, r.plan, *r.post);
    }
  };

  // pi_0 from the prior.
  int p = cfg.p_init;
  {
    std::vector<State> starts;
    for (const Robot& r : robots) starts.push_back(r.x);
    plan_all(0, p, starts);
    trace.levels.push_back(p);
  }
  for (Robot& r : robots) {
    const GridSpec& g = *r.plan.grid;
    bool ok = false;
    if (r.plan.policy) {
      const State z = g.to_lattice_frame(r.x);
      ok = rho(z, g.point(project_safe(z, *r.plan.policy->snapshot().map, g))) <= g.step();
    }
    if (!ok) {
      r.out.infeasible_start = true;
      r.active = false;
      r.out.final_state = r.x;
    }
  }

  const double eps = cfg.eps();
  const double delta = cfg.noise.delta;
  const double max_step = std::min(0.1, delta);
  IntegrateOptions iopt;
  iopt.max_step = max_step;
  iopt.wrap_dims = {2};

  for (int k = 1; k <= cfg.k_tilde; ++k) {
    bool any = false;
    for (const Robot& r : robots) any = any || r.active;
    if (!any) break;

    const double t_base = (k - 1) * cfg.xi;
    std::vector<State> starts;
    for (const Robot& r : robots) starts.push_back(r.x);
    std::vector<TraceRow> rows(static_cast<std::size_t>(n));
    std::vector<char> row_used(static_cast<std::size_t>(n), 0);
    std::vector<std::vector<State>> sx(static_cast<std::size_t>(n));
    std::vector<std::vector<Control>> su(static_cast<std::size_t>(n));
    for (Robot& r : robots) {
      if (!r.active) continue;
      TraceRow& row = rows[static_cast<std::size_t>(r.id)];
      row_used[static_cast<std::size_t>(r.id)] = 1;
      row.k = k;
      row.robot = r.id;
      row.x = r.x;
      row.safe_set_size = r.plan.safe_count;
      row.tube_ok = r.plan.tube_ok;
      row.level = r.plan.level;
    }

    // Sample instants j * delta, j = 0..tau_bar, relative to the iteration start.
    std::vector<double> samples;
    for (int j = 0; j <= cfg.noise.tau_bar; ++j) samples.push_back(j * delta);
    std::size_t next_sample = 0;
    const double tol = 1e-9;

    std::vector<std::size_t> control(static_cast<std::size_t>(n), 0);
    auto take_samples_at = [&](double t) {
      while (next_sample < samples.size() && samples[next_sample] <= t + tol) {
        if (samples[next_sample] >= t - tol)
          for (Robot& r : robots)
            if (r.active) {
              sx[static_cast<std::size_t>(r.id)].push_back(r.x);
              su[static_cast<std::size_t>(r.id)].push_back(r.plan.grid->control(control[static_cast<std::size_t>(r.id)]));
            }
        ++next_sample;
      }
    };

    for (int s = 0; s < cfg.n_bar; ++s) {
      const double ts = s * eps;
      // Control module: policy from the previous iteration, held over the sub-step.
      for (Robot& r : robots) {
        if (!r.active) continue;
        TraceRow& row = rows[static_cast<std::size_t>(r.id)];
        const auto t0 = Clock::now();
        std::size_t u = zero_control(*r.plan.grid);
        bool near = false, feasible = false;
        if (r.plan.policy) {
          const PolicyDecision d = r.plan.policy->eval(r.x);
          near = d.near_safe;
          feasible = d.plan.feasible;
          if (!d.plan.controls.empty()) u = d.control;
        }
        if (!feasible) {
          row.infeasible = true;
          ++r.out.infeasible_events;
        }
        if (s == 0) row.near_safe = near;
        control[static_cast<std::size_t>(r.id)] = u;
        row.t_al += seconds_since(t0);
        if (hooks.on_control) hooks.on_control(t_base + ts, r.id, r.x, u, r.post->size());
      }
      take_samples_at(ts);

      // Segment the sub-step at interior sample instants.
      std::vector<double> cuts{ts};
      for (double t : samples)
        if (t > ts + tol && t < ts + eps - tol) cuts.push_back(t);
      cuts.push_back(ts + eps);

      for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        const double dur = cuts[c + 1] - cuts[c];
        std::vector<std::vector<State>> path(static_cast<std::size_t>(n));
        for (Robot& r : robots) {
          if (!r.active) continue;
          IntegrateOptions o = iopt;
          auto& pth = path[static_cast<std::size_t>(r.id)];
          o.observer = [&pth](double, const State& x) { pth.push_back(x); };
          integrate(cfg.boat, r.x, r.plan.grid->control(control[static_cast<std::size_t>(r.id)]), dur, w.truth, o);
        }
        const int steps = static_cast<int>(std::ceil(dur / max_step - 1e-12));
        for (int st = 0; st < steps; ++st) {
          // Lockstep: every active robot at the same instant.
          std::vector<int> live;
          for (const Robot& r : robots)
            if (r.active) live.push_back(r.id);
          for (int i : live) robots[static_cast<std::size_t>(i)].x = path[static_cast<std::size_t>(i)][static_cast<std::size_t>(st)];
          const double t_now = t_base + cuts[c] + dur * (st + 1) / steps;
          std::vector<char> hit(static_cast<std::size_t>(n), 0);
          for (std::size_t a = 0; a < live.size(); ++a) {
            const State& xa = robots[static_cast<std::size_t>(live[a])].x;
            if (in_obstacle(xa.head(2), cfg.obstacles)) hit[static_cast<std::size_t>(live[a])] = 1;
            for (std::size_t b = a + 1; b < live.size(); ++b)
              if (rho(xa.head(2), robots[static_cast<std::size_t>(live[b])].x.head(2)) <= 2.0 * cfg.zeta)
                hit[static_cast<std::size_t>(live[a])] = hit[static_cast<std::size_t>(live[b])] = 1;
          }
          for (int i : live) {
            Robot& r = robots[static_cast<std::size_t>(i)];
            TraceRow& row = rows[static_cast<std::size_t>(i)];
            if (hit[static_cast<std::size_t>(i)]) {
              r.out.collided = row.collided = true;
              r.active = false;
            } else if (r.goal.contains(r.x.head(2))) {
              r.out.arrived = row.arrived = true;
              r.out.arrival_time = t_now;
              r.active = false;
            } else if (!inside_domain(r.x, w.bounds)) {
              r.out.left_domain = row.left_domain = true;
              r.active = false;
            }
            if (!r.active) r.out.final_state = r.x;
          }
        }
        // A sample on the sub-step boundary belongs to the next control.
        if (c + 2 < cuts.size()) take_samples_at(cuts[c + 1]);
      }
    }
    take_samples_at(cfg.xi);

    // Compute module for pi_k, on the data of this iteration.
    for (Robot& r : robots) {
      if (!r.active) continue;
      if (cfg.variant != Variant::Dslap) continue;
      const auto t0 = Clock::now();
      const auto& xs = sx[static_cast<std::size_t>(r.id)];
      const auto& us = su[static_cast<std::size_t>(r.id)];
      const Dataset batch = collect_data(xs, us, w.truth, w.learned, cfg.noise.sigma_e, r.rng);
      Posterior next = r.post->update(batch);
      if (next.data().batches.size() > cfg.gp_max_batches) next = next.thinned(cfg.gp_max_batches);
      r.post = std::make_shared<Posterior>(std::move(next));
      rows[static_cast<std::size_t>(r.id)].t_sl = seconds_since(t0);
    }
    p = std::min(p + 1, cfg.p_max);
    trace.levels.push_back(p);
    plan_all(k, p, starts);
    for (Robot& r : robots) {
      if (!r.active) continue;
      rows[static_cast<std::size_t>(r.id)].t_oca = r.plan.t_oca;
      rows[static_cast<std::size_t>(r.id)].t_ica = r.plan.t_ica;
    }
    for (int i = 0; i < n; ++i) {
      if (!row_used[static_cast<std::size_t>(i)]) continue;
      TraceRow& row = rows[static_cast<std::size_t>(i)];
      if (!cfg.timing) row.t_sl = row.t_oca = row.t_ica = row.t_al = 0.0;
      trace.rows.push_back(std::move(row));
    }
  }
  for (Robot& r : robots) {
    if (r.active) r.out.final_state = r.x;
    trace.robots[static_cast<std::size_t>(r.id)] = r.out;
  }
  return trace;
}

Trace run_mission(const SimConfig& cfg) { return run_mission(make_world(cfg)); }

void Trace::write_csv(std::ostream& os) const {
  os << "k,robot,x1,x2,heading,safe_set_size,t_SL,t_OCA,t_ICA,t_AL,collided,arrived,near_safe,tube_ok,infeasible,"
        "left_domain,level\n";
  const auto old = os.precision(17);
  for (const TraceRow& r : rows) {
    os << r.k << ',' << r.robot << ',' << r.x[0] << ',' << r.x[1] << ',' << r.x[2] << ',' << r.safe_set_size << ','
       << r.t_sl << ',' << r.t_oca << ',' << r.t_ica << ',' << r.t_al << ',' << int(r.collided) << ','
       << int(r.arrived) << ',' << int(r.near_safe) << ',' << int(r.tube_ok) << ',' << int(r.infeasible) << ','
       << int(r.left_domain) << ',' << r.level << '\n';
  }
  os.precision(old);
}

ConditionReport check_conditions(const World& w) {
  const SimConfig& cfg = w.cfg;
  ConditionReport r;
  // Sizes only: the published domain does not fit a 32-bit lattice index.
  auto states_at = [&](int p) {
    const double h = std::ldexp(1.0, -p);
    std::size_t n = 1;
    for (int d = 0; d < w.bounds.n_x(); ++d) {
      const double s = w.bounds.scale_of(d);
      n *= static_cast<std::size_t>(lattice_count({w.bounds.state[d].lo / s, w.bounds.state[d].hi / s}, h));
    }
    return n;
  };
  double min_scale = std::numeric_limits<double>::infinity();
  for (int i : w.learned) min_scale = std::min(min_scale, w.bounds.scale_of(i));
  r.sigma_bar = std::sqrt(cfg.kernel.a) / min_scale;
  r.eps = cfg.eps();
  r.h_final = std::ldexp(1.0, -cfg.p_max);
  r.m = w.constants.m;
  r.lhs_sigma = 4.0 * cfg.gamma * r.sigma_bar * r.eps;
  r.xi = cfg.xi;
  r.rhs_xi = r.m > 0 ? r.h_final / r.m : std::numeric_limits<double>::infinity();
  r.sigma_ok = r.lhs_sigma <= r.h_final;
  r.xi_ok = r.xi <= r.rhs_xi;
  r.non_position_only = true;
  for (int i : w.learned) r.non_position_only = r.non_position_only && i >= w.bounds.n_q;
  r.states_init = states_at(cfg.p_init);
  r.states_max = states_at(cfg.p_max);
  return r;
}

void write_condition_report(std::ostream& os, const ConditionReport& r) {
  os << std::setprecision(6);
  os << "lattice states at p_init: " << r.states_init << "\n";
  os << "lattice states at p_max:  " << r.states_max << "\n";
  os << "4*gamma*sigma_bar*eps = " << r.lhs_sigma << "  <=  h = " << r.h_final << " : "
     << (r.sigma_ok ? "holds" : "violated") << "\n";
  os << "xi = " << r.xi << "  <=  h/m = " << r.rhs_xi << " : " << (r.xi_ok ? "holds" : "violated") << "\n";
  os << "disturbance on non-position coordinates only: " << (r.non_position_only ? "yes" : "no") << "\n";
  os << "persistence preconditions: " << (r.ok() ? "satisfied" : "not satisfied") << "\n";
}

}  // namespace dslap
