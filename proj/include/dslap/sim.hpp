#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dslap/config.hpp"
#include "dslap/disturbance.hpp"
#include "dslap/gpr.hpp"
#include "dslap/mpc.hpp"
#include "dslap/wind.hpp"

namespace dslap {

/// The true world of a mission plus the planners' fixed beliefs about it.
struct World {
  SimConfig cfg;
  Bounds bounds;
  WindField wind;
  DisturbanceField truth;
  ModelConstants constants;  // what the planner uses for ell and m (variant dependent)
  std::vector<int> learned;  // coordinates of g the planner estimates
};

World make_world(const SimConfig& cfg);
World make_world(const SimConfig& cfg, WindField wind);

/// x_q outside every obstacle and more than 2 zeta (inf-norm) from every other robot.
bool check_free(const State& xq, std::span<const State> others, const Obstacles& obs, double zeta);
bool in_obstacle(const State& xq, const Obstacles& obs);

/// One batch along a true trajectory: inputs (x, u), outputs g(x, u) + e on
/// the `outputs` coordinates, e ~ N(0, sigma_e^2).
Dataset collect_data(std::span<const State> xs, std::span<const Control> us, const DisturbanceField& g,
                     const std::vector<int>& outputs, double sigma_e, std::mt19937_64& rng);

/// The planner's disturbance model for the world's variant.
std::shared_ptr<const DisturbanceModel> make_model(const World& w, std::shared_ptr<const Posterior> post);

/// Lattice-frame reach parameters for a world.
ReachParams reach_params(const World& w);

struct Plan {
  std::shared_ptr<const GridSpec> grid;
  std::shared_ptr<const Policy> policy;  // null when the safe set is empty
  std::size_t safe_count = 0;
  int level = 0;
  double uncertainty = 0.0;   // physical rate used in the forward sets
  double tube_error = 0.0;    // max |mu - g| over expanded lattice pairs (physical)
  bool tube_ok = true;        // tube_error <= uncertainty
  std::vector<std::pair<int, State>> tube_sources;  // higher-priority (robot, state) used by ICA
  SafetyCounters oca_counters;
  SafetyCounters ica_counters;
  double t_oca = 0.0;
  double t_ica = 0.0;
};

/// Compute-module body: Discrete -> reach graph -> OCA -> ICA -> policy.
/// `higher` are (sender, physical state) of the higher-priority robots.
Plan compute_plan(const World& w, std::shared_ptr<const GridSpec> grid, std::shared_ptr<const DisturbanceModel> model,
                  const GoalRegion& goal, int iteration, const std::vector<std::pair<int, State>>& higher);

struct TraceRow {
  int k = 0;
  int robot = 0;
  State x;                     // at the start of the iteration
  std::size_t safe_set_size = 0;  // of the policy executed during the iteration
  double t_sl = 0.0, t_oca = 0.0, t_ica = 0.0, t_al = 0.0;
  bool collided = false;
  bool arrived = false;
  bool near_safe = false;      // B(x, h) meets the executed safe set
  bool tube_ok = false;        // tube condition of the executed policy's model
  bool infeasible = false;     // some sub-step found no safe state or no plan
  bool left_domain = false;
  int level = 0;               // p of the executed policy
};

struct RobotOutcome {
  bool arrived = false;
  bool collided = false;
  bool left_domain = false;
  bool infeasible_start = false;
  int infeasible_events = 0;
  double arrival_time = -1.0;
  State final_state;
  bool safe_arrival() const { return arrived && !collided; }
};

struct Trace {
  std::vector<TraceRow> rows;
  std::vector<RobotOutcome> robots;
  std::vector<int> levels;  // p_k used for pi_k, k = 0, 1, ...

  void write_csv(std::ostream& os) const;
};

struct MissionHooks {
  /// Called after pi_k of a robot is built (k = 0 for the prior policy).
  std::function<void(int k, int robot, const Plan&, const Posterior&)> on_plan;
  /// Called with every control decision (time, robot, physical state, control index, data count).
  std::function<void(double t, int robot, const State&, std::size_t u, std::size_t data_points)> on_control;
};

Trace run_mission(const World& w, const MissionHooks& hooks = {});
Trace run_mission(const SimConfig& cfg);

/// Persistence preconditions at the final level, in the lattice frame, with
/// the prior sup sigma as the worst-case sigma_bar.
struct ConditionReport {
  double sigma_bar = 0.0;     // normalized
  double eps = 0.0;
  double h_final = 0.0;
  double m = 0.0;
  double lhs_sigma = 0.0;     // 4 gamma sigma_bar eps
  double xi = 0.0;
  double rhs_xi = 0.0;        // h / m
  bool sigma_ok = false;
  bool xi_ok = false;
  bool non_position_only = false;   // disturbance only on non-position coordinates
  std::size_t states_init = 0, states_max = 0;
  bool ok() const { return sigma_ok && xi_ok && non_position_only; }
};

ConditionReport check_conditions(const World& w);
void write_condition_report(std::ostream& os, const ConditionReport& r);

}  // namespace dslap
