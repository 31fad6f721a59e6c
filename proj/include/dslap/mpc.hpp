#pragma once

#include <limits>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "dslap/disturbance.hpp"
#include "dslap/reach.hpp"
#include "dslap/safety.hpp"

namespace dslap {

/// inf-norm ball in physical position space.
struct GoalRegion {
  State center;
  double radius = 0.0;
  bool contains(const State& x) const;
};

struct MpcConfig {
  int horizon = 2;
  double psi = 1.0;
  bool adversarial = false;  // successor chosen by max instead of min
  // Among controls of equal value, prefer the one whose chain of forward-set
  // centers ends nearest the goal before falling back to control order.
  bool nominal_tiebreak = false;
  GoalRegion goal;
};

/// e^{-psi k}.
double mpc_weight(int k, double psi);

/// rho(y_q, X_G) in the lattice frame.
double goal_distance(const GridSpec& grid, const State& z, const GoalRegion& goal);

/// Everything a policy needs, frozen when the compute module finishes.
struct PolicySnapshot {
  std::shared_ptr<const GridSpec> grid;
  std::shared_ptr<const ReachGraph> graph;
  std::shared_ptr<const SafeControlMap> map;
  std::shared_ptr<const DisturbanceModel> model;
  MpcConfig config;
  int iteration = 0;
};

struct MpcSolution {
  bool feasible = false;            // some allowed control has a safe successor at every stage
  double value = std::numeric_limits<double>::infinity();
  double goal_term = 0.0;           // (1 - w) rho(x_q(t + phi eps), X_G)
  double explore_term = 0.0;        // w * sum r
  std::vector<std::size_t> controls;     // phi entries
  std::vector<LatticeIndex> states;      // phi + 1 entries, starting at x_hat
};

struct PolicyDecision {
  std::size_t control = 0;
  LatticeIndex projected = -1;
  bool near_safe = false;  // projection within h of the query
  MpcSolution plan;
};

/// Nearest safe lattice state (ties to the smallest index).  Throws
/// std::runtime_error("no safe state") when the safe set is empty.
LatticeIndex project_safe(const State& z, const SafeControlMap& map, const GridSpec& grid);

/// Finite-horizon problem solved by backward DP over the safe graph with
/// lazily memoized stage values.  Cheap to share: memo state is mutex guarded.
class Policy {
 public:
  explicit Policy(PolicySnapshot snap);

  const PolicySnapshot& snapshot() const { return snap_; }
  double weight() const { return w_; }

  MpcSolution solve(LatticeIndex x_hat) const;
  /// Project (physical state), solve, return the first control.
  PolicyDecision eval(const State& x) const;

  /// Utility r(x, u) = -sigma(x, u), memoized.
  double utility(LatticeIndex x, std::size_t u) const;

 private:
  double terminal(LatticeIndex y) const;
  double value(int stage, LatticeIndex x) const;
  // Best successor of (x, u) at stage+1: (value, index); +inf/-1 if none.
  std::pair<double, LatticeIndex> best_successor(int stage, LatticeIndex x, std::size_t u) const;
  void prefetch_sigma(const std::vector<LatticeIndex>& states) const;
  // Euclidean goal distance after `steps` steps along forward-set centers under u.
  double nominal_distance(LatticeIndex x, std::size_t u, int steps) const;

  PolicySnapshot snap_;
  double w_ = 1.0;
  mutable std::recursive_mutex mu_;
  mutable std::vector<double> terminal_;
  mutable std::vector<std::vector<double>> memo_;  // stages 1..phi-1
  mutable std::unordered_map<std::int64_t, double> sigma_;
};

}  // namespace dslap
