#pragma once

#include <bit>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dslap/grid.hpp"
#include "dslap/reach.hpp"

namespace dslap {

/// Axis-aligned boxes in physical position space.
struct Obstacles {
  std::vector<std::vector<Interval>> boxes;
  bool empty() const { return boxes.empty(); }
};

/// inf-norm distance from the position part of a lattice-frame point to the
/// obstacles, measured in the lattice frame.  +infinity without obstacles.
double rho_to_obstacles(const State& z, const Obstacles& obs, const GridSpec& grid);

/// Per-state surviving control sets as bitmasks over U_p.
class SafeControlMap {
 public:
  SafeControlMap() = default;
  SafeControlMap(std::size_t num_states, std::size_t num_controls);

  std::size_t num_states() const { return mask_.size(); }
  std::size_t num_controls() const { return nu_; }
  std::uint64_t controls(LatticeIndex x) const { return mask_[static_cast<std::size_t>(x)]; }
  bool allowed(LatticeIndex x, std::size_t u) const { return (controls(x) >> u) & 1u; }
  bool safe(LatticeIndex x) const { return !unsafe_[static_cast<std::size_t>(x)]; }
  bool unsafe(LatticeIndex x) const { return unsafe_[static_cast<std::size_t>(x)]; }
  std::size_t safe_count() const;
  std::vector<LatticeIndex> safe_states() const;

  /// Returns true if u was present.
  bool remove(LatticeIndex x, std::size_t u);
  void mark_unsafe(LatticeIndex x) { unsafe_[static_cast<std::size_t>(x)] = 1; }
  const std::vector<std::uint8_t>& unsafe_flags() const { return unsafe_; }

 private:
  std::size_t nu_ = 0;
  std::vector<std::uint64_t> mask_;
  std::vector<std::uint8_t> unsafe_;
};

struct SafetyCounters {
  std::int64_t removals = 0;   // controls deleted from some U_p(x)
  std::int64_t seeded = 0;     // states added to a seed set
  std::int64_t closed = 0;     // states added by the closure
  std::int64_t sweeps = 0;     // full passes of the sweep engine
};

/// Collision predicate on an explicit forward set: some y has
/// rho(y_q, X_O) <= margin.
bool collision(std::span<const LatticeIndex> fr_set, const GridSpec& grid, const Obstacles& obs, double margin);

/// Prefix-sum counter over an indicator on the lattice: "does this box contain
/// a marked state" in O(2^n).
class BoxCounter {
 public:
  BoxCounter(const GridSpec& grid, const std::vector<std::uint8_t>& marked);
  std::int64_t count(const LatticeBox& b) const;
  bool any(const LatticeBox& b) const { return !b.empty() && count(b) > 0; }

 private:
  const GridSpec* grid_;
  std::vector<std::int64_t> pstride_;
  std::vector<std::int32_t> prefix_;
};

enum class WorklistOrder { Fifo, Lifo };
enum class UnsafeEngine { Auto, Worklist, Sweep };

struct SafetyOptions {
  UnsafeEngine engine = UnsafeEngine::Auto;
  WorklistOrder order = WorklistOrder::Fifo;
  std::int64_t max_edges = std::int64_t{1} << 26;  // BR budget for Auto
};

/// Worklist closure over the backward adjacency: every new unsafe y removes u
/// from every x in BR(y, u); an x whose set empties joins the worklist.
/// Returns the states added (seeds included, in processing order).
std::vector<LatticeIndex> unsafe_update(SafeControlMap& map, const BackwardAdjacency& br,
                                        const std::vector<LatticeIndex>& seed, WorklistOrder order,
                                        SafetyCounters* counters = nullptr);

/// Same fixpoint computed by repeated sweeps: remove u from x when FR(x,u)
/// contains an unsafe state; repeat until nothing changes.
std::vector<LatticeIndex> unsafe_update_sweep(SafeControlMap& map, const ReachGraph& graph,
                                              const std::vector<LatticeIndex>& seed,
                                              SafetyCounters* counters = nullptr);

struct OcaResult {
  SafeControlMap map;
  std::vector<std::uint8_t> near;        // rho(x_q, X_O) <= margin, also the skip mask
  std::vector<LatticeIndex> seed;        // near states and states emptied by collisions
  std::vector<LatticeIndex> closure;     // everything marked unsafe
  bool empty = false;                    // no safe state left
  SafetyCounters counters;
};

std::vector<std::uint8_t> near_obstacle_mask(const GridSpec& grid, const Obstacles& obs, double margin);

/// The graph must have been built with near_obstacle_mask(grid, obs, margin) as skip mask.
OcaResult oca(const GridSpec& grid, const ReachGraph& graph, const Obstacles& obs, double margin,
              const SafetyOptions& opt = {});

/// Position-space box broadcast by a robot: center x_q[k], inf-norm radius in
/// the lattice frame.
struct ReachTube {
  int sender = 0;
  State center;  // lattice-frame position
  double radius = 0.0;
};

/// 2 xi m + 2 zeta + m eps + alpha / 2 + 3h, lattice frame (zeta already scaled).
double tube_radius(double xi, double m, double zeta, double eps, double alpha, double h);

ReachTube broadcast_tube(int sender, const State& z, const ReachParams& params, double xi, double zeta,
                         const GridSpec& grid);

/// Seeds: lattice states whose position lies within tube radius + dilate of a
/// tube center, at every heading.
std::vector<LatticeIndex> tube_seed(const GridSpec& grid, const ReachTube& tube, double dilate);

/// Treat each received tube as a moving obstacle.  `dilate` is eps gamma
/// sigma_bar in the lattice frame.  Returns the newly unsafe states.
std::vector<LatticeIndex> ica(SafeControlMap& map, const ReachGraph& graph, const std::vector<ReachTube>& received,
                              double dilate, const SafetyOptions& opt = {}, SafetyCounters* counters = nullptr);

/// CSV rows x1,x2,heading_index,safe for the requested heading coordinates
/// (all when empty).  Requires a 3-D lattice.
void write_safe_set_csv(std::ostream& os, const GridSpec& grid, const SafeControlMap& map,
                        const std::vector<int>& heading_coords = {}, bool header = true);

/// Lattice heading coordinate closest to an angle (radians, physical).
int heading_coord(const GridSpec& grid, double theta);

}  // namespace dslap
