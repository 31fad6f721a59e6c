#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dslap/disturbance.hpp"
#include "dslap/dynamics.hpp"
#include "dslap/grid.hpp"

namespace dslap {

/// Everything in the lattice frame.  ell and m come from estimate_constants().
struct ReachParams {
  double eps = 1.0;
  double gamma = 1.0;
  double ell = 0.0;
  double m = 0.0;
  bool tight_sigma = false;
  // Lattice dims whose physical coordinate wraps (heading).  A forward ball
  // that crosses the edge of such a dim covers the whole dim, since the
  // wrapped successor lands at the opposite end.
  std::vector<int> periodic;
};

/// 2h + 2 eps h ell + eps^2 ell m.
double dilation(double eps, double h, double ell, double m);

/// Radius of FR(x,u) for a given normalized uncertainty rate:
/// eps * rate + dilation + h.
double forward_radius(const ReachParams& params, double h, double rate);

/// FR(x,u) as a clipped lattice box: center x + eps (f + mu) in the lattice
/// frame, inf-norm radius forward_radius().
LatticeBox forward_box(const Dynamics& dyn, const DisturbanceModel& model, const ReachParams& params,
                       const GridSpec& grid, LatticeIndex x, std::size_t u);
std::vector<LatticeIndex> forward_set(const Dynamics& dyn, const DisturbanceModel& model, const ReachParams& params,
                                      const GridSpec& grid, LatticeIndex x, std::size_t u);

/// Reverse adjacency in CSR form: for pair (y, u) the states x with y in FR(x, u).
struct BackwardAdjacency {
  std::size_t num_controls = 0;
  std::vector<std::int64_t> offsets;  // size |X| * |U| + 1
  std::vector<LatticeIndex> sources;

  std::span<const LatticeIndex> of(LatticeIndex y, std::size_t u) const {
    const std::size_t k = static_cast<std::size_t>(y) * num_controls + u;
    return {sources.data() + offsets[k], static_cast<std::size_t>(offsets[k + 1] - offsets[k])};
  }
};

/// Forward sets of every expanded state, stored as exact integer boxes (an
/// inf-norm ball intersected with a box lattice is a box).
class ReachGraph {
 public:
  ReachGraph() = default;
  ReachGraph(const GridSpec& grid, std::size_t num_controls);

  const GridSpec& grid() const { return *grid_; }
  std::size_t num_states() const { return expanded_.size(); }
  std::size_t num_controls() const { return nu_; }
  bool expanded(LatticeIndex x) const { return expanded_[static_cast<std::size_t>(x)] != 0; }
  std::size_t num_expanded() const;

  LatticeBox box(LatticeIndex x, std::size_t u) const;
  void set_box(LatticeIndex x, std::size_t u, const LatticeBox& b);
  void mark_expanded(LatticeIndex x) { expanded_[static_cast<std::size_t>(x)] = 1; }

  /// Total number of (x, u, y) triples, i.e. the size of the BR relation.
  std::int64_t num_edges() const;
  /// Materialize BR.  Throws std::length_error when the relation exceeds max_edges.
  BackwardAdjacency backward(std::int64_t max_edges = std::int64_t{1} << 28) const;

  double radius = 0.0;  // shared radius when not tight

 private:
  const GridSpec* grid_ = nullptr;
  std::size_t nu_ = 0;
  int dims_ = 0;
  std::vector<std::uint8_t> expanded_;
  std::vector<std::int16_t> lo_, hi_;
};

/// Sees every mean block the builder evaluates (lead, control, block).
using MeanObserver = std::function<void(int, std::size_t, const Eigen::MatrixXd&)>;

/// skip[x] != 0 excludes x from expansion (its forward sets are not built).
/// The grid must outlive the graph.
ReachGraph build_reach_graph(const Dynamics& dyn, const DisturbanceModel& model, const ReachParams& params,
                             const GridSpec& grid, const std::vector<std::uint8_t>& skip,
                             const MeanObserver& observer = {});

}  // namespace dslap
