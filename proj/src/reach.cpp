#include "dslap/reach.hpp"

#include <limits>
#include <stdexcept>

namespace dslap {

double dilation(double eps, double h, double ell, double m) { return 2 * h + 2 * eps * h * ell + eps * eps * ell * m; }

double forward_radius(const ReachParams& params, double h, double rate) {
  return params.eps * rate + dilation(params.eps, h, params.ell, params.m) + h;
}

namespace {

double rate_for(const DisturbanceModel& model, const ReachParams& params, const GridSpec& grid, LatticeIndex x,
                std::size_t u) {
  const double phys = params.tight_sigma ? model.uncertainty_at(grid, x, u, params.gamma)
                                         : model.uncertainty(grid, params.gamma);
  return model.normalized(grid, phys);
}

State center_of(const Dynamics& dyn, const GridSpec& grid, double eps, LatticeIndex x, std::size_t u,
                const Eigen::VectorXd& mu) {
  const State z = grid.point(x);
  const State f = dyn.f(grid.to_physical(z), grid.control(u));
  State c(z.size());
  for (int d = 0; d < grid.dims(); ++d) c[d] = z[d] + eps * (f[d] + mu[d]) / grid.bounds().scale_of(d);
  return c;
}

LatticeBox box_around(const GridSpec& grid, const ReachParams& params, const State& c, double r) {
  State inside = c;
  std::vector<int> wrapped;
  for (int d : params.periodic) {
    const Interval& span = grid.bounds().state[static_cast<std::size_t>(d)];
    const double s = grid.bounds().scale_of(d);
    if (c[d] - r < span.lo / s || c[d] + r > span.hi / s) {
      // Clip the other dims around an in-range center, then take the whole dim.
      inside[d] = 0.5 * (grid.lower(d) + (grid.lower(d) + grid.extent(d) - 1)) * grid.step();
      wrapped.push_back(d);
    }
  }
  LatticeBox b = grid.ball_box(inside, r);
  if (b.empty()) return b;
  for (int d : wrapped) {
    b.lo[d] = grid.lower(d);
    b.hi[d] = grid.lower(d) + grid.extent(d) - 1;
  }
  return b;
}

}  // namespace

LatticeBox forward_box(const Dynamics& dyn, const DisturbanceModel& model, const ReachParams& params,
                       const GridSpec& grid, LatticeIndex x, std::size_t u) {
  Eigen::MatrixXd block;
  const auto lead = static_cast<int>(x / grid.stride(0));
  model.mean_block(grid, lead, u, block);
  const Eigen::VectorXd mu = block.row(x - static_cast<LatticeIndex>(lead * grid.stride(0))).transpose();
  const State c = center_of(dyn, grid, params.eps, x, u, mu);
  const double r = forward_radius(params, grid.step(), rate_for(model, params, grid, x, u));
  return box_around(grid, params, c, r);
}

std::vector<LatticeIndex> forward_set(const Dynamics& dyn, const DisturbanceModel& model, const ReachParams& params,
                                      const GridSpec& grid, LatticeIndex x, std::size_t u) {
  std::vector<LatticeIndex> out;
  grid.for_each_in(forward_box(dyn, model, params, grid, x, u), [&](LatticeIndex y) { out.push_back(y); });
  return out;
}

ReachGraph::ReachGraph(const GridSpec& grid, std::size_t num_controls)
    : grid_(&grid), nu_(num_controls), dims_(grid.dims()), expanded_(grid.size(), 0) {
  const std::size_t n = grid.size() * nu_ * static_cast<std::size_t>(dims_);
  lo_.assign(n, 0);
  hi_.assign(n, -1);
  for (int d = 0; d < dims_; ++d)
    if (grid.lower(d) < std::numeric_limits<std::int16_t>::min() + 2 ||
        grid.lower(d) + grid.extent(d) > std::numeric_limits<std::int16_t>::max() - 2)
      throw std::length_error("reach graph: lattice coordinates exceed 16-bit storage");
}

std::size_t ReachGraph::num_expanded() const {
  std::size_t n = 0;
  for (auto e : expanded_) n += e;
  return n;
}

LatticeBox ReachGraph::box(LatticeIndex x, std::size_t u) const {
  LatticeBox b;
  b.dims = dims_;
  const std::size_t base = (static_cast<std::size_t>(x) * nu_ + u) * static_cast<std::size_t>(dims_);
  for (int d = 0; d < dims_; ++d) {
    b.lo[d] = lo_[base + d];
    b.hi[d] = hi_[base + d];
  }
  return b;
}

void ReachGraph::set_box(LatticeIndex x, std::size_t u, const LatticeBox& b) {
  const std::size_t base = (static_cast<std::size_t>(x) * nu_ + u) * static_cast<std::size_t>(dims_);
  const bool empty = b.empty();
  for (int d = 0; d < dims_; ++d) {
    lo_[base + d] = static_cast<std::int16_t>(empty ? 1 : b.lo[d]);
    hi_[base + d] = static_cast<std::int16_t>(empty ? 0 : b.hi[d]);
  }
}

std::int64_t ReachGraph::num_edges() const {
  std::int64_t n = 0;
  for (std::size_t x = 0; x < expanded_.size(); ++x) {
    if (!expanded_[x]) continue;
    for (std::size_t u = 0; u < nu_; ++u) n += box(static_cast<LatticeIndex>(x), u).count();
  }
  return n;
}

BackwardAdjacency ReachGraph::backward(std::int64_t max_edges) const {
  const std::int64_t edges = num_edges();
  if (edges > max_edges) throw std::length_error("reach graph: backward relation exceeds the edge budget");
  BackwardAdjacency br;
  br.num_controls = nu_;
  br.offsets.assign(expanded_.size() * nu_ + 1, 0);
  const auto nx = static_cast<LatticeIndex>(expanded_.size());
  for (LatticeIndex x = 0; x < nx; ++x) {
    if (!expanded(x)) continue;
    for (std::size_t u = 0; u < nu_; ++u)
      grid_->for_each_in(box(x, u), [&](LatticeIndex y) { ++br.offsets[static_cast<std::size_t>(y) * nu_ + u + 1]; });
  }
  for (std::size_t k = 1; k < br.offsets.size(); ++k) br.offsets[k] += br.offsets[k - 1];
  br.sources.resize(static_cast<std::size_t>(edges));
  std::vector<std::int64_t> fill(br.offsets.begin(), br.offsets.end() - 1);
  // Sources are appended in increasing x, so every list comes out sorted.
  for (LatticeIndex x = 0; x < nx; ++x) {
    if (!expanded(x)) continue;
    for (std::size_t u = 0; u < nu_; ++u)
      grid_->for_each_in(box(x, u), [&](LatticeIndex y) {
        br.sources[static_cast<std::size_t>(fill[static_cast<std::size_t>(y) * nu_ + u]++)] = x;
      });
  }
  return br;
}

ReachGraph build_reach_graph(const Dynamics& dyn, const DisturbanceModel& model, const ReachParams& params,
                             const GridSpec& grid, const std::vector<std::uint8_t>& skip,
                             const MeanObserver& observer) {
  if (!skip.empty() && skip.size() != grid.size()) throw std::invalid_argument("reach graph: skip mask size");
  const std::size_t nu = grid.num_controls();
  ReachGraph g(grid, nu);
  const double h = grid.step();
  const double shared = forward_radius(params, h, rate_for(model, params, grid, 0, 0));
  g.radius = shared;
  const auto rows = grid.stride(0);
  Eigen::MatrixXd block;
  for (int lead = 0; lead < grid.extent(0); ++lead) {
    const LatticeIndex first = static_cast<LatticeIndex>(lead * rows);
    bool any = false;
    for (Eigen::Index r = 0; r < rows && !any; ++r) any = skip.empty() || !skip[first + r];
    if (!any) continue;
    for (std::size_t u = 0; u < nu; ++u) {
      model.mean_block(grid, lead, u, block);
      if (observer) observer(lead, u, block);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const LatticeIndex x = first + static_cast<LatticeIndex>(r);
        if (!skip.empty() && skip[static_cast<std::size_t>(x)]) continue;
        const State c = center_of(dyn, grid, params.eps, x, u, block.row(r).transpose());
        const double R = params.tight_sigma ? forward_radius(params, h, rate_for(model, params, grid, x, u)) : shared;
        g.set_box(x, u, box_around(grid, params, c, R));
        g.mark_expanded(x);
      }
    }
  }
  return g;
}

}  // namespace dslap
