#include "dslap/disturbance.hpp"

#include <algorithm>
#include <stdexcept>

namespace dslap {

double DisturbanceModel::normalized(const GridSpec& grid, double physical) const {
  if (physical == 0.0) return 0.0;
  double s = std::numeric_limits<double>::infinity();
  for (int i : outputs_) s = std::min(s, grid.bounds().scale_of(i));
  if (outputs_.empty()) {
    for (int i = 0; i < grid.dims(); ++i) s = std::min(s, grid.bounds().scale_of(i));
  }
  return physical / s;
}

void DisturbanceModel::sigma_batch(const GridSpec& grid,
                                   const std::vector<std::pair<LatticeIndex, std::size_t>>& pairs,
                                   std::vector<double>& out) const {
  out.resize(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) out[i] = sigma(grid, pairs[i].first, pairs[i].second);
}

void ZeroModel::mean_block(const GridSpec& grid, int, std::size_t, Eigen::MatrixXd& out) const {
  out.setZero(grid.stride(0), grid.dims());
}

void RobustModel::mean_block(const GridSpec& grid, int, std::size_t, Eigen::MatrixXd& out) const {
  out.setZero(grid.stride(0), grid.dims());
}

void KnownModel::mean_block(const GridSpec& grid, int lead, std::size_t u, Eigen::MatrixXd& out) const {
  const auto rows = grid.stride(0);
  out.setZero(rows, grid.dims());
  const LatticeIndex first = static_cast<LatticeIndex>(lead * rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const LatticeIndex x = first + static_cast<LatticeIndex>(r);
    out.row(r) = truth_(grid.physical_point(x), grid.control(u)).transpose();
  }
}

GpModel::GpModel(std::shared_ptr<const Posterior> post, std::vector<int> outputs) : post_(std::move(post)) {
  outputs_ = std::move(outputs);
  if (static_cast<int>(outputs_.size()) != post_->output_dim())
    throw std::invalid_argument("gp model: output list does not match posterior");
}

void mean_block_direct(const Posterior& post, const std::vector<int>& outputs, const GridSpec& grid, int lead,
                       std::size_t u, Eigen::MatrixXd& out) {
  const auto rows = grid.stride(0);
  out.setZero(rows, grid.dims());
  const LatticeIndex first = static_cast<LatticeIndex>(lead * rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd mu = post.mean(lattice_input(grid, first + static_cast<LatticeIndex>(r), u));
    for (std::size_t o = 0; o < outputs.size(); ++o) out(r, outputs[o]) = mu[static_cast<Eigen::Index>(o)];
  }
}

void GpModel::mean_block(const GridSpec& grid, int lead, std::size_t u, Eigen::MatrixXd& out) const {
  const Posterior& post = *post_;
  const int n = grid.dims();
  const auto rows = grid.stride(0);
  if (post.size() == 0) {
    out.setZero(rows, n);
    return;
  }
  if (n < 3) {
    mean_block_direct(post, outputs_, grid, lead, u, out);
    return;
  }
  // The RBF kernel factorizes over input coordinates, so on a lattice block the
  // mean is a sum over data points of products of 1-D factors.  Fix every
  // coordinate except the last two and contract those with one GEMM.
  const Eigen::MatrixXd& Z = post.data().Z;
  const Eigen::MatrixXd& A = post.weights();
  const Eigen::Index N = Z.rows();
  const double inv = -1.0 / (2.0 * post.kernel().lambda * post.kernel().lambda);
  const double h = grid.step();
  auto factor = [&](int d, int coord) {
    const double x = coord * h * grid.bounds().scale_of(d);
    return ((Z.col(d).array() - x).square() * inv).exp();
  };
  Eigen::ArrayXd base = Eigen::ArrayXd::Constant(N, post.kernel().a) * factor(0, grid.lower(0) + lead);
  const Control& uc = grid.control(u);
  for (Eigen::Index c = 0; c < uc.size(); ++c)
    base *= ((Z.col(n + c).array() - uc[c]).square() * inv).exp();

  const int da = n - 2, db = n - 1;
  Eigen::MatrixXd Fa(grid.extent(da), N), Fb(grid.extent(db), N);
  for (int i = 0; i < grid.extent(da); ++i) Fa.row(i) = factor(da, grid.lower(da) + i).transpose();
  for (int i = 0; i < grid.extent(db); ++i) Fb.row(i) = factor(db, grid.lower(db) + i).transpose();

  out.setZero(rows, n);
  const Eigen::Index plane = static_cast<Eigen::Index>(grid.extent(da)) * grid.extent(db);
  const Eigen::Index planes = rows / plane;
  const int outs = static_cast<int>(outputs_.size());
  Eigen::MatrixXd G(grid.extent(da) * outs, N);
  for (Eigen::Index pl = 0; pl < planes; ++pl) {
    Eigen::ArrayXd w = base;
    // Middle coordinates (only present for four or more state dimensions).
    Eigen::Index rem = pl;
    for (int d = da - 1; d >= 1; --d) {
      const int c = static_cast<int>(rem % grid.extent(d));
      rem /= grid.extent(d);
      w *= factor(d, grid.lower(d) + c);
    }
    for (int o = 0; o < outs; ++o)
      G.middleRows(o * grid.extent(da), grid.extent(da)) = Fa * (w * A.col(o).array()).matrix().asDiagonal();
    const Eigen::MatrixXd P = G * Fb.transpose();
    for (int o = 0; o < outs; ++o)
      for (int i = 0; i < grid.extent(da); ++i)
        out.col(outputs_[o]).segment(pl * plane + static_cast<Eigen::Index>(i) * grid.extent(db), grid.extent(db)) =
            P.row(o * grid.extent(da) + i).transpose();
  }
}

double GpModel::sigma(const GridSpec& grid, LatticeIndex x, std::size_t u) const {
  return post_->stddev(lattice_input(grid, x, u));
}

void GpModel::sigma_batch(const GridSpec& grid, const std::vector<std::pair<LatticeIndex, std::size_t>>& pairs,
                          std::vector<double>& out) const {
  out.resize(pairs.size());
  constexpr std::size_t kChunk = 2048;
  for (std::size_t s = 0; s < pairs.size(); s += kChunk) {
    const std::size_t e = std::min(pairs.size(), s + kChunk);
    Eigen::MatrixXd Zq(static_cast<Eigen::Index>(e - s), post_->input_dim());
    for (std::size_t i = s; i < e; ++i)
      Zq.row(static_cast<Eigen::Index>(i - s)) = lattice_input(grid, pairs[i].first, pairs[i].second).transpose();
    const Eigen::VectorXd v = post_->variance_batch(Zq);
    for (std::size_t i = s; i < e; ++i) out[i] = std::sqrt(v[static_cast<Eigen::Index>(i - s)]);
  }
}

double GpModel::sigma_bar(const GridSpec& grid) const {
  if (cached_level_ != grid.level()) {
    cached_sup_ = sup_sigma(*post_, grid);
    cached_level_ = grid.level();
  }
  return cached_sup_;
}

double GpModel::uncertainty(const GridSpec& grid, double gamma) const { return gamma * sigma_bar(grid); }

double GpModel::uncertainty_at(const GridSpec& grid, LatticeIndex x, std::size_t u, double gamma) const {
  return gamma * sigma(grid, x, u);
}

}  // namespace dslap
