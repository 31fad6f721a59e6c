#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dslap/dynamics.hpp"
#include "dslap/gpr.hpp"
#include "dslap/grid.hpp"

namespace dslap {

/// What a planner believes about g: a mean on the lattice and an uncertainty
/// radius for the forward sets.  Coordinates listed in `outputs` carry the
/// estimate, the rest are treated as exactly zero.
class DisturbanceModel {
 public:
  virtual ~DisturbanceModel() = default;

  /// Mean of g (physical units) for the block of states whose first lattice
  /// coordinate is lower(0) + lead, under control u.  `out` is resized to
  /// stride(0) rows by n_x columns, rows in linear-index order.
  virtual void mean_block(const GridSpec& grid, int lead, std::size_t u, Eigen::MatrixXd& out) const = 0;

  /// Pointwise predictive standard deviation at a lattice pair (physical units).
  virtual double sigma(const GridSpec& grid, LatticeIndex x, std::size_t u) const = 0;

  /// sigma for many pairs at once; the default loops over sigma().
  virtual void sigma_batch(const GridSpec& grid, const std::vector<std::pair<LatticeIndex, std::size_t>>& pairs,
                           std::vector<double>& out) const;

  /// True when sigma() is identically zero (no exploration signal).
  virtual bool exact() const { return true; }

  /// Global uncertainty rate in physical units: gamma * sup sigma for a GP,
  /// the assumed bound for the robust model, 0 for exact models.
  virtual double uncertainty(const GridSpec& grid, double gamma) const = 0;

  /// Pointwise version of uncertainty(), for the tight-sigma ablation.
  virtual double uncertainty_at(const GridSpec& grid, LatticeIndex x, std::size_t u, double gamma) const {
    (void)x;
    (void)u;
    return uncertainty(grid, gamma);
  }

  virtual std::string name() const = 0;

  const std::vector<int>& outputs() const { return outputs_; }
  /// Converts a physical uncertainty rate into the lattice frame (worst
  /// coordinate, since the forward set is an inf-norm ball).
  double normalized(const GridSpec& grid, double physical) const;

 protected:
  std::vector<int> outputs_;
};

class ZeroModel final : public DisturbanceModel {
 public:
  explicit ZeroModel(std::vector<int> outputs = {}) { outputs_ = std::move(outputs); }
  void mean_block(const GridSpec& grid, int lead, std::size_t u, Eigen::MatrixXd& out) const override;
  double sigma(const GridSpec&, LatticeIndex, std::size_t) const override { return 0.0; }
  double uncertainty(const GridSpec&, double) const override { return 0.0; }
  std::string name() const override { return "zero"; }
};

/// Mean zero, ball of radius r_hat (absolute, physical units) around f.
class RobustModel final : public DisturbanceModel {
 public:
  RobustModel(std::vector<int> outputs, double bound) : bound_(bound) { outputs_ = std::move(outputs); }
  void mean_block(const GridSpec& grid, int lead, std::size_t u, Eigen::MatrixXd& out) const override;
  double sigma(const GridSpec&, LatticeIndex, std::size_t) const override { return 0.0; }
  double uncertainty(const GridSpec&, double) const override { return bound_; }
  std::string name() const override { return "robust"; }

 private:
  double bound_;
};

/// The true field, no uncertainty.
class KnownModel final : public DisturbanceModel {
 public:
  explicit KnownModel(DisturbanceField truth) : truth_(std::move(truth)) { outputs_ = truth_.mask; }
  void mean_block(const GridSpec& grid, int lead, std::size_t u, Eigen::MatrixXd& out) const override;
  double sigma(const GridSpec&, LatticeIndex, std::size_t) const override { return 0.0; }
  double uncertainty(const GridSpec&, double) const override { return 0.0; }
  std::string name() const override { return "known"; }

 private:
  DisturbanceField truth_;
};

/// GP posterior; column o of the posterior estimates coordinate outputs[o].
class GpModel final : public DisturbanceModel {
 public:
  GpModel(std::shared_ptr<const Posterior> post, std::vector<int> outputs);
  void mean_block(const GridSpec& grid, int lead, std::size_t u, Eigen::MatrixXd& out) const override;
  double sigma(const GridSpec& grid, LatticeIndex x, std::size_t u) const override;
  double uncertainty(const GridSpec& grid, double gamma) const override;
  double uncertainty_at(const GridSpec& grid, LatticeIndex x, std::size_t u, double gamma) const override;
  void sigma_batch(const GridSpec& grid, const std::vector<std::pair<LatticeIndex, std::size_t>>& pairs,
                   std::vector<double>& out) const override;
  bool exact() const override { return false; }
  std::string name() const override { return "gp"; }

  const Posterior& posterior() const { return *post_; }
  /// sup sigma on the lattice, memoized per grid level.
  double sigma_bar(const GridSpec& grid) const;

 private:
  std::shared_ptr<const Posterior> post_;
  mutable int cached_level_ = -1;
  mutable double cached_sup_ = 0.0;
};

/// Reference implementation of mean_block by direct evaluation, for tests.
void mean_block_direct(const Posterior& post, const std::vector<int>& outputs, const GridSpec& grid, int lead,
                       std::size_t u, Eigen::MatrixXd& out);

}  // namespace dslap
