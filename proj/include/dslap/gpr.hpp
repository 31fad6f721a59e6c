#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dslap/grid.hpp"

namespace dslap {

struct RbfKernel {
  double a = 0.0025;
  double lambda = 1.0;

  template <typename DerivedA, typename DerivedB>
  double operator()(const Eigen::MatrixBase<DerivedA>& z, const Eigen::MatrixBase<DerivedB>& w) const {
    return a * std::exp(-(z - w).squaredNorm() / (2.0 * lambda * lambda));
  }
};

/// Inputs are rows of Z (state followed by control, physical units); outputs
/// are rows of Y, one column per disturbance coordinate.  Batch sizes are kept
/// so the oldest batches can be dropped.
struct Dataset {
  Eigen::MatrixXd Z;
  Eigen::MatrixXd Y;
  std::vector<std::size_t> batches;

  std::size_t size() const { return static_cast<std::size_t>(Z.rows()); }
  bool empty() const { return Z.rows() == 0; }
  void append(const Dataset& other);
  /// Keep only the most recent `max_batches` batches.
  Dataset tail(std::size_t max_batches) const;
};

/// Independent zero-mean GPs, one per output column, sharing kernel, inputs
/// and noise, hence one Cholesky factor and one variance function.
class Posterior {
 public:
  Posterior() = default;

  static Posterior fit(const RbfKernel& kernel, double sigma_e, int inputs, int outputs, Dataset data = {});

  /// Equal to fit() on the concatenated data; appends to the factor when the
  /// current jitter still works, refits otherwise.
  Posterior update(const Dataset& batch) const;
  /// Refit on the most recent `max_batches` batches.
  Posterior thinned(std::size_t max_batches) const;

  Eigen::VectorXd mean(const Eigen::VectorXd& z) const;
  double variance(const Eigen::VectorXd& z) const;
  double stddev(const Eigen::VectorXd& z) const { return std::sqrt(variance(z)); }
  /// Variances for row-stacked queries, one triangular solve for all of them.
  Eigen::VectorXd variance_batch(const Eigen::MatrixXd& Zq) const;
  double prior_stddev() const { return std::sqrt(kernel_.a); }

  const RbfKernel& kernel() const { return kernel_; }
  double sigma_e() const { return sigma_e_; }
  double jitter() const { return jitter_; }
  int input_dim() const { return inputs_; }
  int output_dim() const { return outputs_; }
  const Dataset& data() const { return data_; }
  /// (K + (sigma_e^2 + jitter) I)^{-1} Y, one column per output.
  const Eigen::MatrixXd& weights() const { return alpha_; }
  std::size_t size() const { return data_.size(); }

  std::string to_json() const;
  static Posterior from_json(const std::string& text);

 private:
  void factor_from_scratch();
  void solve_weights();

  RbfKernel kernel_;
  double sigma_e_ = 0.0;
  int inputs_ = 0;
  int outputs_ = 0;
  Dataset data_;
  Eigen::MatrixXd L_;
  Eigen::MatrixXd alpha_;
  double jitter_ = 0.0;
};

inline constexpr double kJitterLadder[] = {1e-10, 1e-8, 1e-6};

/// Gram matrix K(A, B) for row-stacked inputs.
Eigen::MatrixXd gram(const RbfKernel& kernel, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Lattice input z = (physical state of lattice point, control).
Eigen::VectorXd lattice_input(const GridSpec& grid, LatticeIndex x, std::size_t u);

/// max of sigma over X_p x U_p.  Stops early once a point reaches the prior
/// standard deviation, which is the exact supremum of the posterior.
double sup_sigma(const Posterior& post, const GridSpec& grid);

/// Fraction of lattice pairs with |mu_k - g| > gamma * sigma_k in any output.
/// `truth(z)` returns g at input z with one entry per output.
template <typename Truth>
double concentration_violations(const Posterior& post, const Truth& truth, const GridSpec& grid, double gamma) {
  std::size_t bad = 0, total = 0;
  for (LatticeIndex x = 0; x < static_cast<LatticeIndex>(grid.size()); ++x)
    for (std::size_t u = 0; u < grid.num_controls(); ++u) {
      const Eigen::VectorXd z = lattice_input(grid, x, u);
      const Eigen::VectorXd mu = post.mean(z);
      const Eigen::VectorXd g = truth(z);
      const double tube = gamma * post.stddev(z);
      ++total;
      if (((mu - g).cwiseAbs().array() > tube).any()) ++bad;
    }
  return total ? static_cast<double>(bad) / static_cast<double>(total) : 0.0;
}

}  // namespace dslap
