#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dslap/dynamics.hpp"

namespace dslap {

enum class WindSpectrum { VonKarman, Gaussian };

struct WindSpec {
  std::uint64_t seed = 1;
  double r_w = 0.2;          // mean speed as a fraction of v
  double std_ratio = 0.02;   // standard deviation as a fraction of v
  double v = 0.5;            // robot speed the ratios refer to
  int resolution = 64;       // samples per side of the auxiliary grid
  double correlation_length = 4.0;  // metres
  WindSpectrum spectrum = WindSpectrum::VonKarman;
};

/// Scalar wind speed sampled on a regular grid over the position domain and
/// interpolated with bicubic Catmull-Rom splines.  Outside the domain the
/// query point is clamped to the boundary.
class WindField {
 public:
  WindField() = default;
  WindField(Interval x1, Interval x2, int n1, int n2, std::vector<double> samples, WindSpec spec);

  double operator()(double x1, double x2) const;
  Eigen::Vector2d gradient(double x1, double x2) const;

  /// Rigorous bounds for the interpolant: sup |w| and sup |dw/dx1| + |dw/dx2|.
  double sup_bound() const { return sup_; }
  double lipschitz_bound() const { return lip_; }

  /// Mean and standard deviation over a dense evaluation grid (4x the samples).
  std::pair<double, double> domain_stats() const;

  const WindSpec& spec() const { return spec_; }
  Interval x1_range() const { return x1_; }
  Interval x2_range() const { return x2_; }
  int n1() const { return n1_; }
  int n2() const { return n2_; }
  const std::vector<double>& samples() const { return samples_; }

  /// Field that pushes along `mask` with this wind; position is the first two coordinates.
  DisturbanceField as_disturbance(int n_x, std::vector<int> mask) const;

  void save_csv(std::ostream& os) const;
  static WindField load_csv(std::istream& is);

 private:
  void compute_bounds();
  double sample(int i, int j) const;

  Interval x1_{}, x2_{};
  int n1_ = 0, n2_ = 0;
  double d1_ = 1.0, d2_ = 1.0;
  std::vector<double> samples_;  // row-major, i along x1
  WindSpec spec_;
  double sup_ = 0.0, lip_ = 0.0;
};

/// Seeded Gaussian noise, spectrally shaped, interpolated and then affinely
/// rescaled so the interpolated field has mean r_w*v and std std_ratio*v over
/// the domain.  std_ratio = 0 gives a constant field.
WindField gen_wind_field(const WindSpec& spec, Interval x1, Interval x2);

}  // namespace dslap
