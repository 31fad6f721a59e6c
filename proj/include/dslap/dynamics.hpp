#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "dslap/grid.hpp"

namespace dslap {

class Dynamics {
 public:
  virtual ~Dynamics() = default;
  virtual int n_x() const = 0;
  virtual State f(const State& x, const Control& u) const = 0;
};

// Zermelo-style boat: constant translational rate c along the heading, turn
// rate (v/L) tan u.  c and v are kept separate on purpose (the printed model
// uses c = 2 while quoting v = 0.5 m/s as the boat speed).
struct BoatModel final : Dynamics {
  double c = 2.0;
  double v = 0.5;
  double L = 1.5;

  int n_x() const override { return 3; }
  State f(const State& x, const Control& u) const override;
  double turn_rate(double u) const;
};

/// Ground-truth disturbance g(x, u): a scalar field evaluated on the state,
/// injected into the coordinates listed in `mask`.
struct DisturbanceField {
  int n_x = 0;
  std::vector<int> mask;
  std::function<double(const State&)> scalar;  // empty means g == 0
  double sup = 0.0;        // bound on |scalar|
  double lipschitz = 0.0;  // bound on sum_j |d scalar / d x_j| (physical units)

  State operator()(const State& x, const Control& u) const;
  double value(const State& x) const { return scalar ? scalar(x) : 0.0; }

  static DisturbanceField zero(int n_x);
  static DisturbanceField constant(int n_x, std::vector<int> mask, double value);
};

struct NoiseModel {
  double sigma_e = 0.01;
  double delta = 0.1;
  int tau_bar = 20;
};

struct IntegrateOptions {
  double max_step = 0.1;
  std::vector<int> wrap_dims;           // wrapped into [-pi, pi] after each step
  const Bounds* clip = nullptr;         // position dimensions clipped, flagged
  std::function<void(double, const State&)> observer;  // called after every step
};

struct IntegrateResult {
  State x;
  bool left_domain = false;
  int steps = 0;
};

double wrap_angle(double a);

/// RK4 with step duration / ceil(duration / max_step) under a constant control.
IntegrateResult integrate(const Dynamics& dyn, const State& x0, const Control& u, double duration,
                          const DisturbanceField& g, const IntegrateOptions& opt = {});

/// Constants in the lattice frame z = x / scale.  `raw` values are the bounds
/// before the 1.1 inflation.
struct ModelConstants {
  double ell = 0.0;
  double m = 0.0;
  double ell_raw = 0.0;
  double m_raw = 0.0;
};

inline constexpr double kConstantsInflation = 1.1;

/// ell: max row sum of |d(f+g)_i/dz_j| = |d(f+g)_i/dx_j| s_j / s_i, from the
/// analytic boat Jacobian plus the field's Lipschitz bound.  m: max_i sup
/// |f_i + g_i| / s_i with |tan u| bounded by the largest control magnitude.
ModelConstants estimate_constants(const BoatModel& boat, const Bounds& bounds, const DisturbanceField& field);

}  // namespace dslap
