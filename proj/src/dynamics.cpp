#include "dslap/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dslap {

double BoatModel::turn_rate(double u) const {
  if (!(std::abs(u) < std::numbers::pi / 2)) throw std::invalid_argument("boat: |u| must be below pi/2");
  return (v / L) * std::tan(u);
}

State BoatModel::f(const State& x, const Control& u) const {
  State dx(3);
  dx << c * std::cos(x[2]), c * std::sin(x[2]), turn_rate(u[0]);
  return dx;
}

State DisturbanceField::operator()(const State& x, const Control&) const {
  State g = State::Zero(n_x);
  if (!scalar || mask.empty()) return g;
  const double w = scalar(x);
  for (int i : mask) g[i] = w;
  return g;
}

DisturbanceField DisturbanceField::zero(int n_x) {
  DisturbanceField g;
  g.n_x = n_x;
  return g;
}

DisturbanceField DisturbanceField::constant(int n_x, std::vector<int> mask, double value) {
  DisturbanceField g;
  g.n_x = n_x;
  g.mask = std::move(mask);
  g.scalar = [value](const State&) { return value; };
  g.sup = std::abs(value);
  return g;
}

double wrap_angle(double a) {
  if (a >= -std::numbers::pi && a <= std::numbers::pi) return a;
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a;
}

IntegrateResult integrate(const Dynamics& dyn, const State& x0, const Control& u, double duration,
                          const DisturbanceField& g, const IntegrateOptions& opt) {
  if (duration < 0) throw std::invalid_argument("integrate: negative duration");
  IntegrateResult r{x0, false, 0};
  if (duration == 0.0) return r;
  const int n = static_cast<int>(std::ceil(duration / opt.max_step - 1e-12));
  const double dt = duration / n;
  auto rhs = [&](const State& x) -> State { return dyn.f(x, u) + g(x, u); };
  State& x = r.x;
  for (int s = 0; s < n; ++s) {
    const State k1 = rhs(x);
    const State k2 = rhs(x + 0.5 * dt * k1);
    const State k3 = rhs(x + 0.5 * dt * k2);
    const State k4 = rhs(x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    for (int d : opt.wrap_dims) x[d] = wrap_angle(x[d]);
    if (opt.clip) {
      for (int d = 0; d < opt.clip->n_q; ++d) {
        const Interval iv = opt.clip->state[d];
        if (x[d] < iv.lo || x[d] > iv.hi) {
          x[d] = std::clamp(x[d], iv.lo, iv.hi);
          r.left_domain = true;
        }
      }
    }
    ++r.steps;
    if (opt.observer) opt.observer((s + 1) * dt, x);
  }
  return r;
}

ModelConstants estimate_constants(const BoatModel& boat, const Bounds& bounds, const DisturbanceField& field) {
  if (bounds.n_x() != 3 || bounds.n_q != 2) throw std::invalid_argument("estimate_constants: boat bounds expected");
  double umax = 0.0;
  if (!bounds.control_values.empty()) {
    for (const auto& u : bounds.control_values) umax = std::max(umax, std::abs(u[0]));
  } else {
    umax = std::max(std::abs(bounds.control[0].lo), std::abs(bounds.control[0].hi));
  }
  const double s[3] = {bounds.scale_of(0), bounds.scale_of(1), bounds.scale_of(2)};
  bool hit[3] = {false, false, false};
  for (int i : field.mask) hit[i] = true;

  // The wind depends on position only; its gradient row is (gx, gy, 0) and we
  // only know |gx| + |gy| <= lipschitz.  Both position scales are equal in all
  // presets, but take the larger to stay conservative otherwise.
  const double sq = std::max(s[0], s[1]);
  double row[3];
  row[0] = boat.c * s[2] / s[0];
  row[1] = boat.c * s[2] / s[1];
  row[2] = 0.0;
  double sup[3] = {boat.c / s[0], boat.c / s[1], boat.turn_rate(umax) / s[2]};
  for (int i = 0; i < 3; ++i) {
    if (!hit[i]) continue;
    row[i] += field.lipschitz * sq / s[i];
    sup[i] += field.sup / s[i];
  }
  ModelConstants k;
  k.ell_raw = std::max({row[0], row[1], row[2]});
  k.m_raw = std::max({sup[0], sup[1], sup[2]});
  k.ell = kConstantsInflation * k.ell_raw;
  k.m = kConstantsInflation * k.m_raw;
  return k;
}

}  // namespace dslap
