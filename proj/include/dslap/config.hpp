#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dslap/dynamics.hpp"
#include "dslap/grid.hpp"
#include "dslap/mpc.hpp"
#include "dslap/safety.hpp"
#include "dslap/wind.hpp"

namespace dslap {

enum class Variant { Dslap, Vanilla, Robust, Known };
std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

enum class WindMask { Surge, Heading };

struct RobotSpec {
  State start;       // x1, x2, heading
  State goal;        // x1, x2
  double goal_radius = 1.0;
};

/// Named start/goal layouts inside a square domain.
enum class Formation { OpposingPairs, RingSwap, Cross };
std::string to_string(Formation f);
Formation formation_from_string(const std::string& s);
std::vector<RobotSpec> make_formation(Formation f, int n, Interval x1, Interval x2, double goal_radius);

struct SimConfig {
  // Problem geometry.  Defaults are the published simulation values.
  Interval x1{0.0, 100.0};
  Interval x2{0.0, 100.0};
  Interval heading{-3.141592653589793, 3.141592653589793};
  std::vector<double> scale{1.0, 1.0, 1.0};
  std::vector<double> controls{-0.3 * 3.141592653589793, -0.15 * 3.141592653589793, 0.0,
                               0.15 * 3.141592653589793, 0.3 * 3.141592653589793};
  BoatModel boat;
  std::vector<RobotSpec> robots;
  Obstacles obstacles;
  double zeta = 0.5;
  std::vector<int> priority;  // empty: robot index order

  // Timing and discretization.
  double xi = 8.0;
  int n_bar = 16;
  int k_tilde = 200;
  int p_init = 4;
  int p_max = 5;
  NoiseModel noise{0.01, 0.1, 20};
  double gamma = 1.0;

  // Learning and planning.
  RbfKernel kernel{0.0025, 1.0};
  std::size_t gp_max_batches = 40;
  MpcConfig mpc;  // goal is filled per robot
  Variant variant = Variant::Dslap;
  double robust_r_hat = 0.1;  // fraction of v
  bool tight_sigma = false;
  UnsafeEngine engine = UnsafeEngine::Auto;

  // Ground truth.
  WindSpec wind;
  WindMask wind_mask = WindMask::Surge;

  std::uint64_t seed = 1;
  bool timing = true;

  double eps() const { return xi / n_bar; }
  Bounds bounds() const;
  std::vector<int> disturbed_coords() const;
  void validate() const;
};

SimConfig load_config(const std::string& path);
SimConfig config_from_json(const std::string& text);
std::string config_to_json(const SimConfig& cfg);

}  // namespace dslap
