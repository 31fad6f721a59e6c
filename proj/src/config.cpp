#include "dslap/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dslap {

using nlohmann::json;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Dslap: return "dslap";
    case Variant::Vanilla: return "vanilla";
    case Variant::Robust: return "robust";
    case Variant::Known: return "known";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "dslap") return Variant::Dslap;
  if (s == "vanilla") return Variant::Vanilla;
  if (s == "robust") return Variant::Robust;
  if (s == "known") return Variant::Known;
  throw std::invalid_argument("unknown variant: " + s);
}

std::string to_string(Formation f) {
  switch (f) {
    case Formation::OpposingPairs: return "opposing_pairs";
    case Formation::RingSwap: return "ring_swap";
    case Formation::Cross: return "cross";
  }
  return "?";
}

Formation formation_from_string(const std::string& s) {
  if (s == "opposing_pairs") return Formation::OpposingPairs;
  if (s == "ring_swap") return Formation::RingSwap;
  if (s == "cross") return Formation::Cross;
  throw std::invalid_argument("unknown formation: " + s);
}

namespace {

RobotSpec robot_towards(double sx, double sy, double gx, double gy, double goal_radius) {
  RobotSpec r;
  r.start = State(3);
  r.start << sx, sy, std::atan2(gy - sy, gx - sx);
  r.goal = State(2);
  r.goal << gx, gy;
  r.goal_radius = goal_radius;
  return r;
}

}  // namespace

std::vector<RobotSpec> make_formation(Formation f, int n, Interval x1, Interval x2, double goal_radius) {
  if (n < 0) throw std::invalid_argument("formation: negative robot count");
  const double c1 = 0.5 * (x1.lo + x1.hi), c2 = 0.5 * (x2.lo + x2.hi);
  const double w = std::min(x1.hi - x1.lo, x2.hi - x2.lo);
  const double R = 0.35 * w;
  std::vector<RobotSpec> out;
  switch (f) {
    case Formation::RingSwap:
      // Evenly spaced on a circle, each heading for the antipode.
      for (int i = 0; i < n; ++i) {
        const double a = std::numbers::pi + 2.0 * std::numbers::pi * i / n;
        out.push_back(robot_towards(c1 + R * std::cos(a), c2 + R * std::sin(a), c1 - R * std::cos(a),
                                    c2 - R * std::sin(a), goal_radius));
      }
      break;
    case Formation::OpposingPairs: {
      // Head-on pairs sharing a horizontal lane.
      const int lanes = (n + 1) / 2;
      const double gap = 0.25 * w;
      for (int i = 0; i < n; ++i) {
        const int lane = i / 2;
        const double y = c2 + (lane - 0.5 * (lanes - 1)) * gap;
        if (i % 2 == 0)
          out.push_back(robot_towards(c1 - R, y, c1 + R, y, goal_radius));
        else
          out.push_back(robot_towards(c1 + R, y, c1 - R, y, goal_radius));
      }
      break;
    }
    case Formation::Cross: {
      // Robots enter from the four sides in turn and cross to the opposite side.
      for (int i = 0; i < n; ++i) {
        const double off = (i / 4) * 0.15 * w;
        switch (i % 4) {
          case 0: out.push_back(robot_towards(c1 - R, c2 + off, c1 + R, c2 + off, goal_radius)); break;
          case 1: out.push_back(robot_towards(c1 + off, c2 - R, c1 + off, c2 + R, goal_radius)); break;
          case 2: out.push_back(robot_towards(c1 + R, c2 - off, c1 - R, c2 - off, goal_radius)); break;
          default: out.push_back(robot_towards(c1 - off, c2 + R, c1 - off, c2 - R, goal_radius)); break;
        }
      }
      break;
    }
  }
  return out;
}

Bounds SimConfig::bounds() const {
  Bounds b;
  b.state = {x1, x2, heading};
  b.n_q = 2;
  b.scale = scale;
  for (double u : controls) {
    Control c(1);
    c << u;
    b.control_values.push_back(c);
  }
  return b;
}

std::vector<int> SimConfig::disturbed_coords() const {
  return wind_mask == WindMask::Surge ? std::vector<int>{0} : std::vector<int>{2};
}

void SimConfig::validate() const {
  bounds().validate();
  if (!(xi > 0.0)) throw std::invalid_argument("config: xi must be positive");
  if (n_bar < 1) throw std::invalid_argument("config: n_bar must be >= 1");
  if (k_tilde < 0) throw std::invalid_argument("config: k_tilde must be >= 0");
  if (p_init < 1 || p_max < p_init) throw std::invalid_argument("config: need 1 <= p_init <= p_max");
  if (!(noise.delta > 0.0) || noise.tau_bar < 0 || noise.sigma_e < 0.0)
    throw std::invalid_argument("config: bad noise model");
  if (noise.delta * noise.tau_bar > xi + 1e-12)
    throw std::invalid_argument("config: sampling window delta*tau_bar exceeds xi");
  if (!(gamma > 0.0)) throw std::invalid_argument("config: gamma must be positive");
  if (!(kernel.a > 0.0) || !(kernel.lambda > 0.0)) throw std::invalid_argument("config: bad kernel");
  if (gp_max_batches < 1) throw std::invalid_argument("config: gp_max_batches must be >= 1");
  if (mpc.horizon < 1) throw std::invalid_argument("config: horizon must be >= 1");
  if (zeta < 0.0) throw std::invalid_argument("config: zeta must be >= 0");
  if (robots.empty()) throw std::invalid_argument("config: no robots");
  for (double u : controls)
    if (!(std::abs(u) < std::numbers::pi / 2)) throw std::invalid_argument("config: |u| must be below pi/2");
  for (const auto& box : obstacles.boxes)
    if (box.size() != 2 || box[0].lo > box[0].hi || box[1].lo > box[1].hi)
      throw std::invalid_argument("config: obstacles are 2-D boxes with lo <= hi");
  for (std::size_t i = 0; i < robots.size(); ++i) {
    const RobotSpec& r = robots[i];
    if (r.start.size() != 3 || r.goal.size() != 2) throw std::invalid_argument("config: robot start is (x1,x2,heading), goal is (x1,x2)");
    if (!(r.goal_radius > 0.0)) throw std::invalid_argument("config: goal radius must be positive");
    // Goal region must avoid the obstacles.
    for (const auto& box : obstacles.boxes) {
      const bool overlap = r.goal[0] + r.goal_radius >= box[0].lo && r.goal[0] - r.goal_radius <= box[0].hi &&
                           r.goal[1] + r.goal_radius >= box[1].lo && r.goal[1] - r.goal_radius <= box[1].hi;
      if (overlap) throw std::invalid_argument("config: goal of robot " + std::to_string(i) + " meets an obstacle");
    }
  }
  if (!priority.empty()) {
    std::vector<int> seen(robots.size(), 0);
    if (priority.size() != robots.size()) throw std::invalid_argument("config: priority must list every robot");
    for (int p : priority) {
      if (p < 0 || p >= static_cast<int>(robots.size()) || seen[p]++) throw std::invalid_argument("config: priority is not a permutation");
    }
  }
}

namespace {

Interval interval_of(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("config: intervals are [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json interval_json(Interval iv) { return json::array({iv.lo, iv.hi}); }

State vec_of(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> vec_json(const State& x) { return {x.data(), x.data() + x.size()}; }

}  // namespace

SimConfig config_from_json(const std::string& text) {
  const json j = json::parse(text);
  SimConfig c;
  if (j.contains("domain")) {
    const json& d = j["domain"];
    if (d.contains("x1")) c.x1 = interval_of(d["x1"]);
    if (d.contains("x2")) c.x2 = interval_of(d["x2"]);
    if (d.contains("heading")) c.heading = interval_of(d["heading"]);
  }
  c.scale = j.value("scale", c.scale);
  if (j.contains("controls")) c.controls = j["controls"].get<std::vector<double>>();
  if (j.contains("controls_pi")) {
    c.controls.clear();
    for (double u : j["controls_pi"].get<std::vector<double>>()) c.controls.push_back(u * std::numbers::pi);
  }
  if (j.contains("boat")) {
    const json& b = j["boat"];
    c.boat.c = b.value("c", c.boat.c);
    c.boat.v = b.value("v", c.boat.v);
    c.boat.L = b.value("L", c.boat.L);
  }
  c.zeta = j.value("zeta", c.zeta);
  c.priority = j.value("priority", c.priority);
  if (j.contains("obstacles"))
    for (const json& o : j["obstacles"]) c.obstacles.boxes.push_back({interval_of(o[0]), interval_of(o[1])});

  const double goal_radius = j.value("goal_radius", 1.0);
  if (j.contains("robots")) {
    for (const json& r : j["robots"]) {
      RobotSpec s;
      s.start = vec_of(r.at("start"));
      s.goal = vec_of(r.at("goal"));
      s.goal_radius = r.value("goal_radius", goal_radius);
      c.robots.push_back(std::move(s));
    }
  } else {
    const json f = j.value("formation", json::object());
    c.robots = make_formation(formation_from_string(f.value("kind", "ring_swap")), f.value("n", 2), c.x1, c.x2,
                              goal_radius);
  }

  c.xi = j.value("xi", c.xi);
  c.n_bar = j.value("n_bar", c.n_bar);
  c.k_tilde = j.value("k_tilde", c.k_tilde);
  c.p_init = j.value("p_init", c.p_init);
  c.p_max = j.value("p_max", c.p_max);
  if (j.contains("noise")) {
    const json& n = j["noise"];
    c.noise.sigma_e = n.value("sigma_e", c.noise.sigma_e);
    c.noise.delta = n.value("delta", c.noise.delta);
    c.noise.tau_bar = n.value("tau_bar", c.noise.tau_bar);
  }
  c.gamma = j.value("gamma", c.gamma);
  if (j.contains("kernel")) {
    c.kernel.a = j["kernel"].value("a", c.kernel.a);
    c.kernel.lambda = j["kernel"].value("lambda", c.kernel.lambda);
  }
  c.gp_max_batches = j.value("gp_max_batches", c.gp_max_batches);
  if (j.contains("mpc")) {
    c.mpc.horizon = j["mpc"].value("horizon", c.mpc.horizon);
    c.mpc.psi = j["mpc"].value("psi", c.mpc.psi);
    c.mpc.adversarial = j["mpc"].value("adversarial", c.mpc.adversarial);
    const std::string tb = j["mpc"].value("tie_break", std::string("lexicographic"));
    if (tb != "lexicographic" && tb != "nominal") throw std::invalid_argument("config: mpc.tie_break is lexicographic or nominal");
    c.mpc.nominal_tiebreak = tb == "nominal";
  }
  c.variant = variant_from_string(j.value("variant", to_string(c.variant)));
  c.robust_r_hat = j.value("robust_r_hat", c.robust_r_hat);
  c.tight_sigma = j.value("tight_sigma", c.tight_sigma);
  const std::string engine = j.value("engine", "auto");
  if (engine == "auto") c.engine = UnsafeEngine::Auto;
  else if (engine == "worklist") c.engine = UnsafeEngine::Worklist;
  else if (engine == "sweep") c.engine = UnsafeEngine::Sweep;
  else throw std::invalid_argument("config: unknown engine " + engine);

  if (j.contains("wind")) {
    const json& w = j["wind"];
    c.wind.seed = w.value("seed", c.wind.seed);
    c.wind.r_w = w.value("r_w", c.wind.r_w);
    c.wind.std_ratio = w.value("std_ratio", c.wind.std_ratio);
    c.wind.resolution = w.value("resolution", c.wind.resolution);
    c.wind.correlation_length = w.value("correlation_length", c.wind.correlation_length);
    const std::string sp = w.value("spectrum", "von_karman");
    if (sp == "von_karman") c.wind.spectrum = WindSpectrum::VonKarman;
    else if (sp == "gaussian") c.wind.spectrum = WindSpectrum::Gaussian;
    else throw std::invalid_argument("config: unknown spectrum " + sp);
    const std::string mask = w.value("mask", "paper-sim");
    if (mask == "paper-sim") c.wind_mask = WindMask::Surge;
    else if (mask == "assumption-4") c.wind_mask = WindMask::Heading;
    else throw std::invalid_argument("config: unknown wind mask " + mask);
  }
  c.wind.v = c.boat.v;
  c.seed = j.value("seed", c.seed);
  c.timing = j.value("timing", c.timing);
  c.validate();
  return c;
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const SimConfig& c) {
  json j;
  j["domain"] = {{"x1", interval_json(c.x1)}, {"x2", interval_json(c.x2)}, {"heading", interval_json(c.heading)}};
  j["scale"] = c.scale;
  j["controls"] = c.controls;
  j["boat"] = {{"c", c.boat.c}, {"v", c.boat.v}, {"L", c.boat.L}};
  j["zeta"] = c.zeta;
  if (!c.priority.empty()) j["priority"] = c.priority;
  j["obstacles"] = json::array();
  for (const auto& b : c.obstacles.boxes) j["obstacles"].push_back({interval_json(b[0]), interval_json(b[1])});
  j["robots"] = json::array();
  for (const auto& r : c.robots)
    j["robots"].push_back({{"start", vec_json(r.start)}, {"goal", vec_json(r.goal)}, {"goal_radius", r.goal_radius}});
  j["xi"] = c.xi;
  j["n_bar"] = c.n_bar;
  j["k_tilde"] = c.k_tilde;
  j["p_init"] = c.p_init;
  j["p_max"] = c.p_max;
  j["noise"] = {{"sigma_e", c.noise.sigma_e}, {"delta", c.noise.delta}, {"tau_bar", c.noise.tau_bar}};
  j["gamma"] = c.gamma;
  j["kernel"] = {{"a", c.kernel.a}, {"lambda", c.kernel.lambda}};
  j["gp_max_batches"] = c.gp_max_batches;
  j["mpc"] = {{"horizon", c.mpc.horizon}, {"psi", c.mpc.psi}, {"adversarial", c.mpc.adversarial},
              {"tie_break", c.mpc.nominal_tiebreak ? "nominal" : "lexicographic"}};
  j["variant"] = to_string(c.variant);
  j["robust_r_hat"] = c.robust_r_hat;
  j["tight_sigma"] = c.tight_sigma;
  j["engine"] = c.engine == UnsafeEngine::Auto ? "auto" : c.engine == UnsafeEngine::Worklist ? "worklist" : "sweep";
  j["wind"] = {{"seed", c.wind.seed},
               {"r_w", c.wind.r_w},
               {"std_ratio", c.wind.std_ratio},
               {"resolution", c.wind.resolution},
               {"correlation_length", c.wind.correlation_length},
               {"spectrum", c.wind.spectrum == WindSpectrum::VonKarman ? "von_karman" : "gaussian"},
               {"mask", c.wind_mask == WindMask::Surge ? "paper-sim" : "assumption-4"}};
  j["seed"] = c.seed;
  j["timing"] = c.timing;
  return j.dump(2);
}

}  // namespace dslap
