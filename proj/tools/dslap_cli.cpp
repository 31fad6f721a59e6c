#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>

#include <CLI11.hpp>

#include "dslap/config.hpp"
#include "dslap/experiments.hpp"
#include "dslap/sim.hpp"
#include "dslap/wind.hpp"

namespace fs = std::filesystem;
using namespace dslap;

namespace {

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream o(p);
  if (!o) throw std::runtime_error("cannot write " + p.string());
  return o;
}

const std::vector<double> kFig4Headings{0.0, std::numbers::pi / 2, -std::numbers::pi / 2, std::numbers::pi};

std::vector<double> headings_for(const std::string& which, const GridSpec& g) {
  if (which == "fig4") return kFig4Headings;
  if (which != "all") throw std::invalid_argument("--headings is fig4 or all");
  std::vector<double> hs;
  for (int c = 0; c < g.extent(2); ++c) hs.push_back((g.lower(2) + c) * g.step() * g.bounds().scale_of(2));
  return hs;
}

int cmd_run(const std::string& config, const std::string& out, int k_tilde, int snap_k, int snap_robot,
            bool no_timing) {
  SimConfig cfg = load_config(config);
  if (k_tilde >= 0) cfg.k_tilde = k_tilde;
  if (no_timing) cfg.timing = false;
  const World w = make_world(cfg);
  fs::create_directories(out);
  {
    auto o = open_out(fs::path(out) / "config.json");
    o << config_to_json(cfg) << "\n";
  }
  {
    auto o = open_out(fs::path(out) / "wind.csv");
    w.wind.save_csv(o);
  }
  MissionHooks hooks;
  std::vector<std::optional<Posterior>> last(cfg.robots.size());
  hooks.on_plan = [&](int k, int robot, const Plan& plan, const Posterior& post) {
    last[static_cast<std::size_t>(robot)] = post;
    if (k == snap_k && (snap_robot < 0 || robot == snap_robot)) {
      Snapshot s{cfg, robot, k, plan.level, post, plan.tube_sources};
      auto o = open_out(fs::path(out) / ("snapshot_k" + std::to_string(k) + "_r" + std::to_string(robot) + ".json"));
      o << snapshot_to_json(s) << "\n";
    }
  };
  const Trace t = run_mission(w, hooks);
  {
    auto o = open_out(fs::path(out) / "trace.csv");
    t.write_csv(o);
  }
  {
    auto o = open_out(fs::path(out) / "outcomes.csv");
    o << "robot,arrived,collided,left_domain,infeasible_start,infeasible_events,arrival_time,safe_arrival\n";
    for (std::size_t i = 0; i < t.robots.size(); ++i) {
      const RobotOutcome& r = t.robots[i];
      o << i << ',' << r.arrived << ',' << r.collided << ',' << r.left_domain << ',' << r.infeasible_start << ','
        << r.infeasible_events << ',' << r.arrival_time << ',' << r.safe_arrival() << '\n';
    }
  }
  for (std::size_t i = 0; i < last.size(); ++i)
    if (last[i]) {
      auto o = open_out(fs::path(out) / ("posterior_r" + std::to_string(i) + ".json"));
      o << last[i]->to_json() << "\n";
    }
  int safe = 0;
  for (const auto& r : t.robots) safe += r.safe_arrival();
  std::cout << "iterations: " << (t.rows.empty() ? 0 : t.rows.back().k) << ", safe arrivals: " << safe << "/"
            << t.robots.size() << "\n";
  return 0;
}

int cmd_grid_dump(const std::string& config, const std::string& snapshot, int iteration, int robot,
                  const std::string& headings, const std::string& out) {
  Plan plan;
  if (!snapshot.empty()) {
    const Snapshot s = load_snapshot(snapshot);
    plan = rebuild_plan(make_world(s.cfg), s);
  } else {
    SimConfig cfg = load_config(config);
    cfg.k_tilde = std::max(1, iteration);
    MissionHooks hooks;
    bool found = false;
    hooks.on_plan = [&](int k, int r, const Plan& p, const Posterior&) {
      if (k == iteration && r == robot) {
        plan = p;
        found = true;
      }
    };
    run_mission(make_world(cfg), hooks);
    if (!found) throw std::runtime_error("robot " + std::to_string(robot) + " has no policy at iteration " + std::to_string(iteration));
  }
  const GridSpec& g = *plan.grid;
  SafeControlMap empty(g.size(), g.num_controls());
  for (LatticeIndex x = 0; x < static_cast<LatticeIndex>(g.size()); ++x) empty.mark_unsafe(x);
  const SafeControlMap& map = plan.policy ? *plan.policy->snapshot().map : empty;
  auto o = open_out(out);
  write_grid_dump(o, g, map, headings_for(headings, g));
  std::cout << "p=" << g.level() << ", safe states: " << plan.safe_count << " of " << g.size() << "\n";
  return 0;
}

int cmd_validate(const std::string& config) {
  const SimConfig cfg = load_config(config);
  const World w = make_world(cfg);
  const ConditionReport r = check_conditions(w);
  std::cout << "ell = " << w.constants.ell << ", m = " << w.constants.m << " (lattice frame)\n";
  write_condition_report(std::cout, r);
  return 0;
}

int cmd_campaign(const std::string& spec, const std::string& out, int max_runs) {
  const CampaignSpec s = load_campaign(spec);
  const auto rows = run_campaign(s, out, max_runs, &std::cout);
  std::cout << rows.size() << " runs in " << out << "/campaign.csv\n";
  return 0;
}

int cmd_region_oracle(const std::string& snapshot, const std::string& out, const std::string& dump, int n1, int n2,
                      int max_steps) {
  const Snapshot s = load_snapshot(snapshot);
  const World w = make_world(s.cfg);
  const Plan plan = rebuild_plan(w, s);
  if (!plan.policy) throw std::runtime_error("snapshot policy has an empty safe set");
  RegionSpec spec;
  spec.n1 = n1;
  spec.n2 = n2;
  spec.max_steps = max_steps;
  const RegionMask mask = safe_region_oracle(*plan.policy, w, spec);
  {
    auto o = open_out(out);
    write_region_csv(o, mask);
  }
  if (!dump.empty()) {
    auto o = open_out(dump);
    write_grid_dump(o, *plan.grid, *plan.policy->snapshot().map, spec.headings);
  }
  std::size_t safe = 0;
  for (const auto& c : mask.cells) safe += c.safe();
  std::cout << "region-safe cells: " << safe << " of " << mask.cells.size() << "\n";
  return 0;
}

int cmd_compare(const std::string& dump, const std::string& mask_path, const std::string& out) {
  std::ifstream gd(dump), rm(mask_path);
  if (!gd) throw std::runtime_error("cannot open " + dump);
  if (!rm) throw std::runtime_error("cannot open " + mask_path);
  const auto grid = read_grid_dump(gd);
  const RegionMask mask = read_region_csv(rm);
  const auto report = grid_vs_region(grid, mask);
  auto o = open_out(out);
  write_containment_csv(o, report);
  std::size_t v = 0;
  for (const auto& r : report) v += r.violations;
  std::cout << "containment violations: " << v << "\n";
  return v == 0 ? 0 : 1;
}

int cmd_wind(const std::string& config, const std::string& out) {
  const SimConfig cfg = load_config(config);
  const World w = make_world(cfg);
  auto o = open_out(out);
  w.wind.save_csv(o);
  const auto [mean, sd] = w.wind.domain_stats();
  std::cout << "mean " << mean << ", std " << sd << ", sup bound " << w.wind.sup_bound() << ", lipschitz bound "
            << w.wind.lipschitz_bound() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dslap: distributed safe learning and planning"};
  app.require_subcommand(1);

  std::string config, out, snapshot, headings = "fig4", spec, dump, mask;
  int k_tilde = -1, snap_k = -1, snap_robot = -1, iteration = 1, robot = 0, max_runs = -1, n1 = 50, n2 = 50,
      max_steps = 60;
  bool no_timing = false;

  auto* run = app.add_subcommand("run", "run one mission");
  run->add_option("config", config, "JSON config")->required();
  run->add_option("-o,--out", out, "output directory")->default_val("out");
  run->add_option("--k-tilde", k_tilde, "override the termination iteration");
  run->add_option("--snapshot-at", snap_k, "write a policy snapshot at this iteration");
  run->add_option("--snapshot-robot", snap_robot, "robot for --snapshot-at (default all)");
  run->add_flag("--no-timing", no_timing, "write zero timings (bit-reproducible trace)");

  auto* gd = app.add_subcommand("grid-dump", "dump safe-set slices of one policy");
  gd->add_option("config", config, "JSON config (runs the mission up to --iteration)");
  gd->add_option("--snapshot", snapshot, "policy snapshot instead of a config");
  gd->add_option("--iteration", iteration, "policy index k")->default_val(1);
  gd->add_option("--robot", robot, "robot index")->default_val(0);
  gd->add_option("--headings", headings, "fig4 or all")->default_val("fig4");
  gd->add_option("-o,--out", out, "CSV path")->default_val("safe_set.csv");

  auto* val = app.add_subcommand("validate", "report the persistence preconditions");
  val->add_option("config", config, "JSON config")->required();

  auto* camp = app.add_subcommand("campaign", "run a Monte Carlo campaign (resumable)");
  camp->add_option("spec", spec, "campaign JSON")->required();
  camp->add_option("-o,--out", out, "output directory")->default_val("campaign");
  camp->add_option("--max-runs", max_runs, "stop after this many new runs");

  auto* ro = app.add_subcommand("region-oracle", "brute-force safe region of a snapshot policy");
  ro->add_option("snapshot", snapshot, "policy snapshot JSON")->required();
  ro->add_option("-o,--out", out, "region mask CSV")->default_val("region_mask.csv");
  ro->add_option("--grid-dump", dump, "also write the snapshot's safe-set slices here");
  ro->add_option("--n1", n1, "cells along x1")->default_val(50);
  ro->add_option("--n2", n2, "cells along x2")->default_val(50);
  ro->add_option("--max-steps", max_steps, "sub-steps per rollout")->default_val(60);

  auto* cmp = app.add_subcommand("compare", "safe grid versus safe region");
  cmp->add_option("grid-dump", dump, "safe-set dump")->required();
  cmp->add_option("region-mask", mask, "region mask CSV")->required();
  cmp->add_option("-o,--out", out, "report CSV")->default_val("containment_report.csv");

  auto* wind = app.add_subcommand("wind", "write the wind field of a config");
  wind->add_option("config", config, "JSON config")->required();
  wind->add_option("-o,--out", out, "CSV path")->default_val("wind.csv");

  auto* defaults = app.add_subcommand("config", "print the default configuration");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, out, k_tilde, snap_k, snap_robot, no_timing);
    if (*gd) {
      if (config.empty() == snapshot.empty()) throw std::invalid_argument("grid-dump needs a config or --snapshot");
      return cmd_grid_dump(config, snapshot, iteration, robot, headings, out);
    }
    if (*val) return cmd_validate(config);
    if (*camp) return cmd_campaign(spec, out, max_runs);
    if (*ro) return cmd_region_oracle(snapshot, out, dump, n1, n2, max_steps);
    if (*cmp) return cmd_compare(dump, mask, out);
    if (*wind) return cmd_wind(config, out);
    if (*defaults) {
      SimConfig c;
      c.robots = make_formation(Formation::RingSwap, 2, c.x1, c.x2, 1.0);
      std::cout << config_to_json(c) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
