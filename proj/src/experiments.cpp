#include "dslap/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dslap/csv.hpp"

namespace dslap {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CampaignSpec campaign_from_json_at(const std::string& text, const fs::path& dir) {
  const json j = json::parse(text);
  CampaignSpec s;
  if (j.contains("base")) {
    if (j["base"].is_string())
      s.base = config_from_json(read_file(dir / j["base"].get<std::string>()));
    else
      s.base = config_from_json(j["base"].dump());
  } else {
    s.base = config_from_json("{}");
  }
  if (j.contains("wind_seeds")) s.wind_seeds = j["wind_seeds"].get<std::vector<std::uint64_t>>();
  if (j.contains("wind_seed_count"))
    for (std::uint64_t i = 1; i <= j["wind_seed_count"].get<std::uint64_t>(); ++i) s.wind_seeds.push_back(i);
  s.r_w = j.value("r_w", std::vector<double>{});
  for (const auto& f : j.value("formations", std::vector<std::string>{})) s.formations.push_back(formation_from_string(f));
  s.robot_counts = j.value("robot_counts", std::vector<int>{});
  for (const auto& v : j.value("variants", std::vector<std::string>{})) s.variants.push_back(variant_from_string(v));
  s.k_tilde = j.value("k_tilde", 0);
  return s;
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  // splitmix64 step
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h += 0x9e3779b97f4a7c15ULL;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  return h ^ (h >> 31);
}

}  // namespace

CampaignSpec campaign_from_json(const std::string& text) { return campaign_from_json_at(text, fs::current_path()); }

CampaignSpec load_campaign(const std::string& path) {
  return campaign_from_json_at(read_file(path), fs::path(path).parent_path());
}

SimConfig RunSpec::config(const SimConfig& base, int k_tilde) const {
  SimConfig c = base;
  c.variant = variant;
  c.wind.r_w = r_w;
  c.wind.seed = wind_seed;
  const double goal_radius = base.robots.empty() ? 1.0 : base.robots.front().goal_radius;
  c.robots = make_formation(formation, n, base.x1, base.x2, goal_radius);
  c.priority.clear();
  if (k_tilde > 0) c.k_tilde = k_tilde;
  // Noise seed shared by all variants of the same scenario.
  c.seed = mix(mix(mix(base.seed, wind_seed), static_cast<std::uint64_t>(n) * 16 + static_cast<std::uint64_t>(formation)),
               static_cast<std::uint64_t>(std::llround(r_w * 1000)));
  return c;
}

std::vector<RunSpec> expand(const CampaignSpec& spec) {
  std::vector<RunSpec> runs;
  for (double rw : spec.r_w)
    for (std::uint64_t seed : spec.wind_seeds)
      for (int n : spec.robot_counts)
        for (Formation f : spec.formations)
          for (Variant v : spec.variants) {
            RunSpec r;
            r.variant = v;
            r.n = n;
            r.r_w = rw;
            r.wind_seed = seed;
            r.formation = f;
            char buf[160];
            std::snprintf(buf, sizeof buf, "rw%.2f-w%04llu-n%d-%s-%s", rw, static_cast<unsigned long long>(seed), n,
                          to_string(f).c_str(), to_string(v).c_str());
            r.id = buf;
            runs.push_back(r);
          }
  std::sort(runs.begin(), runs.end(), [](const RunSpec& a, const RunSpec& b) { return a.id < b.id; });
  runs.erase(std::unique(runs.begin(), runs.end(), [](const RunSpec& a, const RunSpec& b) { return a.id == b.id; }),
             runs.end());
  return runs;
}

RunResult summarize(const RunSpec& run, const Trace& trace, int ica_bound_violations) {
  RunResult r;
  r.run = run;
  r.robots = static_cast<int>(trace.robots.size());
  for (const RobotOutcome& o : trace.robots) {
    r.safe_arrivals += o.safe_arrival();
    r.arrivals += o.arrived;
    r.collisions += o.collided;
    r.left_domain += o.left_domain;
    r.infeasible_start += o.infeasible_start;
    r.infeasible_events += o.infeasible_events;
    r.arrival_times.push_back(o.safe_arrival() ? o.arrival_time : -1.0);
  }
  r.ica_bound_violations = ica_bound_violations;
  // An iteration qualifies when every robot active at its start was near its
  // safe set and its model's tube held.
  std::map<int, std::vector<const TraceRow*>> by_k;
  for (const TraceRow& row : trace.rows) by_k[row.k].push_back(&row);
  r.iterations = static_cast<int>(by_k.size());
  for (const auto& [k, rows] : by_k) {
    bool all = true;
    for (const TraceRow* row : rows) all = all && row->near_safe && row->tube_ok;
    if (!all) continue;
    r.qualifying += static_cast<int>(rows.size());
    for (const TraceRow* row : rows) r.qualifying_collisions += row->collided;
  }
  r.robot_iterations = static_cast<int>(trace.rows.size());
  if (!trace.rows.empty()) {
    for (const TraceRow& row : trace.rows) {
      r.t_sl += row.t_sl;
      r.t_oca += row.t_oca;
      r.t_ica += row.t_ica;
      r.t_al += row.t_al;
    }
    const double n = static_cast<double>(trace.rows.size());
    r.t_sl /= n;
    r.t_oca /= n;
    r.t_ica /= n;
    r.t_al /= n;
  }
  return r;
}

RunResult run_one(const RunSpec& run, const SimConfig& base, int k_tilde) {
  try {
    const SimConfig cfg = run.config(base, k_tilde);
    const World w = make_world(cfg);
    int ica_bad = 0;
    MissionHooks hooks;
    hooks.on_plan = [&](int, int, const Plan& p, const Posterior&) {
      const auto cap = static_cast<std::int64_t>(p.grid->size() * p.grid->num_controls());
      if (p.ica_counters.removals > cap) ++ica_bad;
    };
    const Trace t = run_mission(w, hooks);
    return summarize(run, t, ica_bad);
  } catch (const std::exception& e) {
    RunResult r;
    r.run = run;
    r.ok = false;
    r.error = e.what();
    return r;
  }
}

void write_campaign_csv(std::ostream& os, const std::vector<RunResult>& rows) {
  os << "run_id,variant,n,r_w,wind_seed,config,status,robots,safe_arrivals,arrivals,collisions,left_domain,"
        "infeasible_start,infeasible_events,arrival_times,iterations,robot_iterations,qualifying,"
        "qualifying_collisions,ica_bound_violations,t_SL,t_OCA,t_ICA,t_AL\n";
  std::vector<const RunResult*> sorted;
  for (const auto& r : rows) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->run.id < b->run.id; });
  const auto old = os.precision(10);
  for (const RunResult* r : sorted) {
    std::string times;
    for (std::size_t i = 0; i < r->arrival_times.size(); ++i) {
      std::ostringstream t;
      t << std::setprecision(10) << r->arrival_times[i];
      times += (i ? ";" : "") + t.str();
    }
    std::string status = r->ok ? "ok" : "error:" + r->error;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    os << r->run.id << ',' << to_string(r->run.variant) << ',' << r->run.n << ',' << r->run.r_w << ','
       << r->run.wind_seed << ',' << to_string(r->run.formation) << ',' << status << ',' << r->robots << ','
       << r->safe_arrivals << ',' << r->arrivals << ',' << r->collisions << ',' << r->left_domain << ','
       << r->infeasible_start << ',' << r->infeasible_events << ',' << times << ',' << r->iterations << ','
       << r->robot_iterations << ',' << r->qualifying << ',' << r->qualifying_collisions << ','
       << r->ica_bound_violations << ',' << r->t_sl << ',' << r->t_oca << ',' << r->t_ica << ',' << r->t_al << '\n';
  }
  os.precision(old);
}

std::vector<RunResult> read_campaign_csv(std::istream& is) {
  const CsvTable t = read_csv(is);
  std::vector<RunResult> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    RunResult r;
    r.run.id = t.str(i, "run_id");
    r.run.variant = variant_from_string(t.str(i, "variant"));
    r.run.n = static_cast<int>(t.num(i, "n"));
    r.run.r_w = t.num(i, "r_w");
    r.run.wind_seed = std::stoull(t.str(i, "wind_seed"));
    r.run.formation = formation_from_string(t.str(i, "config"));
    const std::string& st = t.str(i, "status");
    r.ok = st == "ok";
    if (!r.ok) r.error = st.substr(std::min<std::size_t>(6, st.size()));
    r.robots = static_cast<int>(t.num(i, "robots"));
    r.safe_arrivals = static_cast<int>(t.num(i, "safe_arrivals"));
    r.arrivals = static_cast<int>(t.num(i, "arrivals"));
    r.collisions = static_cast<int>(t.num(i, "collisions"));
    r.left_domain = static_cast<int>(t.num(i, "left_domain"));
    r.infeasible_start = static_cast<int>(t.num(i, "infeasible_start"));
    r.infeasible_events = static_cast<int>(t.num(i, "infeasible_events"));
    std::istringstream times(t.str(i, "arrival_times"));
    std::string cell;
    while (std::getline(times, cell, ';'))
      if (!cell.empty()) r.arrival_times.push_back(std::stod(cell));
    r.iterations = static_cast<int>(t.num(i, "iterations"));
    r.robot_iterations = static_cast<int>(t.num(i, "robot_iterations"));
    r.qualifying = static_cast<int>(t.num(i, "qualifying"));
    r.qualifying_collisions = static_cast<int>(t.num(i, "qualifying_collisions"));
    r.ica_bound_violations = static_cast<int>(t.num(i, "ica_bound_violations"));
    r.t_sl = t.num(i, "t_SL");
    r.t_oca = t.num(i, "t_OCA");
    r.t_ica = t.num(i, "t_ICA");
    r.t_al = t.num(i, "t_AL");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ArrivalStats> aggregate(const std::vector<RunResult>& rows) {
  struct Acc {
    int runs = 0, robots = 0, safe = 0;
    std::vector<double> rates;
    double time_sum = 0.0;
    int time_count = 0;
  };
  std::map<std::tuple<int, long long, int>, Acc> acc;
  for (const RunResult& r : rows) {
    if (!r.ok || r.robots == 0) continue;
    const long long rw = std::llround(r.run.r_w * 1e6);
    for (int n : {r.run.n, 0}) {
      Acc& a = acc[{static_cast<int>(r.run.variant), rw, n}];
      ++a.runs;
      a.robots += r.robots;
      a.safe += r.safe_arrivals;
      a.rates.push_back(static_cast<double>(r.safe_arrivals) / r.robots);
      for (double t : r.arrival_times)
        if (t >= 0) {
          a.time_sum += t;
          ++a.time_count;
        }
    }
  }
  std::vector<ArrivalStats> out;
  for (const auto& [key, a] : acc) {
    ArrivalStats s;
    s.variant = static_cast<Variant>(std::get<0>(key));
    s.r_w = static_cast<double>(std::get<1>(key)) / 1e6;
    s.n = std::get<2>(key);
    s.runs = a.runs;
    s.robots = a.robots;
    s.rate = a.robots ? static_cast<double>(a.safe) / a.robots : 0.0;
    if (a.rates.size() > 1) {
      double mean = 0.0;
      for (double x : a.rates) mean += x;
      mean /= static_cast<double>(a.rates.size());
      double var = 0.0;
      for (double x : a.rates) var += (x - mean) * (x - mean);
      var /= static_cast<double>(a.rates.size() - 1);
      s.se = std::sqrt(var / static_cast<double>(a.rates.size()));
    }
    s.mean_time = a.time_count ? a.time_sum / a.time_count : 0.0;
    out.push_back(s);
  }
  return out;
}

void write_summary_csv(std::ostream& os, const std::vector<ArrivalStats>& stats) {
  os << "variant,r_w,n,runs,robots,safe_arrival_rate,se,mean_arrival_time\n";
  const auto old = os.precision(10);
  for (const ArrivalStats& s : stats)
    os << to_string(s.variant) << ',' << s.r_w << ',' << s.n << ',' << s.runs << ',' << s.robots << ',' << s.rate
       << ',' << s.se << ',' << s.mean_time << '\n';
  os.precision(old);
}

void write_timings_csv(std::ostream& os, const std::vector<RunResult>& rows) {
  // Robot-iteration weighted mean and spread of the per-run means.
  struct Acc {
    double w = 0, s[5] = {}, q[5] = {};
  };
  std::map<std::pair<int, int>, Acc> acc;
  for (const RunResult& r : rows) {
    if (!r.ok || r.robot_iterations == 0) continue;
    const double t[5] = {r.t_sl, r.t_oca, r.t_ica, r.t_al, r.t_sl + r.t_oca + r.t_ica + r.t_al};
    Acc& a = acc[{static_cast<int>(r.run.variant), r.run.n}];
    const double w = r.robot_iterations;
    a.w += w;
    for (int i = 0; i < 5; ++i) {
      a.s[i] += w * t[i];
      a.q[i] += w * t[i] * t[i];
    }
  }
  static const char* names[5] = {"SL", "Discrete+OCA", "ICA", "AL", "total"};
  os << "variant,n,procedure,mean_s,std_s,robot_iterations\n";
  const auto old = os.precision(8);
  for (const auto& [key, a] : acc)
    for (int i = 0; i < 5; ++i) {
      const double mean = a.s[i] / a.w;
      const double sd = std::sqrt(std::max(0.0, a.q[i] / a.w - mean * mean));
      os << to_string(static_cast<Variant>(key.first)) << ',' << key.second << ',' << names[i] << ',' << mean << ','
         << sd << ',' << a.w << '\n';
    }
  os.precision(old);
}

std::vector<RunResult> run_campaign(const CampaignSpec& spec, const std::string& out_dir, int max_runs,
                                    std::ostream* log) {
  fs::create_directories(out_dir);
  const fs::path csv = fs::path(out_dir) / "campaign.csv";
  std::map<std::string, RunResult> done;
  if (fs::exists(csv)) {
    std::ifstream in(csv);
    for (auto& r : read_campaign_csv(in)) done.emplace(r.run.id, std::move(r));
  }
  auto flush = [&] {
    std::vector<RunResult> rows;
    for (const auto& [id, r] : done) rows.push_back(r);
    {
      std::ofstream o(fs::path(out_dir) / "campaign.csv.tmp");
      write_campaign_csv(o, rows);
    }
    fs::rename(fs::path(out_dir) / "campaign.csv.tmp", csv);
    std::ofstream s(fs::path(out_dir) / "campaign_summary.csv");
    write_summary_csv(s, aggregate(rows));
    std::ofstream t(fs::path(out_dir) / "timings.csv");
    write_timings_csv(t, rows);
    return rows;
  };
  int ran = 0;
  for (const RunSpec& run : expand(spec)) {
    if (done.count(run.id)) continue;
    if (max_runs >= 0 && ran >= max_runs) break;
    RunResult r = run_one(run, spec.base, spec.k_tilde);
    if (log)
      *log << run.id << ": " << (r.ok ? "ok" : "error: " + r.error) << ", safe arrivals " << r.safe_arrivals << "/"
           << r.robots << std::endl;
    done.emplace(run.id, std::move(r));
    ++ran;
    flush();
  }
  return flush();
}

// ---------------------------------------------------------------------------

std::string snapshot_to_json(const Snapshot& s) {
  json j;
  j["config"] = json::parse(config_to_json(s.cfg));
  j["robot"] = s.robot;
  j["iteration"] = s.iteration;
  j["level"] = s.level;
  j["posterior"] = json::parse(s.posterior.to_json());
  j["higher"] = json::array();
  for (const auto& [id, x] : s.higher)
    j["higher"].push_back({{"robot", id}, {"state", std::vector<double>(x.data(), x.data() + x.size())}});
  return j.dump(1);
}

Snapshot snapshot_from_json(const std::string& text) {
  const json j = json::parse(text);
  Snapshot s;
  s.cfg = config_from_json(j.at("config").dump());
  s.robot = j.at("robot").get<int>();
  s.iteration = j.at("iteration").get<int>();
  s.level = j.at("level").get<int>();
  s.posterior = Posterior::from_json(j.at("posterior").dump());
  for (const json& h : j.value("higher", json::array())) {
    const auto v = h.at("state").get<std::vector<double>>();
    s.higher.emplace_back(h.at("robot").get<int>(), Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  if (s.robot < 0 || s.robot >= static_cast<int>(s.cfg.robots.size())) throw std::invalid_argument("snapshot: robot out of range");
  return s;
}

Snapshot load_snapshot(const std::string& path) { return snapshot_from_json(read_file(path)); }

Plan rebuild_plan(const World& w, const Snapshot& s) {
  const RobotSpec& r = s.cfg.robots[static_cast<std::size_t>(s.robot)];
  GoalRegion goal;
  goal.center = r.goal;
  goal.radius = r.goal_radius;
  auto grid = std::make_shared<GridSpec>(make_grid(s.level, w.bounds));
  return compute_plan(w, grid, make_model(w, std::make_shared<Posterior>(s.posterior)), goal, s.iteration, s.higher);
}

const char* to_string(RegionOutcome o) {
  switch (o) {
    case RegionOutcome::Collision: return "collision";
    case RegionOutcome::Arrived: return "arrived";
    case RegionOutcome::Horizon: return "horizon";
    case RegionOutcome::LeftDomain: return "left_domain";
  }
  return "?";
}

namespace {

RegionOutcome outcome_from_string(const std::string& s) {
  if (s == "collision") return RegionOutcome::Collision;
  if (s == "arrived") return RegionOutcome::Arrived;
  if (s == "horizon") return RegionOutcome::Horizon;
  if (s == "left_domain") return RegionOutcome::LeftDomain;
  throw std::runtime_error("region mask: unknown outcome " + s);
}

double cell_center(Interval iv, int n, int i) { return iv.lo + (i + 0.5) * (iv.hi - iv.lo) / n; }

int cell_of(Interval iv, int n, double x) {
  const int i = static_cast<int>(std::floor((x - iv.lo) / (iv.hi - iv.lo) * n));
  return std::clamp(i, 0, n - 1);
}

double angle_gap(double a, double b) { return std::abs(std::remainder(a - b, 2.0 * std::numbers::pi)); }

}  // namespace

RegionMask safe_region_oracle(const Policy& policy, const World& w, const RegionSpec& spec) {
  const SimConfig& cfg = w.cfg;
  const GoalRegion& goal = policy.snapshot().config.goal;
  const GridSpec& g = *policy.snapshot().grid;
  RegionMask mask;
  mask.spec = spec;
  mask.x1 = cfg.x1;
  mask.x2 = cfg.x2;
  const double eps = cfg.eps();
  IntegrateOptions opt;
  opt.max_step = std::min(0.1, cfg.noise.delta);
  opt.wrap_dims = {2};
  std::size_t zero = 0;
  for (std::size_t u = 1; u < g.num_controls(); ++u)
    if (g.control(u).cwiseAbs().maxCoeff() < g.control(zero).cwiseAbs().maxCoeff()) zero = u;

  for (double th : spec.headings)
    for (int i = 0; i < spec.n1; ++i)
      for (int j = 0; j < spec.n2; ++j) {
        RegionCell cell;
        cell.x1 = cell_center(cfg.x1, spec.n1, i);
        cell.x2 = cell_center(cfg.x2, spec.n2, j);
        cell.heading = th;
        State x(3);
        x << cell.x1, cell.x2, wrap_angle(th);
        if (in_obstacle(x.head(2), cfg.obstacles)) {
          cell.outcome = RegionOutcome::Collision;
        } else if (goal.contains(x.head(2))) {
          cell.outcome = RegionOutcome::Arrived;
        } else {
          cell.outcome = RegionOutcome::Horizon;
          for (int s = 0; s < spec.max_steps && cell.outcome == RegionOutcome::Horizon; ++s) {
            std::size_t u = zero;
            try {
              const PolicyDecision d = policy.eval(x);
              if (!d.plan.feasible) ++cell.infeasible_steps;
              if (!d.plan.controls.empty()) u = d.control;
            } catch (const std::runtime_error&) {
              ++cell.infeasible_steps;
            }
            bool stop = false;
            IntegrateOptions o = opt;
            o.observer = [&](double, const State& y) {
              if (stop) return;
              if (in_obstacle(y.head(2), cfg.obstacles)) cell.outcome = RegionOutcome::Collision;
              else if (goal.contains(y.head(2))) cell.outcome = RegionOutcome::Arrived;
              else if (y[0] < cfg.x1.lo || y[0] > cfg.x1.hi || y[1] < cfg.x2.lo || y[1] > cfg.x2.hi)
                cell.outcome = RegionOutcome::LeftDomain;
              stop = cell.outcome != RegionOutcome::Horizon;
            };
            x = integrate(cfg.boat, x, g.control(u), eps, w.truth, o).x;
          }
        }
        mask.cells.push_back(cell);
      }
  return mask;
}

void write_region_csv(std::ostream& os, const RegionMask& m) {
  os << std::setprecision(17);
  os << "# x1_lo=" << m.x1.lo << " x1_hi=" << m.x1.hi << " x2_lo=" << m.x2.lo << " x2_hi=" << m.x2.hi
     << " n1=" << m.spec.n1 << " n2=" << m.spec.n2 << " max_steps=" << m.spec.max_steps << "\n";
  os << "x1,x2,heading,outcome,safe,infeasible_steps\n";
  for (const RegionCell& c : m.cells)
    os << c.x1 << ',' << c.x2 << ',' << c.heading << ',' << to_string(c.outcome) << ',' << int(c.safe()) << ','
       << c.infeasible_steps << '\n';
}

RegionMask read_region_csv(std::istream& is) {
  const CsvTable t = read_csv(is);
  RegionMask m;
  m.x1 = {t.meta_num("x1_lo"), t.meta_num("x1_hi")};
  m.x2 = {t.meta_num("x2_lo"), t.meta_num("x2_hi")};
  m.spec.n1 = static_cast<int>(t.meta_num("n1"));
  m.spec.n2 = static_cast<int>(t.meta_num("n2"));
  m.spec.max_steps = static_cast<int>(t.meta_num("max_steps"));
  m.spec.headings.clear();
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    RegionCell c;
    c.x1 = t.num(i, "x1");
    c.x2 = t.num(i, "x2");
    c.heading = t.num(i, "heading");
    c.outcome = outcome_from_string(t.str(i, "outcome"));
    c.infeasible_steps = static_cast<int>(t.num(i, "infeasible_steps"));
    if (m.spec.headings.empty() || m.spec.headings.back() != c.heading) m.spec.headings.push_back(c.heading);
    m.cells.push_back(c);
  }
  const std::size_t expect = m.spec.headings.size() * static_cast<std::size_t>(m.spec.n1 * m.spec.n2);
  if (m.cells.size() != expect) throw std::runtime_error("region mask: cell count does not match n1 x n2 x headings");
  return m;
}

std::vector<SliceReport> grid_vs_region(const std::vector<GridPoint>& grid, const RegionMask& mask) {
  const int n1 = mask.spec.n1, n2 = mask.spec.n2;
  const std::size_t slice = static_cast<std::size_t>(n1 * n2);
  std::vector<SliceReport> out(mask.spec.headings.size());
  std::vector<std::size_t> in_safe_cells(out.size(), 0);
  for (std::size_t s = 0; s < out.size(); ++s) {
    out[s].heading = mask.spec.headings[s];
    out[s].region_cells = slice;
    for (std::size_t c = 0; c < slice; ++c) {
      const RegionCell& cell = mask.cells[s * slice + c];
      out[s].region_safe += cell.safe();
      out[s].safe_by_exit += cell.outcome == RegionOutcome::LeftDomain;
    }
  }
  for (const GridPoint& p : grid) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < out.size(); ++s)
      if (angle_gap(p.heading, out[s].heading) < angle_gap(p.heading, out[best].heading)) best = s;
    const int i = cell_of(mask.x1, n1, p.x1), j = cell_of(mask.x2, n2, p.x2);
    const RegionCell& cell = mask.cells[best * slice + static_cast<std::size_t>(i * n2 + j)];
    SliceReport& r = out[best];
    ++r.grid_points;
    if (cell.safe()) ++in_safe_cells[best];
    if (!p.safe) continue;
    ++r.grid_safe;
    if (!cell.safe()) ++r.violations;
  }
  for (std::size_t s = 0; s < out.size(); ++s)
    out[s].coverage = in_safe_cells[s] ? static_cast<double>(out[s].grid_safe) / in_safe_cells[s] : 0.0;
  return out;
}

void write_containment_csv(std::ostream& os, const std::vector<SliceReport>& rows) {
  os << "heading,grid_points,grid_safe,violations,region_cells,region_safe,safe_by_exit,coverage\n";
  const auto old = os.precision(10);
  for (const SliceReport& r : rows)
    os << r.heading << ',' << r.grid_points << ',' << r.grid_safe << ',' << r.violations << ',' << r.region_cells
       << ',' << r.region_safe << ',' << r.safe_by_exit << ',' << r.coverage << '\n';
  os.precision(old);
}

std::vector<GridPoint> grid_points(const GridSpec& grid, const SafeControlMap& map, const std::vector<double>& headings) {
  std::vector<GridPoint> out;
  const double h = grid.step();
  for (double th : headings) {
    const int hc = heading_coord(grid, th);
    for (int i = 0; i < grid.extent(0); ++i)
      for (int j = 0; j < grid.extent(1); ++j) {
        const std::array<int, kMaxDims> c{grid.lower(0) + i, grid.lower(1) + j, hc, 0};
        const LatticeIndex x = grid.index_of(c);
        if (x < 0) continue;
        out.push_back({c[0] * h * grid.bounds().scale_of(0), c[1] * h * grid.bounds().scale_of(1),
                       hc * h * grid.bounds().scale_of(2), map.safe(x)});
      }
  }
  return out;
}

void write_grid_dump(std::ostream& os, const GridSpec& grid, const SafeControlMap& map,
                     const std::vector<double>& headings) {
  os << std::setprecision(17);
  os << "# p=" << grid.level() << " h=" << grid.step() << " heading_scale=" << grid.bounds().scale_of(2) << "\n";
  std::vector<int> coords;
  for (double th : headings) coords.push_back(heading_coord(grid, th));
  write_safe_set_csv(os, grid, map, coords);
}

std::vector<GridPoint> read_grid_dump(std::istream& is) {
  const CsvTable t = read_csv(is);
  const double step = t.meta_num("h") * t.meta_num("heading_scale");
  std::vector<GridPoint> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    out.push_back({t.num(i, "x1"), t.num(i, "x2"), t.num(i, "heading_index") * step, t.num(i, "safe") != 0.0});
  return out;
}

}  // namespace dslap
