#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dslap/config.hpp"
#include "dslap/sim.hpp"

namespace dslap {

struct CampaignSpec {
  SimConfig base;
  std::vector<std::uint64_t> wind_seeds;
  std::vector<double> r_w;
  std::vector<Formation> formations;
  std::vector<int> robot_counts;
  std::vector<Variant> variants;
  int k_tilde = 0;  // <= 0 keeps base.k_tilde
};

CampaignSpec campaign_from_json(const std::string& text);
CampaignSpec load_campaign(const std::string& path);

struct RunSpec {
  std::string id;
  Variant variant = Variant::Dslap;
  int n = 1;
  double r_w = 0.2;
  std::uint64_t wind_seed = 1;
  Formation formation = Formation::RingSwap;

  SimConfig config(const SimConfig& base, int k_tilde) const;
};

/// Deterministic expansion, sorted by run id.
std::vector<RunSpec> expand(const CampaignSpec& spec);

struct RunResult {
  RunSpec run;
  bool ok = true;
  std::string error;
  int robots = 0;
  int safe_arrivals = 0;
  int arrivals = 0;
  int collisions = 0;
  int left_domain = 0;
  int infeasible_start = 0;
  int infeasible_events = 0;
  std::vector<double> arrival_times;   // -1 for robots that did not arrive safely
  int iterations = 0;
  int robot_iterations = 0;
  int qualifying = 0;                  // (robot, iteration) pairs meeting both conditions
  int qualifying_collisions = 0;
  int ica_bound_violations = 0;        // ICA removals above |X_p| |U_p|
  double t_sl = 0, t_oca = 0, t_ica = 0, t_al = 0;  // per robot-iteration means
};

/// Summary of one finished trace.
RunResult summarize(const RunSpec& run, const Trace& trace, int ica_bound_violations);
RunResult run_one(const RunSpec& run, const SimConfig& base, int k_tilde);

/// Runs every missing run id, rewriting campaign.csv, campaign_summary.csv and
/// timings.csv in `out_dir` after each run.  Rows already in campaign.csv are
/// kept (resume).  `max_runs` < 0 means no limit.
std::vector<RunResult> run_campaign(const CampaignSpec& spec, const std::string& out_dir, int max_runs = -1,
                                    std::ostream* log = nullptr);

void write_campaign_csv(std::ostream& os, const std::vector<RunResult>& rows);
std::vector<RunResult> read_campaign_csv(std::istream& is);

struct ArrivalStats {
  Variant variant = Variant::Dslap;
  double r_w = 0.0;
  int n = 0;            // 0 aggregates over robot counts
  int runs = 0;
  int robots = 0;
  double rate = 0.0;    // safe arrivals / robots
  double se = 0.0;      // standard error of the per-run rate
  double mean_time = 0.0;
};

/// Grouped by (variant, r_w, n), plus an n = 0 row per (variant, r_w).
std::vector<ArrivalStats> aggregate(const std::vector<RunResult>& rows);
void write_summary_csv(std::ostream& os, const std::vector<ArrivalStats>& stats);
void write_timings_csv(std::ostream& os, const std::vector<RunResult>& rows);

// ---------------------------------------------------------------------------
// Policy snapshots: enough to rebuild pi_k of one robot exactly.

struct Snapshot {
  SimConfig cfg;
  int robot = 0;
  int iteration = 0;
  int level = 0;
  Posterior posterior;
  std::vector<std::pair<int, State>> higher;  // tube sources used by ICA
};

std::string snapshot_to_json(const Snapshot& s);
Snapshot snapshot_from_json(const std::string& text);
Snapshot load_snapshot(const std::string& path);
Plan rebuild_plan(const World& w, const Snapshot& s);

// ---------------------------------------------------------------------------
// Safe grid versus safe region.

enum class RegionOutcome : std::uint8_t { Collision, Arrived, Horizon, LeftDomain };
const char* to_string(RegionOutcome o);

struct RegionSpec {
  int n1 = 50;
  int n2 = 50;
  std::vector<double> headings{0.0, 1.5707963267948966, -1.5707963267948966, 3.141592653589793};
  int max_steps = 60;  // sub-steps of length eps
};

struct RegionCell {
  double x1 = 0, x2 = 0, heading = 0;
  RegionOutcome outcome = RegionOutcome::Horizon;
  int infeasible_steps = 0;
  bool safe() const { return outcome != RegionOutcome::Collision; }
};

struct RegionMask {
  RegionSpec spec;
  Interval x1, x2;
  std::vector<RegionCell> cells;  // heading-major, then x1, then x2
};

/// Brute force: from each evaluation point, run the frozen policy against
/// the true field and static obstacles.
RegionMask safe_region_oracle(const Policy& policy, const World& w, const RegionSpec& spec = {});
void write_region_csv(std::ostream& os, const RegionMask& mask);
RegionMask read_region_csv(std::istream& is);

struct SliceReport {
  double heading = 0;
  std::size_t grid_points = 0;
  std::size_t grid_safe = 0;
  std::size_t violations = 0;   // safe lattice points whose evaluation cell is region-unsafe
  std::size_t region_cells = 0;
  std::size_t region_safe = 0;
  std::size_t safe_by_exit = 0; // region-safe cells verified only by leaving the domain
  double coverage = 0.0;        // safe lattice points / lattice points in region-safe cells
};

/// A safe-set point: physical position, physical heading, safe flag.
struct GridPoint {
  double x1, x2, heading;
  bool safe;
};

/// Each lattice point is matched to the nearest heading slice and to the
/// evaluation cell containing its position.
std::vector<SliceReport> grid_vs_region(const std::vector<GridPoint>& grid, const RegionMask& mask);
void write_containment_csv(std::ostream& os, const std::vector<SliceReport>& rows);

/// Lattice points of a plan's map on the heading slices closest to `headings`.
std::vector<GridPoint> grid_points(const GridSpec& grid, const SafeControlMap& map, const std::vector<double>& headings);

/// Safe-set dump with a "# p=.. h=.. heading_scale=.." line for compare.
void write_grid_dump(std::ostream& os, const GridSpec& grid, const SafeControlMap& map,
                     const std::vector<double>& headings);
std::vector<GridPoint> read_grid_dump(std::istream& is);

}  // namespace dslap
