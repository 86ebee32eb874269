#pragma once

#include <map>
#include <string>
#include <vector>

#include "ogpit/trust_region.hpp"

namespace ogpit::hn {

// Method ids: "ei", "qerciv1", "qerciv2", or "fixed<k>" (EI candidate search
// with a pinned replicate count k).
tr::AcquisitionChoice parse_method(const std::string& id, int p_max);

struct GridConfig {
  std::vector<std::string> problems;
  std::vector<double> noise_sds;
  std::vector<std::string> methods;
  int replications = 1;
  std::uint64_t master_seed = 0;

  tr::TRConfig base;             // acquisition/cost filled per cell
  long n_max_times_dp1 = 10000;  // N_max = value * (d+1) unless n_max set
  long n_max = 0;
};

// Flat key=value file with [section] headers, '#' comments and comma
// separated arrays. Errors carry file:line context.
GridConfig parse_config_file(const std::string& path);
GridConfig parse_config_text(const std::string& text, const std::string& origin);

struct TraceRecord {
  long iteration = 0;
  long n_evals = 0;
  double cost_spent = 0.0;
  double radius = 0.0;
  long reps = 0;
  bool accepted = false;
  bool gate_fired = false;
  double center_value_true = 0.0;
  double regret = 0.0;
  double best_regret = 0.0;
};

struct LoadedTrace {
  std::string problem;
  int dim = 0;
  double noise_sd = 0.0;
  std::string method;
  long seed = 0;  // replication index within the grid
  std::vector<TraceRecord> rows;
};

std::string trace_filename(const std::string& problem, double noise_sd,
                           const std::string& method, long seed);
void write_trace_csv(const std::string& path, const LoadedTrace& trace);
LoadedTrace read_trace_csv(const std::string& path);

struct CellResult {
  std::string problem;
  double noise_sd = 0.0;
  std::string method;
  long seed = 0;
  std::string file;
  std::string status;  // "done", "cached" or an error description
};

// Runs every (problem, noise, method, seed) cell with a seed derived from
// (master_seed, ids, index); one CSV per cell, manifest.csv alongside.
// Existing cell files are kept unless force is set. jobs > 0 bounds the
// OpenMP cell parallelism.
std::vector<CellResult> run_grid(const GridConfig& config, const std::string& outdir,
                                 bool force = false, int jobs = 0);

// Runs one cell in memory (used by run_grid and the acceptance suite).
LoadedTrace run_cell(const GridConfig& config, const std::string& problem_id,
                     double noise_sd, const std::string& method, long seed);

struct ProfileCurve {
  double gate = 0.0;
  std::vector<double> alpha;     // budgets normalized by d+1
  std::vector<double> fraction;  // nondecreasing, within [0,1]
};

// Moré-Wild data profile over all supplied traces as one solver set: an
// instance (problem, noise, seed) is solved at budget N once the best true
// value found satisfies f - f_L <= gate * (f_start - f_L), with f_L the best
// value any supplied trace reached on that instance.
ProfileCurve data_profile(const std::vector<LoadedTrace>& traces, double gate);

// One curve per method, sharing f_L across all supplied traces.
std::map<std::string, ProfileCurve> data_profiles_by_method(
    const std::vector<LoadedTrace>& traces, double gate);

struct CostCurvePoint {
  double cost = 0.0;
  double mean_regret = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
};

// Aligns traces per method on the union cost grid by carrying the last
// value forward; aggregates mean and 10/90% quantiles across seeds.
std::map<std::string, std::vector<CostCurvePoint>> cost_curves(
    const std::vector<LoadedTrace>& traces);

std::vector<LoadedTrace> load_traces_from_dir(const std::string& dir);

void write_profile_csv(const std::string& path,
                       const std::map<std::string, ProfileCurve>& curves);
void write_cost_curves_csv(const std::string& path,
                           const std::map<std::string, std::vector<CostCurvePoint>>& curves);

}  // namespace ogpit::hn
