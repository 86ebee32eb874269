#include "ogpit/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ogpit::hn {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Methods

tr::AcquisitionChoice parse_method(const std::string& id, int p_max) {
  tr::AcquisitionChoice choice;
  if (id == "ei") {
    choice.kind = tr::AcquisitionKind::ei;
    return choice;
  }
  if (id == "qerciv1") {
    choice.kind = tr::AcquisitionKind::qerci_v1;
    return choice;
  }
  if (id == "qerciv2") {
    choice.kind = tr::AcquisitionKind::qerci_v2;
    return choice;
  }
  if (id.rfind("fixed", 0) == 0) {
    int k = 0;
    try {
      k = std::stoi(id.substr(5));
    } catch (const std::exception&) {
      throw std::invalid_argument("unknown method '" + id + "'");
    }
    if (k < 1 || k > p_max)
      throw std::invalid_argument("fixed replicate count outside [1, p_max]: '" + id + "'");
    choice.kind = tr::AcquisitionKind::ei;
    choice.fixed_reps = k;
    return choice;
  }
  throw std::invalid_argument("unknown method '" + id + "'");
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void config_error(const std::string& origin, int line, const std::string& msg) {
  throw std::runtime_error(origin + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& origin, int line, const std::string& v) {
  try {
    if (v == "inf") return std::numeric_limits<double>::infinity();
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) config_error(origin, line, "trailing characters in number '" + v + "'");
    return x;
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception&) {
    config_error(origin, line, "expected a number, got '" + v + "'");
  }
}

long parse_long(const std::string& origin, int line, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) config_error(origin, line, "trailing characters in integer '" + v + "'");
    return x;
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception&) {
    config_error(origin, line, "expected an integer, got '" + v + "'");
  }
}

}  // namespace

GridConfig parse_config_text(const std::string& text, const std::string& origin) {
  GridConfig cfg;
  std::string section;
  std::stringstream ss(text);
  std::string raw;
  int line = 0;
  while (std::getline(ss, raw)) {
    ++line;
    std::string s = raw;
    const auto hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') config_error(origin, line, "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) config_error(origin, line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty() || value.empty()) config_error(origin, line, "empty key or value");

    if (section == "grid") {
      if (key == "problems") {
        cfg.problems = split_list(value);
      } else if (key == "noise_sds") {
        cfg.noise_sds.clear();
        for (const auto& v : split_list(value))
          cfg.noise_sds.push_back(parse_double(origin, line, v));
      } else if (key == "methods") {
        cfg.methods = split_list(value);
      } else if (key == "replications") {
        cfg.replications = static_cast<int>(parse_long(origin, line, value));
      } else if (key == "master_seed") {
        cfg.master_seed = static_cast<std::uint64_t>(parse_long(origin, line, value));
      } else {
        config_error(origin, line, "unknown [grid] key '" + key + "'");
      }
    } else if (section == "tr") {
      tr::TRConfig& t = cfg.base;
      if (key == "gamma_dec") {
        t.gamma_dec = parse_double(origin, line, value);
      } else if (key == "gamma_inc") {
        t.gamma_inc = parse_double(origin, line, value);
      } else if (key == "eta") {
        t.eta = parse_double(origin, line, value);
      } else if (key == "beta") {
        t.beta = parse_double(origin, line, value);
      } else if (key == "t_a") {
        t.T_a = parse_double(origin, line, value);
      } else if (key == "var_ratio") {
        t.var_ratio = parse_double(origin, line, value);
      } else if (key == "imse_ratio") {
        t.imse_ratio = parse_double(origin, line, value);
      } else if (key == "refit_period") {
        t.refit_period = static_cast<int>(parse_long(origin, line, value));
      } else if (key == "p_max") {
        t.p_max = static_cast<int>(parse_long(origin, line, value));
      } else if (key == "n_b") {
        t.n_b = static_cast<int>(parse_long(origin, line, value));
      } else if (key == "n0") {
        t.N0 = static_cast<int>(parse_long(origin, line, value));
      } else if (key == "delta0") {
        t.delta0 = parse_double(origin, line, value);
      } else if (key == "delta_min") {
        t.delta_min = parse_double(origin, line, value);
      } else if (key == "imse_nodes") {
        t.imse_nodes = static_cast<int>(parse_long(origin, line, value));
      } else if (key == "candidate_count") {
        t.candidate_count = static_cast<int>(parse_long(origin, line, value));
      } else if (key == "mle_restarts") {
        t.mle_restarts = static_cast<int>(parse_long(origin, line, value));
      } else if (key == "noise_kind") {
        if (value == "mle") {
          t.noise_kind = gp::NoiseModel::Kind::constant_mle;
        } else if (value == "pooled") {
          t.noise_kind = gp::NoiseModel::Kind::empirical_pooled;
        } else {
          config_error(origin, line, "noise_kind must be 'mle' or 'pooled'");
        }
      } else if (key == "decrease_units") {
        if (value == "model") {
          t.decrease_units = tr::DecreaseUnits::model;
        } else if (value == "domain") {
          t.decrease_units = tr::DecreaseUnits::domain;
        } else {
          config_error(origin, line, "decrease_units must be 'model' or 'domain'");
        }
      } else {
        config_error(origin, line, "unknown [tr] key '" + key + "'");
      }
    } else if (section == "cost") {
      if (key == "c0") {
        cfg.base.cost.setup_cost = parse_double(origin, line, value);
      } else if (key == "c1") {
        cfg.base.cost.per_replicate_cost = parse_double(origin, line, value);
      } else if (key == "max_cost") {
        cfg.base.max_cost = parse_double(origin, line, value);
      } else {
        config_error(origin, line, "unknown [cost] key '" + key + "'");
      }
    } else if (section == "budget") {
      if (key == "n_max_times_dp1") {
        cfg.n_max_times_dp1 = parse_long(origin, line, value);
      } else if (key == "n_max") {
        cfg.n_max = parse_long(origin, line, value);
      } else if (key == "max_iterations") {
        const long v = parse_long(origin, line, value);
        cfg.base.max_iterations = v > 0 ? v : std::numeric_limits<long>::max();
      } else {
        config_error(origin, line, "unknown [budget] key '" + key + "'");
      }
    } else {
      config_error(origin, line, "key outside a known section: '" + key + "'");
    }
  }
  if (cfg.problems.empty()) throw std::runtime_error(origin + ": no problems configured");
  if (cfg.methods.empty()) throw std::runtime_error(origin + ": no methods configured");
  if (cfg.noise_sds.empty()) cfg.noise_sds.push_back(0.0);
  if (cfg.replications < 1) throw std::runtime_error(origin + ": replications must be positive");
  // Validate method ids early for a clear diagnostic.
  for (const auto& m : cfg.methods) parse_method(m, cfg.base.p_max);
  return cfg;
}

GridConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  GridConfig cfg = parse_config_text(ss.str(), path);
  if (const char* env = std::getenv("OGPIT_MASTER_SEED")) {
    cfg.master_seed = static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Trace CSV

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* kHeader =
    "problem,dim,noise_sd,method,seed,iteration,n_evals,cost,radius,reps,"
    "accepted,gate_fired,center_value_true,regret,best_regret";

}  // namespace

std::string trace_filename(const std::string& problem, double noise_sd,
                           const std::string& method, long seed) {
  return problem + "__noise" + fmt17(noise_sd) + "__" + method + "__seed" +
         std::to_string(seed) + ".csv";
}

void write_trace_csv(const std::string& path, const LoadedTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace file '" + path + "'");
  out << kHeader << "\n";
  for (const TraceRecord& r : trace.rows) {
    out << trace.problem << ',' << trace.dim << ',' << fmt17(trace.noise_sd) << ','
        << trace.method << ',' << trace.seed << ',' << r.iteration << ','
        << r.n_evals << ',' << fmt17(r.cost_spent) << ',' << fmt17(r.radius) << ','
        << r.reps << ',' << (r.accepted ? 1 : 0) << ',' << (r.gate_fired ? 1 : 0)
        << ',' << fmt17(r.center_value_true) << ',' << fmt17(r.regret) << ','
        << fmt17(r.best_regret) << "\n";
  }
}

LoadedTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trace file '" + path + "'");
  LoadedTrace t;
  bool first = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 15)
      throw std::runtime_error("malformed trace row in '" + path + "'");
    if (first) {
      t.problem = fields[0];
      t.dim = std::stoi(fields[1]);
      t.noise_sd = std::stod(fields[2]);
      t.method = fields[3];
      t.seed = std::stol(fields[4]);
      first = false;
    }
    TraceRecord r;
    r.iteration = std::stol(fields[5]);
    r.n_evals = std::stol(fields[6]);
    r.cost_spent = std::stod(fields[7]);
    r.radius = std::stod(fields[8]);
    r.reps = std::stol(fields[9]);
    r.accepted = fields[10] == "1";
    r.gate_fired = fields[11] == "1";
    r.center_value_true = std::stod(fields[12]);
    r.regret = std::stod(fields[13]);
    r.best_regret = std::stod(fields[14]);
    t.rows.push_back(r);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Grid execution

LoadedTrace run_cell(const GridConfig& config, const std::string& problem_id,
                     double noise_sd, const std::string& method, long seed) {
  const prob::Problem problem = prob::from_id(problem_id, noise_sd);
  tr::TRConfig trc = config.base;
  trc.acquisition = parse_method(method, trc.p_max);
  trc.N_max = config.n_max > 0 ? config.n_max
                               : config.n_max_times_dp1 * (problem.dim + 1);
  const std::uint64_t cell_seed =
      hash64({config.master_seed, fnv1a64(problem_id),
              std::bit_cast<std::uint64_t>(noise_sd), fnv1a64(method),
              static_cast<std::uint64_t>(seed)});
  Rng rng(cell_seed);
  const tr::RunResult res = tr::run(problem, trc, rng);

  LoadedTrace out;
  out.problem = problem.name;
  out.dim = problem.dim;
  out.noise_sd = noise_sd;
  out.method = method;
  out.seed = seed;
  double best = std::numeric_limits<double>::infinity();
  for (const tr::TraceRow& row : res.trace) {
    TraceRecord r;
    r.iteration = row.iteration;
    r.n_evals = row.n_evals;
    r.cost_spent = row.cost_spent;
    r.radius = row.radius;
    r.reps = row.reps;
    r.accepted = row.accepted;
    r.gate_fired = row.gate_fired;
    r.center_value_true = problem.true_objective(row.center);
    r.regret = r.center_value_true - problem.optimum_value;
    best = std::min(best, r.regret);
    r.best_regret = best;
    out.rows.push_back(r);
  }
  return out;
}

std::vector<CellResult> run_grid(const GridConfig& config, const std::string& outdir,
                                 bool force, int jobs) {
  fs::create_directories(outdir);
  struct Cell {
    std::string problem;
    double noise_sd;
    std::string method;
    long seed;
  };
  std::vector<Cell> cells;
  for (const auto& p : config.problems) {
    for (double sd : config.noise_sds) {
      for (const auto& m : config.methods) {
        for (long s = 0; s < config.replications; ++s) cells.push_back({p, sd, m, s});
      }
    }
  }
  std::vector<CellResult> results(cells.size());

#ifdef _OPENMP
  const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(cells.size()); ++i) {
    const Cell& c = cells[i];
    CellResult r;
    r.problem = c.problem;
    r.noise_sd = c.noise_sd;
    r.method = c.method;
    r.seed = c.seed;
    r.file = trace_filename(c.problem, c.noise_sd, c.method, c.seed);
    const fs::path path = fs::path(outdir) / r.file;
    try {
      if (!force && fs::exists(path)) {
        r.status = "cached";
      } else {
        const LoadedTrace trace = run_cell(config, c.problem, c.noise_sd, c.method, c.seed);
        write_trace_csv(path.string(), trace);
        r.status = "done";
      }
    } catch (const std::exception& e) {
      r.status = std::string("error: ") + e.what();
    }
    results[i] = std::move(r);
  }

  std::ofstream manifest(fs::path(outdir) / "manifest.csv", std::ios::binary);
  manifest << "problem,noise_sd,method,seed,file,status\n";
  for (const CellResult& r : results) {
    manifest << r.problem << ',' << fmt17(r.noise_sd) << ',' << r.method << ','
             << r.seed << ',' << r.file << ',' << r.status << "\n";
  }
  return results;
}

// ---------------------------------------------------------------------------
// Data profiles

namespace {

struct InstanceKey {
  std::string problem;
  double noise_sd;
  long seed;
  bool operator<(const InstanceKey& o) const {
    if (problem != o.problem) return problem < o.problem;
    if (noise_sd != o.noise_sd) return noise_sd < o.noise_sd;
    return seed < o.seed;
  }
};

double best_value(const LoadedTrace& t) {
  double best = std::numeric_limits<double>::infinity();
  for (const TraceRecord& r : t.rows) best = std::min(best, r.center_value_true);
  return best;
}

ProfileCurve profile_from_solve_alphas(const std::vector<double>& solved_alphas,
                                       std::size_t total, double gate) {
  ProfileCurve curve;
  curve.gate = gate;
  std::vector<double> alphas = solved_alphas;
  std::sort(alphas.begin(), alphas.end());
  std::size_t k = 0;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    k = i + 1;
    if (i + 1 < alphas.size() && alphas[i + 1] == alphas[i]) continue;
    curve.alpha.push_back(alphas[i]);
    curve.fraction.push_back(static_cast<double>(k) / static_cast<double>(total));
  }
  if (curve.alpha.empty()) {
    curve.alpha.push_back(0.0);
    curve.fraction.push_back(0.0);
  }
  return curve;
}

std::map<InstanceKey, double> shared_f_low(const std::vector<LoadedTrace>& traces) {
  std::map<InstanceKey, double> f_low;
  for (const LoadedTrace& t : traces) {
    const InstanceKey key{t.problem, t.noise_sd, t.seed};
    const double b = best_value(t);
    auto it = f_low.find(key);
    if (it == f_low.end() || b < it->second) f_low[key] = b;
  }
  return f_low;
}

// First crossing of the convergence test for one trace, or nothing.
std::optional<double> solve_alpha(const LoadedTrace& t, double fl, double gate) {
  if (t.rows.empty()) return std::nullopt;
  const double f_start = t.rows.front().center_value_true;
  const double gap = f_start - fl;
  if (gap <= 0.0) return 0.0;  // zero initial gap counts as solved immediately
  double best = std::numeric_limits<double>::infinity();
  for (const TraceRecord& r : t.rows) {
    best = std::min(best, r.center_value_true);
    if (best - fl <= gate * gap)
      return static_cast<double>(r.n_evals) / (t.dim + 1);
  }
  return std::nullopt;
}

// Curve over the given traces treated as one solver set; an instance with
// several traces is solved at its earliest crossing.
ProfileCurve profile_with_f_low(const std::vector<LoadedTrace>& traces,
                                const std::map<InstanceKey, double>& f_low,
                                double gate) {
  std::map<InstanceKey, std::optional<double>> first_solve;
  for (const LoadedTrace& t : traces) {
    const InstanceKey key{t.problem, t.noise_sd, t.seed};
    const auto alpha = solve_alpha(t, f_low.at(key), gate);
    auto [it, inserted] = first_solve.emplace(key, alpha);
    if (!inserted && alpha && (!it->second || *alpha < *it->second)) it->second = alpha;
  }
  std::vector<double> solved;
  for (const auto& [key, alpha] : first_solve) {
    if (alpha) solved.push_back(*alpha);
  }
  return profile_from_solve_alphas(solved, first_solve.size(), gate);
}

}  // namespace

ProfileCurve data_profile(const std::vector<LoadedTrace>& traces, double gate) {
  if (traces.empty()) throw std::invalid_argument("data_profile: no traces");
  return profile_with_f_low(traces, shared_f_low(traces), gate);
}

std::map<std::string, ProfileCurve> data_profiles_by_method(
    const std::vector<LoadedTrace>& traces, double gate) {
  if (traces.empty()) throw std::invalid_argument("data_profile: no traces");
  // f_L is shared across methods per instance.
  const std::map<InstanceKey, double> f_low = shared_f_low(traces);
  std::map<std::string, std::vector<LoadedTrace>> by_method;
  for (const LoadedTrace& t : traces) by_method[t.method].push_back(t);
  std::map<std::string, ProfileCurve> out;
  for (auto& [method, mts] : by_method) out[method] = profile_with_f_low(mts, f_low, gate);
  return out;
}

// ---------------------------------------------------------------------------
// Cost curves

std::map<std::string, std::vector<CostCurvePoint>> cost_curves(
    const std::vector<LoadedTrace>& traces) {
  if (traces.empty()) throw std::invalid_argument("cost_curves: no traces");
  std::set<double> grid_set;
  for (const LoadedTrace& t : traces) {
    for (const TraceRecord& r : t.rows) grid_set.insert(r.cost_spent);
  }
  const std::vector<double> grid(grid_set.begin(), grid_set.end());

  std::map<std::string, std::vector<const LoadedTrace*>> by_method;
  for (const LoadedTrace& t : traces) by_method[t.method].push_back(&t);

  std::map<std::string, std::vector<CostCurvePoint>> out;
  for (const auto& [method, mts] : by_method) {
    std::vector<CostCurvePoint> curve;
    for (double c : grid) {
      std::vector<double> vals;
      for (const LoadedTrace* t : mts) {
        if (t->rows.empty()) continue;
        // Last row at or before cost c; first row when c precedes the trace.
        double v = t->rows.front().regret;
        for (const TraceRecord& r : t->rows) {
          if (r.cost_spent <= c) {
            v = r.regret;
          } else {
            break;
          }
        }
        vals.push_back(v);
      }
      if (vals.empty()) continue;
      std::sort(vals.begin(), vals.end());
      const auto quantile = [&](double q) {
        const double pos = q * (vals.size() - 1);
        const std::size_t i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        if (i + 1 >= vals.size()) return vals.back();
        return vals[i] * (1.0 - frac) + vals[i + 1] * frac;
      };
      CostCurvePoint p;
      p.cost = c;
      p.mean_regret = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
      p.q10 = quantile(0.10);
      p.q90 = quantile(0.90);
      curve.push_back(p);
    }
    out[method] = std::move(curve);
  }
  return out;
}

// ---------------------------------------------------------------------------
// IO helpers

std::vector<LoadedTrace> load_traces_from_dir(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name == "manifest.csv") continue;
    if (entry.path().extension() == ".csv") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  std::vector<LoadedTrace> traces;
  traces.reserve(files.size());
  for (const auto& f : files) traces.push_back(read_trace_csv(f));
  return traces;
}

void write_profile_csv(const std::string& path,
                       const std::map<std::string, ProfileCurve>& curves) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "method,gate,alpha,solved_fraction\n";
  for (const auto& [method, curve] : curves) {
    for (std::size_t i = 0; i < curve.alpha.size(); ++i) {
      out << method << ',' << fmt17(curve.gate) << ',' << fmt17(curve.alpha[i]) << ','
          << fmt17(curve.fraction[i]) << "\n";
    }
  }
}

void write_cost_curves_csv(
    const std::string& path,
    const std::map<std::string, std::vector<CostCurvePoint>>& curves) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "method,cost,mean_regret,q10,q90\n";
  for (const auto& [method, curve] : curves) {
    for (const CostCurvePoint& p : curve) {
      out << method << ',' << fmt17(p.cost) << ',' << fmt17(p.mean_regret) << ','
          << fmt17(p.q10) << ',' << fmt17(p.q90) << "\n";
    }
  }
}

}  // namespace ogpit::hn
