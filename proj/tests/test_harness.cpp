#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ogpit/harness.hpp"

using namespace ogpit;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const char* kSmallConfig = R"(
# tiny smoke grid
[grid]
problems = sphere-2
noise_sds = 0.01
methods = ei
replications = 2
master_seed = 77

[tr]
refit_period = 3
imse_nodes = 128
candidate_count = 50

[budget]
n_max = 12
)";

hn::LoadedTrace make_trace(const std::string& problem, const std::string& method,
                           long seed, std::vector<std::pair<long, double>> rows) {
  hn::LoadedTrace t;
  t.problem = problem;
  t.dim = 1;
  t.noise_sd = 0.0;
  t.method = method;
  t.seed = seed;
  long it = 0;
  for (const auto& [n, value] : rows) {
    hn::TraceRecord r;
    r.iteration = it++;
    r.n_evals = n;
    r.cost_spent = static_cast<double>(n);
    r.center_value_true = value;
    r.regret = value;
    t.rows.push_back(r);
  }
  return t;
}

}  // namespace

TEST_CASE("method parsing") {
  CHECK(hn::parse_method("ei", 500).kind == tr::AcquisitionKind::ei);
  CHECK(hn::parse_method("qerciv1", 500).kind == tr::AcquisitionKind::qerci_v1);
  CHECK(hn::parse_method("qerciv2", 500).kind == tr::AcquisitionKind::qerci_v2);
  const auto fixed = hn::parse_method("fixed10", 500);
  CHECK(fixed.kind == tr::AcquisitionKind::ei);
  CHECK(fixed.fixed_reps == 10);
  CHECK_THROWS_AS(hn::parse_method("fixed0", 500), std::invalid_argument);
  CHECK_THROWS_AS(hn::parse_method("fixed501", 500), std::invalid_argument);
  CHECK_THROWS_AS(hn::parse_method("sobol", 500), std::invalid_argument);
}

TEST_CASE("config parsing") {
  const hn::GridConfig cfg = hn::parse_config_text(kSmallConfig, "test.ini");
  CHECK(cfg.problems == std::vector<std::string>{"sphere-2"});
  CHECK(cfg.noise_sds == std::vector<double>{0.01});
  CHECK(cfg.replications == 2);
  CHECK(cfg.master_seed == 77);
  CHECK(cfg.base.imse_nodes == 128);
  CHECK(cfg.n_max == 12);

  // Errors carry file and line context.
  try {
    hn::parse_config_text("[grid]\nproblems = sphere-2\nbogus_key = 1\n", "x.ini");
    CHECK(false);
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("x.ini:3") != std::string::npos);
  }
  CHECK_THROWS(hn::parse_config_text("[grid]\nmethods = ei\n", "y.ini"));
  CHECK_THROWS(hn::parse_config_text("key_outside_section = 2\n", "z.ini"));
}

TEST_CASE("trace csv round trip") {
  TempDir tmp("ogpit_trace_rt");
  hn::LoadedTrace t = make_trace("p-1", "ei", 3, {{2, 10.0}, {4, 5.0}});
  t.noise_sd = 0.25;
  t.rows[1].accepted = true;
  t.rows[1].reps = 7;
  t.rows[1].radius = 0.125;
  t.rows[1].best_regret = 5.0;
  const std::string path = (tmp.path / "t.csv").string();
  hn::write_trace_csv(path, t);
  const hn::LoadedTrace back = hn::read_trace_csv(path);
  CHECK(back.problem == t.problem);
  CHECK(back.noise_sd == t.noise_sd);
  CHECK(back.seed == 3);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[1].accepted);
  CHECK(back.rows[1].reps == 7);
  CHECK(back.rows[1].radius == 0.125);
  CHECK(back.rows[1].center_value_true == 5.0);
}

TEST_CASE("run_grid determinism and idempotence") {
  TempDir tmp("ogpit_grid");
  const hn::GridConfig cfg = hn::parse_config_text(kSmallConfig, "test.ini");

  const auto r1 = hn::run_grid(cfg, tmp.path.string(), false, 1);
  REQUIRE(r1.size() == 2);
  for (const auto& r : r1) CHECK(r.status == "done");
  const std::string f0 = (tmp.path / r1[0].file).string();
  const std::string f1 = (tmp.path / r1[1].file).string();
  CHECK(f0 != f1);
  const std::string bytes0 = slurp(f0);
  const std::string bytes1 = slurp(f1);
  CHECK(bytes0 != bytes1);  // distinct seeds give distinct traces

  // Re-run without force: cached, bytes untouched.
  const auto r2 = hn::run_grid(cfg, tmp.path.string(), false, 1);
  for (const auto& r : r2) CHECK(r.status == "cached");
  CHECK(slurp(f0) == bytes0);

  // Re-run with force: recomputed bytes are identical.
  const auto r3 = hn::run_grid(cfg, tmp.path.string(), true, 2);
  for (const auto& r : r3) CHECK(r.status == "done");
  CHECK(slurp(f0) == bytes0);
  CHECK(slurp(f1) == bytes1);

  // Manifest lists every cell.
  const std::string manifest = slurp(tmp.path / "manifest.csv");
  CHECK(manifest.find("sphere-2") != std::string::npos);
  CHECK(std::count(manifest.begin(), manifest.end(), '\n') == 3);  // header + 2
}

TEST_CASE("grid cell counting") {
  TempDir tmp("ogpit_grid12");
  hn::GridConfig cfg = hn::parse_config_text(kSmallConfig, "test.ini");
  cfg.problems = {"sphere-2", "branin-2"};
  cfg.noise_sds = {0.0, 0.01};
  cfg.methods = {"ei"};
  cfg.replications = 3;
  cfg.n_max = 6;  // just past the initial design
  const auto results = hn::run_grid(cfg, tmp.path.string(), false, 2);
  CHECK(results.size() == 12);
  int files = 0;
  for (const auto& entry : fs::directory_iterator(tmp.path)) {
    if (entry.path().filename() != "manifest.csv") ++files;
  }
  CHECK(files == 12);
}

TEST_CASE("data profile fixture") {
  // Hand-computed three-trace fixture, gate 0.5.
  // f_L: instance (p,0,0) -> 1.0 (m's own best), (q,0,0) -> 1.0 (via m2).
  std::vector<hn::LoadedTrace> traces;
  traces.push_back(make_trace("p", "m", 0, {{2, 10.0}, {4, 5.0}, {6, 1.0}}));
  traces.push_back(make_trace("q", "m", 0, {{2, 3.0}, {4, 2.9}, {6, 2.5}}));
  traces.push_back(make_trace("q", "m2", 0, {{2, 3.0}, {4, 1.0}}));

  const auto curves = hn::data_profiles_by_method(traces, 0.5);
  REQUIRE(curves.count("m") == 1);
  REQUIRE(curves.count("m2") == 1);

  // m: p solved at n=4 (5 <= 1 + 0.5*9), alpha 2; q never within gate.
  const hn::ProfileCurve& cm = curves.at("m");
  REQUIRE(cm.alpha.size() == 1);
  CHECK(cm.alpha[0] == 2.0);
  CHECK(cm.fraction[0] == 0.5);

  // m2: its only instance solved at n=4, alpha 2.
  const hn::ProfileCurve& cm2 = curves.at("m2");
  REQUIRE(cm2.alpha.size() == 1);
  CHECK(cm2.alpha[0] == 2.0);
  CHECK(cm2.fraction[0] == 1.0);

  // Single-solver view over all traces: both instances solved at alpha 2.
  const hn::ProfileCurve all = hn::data_profile(traces, 0.5);
  REQUIRE(all.alpha.size() == 1);
  CHECK(all.alpha[0] == 2.0);
  CHECK(all.fraction[0] == 1.0);
}

TEST_CASE("data profile edge cases") {
  SUBCASE("zero initial gap counts as solved at alpha zero") {
    std::vector<hn::LoadedTrace> traces;
    traces.push_back(make_trace("p", "m", 0, {{2, 1.0}, {4, 1.0}}));
    const auto curve = hn::data_profile(traces, 1e-3);
    REQUIRE(curve.alpha.size() == 1);
    CHECK(curve.alpha[0] == 0.0);
    CHECK(curve.fraction[0] == 1.0);
  }

  SUBCASE("curves are monotone within [0,1]") {
    Rng rng(99);
    std::vector<hn::LoadedTrace> traces;
    for (int seed = 0; seed < 8; ++seed) {
      std::vector<std::pair<long, double>> rows;
      double v = 10.0;
      for (long n = 2; n <= 20; n += 2) {
        v -= rng.uniform() * 2.0;
        rows.push_back({n, v});
      }
      traces.push_back(make_trace("p", "m", seed, rows));
    }
    const auto curve = hn::data_profile(traces, 0.3);
    double prev = 0.0;
    for (double f : curve.fraction) {
      CHECK(f >= prev);
      CHECK(f <= 1.0);
      prev = f;
    }
  }
}

TEST_CASE("cost curves") {
  SUBCASE("single trace reproduces itself") {
    std::vector<hn::LoadedTrace> traces;
    traces.push_back(make_trace("p", "m", 0, {{2, 10.0}, {4, 5.0}, {6, 1.0}}));
    const auto curves = hn::cost_curves(traces);
    const auto& c = curves.at("m");
    REQUIRE(c.size() == 3);
    CHECK(c[0].mean_regret == 10.0);
    CHECK(c[1].mean_regret == 5.0);
    CHECK(c[2].mean_regret == 1.0);
    CHECK(c[1].q10 == c[1].q90);  // single trace: zero-width band
  }

  SUBCASE("two identical traces have a zero-width band") {
    std::vector<hn::LoadedTrace> traces;
    traces.push_back(make_trace("p", "m", 0, {{2, 4.0}, {4, 2.0}}));
    traces.push_back(make_trace("p", "m", 1, {{2, 4.0}, {4, 2.0}}));
    const auto curves = hn::cost_curves(traces);
    for (const auto& pt : curves.at("m")) {
      CHECK(pt.q10 == pt.q90);
      CHECK(pt.q10 == pt.mean_regret);
    }
  }

  SUBCASE("alignment carries the last value forward") {
    std::vector<hn::LoadedTrace> traces;
    traces.push_back(make_trace("p", "m", 0, {{2, 4.0}, {6, 2.0}}));
    traces.push_back(make_trace("p", "m", 1, {{4, 3.0}}));
    const auto curves = hn::cost_curves(traces);
    const auto& c = curves.at("m");
    REQUIRE(c.size() == 3);  // grid {2, 4, 6}
    CHECK(c[1].cost == 4.0);
    // Trace 0 still sits at its cost-2 value at cost 4.
    CHECK(c[1].mean_regret == doctest::Approx(0.5 * (4.0 + 3.0)));
  }
}

TEST_CASE("fixed replication contract") {
  TempDir tmp("ogpit_fixed");
  hn::GridConfig cfg = hn::parse_config_text(kSmallConfig, "test.ini");
  cfg.methods = {"fixed3"};
  cfg.n_max = 30;
  const auto results = hn::run_grid(cfg, tmp.path.string(), false, 1);
  REQUIRE(results.size() == 2);
  const hn::LoadedTrace t = hn::read_trace_csv((tmp.path / results[0].file).string());
  REQUIRE(t.rows.size() >= 2);
  for (std::size_t i = 1; i < t.rows.size(); ++i) CHECK(t.rows[i].reps == 3);
}
