#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "ogpit/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ogpit: GP trust-region optimization of stochastic objectives"};
  app.require_subcommand(1);

  std::string config_path, out_dir, traces_dir, out_csv;
  bool force = false;
  int jobs = 0;
  double gate = 1e-3;

  auto* run = app.add_subcommand("run", "run an experiment grid from a config file");
  run->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory for trace CSVs")->required();
  run->add_flag("--force", force, "recompute cells whose trace files already exist");
  run->add_option("--jobs", jobs, "max concurrent grid cells (default: all cores)");

  auto* profile = app.add_subcommand("profile", "data profiles from a trace directory");
  profile->add_option("--gate", gate, "precision gate tau")->required();
  profile->add_option("--traces", traces_dir, "trace directory")->required()->check(CLI::ExistingDirectory);
  profile->add_option("--out", out_csv, "output CSV path")->required();

  auto* costcurve = app.add_subcommand("costcurve", "regret-vs-cost aggregation per method");
  costcurve->add_option("--traces", traces_dir, "trace directory")->required()->check(CLI::ExistingDirectory);
  costcurve->add_option("--out", out_csv, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const ogpit::hn::GridConfig cfg = ogpit::hn::parse_config_file(config_path);
      const auto results = ogpit::hn::run_grid(cfg, out_dir, force, jobs);
      int done = 0, cached = 0, failed = 0;
      for (const auto& r : results) {
        if (r.status == "done") {
          ++done;
        } else if (r.status == "cached") {
          ++cached;
        } else {
          ++failed;
          std::cerr << r.file << ": " << r.status << "\n";
        }
      }
      std::printf("%d cells done, %d cached, %d failed\n", done, cached, failed);
      return failed == 0 ? 0 : 1;
    }
    if (profile->parsed()) {
      const auto traces = ogpit::hn::load_traces_from_dir(traces_dir);
      const auto curves = ogpit::hn::data_profiles_by_method(traces, gate);
      ogpit::hn::write_profile_csv(out_csv, curves);
      std::printf("wrote %zu profile curves to %s\n", curves.size(), out_csv.c_str());
      return 0;
    }
    if (costcurve->parsed()) {
      const auto traces = ogpit::hn::load_traces_from_dir(traces_dir);
      const auto curves = ogpit::hn::cost_curves(traces);
      ogpit::hn::write_cost_curves_csv(out_csv, curves);
      std::printf("wrote %zu cost curves to %s\n", curves.size(), out_csv.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
