#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rbpf/harness.hpp"
#include "rbpf/scenario_io.hpp"
#include "rbpf/text_io.hpp"

namespace fs = std::filesystem;
using namespace rbpf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDiverged = 2;

struct Options {
  std::string scenario;
  std::string filter = "rbpf";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::optional<int> particles;
  std::vector<std::string> reports;
  std::vector<int> counts{250, 500, 1000, 2000};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int epoch = 0;
  double extent = 1.0;
  double spacing = 0.01;
  std::vector<double> center;
};

bool is_config_file(const std::string& path) { return !fs::is_directory(path); }

RunConfig load_run_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : read_run_config(o.config);
  if (o.seed) cfg.filter.seed = *o.seed;
  if (o.particles) cfg.filter.num_particles = *o.particles;
  cfg.filter.validate();
  return cfg;
}

// A scenario config is regenerated with the run seed; a scenario directory is used as written.
Scenario scenario_for(const std::string& path, std::optional<std::uint64_t> seed) {
  if (!is_config_file(path)) return read_scenario(path);
  ScenarioConfig sc = read_scenario_config(path);
  if (seed) sc.seed = *seed;
  return generate_scenario(sc);
}

int cmd_simulate(const Options& o) {
  ScenarioConfig cfg = read_scenario_config(o.scenario);
  if (o.seed) cfg.seed = *o.seed;
  const Scenario sc = generate_scenario(cfg);
  write_scenario(o.out_dir, sc, cfg);
  std::cout << "wrote " << sc.epochs.size() << " epochs to " << o.out_dir << "\n";
  return kExitOk;
}

int cmd_run(const Options& o) {
  const FilterKind kind = parse_filter_kind(o.filter);
  const RunConfig cfg = load_run_config(o);
  const Scenario sc = scenario_for(o.scenario, o.seed);
  const RunReport report = run_filter(sc, kind, cfg);
  write_report(o.out_dir, to_string(kind), report);
  const auto& s = report.summary;
  std::cout << to_string(kind) << ": " << s.num_epochs << " epochs, position rmse "
            << format_double(s.position.rmse) << " m, under 0.3 m "
            << format_double(s.position.fraction_under) << ", velocity rmse "
            << format_double(s.velocity.rmse) << " m/s, under 0.1 m/s "
            << format_double(s.velocity.fraction_under) << "\n";
  if (s.diverged) {
    std::cerr << "diverged at epoch " << s.diverged_epoch << "; partial report written\n";
    return kExitDiverged;
  }
  return kExitOk;
}

int cmd_compare(const Options& o) {
  const ReportErrors a = read_report_errors(o.reports.at(0));
  const ReportErrors b = read_report_errors(o.reports.at(1));
  const Comparison c = compare_reports(a, b);
  write_text_file(fs::path(o.out_dir) / "compare_cdf.csv", c.cdf_csv);
  write_text_file(fs::path(o.out_dir) / "compare_summary.csv", c.summary_csv);
  std::cout << c.summary_csv;
  return kExitOk;
}

int cmd_sweep(const Options& o) {
  const RunConfig cfg = load_run_config(o);
  const std::string path = o.scenario;
  const bool from_config = is_config_file(path);
  std::optional<Scenario> fixed;
  if (!from_config) fixed = read_scenario(path);
  const SweepReport r = particle_sweep(
      [&](std::uint64_t seed) { return fixed ? *fixed : scenario_for(path, seed); }, o.counts,
      o.seeds, cfg);
  write_text_file(fs::path(o.out_dir) / "sweep.csv", r.csv());
  write_text_file(fs::path(o.out_dir) / "sweep_cells.csv", r.cells_csv());
  std::cout << r.csv();
  return kExitOk;
}

int cmd_gridmap(const Options& o) {
  const RunConfig cfg = load_run_config(o);
  const Scenario sc = scenario_for(o.scenario, o.seed);
  EnuVector center;
  if (o.center.empty()) {
    const TruthEpoch* t = nullptr;
    for (const auto& e : sc.truth.epochs) {
      if (e.epoch_index == o.epoch) t = &e;
    }
    if (!t) throw std::invalid_argument("scenario has no epoch " + std::to_string(o.epoch));
    center = sc.frame.to_enu(t->position);
  } else {
    center = {o.center[0], o.center[1], o.center[2]};
  }
  const auto cells = grid_likelihood_map(sc, o.epoch, center, o.extent, o.spacing,
                                         cfg.filter.likelihood());
  write_text_file(fs::path(o.out_dir) / "gridmap.csv", grid_csv(cells));
  std::cout << "wrote " << cells.size() << " cells\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rao-Blackwellized particle filter for carrier-phase GNSS positioning"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool needs_scenario) {
    auto* opt = sub->add_option("--scenario", o.scenario,
                                "scenario directory or scenario config JSON");
    if (needs_scenario) opt->required();
    sub->add_option("--config", o.config, "filter config JSON");
    sub->add_option("--seed", o.seed, "run seed");
    sub->add_option("--out-dir", o.out_dir, "output directory");
  };

  auto* simulate = app.add_subcommand("simulate", "generate a scenario directory from a config");
  add_common(simulate, true);

  auto* run = app.add_subcommand("run", "run one estimator over a scenario");
  add_common(run, true);
  run->add_option("--filter", o.filter, "rbpf | conventional_pf | ls_fix");
  run->add_option("--particles", o.particles, "number of particles");

  auto* compare = app.add_subcommand("compare", "compare two per-epoch reports");
  compare->add_option("reports", o.reports, "two *_epochs.csv files")->required()->expected(2);
  compare->add_option("--out-dir", o.out_dir, "output directory");

  auto* sweep = app.add_subcommand("sweep", "particle-count sweep over seeds");
  add_common(sweep, true);
  sweep->add_option("--counts", o.counts, "particle counts")->delimiter(',');
  sweep->add_option("--seeds", o.seeds, "seeds")->delimiter(',');

  auto* gridmap = app.add_subcommand("gridmap", "likelihood field on a horizontal grid");
  add_common(gridmap, true);
  gridmap->add_option("--epoch", o.epoch, "epoch index");
  gridmap->add_option("--extent", o.extent, "grid width [m]");
  gridmap->add_option("--spacing", o.spacing, "grid spacing [m]");
  gridmap->add_option("--center", o.center, "grid center E,N,U [m]; default truth")
      ->expected(3)
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(o);
    if (*run) return cmd_run(o);
    if (*compare) return cmd_compare(o);
    if (*sweep) return cmd_sweep(o);
    if (*gridmap) return cmd_gridmap(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
