#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rbpf/filter_types.hpp"
#include "rbpf/simulator.hpp"

namespace rbpf {

enum class FilterKind { kRbpf, kConventionalPf, kLsFix };

std::string to_string(FilterKind kind);
/// Accepts "rbpf", "conventional_pf" and "ls_fix"; throws ParseError otherwise.
FilterKind parse_filter_kind(const std::string& name);

enum class InitMode {
  kTruth,   // particles scattered about the true first-epoch position
  kLsFix,   // particles scattered about a pseudorange fix of the first epoch
};

struct RunConfig {
  FilterConfig filter;
  InitMode init = InitMode::kTruth;
  double prior_sigma_m = 0.1;
};

/// Filter keys plus "init" ("truth" | "ls_fix") and "prior_sigma_m".
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig read_run_config(const std::filesystem::path& path);

inline constexpr double kPositionThreshold = 0.3;  // [m]
inline constexpr double kVelocityThreshold = 0.1;  // [m/s]

struct EpochRecord {
  int epoch_index = 0;
  double time_s = 0.0;
  EnuVector truth_position = EnuVector::Zero();
  EnuVector truth_velocity = EnuVector::Zero();
  EnuVector position = EnuVector::Zero();
  EnuVector velocity = EnuVector::Zero();
  double position_error = 0.0;  // 3D [m]
  double velocity_error = 0.0;  // 3D [m/s]
  bool position_available = false;
  bool velocity_available = false;
  bool blocked = false;         // no observations this epoch
  int num_sats = 0;
  double ess = 0.0;
  double excluded = 0.0;        // mean NLOS-gate exclusions per particle
  double spread = 0.0;          // [m]
  double weight_sum_error = 0.0;  // |sum of normalized weights - 1|
  bool covariance_ok = true;    // every particle covariance is SPD
  bool resampled = false;
};

struct CdfPoint {
  double error = 0.0;
  double fraction = 0.0;
};

struct ErrorSummary {
  int count = 0;
  double rmse = 0.0;
  double mean = 0.0;
  double max = 0.0;
  double threshold = 0.0;
  double fraction_under = 0.0;  // of `count` epochs
  std::vector<std::pair<double, double>> percentiles;  // (percent, error)
  std::vector<CdfPoint> cdf;
};

/// Error statistics; the CDF holds up to 100 evenly spaced quantiles and ends at 1.
ErrorSummary summarize_errors(std::vector<double> errors, double threshold);

struct RunSummary {
  std::string filter;
  std::uint64_t seed = 0;
  int num_particles = 0;
  int num_epochs = 0;        // processed epochs
  int scenario_epochs = 0;
  ErrorSummary position;
  ErrorSummary velocity;
  double position_availability = 0.0;
  double velocity_availability = 0.0;
  bool diverged = false;
  int diverged_epoch = -1;
  int singular_updates = 0;
  double max_weight_sum_error = 0.0;
  bool covariances_ok = true;
  bool blockage_spread_grows = true;  // spread rises on every blocked epoch
};

struct RunReport {
  std::vector<EpochRecord> epochs;
  RunSummary summary;
};

/// Streams every epoch of the scenario through the estimator. Stops early,
/// flagging `diverged`, once the particle spread exceeds divergence_spread_m.
RunReport run_filter(const Scenario& sc, FilterKind kind, const RunConfig& cfg);

std::string report_csv(const RunReport& report);
nlohmann::json summary_json(const RunSummary& summary);
/// Writes <stem>_epochs.csv and <stem>_summary.json.
void write_report(const std::filesystem::path& dir, const std::string& stem,
                  const RunReport& report);

/// Per-epoch error columns read back from a report CSV.
struct ReportErrors {
  std::vector<int> epochs;
  std::vector<double> position_error;
  std::vector<double> velocity_error;
  std::vector<bool> position_available;
  std::vector<bool> velocity_available;
};
ReportErrors read_report_errors(const std::filesystem::path& csv);

struct Comparison {
  std::string cdf_csv;      // metric,error,cdf_a,cdf_b,delta
  std::string summary_csv;  // metric,a,b,delta
};
/// Throws std::invalid_argument naming the first epoch where the reports differ.
Comparison compare_reports(const ReportErrors& a, const ReportErrors& b);

struct SweepCell {
  FilterKind filter = FilterKind::kRbpf;
  int num_particles = 0;
  std::uint64_t seed = 0;
  std::optional<RunSummary> summary;
  std::string error;
};

struct SweepRow {
  FilterKind filter = FilterKind::kRbpf;
  int num_particles = 0;
  int runs = 0;
  double mean_fraction = 0.0;  // position error < 0.3 m
  double std_fraction = 0.0;
};

struct SweepReport {
  std::vector<SweepCell> cells;
  std::vector<SweepRow> rows;
  std::string cells_csv() const;
  std::string csv() const;
};

/// Runs {rbpf, conventional_pf} x counts x seeds. `scenario_for_seed` supplies
/// the scenario of each seed; failed cells are recorded and skipped.
SweepReport particle_sweep(const std::function<Scenario(std::uint64_t)>& scenario_for_seed,
                           const std::vector<int>& counts, const std::vector<std::uint64_t>& seeds,
                           const RunConfig& cfg);

inline constexpr long long kMaxGridCells = 1'000'000;

struct GridCell {
  double east = 0.0;   // offset from the grid center [m]
  double north = 0.0;
  double log_likelihood = 0.0;
};

/// Likelihood on a horizontal (2h+1)^2 grid, h = round(extent / (2 spacing)),
/// centered at `center` (ENU). Unusable epochs yield -inf everywhere.
std::vector<GridCell> grid_likelihood_map(const Scenario& sc, int epoch_index,
                                          const EnuVector& center, double extent_m,
                                          double spacing_m, const LikelihoodOptions& opts);
std::string grid_csv(const std::vector<GridCell>& cells);

}  // namespace rbpf
