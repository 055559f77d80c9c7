#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rbpf/geo.hpp"
#include "rbpf/observation.hpp"

namespace rbpf {

inline constexpr double kGpsL1Wavelength = 0.19029367279836487;  // c / 1575.42 MHz [m]

struct SatelliteSpec {
  int sat_id = 0;
  double azimuth_deg = 0.0;
  double elevation_deg = 45.0;
  double orbit_radius_m = 26'560'000.0;
};

struct TrajectorySpec {
  enum class Kind { kCircle, kPolyline };
  Kind kind = Kind::kCircle;
  double speed_mps = 5.0;
  // circle
  EnuVector center_enu = EnuVector::Zero();
  double radius_m = 500.0;
  double start_angle_deg = 0.0;  // measured from east towards north
  bool counterclockwise = true;
  // polyline; the rover stops at the last waypoint unless `closed`
  std::vector<EnuVector> waypoints_enu;
  bool closed = false;
};

struct SimulationNoise {
  double sigma_rho_m = 0.5;
  double sigma_phi_cycles = 0.01;
  double sigma_doppler_mps = 0.03;
};

/// Inclusive epoch window.
struct EpochWindow {
  int start_epoch = 0;
  int end_epoch = 0;
  bool contains(int e) const { return e >= start_epoch && e <= end_epoch; }
};

struct NlosEvent {
  int sat_id = 0;
  EpochWindow window;
  double pseudorange_bias_m = 20.0;
  double carrier_bias_cycles = 0.25;
  double doppler_bias_mps = 0.5;
};

struct CycleSlip {
  int sat_id = 0;
  int epoch = 0;
};

struct ScenarioConfig {
  static constexpr int kSchemaVersion = 1;

  int schema_version = kSchemaVersion;
  double duration_s = 600.0;
  double rate_hz = 1.0;
  double wavelength_m = kGpsL1Wavelength;
  double base_lat_deg = 35.17;
  double base_lon_deg = 136.88;
  double base_height_m = 50.0;
  std::vector<SatelliteSpec> constellation;
  TrajectorySpec trajectory;
  SimulationNoise noise;
  std::vector<NlosEvent> nlos_events;
  std::vector<EpochWindow> blockage_windows;
  std::vector<CycleSlip> cycle_slips;
  std::int64_t max_ambiguity = 100000;  // |N^k| bound for the random integers
  std::uint64_t seed = 1;

  int num_epochs() const;
  /// Throws std::invalid_argument describing the first problem found.
  void validate() const;
};

struct TruthEpoch {
  int epoch_index = 0;
  double time_s = 0.0;
  EcefPosition position = EcefPosition::Zero();
  Vec3 velocity = Vec3::Zero();  // ECEF [m/s]
};

struct SatelliteTruth {
  int epoch_index = 0;
  int sat_id = 0;
  std::int64_t ambiguity = 0;  // integer DD ambiguity [cycles]
  bool nlos = false;
  bool visible = true;
};

struct ScenarioTruth {
  std::vector<TruthEpoch> epochs;
  std::vector<SatelliteTruth> satellites;  // epoch-major, non-reference satellites
  int reference_sat = 0;
};

struct Scenario {
  LocalFrame frame;  // anchored at the base station
  double wavelength_m = kGpsL1Wavelength;
  double rate_hz = 1.0;
  std::vector<EpochObservation> epochs;
  ScenarioTruth truth;

  const EcefPosition& base() const { return frame.anchor(); }
};

/// Deterministic scenario synthesis; throws std::invalid_argument on a bad config.
Scenario generate_scenario(const ScenarioConfig& cfg);

/// True rover state at time t.
TruthEpoch trajectory_state(const TrajectorySpec& spec, const LocalFrame& frame, double t);

/// Gauss-Newton fix on DD pseudoranges (at most 20 iterations, stops when the
/// step drops below 1e-4 m). Needs three or more pseudoranges.
std::optional<EcefPosition> pseudorange_ls_fix(const EpochObservation& epoch,
                                               const EcefPosition& base,
                                               const EcefPosition& initial);

}  // namespace rbpf
