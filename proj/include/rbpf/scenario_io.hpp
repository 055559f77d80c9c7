#pragma once

#include <filesystem>

#include <json.hpp>

#include "rbpf/filter_types.hpp"
#include "rbpf/simulator.hpp"

namespace rbpf {

// Scenario directory layout written by `simulate`:
//   meta.json              base station, wavelength, rate, epoch count, config echo
//   observations.csv       kObservationHeader; one reference row (flags & 8) per epoch
//   truth.csv              kTruthHeader
//   truth_satellites.csv   kTruthSatelliteHeader
inline constexpr const char* kObservationHeader =
    "epoch,time_s,sat_id,az_rad,el_rad,sat_x,sat_y,sat_z,pr_dd_m,cp_dd_cyc,dop_dd_ms,flags";
inline constexpr const char* kTruthHeader = "epoch,time_s,x,y,z,vx,vy,vz";
inline constexpr const char* kTruthSatelliteHeader = "epoch,sat_id,ambiguity_cyc,nlos,visible";

enum ObservationFlags : int {
  kHasPseudorange = 1,
  kHasCarrier = 2,
  kHasDoppler = 4,
  kReferenceSatellite = 8,
};

ScenarioConfig scenario_config_from_json(const nlohmann::json& j);
nlohmann::json scenario_config_to_json(const ScenarioConfig& cfg);
ScenarioConfig read_scenario_config(const std::filesystem::path& path);

void write_scenario(const std::filesystem::path& dir, const Scenario& sc,
                    const ScenarioConfig& cfg);
Scenario read_scenario(const std::filesystem::path& dir);

/// A scenario directory is read as-is; a .json file is treated as a
/// ScenarioConfig and generated in memory.
Scenario load_scenario(const std::filesystem::path& path);

std::string observations_csv(const Scenario& sc);
std::string truth_csv(const Scenario& sc);

/// Filter settings; absent keys keep the defaults, unknown keys are rejected.
FilterConfig filter_config_from_json(const nlohmann::json& j, FilterConfig base = {});
nlohmann::json filter_config_to_json(const FilterConfig& cfg);

}  // namespace rbpf
