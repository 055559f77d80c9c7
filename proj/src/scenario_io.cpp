#include "rbpf/scenario_io.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "rbpf/text_io.hpp"

namespace rbpf {

using nlohmann::json;

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ParseError(where_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ParseError(where_ + "." + key + ": " + e.what());
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }
  const std::string& where() const { return where_; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ParseError(where_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Vec3 vec3_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ParseError(where + ": expected [x, y, z]");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  } catch (const json::exception& e) {
    throw ParseError(where + ": " + e.what());
  }
}

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

EpochWindow window_from(ObjectReader& r) {
  EpochWindow w;
  r.get("start_epoch", w.start_epoch);
  r.get("end_epoch", w.end_epoch);
  return w;
}

// Covariance given as a variance (isotropic), three diagonal variances, or a full 3x3 matrix.
Mat3 covariance_from_json(const json& j, const std::string& where) {
  try {
    if (j.is_number()) return j.get<double>() * Mat3::Identity();
    if (j.is_array() && j.size() == 3 && j[0].is_number()) {
      return vec3_from_json(j, where).asDiagonal();
    }
    if (j.is_array() && j.size() == 3) {
      Mat3 m;
      for (int r = 0; r < 3; ++r) m.row(r) = vec3_from_json(j[r], where).transpose();
      return m;
    }
  } catch (const json::exception& e) {
    throw ParseError(where + ": " + e.what());
  }
  throw ParseError(where + ": expected a variance, 3 variances or a 3x3 matrix");
}

json covariance_to_json(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(vec3_to_json(m.row(r).transpose()));
  return rows;
}

}  // namespace

ScenarioConfig scenario_config_from_json(const json& j) {
  ScenarioConfig cfg;
  ObjectReader r(j, "scenario");
  r.get("schema_version", cfg.schema_version);
  r.get("duration_s", cfg.duration_s);
  r.get("rate_hz", cfg.rate_hz);
  r.get("wavelength_m", cfg.wavelength_m);
  r.get("max_ambiguity", cfg.max_ambiguity);
  r.get("seed", cfg.seed);
  if (r.has("base")) {
    ObjectReader b(r.at("base"), "scenario.base");
    b.get("lat_deg", cfg.base_lat_deg);
    b.get("lon_deg", cfg.base_lon_deg);
    b.get("height_m", cfg.base_height_m);
    b.finish();
  }
  if (r.has("constellation")) {
    const json& arr = r.at("constellation");
    if (!arr.is_array()) throw ParseError("scenario.constellation: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      ObjectReader s(arr[i], "scenario.constellation[" + std::to_string(i) + "]");
      SatelliteSpec spec;
      s.get("sat_id", spec.sat_id);
      s.get("azimuth_deg", spec.azimuth_deg);
      s.get("elevation_deg", spec.elevation_deg);
      s.get("orbit_radius_m", spec.orbit_radius_m);
      s.finish();
      cfg.constellation.push_back(spec);
    }
  }
  if (r.has("trajectory")) {
    ObjectReader t(r.at("trajectory"), "scenario.trajectory");
    auto& tr = cfg.trajectory;
    std::string type = "circle";
    t.get("type", type);
    if (type == "circle") {
      tr.kind = TrajectorySpec::Kind::kCircle;
    } else if (type == "polyline") {
      tr.kind = TrajectorySpec::Kind::kPolyline;
    } else {
      throw ParseError("scenario.trajectory.type: expected 'circle' or 'polyline'");
    }
    t.get("speed_mps", tr.speed_mps);
    if (t.has("center_enu")) tr.center_enu = vec3_from_json(t.at("center_enu"), t.where());
    t.get("radius_m", tr.radius_m);
    t.get("start_angle_deg", tr.start_angle_deg);
    t.get("counterclockwise", tr.counterclockwise);
    t.get("closed", tr.closed);
    if (t.has("waypoints_enu")) {
      const json& wp = t.at("waypoints_enu");
      if (!wp.is_array()) throw ParseError("scenario.trajectory.waypoints_enu: expected an array");
      for (const auto& w : wp) tr.waypoints_enu.push_back(vec3_from_json(w, t.where()));
    }
    t.finish();
  }
  if (r.has("noise")) {
    ObjectReader n(r.at("noise"), "scenario.noise");
    n.get("sigma_rho_sim", cfg.noise.sigma_rho_m);
    n.get("sigma_phi_sim", cfg.noise.sigma_phi_cycles);
    n.get("sigma_doppler_sim", cfg.noise.sigma_doppler_mps);
    n.finish();
  }
  if (r.has("nlos_events")) {
    const json& arr = r.at("nlos_events");
    if (!arr.is_array()) throw ParseError("scenario.nlos_events: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      ObjectReader e(arr[i], "scenario.nlos_events[" + std::to_string(i) + "]");
      NlosEvent ev;
      e.get("sat_id", ev.sat_id);
      ev.window = window_from(e);
      e.get("pseudorange_bias_m", ev.pseudorange_bias_m);
      e.get("carrier_bias_cycles", ev.carrier_bias_cycles);
      e.get("doppler_bias_mps", ev.doppler_bias_mps);
      e.finish();
      cfg.nlos_events.push_back(ev);
    }
  }
  if (r.has("blockage_windows")) {
    const json& arr = r.at("blockage_windows");
    if (!arr.is_array()) throw ParseError("scenario.blockage_windows: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      ObjectReader w(arr[i], "scenario.blockage_windows[" + std::to_string(i) + "]");
      cfg.blockage_windows.push_back(window_from(w));
      w.finish();
    }
  }
  if (r.has("cycle_slips")) {
    const json& arr = r.at("cycle_slips");
    if (!arr.is_array()) throw ParseError("scenario.cycle_slips: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      ObjectReader c(arr[i], "scenario.cycle_slips[" + std::to_string(i) + "]");
      CycleSlip slip;
      c.get("sat_id", slip.sat_id);
      c.get("epoch", slip.epoch);
      c.finish();
      cfg.cycle_slips.push_back(slip);
    }
  }
  r.finish();
  return cfg;
}

json scenario_config_to_json(const ScenarioConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["duration_s"] = cfg.duration_s;
  j["rate_hz"] = cfg.rate_hz;
  j["wavelength_m"] = cfg.wavelength_m;
  j["base"] = {{"lat_deg", cfg.base_lat_deg},
               {"lon_deg", cfg.base_lon_deg},
               {"height_m", cfg.base_height_m}};
  j["constellation"] = json::array();
  for (const auto& s : cfg.constellation) {
    j["constellation"].push_back({{"sat_id", s.sat_id},
                                  {"azimuth_deg", s.azimuth_deg},
                                  {"elevation_deg", s.elevation_deg},
                                  {"orbit_radius_m", s.orbit_radius_m}});
  }
  const auto& t = cfg.trajectory;
  json tj;
  tj["type"] = t.kind == TrajectorySpec::Kind::kCircle ? "circle" : "polyline";
  tj["speed_mps"] = t.speed_mps;
  if (t.kind == TrajectorySpec::Kind::kCircle) {
    tj["center_enu"] = vec3_to_json(t.center_enu);
    tj["radius_m"] = t.radius_m;
    tj["start_angle_deg"] = t.start_angle_deg;
    tj["counterclockwise"] = t.counterclockwise;
  } else {
    tj["waypoints_enu"] = json::array();
    for (const auto& w : t.waypoints_enu) tj["waypoints_enu"].push_back(vec3_to_json(w));
    tj["closed"] = t.closed;
  }
  j["trajectory"] = tj;
  j["noise"] = {{"sigma_rho_sim", cfg.noise.sigma_rho_m},
                {"sigma_phi_sim", cfg.noise.sigma_phi_cycles},
                {"sigma_doppler_sim", cfg.noise.sigma_doppler_mps}};
  j["nlos_events"] = json::array();
  for (const auto& e : cfg.nlos_events) {
    j["nlos_events"].push_back({{"sat_id", e.sat_id},
                                {"start_epoch", e.window.start_epoch},
                                {"end_epoch", e.window.end_epoch},
                                {"pseudorange_bias_m", e.pseudorange_bias_m},
                                {"carrier_bias_cycles", e.carrier_bias_cycles},
                                {"doppler_bias_mps", e.doppler_bias_mps}});
  }
  j["blockage_windows"] = json::array();
  for (const auto& w : cfg.blockage_windows) {
    j["blockage_windows"].push_back({{"start_epoch", w.start_epoch}, {"end_epoch", w.end_epoch}});
  }
  j["cycle_slips"] = json::array();
  for (const auto& c : cfg.cycle_slips) {
    j["cycle_slips"].push_back({{"sat_id", c.sat_id}, {"epoch", c.epoch}});
  }
  j["max_ambiguity"] = cfg.max_ambiguity;
  j["seed"] = cfg.seed;
  return j;
}

ScenarioConfig read_scenario_config(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  try {
    return scenario_config_from_json(j);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string observations_csv(const Scenario& sc) {
  std::string out = std::string(kObservationHeader) + "\n";
  auto row = [&](const EpochObservation& e, const SatelliteGeometry& g, const std::string& pr,
                 const std::string& cp, const std::string& dop, int flags) {
    out += std::to_string(e.epoch_index) + "," + format_double(e.time_s) + "," +
           std::to_string(g.sat_id) + "," + format_double(g.azimuth) + "," +
           format_double(g.elevation) + "," + format_double(g.position.x()) + "," +
           format_double(g.position.y()) + "," + format_double(g.position.z()) + "," + pr + "," +
           cp + "," + dop + "," + std::to_string(flags) + "\n";
  };
  for (const auto& e : sc.epochs) {
    row(e, e.reference, "", "", "", kReferenceSatellite);
    for (const auto& s : e.satellites) {
      const auto& o = s.obs;
      const int flags = (o.has_pseudorange ? kHasPseudorange : 0) |
                        (o.has_carrier ? kHasCarrier : 0) | (o.has_doppler ? kHasDoppler : 0);
      row(e, s.geometry, o.has_pseudorange ? format_double(o.pseudorange_m) : "",
          o.has_carrier ? format_carrier(o.carrier) : "",
          o.has_doppler ? format_double(o.doppler_mps) : "", flags);
    }
  }
  return out;
}

std::string truth_csv(const Scenario& sc) {
  std::string out = std::string(kTruthHeader) + "\n";
  for (const auto& t : sc.truth.epochs) {
    out += std::to_string(t.epoch_index) + "," + format_double(t.time_s) + "," +
           format_double(t.position.x()) + "," + format_double(t.position.y()) + "," +
           format_double(t.position.z()) + "," + format_double(t.velocity.x()) + "," +
           format_double(t.velocity.y()) + "," + format_double(t.velocity.z()) + "\n";
  }
  return out;
}

void write_scenario(const std::filesystem::path& dir, const Scenario& sc,
                    const ScenarioConfig& cfg) {
  std::filesystem::create_directories(dir);
  json meta;
  meta["schema_version"] = ScenarioConfig::kSchemaVersion;
  meta["base_ecef"] = vec3_to_json(sc.base());
  meta["wavelength_m"] = sc.wavelength_m;
  meta["rate_hz"] = sc.rate_hz;
  meta["num_epochs"] = sc.epochs.size();
  meta["reference_sat"] = sc.truth.reference_sat;
  meta["config"] = scenario_config_to_json(cfg);
  write_text_file(dir / "meta.json", meta.dump(2) + "\n");
  write_text_file(dir / "observations.csv", observations_csv(sc));
  write_text_file(dir / "truth.csv", truth_csv(sc));

  std::string sats = std::string(kTruthSatelliteHeader) + "\n";
  for (const auto& s : sc.truth.satellites) {
    sats += std::to_string(s.epoch_index) + "," + std::to_string(s.sat_id) + "," +
            std::to_string(s.ambiguity) + "," + (s.nlos ? "1" : "0") + "," +
            (s.visible ? "1" : "0") + "\n";
  }
  write_text_file(dir / "truth_satellites.csv", sats);
}

namespace {

void expect_columns(const std::vector<std::string_view>& f, std::size_t n) {
  if (f.size() != n) {
    throw ParseError("expected " + std::to_string(n) + " columns, got " + std::to_string(f.size()));
  }
}

}  // namespace

Scenario read_scenario(const std::filesystem::path& dir) {
  const json meta = read_json_file(dir / "meta.json");
  Scenario sc;
  std::size_t num_epochs = 0;
  try {
    if (meta.at("schema_version").get<int>() != ScenarioConfig::kSchemaVersion) {
      throw ParseError("unsupported schema_version");
    }
    sc.frame = LocalFrame::from_ecef(vec3_from_json(meta.at("base_ecef"), "base_ecef"));
    sc.wavelength_m = meta.at("wavelength_m").get<double>();
    sc.rate_hz = meta.at("rate_hz").get<double>();
    num_epochs = meta.at("num_epochs").get<std::size_t>();
    sc.truth.reference_sat = meta.at("reference_sat").get<int>();
  } catch (const json::exception& e) {
    throw ParseError((dir / "meta.json").string() + ": " + e.what());
  }
  if (!(sc.wavelength_m > 0.0)) throw ParseError((dir / "meta.json").string() + ": bad wavelength");

  for_each_csv_row(dir / "observations.csv", kObservationHeader,
                   [&](const std::vector<std::string_view>& f, int) {
    expect_columns(f, 12);
    const int epoch = static_cast<int>(parse_int(f[0]));
    const double time = parse_double(f[1]);
    const int flags = static_cast<int>(parse_int(f[11]));
    SatelliteGeometry g;
    g.sat_id = static_cast<int>(parse_int(f[2]));
    g.azimuth = parse_double(f[3]);
    g.elevation = parse_double(f[4]);
    g.position = {parse_double(f[5]), parse_double(f[6]), parse_double(f[7])};

    if (flags & kReferenceSatellite) {
      if (!sc.epochs.empty() && epoch <= sc.epochs.back().epoch_index) {
        throw ParseError("epochs must be strictly increasing");
      }
      if (!sc.epochs.empty() && !(time > sc.epochs.back().time_s)) {
        throw ParseError("epoch times must be strictly increasing");
      }
      EpochObservation e;
      e.epoch_index = epoch;
      e.time_s = time;
      e.reference = g;
      e.wavelength_m = sc.wavelength_m;
      sc.epochs.push_back(std::move(e));
      return;
    }
    if (sc.epochs.empty() || sc.epochs.back().epoch_index != epoch) {
      throw ParseError("satellite row before its epoch's reference row");
    }
    if (g.sat_id == sc.epochs.back().reference.sat_id) {
      throw ParseError("reference satellite listed as a DD observation");
    }
    SatelliteObservation so;
    so.geometry = g;
    so.obs.sat_id = g.sat_id;
    so.obs.has_pseudorange = flags & kHasPseudorange;
    so.obs.has_carrier = flags & kHasCarrier;
    so.obs.has_doppler = flags & kHasDoppler;
    if (so.obs.has_pseudorange) so.obs.pseudorange_m = parse_double(f[8]);
    if (so.obs.has_carrier) so.obs.carrier = parse_carrier(f[9]);
    if (so.obs.has_doppler) so.obs.doppler_mps = parse_double(f[10]);
    sc.epochs.back().satellites.push_back(so);
  });

  for_each_csv_row(dir / "truth.csv", kTruthHeader,
                   [&](const std::vector<std::string_view>& f, int) {
    expect_columns(f, 8);
    TruthEpoch t;
    t.epoch_index = static_cast<int>(parse_int(f[0]));
    t.time_s = parse_double(f[1]);
    t.position = {parse_double(f[2]), parse_double(f[3]), parse_double(f[4])};
    t.velocity = {parse_double(f[5]), parse_double(f[6]), parse_double(f[7])};
    sc.truth.epochs.push_back(t);
  });

  const auto sat_path = dir / "truth_satellites.csv";
  if (std::filesystem::exists(sat_path)) {
    for_each_csv_row(sat_path, kTruthSatelliteHeader,
                     [&](const std::vector<std::string_view>& f, int) {
      expect_columns(f, 5);
      SatelliteTruth s;
      s.epoch_index = static_cast<int>(parse_int(f[0]));
      s.sat_id = static_cast<int>(parse_int(f[1]));
      s.ambiguity = parse_int(f[2]);
      s.nlos = parse_int(f[3]) != 0;
      s.visible = parse_int(f[4]) != 0;
      sc.truth.satellites.push_back(s);
    });
  }

  if (sc.epochs.size() != num_epochs || sc.truth.epochs.size() != num_epochs) {
    throw ParseError(dir.string() + ": epoch count disagrees with meta.json");
  }
  for (std::size_t i = 0; i < num_epochs; ++i) {
    if (sc.truth.epochs[i].epoch_index != sc.epochs[i].epoch_index) {
      throw ParseError(dir.string() + ": truth and observation epochs differ at row " +
                       std::to_string(i));
    }
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return read_scenario(path);
  return generate_scenario(read_scenario_config(path));
}

FilterConfig filter_config_from_json(const json& j, FilterConfig cfg) {
  ObjectReader r(j, "filter config");
  r.get("num_particles", cfg.num_particles);
  r.get("use_pseudorange_likelihood", cfg.use_pseudorange_likelihood);
  r.get("afv_block", cfg.afv_block);
  r.get("afv_process_noise", cfg.afv_process_noise);
  r.get("nlos_gate", cfg.nlos_gate);
  r.get("resample_threshold", cfg.resample_threshold);
  r.get("initial_velocity_sigma", cfg.initial_velocity_sigma);
  r.get("outage_inflation", cfg.outage_inflation);
  r.get("divergence_spread_m", cfg.divergence_spread_m);
  r.get("seed", cfg.seed);
  r.get("sigma_phi", cfg.noise.sigma_phi);
  r.get("sigma_rho", cfg.noise.sigma_rho);
  r.get("eta", cfg.noise.eta);
  r.get("dt", cfg.noise.dt);
  if (r.has("q_position")) cfg.noise.q_position = covariance_from_json(r.at("q_position"), "q_position");
  if (r.has("q_velocity")) cfg.noise.q_velocity = covariance_from_json(r.at("q_velocity"), "q_velocity");
  if (r.has("r_velocity")) cfg.noise.r_velocity = covariance_from_json(r.at("r_velocity"), "r_velocity");
  r.finish();
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("filter config: ") + e.what());
  }
  return cfg;
}

json filter_config_to_json(const FilterConfig& cfg) {
  json j;
  j["num_particles"] = cfg.num_particles;
  j["use_pseudorange_likelihood"] = cfg.use_pseudorange_likelihood;
  j["afv_block"] = cfg.afv_block;
  j["afv_process_noise"] = cfg.afv_process_noise;
  j["nlos_gate"] = cfg.nlos_gate;
  j["resample_threshold"] = cfg.resample_threshold;
  j["initial_velocity_sigma"] = cfg.initial_velocity_sigma;
  j["outage_inflation"] = cfg.outage_inflation;
  j["divergence_spread_m"] = cfg.divergence_spread_m;
  j["seed"] = cfg.seed;
  j["sigma_phi"] = cfg.noise.sigma_phi;
  j["sigma_rho"] = cfg.noise.sigma_rho;
  j["eta"] = cfg.noise.eta;
  j["dt"] = cfg.noise.dt;
  j["q_position"] = covariance_to_json(cfg.noise.q_position);
  j["q_velocity"] = covariance_to_json(cfg.noise.q_velocity);
  j["r_velocity"] = covariance_to_json(cfg.noise.r_velocity);
  return j;
}

}  // namespace rbpf
