#include "rbpf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "rbpf/obs_model.hpp"
#include "rbpf/random.hpp"

namespace rbpf {

namespace {

constexpr auto kSimNoiseStream = static_cast<RandomStream>(10);
constexpr auto kSimAmbiguityStream = static_cast<RandomStream>(11);

[[noreturn]] void invalid(const std::string& msg) {
  throw std::invalid_argument("scenario config: " + msg);
}

EcefPosition satellite_position(const SatelliteSpec& s, const LocalFrame& frame) {
  const double az = s.azimuth_deg * kDegToRad;
  const double el = s.elevation_deg * kDegToRad;
  const Vec3 d = frame.rotate_to_ecef(
      EnuVector(std::cos(el) * std::sin(az), std::cos(el) * std::cos(az), std::sin(el)));
  const EcefPosition& b = frame.anchor();
  // |b + rho d| = orbit radius
  const double bd = b.dot(d);
  const double rho =
      -bd + std::sqrt(bd * bd - b.squaredNorm() + s.orbit_radius_m * s.orbit_radius_m);
  return b + rho * d;
}

std::int64_t draw_ambiguity(std::uint64_t seed, int epoch, int sat_id, std::int64_t bound) {
  auto eng = make_stream(seed, epoch, sat_id, kSimAmbiguityStream);
  return std::uniform_int_distribution<std::int64_t>(-bound, bound)(eng);
}

}  // namespace

int ScenarioConfig::num_epochs() const {
  return static_cast<int>(std::llround(duration_s * rate_hz));
}

void ScenarioConfig::validate() const {
  if (schema_version != kSchemaVersion) {
    invalid("unsupported schema_version " + std::to_string(schema_version));
  }
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) invalid("duration_s must be > 0");
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) invalid("rate_hz must be > 0");
  if (num_epochs() < 1) invalid("duration_s * rate_hz must give at least one epoch");
  if (!(wavelength_m > 0.0)) invalid("wavelength_m must be > 0");
  if (!(std::abs(base_lat_deg) <= 90.0)) invalid("base_lat_deg out of range");
  if (!std::isfinite(base_lon_deg) || !std::isfinite(base_height_m)) invalid("base not finite");
  if (constellation.size() < 5) {
    invalid("need at least 5 satellites (4 for Doppler velocity plus the pivot)");
  }
  std::set<int> ids;
  for (const auto& s : constellation) {
    if (!ids.insert(s.sat_id).second) invalid("duplicate sat_id " + std::to_string(s.sat_id));
    if (!(s.elevation_deg > 0.0 && s.elevation_deg <= 90.0)) {
      invalid("sat " + std::to_string(s.sat_id) + ": elevation_deg must be in (0, 90]");
    }
    if (!std::isfinite(s.azimuth_deg)) invalid("azimuth not finite");
    if (!(s.orbit_radius_m > kEarthRadius + 1.0e5)) {
      invalid("sat " + std::to_string(s.sat_id) + ": orbit_radius_m below the atmosphere");
    }
  }
  const auto& t = trajectory;
  if (!(t.speed_mps >= 0.0) || !std::isfinite(t.speed_mps)) invalid("trajectory speed must be >= 0");
  if (t.kind == TrajectorySpec::Kind::kCircle) {
    if (!(t.radius_m > 0.0)) invalid("circle radius_m must be > 0");
    if (!t.center_enu.allFinite()) invalid("circle center not finite");
  } else {
    if (t.waypoints_enu.size() < 2) invalid("polyline needs at least two waypoints");
    for (const auto& w : t.waypoints_enu) {
      if (!w.allFinite()) invalid("polyline waypoint not finite");
    }
  }
  if (!(noise.sigma_rho_m >= 0.0 && noise.sigma_phi_cycles >= 0.0 &&
        noise.sigma_doppler_mps >= 0.0)) {
    invalid("noise sigmas must be >= 0");
  }
  if (max_ambiguity < 0 || max_ambiguity > 1'000'000) invalid("max_ambiguity out of [0, 1e6]");

  const int n = num_epochs();
  auto check_window = [&](const EpochWindow& w, const std::string& what) {
    if (w.start_epoch < 0 || w.end_epoch >= n || w.start_epoch > w.end_epoch) {
      invalid(what + " window [" + std::to_string(w.start_epoch) + ", " +
              std::to_string(w.end_epoch) + "] outside [0, " + std::to_string(n - 1) + "]");
    }
  };
  for (const auto& e : nlos_events) {
    if (!ids.count(e.sat_id)) invalid("nlos event for unknown sat " + std::to_string(e.sat_id));
    check_window(e.window, "nlos");
    if (!std::isfinite(e.pseudorange_bias_m) || !std::isfinite(e.carrier_bias_cycles) ||
        !std::isfinite(e.doppler_bias_mps)) {
      invalid("nlos biases must be finite");
    }
  }
  for (const auto& w : blockage_windows) check_window(w, "blockage");
  for (const auto& c : cycle_slips) {
    if (!ids.count(c.sat_id)) invalid("cycle slip for unknown sat " + std::to_string(c.sat_id));
    if (c.epoch < 0 || c.epoch >= n) invalid("cycle slip epoch outside the scenario");
  }
}

TruthEpoch trajectory_state(const TrajectorySpec& spec, const LocalFrame& frame, double t) {
  EnuVector pos = EnuVector::Zero();
  EnuVector vel = EnuVector::Zero();
  if (spec.kind == TrajectorySpec::Kind::kCircle) {
    const double dir = spec.counterclockwise ? 1.0 : -1.0;
    const double omega = dir * spec.speed_mps / spec.radius_m;
    const double th = spec.start_angle_deg * kDegToRad + omega * t;
    pos = spec.center_enu + spec.radius_m * EnuVector(std::cos(th), std::sin(th), 0.0);
    vel = spec.radius_m * omega * EnuVector(-std::sin(th), std::cos(th), 0.0);
  } else {
    const auto& w = spec.waypoints_enu;
    std::vector<EnuVector> pts(w.begin(), w.end());
    if (spec.closed) pts.push_back(w.front());
    double total = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) total += (pts[i] - pts[i - 1]).norm();
    double s = spec.speed_mps * t;
    bool moving = true;
    if (spec.closed && total > 0.0) {
      s = std::fmod(s, total);
    } else if (s >= total) {
      s = total;
      moving = false;
    }
    pos = pts.back();
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const EnuVector seg = pts[i] - pts[i - 1];
      const double len = seg.norm();
      if (len <= 0.0) continue;
      if (s <= len || i + 1 == pts.size()) {
        const double f = std::min(s, len) / len;
        pos = pts[i - 1] + f * seg;
        if (moving) vel = spec.speed_mps * seg / len;
        break;
      }
      s -= len;
    }
  }
  TruthEpoch out;
  out.time_s = t;
  out.position = frame.to_ecef(pos);
  out.velocity = frame.rotate_to_ecef(vel);
  return out;
}

Scenario generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();

  Scenario sc;
  sc.frame = LocalFrame::from_ecef(
      LocalFrame(cfg.base_lat_deg * kDegToRad, cfg.base_lon_deg * kDegToRad, cfg.base_height_m)
          .anchor());
  sc.wavelength_m = cfg.wavelength_m;
  sc.rate_hz = cfg.rate_hz;
  const EcefPosition& base = sc.base();

  std::vector<SatelliteGeometry> sats;
  for (const auto& s : cfg.constellation) {
    sats.push_back(make_satellite_geometry(s.sat_id, satellite_position(s, sc.frame), sc.frame));
  }
  std::sort(sats.begin(), sats.end(),
            [](const auto& a, const auto& b) { return a.sat_id < b.sat_id; });
  const int ref_id = select_reference_satellite(sats);
  const SatelliteGeometry ref =
      *std::find_if(sats.begin(), sats.end(), [&](const auto& s) { return s.sat_id == ref_id; });
  sc.truth.reference_sat = ref_id;

  std::map<int, std::int64_t> ambiguity;
  for (const auto& s : sats) {
    if (s.sat_id != ref_id) {
      ambiguity[s.sat_id] = draw_ambiguity(cfg.seed, 0, s.sat_id, cfg.max_ambiguity);
    }
  }

  const int n = cfg.num_epochs();
  sc.epochs.reserve(static_cast<std::size_t>(n));
  sc.truth.epochs.reserve(static_cast<std::size_t>(n));
  for (int e = 0; e < n; ++e) {
    const double t = static_cast<double>(e) / cfg.rate_hz;
    TruthEpoch truth = trajectory_state(cfg.trajectory, sc.frame, t);
    truth.epoch_index = e;

    for (const auto& slip : cfg.cycle_slips) {
      if (slip.epoch != e || e == 0) continue;
      // a slip on the pivot shifts every double difference
      for (auto& [id, amb] : ambiguity) {
        if (slip.sat_id == ref_id || slip.sat_id == id) {
          amb = draw_ambiguity(cfg.seed, e, id, cfg.max_ambiguity);
        }
      }
    }

    const bool blocked = std::any_of(cfg.blockage_windows.begin(), cfg.blockage_windows.end(),
                                     [&](const EpochWindow& w) { return w.contains(e); });

    EpochObservation epoch;
    epoch.epoch_index = e;
    epoch.time_s = t;
    epoch.reference = ref;
    epoch.wavelength_m = cfg.wavelength_m;

    for (const auto& s : sats) {
      if (s.sat_id == ref_id) continue;
      double pr_bias = 0.0, cp_bias = 0.0, dop_bias = 0.0;
      bool nlos = false;
      for (const auto& ev : cfg.nlos_events) {
        if (ev.sat_id == s.sat_id && ev.window.contains(e)) {
          nlos = true;
          pr_bias += ev.pseudorange_bias_m;
          cp_bias += ev.carrier_bias_cycles;
          dop_bias += ev.doppler_bias_mps;
        }
      }
      sc.truth.satellites.push_back({e, s.sat_id, ambiguity[s.sat_id], nlos, !blocked});
      if (blocked) continue;

      auto eng = make_stream(cfg.seed, e, s.sat_id, kSimNoiseStream);
      const Vec3 z = standard_normal3(eng);

      const double r = dd_range(s.position, ref.position, truth.position, base);
      const double rate =
          dd_range_gradient(s.position, ref.position, truth.position, base).dot(truth.velocity);

      SatelliteObservation so;
      so.geometry = s;
      so.obs.sat_id = s.sat_id;
      so.obs.pseudorange_m = r + pr_bias + cfg.noise.sigma_rho_m * z.x();
      so.obs.carrier = CarrierPhase::from_cycles(r / cfg.wavelength_m + cp_bias +
                                                 cfg.noise.sigma_phi_cycles * z.y())
                           .shifted(ambiguity[s.sat_id]);
      so.obs.doppler_mps = rate + dop_bias + cfg.noise.sigma_doppler_mps * z.z();
      so.obs.has_pseudorange = so.obs.has_carrier = so.obs.has_doppler = true;
      epoch.satellites.push_back(so);
    }

    sc.epochs.push_back(std::move(epoch));
    sc.truth.epochs.push_back(truth);
  }
  return sc;
}

std::optional<EcefPosition> pseudorange_ls_fix(const EpochObservation& epoch,
                                               const EcefPosition& base,
                                               const EcefPosition& initial) {
  int usable = 0;
  for (const auto& s : epoch.satellites) usable += s.obs.has_pseudorange ? 1 : 0;
  if (usable < 3) return std::nullopt;

  const EcefPosition& ref = epoch.reference.position;
  EcefPosition x = initial;
  for (int iter = 0; iter < 20; ++iter) {
    Mat3 normal = Mat3::Zero();
    Vec3 rhs = Vec3::Zero();
    for (const auto& s : epoch.satellites) {
      if (!s.obs.has_pseudorange) continue;
      const Vec3 g = dd_range_gradient(s.geometry.position, ref, x, base);
      const double d = dd_pseudorange_residual(s.obs, s.geometry.position, ref, x, base);
      normal += g * g.transpose();
      rhs += g * d;
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(normal, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e16) return std::nullopt;
    const Vec3 step = normal.ldlt().solve(rhs);
    if (!step.allFinite()) return std::nullopt;
    x += step;
    if (step.norm() < 1e-4) return x;
  }
  return std::nullopt;
}

}  // namespace rbpf
