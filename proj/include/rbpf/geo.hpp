#pragma once

#include <span>

#include <Eigen/Core>

namespace rbpf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Earth-centered Earth-fixed position [m].
using EcefPosition = Eigen::Vector3d;
/// East-north-up vector about a local anchor [m] or [m/s].
using EnuVector = Eigen::Vector3d;

inline constexpr double kEarthRadius = 6378137.0;  // spherical model [m]
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;

/// Rotation taking ECEF deltas into ENU at (lat, lon).
Mat3 ecef_to_enu_rotation(double lat_rad, double lon_rad);

EnuVector ecef_to_enu(const EcefPosition& p, const EcefPosition& anchor, double anchor_lat,
                      double anchor_lon);
EcefPosition enu_to_ecef(const EnuVector& enu, const EcefPosition& anchor, double anchor_lat,
                         double anchor_lon);

/// A local east-north-up frame anchored at a point of a spherical Earth.
class LocalFrame {
 public:
  LocalFrame() = default;
  LocalFrame(double lat_rad, double lon_rad, double height_m);
  static LocalFrame from_ecef(const EcefPosition& anchor);

  const EcefPosition& anchor() const { return anchor_; }
  double lat() const { return lat_; }
  double lon() const { return lon_; }

  EnuVector to_enu(const EcefPosition& p) const;
  EcefPosition to_ecef(const EnuVector& enu) const;
  // Rotation only, for velocities.
  EnuVector rotate_to_enu(const Vec3& ecef_delta) const { return rot_ * ecef_delta; }
  Vec3 rotate_to_ecef(const EnuVector& enu_delta) const { return rot_.transpose() * enu_delta; }

 private:
  EcefPosition anchor_ = EcefPosition::Zero();
  double lat_ = 0.0;
  double lon_ = 0.0;
  Mat3 rot_ = Mat3::Identity();
};

struct SatelliteGeometry {
  int sat_id = 0;
  EcefPosition position = EcefPosition::Zero();
  double elevation = 0.0;  // [rad], seen from the base station
  double azimuth = 0.0;    // [rad] in [0, 2pi)
};

/// Fills elevation/azimuth of a satellite as seen from the frame anchor.
SatelliteGeometry make_satellite_geometry(int sat_id, const EcefPosition& position,
                                          const LocalFrame& frame);

/// Euclidean distance; throws std::domain_error for coincident points.
double geometric_range(const EcefPosition& sat, const EcefPosition& rcv);

/// Double-differenced geometric range
/// (|s_k - rover| - |s_k - base|) - (|s_ref - rover| - |s_ref - base|).
double dd_range(const EcefPosition& sat_k, const EcefPosition& sat_ref, const EcefPosition& rover,
                const EcefPosition& base);

/// d(dd_range)/d(rover) = e_ref - e_k, with e the unit vector from rover to satellite.
Vec3 dd_range_gradient(const EcefPosition& sat_k, const EcefPosition& sat_ref,
                       const EcefPosition& rover, const EcefPosition& base);

/// Highest-elevation satellite, ties broken by the lowest id. Throws on an empty list.
int select_reference_satellite(std::span<const SatelliteGeometry> sats);

}  // namespace rbpf
