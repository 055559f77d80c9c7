#include "rbpf/geo.hpp"

#include <cmath>
#include <stdexcept>

namespace rbpf {

Mat3 ecef_to_enu_rotation(double lat_rad, double lon_rad) {
  const double sl = std::sin(lat_rad), cl = std::cos(lat_rad);
  const double so = std::sin(lon_rad), co = std::cos(lon_rad);
  Mat3 r;
  r << -so, co, 0.0,
       -sl * co, -sl * so, cl,
       cl * co, cl * so, sl;
  return r;
}

EnuVector ecef_to_enu(const EcefPosition& p, const EcefPosition& anchor, double anchor_lat,
                      double anchor_lon) {
  return ecef_to_enu_rotation(anchor_lat, anchor_lon) * (p - anchor);
}

EcefPosition enu_to_ecef(const EnuVector& enu, const EcefPosition& anchor, double anchor_lat,
                         double anchor_lon) {
  return anchor + ecef_to_enu_rotation(anchor_lat, anchor_lon).transpose() * enu;
}

LocalFrame::LocalFrame(double lat_rad, double lon_rad, double height_m)
    : lat_(lat_rad), lon_(lon_rad), rot_(ecef_to_enu_rotation(lat_rad, lon_rad)) {
  const double r = kEarthRadius + height_m;
  anchor_ = r * Vec3(std::cos(lat_rad) * std::cos(lon_rad), std::cos(lat_rad) * std::sin(lon_rad),
                     std::sin(lat_rad));
}

LocalFrame LocalFrame::from_ecef(const EcefPosition& anchor) {
  const double r = anchor.norm();
  if (!(r > 0.0)) throw std::domain_error("local frame anchor at the Earth center");
  LocalFrame f;
  f.anchor_ = anchor;
  f.lat_ = std::asin(anchor.z() / r);
  f.lon_ = std::atan2(anchor.y(), anchor.x());
  f.rot_ = ecef_to_enu_rotation(f.lat_, f.lon_);
  return f;
}

EnuVector LocalFrame::to_enu(const EcefPosition& p) const { return rot_ * (p - anchor_); }

EcefPosition LocalFrame::to_ecef(const EnuVector& enu) const {
  return anchor_ + rot_.transpose() * enu;
}

SatelliteGeometry make_satellite_geometry(int sat_id, const EcefPosition& position,
                                          const LocalFrame& frame) {
  const EnuVector los = frame.to_enu(position);
  const double horiz = std::hypot(los.x(), los.y());
  SatelliteGeometry g;
  g.sat_id = sat_id;
  g.position = position;
  g.elevation = std::atan2(los.z(), horiz);
  double az = std::atan2(los.x(), los.y());
  if (az < 0.0) az += 2.0 * kPi;
  if (az >= 2.0 * kPi) az -= 2.0 * kPi;
  g.azimuth = az;
  return g;
}

double geometric_range(const EcefPosition& sat, const EcefPosition& rcv) {
  const double r = (sat - rcv).norm();
  if (!(r > 0.0)) throw std::domain_error("geometric_range: coincident satellite and receiver");
  return r;
}

double dd_range(const EcefPosition& sat_k, const EcefPosition& sat_ref, const EcefPosition& rover,
                const EcefPosition& base) {
  return (geometric_range(sat_k, rover) - geometric_range(sat_k, base)) -
         (geometric_range(sat_ref, rover) - geometric_range(sat_ref, base));
}

Vec3 dd_range_gradient(const EcefPosition& sat_k, const EcefPosition& sat_ref,
                       const EcefPosition& rover, const EcefPosition& /*base*/) {
  const Vec3 e_k = (sat_k - rover) / geometric_range(sat_k, rover);
  const Vec3 e_ref = (sat_ref - rover) / geometric_range(sat_ref, rover);
  return e_ref - e_k;
}

int select_reference_satellite(std::span<const SatelliteGeometry> sats) {
  if (sats.empty()) throw std::invalid_argument("select_reference_satellite: no satellites");
  const SatelliteGeometry* best = &sats.front();
  for (const auto& s : sats) {
    if (s.elevation > best->elevation ||
        (s.elevation == best->elevation && s.sat_id < best->sat_id)) {
      best = &s;
    }
  }
  return best->sat_id;
}

}  // namespace rbpf
