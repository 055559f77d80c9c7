#include "rbpf/obs_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace rbpf {

CarrierPhase CarrierPhase::from_cycles(double cycles) {
  if (!std::isfinite(cycles)) throw std::invalid_argument("carrier phase must be finite");
  return CarrierPhase(static_cast<std::int64_t>(std::llround(cycles * kTicksPerCycle)));
}

std::int64_t CarrierPhase::whole_cycles() const {
  std::int64_t q = ticks_ / kTicksPerCycle;
  if (ticks_ % kTicksPerCycle < 0) --q;
  return q;
}

double CarrierPhase::fractional_cycles() const {
  std::int64_t r = ticks_ % kTicksPerCycle;
  if (r < 0) r += kTicksPerCycle;
  return static_cast<double>(r) / static_cast<double>(kTicksPerCycle);
}

double CarrierPhase::cycles() const {
  return static_cast<double>(whole_cycles()) + fractional_cycles();
}

const SatelliteObservation* EpochObservation::find(int sat_id) const {
  for (const auto& s : satellites) {
    if (s.obs.sat_id == sat_id) return &s;
  }
  return nullptr;
}

double dd_pseudorange_residual(const DdObservation& obs, const EcefPosition& sat,
                               const EcefPosition& ref_sat, const EcefPosition& rover,
                               const EcefPosition& base) {
  if (!obs.has_pseudorange) throw std::invalid_argument("dd_pseudorange_residual: no pseudorange");
  return obs.pseudorange_m - dd_range(sat, ref_sat, rover, base);
}

double afv(CarrierPhase carrier, double dd_range_m, double wavelength_m) {
  if (!(wavelength_m > 0.0)) throw std::invalid_argument("afv: wavelength must be positive");
  // round(x + n) - (x + n) == round(x) - x for integer n, so drop floor(Phi).
  const double a = carrier.fractional_cycles() - dd_range_m / wavelength_m;
  return std::round(a) - a;
}

double afv(const DdObservation& obs, const EcefPosition& sat, const EcefPosition& ref_sat,
           const EcefPosition& rover, const EcefPosition& base, double wavelength_m) {
  if (!obs.has_carrier) throw std::invalid_argument("afv: no carrier phase");
  if (!(wavelength_m > 0.0)) throw std::invalid_argument("afv: wavelength must be positive");
  return afv(obs.carrier, dd_range(sat, ref_sat, rover, base), wavelength_m);
}

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

double gaussian_log_density(double x, double sigma) {
  return -kLogSqrt2Pi - std::log(sigma) - 0.5 * (x / sigma) * (x / sigma);
}

}  // namespace

double carrier_likelihood(double psi, double sigma_phi) {
  if (!(sigma_phi > 0.0)) throw std::invalid_argument("carrier_likelihood: sigma_phi must be > 0");
  return std::exp(gaussian_log_density(psi, sigma_phi));
}

LikelihoodResult particle_likelihood(const EpochObservation& epoch, const EcefPosition& rover,
                                     const EcefPosition& base, const LikelihoodOptions& opts) {
  if (!(opts.sigma_phi > 0.0) || !(opts.sigma_rho > 0.0)) {
    throw std::invalid_argument("particle_likelihood: sigmas must be positive");
  }
  LikelihoodResult out;
  const EcefPosition& ref = epoch.reference.position;
  for (const auto& s : epoch.satellites) {
    if (!s.obs.has_carrier) continue;
    const double r = dd_range(s.geometry.position, ref, rover, base);
    out.log_likelihood += gaussian_log_density(afv(s.obs.carrier, r, epoch.wavelength_m),
                                               opts.sigma_phi);
    if (opts.use_pseudorange && s.obs.has_pseudorange) {
      out.log_likelihood += gaussian_log_density(s.obs.pseudorange_m - r, opts.sigma_rho);
    }
    ++out.carrier_sats;
  }
  if (!out.usable()) out.log_likelihood = 0.0;
  return out;
}

std::vector<int> nlos_gate(const EpochObservation& epoch, const EcefPosition& rover,
                           const EcefPosition& base, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("nlos_gate: eta must be positive");
  std::vector<int> kept;
  kept.reserve(epoch.satellites.size());
  for (const auto& s : epoch.satellites) {
    if (!s.obs.has_pseudorange) continue;
    const double d = dd_pseudorange_residual(s.obs, s.geometry.position,
                                             epoch.reference.position, rover, base);
    if (std::abs(d) <= eta) kept.push_back(s.obs.sat_id);
  }
  return kept;
}

namespace {

using DesignMatrix = Eigen::Matrix<double, Eigen::Dynamic, 4, 0, 64, 4>;
using ObsVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 64, 1>;

template <typename Accept>
std::optional<VelocitySolution> solve_velocity(const EpochObservation& epoch,
                                               const EcefPosition& rcv, Accept accept) {
  VelocitySolution sol;
  DesignMatrix h(0, 4);
  ObsVector y(0);
  for (const auto& s : epoch.satellites) {
    if (!s.obs.has_doppler || !accept(s.obs.sat_id)) continue;
    if (h.rows() == h.MaxRowsAtCompileTime) break;
    const Vec3 los = s.geometry.position - rcv;
    const double range = los.norm();
    if (!(range > 0.0)) return std::nullopt;
    const Eigen::Index row = h.rows();
    h.conservativeResize(row + 1, 4);
    y.conservativeResize(row + 1);
    h.block<1, 3>(row, 0) = -(los / range).transpose();
    h(row, 3) = 1.0;
    y(row) = s.obs.doppler_mps;
    sol.used_sats.push_back(s.obs.sat_id);
  }
  if (h.rows() < 4) return std::nullopt;

  const Eigen::Matrix4d normal = h.transpose() * h;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(normal, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  // cond(H) = sqrt(cond(H^T H))
  if (!(lo > 0.0) || std::sqrt(hi / lo) > kMaxVelocityConditionNumber) return std::nullopt;

  const Eigen::Vector4d x = normal.ldlt().solve(h.transpose() * y);
  sol.velocity = x.head<3>();
  sol.clock_drift = x(3);
  const ObsVector res = y - h * x;
  sol.residual_rms = std::sqrt(res.squaredNorm() / static_cast<double>(res.size()));
  return sol;
}

}  // namespace

std::optional<VelocitySolution> doppler_velocity_ls(const EpochObservation& epoch,
                                                    std::span<const int> subset,
                                                    const EcefPosition& rcv) {
  return solve_velocity(epoch, rcv, [&](int id) {
    return std::find(subset.begin(), subset.end(), id) != subset.end();
  });
}

std::optional<VelocitySolution> doppler_velocity_ls(const EpochObservation& epoch,
                                                    const EcefPosition& rcv) {
  return solve_velocity(epoch, rcv, [](int) { return true; });
}

}  // namespace rbpf
