#include "rbpf/kalman.hpp"

#include <stdexcept>

#include <Eigen/Cholesky>

namespace rbpf {

namespace {

Mat3 symmetrized(const Mat3& m) { return 0.5 * (m + m.transpose()); }

template <typename Ldlt>
bool positive_definite(const Ldlt& ldlt) {
  if (ldlt.info() != Eigen::Success) return false;
  const auto d = ldlt.vectorD();
  if (!d.allFinite() || !(d.minCoeff() > 0.0)) return false;
  return ldlt.rcond() > 1e-15;
}

}  // namespace

bool is_spd(const Mat3& cov, double tol) {
  if (!cov.allFinite()) return false;
  if ((cov - cov.transpose()).norm() >= tol) return false;
  return Eigen::LLT<Mat3>(cov).info() == Eigen::Success;
}

bool kalman_correct(Vec3& mean, Mat3& cov, const UpdateMatrix& c, const UpdateVector& innovation,
                    const UpdateCovariance& r) {
  if (c.rows() == 0) return true;
  // Information form of K = P C^T M^-1, P -= K M K^T. Carrier rows can shrink P by
  // five orders of magnitude, where the subtraction in the gain form loses digits.
  const Eigen::LDLT<UpdateCovariance> r_ldlt(r);
  const Eigen::LDLT<Mat3> p_ldlt(cov);
  if (!positive_definite(r_ldlt) || !positive_definite(p_ldlt)) return false;
  const UpdateMatrix rinv_c = r_ldlt.solve(c);
  const Mat3 info = p_ldlt.solve(Mat3::Identity()) + c.transpose() * rinv_c;
  const Eigen::LDLT<Mat3> info_ldlt(symmetrized(info));
  if (!positive_definite(info_ldlt)) return false;
  const Mat3 post = symmetrized(info_ldlt.solve(Mat3::Identity()));
  const Vec3 step = post * (rinv_c.transpose() * innovation);
  if (!post.allFinite() || !step.allFinite()) return false;
  mean += step;
  cov = post;
  return true;
}

Particle kf_time_update(const Particle& p, const EcefPosition& pos_before,
                        const EcefPosition& pos_after, const NoiseModel& noise) {
  const double dt = noise.dt;
  const Mat3 n = dt * dt * p.vel_cov + noise.q_position;
  const Eigen::LDLT<Mat3> ldlt(n);
  if (!positive_definite(ldlt)) {
    throw std::domain_error("kf_time_update: displacement covariance not invertible");
  }
  // L = dt P N^-1  =>  L^T = N^-1 (dt P)  (P, N symmetric)
  const Mat3 l = ldlt.solve(dt * p.vel_cov).transpose();

  Particle out = p;
  const Vec3 innovation = (pos_after - pos_before) - dt * p.vel_mean;
  out.vel_mean = p.vel_mean + l * innovation;
  out.vel_cov = symmetrized(p.vel_cov - l * n * l.transpose() + noise.q_velocity);
  return out;
}

MeasurementUpdate kf_measurement_update(const Particle& p, const EpochObservation& epoch,
                                        const std::optional<VelocitySolution>& vel_obs,
                                        const EcefPosition& base, const NoiseModel& noise,
                                        const MeasurementUpdateOptions& opts) {
  MeasurementUpdate out{p, false, false};

  int afv_rows = 0;
  if (opts.afv_block) {
    for (const auto& s : epoch.satellites) afv_rows += s.obs.has_carrier ? 1 : 0;
  }
  const int vel_rows = vel_obs ? 3 : 0;
  const int rows = std::min(vel_rows + afv_rows, kMaxUpdateRows);
  if (rows == 0) return out;

  UpdateMatrix c = UpdateMatrix::Zero(rows, 3);
  UpdateVector innov = UpdateVector::Zero(rows);
  UpdateCovariance r = UpdateCovariance::Zero(rows, rows);

  int row = 0;
  if (vel_obs) {
    c.topRows<3>().setIdentity();
    innov.head<3>() = vel_obs->velocity - p.vel_mean;
    r.topLeftCorner<3, 3>() = noise.r_velocity;
    row = 3;
  }
  const int first_afv_row = row;
  if (opts.afv_block) {
    const double lambda = epoch.wavelength_m;
    const double var = (lambda * noise.sigma_phi) * (lambda * noise.sigma_phi);
    const EcefPosition& ref = epoch.reference.position;
    for (const auto& s : epoch.satellites) {
      if (!s.obs.has_carrier || row >= rows) continue;
      const double range = dd_range(s.geometry.position, ref, p.position, base);
      const double psi = afv(s.obs.carrier, range, lambda);
      c.row(row) = noise.dt * dd_range_gradient(s.geometry.position, ref, p.position, base);
      innov(row) = -lambda * psi;
      r(row, row) = var;
      ++row;
    }
    if (opts.afv_process_noise && row > first_afv_row) {
      const int n = row - first_afv_row;
      const auto g = c.block(first_afv_row, 0, n, 3) / noise.dt;
      r.block(first_afv_row, first_afv_row, n, n) += g * noise.q_position * g.transpose();
    }
  }

  Vec3 mean = p.vel_mean;
  Mat3 cov = p.vel_cov;
  if (!kalman_correct(mean, cov, c, innov, r)) {
    out.singular = true;
    return out;
  }
  out.particle.vel_mean = mean;
  out.particle.vel_cov = cov;
  out.applied = true;
  return out;
}

}  // namespace rbpf
