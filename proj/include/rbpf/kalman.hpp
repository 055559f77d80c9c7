#pragma once

#include <optional>

#include <Eigen/Core>

#include "rbpf/filter_types.hpp"

namespace rbpf {

inline constexpr int kMaxUpdateRows = 67;  // 3 velocity rows + up to 64 AFV rows

using UpdateMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, 0, kMaxUpdateRows, 3>;
using UpdateVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxUpdateRows, 1>;
using UpdateCovariance =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxUpdateRows, kMaxUpdateRows>;

/// Linear KF correction of a 3-state mean/covariance:
///   M = C P C^T + R,  K = P C^T M^-1,  x += K innov,  P -= K M K^T,
/// evaluated in the equivalent information form P+ = (P^-1 + C^T R^-1 C)^-1,
/// K = P+ C^T R^-1. Returns false (and leaves the state alone) when P or R is
/// not positive definite.
bool kalman_correct(Vec3& mean, Mat3& cov, const UpdateMatrix& c, const UpdateVector& innovation,
                    const UpdateCovariance& r);

/// Velocity time update driven by the particle's own displacement:
///   N = dt^2 P + Q_n,  L = dt P N^-1,
///   v += L((after - before) - dt v),  P = P - L N L^T + Q_l.
/// Throws std::domain_error when N is not invertible.
Particle kf_time_update(const Particle& p, const EcefPosition& pos_before,
                        const EcefPosition& pos_after, const NoiseModel& noise);

struct MeasurementUpdateOptions {
  bool afv_block = true;
  bool afv_process_noise = true;  // add G Q_n G^T to the AFV row covariance
};

struct MeasurementUpdate {
  Particle particle;
  bool applied = false;
  bool singular = false;  // innovation covariance not invertible, update skipped
};

/// Stacked velocity measurement update with
///  - a Doppler velocity block (C = I, R = r_velocity) when `vel_obs` is set, and
///  - one AFV row per carrier satellite when enabled: C = dt * grad(r^k)^T,
///    innovation = wrapped carrier residual lambda * (Phi - r/lambda - round(.)) = -lambda * psi,
///    variance (lambda * sigma_phi)^2, plus the position process noise seen
///    through the gradients (G Q_n G^T, correlated across rows) when
///    afv_process_noise is set.
MeasurementUpdate kf_measurement_update(const Particle& p, const EpochObservation& epoch,
                                        const std::optional<VelocitySolution>& vel_obs,
                                        const EcefPosition& base, const NoiseModel& noise,
                                        const MeasurementUpdateOptions& opts);

/// True when the covariance is symmetric within `tol` and Cholesky succeeds.
bool is_spd(const Mat3& cov, double tol = 1e-12);

}  // namespace rbpf
