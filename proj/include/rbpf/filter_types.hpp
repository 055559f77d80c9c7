#pragma once

#include <cstdint>
#include <vector>

#include "rbpf/geo.hpp"
#include "rbpf/obs_model.hpp"

namespace rbpf {

/// Process and observation noise of the position/velocity model. Defaults
/// are per 1 s epoch.
struct NoiseModel {
  Mat3 q_position = 0.01 * Mat3::Identity();     // Q_n [m^2]
  Mat3 q_velocity = 0.04 * Mat3::Identity();     // Q_l [(m/s)^2]
  Mat3 r_velocity = 0.0025 * Mat3::Identity();   // Doppler velocity [(m/s)^2]
  double sigma_phi = 0.02;                       // [cycles]
  double sigma_rho = 1.0;                        // [m]
  double eta = 5.0;                              // NLOS gate [m]
  double dt = 1.0;                               // [s]

  /// Throws std::invalid_argument when a covariance is not SPD or dt <= 0.
  void validate() const;
};

struct FilterConfig {
  int num_particles = 2000;
  NoiseModel noise;
  bool use_pseudorange_likelihood = true;
  bool afv_block = true;   // AFV rows in the velocity measurement update
  bool afv_process_noise = true;  // AFV rows also carry the projected Q_n
  bool nlos_gate = true;   // per-particle Doppler satellite rejection
  double resample_threshold = 0.5;  // resample when N_eff < threshold * N
  double initial_velocity_sigma = 1.0;  // [m/s]
  double outage_inflation = 25.0;   // Q_n multiplier for the baseline during outages
  double divergence_spread_m = 1000.0;
  std::uint64_t seed = 1;

  LikelihoodOptions likelihood() const {
    return {noise.sigma_phi, noise.sigma_rho, use_pseudorange_likelihood};
  }
  void validate() const;
};

/// A position hypothesis carrying its own velocity Kalman filter.
struct Particle {
  EcefPosition position = EcefPosition::Zero();
  double log_weight = 0.0;
  Vec3 vel_mean = Vec3::Zero();
  Mat3 vel_cov = Mat3::Identity();
};

struct ParticleSet {
  std::vector<Particle> particles;
  int epoch_index = -1;  // last processed epoch, -1 before the first one
  double time_s = 0.0;   // time of that epoch
  std::uint64_t seed = 0;

  std::size_t size() const { return particles.size(); }
};

struct FilterEstimate {
  EcefPosition position = EcefPosition::Zero();
  Vec3 velocity = Vec3::Zero();
  Mat3 position_cov = Mat3::Zero();
  bool velocity_available = false;
  double particle_spread = 0.0;  // RMS distance about the mean [m]
};

}  // namespace rbpf
