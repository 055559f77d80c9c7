#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "rbpf/filter_types.hpp"

namespace rbpf {

/// Scatters N particles i.i.d. around `prior_pos` with equal weights; every
/// particle starts with vel_mean = prior_vel (or zero) and
/// vel_cov = initial_velocity_sigma^2 I.
ParticleSet init_particles(const FilterConfig& cfg, const EcefPosition& prior_pos,
                           double prior_sigma, const std::optional<Vec3>& prior_vel);

/// Moves every particle by dt * (its own vel_mean) + N(0, Q_n), drawing from
/// the (seed, epoch_index, particle) stream. Returns the positions before the move.
std::vector<EcefPosition> pf_predict(ParticleSet& set, const NoiseModel& noise);

/// Normalizes log-weights so that sum(exp(w)) == 1. Returns the effective sample size.
double normalize_weights(ParticleSet& set);

double effective_sample_size(const ParticleSet& set);

/// Low-variance resampling: indices selected by the comb u0/N + k/N, u0 in [0, 1).
std::vector<std::size_t> systematic_resample_indices(std::span<const double> weights, double u0);

struct CorrectionResult {
  bool corrected = false;  // false when the epoch had no usable carrier observations
  bool resampled = false;
  double ess = 0.0;        // after normalization, before resampling
};

/// Adds each particle's log-likelihood to its weight, renormalizes and runs
/// systematic resampling when N_eff < resample_threshold * N. Resampled
/// particles carry their whole Kalman state with them.
CorrectionResult pf_correct(ParticleSet& set, const EpochObservation& epoch,
                            const EcefPosition& base, const FilterConfig& cfg);

/// Weighted mean/covariance of the positions and mean velocity.
FilterEstimate compute_estimate(const ParticleSet& set, bool velocity_available);

}  // namespace rbpf
