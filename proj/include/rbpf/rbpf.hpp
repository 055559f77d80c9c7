#pragma once

#include <optional>

#include "rbpf/filter_types.hpp"
#include "rbpf/kalman.hpp"
#include "rbpf/particle_filter.hpp"

namespace rbpf {

struct StepDiagnostics {
  bool predicted = false;
  bool corrected = false;
  bool resampled = false;
  double ess = 0.0;
  double mean_excluded = 0.0;   // satellites rejected by the NLOS gate, averaged over particles
  int velocity_solutions = 0;   // particles (or 1 for the baseline) with a Doppler velocity
  int singular_updates = 0;     // skipped measurement updates
};

struct StepResult {
  FilterEstimate estimate;
  StepDiagnostics diag;
};

/// PF prediction with each particle's own velocity followed by the
/// displacement-driven KF time update of every particle.
void rbpf_propagate(ParticleSet& set, const NoiseModel& noise);

/// Per-particle NLOS gate + Doppler least squares, then the KF measurement update.
/// AFV rows use noise.dt as the step length and are only stacked when
/// `after_step` is set (a prediction preceded this update).
StepDiagnostics rbpf_velocity_update(ParticleSet& set, const EpochObservation& epoch,
                                     const EcefPosition& base, const FilterConfig& cfg,
                                     const NoiseModel& noise, bool after_step);

/// One epoch of the Rao-Blackwellized filter in the fixed order
///   predict -> KF time update -> PF correction/resampling -> NLOS-gated
///   Doppler velocity -> KF measurement update.
/// On the first epoch of a set (epoch_index < 0) the first two steps are
/// skipped and the measurement update has no AFV rows.
StepResult rbpf_step(ParticleSet& set, const EpochObservation& epoch, const EcefPosition& base,
                     const FilterConfig& cfg);

/// Position-only baseline: every particle transitions with one shared Doppler
/// least-squares velocity computed over all satellites. When no velocity is
/// available the transition uses zero velocity and an inflated Q_n.
class ConventionalPf {
 public:
  ConventionalPf(FilterConfig cfg, EcefPosition base);

  void initialize(const EcefPosition& prior_pos, double prior_sigma);
  StepResult step(const EpochObservation& epoch);

  const ParticleSet& particles() const { return set_; }
  const std::optional<Vec3>& shared_velocity() const { return velocity_; }

 private:
  FilterConfig cfg_;
  EcefPosition base_;
  ParticleSet set_;
  std::optional<Vec3> velocity_;
};

class RbpfFilter {
 public:
  RbpfFilter(FilterConfig cfg, EcefPosition base);

  void initialize(const EcefPosition& prior_pos, double prior_sigma,
                  const std::optional<Vec3>& prior_vel = std::nullopt);
  StepResult step(const EpochObservation& epoch) { return rbpf_step(set_, epoch, base_, cfg_); }

  const ParticleSet& particles() const { return set_; }

 private:
  FilterConfig cfg_;
  EcefPosition base_;
  ParticleSet set_;
};

}  // namespace rbpf
