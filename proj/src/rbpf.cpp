#include "rbpf/rbpf.hpp"

#include <stdexcept>
#include <utility>

namespace rbpf {

namespace {

// Epoch bookkeeping shared by both filters; returns the noise model with the
// actual epoch spacing, or nullopt on the first epoch of the set.
std::optional<NoiseModel> advance_epoch(ParticleSet& set, const EpochObservation& epoch,
                                        const NoiseModel& noise) {
  std::optional<NoiseModel> step_noise;
  if (set.epoch_index >= 0) {
    const double dt = epoch.time_s - set.time_s;
    if (!(dt > 0.0)) throw std::invalid_argument("epochs must arrive in increasing time order");
    step_noise = noise;
    step_noise->dt = dt;
  }
  set.epoch_index = epoch.epoch_index;
  set.time_s = epoch.time_s;
  return step_noise;
}

}  // namespace

void rbpf_propagate(ParticleSet& set, const NoiseModel& noise) {
  const std::vector<EcefPosition> before = pf_predict(set, noise);
  for (std::size_t i = 0; i < set.size(); ++i) {
    Particle& p = set.particles[i];
    p = kf_time_update(p, before[i], p.position, noise);
  }
}

StepDiagnostics rbpf_velocity_update(ParticleSet& set, const EpochObservation& epoch,
                                     const EcefPosition& base, const FilterConfig& cfg,
                                     const NoiseModel& noise, bool after_step) {
  StepDiagnostics diag;
  if (set.particles.empty()) return diag;
  const MeasurementUpdateOptions opts{cfg.afv_block && after_step, cfg.afv_process_noise};

  double excluded = 0.0;
  for (Particle& p : set.particles) {
    std::optional<VelocitySolution> vel;
    if (cfg.nlos_gate) {
      const std::vector<int> kept = nlos_gate(epoch, p.position, base, cfg.noise.eta);
      vel = doppler_velocity_ls(epoch, kept, p.position);
      excluded += static_cast<double>(epoch.satellites.size() - kept.size());
    } else {
      vel = doppler_velocity_ls(epoch, p.position);
    }
    if (vel) ++diag.velocity_solutions;

    const MeasurementUpdate mu = kf_measurement_update(p, epoch, vel, base, noise, opts);
    if (mu.singular) ++diag.singular_updates;
    p = mu.particle;
  }
  diag.mean_excluded = excluded / static_cast<double>(set.size());
  return diag;
}

StepResult rbpf_step(ParticleSet& set, const EpochObservation& epoch, const EcefPosition& base,
                     const FilterConfig& cfg) {
  StepResult out;
  const std::optional<NoiseModel> step_noise = advance_epoch(set, epoch, cfg.noise);
  if (step_noise) {
    rbpf_propagate(set, *step_noise);
    out.diag.predicted = true;
  }

  const CorrectionResult cr = pf_correct(set, epoch, base, cfg);

  const StepDiagnostics vd = rbpf_velocity_update(set, epoch, base, cfg,
                                                  step_noise.value_or(cfg.noise),
                                                  step_noise.has_value());
  out.diag.corrected = cr.corrected;
  out.diag.resampled = cr.resampled;
  out.diag.ess = cr.ess;
  out.diag.mean_excluded = vd.mean_excluded;
  out.diag.velocity_solutions = vd.velocity_solutions;
  out.diag.singular_updates = vd.singular_updates;

  out.estimate = compute_estimate(set, true);
  return out;
}

RbpfFilter::RbpfFilter(FilterConfig cfg, EcefPosition base)
    : cfg_(std::move(cfg)), base_(std::move(base)) {
  cfg_.validate();
}

void RbpfFilter::initialize(const EcefPosition& prior_pos, double prior_sigma,
                            const std::optional<Vec3>& prior_vel) {
  set_ = init_particles(cfg_, prior_pos, prior_sigma, prior_vel);
}

ConventionalPf::ConventionalPf(FilterConfig cfg, EcefPosition base)
    : cfg_(std::move(cfg)), base_(std::move(base)) {
  cfg_.validate();
}

void ConventionalPf::initialize(const EcefPosition& prior_pos, double prior_sigma) {
  set_ = init_particles(cfg_, prior_pos, prior_sigma, std::nullopt);
  velocity_.reset();
}

StepResult ConventionalPf::step(const EpochObservation& epoch) {
  StepResult out;
  std::optional<NoiseModel> step_noise = advance_epoch(set_, epoch, cfg_.noise);
  if (step_noise) {
    const Vec3 v = velocity_.value_or(Vec3::Zero());
    if (!velocity_) step_noise->q_position *= cfg_.outage_inflation;
    for (Particle& p : set_.particles) p.vel_mean = v;
    pf_predict(set_, *step_noise);
    out.diag.predicted = true;
  }

  const CorrectionResult cr = pf_correct(set_, epoch, base_, cfg_);
  out.diag.corrected = cr.corrected;
  out.diag.resampled = cr.resampled;
  out.diag.ess = cr.ess;

  const FilterEstimate located = compute_estimate(set_, false);
  const std::optional<VelocitySolution> vel = doppler_velocity_ls(epoch, located.position);
  velocity_.reset();
  if (vel) {
    velocity_ = vel->velocity;
    out.diag.velocity_solutions = 1;
  }
  for (Particle& p : set_.particles) p.vel_mean = velocity_.value_or(Vec3::Zero());

  out.estimate = located;
  out.estimate.velocity_available = velocity_.has_value();
  out.estimate.velocity = velocity_.value_or(Vec3::Zero());
  return out;
}

}  // namespace rbpf
