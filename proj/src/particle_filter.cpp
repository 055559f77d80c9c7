#include "rbpf/particle_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "rbpf/random.hpp"

namespace rbpf {

namespace {

// Square root of a PSD matrix that tolerates singular (e.g. zero) input.
Mat3 psd_sqrt(const Mat3& m) {
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(0.5 * (m + m.transpose()));
  const Vec3 d = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * d.asDiagonal();
}

}  // namespace

ParticleSet init_particles(const FilterConfig& cfg, const EcefPosition& prior_pos,
                           double prior_sigma, const std::optional<Vec3>& prior_vel) {
  if (cfg.num_particles < 1) throw std::invalid_argument("init_particles: need >= 1 particle");
  if (!(prior_sigma > 0.0)) throw std::invalid_argument("init_particles: prior_sigma must be > 0");

  ParticleSet set;
  set.seed = cfg.seed;
  set.particles.resize(static_cast<std::size_t>(cfg.num_particles));
  const double log_w = -std::log(static_cast<double>(cfg.num_particles));
  const double var_v = cfg.initial_velocity_sigma * cfg.initial_velocity_sigma;
  for (std::size_t i = 0; i < set.particles.size(); ++i) {
    auto eng = make_stream(cfg.seed, 0, static_cast<std::int64_t>(i), RandomStream::kInit);
    Particle& p = set.particles[i];
    p.position = prior_pos + prior_sigma * standard_normal3(eng);
    p.log_weight = log_w;
    p.vel_mean = prior_vel.value_or(Vec3::Zero());
    p.vel_cov = var_v * Mat3::Identity();
  }
  return set;
}

std::vector<EcefPosition> pf_predict(ParticleSet& set, const NoiseModel& noise) {
  const Mat3 a = psd_sqrt(noise.q_position);
  std::vector<EcefPosition> before;
  before.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    Particle& p = set.particles[i];
    before.push_back(p.position);
    auto eng = make_stream(set.seed, set.epoch_index, static_cast<std::int64_t>(i),
                           RandomStream::kPredict);
    p.position = p.position + noise.dt * p.vel_mean + a * standard_normal3(eng);
  }
  return before;
}

double normalize_weights(ParticleSet& set) {
  if (set.particles.empty()) return 0.0;
  double max_lw = -std::numeric_limits<double>::infinity();
  for (const auto& p : set.particles) max_lw = std::max(max_lw, p.log_weight);
  if (!std::isfinite(max_lw)) {
    throw std::domain_error("normalize_weights: no particle with finite weight");
  }
  double sum = 0.0;
  for (const auto& p : set.particles) sum += std::exp(p.log_weight - max_lw);
  const double log_norm = max_lw + std::log(sum);
  for (auto& p : set.particles) p.log_weight -= log_norm;
  return effective_sample_size(set);
}

double effective_sample_size(const ParticleSet& set) {
  double sum_sq = 0.0;
  for (const auto& p : set.particles) {
    const double w = std::exp(p.log_weight);
    sum_sq += w * w;
  }
  return sum_sq > 0.0 ? 1.0 / sum_sq : 0.0;
}

std::vector<std::size_t> systematic_resample_indices(std::span<const double> weights, double u0) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> idx;
  idx.reserve(n);
  if (n == 0) return idx;
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::domain_error("systematic_resample: weights sum to zero");

  const double step = total / static_cast<double>(n);
  double pointer = u0 * step;
  double cumulative = weights[0];
  std::size_t j = 0;
  for (std::size_t k = 0; k < n; ++k) {
    while (pointer > cumulative && j + 1 < n) {
      ++j;
      cumulative += weights[j];
    }
    idx.push_back(j);
    pointer += step;
  }
  return idx;
}

CorrectionResult pf_correct(ParticleSet& set, const EpochObservation& epoch,
                            const EcefPosition& base, const FilterConfig& cfg) {
  CorrectionResult out;
  const LikelihoodOptions opts = cfg.likelihood();

  std::vector<double> log_lik(set.size(), 0.0);
  bool any_finite = false;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const LikelihoodResult lr = particle_likelihood(epoch, set.particles[i].position, base, opts);
    if (!lr.usable()) {
      out.ess = effective_sample_size(set);
      return out;
    }
    log_lik[i] = lr.log_likelihood;
    any_finite = any_finite || std::isfinite(lr.log_likelihood);
  }
  if (!any_finite) {
    out.ess = effective_sample_size(set);
    return out;
  }

  for (std::size_t i = 0; i < set.size(); ++i) set.particles[i].log_weight += log_lik[i];
  out.corrected = true;
  out.ess = normalize_weights(set);

  const double n = static_cast<double>(set.size());
  if (out.ess < cfg.resample_threshold * n) {
    std::vector<double> w(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) w[i] = std::exp(set.particles[i].log_weight);
    auto eng = make_stream(set.seed, set.epoch_index, -1, RandomStream::kResample);
    const double u0 = std::uniform_real_distribution<double>(0.0, 1.0)(eng);
    const auto idx = systematic_resample_indices(w, u0);

    std::vector<Particle> next;
    next.reserve(set.size());
    const double log_w = -std::log(n);
    for (std::size_t k : idx) {
      next.push_back(set.particles[k]);
      next.back().log_weight = log_w;
    }
    set.particles = std::move(next);
    out.resampled = true;
  }
  return out;
}

FilterEstimate compute_estimate(const ParticleSet& set, bool velocity_available) {
  FilterEstimate est;
  est.velocity_available = velocity_available;
  if (set.particles.empty()) return est;

  double wsum = 0.0;
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  for (const auto& p : set.particles) {
    const double w = std::exp(p.log_weight);
    wsum += w;
    pos += w * p.position;
    vel += w * p.vel_mean;
  }
  pos /= wsum;
  vel /= wsum;

  Mat3 cov = Mat3::Zero();
  for (const auto& p : set.particles) {
    const Vec3 d = p.position - pos;
    cov += std::exp(p.log_weight) * d * d.transpose();
  }
  cov /= wsum;
  est.position = pos;
  est.velocity = vel;
  est.position_cov = 0.5 * (cov + cov.transpose());
  est.particle_spread = std::sqrt(std::max(0.0, est.position_cov.trace()));
  return est;
}

}  // namespace rbpf
