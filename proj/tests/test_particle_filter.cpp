#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "rbpf/particle_filter.hpp"
#include "rbpf/simulator.hpp"
#include "test_support.hpp"

using namespace rbpf;

namespace {

FilterConfig config(int n, std::uint64_t seed = 1) {
  FilterConfig cfg;
  cfg.num_particles = n;
  cfg.seed = seed;
  return cfg;
}

double weight_sum(const ParticleSet& set) {
  double s = 0.0;
  for (const auto& p : set.particles) s += std::exp(p.log_weight);
  return s;
}

}  // namespace

TEST(InitParticles, SingleParticleHasUnitWeight) {
  const auto set = init_particles(config(1), Vec3(1e6, 2e6, 3e6), 0.5, std::nullopt);
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set.particles[0].log_weight, 0.0);
  EXPECT_EQ(set.particles[0].vel_mean, Vec3::Zero());
  EXPECT_EQ(set.particles[0].vel_cov, Mat3::Identity());
}

TEST(InitParticles, SampleMeanWithinLawOfLargeNumbersBound) {
  const Vec3 prior(-3.9e6, 3.4e6, 3.7e6);
  const double sigma = 2.0;
  const auto set = init_particles(config(100000), prior, sigma, Vec3(1, 2, 3));
  Vec3 mean = Vec3::Zero();
  for (const auto& p : set.particles) mean += p.position - prior;
  mean /= 100000.0;
  for (int i = 0; i < 3; ++i) EXPECT_LT(std::abs(mean(i)), 5 * sigma / std::sqrt(1e5));
  EXPECT_EQ(set.particles[17].vel_mean, Vec3(1, 2, 3));
  EXPECT_NEAR(weight_sum(set), 1.0, 1e-9);
}

TEST(InitParticles, SameSeedIsBitIdentical) {
  const auto a = init_particles(config(500, 9), Vec3(1e6, 0, 0), 1.0, std::nullopt);
  const auto b = init_particles(config(500, 9), Vec3(1e6, 0, 0), 1.0, std::nullopt);
  const auto c = init_particles(config(500, 10), Vec3(1e6, 0, 0), 1.0, std::nullopt);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.particles[i].position, b.particles[i].position);
  }
  EXPECT_NE(a.particles[0].position, c.particles[0].position);
}

TEST(InitParticles, RejectsBadArguments) {
  EXPECT_THROW(init_particles(config(0), Vec3::Zero(), 1.0, std::nullopt), std::invalid_argument);
  EXPECT_THROW(init_particles(config(5), Vec3::Zero(), 0.0, std::nullopt), std::invalid_argument);
}

TEST(PfPredict, ZeroNoiseMovesByVelocity) {
  auto set = init_particles(config(50), Vec3(1e6, 2e6, 3e6), 1.0, Vec3(1, 0, 0));
  const auto start = set.particles;
  NoiseModel noise;
  noise.q_position = Mat3::Zero();
  const auto before = pf_predict(set, noise);
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(before[i], start[i].position);
    EXPECT_EQ(set.particles[i].position - start[i].position, Vec3(1, 0, 0));
  }
  for (auto& p : set.particles) p.vel_mean.setZero();
  const auto again = set.particles;
  pf_predict(set, noise);
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(set.particles[i].position, again[i].position);
  }
}

TEST(PfPredict, NoiseCovarianceMatchesQn) {
  auto set = init_particles(config(100000), Vec3::Zero(), 1.0, Vec3(0.5, -1.0, 2.0));
  NoiseModel noise;
  noise.q_position << 0.04, 0.01, 0.0, 0.01, 0.02, -0.005, 0.0, -0.005, 0.09;
  noise.dt = 2.0;
  const auto before = pf_predict(set, noise);
  Mat3 cov = Mat3::Zero();
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Vec3 w = set.particles[i].position - before[i] - noise.dt * Vec3(0.5, -1.0, 2.0);
    cov += w * w.transpose();
  }
  cov /= static_cast<double>(set.size());
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(cov(i, i), noise.q_position(i, i), 0.05 * noise.q_position(i, i));
  }
  EXPECT_NEAR(cov(0, 1), 0.01, 0.05 * std::sqrt(0.04 * 0.02));
  EXPECT_NEAR(cov(1, 2), -0.005, 0.05 * std::sqrt(0.02 * 0.09));
}

TEST(NormalizeWeights, SumsToOneAndEssInRange) {
  auto set = init_particles(config(1000), Vec3::Zero(), 1.0, std::nullopt);
  std::mt19937_64 g(4);
  std::normal_distribution<double> n(0.0, 30.0);
  for (auto& p : set.particles) p.log_weight = n(g) - 800.0;
  const double ess = normalize_weights(set);
  EXPECT_NEAR(weight_sum(set), 1.0, 1e-9);
  EXPECT_GE(ess, 1.0);
  EXPECT_LE(ess, 1000.0);
}

TEST(SystematicResample, MatchesHandComputedComb) {
  // comb points (0.5 + k) / 4 over cumulative weights 0.1, 0.3, 0.6, 1.0
  const std::vector<double> w = {0.1, 0.2, 0.3, 0.4};
  const auto idx = systematic_resample_indices(w, 0.5);
  EXPECT_EQ(idx, (std::vector<std::size_t>{1, 2, 3, 3}));
  const std::vector<double> one_hot = {0.0, 0.0, 1.0, 0.0, 0.0};
  EXPECT_EQ(systematic_resample_indices(one_hot, 0.3),
            (std::vector<std::size_t>(5, 2)));
}

TEST(SystematicResample, CountsStayWithinOneOfExpectation) {
  std::mt19937_64 g(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(97);
  for (double& x : w) x = u(g);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  const auto idx = systematic_resample_indices(w, u(g));
  std::vector<int> count(w.size(), 0);
  for (auto i : idx) ++count[i];
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_LE(std::abs(count[i] - w[i] / total * 97.0), 1.0 + 1e-9);
  }
}

TEST(SystematicResample, UnbiasedInExpectation) {
  const int n = 400;
  std::mt19937_64 g(21);
  std::normal_distribution<double> pos(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    x[i] = pos(g);
    w[i] = std::exp(-0.5 * (x[i] - 0.7) * (x[i] - 0.7) / 0.25);
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  double mean = 0.0, var = 0.0;
  for (int i = 0; i < n; ++i) mean += w[i] / total * x[i];
  for (int i = 0; i < n; ++i) var += w[i] / total * (x[i] - mean) * (x[i] - mean);
  const double spread = std::sqrt(var);

  double drift = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto idx = systematic_resample_indices(w, u(g));
    double m = 0.0;
    for (auto i : idx) m += x[i];
    drift += m / n - mean;
  }
  EXPECT_LT(std::abs(drift / 200.0), 3.0 * spread / std::sqrt(static_cast<double>(n)));
}

TEST(PfCorrect, UniformLikelihoodKeepsWeights) {
  const Scenario sc = generate_scenario(fixtures::noiseless_config(3));
  auto set = init_particles(config(64), sc.truth.epochs[0].position, 0.5, std::nullopt);
  for (auto& p : set.particles) p.position = sc.truth.epochs[0].position + Vec3(0.1, 0.2, 0.3);
  const auto r = pf_correct(set, sc.epochs[0], sc.base(), config(64));
  EXPECT_TRUE(r.corrected);
  EXPECT_FALSE(r.resampled);
  EXPECT_NEAR(r.ess, 64.0, 1e-9);
  for (const auto& p : set.particles) EXPECT_NEAR(p.log_weight, -std::log(64.0), 1e-12);
}

TEST(PfCorrect, DominantParticleIsCopiedWithItsKalmanState) {
  const Scenario sc = generate_scenario(fixtures::noiseless_config(3));
  auto set = init_particles(config(50), sc.truth.epochs[0].position, 0.5, std::nullopt);
  for (std::size_t i = 0; i < set.size(); ++i) {
    set.particles[i].position = sc.truth.epochs[0].position + Vec3(30.0 + i, 0, 0);
    set.particles[i].vel_mean = Vec3(static_cast<double>(i), 0, 0);
  }
  set.particles[13].position = sc.truth.epochs[0].position;
  set.particles[13].vel_cov = 0.25 * Mat3::Identity();
  const auto r = pf_correct(set, sc.epochs[0], sc.base(), config(50));
  EXPECT_TRUE(r.resampled);
  EXPECT_NEAR(r.ess, 1.0, 1e-9);
  for (const auto& p : set.particles) {
    EXPECT_EQ(p.position, sc.truth.epochs[0].position);
    EXPECT_EQ(p.vel_mean, Vec3(13, 0, 0));
    EXPECT_EQ(p.vel_cov, 0.25 * Mat3::Identity());
  }
  EXPECT_NEAR(weight_sum(set), 1.0, 1e-9);
}

TEST(PfCorrect, EpochWithoutObservationsChangesNothing) {
  const Scenario sc = generate_scenario(fixtures::noiseless_config(3));
  auto set = init_particles(config(20), sc.truth.epochs[0].position, 0.5, std::nullopt);
  set.particles[3].log_weight = -1.0;
  const auto before = set.particles;
  EpochObservation blocked = sc.epochs[0];
  blocked.satellites.clear();
  const auto r = pf_correct(set, blocked, sc.base(), config(20));
  EXPECT_FALSE(r.corrected);
  EXPECT_FALSE(r.resampled);
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(set.particles[i].log_weight, before[i].log_weight);
    EXPECT_EQ(set.particles[i].position, before[i].position);
  }
}

TEST(ComputeEstimate, WeightedMomentsAndSpread) {
  ParticleSet set;
  set.particles.resize(2);
  set.particles[0].position = Vec3(0, 0, 0);
  set.particles[0].log_weight = std::log(0.25);
  set.particles[0].vel_mean = Vec3(4, 0, 0);
  set.particles[1].position = Vec3(4, 0, 0);
  set.particles[1].log_weight = std::log(0.75);
  const auto est = compute_estimate(set, true);
  EXPECT_NEAR(est.position.x(), 3.0, 1e-12);
  EXPECT_NEAR(est.velocity.x(), 1.0, 1e-12);
  EXPECT_NEAR(est.position_cov(0, 0), 0.25 * 9 + 0.75 * 1, 1e-12);
  EXPECT_NEAR(est.particle_spread, std::sqrt(3.0), 1e-12);
  EXPECT_TRUE(est.velocity_available);
}
