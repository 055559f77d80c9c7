#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/LU>

#include "rbpf/kalman.hpp"
#include "rbpf/obs_model.hpp"
#include "rbpf/simulator.hpp"
#include "kf_oracle.hpp"
#include "test_support.hpp"

using namespace rbpf;

TEST(KalmanHand, TimeUpdateScalarCase) {
  Particle p;
  p.vel_mean = Vec3::Zero();
  p.vel_cov = Mat3::Identity();
  NoiseModel noise;
  noise.dt = 1.0;
  noise.q_position = Mat3::Identity();
  noise.q_velocity = Mat3::Zero();
  const Particle out = kf_time_update(p, Vec3::Zero(), Vec3(1, 1, 1), noise);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(out.vel_mean(i), 0.5);
    EXPECT_EQ(out.vel_cov(i, i), 0.5);
  }
  EXPECT_EQ(out.vel_cov(0, 1), 0.0);
}

TEST(KalmanHand, VelocityBlockScalarCase) {
  Particle p;
  p.vel_mean = Vec3::Zero();
  p.vel_cov = Mat3::Identity();
  NoiseModel noise;
  noise.r_velocity = Mat3::Identity();
  EpochObservation e;
  e.wavelength_m = kGpsL1Wavelength;
  const VelocitySolution obs{Vec3(2, 2, 2), 0.0, {}, 0.0};
  const MeasurementUpdate mu = kf_measurement_update(p, e, obs, Vec3::Zero(), noise, {});
  ASSERT_TRUE(mu.applied);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(mu.particle.vel_mean(i), 1.0);
    EXPECT_EQ(mu.particle.vel_cov(i, i), 0.5);
  }
}

TEST(KalmanHand, ZeroInnovationTimeUpdateKeepsMean) {
  Particle p;
  p.vel_mean = Vec3(1.0, -2.0, 0.5);
  p.vel_cov = 0.3 * Mat3::Identity();
  NoiseModel noise;
  noise.dt = 2.0;
  const Particle out =
      kf_time_update(p, Vec3(1e6, 2e6, 3e6), Vec3(1e6, 2e6, 3e6) + 2.0 * p.vel_mean, noise);
  EXPECT_LT((out.vel_mean - p.vel_mean).norm(), 1e-9);
  // P - L N L^T + Q_l with N = 4P + Qn, L = 2P N^-1
  const Mat3 n = 4.0 * p.vel_cov + noise.q_position;
  const Mat3 l = 2.0 * p.vel_cov * n.inverse();
  const Mat3 expect = p.vel_cov - l * n * l.transpose() + noise.q_velocity;
  EXPECT_LT((out.vel_cov - expect).norm(), 1e-12);
}

namespace {

void expect_within(const std::vector<oracle::TrialError>& errs) {
  ASSERT_EQ(errs.size(), 1000u);
  for (std::size_t i = 0; i < errs.size(); ++i) {
    EXPECT_TRUE(errs[i].ok) << "trial " << i;
    EXPECT_LT(errs[i].mean, 1e-10) << "trial " << i;
    EXPECT_LT(errs[i].cov, 1e-10) << "trial " << i;
  }
}

}  // namespace

TEST(KalmanOracle, CorrectMatchesTextbookOnRandomInstances) {
  expect_within(oracle::check_kalman_correct(2024, 1000));
}

TEST(KalmanOracle, TimeUpdateMatchesTextbookOnRandomInstances) {
  expect_within(oracle::check_time_update(77, 1000));
}

TEST(KalmanOracle, MeasurementUpdateMatchesTextbookOnSimulatedEpochs) {
  auto cfg = fixtures::noiseless_config(5);
  cfg.noise = {0.5, 0.01, 0.03};
  expect_within(oracle::check_measurement_update(generate_scenario(cfg), 5, 1000));
}

TEST(KalmanHand, HugeQnLeavesVelocityAlone) {
  Particle p;
  p.vel_mean = Vec3(3.0, 0.0, -1.0);
  NoiseModel noise;
  noise.q_position = 1e12 * Mat3::Identity();
  const Vec3 disp(10.0, -7.0, 4.0);
  const Particle out = kf_time_update(p, Vec3::Zero(), disp, noise);
  EXPECT_LT((out.vel_mean - p.vel_mean).norm(), 1e-6 * disp.norm());
}

TEST(KalmanHand, TimeUpdateThrowsWhenDisplacementCovarianceSingular) {
  Particle p;
  p.vel_cov = Mat3::Zero();
  NoiseModel noise;
  noise.q_position = Mat3::Zero();
  EXPECT_THROW(kf_time_update(p, Vec3::Zero(), Vec3::Ones(), noise), std::domain_error);
}

TEST(KalmanHand, MeasurementUpdateWithoutBlocksIsIdentity) {
  Particle p;
  p.vel_mean = Vec3(1, 2, 3);
  EpochObservation e;
  e.wavelength_m = kGpsL1Wavelength;
  const MeasurementUpdate mu = kf_measurement_update(p, e, std::nullopt, Vec3::Zero(), {}, {});
  EXPECT_FALSE(mu.applied);
  EXPECT_FALSE(mu.singular);
  EXPECT_EQ(mu.particle.vel_mean, p.vel_mean);
  EXPECT_EQ(mu.particle.vel_cov, p.vel_cov);
}

TEST(KalmanHand, ZeroVelocityInnovationShrinksCovariance) {
  Particle p;
  p.vel_mean = Vec3(0.4, 0.1, -0.2);
  EpochObservation e;
  e.wavelength_m = kGpsL1Wavelength;
  const VelocitySolution obs{p.vel_mean, 0.0, {}, 0.0};
  const MeasurementUpdate mu = kf_measurement_update(p, e, obs, Vec3::Zero(), {}, {});
  EXPECT_EQ(mu.particle.vel_mean, p.vel_mean);
  EXPECT_LT(mu.particle.vel_cov.trace(), p.vel_cov.trace());
}

TEST(KalmanHand, AfvRowsAtTruthKeepMeanAndContract) {
  const Scenario sc = generate_scenario(fixtures::noiseless_config(3));
  Particle p;
  p.position = sc.truth.epochs[1].position;
  p.vel_mean = Vec3(0.2, -0.1, 0.3);
  for (bool with_q : {false, true}) {
    const MeasurementUpdate mu =
        kf_measurement_update(p, sc.epochs[1], std::nullopt, sc.base(), {}, {true, with_q});
    ASSERT_TRUE(mu.applied);
    EXPECT_LT((mu.particle.vel_mean - p.vel_mean).norm(), 1e-6);
    EXPECT_LT(mu.particle.vel_cov.trace(), p.vel_cov.trace());
    EXPECT_TRUE(is_spd(mu.particle.vel_cov));
  }
}

TEST(KalmanHand, AfvInnovationPullsTowardsTruth) {
  // a particle that overshot along +east should slow down along east
  const Scenario sc = generate_scenario(fixtures::noiseless_config(3));
  Particle p;
  p.position = sc.truth.epochs[1].position + sc.frame.rotate_to_ecef(EnuVector(0.03, 0, 0));
  const MeasurementUpdate mu =
      kf_measurement_update(p, sc.epochs[1], std::nullopt, sc.base(), {}, {true, false});
  ASSERT_TRUE(mu.applied);
  const EnuVector dv = sc.frame.rotate_to_enu(mu.particle.vel_mean - p.vel_mean);
  EXPECT_NEAR(dv.x(), -0.03, 0.005);
  EXPECT_NEAR(dv.y(), 0.0, 0.005);
}

TEST(KalmanHand, SingularInnovationCovarianceSkipsUpdate) {
  Particle p;
  p.vel_cov = Mat3::Zero();
  NoiseModel noise;
  noise.r_velocity = Mat3::Zero();
  EpochObservation e;
  e.wavelength_m = kGpsL1Wavelength;
  const VelocitySolution obs{Vec3(1, 1, 1), 0.0, {}, 0.0};
  const MeasurementUpdate mu = kf_measurement_update(p, e, obs, Vec3::Zero(), noise, {});
  EXPECT_TRUE(mu.singular);
  EXPECT_FALSE(mu.applied);
  EXPECT_EQ(mu.particle.vel_mean, p.vel_mean);
}
