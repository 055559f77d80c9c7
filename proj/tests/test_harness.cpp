#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "rbpf/harness.hpp"
#include "rbpf/text_io.hpp"
#include "test_support.hpp"

using namespace rbpf;
namespace fs = std::filesystem;

namespace {

RunConfig run_config(int n, std::uint64_t seed = 2) {
  RunConfig cfg;
  cfg.filter.num_particles = n;
  cfg.filter.seed = seed;
  return cfg;
}

ScenarioConfig noisy_config(double duration) {
  auto cfg = fixtures::noiseless_config(duration);
  cfg.noise = {0.5, 0.01, 0.03};
  return cfg;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rbpf_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Harness, FilterNamesRoundTrip) {
  for (auto k : {FilterKind::kRbpf, FilterKind::kConventionalPf, FilterKind::kLsFix}) {
    EXPECT_EQ(parse_filter_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_filter_kind("ekf"), ParseError);
}

TEST(Harness, SummarizeErrorsAgainstHandValues) {
  const auto s = summarize_errors({0.1, 0.2, 0.4, 0.5}, 0.3);
  EXPECT_EQ(s.count, 4);
  EXPECT_NEAR(s.rmse, std::sqrt((0.01 + 0.04 + 0.16 + 0.25) / 4), 1e-15);
  EXPECT_NEAR(s.mean, 0.3, 1e-15);
  EXPECT_EQ(s.max, 0.5);
  EXPECT_EQ(s.fraction_under, 0.5);
  ASSERT_FALSE(s.cdf.empty());
  EXPECT_EQ(s.cdf.back().fraction, 1.0);
  EXPECT_EQ(s.cdf.back().error, 0.5);
  for (std::size_t i = 1; i < s.cdf.size(); ++i) {
    EXPECT_GE(s.cdf[i].fraction, s.cdf[i - 1].fraction);
    EXPECT_GE(s.cdf[i].error, s.cdf[i - 1].error);
  }
  const auto empty = summarize_errors({}, 0.3);
  EXPECT_EQ(empty.count, 0);
  EXPECT_EQ(empty.fraction_under, 0.0);
}

TEST(Harness, LargeCdfIsCappedAndMonotone) {
  std::vector<double> e;
  for (int i = 0; i < 1000; ++i) e.push_back(std::fmod(i * 0.37, 1.3));
  const auto s = summarize_errors(e, 0.3);
  EXPECT_LE(s.cdf.size(), 100u);
  EXPECT_EQ(s.cdf.back().fraction, 1.0);
  for (std::size_t i = 1; i < s.cdf.size(); ++i) {
    EXPECT_GT(s.cdf[i].fraction, s.cdf[i - 1].fraction);
  }
  const auto under = std::count_if(e.begin(), e.end(), [](double x) { return x < 0.3; });
  EXPECT_EQ(s.fraction_under, static_cast<double>(under) / 1000.0);
}

TEST(Harness, NoiselessRbpfRun) {
  const Scenario sc = generate_scenario(fixtures::noiseless_config(30));
  const auto r = run_filter(sc, FilterKind::kRbpf, run_config(300));
  EXPECT_FALSE(r.summary.diverged);
  EXPECT_EQ(r.summary.num_epochs, 30);
  EXPECT_LT(r.summary.position.rmse, 0.05);
  EXPECT_EQ(r.summary.position_availability, 1.0);
  EXPECT_EQ(r.summary.velocity_availability, 1.0);
  EXPECT_TRUE(r.summary.covariances_ok);
  EXPECT_LT(r.summary.max_weight_sum_error, 1e-9);
}

TEST(Harness, LsFixIsExactWithoutNoise) {
  const Scenario sc = generate_scenario(fixtures::noiseless_config(10));
  const auto r = run_filter(sc, FilterKind::kLsFix, run_config(1));
  EXPECT_LT(r.summary.position.max, 1e-6);
  EXPECT_LT(r.summary.velocity.max, 1e-6);
}

TEST(Harness, ReportsAreByteIdenticalAcrossRuns) {
  const Scenario sc = generate_scenario(noisy_config(20));
  for (auto k : {FilterKind::kRbpf, FilterKind::kConventionalPf}) {
    const auto a = run_filter(sc, k, run_config(200));
    const auto b = run_filter(sc, k, run_config(200));
    EXPECT_EQ(report_csv(a), report_csv(b));
    EXPECT_EQ(summary_json(a.summary).dump(), summary_json(b.summary).dump());
  }
}

TEST(Harness, BlockedEpochsAreMarked) {
  auto cfg = noisy_config(20);
  cfg.blockage_windows = {{8, 9}};
  const Scenario sc = generate_scenario(cfg);
  const auto r = run_filter(sc, FilterKind::kConventionalPf, run_config(200));
  EXPECT_TRUE(r.epochs[8].blocked);
  EXPECT_FALSE(r.epochs[8].velocity_available);
  EXPECT_TRUE(r.epochs[8].position_available);
  EXPECT_FALSE(r.epochs[7].blocked);
  EXPECT_EQ(r.summary.velocity_availability, 18.0 / 20.0);
  const auto rb = run_filter(sc, FilterKind::kRbpf, run_config(200));
  EXPECT_TRUE(rb.summary.blockage_spread_grows);
  EXPECT_EQ(rb.summary.velocity_availability, 1.0);
}

TEST(Harness, DivergenceStopsTheRun) {
  const Scenario sc = generate_scenario(noisy_config(20));
  auto cfg = run_config(50);
  cfg.filter.divergence_spread_m = 1e-6;
  const auto r = run_filter(sc, FilterKind::kRbpf, cfg);
  EXPECT_TRUE(r.summary.diverged);
  EXPECT_LT(r.summary.num_epochs, 20);
  EXPECT_EQ(static_cast<int>(r.epochs.size()), r.summary.num_epochs);
}

TEST(Harness, CompareWithItselfGivesZeroDeltas) {
  const Scenario sc = generate_scenario(noisy_config(20));
  const auto r = run_filter(sc, FilterKind::kRbpf, run_config(100));
  const fs::path dir = scratch("compare");
  write_report(dir, "rbpf", r);
  const auto errs = read_report_errors(dir / "rbpf_epochs.csv");
  ASSERT_EQ(errs.epochs.size(), 20u);
  EXPECT_EQ(errs.position_error[5], r.epochs[5].position_error);
  const auto c = compare_reports(errs, errs);
  std::size_t lines = 0;
  std::size_t pos = c.summary_csv.find('\n') + 1;
  while (pos < c.summary_csv.size()) {
    const std::size_t end = c.summary_csv.find('\n', pos);
    const std::string line = c.summary_csv.substr(pos, end - pos);
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "0") << line;
    pos = end + 1;
    ++lines;
  }
  EXPECT_GE(lines, 3u);

  auto shorter = errs;
  shorter.epochs.pop_back();
  shorter.position_error.pop_back();
  shorter.velocity_error.pop_back();
  shorter.position_available.pop_back();
  shorter.velocity_available.pop_back();
  EXPECT_THROW(compare_reports(errs, shorter), std::invalid_argument);
  auto renumbered = errs;
  renumbered.epochs[4] = 99;
  try {
    compare_reports(errs, renumbered);
    ADD_FAILURE() << "mismatch accepted";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("99"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(Harness, SweepValidatesCountsAndRunsBothFilters) {
  auto make = [](std::uint64_t seed) {
    auto cfg = noisy_config(8);
    cfg.seed = seed;
    return generate_scenario(cfg);
  };
  EXPECT_THROW(particle_sweep(make, {0}, {1}, run_config(1)), std::invalid_argument);
  EXPECT_THROW(particle_sweep(make, {}, {1}, run_config(1)), std::invalid_argument);
  const auto s = particle_sweep(make, {100}, {4}, run_config(1));
  ASSERT_EQ(s.cells.size(), 2u);
  ASSERT_EQ(s.rows.size(), 2u);
  for (const auto& c : s.cells) {
    ASSERT_TRUE(c.summary.has_value()) << c.error;
    EXPECT_EQ(c.summary->num_particles, 100);
    EXPECT_EQ(c.summary->seed, 4u);
  }
  EXPECT_NE(s.csv().find("conventional_pf"), std::string::npos);
  EXPECT_EQ(s.rows[0].runs, 1);
  EXPECT_EQ(s.rows[0].std_fraction, 0.0);
}

TEST(Harness, GridMapShapeAndPeak) {
  const Scenario sc = generate_scenario(fixtures::noiseless_config(3));
  const EnuVector truth = sc.frame.to_enu(sc.truth.epochs[1].position);
  const LikelihoodOptions opts{0.02, 1.0, true};

  const auto one = grid_likelihood_map(sc, 1, truth, 0.0, 0.01, opts);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].log_likelihood,
            particle_likelihood(sc.epochs[1], sc.frame.to_ecef(truth), sc.base(), opts)
                .log_likelihood);

  const EnuVector off = truth + EnuVector(0.13, -0.07, 0.0);
  const auto grid = grid_likelihood_map(sc, 1, off, 0.6, 0.01, opts);
  EXPECT_EQ(grid.size(), 61u * 61u);
  const auto best = std::max_element(grid.begin(), grid.end(), [](const auto& a, const auto& b) {
    return a.log_likelihood < b.log_likelihood;
  });
  EXPECT_LT(std::hypot(best->east - (-0.13), best->north - 0.07), 0.02);

  EXPECT_THROW(grid_likelihood_map(sc, 1, truth, 100.0, 0.01, opts), std::invalid_argument);
  EXPECT_THROW(grid_likelihood_map(sc, 42, truth, 1.0, 0.1, opts), std::invalid_argument);
  EXPECT_THROW(grid_likelihood_map(sc, 1, truth, 1.0, 0.0, opts), std::invalid_argument);
}

TEST(Harness, RunConfigJson) {
  const auto cfg = run_config_from_json(
      {{"init", "ls_fix"}, {"prior_sigma_m", 2.0}, {"num_particles", 64}});
  EXPECT_EQ(cfg.init, InitMode::kLsFix);
  EXPECT_EQ(cfg.prior_sigma_m, 2.0);
  EXPECT_EQ(cfg.filter.num_particles, 64);
  const auto back = run_config_from_json(run_config_to_json(cfg));
  EXPECT_EQ(run_config_to_json(back), run_config_to_json(cfg));
  EXPECT_THROW(run_config_from_json({{"init", "guess"}}), ParseError);
  EXPECT_THROW(run_config_from_json({{"prior_sigma_m", -1.0}}), ParseError);
}
