#include <gtest/gtest.h>

#include <cmath>

#include "krum/simulator.hpp"
#include "oracles.hpp"

namespace krum {
namespace {

ExperimentConfig basin_config(Rule rule, std::uint64_t seed = 1) {
  ExperimentConfig cfg;
  cfg.n = 11;
  cfg.f = 2;
  cfg.rule = std::move(rule);
  cfg.cost = costs::Quadratic{Vector(10, 1.0)};
  cfg.estimator = estimators::Gaussian{0.5};
  cfg.attack = attacks::SignFlip{10.0};
  cfg.schedule = {0.5, 1.0, false};
  cfg.rounds = 3000;
  cfg.x0 = Vector(10, 10.0);
  cfg.seed = seed;
  return cfg;
}

TEST(RunRound, ExactStepWithoutNoise) {
  ExperimentConfig cfg;
  cfg.n = 4;
  cfg.f = 0;
  cfg.cost = costs::Quadratic{{1.5, -2.0, 0.25}};
  cfg.estimator = estimators::Gaussian{0.0};
  cfg.schedule = {1.0, 1.0, true};
  cfg.rounds = 1;
  const auto r = run_round({{7.0, 3.0, -9.0}, 0}, cfg);
  EXPECT_EQ(r.next.x, (Vector{1.5, -2.0, 0.25}));
  EXPECT_EQ(r.next.t, 1u);
  EXPECT_TRUE(r.record.selected_ids.empty());
  EXPECT_EQ(r.record.gamma, 1.0);
  EXPECT_EQ(r.record.agg_to_grad_dist, 0.0);
}

TEST(RunRound, OmniscientAttackJumpsByGammaTimesTarget) {
  ExperimentConfig cfg;
  cfg.n = 5;
  cfg.f = 1;
  cfg.cost = costs::Quadratic{{0.0, 0.0, 0.0}};
  cfg.estimator = estimators::Gaussian{1.0};
  const Vector u(3, 1e6);
  cfg.attack = attacks::OmniscientLinear{u};
  cfg.schedule = {0.3, 1.0, false};
  cfg.rounds = 1;
  const Vector x0{0.5, -0.5, 1.0};
  const auto r = run_round({x0, 0}, cfg);
  const double jump = std::sqrt(sq_distance(r.next.x, x0));
  EXPECT_NEAR(jump / (0.3 * norm(u)), 1.0, 1e-6);
  Vector expected = x0;
  add_scaled(expected, u, -0.3);
  EXPECT_LE(oracle::rel_err(r.next.x, expected), 1e-6);
}

TEST(RunExperiment, ZeroRoundsReturnsStart) {
  ExperimentConfig cfg = basin_config(rules::Krum{});
  cfg.rounds = 0;
  const auto trace = run_experiment(cfg);
  EXPECT_TRUE(trace.records.empty());
  EXPECT_EQ(trace.final_x, cfg.x0);
  EXPECT_FALSE(trace.diverged);
}

TEST(RunExperiment, DeterministicAndThreadInvariant) {
  ExperimentConfig cfg = basin_config(rules::Krum{}, 42);
  cfg.rounds = 200;
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(cfg);
  cfg.threads = 4;
  const auto c = run_experiment(cfg);
  ASSERT_EQ(a.records.size(), 200u);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.records, c.records);
  EXPECT_EQ(a.final_x, c.final_x);
  for (std::size_t t = 0; t < a.records.size(); ++t) EXPECT_EQ(a.records[t].t, t);
  cfg.seed = 43;
  EXPECT_NE(run_experiment(cfg).final_x, a.final_x);
}

TEST(RunExperiment, KrumReachesBasinWhereAveragingFails) {
  const auto kr = run_experiment(basin_config(rules::Krum{}));
  ASSERT_FALSE(kr.diverged);
  const double basin = eta(11, 2) * std::sqrt(10.0) * 0.5;
  EXPECT_LT(kr.records.back().grad_norm, basin);

  const auto avg = run_experiment(basin_config(rules::Average{}));
  EXPECT_TRUE(avg.diverged || avg.records.back().grad_norm > 10.0 * kr.records.back().grad_norm);
}

TEST(RunExperiment, HonestOnlyKrumMatchesAverage) {
  ExperimentConfig cfg;
  cfg.n = 6;
  cfg.f = 0;
  cfg.cost = costs::CosineBowl{0.1, 4};
  cfg.estimator = estimators::Gaussian{0.0};
  cfg.schedule = {0.5, 0.75, false};
  cfg.rounds = 100;
  cfg.x0 = {3.0, -2.0, 5.0, 0.5};
  cfg.rule = rules::Average{};
  const auto avg = run_experiment(cfg);
  cfg.rule = rules::Krum{};
  const auto kr = run_experiment(cfg);
  ASSERT_EQ(avg.records.size(), kr.records.size());
  // Krum returns the common vector itself; the average of n copies of it can
  // differ from it in the last bit.
  for (std::size_t t = 0; t < avg.records.size(); ++t)
    EXPECT_NEAR(avg.records[t].x_norm, kr.records[t].x_norm, 1e-12 * kr.records[t].x_norm);
  EXPECT_LE(oracle::rel_err(avg.final_x, kr.final_x), 1e-12);
}

TEST(RunExperiment, SilenceIsTheZeroDefault) {
  ExperimentConfig cfg;
  cfg.n = 4;
  cfg.f = 1;
  cfg.rule = rules::Average{};
  cfg.cost = costs::Quadratic{{0.0, 0.0}};
  cfg.estimator = estimators::Gaussian{0.0};
  cfg.schedule = {1.0, 1.0, true};
  cfg.rounds = 1;
  cfg.x0 = {4.0, -8.0};
  cfg.attack = attacks::Silence{};
  const auto silent = run_experiment(cfg);
  cfg.attack = attacks::GaussianNoise{{0.0, 0.0}, 0.0};
  const auto zero = run_experiment(cfg);
  EXPECT_EQ(silent.final_x, zero.final_x);
  EXPECT_EQ(silent.final_x, (Vector{1.0, -2.0}));  // x0 - 3/4 * x0
}

TEST(RunExperiment, SafetyRadiusRoundsNeverSelectByzantine) {
  ExperimentConfig cfg = basin_config(rules::Krum{}, 7);
  cfg.rounds = 500;
  cfg.attack = attacks::GaussianNoise{{}, 200.0};
  const auto trace = run_experiment(cfg);
  std::size_t held = 0;
  for (const auto& rec : trace.records) {
    ASSERT_TRUE(rec.safety_radius_held.has_value());
    if (*rec.safety_radius_held) {
      ++held;
      EXPECT_FALSE(rec.byzantine_selected) << "t=" << rec.t;
    }
  }
  EXPECT_GT(held, 0u);
}

TEST(RunExperiment, ByzantineSelectedMatchesIds) {
  ExperimentConfig cfg = basin_config(rules::MultiKrum{3}, 9);
  cfg.rounds = 100;
  cfg.attack = attacks::GaussianNoise{{}, 0.5};
  cfg.byzantine_ids = {1, 5};
  for (const auto& rec : run_experiment(cfg).records) {
    bool hit = false;
    for (int id : rec.selected_ids) hit = hit || id == 1 || id == 5;
    EXPECT_EQ(rec.byzantine_selected, hit);
    EXPECT_EQ(rec.selected_ids.size(), 3u);
  }
}

TEST(RunExperiment, DivergenceTruncatesTrace) {
  ExperimentConfig cfg;
  cfg.n = 3;
  cfg.f = 1;
  cfg.rule = rules::Average{};
  cfg.cost = costs::Quadratic{{0.0}};
  cfg.estimator = estimators::Gaussian{0.0};
  cfg.attack = attacks::SignFlip{1e300};
  cfg.schedule = {1.0, 1.0, true};
  cfg.rounds = 50;
  cfg.x0 = {1.0};
  const auto trace = run_experiment(cfg);
  ASSERT_TRUE(trace.diverged);
  ASSERT_TRUE(trace.diverged_at.has_value());
  EXPECT_LT(trace.records.size(), 50u);
  EXPECT_EQ(trace.records.back().t, *trace.diverged_at);
  for (std::size_t t = 0; t < trace.records.size(); ++t) EXPECT_EQ(trace.records[t].t, t);
}

TEST(Validate, RejectsBeforeRoundZero) {
  ExperimentConfig cfg = basin_config(rules::Krum{});
  cfg.f = 5;
  EXPECT_THROW(run_experiment(cfg), PreconditionViolation);
  cfg = basin_config(rules::MultiKrum{5});
  EXPECT_THROW(run_experiment(cfg), PreconditionViolation);
  cfg = basin_config(rules::Krum{});
  cfg.byzantine_ids = {1};
  EXPECT_THROW(run_experiment(cfg), InvalidInput);
  cfg.byzantine_ids = {1, 1};
  EXPECT_THROW(run_experiment(cfg), InvalidInput);
  cfg = basin_config(rules::Krum{});
  cfg.x0 = {1.0};
  EXPECT_THROW(run_experiment(cfg), InvalidInput);
  cfg = basin_config(rules::Krum{});
  cfg.schedule.p = 0.5;
  EXPECT_THROW(run_experiment(cfg), InvalidSchedule);
}

}  // namespace
}  // namespace krum
