#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "transpol/errors.hpp"
#include "transpol/eval.hpp"
#include "transpol/lqr.hpp"

namespace {

using namespace transpol;

constexpr double kPi = std::numbers::pi;

Eigen::MatrixXd reference_gain() { return solve_care(LinearSystem::point_mass(5.0)).K; }

TEST(Task, StationaryLayout) {
  const ReachTask task = make_task(TaskVariant::stationary, 50, 0.02);
  ASSERT_EQ(task.targets.size(), 8u);
  for (std::size_t k = 0; k < 8; ++k) {
    const double a = 2.0 * kPi * static_cast<double>(k) / 8.0;
    ASSERT_EQ(task.targets[k].size(), 50u);
    for (const Vec4& x : task.targets[k]) {
      EXPECT_NEAR(x[0], 0.7 * std::cos(a), 1e-15);
      EXPECT_NEAR(x[1], 0.7 * std::sin(a), 1e-15);
      EXPECT_EQ(x[2], 0.0);
      EXPECT_EQ(x[3], 0.0);
    }
  }
  EXPECT_THROW((void)make_task(TaskVariant::stationary, 0, 0.02), RangeError);
}

TEST(Task, MovingTargetsCircleClockwise) {
  const ReachTask task = make_task(TaskVariant::moving, 3, 0.02);
  // target 0 at (0.7, 0) moves along -y, target 2 at (0, 0.7) along +x
  EXPECT_NEAR(task.targets[0][0][3], -0.5, 1e-15);
  EXPECT_NEAR(task.targets[0][1][1], -0.01, 1e-15);
  EXPECT_NEAR(task.targets[2][0][2], 0.5, 1e-15);
  for (std::size_t k = 0; k < 8; ++k) {
    const Vec4& x = task.targets[k][0];
    // angular momentum x*vy - y*vx is negative for clockwise motion
    EXPECT_LT(x[0] * x[3] - x[1] * x[2], 0.0);
  }
}

TEST(Task, MovingTargetStopsAtBoundary) {
  const auto traj = target_trajectory({0.95, 0.0, 1.0, 0.5}, 30, 0.1, 1.0);
  // reference: free particle, clip and zero the clipped axis velocity
  double x = 0.95, y = 0.0, vx = 1.0, vy = 0.5;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    EXPECT_DOUBLE_EQ(traj[t][0], x);
    EXPECT_DOUBLE_EQ(traj[t][1], y);
    EXPECT_LE(std::abs(traj[t][0]), 1.0);
    EXPECT_LE(std::abs(traj[t][1]), 1.0);
    x += 0.1 * vx;
    if (x > 1.0) { x = 1.0; vx = 0.0; }
    y += 0.1 * vy;
    if (y > 1.0) { y = 1.0; vy = 0.0; }
  }
  EXPECT_EQ(traj.back()[2], 0.0);
  EXPECT_EQ(traj.back()[3], 0.0);
}

TEST(Performance, ConstantDistanceExample) {
  const std::vector<Vec2> pos(200, Vec2{0.0, 0.0});
  const std::vector<Vec2> tgt(200, Vec2{0.7, 0.0});
  EXPECT_NEAR(performance(pos, tgt, 0.02), 2.8, 1e-12);
  EXPECT_EQ(performance(tgt, tgt, 0.02), 0.0);
  EXPECT_THROW((void)performance(pos, std::vector<Vec2>(3), 0.02), DimensionError);
}

TEST(Performance, EpisodeUsesStatesAfterEachStep) {
  RngStream rng(1);
  EpisodeRecord ep;
  for (int t = 0; t <= 30; ++t) ep.states.push_back({rng.normal(), rng.normal(), 0, 0});
  for (int t = 0; t < 30; ++t) {
    StepRecord s;
    s.target = {rng.normal(), rng.normal(), 0, 0};
    ep.steps.push_back(s);
  }
  double brute = 0.0;
  for (int t = 0; t < 30; ++t) {
    const double dx = ep.states[t + 1][0] - ep.steps[t].target[0];
    const double dy = ep.states[t + 1][1] - ep.steps[t].target[1];
    brute += 0.05 * std::sqrt(dx * dx + dy * dy);
  }
  EXPECT_NEAR(episode_performance(ep, 0.05), brute, 1e-12);
}

TEST(Evaluate, LqrReachesAllStationaryTargets) {
  LqrController lqr(reference_gain(), 1.0);
  const EvalReport r = evaluate(lqr, make_task(TaskVariant::stationary, 200, 0.02), EnvParams{});
  ASSERT_EQ(r.target_J.size(), 8u);
  double sum = 0.0;
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_LE(r.distances[k].back(), 0.02) << "target " << k;
    EXPECT_NEAR(r.target_J[k], 0.02 * std::accumulate(r.distances[k].begin(), r.distances[k].end(), 0.0), 1e-12);
    sum += r.target_J[k];
  }
  EXPECT_NEAR(r.total_J, sum, 1e-12);
  // the box-clipped law is symmetric under the square's reflections: axis targets
  // share one cost and diagonal targets another
  for (std::size_t k = 2; k < 8; k += 2) EXPECT_NEAR(r.target_J[k], r.target_J[0], 1e-9);
  for (std::size_t k = 3; k < 8; k += 2) EXPECT_NEAR(r.target_J[k], r.target_J[1], 1e-9);
}

TEST(Evaluate, NoiselessByDefaultAndDeterministic) {
  LqrController lqr(reference_gain(), 1.0);
  const auto task = make_task(TaskVariant::moving, 100, 0.02);
  const EvalReport a = evaluate(lqr, task, EnvParams{});
  const EvalReport b = evaluate(lqr, task, EnvParams{}, EvalOptions{false, 99});
  EXPECT_EQ(a.total_J, b.total_J);
  EvalOptions noisy;
  noisy.with_noise = true;
  EXPECT_NE(evaluate(lqr, task, EnvParams{}, noisy).total_J, a.total_J);
}

TEST(Perturbation, LqrDegradesMonotonicallyUpToNinetyDegrees) {
  LqrController lqr(reference_gain(), 1.0);
  const auto task = make_task(TaskVariant::stationary, 200, 0.02);
  const std::vector<double> grid{0, 15, 30, 45, 60, 75, 90};
  const auto reports = perturbation_sweep(lqr, task, EnvParams{}, grid);
  for (std::size_t i = 1; i < reports.size(); ++i) {
    EXPECT_GE(reports[i].total_J, reports[i - 1].total_J) << grid[i] << " deg";
  }
  EXPECT_GE(reports.back().total_J, 3.0 * reports.front().total_J);
  EXPECT_NEAR(reports.back().gamma, kPi / 2, 1e-15);
}

TEST(Perturbation, SweepGridAndSymmetry) {
  const auto grid = default_sweep_degrees();
  ASSERT_EQ(grid.size(), 17u);
  EXPECT_EQ(grid.front(), -120.0);
  EXPECT_EQ(grid.back(), 120.0);
  // mirrored layout: +gamma and -gamma cost the same
  LqrController lqr(reference_gain(), 1.0);
  const auto task = make_task(TaskVariant::stationary, 200, 0.02);
  const std::vector<double> pm{-45, 45};
  const auto r = perturbation_sweep(lqr, task, EnvParams{}, pm);
  EXPECT_NEAR(r[0].total_J, r[1].total_J, 1e-9);
}

TEST(Report, CsvRowsUseDegrees) {
  LqrController lqr(reference_gain(), 1.0);
  const auto task = make_task(TaskVariant::stationary, 10, 0.02);
  const std::vector<double> g{30};
  const auto reports = perturbation_sweep(lqr, task, EnvParams{}, g);
  std::ostringstream out;
  write_report_csv(out, reports);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "controller,variant,gamma,target_idx,J");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("lqr,stationary,30,0,", 0), 0u) << line;
  int rows = 1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 8);
}

TEST(Controllers, HoldRandomKeepsControlForHoldSteps) {
  HoldRandomController c(1.0, 4, RngStream(3));
  c.reset(2);
  const std::vector<Vec4> y(2), tgt(2);
  std::vector<std::vector<Vec2>> seq;
  for (int t = 0; t < 12; ++t) seq.push_back(c.act(y, tgt));
  for (int t = 0; t < 12; ++t) {
    for (int b = 0; b < 2; ++b) {
      EXPECT_EQ(seq[t][b], seq[(t / 4) * 4][b]);
      EXPECT_LE(std::abs(seq[t][b][0]), 1.0);
    }
  }
  EXPECT_NE(seq[0][0], seq[4][0]);
  EXPECT_NE(seq[0][0], seq[0][1]);
}

TEST(Controllers, StateSourceNames) {
  EXPECT_EQ(parse_state_source("estimate"), StateSource::estimate);
  EXPECT_EQ(to_string(StateSource::observation), "observation");
  EXPECT_THROW((void)parse_state_source("oracle"), ConfigError);
  const PolicyModel p(4, 1.0, RngStream(1));
  EXPECT_THROW(PolicyController(p, ActionMode::mean, RngStream(1), nullptr, StateSource::estimate), ContractError);
}

TEST(Controllers, PolicyActionsStayInBox) {
  const PolicyModel p(8, 1.0, RngStream(5));
  const TransitionModel m(8, RngStream(6));
  for (const auto source : {StateSource::observation, StateSource::estimate}) {
    PolicyController c(p, ActionMode::sample, RngStream(7), &m, source);
    const auto r = evaluate(c, make_task(TaskVariant::stationary, 40, 0.02), EnvParams{});
    for (const auto& ep : r.episodes) {
      for (const auto& s : ep.steps) {
        EXPECT_LT(std::abs(s.u[0]), 1.0);
        EXPECT_LT(std::abs(s.u[1]), 1.0);
      }
    }
  }
}

std::vector<EpisodeRecord> random_episodes(std::size_t n, std::size_t T) {
  HoldRandomController c(1.0, 20, RngStream(11));
  std::vector<RngStream> streams;
  for (std::size_t k = 0; k < n; ++k) streams.push_back(RngStream(20 + k));
  const std::vector<std::vector<Vec4>> targets(n, std::vector<Vec4>(T, Vec4{}));
  return rollout_batch(c, EnvParams{}, Vec4{}, targets, streams);
}

TEST(ModelChecks, UntrainedModelDriftsAutoregressively) {
  const TransitionModel m(16, RngStream(8));
  const auto eps = random_episodes(4, 200);
  const auto err = autoregressive_errors(m, eps, 30, 100);
  ASSERT_EQ(err.size(), 100u);
  EXPECT_GT(std::accumulate(err.begin(), err.end(), 0.0) / 100.0, 0.1);
  EXPECT_THROW((void)autoregressive_errors(m, eps, 150, 100), ContractError);
  const auto single = autoregressive_prediction_eval(m, eps[0], 30, 100);
  EXPECT_EQ(single.size(), 100u);
}

TEST(ModelChecks, OneStepMseMatchesManualLoop) {
  const TransitionModel m(8, RngStream(9));
  const auto eps = random_episodes(2, 20);
  double acc = 0.0;
  for (const auto& ep : eps) {
    const ad::NoGradGuard ng;
    ad::Tensor h = m.initial_hidden(1);
    for (const auto& s : ep.steps) {
      const auto out = m.forward(ad::Tensor::from({1, 4}, {s.y.begin(), s.y.end()}),
                                 ad::Tensor::from({1, 2}, {s.u.begin(), s.u.end()}), h);
      h = out.hidden;
      for (int d = 0; d < 4; ++d) {
        const double e = s.y[d] + out.mean_delta.data()[d] - s.y_next[d];
        acc += e * e;
      }
    }
  }
  EXPECT_NEAR(one_step_mse(m, eps), acc / (2 * 20 * 4), 1e-12);
}

}  // namespace
