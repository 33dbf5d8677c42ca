#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "transpol/errors.hpp"
#include "transpol/trainer.hpp"

namespace {

using namespace transpol;
namespace fs = std::filesystem;

TrainConfig tiny_config() {
  TrainConfig c;
  c.episode_steps = 25;
  c.episodes_per_iteration = 3;
  c.iterations = 2;
  c.memory_size = 20;
  c.transition_hidden_size = 8;
  c.policy_hidden_size = 8;
  c.transition_batches_per_iteration = 2;
  c.transition_batch_size = 4;
  c.policy_batches_per_iteration = 2;
  c.policy_batch_size = 4;
  c.warmup_steps = 10;
  c.unroll_steps = 4;
  c.heldout_episodes = 2;
  c.autoregressive_horizon = 10;
  c.seed = 42;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "transpol_test_trainer" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::vector<double>> snapshot(const ParameterList& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

MemoryBuffer filled_memory(const Trainer& t, std::size_t iterations) {
  MemoryBuffer m(t.config().memory_size, t.config().episode_steps);
  for (std::size_t i = 1; i <= iterations; ++i) {
    for (auto& e : t.collect_episodes(i)) m.push(std::move(e));
  }
  return m;
}

TEST(Config, RolloutsPerEpisode) {
  TrainConfig c;
  EXPECT_EQ(c.rollouts_per_episode(), 6u);
  c.warmup_steps = 201;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.unroll_steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.target_radius = 2.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.env.dt = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Targets, TrainingTargetsLieOnCircle) {
  TrainConfig c = tiny_config();
  RngStream rng(1);
  const auto targets = draw_training_targets(c, 50, rng);
  ASSERT_EQ(targets.size(), 50u);
  for (const auto& seq : targets) {
    ASSERT_EQ(seq.size(), c.episode_steps);
    EXPECT_NEAR(std::hypot(seq[0][0], seq[0][1]), 0.7, 1e-12);
    EXPECT_EQ(seq.front(), seq.back());
  }
}

TEST(Trainer, BookkeepingCountsEverything) {
  Trainer t(tiny_config());
  const auto& c = t.config();
  for (std::size_t i = 1; i <= 2; ++i) {
    const auto& r = t.run_iteration();
    EXPECT_EQ(r.iter, i);
    EXPECT_EQ(r.episodes, i * c.episodes_per_iteration);
    EXPECT_EQ(r.env_steps, i * c.episodes_per_iteration * c.episode_steps);
    EXPECT_EQ(r.updates_t, i * c.transition_batches_per_iteration);
    EXPECT_EQ(r.updates_p, i * c.policy_batches_per_iteration);
    EXPECT_DOUBLE_EQ(r.seconds, static_cast<double>(r.env_steps) * c.env.dt);
    EXPECT_TRUE(std::isfinite(r.loss_t));
    EXPECT_TRUE(std::isfinite(r.loss_p));
  }
  EXPECT_EQ(t.memory().size(), 6u);
}

TEST(Trainer, MemoryCapacityBoundsBuffer) {
  TrainConfig c = tiny_config();
  c.memory_size = 4;
  c.iterations = 3;
  Trainer t(c);
  for (int i = 0; i < 3; ++i) t.run_iteration();
  EXPECT_EQ(t.memory().size(), 4u);
  EXPECT_EQ(t.memory().episodes().back()->iteration, 2u);
}

TEST(Trainer, SameSeedSameEverything) {
  Trainer a(tiny_config()), b(tiny_config());
  for (int i = 0; i < 2; ++i) {
    const auto ra = a.run_iteration();
    const auto rb = b.run_iteration();
    EXPECT_EQ(ra.loss_t, rb.loss_t);
    EXPECT_EQ(ra.loss_p, rb.loss_p);
    EXPECT_EQ(ra.J_stationary, rb.J_stationary);
  }
  EXPECT_EQ(snapshot(a.policy().parameters()), snapshot(b.policy().parameters()));
  EXPECT_EQ(snapshot(a.transition().parameters()), snapshot(b.transition().parameters()));
}

TEST(Trainer, DifferentSeedsDiffer) {
  TrainConfig c = tiny_config();
  Trainer a(c);
  c.seed = 43;
  Trainer b(c);
  EXPECT_NE(snapshot(a.policy().parameters()), snapshot(b.policy().parameters()));
}

TEST(Trainer, ZeroLearningRateFreezesParameters) {
  TrainConfig c = tiny_config();
  c.policy_learning_rate = 0.0;
  c.transition_learning_rate = 0.0;
  Trainer t(c);
  const auto p0 = snapshot(t.policy().parameters());
  const auto m0 = snapshot(t.transition().parameters());
  t.run_iteration();
  EXPECT_EQ(snapshot(t.policy().parameters()), p0);
  EXPECT_EQ(snapshot(t.transition().parameters()), m0);
}

TEST(Updates, TransitionLossDecreases) {
  Trainer t(tiny_config());
  const MemoryBuffer memory = filled_memory(t, 2);
  TransitionModel model = t.transition().clone();
  AdamOptions ao;
  ao.learning_rate = 5e-3;
  Adam opt(model.parameters(), ao);
  TransitionUpdateOptions o;
  o.updates = 1;
  o.batch_size = 6;
  const RngStream s(5);
  const double first = update_transition(memory, model, opt, o, s);
  double last = first;
  for (int k = 0; k < 30; ++k) last = update_transition(memory, model, opt, o, s);
  EXPECT_LT(last, first);
  EXPECT_EQ(opt.step_count(), 31u);
}

TEST(Updates, PolicyUpdateLeavesTransitionUntouched) {
  Trainer t(tiny_config());
  const MemoryBuffer memory = filled_memory(t, 1);
  const TransitionModel transition = t.transition().clone();
  PolicyModel policy = t.policy().clone();
  Adam opt(policy.parameters(), AdamOptions{});
  const auto before = snapshot(transition.parameters());
  const auto p_before = snapshot(policy.parameters());
  PolicyUpdateOptions o;
  o.updates = 3;
  o.batch_size = 3;
  o.warmup = 10;
  o.unroll = 4;
  (void)update_policy(memory, transition, policy, opt, o, RngStream(6));
  EXPECT_EQ(snapshot(transition.parameters()), before);
  EXPECT_NE(snapshot(policy.parameters()), p_before);
  for (const auto& p : transition.parameters()) {
    EXPECT_TRUE(p.tensor.requires_grad());
    for (double g : p.tensor.grad()) EXPECT_EQ(g, 0.0);
  }
}

TEST(Updates, PolicyLossIgnoresUnusedTail) {
  Trainer t(tiny_config());
  const MemoryBuffer memory = filled_memory(t, 1);
  RngStream pick(7);
  const auto batch = memory.sample(3, pick);
  PolicyUpdateOptions o;
  o.warmup = 10;
  o.unroll = 4;
  const auto loss_of = [&](std::span<const EpisodePtr> b) {
    ad::Tape tape;
    const ad::TapeScope scope(tape);
    RngStream mr(1), pr(2);
    return policy_batch_loss(t.transition(), t.policy(), b, o, 3.0, mr, pr).item();
  };
  // T = 25, w = 10: steps 20..24 belong to no segment
  std::vector<EpisodePtr> edited;
  for (const auto& e : batch) {
    auto copy = std::make_shared<EpisodeRecord>(*e);
    for (std::size_t s = 20; s < 25; ++s) {
      copy->steps[s].y = {0.9, -0.9, 0.5, 0.5};
      copy->steps[s].u = {1.0, 1.0};
    }
    edited.push_back(copy);
  }
  EXPECT_EQ(loss_of(batch), loss_of(edited));
  // editing a warm-up step does change the loss
  auto changed = std::make_shared<EpisodeRecord>(*batch[0]);
  changed->steps[5].y[0] += 0.3;
  std::vector<EpisodePtr> edited2{changed, batch[1], batch[2]};
  EXPECT_NE(loss_of(batch), loss_of(edited2));
}

TEST(Updates, MicroBatchingDoesNotChangeGradient) {
  Trainer t(tiny_config());
  const MemoryBuffer memory = filled_memory(t, 2);
  const auto run_with = [&](std::size_t micro) {
    TransitionModel model = t.transition().clone();
    Adam opt(model.parameters(), AdamOptions{});
    TransitionUpdateOptions o;
    o.updates = 1;
    o.batch_size = 6;
    o.micro_batch = micro;
    const double loss = update_transition(memory, model, opt, o, RngStream(8));
    return std::make_pair(loss, snapshot(model.parameters()));
  };
  const auto [l1, p1] = run_with(1);
  const auto [l6, p6] = run_with(64);
  EXPECT_NEAR(l1, l6, 1e-12 * std::abs(l6));
  for (std::size_t i = 0; i < p1.size(); ++i) {
    for (std::size_t j = 0; j < p1[i].size(); ++j) EXPECT_NEAR(p1[i][j], p6[i][j], 1e-9);
  }
}

TEST(Log, WriteReadRoundTrip) {
  IterationRecord r;
  r.iter = 3;
  r.loss_t = -1.25;
  r.loss_p = 0.1;
  r.mse_1step = 1e-3;
  r.J_stationary = 12.5;
  r.J_moving = 13.5;
  r.seconds = 12.0;
  r.episodes = 30;
  r.env_steps = 6000;
  r.updates_t = 90;
  r.updates_p = 90;
  r.ar_error = 0.3;
  const fs::path dir = fresh_dir("log");
  write_train_log(dir / "log.csv", std::span(&r, 1));
  const auto back = read_train_log(dir / "log.csv");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].iter, 3u);
  EXPECT_EQ(back[0].loss_t, -1.25);
  EXPECT_EQ(back[0].env_steps, 6000u);
  EXPECT_EQ(back[0].ar_error, 0.3);
}

TEST(Run, ZeroIterationsWritesEmptyLog) {
  TrainConfig c = tiny_config();
  c.iterations = 0;
  const fs::path dir = fresh_dir("zero");
  const TrainLog log = run(c, RunOptions{dir, false, {}});
  EXPECT_TRUE(log.records.empty());
  EXPECT_EQ(slurp(dir / "train_log.csv"), std::string(kTrainLogHeader) + "\n");
  EXPECT_EQ(read_train_log(dir / "initial_metrics.csv").size(), 1u);
  EXPECT_TRUE(fs::exists(dir / "checkpoints" / "policy_init.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "checkpoints" / "transition_init.ckpt"));
}

TEST(Run, ResumeMatchesUninterruptedRun) {
  TrainConfig c = tiny_config();
  c.iterations = 4;
  const fs::path full = fresh_dir("full");
  const fs::path split = fresh_dir("split");
  run(c, RunOptions{full, false, {}});
  TrainConfig first = c;
  first.iterations = 2;
  run(first, RunOptions{split, false, {}});
  std::size_t resumed_calls = 0;
  run(c, RunOptions{split, true, [&](const IterationRecord&) { ++resumed_calls; }});
  EXPECT_EQ(resumed_calls, 2u);
  for (const char* f : {"train_log.csv", "initial_metrics.csv", "checkpoints/policy.ckpt",
                        "checkpoints/transition.ckpt", "checkpoints/trainer_state.ckpt"}) {
    EXPECT_EQ(slurp(full / f), slurp(split / f)) << f;
  }
}

TEST(Run, RepeatedRunsAreByteIdentical) {
  const TrainConfig c = tiny_config();
  const fs::path a = fresh_dir("rep_a"), b = fresh_dir("rep_b");
  run(c, RunOptions{a, false, {}});
  run(c, RunOptions{b, false, {}});
  for (const char* f : {"train_log.csv", "checkpoints/policy.ckpt", "checkpoints/transition.ckpt"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

}  // namespace
