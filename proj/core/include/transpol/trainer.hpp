#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "transpol/adam.hpp"
#include "transpol/env.hpp"
#include "transpol/episode.hpp"
#include "transpol/eval.hpp"
#include "transpol/losses.hpp"
#include "transpol/nets.hpp"
#include "transpol/replay.hpp"

namespace transpol {

struct TrainConfig {
  // task
  std::size_t episode_steps = 200;         // T
  std::size_t episodes_per_iteration = 10;  // E
  std::size_t iterations = 150;             // I
  std::size_t memory_size = 1500;           // M
  EnvParams env;
  TaskVariant variant = TaskVariant::stationary;
  double target_radius = 0.7;

  // transition model
  std::size_t transition_hidden_size = 256;
  double transition_learning_rate = 5e-4;
  std::size_t transition_batches_per_iteration = 30;  // n_t
  std::size_t transition_batch_size = 1024;           // N_t

  // policy model
  std::size_t policy_hidden_size = 256;
  double policy_learning_rate = 5e-4;
  std::size_t policy_batches_per_iteration = 30;  // n_p
  std::size_t policy_batch_size = 1024;           // N_p
  std::size_t warmup_steps = 30;                  // w
  std::size_t unroll_steps = 20;                  // r

  // implementation knobs
  std::uint64_t seed = 0;
  std::size_t micro_batch = 64;  ///< episodes per forward/backward pass; gradients are accumulated
  double logvar_bias = -2.0;
  double nll_epsilon = kDefaultNllEpsilon;
  double clip_norm = 0.0;
  TargetGain target_gain;
  StateSource policy_state_source = StateSource::observation;
  std::size_t heldout_episodes = 16;
  std::size_t heldout_hold_steps = 20;
  std::size_t autoregressive_horizon = 100;
  bool eval_noise = false;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  [[nodiscard]] std::size_t rollouts_per_episode() const { return episode_steps / warmup_steps; }
};

struct IterationRecord {
  std::uint64_t iter = 0;
  double loss_t = 0.0;
  double loss_p = 0.0;
  double mse_1step = 0.0;
  double J_stationary = 0.0;
  double J_moving = 0.0;
  double seconds = 0.0;  ///< simulated experience time, env_steps * dt
  std::uint64_t episodes = 0;
  std::uint64_t env_steps = 0;
  std::uint64_t updates_t = 0;
  std::uint64_t updates_p = 0;
  double ar_error = 0.0;  ///< mean autoregressive position error on the held-out set
};

inline constexpr const char* kTrainLogHeader =
    "iter,loss_t,loss_p,mse_1step,J_stationary,J_moving,seconds,episodes,env_steps,updates_t,updates_p,ar_error";

/// `initial` describes the untrained models; `records` holds one entry per completed iteration.
struct TrainLog {
  IterationRecord initial;
  std::vector<IterationRecord> records;
};

void write_train_log(std::ostream& out, std::span<const IterationRecord> records);
void write_train_log(const std::filesystem::path& path, std::span<const IterationRecord> records);
std::vector<IterationRecord> read_train_log(const std::filesystem::path& path);

struct TransitionUpdateOptions {
  std::size_t updates = 30;
  std::size_t batch_size = 1024;
  std::size_t micro_batch = 64;
  double nll_epsilon = kDefaultNllEpsilon;
};

struct PolicyUpdateOptions {
  std::size_t updates = 30;
  std::size_t batch_size = 1024;
  std::size_t micro_batch = 64;
  std::size_t warmup = 30;
  std::size_t unroll = 20;
  TargetGain gain;
};

/// Teacher-forced NLL over whole episodes, summed over the batch and scaled by 1/(2 T normalizer).
/// Records on the active tape.
ad::Tensor transition_batch_loss(const TransitionModel& model, std::span<const EpisodePtr> batch, double eps,
                                 double normalizer);

/// Imagined-rollout loss of floor(T/w) segments per episode, summed and scaled by
/// 1/(r n_rollouts normalizer). Warm-up runs without gradient; the transition
/// parameters should be frozen by the caller.
ad::Tensor policy_batch_loss(const TransitionModel& transition, const PolicyModel& policy,
                             std::span<const EpisodePtr> batch, const PolicyUpdateOptions& options,
                             double normalizer, RngStream& model_rng, RngStream& policy_rng);

/// `updates` Adam steps on batches sampled from memory; returns the mean batch loss.
/// Throws NonFiniteError on a NaN/Inf loss.
double update_transition(const MemoryBuffer& memory, TransitionModel& model, Adam& optimizer,
                         const TransitionUpdateOptions& options, const RngStream& stream);
/// Same for the policy; transition parameters are frozen for the duration and left bit-identical.
double update_policy(const MemoryBuffer& memory, const TransitionModel& transition, PolicyModel& policy,
                     Adam& optimizer, const PolicyUpdateOptions& options, const RngStream& stream);

/// Training targets: radius from the config, uniform random angle.
std::vector<std::vector<Vec4>> draw_training_targets(const TrainConfig& config, std::size_t count, RngStream& rng);

/// Offline loop: collect episodes, fit the transition model, fit the policy on imagined rollouts.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  [[nodiscard]] const TrainConfig& config() const { return config_; }
  [[nodiscard]] const TransitionModel& transition() const { return transition_; }
  [[nodiscard]] const PolicyModel& policy() const { return policy_; }
  [[nodiscard]] TransitionModel& transition() { return transition_; }
  [[nodiscard]] PolicyModel& policy() { return policy_; }
  [[nodiscard]] const MemoryBuffer& memory() const { return memory_; }
  [[nodiscard]] const std::vector<EpisodeRecord>& heldout() const { return heldout_; }
  [[nodiscard]] const TrainLog& log() const { return log_; }
  [[nodiscard]] std::uint64_t iteration() const { return iteration_; }

  /// E episodes with the current policy in sample mode (not yet stored).
  [[nodiscard]] std::vector<EpisodeRecord> collect_episodes(std::uint64_t iteration) const;
  double update_transition(std::uint64_t iteration);
  double update_policy(std::uint64_t iteration);
  /// Held-out and reaching metrics of the current models (loss columns left at 0).
  [[nodiscard]] IterationRecord measure() const;

  const IterationRecord& run_iteration();

  void save_state(const std::filesystem::path& path) const;
  static Trainer load_state(TrainConfig config, const std::filesystem::path& path);

 private:
  [[nodiscard]] RngStream iteration_stream(std::uint64_t iteration) const;

  TrainConfig config_;
  TransitionModel transition_;
  PolicyModel policy_;
  Adam transition_opt_;
  Adam policy_opt_;
  MemoryBuffer memory_;
  std::vector<EpisodeRecord> heldout_;
  TrainLog log_;
  std::uint64_t iteration_ = 0;
  std::uint64_t episodes_ = 0;
  std::uint64_t env_steps_ = 0;
};

struct RunOptions {
  std::filesystem::path out_dir;
  bool resume = false;
  std::function<void(const IterationRecord&)> on_iteration;
};

/// Runs (or resumes) training to config.iterations, writing after every iteration:
///   train_log.csv, timing.csv, checkpoints/{transition,policy,trainer_state}.ckpt.
/// Before the first iteration: initial_metrics.csv and checkpoints/{transition,policy}_init.ckpt.
TrainLog run(const TrainConfig& config, const RunOptions& options);

}  // namespace transpol
