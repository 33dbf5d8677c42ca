#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "transpol/env.hpp"
#include "transpol/episode.hpp"
#include "transpol/nets.hpp"
#include "transpol/rng.hpp"

namespace transpol {

/// Eight-target reaching layout. targets[k][t] is the target state at step t of episode k.
struct ReachTask {
  TaskVariant variant = TaskVariant::stationary;
  std::size_t steps = 0;
  double dt = 0.02;
  Vec4 start{};
  std::vector<std::vector<Vec4>> targets;
};

struct TaskLayout {
  std::size_t count = 8;
  double radius = 0.7;
  double speed = 0.5;    ///< moving targets: initial speed, clockwise
  double x_max = 1.0;    ///< plane bound that moving targets are clipped to
};

/// Target k sits at angle 45 deg * k from the +x axis (counterclockwise indexing).
ReachTask make_task(TaskVariant variant, std::size_t steps, double dt, const TaskLayout& layout = {});

/// Free-particle target trajectory: Euler-integrated, clipped to +-x_max; a clipped
/// axis loses its velocity component.
std::vector<Vec4> target_trajectory(const Vec4& initial, std::size_t steps, double dt, double x_max);

/// Target at `angle` on the circle of `radius`, moving clockwise at `speed` when moving.
Vec4 target_at_angle(double angle, double radius, TaskVariant variant, double speed);

/// J = dt * sum_t ||p_t - target_t||, one term per step.
double performance(std::span<const Vec2> positions, std::span<const Vec2> targets, double dt);

/// Positions reached after each step (states 1..T) against each step's target.
double episode_performance(const EpisodeRecord& episode, double dt);

/// Batched closed-loop controller. act() receives one observation and one target per episode.
class Controller {
 public:
  virtual ~Controller() = default;
  [[nodiscard]] virtual std::string id() const = 0;
  virtual void reset(std::size_t batch) = 0;
  virtual std::vector<Vec2> act(const std::vector<Vec4>& y, const std::vector<Vec4>& target) = 0;
};

class LqrController final : public Controller {
 public:
  LqrController(Eigen::MatrixXd K, double u_max) : K_(std::move(K)), u_max_(u_max) {}
  [[nodiscard]] std::string id() const override { return "lqr"; }
  void reset(std::size_t) override {}
  std::vector<Vec2> act(const std::vector<Vec4>& y, const std::vector<Vec4>& target) override;

 private:
  Eigen::MatrixXd K_;
  double u_max_;
};

enum class StateSource { observation, estimate };
std::string to_string(StateSource s);
StateSource parse_state_source(const std::string& name);

/// Runs the policy network. With StateSource::estimate the policy sees the
/// transition model's mean prediction of the current state instead of the raw
/// observation (the first step always uses the observation).
class PolicyController final : public Controller {
 public:
  PolicyController(const PolicyModel& policy, ActionMode mode, RngStream rng,
                   const TransitionModel* transition = nullptr, StateSource source = StateSource::observation);
  [[nodiscard]] std::string id() const override { return "policy"; }
  void reset(std::size_t batch) override;
  std::vector<Vec2> act(const std::vector<Vec4>& y, const std::vector<Vec4>& target) override;

 private:
  const PolicyModel& policy_;
  ActionMode mode_;
  RngStream rng_;
  const TransitionModel* transition_;
  StateSource source_;
  ad::Tensor hidden_;
  ad::Tensor model_hidden_;
  ad::Tensor prev_y_;
  ad::Tensor prev_u_;
};

/// Uniform random controls held for `hold` steps, one stream per episode row.
class HoldRandomController final : public Controller {
 public:
  HoldRandomController(double u_max, std::size_t hold, RngStream rng) : u_max_(u_max), hold_(hold), rng_(rng) {}
  [[nodiscard]] std::string id() const override { return "random"; }
  void reset(std::size_t batch) override;
  std::vector<Vec2> act(const std::vector<Vec4>& y, const std::vector<Vec4>& target) override;

 private:
  double u_max_;
  std::size_t hold_;
  RngStream rng_;
  std::size_t t_ = 0;
  std::vector<Vec2> current_;
};

/// Runs one episode per target sequence in lockstep. Episode k uses env noise
/// streams derived from episode_streams[k]; true states are recorded.
std::vector<EpisodeRecord> rollout_batch(Controller& controller, const EnvParams& params, const Vec4& start,
                                         const std::vector<std::vector<Vec4>>& targets,
                                         std::span<const RngStream> episode_streams);

struct EvalOptions {
  bool with_noise = false;  ///< keep process/observation noise of the env parameters
  std::uint64_t seed = 0;
};

struct EvalReport {
  std::string controller;
  TaskVariant variant = TaskVariant::stationary;
  double gamma = 0.0;  ///< radians
  std::vector<double> target_J;
  double total_J = 0.0;
  std::vector<std::vector<double>> distances;  ///< per target, per step
  std::vector<EpisodeRecord> episodes;
};

/// All targets of `task`, each from the start state, at the rotation angle of `params`.
EvalReport evaluate(Controller& controller, const ReachTask& task, const EnvParams& params,
                    const EvalOptions& options = {});

/// -120 deg .. 120 deg in 15 deg steps.
std::vector<double> default_sweep_degrees();

std::vector<EvalReport> perturbation_sweep(Controller& controller, const ReachTask& task, const EnvParams& params,
                                           std::span<const double> gammas_deg, const EvalOptions& options = {});

/// Header "controller,variant,gamma,target_idx,J"; gamma in degrees.
void write_report_csv(std::ostream& out, std::span<const EvalReport> reports);
void write_report_csv(const std::filesystem::path& path, std::span<const EvalReport> reports);

/// Teacher-forced warm-up on the first `warmup` steps, then the model runs on its
/// own mean predictions with the recorded actions. Returns, per horizon step, the
/// position error averaged over episodes. Truth is the recorded state when
/// available, else the observation. Throws ContractError for short episodes.
std::vector<double> autoregressive_errors(const TransitionModel& model, std::span<const EpisodeRecord> episodes,
                                          std::size_t warmup, std::size_t horizon = 100);
std::vector<double> autoregressive_prediction_eval(const TransitionModel& model, const EpisodeRecord& episode,
                                                   std::size_t warmup, std::size_t horizon = 100);

/// Teacher-forced one-step prediction MSE of the mean, averaged over episodes, steps and dims.
double one_step_mse(const TransitionModel& model, std::span<const EpisodeRecord> episodes);

/// Polyline plot of the report: targets, traces and the start marker.
void write_trajectory_svg(const std::filesystem::path& path, const EvalReport& report, double x_max = 1.0);

}  // namespace transpol
