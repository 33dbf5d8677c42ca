#include "transpol/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "transpol/episode_csv.hpp"
#include "transpol/errors.hpp"
#include "transpol/lqr.hpp"

namespace transpol {

namespace {

ad::Tensor batch_tensor(const std::vector<Vec4>& rows) {
  std::vector<double> v;
  v.reserve(rows.size() * 4);
  for (const auto& r : rows) v.insert(v.end(), r.begin(), r.end());
  return ad::Tensor::from({rows.size(), 4}, std::move(v));
}

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

Vec4 truth_at(const EpisodeRecord& ep, std::size_t idx) {
  if (!ep.states.empty()) return ep.states[idx];
  return idx < ep.steps.size() ? ep.steps[idx].y : ep.steps.back().y_next;
}

}  // namespace

Vec4 target_at_angle(double angle, double radius, TaskVariant variant, double speed) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Vec4 x{radius * c, radius * s, 0.0, 0.0};
  if (variant == TaskVariant::moving) {
    // Clockwise tangent: the center-pointing vector rotated by +90 deg.
    x[2] = speed * s;
    x[3] = -speed * c;
  }
  return x;
}

std::vector<Vec4> target_trajectory(const Vec4& initial, std::size_t steps, double dt, double x_max) {
  std::vector<Vec4> out;
  out.reserve(steps);
  Vec4 x = initial;
  for (std::size_t t = 0; t < steps; ++t) {
    out.push_back(x);
    for (int i = 0; i < 2; ++i) {
      const double p = x[i] + dt * x[2 + i];
      if (std::abs(p) > x_max) {
        x[i] = std::clamp(p, -x_max, x_max);
        x[2 + i] = 0.0;
      } else {
        x[i] = p;
      }
    }
  }
  return out;
}

ReachTask make_task(TaskVariant variant, std::size_t steps, double dt, const TaskLayout& layout) {
  if (steps == 0) throw RangeError("make_task: steps must be positive");
  ReachTask task;
  task.variant = variant;
  task.steps = steps;
  task.dt = dt;
  for (std::size_t k = 0; k < layout.count; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(layout.count);
    const Vec4 x0 = target_at_angle(angle, layout.radius, variant, layout.speed);
    task.targets.push_back(target_trajectory(x0, steps, dt, layout.x_max));
  }
  return task;
}

double performance(std::span<const Vec2> positions, std::span<const Vec2> targets, double dt) {
  if (positions.size() != targets.size()) {
    throw DimensionError("performance: " + std::to_string(positions.size()) + " positions vs " +
                         std::to_string(targets.size()) + " targets");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < positions.size(); ++t) {
    total += std::hypot(positions[t][0] - targets[t][0], positions[t][1] - targets[t][1]);
  }
  return dt * total;
}

double episode_performance(const EpisodeRecord& episode, double dt) {
  std::vector<Vec2> pos;
  std::vector<Vec2> tgt;
  for (std::size_t t = 0; t < episode.steps.size(); ++t) {
    const Vec4 x = episode.states.empty() ? episode.steps[t].y_next : episode.states[t + 1];
    pos.push_back({x[0], x[1]});
    tgt.push_back({episode.steps[t].target[0], episode.steps[t].target[1]});
  }
  return performance(pos, tgt, dt);
}

std::vector<Vec2> LqrController::act(const std::vector<Vec4>& y, const std::vector<Vec4>& target) {
  std::vector<Vec2> u(y.size());
  for (std::size_t b = 0; b < y.size(); ++b) u[b] = lqr_control(y[b], target[b], K_, u_max_);
  return u;
}

std::string to_string(StateSource s) { return s == StateSource::observation ? "observation" : "estimate"; }

StateSource parse_state_source(const std::string& name) {
  if (name == "observation") return StateSource::observation;
  if (name == "estimate") return StateSource::estimate;
  throw ConfigError("unknown state source '" + name + "' (expected observation or estimate)");
}

PolicyController::PolicyController(const PolicyModel& policy, ActionMode mode, RngStream rng,
                                   const TransitionModel* transition, StateSource source)
    : policy_(policy), mode_(mode), rng_(rng), transition_(transition), source_(source) {
  if (source_ == StateSource::estimate && transition_ == nullptr) {
    throw ContractError("PolicyController: state estimates need a transition model");
  }
}

void PolicyController::reset(std::size_t batch) {
  hidden_ = policy_.initial_hidden(batch);
  if (transition_ != nullptr) model_hidden_ = transition_->initial_hidden(batch);
  prev_y_ = {};
  prev_u_ = {};
}

std::vector<Vec2> PolicyController::act(const std::vector<Vec4>& y, const std::vector<Vec4>& target) {
  const ad::NoGradGuard no_grad;
  const ad::Tensor y_t = batch_tensor(y);
  ad::Tensor x = y_t;
  if (source_ == StateSource::estimate && prev_y_.defined()) {
    const auto pred = transition_->forward(prev_y_, prev_u_, model_hidden_);
    model_hidden_ = pred.hidden;
    x = prev_y_ + pred.mean_delta;
  }
  const auto step = policy_.forward(x, batch_tensor(target), hidden_, rng_, mode_);
  hidden_ = step.hidden;
  prev_y_ = y_t;
  prev_u_ = step.action;
  std::vector<Vec2> u(y.size());
  const auto a = step.action.data();
  for (std::size_t b = 0; b < y.size(); ++b) u[b] = {a[2 * b], a[2 * b + 1]};
  return u;
}

void HoldRandomController::reset(std::size_t batch) {
  t_ = 0;
  current_.assign(batch, Vec2{});
}

std::vector<Vec2> HoldRandomController::act(const std::vector<Vec4>& y, const std::vector<Vec4>&) {
  if (current_.size() != y.size()) reset(y.size());
  if (t_ % std::max<std::size_t>(hold_, 1) == 0) {
    for (auto& u : current_) u = {u_max_ * (2.0 * rng_.uniform() - 1.0), u_max_ * (2.0 * rng_.uniform() - 1.0)};
  }
  ++t_;
  return current_;
}

std::vector<EpisodeRecord> rollout_batch(Controller& controller, const EnvParams& params, const Vec4& start,
                                         const std::vector<std::vector<Vec4>>& targets,
                                         std::span<const RngStream> episode_streams) {
  const std::size_t B = targets.size();
  if (episode_streams.size() != B) throw DimensionError("rollout_batch: one stream per episode required");
  if (B == 0) return {};
  const std::size_t T = targets.front().size();
  for (const auto& t : targets) {
    if (t.size() != T) throw DimensionError("rollout_batch: target sequences differ in length");
  }
  std::vector<PointMassEnv> envs;
  envs.reserve(B);
  std::vector<EpisodeRecord> episodes(B);
  std::vector<Vec4> y(B);
  for (std::size_t b = 0; b < B; ++b) {
    envs.emplace_back(params, episode_streams[b]);
    y[b] = envs[b].reset(start);
    episodes[b].states.push_back(envs[b].state().exposed());
    episodes[b].steps.reserve(T);
    episodes[b].states.reserve(T + 1);
  }
  controller.reset(B);
  std::vector<Vec4> tgt(B);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t b = 0; b < B; ++b) tgt[b] = targets[b][t];
    const auto u = controller.act(y, tgt);
    for (std::size_t b = 0; b < B; ++b) {
      const Vec2 applied = {std::clamp(u[b][0], -params.u_max, params.u_max),
                            std::clamp(u[b][1], -params.u_max, params.u_max)};
      const Vec4 y_next = envs[b].step(applied);
      episodes[b].steps.push_back({y[b], tgt[b], applied, y_next});
      episodes[b].states.push_back(envs[b].state().exposed());
      y[b] = y_next;
    }
  }
  return episodes;
}

EvalReport evaluate(Controller& controller, const ReachTask& task, const EnvParams& params,
                    const EvalOptions& options) {
  const EnvParams p = options.with_noise ? params : params.noiseless();
  const RngStream root(options.seed);
  std::vector<RngStream> streams;
  for (std::size_t k = 0; k < task.targets.size(); ++k) streams.push_back(root.substream(k));

  EvalReport report;
  report.controller = controller.id();
  report.variant = task.variant;
  report.gamma = p.gamma;
  report.episodes = rollout_batch(controller, p, task.start, task.targets, streams);
  for (auto& ep : report.episodes) {
    ep.variant = task.variant;
    std::vector<double> d;
    for (std::size_t t = 0; t < ep.steps.size(); ++t) {
      const Vec4& x = ep.states[t + 1];
      d.push_back(std::hypot(x[0] - ep.steps[t].target[0], x[1] - ep.steps[t].target[1]));
    }
    const double J = episode_performance(ep, p.dt);
    report.target_J.push_back(J);
    report.total_J += J;
    report.distances.push_back(std::move(d));
  }
  return report;
}

std::vector<double> default_sweep_degrees() {
  std::vector<double> out;
  for (int g = -120; g <= 120; g += 15) out.push_back(g);
  return out;
}

std::vector<EvalReport> perturbation_sweep(Controller& controller, const ReachTask& task, const EnvParams& params,
                                           std::span<const double> gammas_deg, const EvalOptions& options) {
  std::vector<EvalReport> out;
  for (double g : gammas_deg) {
    EnvParams p = params;
    p.gamma = deg_to_rad(g);
    out.push_back(evaluate(controller, task, p, options));
  }
  return out;
}

void write_report_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << "controller,variant,gamma,target_idx,J\n";
  for (const auto& r : reports) {
    // rounded so that angles given in whole degrees print exactly
    const double deg = std::round(r.gamma * 180.0 / std::numbers::pi * 1e9) / 1e9;
    for (std::size_t k = 0; k < r.target_J.size(); ++k) {
      out << r.controller << ',' << to_string(r.variant) << ',' << format_double(deg) << ',' << k << ','
          << format_double(r.target_J[k]) << '\n';
    }
  }
}

void write_report_csv(const std::filesystem::path& path, std::span<const EvalReport> reports) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write report: " + path.string());
  write_report_csv(out, reports);
}

std::vector<double> autoregressive_errors(const TransitionModel& model, std::span<const EpisodeRecord> episodes,
                                          std::size_t warmup, std::size_t horizon) {
  if (episodes.empty()) throw ContractError("autoregressive_errors: no episodes");
  if (warmup == 0 || horizon == 0) throw ContractError("autoregressive_errors: warmup and horizon must be positive");
  for (const auto& ep : episodes) {
    if (ep.length() < warmup + horizon) {
      throw ContractError("autoregressive_errors: episode of " + std::to_string(ep.length()) +
                          " steps is shorter than warmup + horizon = " + std::to_string(warmup + horizon));
    }
  }
  const ad::NoGradGuard no_grad;
  const std::size_t B = episodes.size();
  const auto gather_y = [&](std::size_t t) {
    std::vector<Vec4> rows(B);
    for (std::size_t b = 0; b < B; ++b) rows[b] = episodes[b].steps[t].y;
    return batch_tensor(rows);
  };
  const auto gather_u = [&](std::size_t t) {
    std::vector<double> v(B * 2);
    for (std::size_t b = 0; b < B; ++b) {
      v[2 * b] = episodes[b].steps[t].u[0];
      v[2 * b + 1] = episodes[b].steps[t].u[1];
    }
    return ad::Tensor::from({B, 2}, std::move(v));
  };

  ad::Tensor h = model.initial_hidden(B);
  ad::Tensor pred;
  for (std::size_t t = 0; t < warmup; ++t) {
    const ad::Tensor y = gather_y(t);
    const auto step = model.forward(y, gather_u(t), h);
    h = step.hidden;
    pred = y + step.mean_delta;
  }
  std::vector<double> errors(horizon, 0.0);
  for (std::size_t k = 0; k < horizon; ++k) {
    const std::size_t idx = warmup + k;
    const auto p = pred.data();
    for (std::size_t b = 0; b < B; ++b) {
      const Vec4 truth = truth_at(episodes[b], idx);
      errors[k] += std::hypot(p[4 * b] - truth[0], p[4 * b + 1] - truth[1]);
    }
    errors[k] /= static_cast<double>(B);
    if (k + 1 < horizon) {
      const auto step = model.forward(pred, gather_u(idx), h);
      h = step.hidden;
      pred = pred + step.mean_delta;
    }
  }
  return errors;
}

std::vector<double> autoregressive_prediction_eval(const TransitionModel& model, const EpisodeRecord& episode,
                                                   std::size_t warmup, std::size_t horizon) {
  return autoregressive_errors(model, std::span<const EpisodeRecord>(&episode, 1), warmup, horizon);
}

double one_step_mse(const TransitionModel& model, std::span<const EpisodeRecord> episodes) {
  if (episodes.empty()) throw ContractError("one_step_mse: no episodes");
  const ad::NoGradGuard no_grad;
  const std::size_t B = episodes.size();
  const std::size_t T = episodes.front().length();
  ad::Tensor h = model.initial_hidden(B);
  double total = 0.0;
  std::vector<double> y(B * 4), u(B * 2);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      if (episodes[b].length() != T) throw DimensionError("one_step_mse: episodes differ in length");
      const auto& s = episodes[b].steps[t];
      std::copy(s.y.begin(), s.y.end(), y.begin() + 4 * b);
      std::copy(s.u.begin(), s.u.end(), u.begin() + 2 * b);
    }
    const auto step = model.forward(ad::Tensor::from({B, 4}, y), ad::Tensor::from({B, 2}, u), h);
    h = step.hidden;
    const auto mu = step.mean_delta.data();
    for (std::size_t b = 0; b < B; ++b) {
      const auto& s = episodes[b].steps[t];
      for (std::size_t i = 0; i < 4; ++i) {
        const double e = s.y[i] + mu[4 * b + i] - s.y_next[i];
        total += e * e;
      }
    }
  }
  return total / static_cast<double>(B * T * 4);
}

}  // namespace transpol
