#include "transpol/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "transpol/checkpoint.hpp"
#include "transpol/episode_csv.hpp"
#include "transpol/errors.hpp"

namespace transpol {

namespace {

constexpr std::uint64_t kTransitionUpdate = 1;
constexpr std::uint64_t kPolicyUpdate = 2;
constexpr std::uint64_t kCollect = 3;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid training configuration: " + what);
}

// Gathers one [B, width] tensor from per-row fields.
template <typename Get>
ad::Tensor gather(std::size_t rows, std::size_t width, Get get) {
  std::vector<double> v(rows * width);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& src = get(i);
    std::copy(src.begin(), src.end(), v.begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  return ad::Tensor::from({rows, width}, std::move(v));
}

// Disables gradients of a parameter set for the scope's lifetime.
class FreezeGuard {
 public:
  explicit FreezeGuard(const TransitionModel& model) : model_(model) { model_.set_requires_grad(false); }
  ~FreezeGuard() { model_.set_requires_grad(true); }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  const TransitionModel& model_;
};

void check_finite(double loss, const char* which, std::size_t update) {
  if (!std::isfinite(loss)) {
    throw NonFiniteError(std::string(which) + " loss is not finite at update " + std::to_string(update));
  }
}

std::vector<std::span<const EpisodePtr>> chunks(const std::vector<EpisodePtr>& batch, std::size_t size) {
  std::vector<std::span<const EpisodePtr>> out;
  const std::size_t step = size == 0 ? batch.size() : size;
  for (std::size_t i = 0; i < batch.size(); i += step) {
    out.emplace_back(batch.data() + i, std::min(step, batch.size() - i));
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  try {
    env.validate();
  } catch (const RangeError& e) {
    throw ConfigError(std::string("invalid training configuration: ") + e.what());
  }
  require(episode_steps > 0, "episode_steps must be positive");
  require(episodes_per_iteration > 0, "episodes_per_iteration must be positive");
  require(memory_size > 0, "memory_size must be positive");
  require(transition_hidden_size > 0 && policy_hidden_size > 0, "hidden sizes must be positive");
  require(transition_batch_size > 0 && policy_batch_size > 0, "batch sizes must be positive");
  require(warmup_steps >= 1, "warmup_steps must be >= 1");
  require(unroll_steps >= 1, "unroll_steps must be >= 1");
  require(warmup_steps <= episode_steps, "warmup_steps must not exceed episode_steps");
  require(transition_learning_rate >= 0.0 && policy_learning_rate >= 0.0, "learning rates must be >= 0");
  require(nll_epsilon > 0.0, "nll_epsilon must be positive");
  require(clip_norm >= 0.0, "clip_norm must be >= 0");
  require(target_radius >= 0.0 && target_radius <= env.x_max, "target_radius must lie inside the plane");
  require(heldout_episodes > 0, "heldout_episodes must be positive");
  target_gain.validate();
}

// ---------------------------------------------------------------------------
// Log

void write_train_log(std::ostream& out, std::span<const IterationRecord> records) {
  out << kTrainLogHeader << '\n';
  for (const auto& r : records) {
    out << r.iter << ',' << format_double(r.loss_t) << ',' << format_double(r.loss_p) << ','
        << format_double(r.mse_1step) << ',' << format_double(r.J_stationary) << ',' << format_double(r.J_moving)
        << ',' << format_double(r.seconds) << ',' << r.episodes << ',' << r.env_steps << ',' << r.updates_t << ','
        << r.updates_p << ',' << format_double(r.ar_error) << '\n';
  }
}

void write_train_log(const std::filesystem::path& path, std::span<const IterationRecord> records) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write train log: " + path.string());
  write_train_log(out, records);
}

std::vector<IterationRecord> read_train_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open train log: " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kTrainLogHeader) throw FormatError("unexpected train log header: " + line);
  std::vector<IterationRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 12) throw FormatError("train log row has " + std::to_string(c.size()) + " columns");
    const auto u = [](std::string_view s) { return static_cast<std::uint64_t>(std::stoull(std::string(s))); };
    IterationRecord r;
    r.iter = u(c[0]);
    r.loss_t = parse_double(c[1]);
    r.loss_p = parse_double(c[2]);
    r.mse_1step = parse_double(c[3]);
    r.J_stationary = parse_double(c[4]);
    r.J_moving = parse_double(c[5]);
    r.seconds = parse_double(c[6]);
    r.episodes = u(c[7]);
    r.env_steps = u(c[8]);
    r.updates_t = u(c[9]);
    r.updates_p = u(c[10]);
    r.ar_error = parse_double(c[11]);
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses over sampled batches

ad::Tensor transition_batch_loss(const TransitionModel& model, std::span<const EpisodePtr> batch, double eps,
                                 double normalizer) {
  if (batch.empty()) throw ContractError("transition_batch_loss: empty batch");
  const std::size_t B = batch.size();
  const std::size_t T = batch.front()->length();
  ad::Tensor h = model.initial_hidden(B);
  ad::Tensor total;
  for (std::size_t t = 0; t < T; ++t) {
    const ad::Tensor y = gather(B, 4, [&](std::size_t b) -> const Vec4& { return batch[b]->steps[t].y; });
    const ad::Tensor u = gather(B, 2, [&](std::size_t b) -> const Vec2& { return batch[b]->steps[t].u; });
    const ad::Tensor y_next =
        gather(B, 4, [&](std::size_t b) -> const Vec4& { return batch[b]->steps[t].y_next; });
    const auto step = model.forward(y, u, h);
    h = step.hidden;
    const ad::Tensor term = nll_step_sum(y + step.mean_delta, step.var_delta, y_next, eps);
    total = total.defined() ? total + term : term;
  }
  return ad::scale(total, 1.0 / (2.0 * static_cast<double>(T) * normalizer));
}

ad::Tensor policy_batch_loss(const TransitionModel& transition, const PolicyModel& policy,
                             std::span<const EpisodePtr> batch, const PolicyUpdateOptions& options,
                             double normalizer, RngStream& model_rng, RngStream& policy_rng) {
  if (batch.empty()) throw ContractError("policy_batch_loss: empty batch");
  const std::size_t T = batch.front()->length();
  const std::size_t w = options.warmup;
  const std::size_t r = options.unroll;
  if (w == 0 || r == 0 || w > T) throw ContractError("policy_batch_loss: need 1 <= warmup <= T and unroll >= 1");
  const std::size_t n_roll = T / w;
  const std::size_t R = batch.size() * n_roll;  // row = episode * n_roll + segment
  const auto step_of = [&](std::size_t row, std::size_t j) -> const StepRecord& {
    return batch[row / n_roll]->steps[(row % n_roll) * w + j];
  };

  ad::Tensor h_t = transition.initial_hidden(R);
  ad::Tensor h_p = policy.initial_hidden(R);
  ad::Tensor x_hat;
  ad::Tensor target;
  {
    const ad::NoGradGuard no_grad;
    for (std::size_t j = 0; j < w; ++j) {
      const ad::Tensor y = gather(R, 4, [&](std::size_t i) -> const Vec4& { return step_of(i, j).y; });
      const ad::Tensor u = gather(R, 2, [&](std::size_t i) -> const Vec2& { return step_of(i, j).u; });
      const ad::Tensor tgt = gather(R, 4, [&](std::size_t i) -> const Vec4& { return step_of(i, j).target; });
      h_p = policy.forward(y, tgt, h_p, nullptr).hidden;
      if (j + 1 < w) {
        h_t = transition.forward(y, u, h_t).hidden;
      } else {
        const auto pred = transition.predict_state(y, u, h_t, model_rng);
        h_t = pred.hidden;
        x_hat = pred.sample;
        target = tgt;
      }
    }
  }
  ad::Tensor total;
  for (std::size_t s = 0; s < r; ++s) {
    const auto act = policy.forward(x_hat, target, h_p, policy_rng, ActionMode::sample);
    h_p = act.hidden;
    const auto pred = transition.predict_state(x_hat, act.action, h_t, model_rng);
    h_t = pred.hidden;
    x_hat = pred.sample;
    const ad::Tensor term = policy_step_sum(x_hat, target, options.gain);
    total = total.defined() ? total + term : term;
  }
  return ad::scale(total, 1.0 / (static_cast<double>(r) * static_cast<double>(n_roll) * normalizer));
}

double update_transition(const MemoryBuffer& memory, TransitionModel& model, Adam& optimizer,
                         const TransitionUpdateOptions& options, const RngStream& stream) {
  RngStream replay = stream.substream(kReplaySampling);
  double sum = 0.0;
  for (std::size_t k = 0; k < options.updates; ++k) {
    const auto batch = memory.sample(options.batch_size, replay);
    optimizer.zero_grad();
    double loss = 0.0;
    for (const auto part : chunks(batch, options.micro_batch)) {
      ad::Tape tape;
      const ad::TapeScope scope(tape);
      const ad::Tensor l =
          transition_batch_loss(model, part, options.nll_epsilon, static_cast<double>(batch.size()));
      loss += l.item();
      check_finite(loss, "transition", k);
      tape.backward(l);
    }
    optimizer.step();
    sum += loss;
  }
  optimizer.zero_grad();
  return options.updates == 0 ? kNaN : sum / static_cast<double>(options.updates);
}

double update_policy(const MemoryBuffer& memory, const TransitionModel& transition, PolicyModel& policy,
                     Adam& optimizer, const PolicyUpdateOptions& options, const RngStream& stream) {
  const FreezeGuard frozen(transition);
  RngStream replay = stream.substream(kReplaySampling);
  RngStream model_rng = stream.substream(kModelSampling);
  RngStream policy_rng = stream.substream(kPolicySampling);
  double sum = 0.0;
  for (std::size_t k = 0; k < options.updates; ++k) {
    const auto batch = memory.sample(options.batch_size, replay);
    optimizer.zero_grad();
    double loss = 0.0;
    for (const auto part : chunks(batch, options.micro_batch)) {
      ad::Tape tape;
      const ad::TapeScope scope(tape);
      const ad::Tensor l = policy_batch_loss(transition, policy, part, options, static_cast<double>(batch.size()),
                                             model_rng, policy_rng);
      loss += l.item();
      check_finite(loss, "policy", k);
      tape.backward(l);
    }
    optimizer.step();
    sum += loss;
  }
  optimizer.zero_grad();
  return options.updates == 0 ? kNaN : sum / static_cast<double>(options.updates);
}

std::vector<std::vector<Vec4>> draw_training_targets(const TrainConfig& config, std::size_t count, RngStream& rng) {
  std::vector<std::vector<Vec4>> out;
  out.reserve(count);
  for (std::size_t e = 0; e < count; ++e) {
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    const Vec4 x0 = target_at_angle(angle, config.target_radius, config.variant, 0.5);
    out.push_back(target_trajectory(x0, config.episode_steps, config.env.dt, config.env.x_max));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trainer

namespace {

AdamOptions adam_options(double lr, double clip) {
  AdamOptions o;
  o.learning_rate = lr;
  o.clip_norm = clip;
  return o;
}

TrainConfig validated(TrainConfig c) {
  c.validate();
  return c;
}

}  // namespace

Trainer::Trainer(TrainConfig config)
    : config_(validated(std::move(config))),
      transition_(config_.transition_hidden_size, RngStream(config_.seed).substream(kInit).substream(1),
                  NetInit{config_.logvar_bias}),
      policy_(config_.policy_hidden_size, config_.env.u_max, RngStream(config_.seed).substream(kInit).substream(2),
              NetInit{config_.logvar_bias}),
      transition_opt_(transition_.parameters(), adam_options(config_.transition_learning_rate, config_.clip_norm)),
      policy_opt_(policy_.parameters(), adam_options(config_.policy_learning_rate, config_.clip_norm)),
      memory_(config_.memory_size, config_.episode_steps) {
  const RngStream held(RngStream(config_.seed).substream(kHeldOut));
  HoldRandomController random(config_.env.u_max, config_.heldout_hold_steps, held.substream(kPolicySampling));
  std::vector<RngStream> streams;
  for (std::size_t k = 0; k < config_.heldout_episodes; ++k) streams.push_back(held.substream(k));
  const std::vector<std::vector<Vec4>> targets(config_.heldout_episodes,
                                               std::vector<Vec4>(config_.episode_steps, Vec4{}));
  heldout_ = rollout_batch(random, config_.env, Vec4{}, targets, streams);
  log_.initial = measure();
  log_.initial.loss_t = kNaN;
  log_.initial.loss_p = kNaN;
}

RngStream Trainer::iteration_stream(std::uint64_t iteration) const {
  return RngStream(config_.seed).substream(iteration);
}

std::vector<EpisodeRecord> Trainer::collect_episodes(std::uint64_t iteration) const {
  const RngStream s = iteration_stream(iteration).substream(kCollect);
  RngStream task_rng = s.substream(kTaskDraw);
  const auto targets = draw_training_targets(config_, config_.episodes_per_iteration, task_rng);
  std::vector<RngStream> streams;
  for (std::size_t e = 0; e < config_.episodes_per_iteration; ++e) streams.push_back(s.substream(e));
  PolicyController controller(policy_, ActionMode::sample, s.substream(kPolicySampling), &transition_,
                              config_.policy_state_source);
  auto episodes = rollout_batch(controller, config_.env, Vec4{}, targets, streams);
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    episodes[e].seed = streams[e].stream();
    episodes[e].iteration = iteration;
    episodes[e].variant = config_.variant;
  }
  return episodes;
}

double Trainer::update_transition(std::uint64_t iteration) {
  TransitionUpdateOptions o;
  o.updates = config_.transition_batches_per_iteration;
  o.batch_size = config_.transition_batch_size;
  o.micro_batch = config_.micro_batch;
  o.nll_epsilon = config_.nll_epsilon;
  return transpol::update_transition(memory_, transition_, transition_opt_, o,
                                     iteration_stream(iteration).substream(kTransitionUpdate));
}

double Trainer::update_policy(std::uint64_t iteration) {
  PolicyUpdateOptions o;
  o.updates = config_.policy_batches_per_iteration;
  o.batch_size = config_.policy_batch_size;
  o.micro_batch = config_.micro_batch;
  o.warmup = config_.warmup_steps;
  o.unroll = config_.unroll_steps;
  o.gain = config_.target_gain;
  return transpol::update_policy(memory_, transition_, policy_, policy_opt_, o,
                                 iteration_stream(iteration).substream(kPolicyUpdate));
}

IterationRecord Trainer::measure() const {
  IterationRecord r;
  r.iter = iteration_;
  r.mse_1step = one_step_mse(transition_, heldout_);
  const std::size_t w = config_.warmup_steps;
  const std::size_t horizon = std::min(config_.autoregressive_horizon, config_.episode_steps - w);
  if (horizon > 0) {
    const auto err = autoregressive_errors(transition_, heldout_, w, horizon);
    double s = 0.0;
    for (double e : err) s += e;
    r.ar_error = s / static_cast<double>(err.size());
  } else {
    r.ar_error = kNaN;
  }
  EvalOptions eo;
  eo.with_noise = config_.eval_noise;
  eo.seed = RngStream(config_.seed).substream(kHeldOut).substream(kTaskDraw).stream();
  const TaskLayout layout{8, config_.target_radius, 0.5, config_.env.x_max};
  for (const auto variant : {TaskVariant::stationary, TaskVariant::moving}) {
    PolicyController controller(policy_, ActionMode::mean, RngStream(0), &transition_, config_.policy_state_source);
    const auto task = make_task(variant, config_.episode_steps, config_.env.dt, layout);
    const double J = evaluate(controller, task, config_.env, eo).total_J;
    (variant == TaskVariant::stationary ? r.J_stationary : r.J_moving) = J;
  }
  r.episodes = episodes_;
  r.env_steps = env_steps_;
  r.seconds = static_cast<double>(env_steps_) * config_.env.dt;
  r.updates_t = transition_opt_.step_count();
  r.updates_p = policy_opt_.step_count();
  return r;
}

const IterationRecord& Trainer::run_iteration() {
  const std::uint64_t it = iteration_;
  for (auto& ep : collect_episodes(it)) {
    env_steps_ += ep.length();
    ++episodes_;
    memory_.push(std::move(ep));
  }
  const double loss_t = update_transition(it);
  const double loss_p = update_policy(it);
  ++iteration_;
  IterationRecord r = measure();
  r.loss_t = loss_t;
  r.loss_p = loss_p;
  log_.records.push_back(r);
  return log_.records.back();
}

// ---------------------------------------------------------------------------
// State persistence

namespace {

constexpr std::size_t kRecordWidth = 12;
constexpr std::size_t kStepWidth = 14;

std::vector<double> record_row(const IterationRecord& r) {
  return {static_cast<double>(r.iter), r.loss_t, r.loss_p, r.mse_1step, r.J_stationary, r.J_moving, r.seconds,
          static_cast<double>(r.episodes), static_cast<double>(r.env_steps), static_cast<double>(r.updates_t),
          static_cast<double>(r.updates_p), r.ar_error};
}

IterationRecord row_record(const double* v) {
  IterationRecord r;
  const auto u = [](double x) { return static_cast<std::uint64_t>(x); };
  r.iter = u(v[0]);
  r.loss_t = v[1];
  r.loss_p = v[2];
  r.mse_1step = v[3];
  r.J_stationary = v[4];
  r.J_moving = v[5];
  r.seconds = v[6];
  r.episodes = u(v[7]);
  r.env_steps = u(v[8]);
  r.updates_t = u(v[9]);
  r.updates_p = u(v[10]);
  r.ar_error = v[11];
  return r;
}

}  // namespace

void Trainer::save_state(const std::filesystem::path& path) const {
  Checkpoint ckpt;
  transition_.store(ckpt);
  policy_.store(ckpt);
  transition_opt_.store(ckpt, "adam_transition");
  policy_opt_.store(ckpt, "adam_policy");
  ckpt.put_scalar("trainer.iteration", static_cast<double>(iteration_));
  ckpt.put_scalar("trainer.episodes", static_cast<double>(episodes_));
  ckpt.put_scalar("trainer.env_steps", static_cast<double>(env_steps_));
  ckpt.put_scalar("trainer.seed_hi", static_cast<double>(config_.seed >> 32));
  ckpt.put_scalar("trainer.seed_lo", static_cast<double>(config_.seed & 0xffffffffULL));

  const auto& eps = memory_.episodes();
  const std::size_t n = eps.size();
  const std::size_t T = config_.episode_steps;
  std::vector<double> steps, states, meta;
  steps.reserve(n * T * kStepWidth);
  for (const auto& ep : eps) {
    for (const auto& s : ep->steps) {
      steps.insert(steps.end(), s.y.begin(), s.y.end());
      steps.insert(steps.end(), s.target.begin(), s.target.end());
      steps.insert(steps.end(), s.u.begin(), s.u.end());
      steps.insert(steps.end(), s.y_next.begin(), s.y_next.end());
    }
    for (std::size_t t = 0; t <= T; ++t) {
      const Vec4 x = ep->states.empty() ? Vec4{kNaN, kNaN, kNaN, kNaN} : ep->states[t];
      states.insert(states.end(), x.begin(), x.end());
    }
    meta.push_back(static_cast<double>(ep->seed >> 32));
    meta.push_back(static_cast<double>(ep->seed & 0xffffffffULL));
    meta.push_back(static_cast<double>(ep->iteration));
    meta.push_back(ep->variant == TaskVariant::moving ? 1.0 : 0.0);
  }
  ckpt.put("replay.steps", {n, T, kStepWidth}, std::move(steps));
  ckpt.put("replay.states", {n, T + 1, 4}, std::move(states));
  ckpt.put("replay.meta", {n, 4}, std::move(meta));
  ckpt.put_scalar("replay.inserted", static_cast<double>(memory_.inserted()));

  ckpt.put("log.initial", {kRecordWidth}, record_row(log_.initial));
  std::vector<double> rows;
  for (const auto& r : log_.records) {
    const auto row = record_row(r);
    rows.insert(rows.end(), row.begin(), row.end());
  }
  ckpt.put("log.records", {log_.records.size(), kRecordWidth}, std::move(rows));
  ckpt.write(path);
}

Trainer Trainer::load_state(TrainConfig config, const std::filesystem::path& path) {
  const Checkpoint ckpt = Checkpoint::read(path);
  const auto seed = (static_cast<std::uint64_t>(ckpt.scalar("trainer.seed_hi")) << 32) |
                    static_cast<std::uint64_t>(ckpt.scalar("trainer.seed_lo"));
  if (seed != config.seed) {
    throw ConfigError("resume: checkpoint was written with seed " + std::to_string(seed) + ", config has " +
                      std::to_string(config.seed));
  }
  Trainer trainer(std::move(config));
  const std::size_t T = trainer.config_.episode_steps;
  const auto& steps = ckpt.get("replay.steps");
  if (steps.shape.size() != 3 || steps.shape[1] != T || steps.shape[2] != kStepWidth) {
    throw DimensionError("resume: replay episodes do not have " + std::to_string(T) + " steps");
  }
  trainer.transition_.restore(ckpt);
  trainer.policy_.restore(ckpt);
  trainer.transition_opt_.restore(ckpt, "adam_transition");
  trainer.policy_opt_.restore(ckpt, "adam_policy");
  trainer.iteration_ = static_cast<std::uint64_t>(ckpt.scalar("trainer.iteration"));
  trainer.episodes_ = static_cast<std::uint64_t>(ckpt.scalar("trainer.episodes"));
  trainer.env_steps_ = static_cast<std::uint64_t>(ckpt.scalar("trainer.env_steps"));

  const auto& states = ckpt.get("replay.states");
  const auto& meta = ckpt.get("replay.meta");
  const std::size_t n = steps.shape[0];
  for (std::size_t e = 0; e < n; ++e) {
    EpisodeRecord ep;
    const double* s = steps.data.data() + e * T * kStepWidth;
    for (std::size_t t = 0; t < T; ++t, s += kStepWidth) {
      StepRecord rec;
      std::copy(s, s + 4, rec.y.begin());
      std::copy(s + 4, s + 8, rec.target.begin());
      std::copy(s + 8, s + 10, rec.u.begin());
      std::copy(s + 10, s + 14, rec.y_next.begin());
      ep.steps.push_back(rec);
    }
    const double* x = states.data.data() + e * (T + 1) * 4;
    if (!std::isnan(x[0])) {
      for (std::size_t t = 0; t <= T; ++t) ep.states.push_back({x[4 * t], x[4 * t + 1], x[4 * t + 2], x[4 * t + 3]});
    }
    const double* m = meta.data.data() + e * 4;
    ep.seed = (static_cast<std::uint64_t>(m[0]) << 32) | static_cast<std::uint64_t>(m[1]);
    ep.iteration = static_cast<std::uint64_t>(m[2]);
    ep.variant = m[3] != 0.0 ? TaskVariant::moving : TaskVariant::stationary;
    trainer.memory_.push(std::move(ep));
  }
  trainer.memory_.set_inserted(static_cast<std::uint64_t>(ckpt.scalar("replay.inserted")));

  trainer.log_.initial = row_record(ckpt.get("log.initial").data.data());
  const auto& rows = ckpt.get("log.records");
  const std::size_t count = rows.shape.empty() ? 0 : rows.shape[0];
  for (std::size_t i = 0; i < count; ++i) trainer.log_.records.push_back(row_record(rows.data.data() + i * kRecordWidth));
  return trainer;
}

// ---------------------------------------------------------------------------
// Driver

TrainLog run(const TrainConfig& config, const RunOptions& options) {
  namespace fs = std::filesystem;
  const fs::path ckpt_dir = options.out_dir / "checkpoints";
  fs::create_directories(ckpt_dir);
  const fs::path state_path = ckpt_dir / "trainer_state.ckpt";

  const bool resuming = options.resume && fs::exists(state_path);
  Trainer trainer = resuming ? Trainer::load_state(config, state_path) : Trainer(config);
  if (!resuming) {
    trainer.transition().save(ckpt_dir / "transition_init.ckpt");
    trainer.policy().save(ckpt_dir / "policy_init.ckpt");
    write_train_log(options.out_dir / "initial_metrics.csv", std::span(&trainer.log().initial, 1));
    write_train_log(options.out_dir / "train_log.csv", {});
    trainer.save_state(state_path);
    std::ofstream(options.out_dir / "timing.csv") << "iter,wall_seconds\n";
  }
  while (trainer.iteration() < config.iterations) {
    const auto start = std::chrono::steady_clock::now();
    const IterationRecord& rec = trainer.run_iteration();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_train_log(options.out_dir / "train_log.csv", trainer.log().records);
    trainer.transition().save(ckpt_dir / "transition.ckpt");
    trainer.policy().save(ckpt_dir / "policy.ckpt");
    trainer.save_state(state_path);
    std::ofstream(options.out_dir / "timing.csv", std::ios::app) << rec.iter << ',' << wall << '\n';
    if (options.on_iteration) options.on_iteration(rec);
  }
  return trainer.log();
}

}  // namespace transpol
