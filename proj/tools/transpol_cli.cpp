// transpol: train, evaluate and inspect point-mass reaching controllers.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "transpol/config.hpp"
#include "transpol/episode_csv.hpp"
#include "transpol/errors.hpp"
#include "transpol/eval.hpp"
#include "transpol/gradcheck.hpp"
#include "transpol/lqr.hpp"
#include "transpol/nets.hpp"
#include "transpol/replay.hpp"
#include "transpol/trainer.hpp"

#ifndef TRANSPOL_VERSION
#define TRANSPOL_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace transpol;

namespace {

std::string joined_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

std::string gamma_tag(double deg) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "g%+04d", static_cast<int>(std::lround(deg)));
  return buf;
}

void print_matrix(const char* name, const Eigen::MatrixXd& M) {
  std::printf("%s =\n", name);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    std::printf("  [");
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      const double v = std::abs(M(i, j)) < 5e-9 ? 0.0 : M(i, j);  // no "-0.00000000"
      std::printf("%s%.8f", j ? ", " : "", v);
    }
    std::printf("]\n");
  }
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  long long iterations = -1;
  bool desk = false;
  bool resume = false;
};

int cmd_train(const TrainArgs& a, const std::string& command) {
  TrainConfig config = a.desk ? desk_config() : TrainConfig{};
  if (!a.config_path.empty()) {
    if (!fs::exists(a.config_path)) throw ConfigError("config file not found: " + a.config_path);
    config = load_config(a.config_path);
  }
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.iterations >= 0) config.iterations = static_cast<std::size_t>(a.iterations);
  apply_env_overrides(config);
  config.validate();

  const fs::path out(a.out_dir);
  fs::create_directories(out);
  const std::string config_text = format_config(config);
  std::ofstream(out / "config.txt") << config_text;
  RunManifest manifest{TRANSPOL_VERSION, command, config_text, config.seed, out,
                       {"config.txt", "manifest.json", "initial_metrics.csv", "train_log.csv", "timing.csv",
                        "checkpoints/transition_init.ckpt", "checkpoints/policy_init.ckpt",
                        "checkpoints/trainer_state.ckpt"}};
  if (config.iterations > 0) {
    manifest.outputs.push_back("checkpoints/transition.ckpt");
    manifest.outputs.push_back("checkpoints/policy.ckpt");
  }
  write_manifest(out / "manifest.json", manifest);

  RunOptions options;
  options.out_dir = out;
  options.resume = a.resume;
  options.on_iteration = [](const IterationRecord& r) {
    std::printf("iter %3llu  loss_t %.5f  loss_p %.5f  mse %.3e  ar %.4f  J_stat %.4f  J_mov %.4f\n",
                static_cast<unsigned long long>(r.iter), r.loss_t, r.loss_p, r.mse_1step, r.ar_error,
                r.J_stationary, r.J_moving);
    std::fflush(stdout);
  };
  const TrainLog log = run(config, options);
  std::printf("done: %zu iterations logged in %s\n", log.records.size(), (out / "train_log.csv").c_str());
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string transition;
  bool lqr = false;
  std::string variant = "stationary";
  std::vector<double> gammas{0.0};
  bool sweep = false;
  std::string out_dir;
  bool noise = false;
  bool svg = true;
  std::uint64_t seed = 0;
  std::size_t steps = 200;
  double kappa = 5.0;
  std::string state_source = "observation";
};

int cmd_eval(const EvalArgs& a) {
  if (!a.lqr && a.checkpoint.empty()) throw ConfigError("eval needs --checkpoint or --lqr");
  EnvParams params;
  params.kappa = a.kappa;
  const fs::path out(a.out_dir);
  fs::create_directories(out);

  std::unique_ptr<Controller> controller;
  std::unique_ptr<PolicyModel> policy;
  std::unique_ptr<TransitionModel> transition;
  if (a.lqr) {
    const LqrGain gain = solve_care(LinearSystem::point_mass(params.kappa));
    controller = std::make_unique<LqrController>(gain.K, params.u_max);
  } else {
    policy = std::make_unique<PolicyModel>(PolicyModel::load(a.checkpoint));
    const StateSource source = parse_state_source(a.state_source);
    if (!a.transition.empty()) transition = std::make_unique<TransitionModel>(TransitionModel::load(a.transition));
    controller = std::make_unique<PolicyController>(*policy, ActionMode::mean, RngStream(a.seed), transition.get(),
                                                     source);
  }

  std::vector<TaskVariant> variants;
  if (a.variant == "both") {
    variants = {TaskVariant::stationary, TaskVariant::moving};
  } else {
    variants = {parse_variant(a.variant)};
  }
  const std::vector<double> gammas = a.sweep ? default_sweep_degrees() : a.gammas;
  EvalOptions eo;
  eo.with_noise = a.noise;
  eo.seed = a.seed;

  std::vector<EvalReport> all;
  for (const auto variant : variants) {
    const ReachTask task = make_task(variant, a.steps, params.dt);
    for (const auto& report : perturbation_sweep(*controller, task, params, gammas, eo)) {
      const double deg = report.gamma * 180.0 / std::numbers::pi;
      const std::string stem = report.controller + "_" + to_string(variant) + "_" + gamma_tag(deg);
      const fs::path ep_dir = out / "episodes" / stem;
      fs::create_directories(ep_dir);
      for (std::size_t k = 0; k < report.episodes.size(); ++k) {
        write_episode_csv(ep_dir / ("target_" + std::to_string(k) + ".csv"), report.episodes[k]);
      }
      if (a.svg) write_trajectory_svg(out / (stem + ".svg"), report, params.x_max);
      std::printf("%-7s %-10s gamma=%7.1f  J=%.4f\n", report.controller.c_str(), to_string(variant).c_str(), deg,
                  report.total_J);
      all.push_back(report);
    }
  }
  write_report_csv(out / "report.csv", all);
  return 0;
}

// ---------------------------------------------------------------------------

struct LqrArgs {
  std::string out_dir;
  double kappa = 5.0;
  double q_pos = 1.0;
  double q_vel = 0.1;
  double r = 0.1;
  bool noise = false;
};

int cmd_lqr(const LqrArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const LinearSystem sys = LinearSystem::point_mass(a.kappa, a.q_pos, a.q_vel, a.r);
  const LqrGain gain = solve_care(sys);
  print_matrix("K", gain.K);
  print_matrix("P", gain.P);
  std::printf("care_residual = %.3e (iterations %d)\n", gain.residual, gain.iterations);

  EnvParams params;
  params.kappa = a.kappa;
  LqrScenario scenario;
  scenario.with_noise = a.noise;
  const auto result = run_lqr_scenario(params, gain.K, scenario);
  std::printf("scenario final_error = %.6f overshoot = %.6f\n", result.final_error, result.overshoot);
  if (!a.out_dir.empty()) {
    const fs::path out(a.out_dir);
    fs::create_directories(out);
    std::ofstream(out / "gain.json") << gain_to_json(gain) << '\n';
    std::ofstream(out / "gain.csv") << gain_to_csv(gain);
    write_episode_csv(out / "scenario.csv", result.episode);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("elapsed = %.3f s\n", secs);
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_gradcheck(std::uint64_t seed, bool corrupt) {
  GradcheckOptions o;
  o.seed = seed;
  o.corrupt = corrupt;
  const auto results = run_gradcheck(o);
  print_gradcheck(std::cout, results);
  for (const auto& r : results) {
    if (!r.passed()) return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct RolloutArgs {
  std::string controller = "lqr";
  std::string checkpoint;
  std::size_t episodes = 8;
  std::size_t steps = 200;
  std::string variant = "stationary";
  std::string out_dir;
  std::uint64_t seed = 0;
  double gamma_deg = 0.0;
  bool noiseless = false;
};

int cmd_rollout(const RolloutArgs& a) {
  EnvParams params;
  params.gamma = a.gamma_deg * std::numbers::pi / 180.0;
  if (a.noiseless) params = params.noiseless();
  const RngStream root(a.seed);

  std::unique_ptr<Controller> controller;
  std::unique_ptr<PolicyModel> policy;
  if (a.controller == "lqr") {
    controller = std::make_unique<LqrController>(solve_care(LinearSystem::point_mass(params.kappa)).K, params.u_max);
  } else if (a.controller == "policy") {
    if (a.checkpoint.empty()) throw ConfigError("rollout --controller policy needs --checkpoint");
    policy = std::make_unique<PolicyModel>(PolicyModel::load(a.checkpoint));
    controller = std::make_unique<PolicyController>(*policy, ActionMode::sample, root.substream(kPolicySampling));
  } else if (a.controller == "random") {
    controller = std::make_unique<HoldRandomController>(params.u_max, 20, root.substream(kPolicySampling));
  } else {
    throw ConfigError("unknown controller '" + a.controller + "' (expected lqr, policy or random)");
  }

  const TaskVariant variant = parse_variant(a.variant);
  const ReachTask task = make_task(variant, a.steps, params.dt);
  std::vector<std::vector<Vec4>> targets;
  std::vector<RngStream> streams;
  for (std::size_t e = 0; e < a.episodes; ++e) {
    targets.push_back(task.targets[e % task.targets.size()]);
    streams.push_back(root.substream(e));
  }
  auto episodes = rollout_batch(*controller, params, task.start, targets, streams);
  MemoryBuffer buffer(std::max<std::size_t>(a.episodes, 1), a.steps);
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    episodes[e].seed = streams[e].stream();
    episodes[e].variant = variant;
    std::printf("episode %zu  J=%.4f\n", e, episode_performance(episodes[e], params.dt));
    buffer.push(std::move(episodes[e]));
  }
  save_buffer(a.out_dir, buffer);
  std::printf("wrote %zu episodes to %s\n", buffer.size(), a.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-mass reaching: learned transition model and policy, LQR baseline"};
  app.set_version_flag("--version", TRANSPOL_VERSION);
  app.require_subcommand(1);

  TrainArgs train;
  auto* sc_train = app.add_subcommand("train", "Run offline training");
  sc_train->add_option("--config", train.config_path, "key = value configuration file");
  sc_train->add_option("--out", train.out_dir, "Output directory")->required();
  sc_train->add_option("--set", train.overrides, "Override a config key (key=value), repeatable");
  sc_train->add_option("--iterations", train.iterations, "Override the iteration count");
  sc_train->add_flag("--desk", train.desk, "Start from the reduced single-core configuration");
  sc_train->add_flag("--resume", train.resume, "Continue from checkpoints/trainer_state.ckpt");

  EvalArgs eval;
  auto* sc_eval = app.add_subcommand("eval", "Evaluate a policy checkpoint or the LQR on the reaching task");
  sc_eval->add_option("--checkpoint", eval.checkpoint, "Policy checkpoint");
  sc_eval->add_option("--transition", eval.transition, "Transition checkpoint (for --state-source estimate)");
  sc_eval->add_option("--state-source", eval.state_source, "observation | estimate");
  sc_eval->add_flag("--lqr", eval.lqr, "Evaluate the LQR baseline");
  sc_eval->add_option("--variant", eval.variant, "stationary | moving | both");
  sc_eval->add_option("--gamma", eval.gammas, "Rotation angles in degrees")->delimiter(',');
  sc_eval->add_flag("--sweep", eval.sweep, "Use the -120..120 deg sweep in 15 deg steps");
  sc_eval->add_option("--out", eval.out_dir, "Output directory")->required();
  sc_eval->add_flag("--noise", eval.noise, "Keep process and observation noise");
  sc_eval->add_flag("!--no-svg", eval.svg, "Skip SVG plots");
  sc_eval->add_option("--seed", eval.seed, "Noise seed");
  sc_eval->add_option("--steps", eval.steps, "Episode length");
  sc_eval->add_option("--kappa", eval.kappa, "Acceleration constant");

  LqrArgs lqr;
  auto* sc_lqr = app.add_subcommand("lqr", "Solve the CARE and run the reference scenario");
  sc_lqr->add_option("--out", lqr.out_dir, "Output directory for gain.json, gain.csv and scenario.csv");
  sc_lqr->add_option("--kappa", lqr.kappa, "Acceleration constant");
  sc_lqr->add_option("--q-pos", lqr.q_pos, "Position cost");
  sc_lqr->add_option("--q-vel", lqr.q_vel, "Velocity cost");
  sc_lqr->add_option("--r", lqr.r, "Control cost");
  sc_lqr->add_flag("--noise", lqr.noise, "Run the scenario with process and observation noise");

  std::uint64_t gc_seed = 0;
  bool gc_corrupt = false;
  auto* sc_grad = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  sc_grad->add_option("--seed", gc_seed, "Seed");
  sc_grad->add_flag("--corrupt-gradient", gc_corrupt, "Perturb one analytic gradient (harness self-test)");

  RolloutArgs rollout;
  auto* sc_roll = app.add_subcommand("rollout", "Dump raw episodes driven by a controller");
  sc_roll->add_option("--controller", rollout.controller, "lqr | policy | random");
  sc_roll->add_option("--checkpoint", rollout.checkpoint, "Policy checkpoint");
  sc_roll->add_option("--episodes", rollout.episodes, "Number of episodes");
  sc_roll->add_option("--steps", rollout.steps, "Steps per episode");
  sc_roll->add_option("--variant", rollout.variant, "stationary | moving");
  sc_roll->add_option("--gamma", rollout.gamma_deg, "Rotation angle in degrees");
  sc_roll->add_option("--seed", rollout.seed, "Seed");
  sc_roll->add_flag("--noiseless", rollout.noiseless, "Disable process and observation noise");
  sc_roll->add_option("--out", rollout.out_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sc_train) return cmd_train(train, joined_args(argc, argv));
    if (*sc_eval) return cmd_eval(eval);
    if (*sc_lqr) return cmd_lqr(lqr);
    if (*sc_grad) return cmd_gradcheck(gc_seed, gc_corrupt);
    if (*sc_roll) return cmd_rollout(rollout);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
