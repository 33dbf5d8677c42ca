#include <benchmark/benchmark.h>

#include "transpol/env.hpp"
#include "transpol/lqr.hpp"
#include "transpol/nets.hpp"
#include "transpol/trainer.hpp"

namespace {

using namespace transpol;

void BM_EnvStep(benchmark::State& state) {
  const EnvParams params;
  EnvStreams streams = EnvStreams::from(RngStream(1));
  State s = reset(params, {0.1, -0.2, 0.0, 0.0});
  const Vec2 u{0.3, -0.4};
  for (auto _ : state) {
    s = step(s, u, params, streams).state;
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_EnvStep);

void BM_CareSolve(benchmark::State& state) {
  const LinearSystem sys = LinearSystem::point_mass(5.0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_care(sys));
}
BENCHMARK(BM_CareSolve);

void BM_TransitionForward(benchmark::State& state) {
  const auto B = static_cast<std::size_t>(state.range(0));
  const auto H = static_cast<std::size_t>(state.range(1));
  const TransitionModel model(H, RngStream(2));
  const ad::Tensor y = ad::Tensor::filled({B, 4}, 0.1);
  const ad::Tensor u = ad::Tensor::filled({B, 2}, 0.2);
  ad::Tensor h = model.initial_hidden(B);
  const ad::NoGradGuard no_grad;
  for (auto _ : state) {
    h = model.forward(y, u, h).hidden;
    benchmark::DoNotOptimize(h.data().data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * B));
}
BENCHMARK(BM_TransitionForward)->Args({64, 64})->Args({128, 64})->Args({64, 256});

void BM_TransitionUpdate(benchmark::State& state) {
  const auto N = static_cast<std::size_t>(state.range(0));
  const auto H = static_cast<std::size_t>(state.range(1));
  TrainConfig cfg;
  cfg.episode_steps = 200;
  cfg.transition_hidden_size = H;
  cfg.policy_hidden_size = 8;
  cfg.heldout_episodes = 1;
  Trainer trainer(cfg);
  MemoryBuffer memory(64, cfg.episode_steps);
  for (auto& ep : trainer.collect_episodes(0)) memory.push(std::move(ep));
  TransitionModel model(H, RngStream(3));
  Adam opt(model.parameters(), {});
  TransitionUpdateOptions o;
  o.updates = 1;
  o.batch_size = N;
  o.micro_batch = N;
  for (auto _ : state) benchmark::DoNotOptimize(update_transition(memory, model, opt, o, RngStream(4)));
}
BENCHMARK(BM_TransitionUpdate)->Args({16, 64})->Args({64, 64})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
