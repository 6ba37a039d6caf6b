#include <benchmark/benchmark.h>

#include "fb/evaluation.hpp"
#include "fb/losses.hpp"
#include "fb/oracle.hpp"
#include "fb/replay.hpp"
#include "fb/runtime.hpp"
#include "fb/trainer.hpp"

namespace {

fb::TrainingBatch make_batch(const fb::Environment& env, int d, int b, fb::RandomStream& rng) {
  fb::TrainingBatch batch;
  for (int i = 0; i < b; ++i) {
    const auto s = env.reset(rng);
    const int a = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(env.num_actions())));
    batch.transitions.push_back({s, a, env.step(s, a, rng)});
    batch.targets.push_back({env.reset(rng), 0});
  }
  batch.zs.resize(d, b);
  for (int i = 0; i < b; ++i) batch.zs.col(i) = fb::sample_z(d, rng);
  return batch;
}

// One full gradient evaluation (FB loss + regularizer) at the training batch size.
void BM_UpdateGradients(benchmark::State& state) {
  fb::tune_allocator();
  const auto id = static_cast<fb::EnvId>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  const auto env = fb::make_environment(id);
  fb::FBModel model(env, fb::Architecture{d, {256, 256, 256}});
  fb::RandomStream rng(1);
  model.initialize(rng);
  const auto batch = make_batch(*env, d, 128, rng);
  const fb::LossOptions options{0.99, 200.0, 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(fb::fb_update_gradients(model, batch, options));
}
BENCHMARK(BM_UpdateGradients)
    ->Args({static_cast<int>(fb::EnvId::discrete_maze), 100})
    ->Args({static_cast<int>(fb::EnvId::discrete_maze), 25})
    ->Args({static_cast<int>(fb::EnvId::continuous_maze), 100})
    ->Unit(benchmark::kMillisecond);

void BM_Epoch(benchmark::State& state) {
  fb::tune_allocator();
  auto hp = fb::Hyperparams::defaults_for(fb::EnvId::discrete_maze);
  hp.eval_goals = 0;
  hp.cycles_per_epoch = 2;
  fb::Trainer trainer(hp);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.run_epoch());
}
BENCHMARK(BM_Epoch)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_ReplaySample(benchmark::State& state) {
  const auto env = fb::make_environment(fb::EnvId::discrete_maze);
  fb::ReplayBuffer buffer(100'000);
  fb::RandomStream rng(2);
  while (buffer.size() < buffer.capacity()) {
    const auto s = env->reset(rng);
    buffer.push({s, 0, s});
  }
  for (auto _ : state) benchmark::DoNotOptimize(buffer.sample_transitions(128, rng));
}
BENCHMARK(BM_ReplaySample);

void BM_ExactSuccessorMeasure(benchmark::State& state) {
  const auto env = fb::make_environment(fb::EnvId::discrete_maze);
  const auto dyn = env->exact_dynamics();
  const auto pi = fb::TabularPolicy::uniform(dyn.num_states, dyn.num_actions);
  for (auto _ : state) benchmark::DoNotOptimize(fb::successor_measure_exact(dyn, pi, 0.99));
}
BENCHMARK(BM_ExactSuccessorMeasure)->Unit(benchmark::kMillisecond);

void BM_GoalQuality(benchmark::State& state) {
  const auto env = fb::make_environment(fb::EnvId::discrete_maze);
  fb::FBModel model(env, fb::Architecture{100, {256, 256, 256}});
  fb::RandomStream rng(3);
  model.initialize(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fb::goal_quality(model, *env, 24, fb::PolicySpec::boltzmann(1.0), 0.99));
  }
}
BENCHMARK(BM_GoalQuality)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
