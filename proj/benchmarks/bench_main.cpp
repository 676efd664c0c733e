#include <bhsim/bst.hpp>
#include <bhsim/history.hpp>
#include <bhsim/predictor.hpp>
#include <bhsim/scenario_spec.hpp>
#include <bhsim/scenarios.hpp>

#include <benchmark/benchmark.h>

#include <random>

using namespace bhsim;

namespace {

MicroarchProfile profile_arg(const benchmark::State& state) {
  return builtin_profiles().at(static_cast<std::size_t>(state.range(0)));
}

void profile_args(benchmark::internal::Benchmark* b) {
  for (std::size_t i = 0; i < builtin_profiles().size(); ++i) {
    b->Arg(static_cast<int64_t>(i));
  }
}

void BM_HistoryUpdateRead(benchmark::State& state) {
  const auto p = profile_arg(state);
  HistoryState h(p);
  std::mt19937_64 rng(1);
  HistoryUpdate u;
  u.kind = BranchKind::Indirect;
  u.taken = true;
  for (auto _ : state) {
    u.pc = 0x400000 + 4 * (rng() & 0xFF);
    u.target = rng() & 0xFFFF0;
    h.update(u, false);
    benchmark::DoNotOptimize(h.read());
  }
  state.SetLabel(p.name);
}
BENCHMARK(BM_HistoryUpdateRead)->Apply(profile_args);

void BM_PredictResolve(benchmark::State& state) {
  const auto p = profile_arg(state);
  PredictorState ps(p);
  std::mt19937_64 rng(2);
  HistoryValue h(p.history_bits());
  for (auto _ : state) {
    h.xor_bits(0, rng(), 16);
    const Addr pc = 0x400000 + 4 * (rng() & 0x3FF);
    const auto actual =
        (rng() & 1) ? BranchOutcome::taken() : BranchOutcome::not_taken();
    const auto pred = ps.predict(BranchKind::Conditional, pc, h);
    benchmark::DoNotOptimize(ps.resolve(BranchKind::Conditional, pc, h, actual, pred));
  }
  state.SetLabel(p.name);
}
BENCHMARK(BM_PredictResolve)->Apply(profile_args);

void BM_BstClassify(benchmark::State& state) {
  const auto p = profile_arg(state);
  BstTable bst(p);
  std::mt19937_64 rng(3);
  for (auto _ : state) {
    const Addr pc = 0x400000 + 4 * (rng() & 0xFFF);
    benchmark::DoNotOptimize(bst.classify_and_update(
        pc, (rng() & 3) ? BranchOutcome::taken() : BranchOutcome::not_taken()));
  }
  state.SetLabel(p.name);
}
BENCHMARK(BM_BstClassify)->Apply(profile_args);

// Cost of one scenario trial, measured as a 20-trial run.
void BM_ScenarioTrials(benchmark::State& state, ScenarioId id, const char* profile) {
  const auto p = *find_builtin_profile(profile);
  auto spec = default_scenario(id, p);
  spec.trials = 20;
  spec = validate_scenario(spec, p);
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_scenario(spec, p, 1));
  }
  state.SetItemsProcessed(state.iterations() * spec.trials);
}
BENCHMARK_CAPTURE(BM_ScenarioTrials, bse_a72, ScenarioId::SpectreBse, "cortex-a72");
BENCHMARK_CAPTURE(BM_ScenarioTrials, chimera_a76, ScenarioId::Chimera, "cortex-a76");
BENCHMARK_CAPTURE(BM_ScenarioTrials, bhs_mistrain_zen4, ScenarioId::SpectreBhsMistrain, "zen4");
BENCHMARK_CAPTURE(BM_ScenarioTrials, biasscope_a72, ScenarioId::BiasScope, "cortex-a72");

}  // namespace

BENCHMARK_MAIN();
