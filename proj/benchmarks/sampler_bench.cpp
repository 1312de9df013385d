// Microbenchmarks for the hot paths: per-step selection, oracle conditional
// scans, full trajectories, and the exact enumeration machinery.

#include <benchmark/benchmark.h>

#include <cmath>
#include <limits>
#include <vector>

#include <ebs/analysis.hpp>
#include <ebs/samplers.hpp>
#include <ebs/tasks.hpp>
#include <ebs/verify.hpp>

namespace {

using namespace ebs;

std::vector<double> random_entropies(int n, RngStream& rng) {
  std::vector<double> h(static_cast<std::size_t>(n));
  for (double& x : h) x = 1.5 * rng.next_unit();
  return h;
}

void BM_EbSelect(benchmark::State& state) {
  RngStream rng(1);
  const auto h = random_entropies(static_cast<int>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(eb_select(h, 0.5));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EbSelect)->Range(8, 8192);

void BM_SelectUnmaskIndices(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  RngStream rng(2);
  PredictionSet preds;
  std::vector<int> candidates;
  for (int i = 0; i < n; ++i) {
    const double p = 0.05 + 0.9 * rng.next_unit();
    preds.insert(i, Categorical({p, 1.0 - p}));
    candidates.push_back(i);
  }
  const SamplerPolicy policy = SamplerPolicy::eb(0.5, ProxyKind::Entropy, 1.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(select_unmask_indices(preds, policy, candidates));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SelectUnmaskIndices)->Range(8, 1024);

void BM_ShidokuConditionals(benchmark::State& state) {
  const JointTable q = shidoku();
  const Vocabulary vocab(4);
  RngStream rng(3);
  const TaskSpec task = TaskSpec::shidoku();
  const MaskedSequence puzzle = make_puzzle(task, q, 8, rng);
  for (auto _ : state) benchmark::DoNotOptimize(q.exact_conditionals(puzzle));
}
BENCHMARK(BM_ShidokuConditionals);

void BM_ShidokuTrajectory(benchmark::State& state) {
  const JointTable q = shidoku();
  const ExactOracle oracle(q);
  const TaskSpec task = TaskSpec::shidoku();
  const SamplerPolicy policy = SamplerPolicy::eb(0.1, ProxyKind::Entropy, 1.0);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    RngStream rng(++seed);
    const MaskedSequence puzzle = make_puzzle(task, q, 8, rng);
    benchmark::DoNotOptimize(
        generate(oracle, puzzle, policy, GenerationConfig{}, rng));
  }
}
BENCHMARK(BM_ShidokuTrajectory);

void BM_EnumeratePolicy(benchmark::State& state) {
  RngStream rng(4);
  const JointTable q = random_joint(4, 3, rng);
  const PerturbedOracle predictor(q, 0.2);
  const SamplerPolicy policy = SamplerPolicy::eb(0.3, ProxyKind::Entropy, 1.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(enumerate_policy_distribution(predictor, policy, 4, 3));
}
BENCHMARK(BM_EnumeratePolicy);

void BM_KlDecomposition(benchmark::State& state) {
  RngStream rng(5);
  const JointTable q = random_joint(4, 3, rng);
  const PerturbedOracle predictor(q, 0.2);
  const SamplerPolicy policy = SamplerPolicy::topk(2, ProxyKind::Confidence, 1.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(kl_decomposition(q, predictor, policy));
}
BENCHMARK(BM_KlDecomposition);

}  // namespace

BENCHMARK_MAIN();
