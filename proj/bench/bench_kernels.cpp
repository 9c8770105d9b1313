#include <benchmark/benchmark.h>

#include <vector>

#include "protohead/kernels.hpp"
#include "protohead/loss.hpp"
#include "protohead/synth.hpp"

namespace ph = protohead;

namespace {

struct Fixture {
  ph::Dataset data;
  std::vector<const ph::TokenEmbeddingSample*> refs;
  ph::TrainConfig config;
  ph::HeadParameters params;

  Fixture(std::size_t samples, std::uint32_t dim, std::size_t prototypes) {
    ph::SynthSpec spec;
    spec.samples_per_class = samples / spec.classes;
    spec.dim = dim;
    spec.min_tokens = 16;
    spec.max_tokens = 64;
    data = ph::synth(spec);
    for (const auto& s : data.samples) refs.push_back(&s);
    config.num_prototypes = prototypes;
    params = ph::init_params(config, dim, data.num_classes, 1);
  }
};

ph::ExecPolicy policy_of(const benchmark::State& state) {
  return state.range(0) ? ph::ExecPolicy::kParallel : ph::ExecPolicy::kSerial;
}

void BM_Forward(benchmark::State& state) {
  static const Fixture fx(128, 256, 100);
  ph::set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(ph::forward_batch(fx.refs, fx.params, policy_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(fx.refs.size()));
}

void BM_Backward(benchmark::State& state) {
  static const Fixture fx(128, 256, 100);
  ph::set_num_threads(static_cast<int>(state.range(1)));
  const auto traces = ph::forward_batch(fx.refs, fx.params, ph::ExecPolicy::kSerial);
  const auto loss = ph::total_loss(fx.refs, traces, fx.params, fx.config);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ph::backward_batch(fx.refs, traces, loss, fx.params, fx.config, policy_of(state)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(fx.refs.size()));
}

// Args: {parallel?, threads}
void policies(benchmark::internal::Benchmark* b) {
  b->ArgNames({"parallel", "threads"});
  b->Args({0, 1});
  for (int t : {1, 2, 4, 8}) b->Args({1, t});
  b->Unit(benchmark::kMillisecond)->UseRealTime();
}

}  // namespace

BENCHMARK(BM_Forward)->Apply(policies);
BENCHMARK(BM_Backward)->Apply(policies);

BENCHMARK_MAIN();
