#include <cmath>
#include <random>

#include "benchmark/benchmark.h"
#include "vmg/layer.hpp"
#include "vmg/model.hpp"

namespace {

using namespace vmg;

Tensor normal(Shape shape, Rng& rng) {
  std::normal_distribution<double> n;
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = n(rng);
  return t;
}

VMGLayer square_layer(std::size_t d, std::size_t np, Rng& rng) {
  VMGLayer layer;
  layer.mean = normal({d, d}, rng);
  layer.row_log_var = Tensor({d}, -4.6);
  layer.col_log_var = Tensor({d}, 0.0);
  if (np > 0) {
    layer.pseudo_in.mean = normal({np, d}, rng);
    layer.pseudo_out.mean = normal({np, d}, rng);
  }
  return layer;
}

constexpr std::size_t kBatch = 32;

// Args: D, N_p.
void BM_ConditionalSample(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto np = static_cast<std::size_t>(state.range(1));
  Rng rng(1);
  const VMGLayer layer = square_layer(d, np, rng);
  const Tensor a = normal({kBatch, d}, rng), e = normal({kBatch, d}, rng);
  for (auto _ : state) {
    Graph g;
    auto v = vmg::bind(g, layer);
    auto b = conditional_local_sample(v, g.constant(a), g.constant(layer.pseudo_in.mean),
                                      g.constant(layer.pseudo_out.mean), g.constant(e));
    benchmark::DoNotOptimize(b.value().data());
  }
  state.SetComplexityN(state.range(0));
}

void BM_MarginalSample(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const VMGLayer layer = square_layer(d, 0, rng);
  const Tensor a = normal({kBatch, d}, rng), e = normal({kBatch, d}, rng);
  for (auto _ : state) {
    Graph g;
    auto v = vmg::bind(g, layer);
    auto b = marginal_local_sample(v, g.constant(a), g.constant(e));
    benchmark::DoNotOptimize(b.value().data());
  }
  state.SetComplexityN(state.range(0));
}

// Full ELBO step (forward + backward) of a 784-64-64-10 classifier.
void BM_ElboGradient(benchmark::State& state) {
  NetworkConfig c;
  c.widths = {784, 64, 64, 10};
  const auto np = static_cast<std::size_t>(state.range(0));
  if (np > 0) c.pseudo_counts = {np, np, np};
  c.task = Task::kClassification;
  Rng rng(3);
  VMGNetwork net = init_network(c, rng);
  net.input_mean = Tensor({1, 784});
  net.input_std = Tensor({1, 784}, 1.0);
  const Tensor x = normal({100, 784}, rng);
  Tensor y({100, 1});
  for (std::size_t i = 0; i < 100; ++i) y[i] = static_cast<double>(i % 10);
  for (auto _ : state) {
    Graph g;
    auto vars = vmg::bind(g, net, true);
    auto parts = build_elbo(vars, net, x, y, 5000, draw_noise(net, 100, rng));
    benchmark::DoNotOptimize(g.gradient(parts.elbo));
  }
}

}  // namespace

BENCHMARK(BM_ConditionalSample)->ArgsProduct({{256, 512, 1024, 2048}, {8}})->Complexity(benchmark::oNSquared);
BENCHMARK(BM_ConditionalSample)->ArgsProduct({{1024}, {128, 256, 512, 1000}});
BENCHMARK(BM_ConditionalSample)->Args({784, 150});
BENCHMARK(BM_MarginalSample)->RangeMultiplier(2)->Range(256, 2048)->Complexity(benchmark::oNSquared);
BENCHMARK(BM_ElboGradient)->Arg(0)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
