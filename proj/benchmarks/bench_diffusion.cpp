#include <benchmark/benchmark.h>

#include "vrdiff/diffusion.hpp"
#include "vrdiff/graphs.hpp"
#include "vrdiff/rng.hpp"

namespace {

using namespace vrdiff;

AttributeGraph make_random_graph(int nodes, int dim, int hops,
                                 std::uint64_t seed) {
  SplitMix64 rng(seed);
  Matrix raw(nodes, nodes);
  for (int r = 0; r < nodes; ++r) {
    for (int c = 0; c < nodes; ++c) {
      raw(r, c) = r == c ? 0.0 : (rng.uniform() < 0.2 ? 1.0 : 0.0);
    }
  }
  AttributeGraph g;
  g.node_ids.resize(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) g.node_ids[static_cast<std::size_t>(i)] = i;
  g.raw_adjacency = raw;
  g.adjacency = normalize_adjacency(raw);
  g.attributes = Matrix(nodes, dim);
  for (int r = 0; r < nodes; ++r) {
    for (int c = 0; c < dim; ++c) g.attributes(r, c) = rng.normal();
  }
  g.power_tensor = power_tensor(g.adjacency, hops);
  return g;
}

void BM_DiffuseForward(benchmark::State& state) {
  const int nodes = static_cast<int>(state.range(0));
  const int dim = 64;
  const int hops = 3;
  const AttributeGraph graph = make_random_graph(nodes, dim, hops, 1);
  const DiffusionParams params =
      DiffusionParams::init(hops, dim, dim, Nonlinearity::Relu, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(diffuse_forward(graph, params, false).Z);
  }
  state.SetComplexityN(nodes);
}
BENCHMARK(BM_DiffuseForward)->RangeMultiplier(2)->Range(8, 256)->Complexity();

void BM_DiffuseBackward(benchmark::State& state) {
  const int nodes = static_cast<int>(state.range(0));
  const int dim = 64;
  const int hops = 3;
  const AttributeGraph graph = make_random_graph(nodes, dim, hops, 1);
  const DiffusionParams params =
      DiffusionParams::init(hops, dim, dim, Nonlinearity::Relu, 2);
  const DiffusionOutput out = diffuse_forward(graph, params);
  const Matrix grad = Matrix::Ones(nodes, dim);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        diffuse_backward(graph, params, out, grad, true).map_weights);
  }
  state.SetComplexityN(nodes);
}
BENCHMARK(BM_DiffuseBackward)->RangeMultiplier(2)->Range(8, 256)->Complexity();

void BM_PowerTensor(benchmark::State& state) {
  const int nodes = static_cast<int>(state.range(0));
  const AttributeGraph graph = make_random_graph(nodes, 4, 2, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(power_tensor(graph.adjacency, 5));
  }
  state.SetComplexityN(nodes);
}
BENCHMARK(BM_PowerTensor)->RangeMultiplier(2)->Range(8, 256)->Complexity();

}  // namespace

BENCHMARK_MAIN();
