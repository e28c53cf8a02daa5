#include <benchmark/benchmark.h>

#include "plcml/nn.hpp"
#include "plcml/rng.hpp"

using namespace plcml;

static Tensor2 random_batch(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor2 t(r, c);
  for (double& v : t.data) v = rng.normal();
  return t;
}

static void BM_MatMul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Tensor2 a = random_batch(n, n, 1);
  const Tensor2 b = random_batch(n, n, 2);
  for (auto _ : state) {
    Tensor2 c = matmul(a, b);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_MatMul)->Arg(64)->Arg(128)->Arg(256);

static void BM_ForwardBackward(benchmark::State& state) {
  const std::size_t batch = static_cast<std::size_t>(state.range(0));
  const MlpModel m =
      make_mlp({116, 100, 4}, {Activation::Tanh, Activation::Softmax}, 1);
  const Tensor2 x = random_batch(batch, 116, 3);
  Tensor2 y(batch, 4, 0.0);
  for (std::size_t i = 0; i < batch; ++i) y(i, i % 4) = 1.0;
  for (auto _ : state) {
    const ForwardPass pass = forward(m, x);
    const Gradients g = backward(m, pass, y, LossKind::CrossEntropy);
    benchmark::DoNotOptimize(g.input.data.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(256);
