#include <benchmark/benchmark.h>

#include <random>

#include "sparselab/density.hpp"
#include "sparselab/mask.hpp"
#include "sparselab/model.hpp"
#include "sparselab/ops.hpp"
#include "sparselab/pgd.hpp"

namespace sl = sparselab;

namespace {

sl::Tensor random_tensor(sl::Shape dims, std::uint64_t seed) {
  sl::Tensor t(std::move(dims));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : t.values()) v = static_cast<sl::Scalar>(u(rng));
  return t;
}

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto density = static_cast<double>(state.range(0)) / 100.0;
  sl::Tensor x = random_tensor({32, 16, 8, 8}, 1);
  sl::Tensor w = random_tensor({32, 16, 3, 3}, 2);
  sl::Tensor b({32});
  std::vector<sl::Tensor> weights{w};
  const sl::MaskSet masks = sl::global_magnitude_mask(weights, 1.0 - density);
  const std::vector<int> labels(32, 0);
  const sl::Tensor targets = sl::one_hot(labels, 32 * 8 * 8);
  for (auto _ : state) {
    w.zero_grad();
    b.zero_grad();
    sl::Tape tape;
    sl::Var y = sl::conv2d(tape.input(x), tape.parameter(w), tape.parameter(b), 1, 1, &masks[0]);
    auto ce = sl::softmax_cross_entropy(sl::flatten(y), targets);
    tape.backward(ce.loss);
    benchmark::DoNotOptimize(w.grad().data());
  }
  state.SetLabel("density " + std::to_string(density));
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(100)->Arg(50)->Arg(10);

void BM_TrainStep(benchmark::State& state) {
  sl::Model model = sl::build_miniconvnet(1, 8, 8, {16, 32}, 3, 10, 1);
  sl::MaskSet masks = sl::full_masks(model.weights());
  sl::SgdOptimizer opt(sl::SgdOptions{});
  const sl::Tensor x = random_tensor({128, 1, 8, 8}, 3);
  std::vector<int> y(128);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 10);
  for (auto _ : state) {
    const auto r = sl::train_step(model, &masks, opt, x, y);
    benchmark::DoNotOptimize(r.loss);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_GlobalMagnitudeMask(benchmark::State& state) {
  std::vector<sl::Tensor> weights{random_tensor({32, 16, 3, 3}, 4), random_tensor({10, 512}, 5),
                                  random_tensor({16, 1, 3, 3}, 6)};
  for (auto _ : state) {
    auto masks = sl::global_magnitude_mask(weights, 0.8);
    benchmark::DoNotOptimize(masks.data());
  }
}
BENCHMARK(BM_GlobalMagnitudeMask);

void BM_ErkSolve(benchmark::State& state) {
  const auto layers = sl::layer_shapes(sl::miniconvnet_spec(3, 32, 32, {64, 128, 256, 512}, 3, 100));
  for (auto _ : state) {
    auto plan = sl::solve_erk_plan(layers, 0.1);
    benchmark::DoNotOptimize(plan.nonzeros.data());
  }
}
BENCHMARK(BM_ErkSolve);

}  // namespace

BENCHMARK_MAIN();
