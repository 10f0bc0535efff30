#include <benchmark/benchmark.h>

#include <vector>

#include "snac/kernels.hpp"
#include "snac/rng.hpp"
#include "snac/trainer.hpp"
#include "snac/verify.hpp"

namespace k = snac::kernels;

namespace {

std::vector<double> random_buffer(std::size_t n, std::uint64_t seed) {
  snac::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <bool Parallel>
void BM_Tanh(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_buffer(n, 1);
  std::vector<double> out(n);
  for (auto _ : state) {
    if constexpr (Parallel) k::unary(k::Unary::tanh, a, out);
    else k::serial::unary(k::Unary::tanh, a, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  // rows x 64 times 64 x 64: one hidden layer over a batch of frames
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto a = random_buffer(m * 64, 2), b = random_buffer(64 * 64, 3);
  std::vector<double> c(m * 64);
  for (auto _ : state) {
    if constexpr (Parallel) k::matmul(a.data(), b.data(), c.data(), m, 64, 64);
    else k::serial::matmul(a.data(), b.data(), c.data(), m, 64, 64);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m * 64 * 64));
}

template <bool Parallel>
void BM_MatmulTN(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto a = random_buffer(m * 64, 4), b = random_buffer(m * 64, 5);
  std::vector<double> c(64 * 64);
  for (auto _ : state) {
    if constexpr (Parallel) k::matmul_tn(a.data(), b.data(), c.data(), m, 64, 64);
    else k::serial::matmul_tn(a.data(), b.data(), c.data(), m, 64, 64);
    benchmark::DoNotOptimize(c.data());
  }
}

template <bool Parallel>
void BM_Sum(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_buffer(n, 6);
  for (auto _ : state) {
    double s = Parallel ? k::sum(a) : k::serial::sum(a);
    benchmark::DoNotOptimize(s);
  }
}

void BM_NllGradient(benchmark::State& state) {
  const auto mode = state.range(0) == 0 ? snac::Mode::baseline : snac::Mode::snac;
  snac::FlowArch arch;
  arch.mode = mode;
  const snac::DatasetSpec spec;
  const auto data = snac::make_dataset(spec);
  std::vector<std::size_t> idx(64);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i * 7;
  const auto batch = snac::gather(data, idx);
  const auto params = snac::perturb_params(snac::init_params(0, arch), 1, 0.1);
  const auto loss = snac::nll_objective(arch, batch);
  for (auto _ : state) benchmark::DoNotOptimize(snac::value_and_gradient(loss, params));
}

}  // namespace

BENCHMARK(BM_Tanh<false>)->Name("tanh/serial")->Range(1 << 12, 1 << 20);
BENCHMARK(BM_Tanh<true>)->Name("tanh/parallel")->Range(1 << 12, 1 << 20);
BENCHMARK(BM_Matmul<false>)->Name("matmul/serial")->Range(64, 1 << 14);
BENCHMARK(BM_Matmul<true>)->Name("matmul/parallel")->Range(64, 1 << 14);
BENCHMARK(BM_MatmulTN<false>)->Name("matmul_tn/serial")->Range(64, 1 << 14);
BENCHMARK(BM_MatmulTN<true>)->Name("matmul_tn/parallel")->Range(64, 1 << 14);
BENCHMARK(BM_Sum<false>)->Name("sum/serial")->Range(1 << 12, 1 << 22);
BENCHMARK(BM_Sum<true>)->Name("sum/parallel")->Range(1 << 12, 1 << 22);
BENCHMARK(BM_NllGradient)->Name("nll_gradient/batch64")->Arg(0)->Arg(1);

BENCHMARK_MAIN();
