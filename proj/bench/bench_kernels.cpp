// Serial reference vs OpenMP kernels on B x B similarity blocks.

#include <benchmark/benchmark.h>

#include <random>

#include "ccl/kernels.hpp"

using namespace ccl;

namespace {

constexpr std::size_t kDim = 16;

Matrix random_unit(std::size_t rows, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix x(rows, kDim);
    for (double& v : x.flat()) v = g(rng);
    Matrix unit;
    std::vector<double> norms;
    kernels::serial::normalize_rows(x, unit, norms);
    return unit;
}

template <auto Gram>
void bm_gram(benchmark::State& state) {
    const auto b = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_unit(b, 1);
    const Matrix c = random_unit(b, 2);
    Matrix out;
    for (auto _ : state) {
        Gram(a, c, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(b * b));
}

template <auto Softmax>
void bm_softmax(benchmark::State& state) {
    const auto b = static_cast<std::size_t>(state.range(0));
    Matrix s;
    kernels::serial::gram(random_unit(b, 1), random_unit(b, 2), s);
    Matrix p;
    std::vector<double> log_norm;
    for (auto _ : state) {
        Softmax(s, 1.0, p, &log_norm);
        benchmark::DoNotOptimize(p.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(b * b));
}

template <auto Backprop>
void bm_backprop(benchmark::State& state) {
    const auto b = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_unit(b, 1);
    const Matrix c = random_unit(b, 2);
    Matrix g;
    kernels::serial::gram(a, c, g);
    Matrix ga, gc;
    for (auto _ : state) {
        Backprop(g, a, c, ga, gc);
        benchmark::DoNotOptimize(ga.data());
        benchmark::DoNotOptimize(gc.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(b * b));
}

}  // namespace

BENCHMARK(bm_gram<kernels::serial::gram>)->Name("gram/serial")->Arg(128)->Arg(512)->Arg(1000);
BENCHMARK(bm_gram<kernels::parallel::gram>)->Name("gram/parallel")->Arg(128)->Arg(512)->Arg(1000);
BENCHMARK(bm_softmax<kernels::serial::row_softmax>)->Name("softmax/serial")->Arg(128)->Arg(512)->Arg(1000);
BENCHMARK(bm_softmax<kernels::parallel::row_softmax>)->Name("softmax/parallel")->Arg(128)->Arg(512)->Arg(1000);
BENCHMARK(bm_backprop<kernels::serial::backprop_gram>)->Name("backprop_gram/serial")->Arg(128)->Arg(512)->Arg(1000);
BENCHMARK(bm_backprop<kernels::parallel::backprop_gram>)
    ->Name("backprop_gram/parallel")
    ->Arg(128)
    ->Arg(512)
    ->Arg(1000);

BENCHMARK_MAIN();
