// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "mmdg/kernels.hpp"

namespace {

namespace k = mmdg::kernels;

std::vector<double> random_values(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

// Args: rows, dim.
template <void (*F)(std::span<const double>, std::size_t, std::span<const double>, std::span<double>)>
void BM_DotRows(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const auto dim = static_cast<std::size_t>(state.range(1));
    const auto m = random_values(rows * dim, 1);
    const auto q = random_values(dim, 2);
    std::vector<double> out(rows);
    for (auto _ : state) {
        F(m, dim, q, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows * dim));
}

template <double (*F)(std::span<const double>, std::span<const double>, std::size_t)>
void BM_MeanPairedDot(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const auto dim = static_cast<std::size_t>(state.range(1));
    const auto a = random_values(rows * dim, 3);
    const auto b = random_values(rows * dim, 4);
    for (auto _ : state) benchmark::DoNotOptimize(F(a, b, dim));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows * dim));
}

template <void (*F)(std::span<const double>, std::span<const double>, std::span<const double>, std::span<double>)>
void BM_AffineRelu(benchmark::State& state) {
    const auto out_dim = static_cast<std::size_t>(state.range(0));
    const auto in_dim = static_cast<std::size_t>(state.range(1));
    const auto w = random_values(out_dim * in_dim, 5);
    const auto bias = random_values(out_dim, 6);
    const auto x = random_values(in_dim, 7);
    std::vector<double> out(out_dim);
    for (auto _ : state) {
        F(w, bias, x, out);
        benchmark::DoNotOptimize(out.data());
    }
}

void shapes(benchmark::internal::Benchmark* b) {
    b->Args({32, 512})->Args({512, 512})->Args({8192, 512});
}

BENCHMARK(BM_DotRows<k::serial::dot_rows>)->Apply(shapes);
BENCHMARK(BM_DotRows<k::parallel::dot_rows>)->Apply(shapes);
BENCHMARK(BM_MeanPairedDot<k::serial::mean_paired_dot>)->Apply(shapes);
BENCHMARK(BM_MeanPairedDot<k::parallel::mean_paired_dot>)->Apply(shapes);
BENCHMARK(BM_AffineRelu<k::serial::affine_relu>)->Args({1024, 768});
BENCHMARK(BM_AffineRelu<k::parallel::affine_relu>)->Args({1024, 768});

}  // namespace

BENCHMARK_MAIN();
