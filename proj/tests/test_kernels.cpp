// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mmdg/kernels.hpp"

using namespace mmdg::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> dist;
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

}  // namespace

TEST_CASE("parallel row kernels equal the serial reference exactly") {
    std::mt19937_64 rng(11);
    // Small shapes run inline, the large ones cross the fork threshold.
    for (auto [rows, dim] : {std::pair<std::size_t, std::size_t>{1, 3}, {7, 16}, {300, 512}, {2048, 64}}) {
        const auto m = random_vec(rows * dim, rng);
        const auto q = random_vec(dim, rng);
        std::vector<double> a(rows), b(rows);
        serial::dot_rows(m, dim, q, a);
        parallel::dot_rows(m, dim, q, b);
        CHECK(a == b);
        CHECK(serial::max_dot(m, dim, q) == parallel::max_dot(m, dim, q));

        const auto bias = random_vec(rows, rng);
        std::vector<double> h1(rows), h2(rows);
        serial::affine_relu(m, bias, q, h1);
        parallel::affine_relu(m, bias, q, h2);
        CHECK(h1 == h2);
        for (double x : h1) CHECK(x >= 0.0);
    }
}

TEST_CASE("parallel mean_paired_dot matches serial to rounding") {
    std::mt19937_64 rng(12);
    for (auto [rows, dim] : {std::pair<std::size_t, std::size_t>{1, 4}, {50, 8}, {4000, 32}}) {
        const auto a = random_vec(rows * dim, rng);
        const auto b = random_vec(rows * dim, rng);
        const double s = serial::mean_paired_dot(a, b, dim);
        const double p = parallel::mean_paired_dot(a, b, dim);
        CHECK(std::abs(s - p) <= 1e-12 * (1.0 + std::abs(s)));
    }
}

TEST_CASE("empty inputs") {
    const std::vector<double> none;
    CHECK(std::isinf(serial::max_dot(none, 4, std::vector<double>(4))));
    CHECK(std::isinf(parallel::max_dot(none, 4, std::vector<double>(4))));
    CHECK(std::isnan(serial::mean_paired_dot(none, none, 4)));
    CHECK(std::isnan(parallel::mean_paired_dot(none, none, 4)));
    CHECK(max_threads() >= 1);
}
