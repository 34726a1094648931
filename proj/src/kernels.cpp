// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmdg/kernels.hpp"

#include <algorithm>
#include <cassert>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mmdg::kernels {

namespace {
// Below this many multiply-adds the fork/join costs more than it saves.
constexpr long long kParallelWork = 1 << 15;
}  // namespace

namespace serial {

double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void dot_rows(std::span<const double> rows, std::size_t dim, std::span<const double> query,
              std::span<double> out) {
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = dot(rows.subspan(r * dim, dim), query);
}

double max_dot(std::span<const double> rows, std::size_t dim, std::span<const double> query) {
    double best = -std::numeric_limits<double>::infinity();
    const std::size_t n = dim ? rows.size() / dim : 0;
    for (std::size_t r = 0; r < n; ++r) best = std::max(best, dot(rows.subspan(r * dim, dim), query));
    return best;
}

double mean_paired_dot(std::span<const double> a, std::span<const double> b, std::size_t dim) {
    const std::size_t n = dim ? a.size() / dim : 0;
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += dot(a.subspan(r * dim, dim), b.subspan(r * dim, dim));
    return s / static_cast<double>(n);
}

void affine_relu(std::span<const double> w, std::span<const double> bias, std::span<const double> x,
                 std::span<double> out) {
    const std::size_t d = x.size();
    for (std::size_t h = 0; h < out.size(); ++h) {
        out[h] = std::max(0.0, dot(w.subspan(h * d, d), x) + bias[h]);
    }
}

}  // namespace serial

namespace parallel {

void dot_rows(std::span<const double> rows, std::size_t dim, std::span<const double> query,
              std::span<double> out) {
    const long long n = static_cast<long long>(out.size());
    const double* m = rows.data();
    const double* q = query.data();
    double* o = out.data();
#pragma omp parallel for schedule(static) if (n * static_cast<long long>(dim) >= kParallelWork)
    for (long long r = 0; r < n; ++r) {
        const double* row = m + r * static_cast<long long>(dim);
        double s = 0.0;
        for (std::size_t i = 0; i < dim; ++i) s += row[i] * q[i];
        o[r] = s;
    }
}

double max_dot(std::span<const double> rows, std::size_t dim, std::span<const double> query) {
    const long long n = dim ? static_cast<long long>(rows.size() / dim) : 0;
    const double* m = rows.data();
    const double* q = query.data();
    double best = -std::numeric_limits<double>::infinity();
#pragma omp parallel for schedule(static) reduction(max : best) \
    if (n * static_cast<long long>(dim) >= kParallelWork)
    for (long long r = 0; r < n; ++r) {
        const double* row = m + r * static_cast<long long>(dim);
        double s = 0.0;
        for (std::size_t i = 0; i < dim; ++i) s += row[i] * q[i];
        best = std::max(best, s);
    }
    return best;
}

double mean_paired_dot(std::span<const double> a, std::span<const double> b, std::size_t dim) {
    const long long n = dim ? static_cast<long long>(a.size() / dim) : 0;
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    const double* pa = a.data();
    const double* pb = b.data();
    double total = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : total) \
    if (n * static_cast<long long>(dim) >= kParallelWork)
    for (long long r = 0; r < n; ++r) {
        const long long off = r * static_cast<long long>(dim);
        double s = 0.0;
        for (std::size_t i = 0; i < dim; ++i) s += pa[off + i] * pb[off + i];
        total += s;
    }
    return total / static_cast<double>(n);
}

void affine_relu(std::span<const double> w, std::span<const double> bias, std::span<const double> x,
                 std::span<double> out) {
    const long long h_count = static_cast<long long>(out.size());
    const std::size_t d = x.size();
    const double* pw = w.data();
    const double* px = x.data();
#pragma omp parallel for schedule(static) if (h_count * static_cast<long long>(d) >= kParallelWork)
    for (long long h = 0; h < h_count; ++h) {
        const double* row = pw + h * static_cast<long long>(d);
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += row[i] * px[i];
        out[static_cast<std::size_t>(h)] = std::max(0.0, s + bias[static_cast<std::size_t>(h)]);
    }
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace mmdg::kernels
