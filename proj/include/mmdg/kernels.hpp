// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

// Dense embedding kernels. Matrices are row-major with `dim` columns.
// `serial` is the reference implementation the tests and benchmark compare
// against; `parallel` is the OpenMP version used by the library.
namespace mmdg::kernels {

namespace serial {

double dot(std::span<const double> a, std::span<const double> b);

/// out[r] = rows[r] . query
void dot_rows(std::span<const double> rows, std::size_t dim, std::span<const double> query,
              std::span<double> out);

/// max_r rows[r] . query; -inf for an empty matrix.
double max_dot(std::span<const double> rows, std::size_t dim, std::span<const double> query);

/// mean_r a[r] . b[r]; NaN for zero rows.
double mean_paired_dot(std::span<const double> a, std::span<const double> b, std::size_t dim);

/// out = relu(W x + bias), W is out.size() x x.size().
void affine_relu(std::span<const double> w, std::span<const double> bias, std::span<const double> x,
                 std::span<double> out);

}  // namespace serial

namespace parallel {

void dot_rows(std::span<const double> rows, std::size_t dim, std::span<const double> query,
              std::span<double> out);
double max_dot(std::span<const double> rows, std::size_t dim, std::span<const double> query);
double mean_paired_dot(std::span<const double> a, std::span<const double> b, std::size_t dim);
void affine_relu(std::span<const double> w, std::span<const double> bias, std::span<const double> x,
                 std::span<double> out);

}  // namespace parallel

/// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads();

}  // namespace mmdg::kernels
