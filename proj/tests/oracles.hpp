// Copyright (C) 2026 The mmdg Authors
// SPDX-License-Identifier: Apache-2.0

// Independent reference computations for the metric tests. Everything here is
// exact integer arithmetic so the library's floating point can be checked
// against a correctly rounded value.

#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mmdg/eval_metrics.hpp"

namespace mmdg::test {

struct Rational {
    __int128 num = 0;
    __int128 den = 1;

    Rational() = default;
    Rational(__int128 n, __int128 d) : num(n), den(d) {
        if (den == 0) throw std::domain_error("zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const auto g = gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    static __int128 gcd(__int128 a, __int128 b) {
        while (b != 0) {
            const auto t = a % b;
            a = b;
            b = t;
        }
        return a == 0 ? 1 : a;
    }

    friend Rational operator+(Rational a, Rational b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
    friend Rational operator-(Rational a, Rational b) { return {a.num * b.den - b.num * a.den, a.den * b.den}; }
    friend Rational operator*(Rational a, Rational b) { return {a.num * b.num, a.den * b.den}; }
    friend Rational operator/(Rational a, Rational b) { return {a.num * b.den, a.den * b.num}; }
    friend bool operator==(Rational a, Rational b) { return a.num == b.num && a.den == b.den; }

    double to_double() const { return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den)); }
};

struct RationalMetrics {
    Rational accuracy, precision, recall, f1;
};

// Textbook definitions; f1 as the harmonic mean of precision and recall.
inline RationalMetrics rational_metrics(const SelectionConfusion& c) {
    auto ratio = [](std::size_t n, std::size_t d) {
        return d == 0 ? Rational{} : Rational{static_cast<__int128>(n), static_cast<__int128>(d)};
    };
    RationalMetrics m;
    m.accuracy = ratio(c.tp + c.tn, c.total());
    m.precision = ratio(c.tp, c.tp + c.fp);
    m.recall = ratio(c.tp, c.tp + c.fn);
    const auto sum = m.precision + m.recall;
    m.f1 = sum.num == 0 ? Rational{} : Rational{2, 1} * m.precision * m.recall / sum;
    return m;
}

// True when `x` is the double nearest to the rational value.
inline bool exactly(double x, Rational r) {
    return x == static_cast<double>(r.num) / static_cast<double>(r.den);
}

// AC1 by enumerating every ordered pair of distinct raters per item.
inline Rational brute_force_ac1(const std::vector<std::vector<int>>& ratings) {
    Rational pa_sum;
    std::size_t items = 0;
    __int128 ones = 0, total = 0;
    for (const auto& item : ratings) {
        if (item.size() < 2) continue;
        __int128 agree = 0, pairs = 0;
        for (std::size_t i = 0; i < item.size(); ++i) {
            for (std::size_t j = 0; j < item.size(); ++j) {
                if (i == j) continue;
                ++pairs;
                if (item[i] == item[j]) ++agree;
            }
            ones += item[i];
            ++total;
        }
        pa_sum = pa_sum + Rational{agree, pairs};
        ++items;
    }
    if (items == 0) throw std::domain_error("no item with two ratings");
    const Rational pa = pa_sum / Rational{static_cast<__int128>(items), 1};
    const Rational pi{ones, total};
    const Rational pe = Rational{2, 1} * pi * (Rational{1, 1} - pi);
    return (pa - pe) / (Rational{1, 1} - pe);
}

// Cohen's kappa for two raters, used as a contrast: it reacts to skewed
// marginals where AC1 does not.
inline double cohen_kappa(const std::vector<std::vector<int>>& ratings) {
    double agree = 0, a1 = 0, b1 = 0;
    for (const auto& item : ratings) {
        agree += item[0] == item[1];
        a1 += item[0];
        b1 += item[1];
    }
    const double n = static_cast<double>(ratings.size());
    const double po = agree / n;
    const double pe = (a1 / n) * (b1 / n) + (1 - a1 / n) * (1 - b1 / n);
    return (po - pe) / (1 - pe);
}

}  // namespace mmdg::test
