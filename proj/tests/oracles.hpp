#pragma once

// Test-only oracles, independent of the library implementation paths they
// check: high-precision series for exp/erf, a direct DFT, and a plain
// finite-difference gradient probe.

#include <complex>
#include <cstdint>
#include <vector>

#include "tinyvim/common.hpp"
#include "tinyvim/tensor.hpp"

namespace oracle {

// exp via argument halving + 24-term Taylor in long double
inline long double exp_series(long double z) {
    int halvings = 0;
    while (std::abs(z) > 0.5L) {
        z *= 0.5L;
        ++halvings;
    }
    long double term = 1.0L, sum = 1.0L;
    for (int k = 1; k <= 24; ++k) {
        term *= z / k;
        sum += term;
    }
    for (int i = 0; i < halvings; ++i) sum *= sum;
    return sum;
}

// (exp(z) - 1) / z with a series near zero, long double throughout
inline long double phi1_series(long double z) {
    if (std::abs(z) < 0.25L) {
        long double term = 1.0L, sum = 1.0L;  // sum_{k>=0} z^k / (k+1)!
        for (int k = 1; k <= 24; ++k) {
            term *= z / (k + 1);
            sum += term;
        }
        return sum;
    }
    return (exp_series(z) - 1.0L) / z;
}

// erf via its Maclaurin series; adequate for |z| <= 4
inline long double erf_series(long double z) {
    const long double two_over_sqrt_pi = 1.128379167095512573896158903121545172L;
    long double term = z, sum = z;
    for (int n = 1; n <= 60; ++n) {
        term *= -z * z / n;
        sum += term / (2 * n + 1);
    }
    return two_over_sqrt_pi * sum;
}

// direct O(N^2) per-axis DFT of a real grid
inline std::vector<std::complex<double>> dft2d_direct(const double* x, int H, int W) {
    std::vector<std::complex<double>> out(static_cast<size_t>(H) * W);
    for (int u = 0; u < H; ++u)
        for (int v = 0; v < W; ++v) {
            std::complex<double> acc(0.0, 0.0);
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const double ang =
                        -2.0 * M_PI * (double(u) * h / H + double(v) * w / W);
                    acc += x[static_cast<size_t>(h) * W + w] *
                           std::complex<double>(std::cos(ang), std::sin(ang));
                }
            out[static_cast<size_t>(u) * W + v] = acc;
        }
    return out;
}

template <typename T>
tinyvim::Tensor<T> randn(std::vector<int> dims, tinyvim::Rng& rng, double scale = 1.0) {
    auto t = tinyvim::Tensor<T>::zeros(std::move(dims));
    for (int64_t i = 0; i < t.size(); ++i)
        t.data()[i] = static_cast<T>(scale * rng.normal());
    return t;
}

template <typename T>
double max_abs_diff(const tinyvim::Tensor<T>& a, const tinyvim::Tensor<T>& b) {
    double m = 0.0;
    for (int64_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(double(a.data()[i]) - double(b.data()[i])));
    return m;
}

template <typename T>
double max_rel_diff(const tinyvim::Tensor<T>& a, const tinyvim::Tensor<T>& b) {
    double m = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) {
        const double av = double(a.data()[i]), bv = double(b.data()[i]);
        m = std::max(m, std::abs(av - bv) / (std::abs(av) + 1e-8));
    }
    return m;
}

}  // namespace oracle
