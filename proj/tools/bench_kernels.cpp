// Compares the OpenMP kernels against the serial reference implementations:
// same inputs, wall time for each, max absolute deviation as a sanity check.
#include <chrono>
#include <cstdio>
#include <functional>

#include "tinyvim/ops.hpp"
#include "tinyvim/reference.hpp"
#include "tinyvim/ssm.hpp"

using namespace tinyvim;

namespace {

Tensor<float> randn(std::vector<int> dims, Rng& rng) {
    Tensor<float> t = Tensor<float>::zeros(std::move(dims));
    for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<float>(rng.normal());
    return t;
}

double time_once(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double best_of(int reps, const std::function<void()>& fn) {
    double best = 1e30;
    for (int i = 0; i < reps; ++i) best = std::min(best, time_once(fn));
    return best;
}

float max_abs_diff(const Tensor<float>& a, const Tensor<float>& b) {
    float m = 0.0f;
    for (int64_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

void report(const char* name, double serial_s, double parallel_s, float diff) {
    std::printf("%-28s serial %9.4f ms   parallel %9.4f ms   speedup %5.2fx   max|diff| %g\n",
                name, serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s, double(diff));
}

}  // namespace

int main() {
    Rng rng(12345);
    std::printf("threads: %d\n", max_threads());

    {
        Tensor<float> x = randn({8, 48, 56, 56}, rng);
        Tensor<float> w = randn({48, 1, 3, 3}, rng);
        Tensor<float> b = randn({48}, rng);
        Tensor<float> ys, yp;
        const double ts = best_of(3, [&] { ys = ref::conv2d(x, w, b, 1, 1, 48); });
        const double tp = best_of(3, [&] { yp = conv2d(x, w, b, 1, 1, 48); });
        report("conv2d dw3x3 48ch 56x56", ts, tp, max_abs_diff(ys, yp));
    }
    {
        Tensor<float> x = randn({8, 96, 28, 28}, rng);
        Tensor<float> w = randn({384, 96, 1, 1}, rng);
        Tensor<float> ys, yp;
        const double ts = best_of(3, [&] { ys = ref::conv2d(x, w, Tensor<float>{}, 1, 0, 1); });
        const double tp = best_of(3, [&] { yp = conv2d(x, w, Tensor<float>{}, 1, 0, 1); });
        report("conv2d 1x1 96->384 28x28", ts, tp, max_abs_diff(ys, yp));
    }
    {
        Tensor<float> x = randn({8, 64, 32, 32}, rng);
        Tensor<float> ys, yp;
        const double ts = best_of(3, [&] { ys = ref::avg_pool2d(x, 8); });
        const double tp = best_of(3, [&] { yp = avg_pool2d(x, 8); });
        report("avg_pool2d r=8 64ch 32x32", ts, tp, max_abs_diff(ys, yp));
        Tensor<float> us, up;
        const double tus = best_of(3, [&] { us = ref::upsample_nearest(ys, 8); });
        const double tup = best_of(3, [&] { up = upsample_nearest(yp, 8); });
        report("upsample r=8 64ch 4x4", tus, tup, max_abs_diff(us, up));
    }
    {
        const int L = 4096, D = 64, N = 16;
        Tensor<float> x = randn({L, D}, rng);
        Tensor<float> a_log = randn({D, N}, rng);
        Tensor<float> a_bar = Tensor<float>::zeros({D, N});
        Tensor<float> b_bar = Tensor<float>::zeros({D, N});
        Tensor<float> c = randn({D, N}, rng);
        Tensor<float> d_skip = randn({D}, rng);
        for (int64_t i = 0; i < a_bar.size(); ++i) {
            auto [ab, bb] = zoh_discretize(-std::exp(a_log.data()[i]),
                                           static_cast<float>(rng.normal()), 0.05f);
            a_bar.data()[i] = ab;
            b_bar.data()[i] = bb;
        }
        Tensor<float> ys, yp;
        const double ts = best_of(3, [&] { ys = ref::ssm_scan(x, a_bar, b_bar, c, d_skip); });
        const double tp =
            best_of(3, [&] { yp = ssm_scan_sequential(x, a_bar, b_bar, c, d_skip); });
        report("ssm scan L=4096 D=64 N=16", ts, tp, max_abs_diff(ys, yp));
    }
    return 0;
}
