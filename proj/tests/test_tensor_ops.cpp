#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tinyvim/ops.hpp"
#include "tinyvim/reference.hpp"

#include "oracles.hpp"

using namespace tinyvim;

TEST_CASE("conv2d 1x1 identity kernel leaves input unchanged") {
    Rng rng(1);
    Tensor<double> x = oracle::randn<double>({2, 3, 5, 4}, rng);
    Tensor<double> w = Tensor<double>::zeros({3, 3, 1, 1});
    for (int c = 0; c < 3; ++c) w.at(c, c, 0, 0) = 1.0;
    Tensor<double> y = conv2d(x, w, Tensor<double>{}, 1, 0, 1);
    CHECK(oracle::max_abs_diff(x, y) == 0.0);
}

TEST_CASE("conv2d all-ones kernel sums all entries") {
    Tensor<double> x = Tensor<double>::from({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor<double> w = Tensor<double>::full({1, 1, 2, 2}, 1.0);
    Tensor<double> y = conv2d(x, w, Tensor<double>{}, 1, 0, 1);
    CHECK(y.size() == 1);
    CHECK(y.data()[0] == doctest::Approx(10.0).epsilon(1e-15));
}

TEST_CASE("conv2d depth-wise matches the six-loop reference") {
    Rng rng(2);
    Tensor<double> x = oracle::randn<double>({1, 4, 8, 8}, rng);
    Tensor<double> w = oracle::randn<double>({4, 1, 3, 3}, rng);
    Tensor<double> b = oracle::randn<double>({4}, rng);
    Tensor<double> y = conv2d(x, w, b, 1, 1, 4);
    Tensor<double> yr = ref::conv2d(x, w, b, 1, 1, 4);
    CHECK(oracle::max_abs_diff(y, yr) <= 1e-12);
}

TEST_CASE("conv2d strided and grouped cases match the reference") {
    Rng rng(3);
    for (auto [groups, stride, pad] : {std::tuple{1, 2, 1}, {2, 1, 0}, {4, 2, 1}}) {
        Tensor<double> x = oracle::randn<double>({2, 4, 9, 7}, rng);
        Tensor<double> w = oracle::randn<double>({8, 4 / groups, 3, 3}, rng);
        Tensor<double> y = conv2d(x, w, Tensor<double>{}, stride, pad, groups);
        Tensor<double> yr = ref::conv2d(x, w, Tensor<double>{}, stride, pad, groups);
        CHECK(oracle::max_abs_diff(y, yr) <= 1e-12);
    }
}

TEST_CASE("conv2d is linear in its input") {
    Rng rng(4);
    Tensor<double> x = oracle::randn<double>({1, 3, 6, 6}, rng);
    Tensor<double> y = oracle::randn<double>({1, 3, 6, 6}, rng);
    Tensor<double> w = oracle::randn<double>({5, 3, 3, 3}, rng);
    const double a = 1.7, b = -0.3;
    Tensor<double> mix = add(scale(x, a), scale(y, b));
    Tensor<double> lhs = conv2d(mix, w, Tensor<double>{}, 1, 1, 1);
    Tensor<double> rhs = add(scale(conv2d(x, w, Tensor<double>{}, 1, 1, 1), a),
                             scale(conv2d(y, w, Tensor<double>{}, 1, 1, 1), b));
    CHECK(oracle::max_abs_diff(lhs, rhs) <= 1e-10);
}

TEST_CASE("conv2d rejects bad arguments") {
    Rng rng(5);
    Tensor<double> x = oracle::randn<double>({1, 4, 8, 8}, rng);
    Tensor<double> w = oracle::randn<double>({4, 1, 3, 3}, rng);
    CHECK_THROWS_AS(conv2d(x, w, Tensor<double>{}, 0, 1, 4), std::invalid_argument);
    CHECK_THROWS_AS(conv2d(x, w, Tensor<double>{}, 1, 1, 3), std::invalid_argument);
    Tensor<double> wbad = oracle::randn<double>({4, 2, 3, 3}, rng);
    CHECK_THROWS_AS(conv2d(x, wbad, Tensor<double>{}, 1, 1, 4), std::invalid_argument);
}

TEST_CASE("ops are pure and repeatable") {
    Rng rng(6);
    Tensor<float> x = oracle::randn<float>({2, 4, 8, 8}, rng);
    Tensor<float> w = oracle::randn<float>({8, 4, 3, 3}, rng);
    Tensor<float> x_copy = x.clone();
    Tensor<float> y1 = conv2d(x, w, Tensor<float>{}, 1, 1, 1);
    Tensor<float> y2 = conv2d(x, w, Tensor<float>{}, 1, 1, 1);
    CHECK(oracle::max_abs_diff(x, x_copy) == 0.0);
    for (int64_t i = 0; i < y1.size(); ++i) CHECK(y1.data()[i] == y2.data()[i]);
}

TEST_CASE("avg_pool2d of a constant stays constant") {
    Tensor<double> x = Tensor<double>::full({1, 2, 8, 8}, 3.25);
    Tensor<double> y = avg_pool2d(x, 4);
    for (int64_t i = 0; i < y.size(); ++i) CHECK(y.data()[i] == doctest::Approx(3.25));
}

TEST_CASE("avg_pool2d 2x2 mean") {
    Tensor<double> x = Tensor<double>::from({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor<double> y = avg_pool2d(x, 2);
    CHECK(y.data()[0] == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("avg_pool2d matches loop oracle and rejects non-divisible dims") {
    Rng rng(7);
    Tensor<double> x = oracle::randn<double>({1, 2, 8, 8}, rng);
    CHECK(oracle::max_abs_diff(avg_pool2d(x, 4), ref::avg_pool2d(x, 4)) <= 1e-12);
    Tensor<double> odd = oracle::randn<double>({1, 1, 6, 6}, rng);
    CHECK_THROWS_AS(avg_pool2d(odd, 4), std::invalid_argument);
}

TEST_CASE("upsample_nearest replicates and r=1 is identity") {
    Tensor<double> x = Tensor<double>::from({1, 1, 1, 1}, {5.0});
    Tensor<double> y = upsample_nearest(x, 2);
    for (int64_t i = 0; i < 4; ++i) CHECK(y.data()[i] == 5.0);
    Rng rng(8);
    Tensor<double> z = oracle::randn<double>({1, 3, 4, 4}, rng);
    CHECK(oracle::max_abs_diff(upsample_nearest(z, 1), z) == 0.0);
}

TEST_CASE("avg_pool2d(upsample_nearest(x, r), r) == x exactly") {
    Rng rng(9);
    for (int r : {1, 2, 3, 4}) {
        Tensor<double> x = oracle::randn<double>({2, 3, 5, 7}, rng);
        Tensor<double> rt = avg_pool2d(upsample_nearest(x, r), r);
        CHECK(oracle::max_abs_diff(rt, x) == 0.0);
    }
}

TEST_CASE("activation values: gelu(0), softplus(0), erf-series oracle") {
    Tensor<double> zero = Tensor<double>::scalar(0.0);
    CHECK(gelu(zero).data()[0] == 0.0);
    CHECK(softplus(zero).data()[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));

    Rng rng(10);
    Tensor<double> x = Tensor<double>::zeros({64});
    for (int64_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-3.0, 3.0);
    Tensor<double> y = gelu(x);
    for (int64_t i = 0; i < x.size(); ++i) {
        const long double v = x.data()[i];
        const long double expect =
            0.5L * v * (1.0L + oracle::erf_series(v * 0.70710678118654752440L));
        CHECK(std::abs(double(expect) - y.data()[i]) <= 1e-12);
    }
}

TEST_CASE("linear with identity weight and zero bias is identity") {
    Rng rng(11);
    Tensor<double> x = oracle::randn<double>({3, 4}, rng);
    Tensor<double> w = Tensor<double>::zeros({4, 4});
    for (int i = 0; i < 4; ++i) w.at(i, i) = 1.0;
    Tensor<double> y = linear(x, w, Tensor<double>::zeros({4}));
    CHECK(oracle::max_abs_diff(x, y) == 0.0);
}

TEST_CASE("layer_norm of a normalized channel vector is near-identity") {
    // zero mean, unit variance across the channel axis
    Tensor<double> x = Tensor<double>::from({1, 2, 1, 1}, {1.0, -1.0});
    Tensor<double> gain = Tensor<double>::full({2}, 1.0);
    Tensor<double> bias = Tensor<double>::zeros({2});
    Tensor<double> y = layer_norm(x, gain, bias, 1e-10);
    CHECK(y.data()[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(y.data()[1] == doctest::Approx(-1.0).epsilon(1e-8));
    CHECK_THROWS_AS(layer_norm(x, gain, bias, 0.0), std::invalid_argument);
}

TEST_CASE("batch_norm folded into the preceding conv matches the pipeline") {
    Rng rng(12);
    Tensor<float> x = oracle::randn<float>({2, 3, 8, 8}, rng);
    Tensor<float> w = oracle::randn<float>({5, 3, 3, 3}, rng);
    Tensor<float> gamma = oracle::randn<float>({5}, rng, 0.5);
    Tensor<float> beta = oracle::randn<float>({5}, rng, 0.5);
    Tensor<float> mean = oracle::randn<float>({5}, rng, 0.5);
    Tensor<float> var = Tensor<float>::zeros({5});
    for (int i = 0; i < 5; ++i) var.at(i) = static_cast<float>(0.5 + rng.uniform());
    const float eps = 1e-5f;

    Tensor<float> ref_out =
        batch_norm(conv2d(x, w, Tensor<float>{}, 1, 1, 1), gamma, beta, mean, var, false, eps);

    // fold: w' = w * gamma / sqrt(var + eps), b' = beta - mean * that scale
    Tensor<float> wf = w.clone();
    Tensor<float> bf = Tensor<float>::zeros({5});
    for (int co = 0; co < 5; ++co) {
        const float s = gamma.at(co) / std::sqrt(var.at(co) + eps);
        for (int ci = 0; ci < 3; ++ci)
            for (int kh = 0; kh < 3; ++kh)
                for (int kw = 0; kw < 3; ++kw) wf.at(co, ci, kh, kw) *= s;
        bf.at(co) = beta.at(co) - mean.at(co) * s;
    }
    Tensor<float> fold_out = conv2d(x, wf, bf, 1, 1, 1);
    CHECK(oracle::max_abs_diff(ref_out, fold_out) <= 1e-5);
}

TEST_CASE("finite checks surface NaNs instead of propagating them") {
    const bool prev = finite_checks_enabled();
    set_finite_checks(true);
    Tensor<double> x = Tensor<double>::from({2}, {1.0, std::nan("")});
    CHECK_THROWS_AS(scale(x, 2.0), std::runtime_error);
    set_finite_checks(prev);
}

TEST_CASE("channel concat/slice round trip and slice_last") {
    Rng rng(13);
    Tensor<double> x = oracle::randn<double>({2, 6, 3, 3}, rng);
    Tensor<double> a = slice_channels(x, 0, 2);
    Tensor<double> b = slice_channels(x, 2, 6);
    Tensor<double> back = concat_channels<double>({a, b});
    CHECK(oracle::max_abs_diff(back, x) == 0.0);

    Tensor<double> s = oracle::randn<double>({2, 4, 6}, rng);
    Tensor<double> part = slice_last(s, 2, 5);
    CHECK(part.dim(2) == 3);
    CHECK(part.at(1, 3, 0) == s.at(1, 3, 2));
}
