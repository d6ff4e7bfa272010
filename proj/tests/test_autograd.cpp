#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tinyvim/ops.hpp"
#include "tinyvim/ssm.hpp"

#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace tinyvim;

namespace {

// pair the output with a fixed random cotangent so dL/dy is generic
Tensor<double> dot_with_random(const Tensor<double>& y, uint64_t seed) {
    Rng rng(seed);
    Tensor<double> r = oracle::randn<double>(y.dims(), rng);
    return sum_all(mul(y, r));
}

}  // namespace

TEST_CASE("backward: loss = sum(x) gives all-ones gradient") {
    Rng rng(1);
    Tensor<double> x = oracle::randn<double>({3, 4}, rng);
    x.set_requires_grad(true);
    GradTape<double> tape;
    {
        TapeScope<double> scope(tape);
        Tensor<double> loss = sum_all(x);
        tape.backward(loss);
    }
    const double* g = x.grad_if_allocated();
    REQUIRE(g != nullptr);
    for (int64_t i = 0; i < x.size(); ++i) CHECK(g[i] == 1.0);
}

TEST_CASE("backward: loss = sum(x*x)/2 gives gradient x") {
    Rng rng(2);
    Tensor<double> x = oracle::randn<double>({17}, rng);
    x.set_requires_grad(true);
    GradTape<double> tape;
    {
        TapeScope<double> scope(tape);
        Tensor<double> loss = scale(sum_all(mul(x, x)), 0.5);
        tape.backward(loss);
    }
    const double* g = x.grad_if_allocated();
    REQUIRE(g != nullptr);
    for (int64_t i = 0; i < x.size(); ++i)
        CHECK(g[i] == doctest::Approx(x.data()[i]).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar loss; disconnected leaves keep zero grads") {
    Rng rng(3);
    Tensor<double> x = oracle::randn<double>({4}, rng);
    x.set_requires_grad(true);
    Tensor<double> unused = oracle::randn<double>({4}, rng);
    unused.set_requires_grad(true);
    GradTape<double> tape;
    TapeScope<double> scope(tape);
    Tensor<double> y = mul(x, x);
    CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
    Tensor<double> loss = sum_all(y);
    tape.backward(loss);
    CHECK(unused.grad_if_allocated() == nullptr);  // never touched, stays zero
}

TEST_CASE("gradcheck: elementwise ops") {
    Rng rng(4);
    Tensor<double> x = oracle::randn<double>({2, 9}, rng);
    Tensor<double> y = oracle::randn<double>({2, 9}, rng);
    auto res = gradcheck::run(
        {&x, &y},
        [&] {
            Tensor<double> t = add(mul(gelu(x), silu(y)), softplus(sub(x, y)));
            return dot_with_random(scale(t, 1.3), 99);
        },
        10, 1000);
    CHECK(res.max_rel_err <= 1e-6);
}

TEST_CASE("gradcheck: conv2d (x, w, b) incl. stride, pad, groups") {
    Rng rng(5);
    Tensor<double> x = oracle::randn<double>({2, 4, 6, 5}, rng);
    Tensor<double> w = oracle::randn<double>({6, 2, 3, 3}, rng);
    Tensor<double> b = oracle::randn<double>({6}, rng);
    auto res = gradcheck::run(
        {&x, &w, &b},
        [&] { return dot_with_random(conv2d(x, w, b, 2, 1, 2), 101); }, 10, 1001);
    CHECK(res.max_rel_err <= 1e-6);
}

TEST_CASE("gradcheck: avg_pool2d and upsample_nearest") {
    Rng rng(6);
    Tensor<double> x = oracle::randn<double>({2, 3, 8, 8}, rng);
    auto res = gradcheck::run(
        {&x}, [&] { return dot_with_random(avg_pool2d(x, 2), 102); }, 10, 1002);
    CHECK(res.max_rel_err <= 1e-6);
    auto res2 = gradcheck::run(
        {&x}, [&] { return dot_with_random(upsample_nearest(x, 3), 103); }, 10, 1003);
    CHECK(res2.max_rel_err <= 1e-6);
}

TEST_CASE("gradcheck: linear") {
    Rng rng(7);
    Tensor<double> x = oracle::randn<double>({3, 4, 5}, rng);
    Tensor<double> w = oracle::randn<double>({6, 5}, rng);
    Tensor<double> b = oracle::randn<double>({6}, rng);
    auto res = gradcheck::run(
        {&x, &w, &b}, [&] { return dot_with_random(linear(x, w, b), 104); }, 10, 1004);
    CHECK(res.max_rel_err <= 1e-6);
}

TEST_CASE("gradcheck: layer_norm over channels and over last axis") {
    Rng rng(8);
    Tensor<double> x4 = oracle::randn<double>({2, 5, 3, 3}, rng);
    Tensor<double> g4 = oracle::randn<double>({5}, rng);
    Tensor<double> b4 = oracle::randn<double>({5}, rng);
    auto res = gradcheck::run(
        {&x4, &g4, &b4}, [&] { return dot_with_random(layer_norm(x4, g4, b4, 1e-5), 105); },
        10, 1005);
    CHECK(res.max_rel_err <= 1e-6);

    Tensor<double> x3 = oracle::randn<double>({2, 4, 6}, rng);
    Tensor<double> g3 = oracle::randn<double>({6}, rng);
    Tensor<double> b3 = oracle::randn<double>({6}, rng);
    auto res3 = gradcheck::run(
        {&x3, &g3, &b3}, [&] { return dot_with_random(layer_norm(x3, g3, b3, 1e-5), 106); },
        10, 1006);
    CHECK(res3.max_rel_err <= 1e-6);
}

TEST_CASE("gradcheck: batch_norm in both statistics modes") {
    Rng rng(9);
    Tensor<double> x = oracle::randn<double>({4, 3, 5, 5}, rng);
    Tensor<double> gamma = oracle::randn<double>({3}, rng);
    Tensor<double> beta = oracle::randn<double>({3}, rng);
    Tensor<double> rm = oracle::randn<double>({3}, rng, 0.3);
    Tensor<double> rv = Tensor<double>::zeros({3});
    for (int i = 0; i < 3; ++i) rv.at(i) = 0.4 + rng.uniform();

    auto res_train = gradcheck::run(
        {&x, &gamma, &beta},
        [&] { return dot_with_random(batch_norm(x, gamma, beta, rm, rv, true, 1e-5), 107); },
        10, 1007);
    CHECK(res_train.max_rel_err <= 1e-6);

    auto res_eval = gradcheck::run(
        {&x, &gamma, &beta},
        [&] { return dot_with_random(batch_norm(x, gamma, beta, rm, rv, false, 1e-5), 108); },
        10, 1008);
    CHECK(res_eval.max_rel_err <= 1e-6);
}

TEST_CASE("gradcheck: global_avg_pool, softmax_cross_entropy, shape ops") {
    Rng rng(10);
    Tensor<double> x = oracle::randn<double>({3, 4, 2, 2}, rng);
    auto res = gradcheck::run(
        {&x}, [&] { return dot_with_random(global_avg_pool(x), 109); }, 10, 1009);
    CHECK(res.max_rel_err <= 1e-6);

    Tensor<double> logits = oracle::randn<double>({5, 7}, rng);
    std::vector<int> labels = {0, 3, 6, 2, 2};
    auto res_ce = gradcheck::run(
        {&logits}, [&] { return softmax_cross_entropy(logits, labels); }, 10, 1010);
    CHECK(res_ce.max_rel_err <= 1e-6);

    Tensor<double> s = oracle::randn<double>({2, 6, 4, 4}, rng);
    auto res_cat = gradcheck::run(
        {&s},
        [&] {
            Tensor<double> a = slice_channels(s, 0, 2);
            Tensor<double> b = slice_channels(s, 2, 6);
            return dot_with_random(concat_channels<double>({b, a}), 110);
        },
        10, 1011);
    CHECK(res_cat.max_rel_err <= 1e-6);
}

TEST_CASE("gradcheck: selective_scan end to end") {
    Rng rng(11);
    const int B = 2, L = 6, D = 3, N = 2;
    Tensor<double> u = oracle::randn<double>({B, L, D}, rng);
    Tensor<double> dt_raw = oracle::randn<double>({B, L, D}, rng);
    Tensor<double> a_log = oracle::randn<double>({D, N}, rng, 0.4);
    Tensor<double> b_seq = oracle::randn<double>({B, L, N}, rng);
    Tensor<double> c_seq = oracle::randn<double>({B, L, N}, rng);
    Tensor<double> d_skip = oracle::randn<double>({D}, rng);
    auto res = gradcheck::run(
        {&u, &dt_raw, &a_log, &b_seq, &c_seq, &d_skip},
        [&] {
            return dot_with_random(selective_scan(u, dt_raw, a_log, b_seq, c_seq, d_skip), 111);
        },
        10, 1012);
    CHECK(res.max_rel_err <= 1e-6);
}

TEST_CASE("gradcheck: s6_forward through the projections") {
    Rng rng(12);
    const int B = 1, L = 8, D = 3;
    SsmParams<double> p;
    p.init(D, 2, rng);
    Tensor<double> x = oracle::randn<double>({B, L, D}, rng);
    auto res = gradcheck::run(
        {&x, &p.a_log, &p.x_proj_w, &p.dt_proj_w, &p.dt_proj_b, &p.d_skip},
        [&] { return dot_with_random(s6_forward(x, p), 112); }, 10, 1013);
    CHECK(res.max_rel_err <= 1e-6);
}

TEST_CASE("gradcheck: cross scan and merge permutations") {
    Rng rng(13);
    Tensor<double> x = oracle::randn<double>({2, 3, 3, 4}, rng);
    auto res = gradcheck::run(
        {&x},
        [&] {
            auto seqs = cross_scan(x);
            return dot_with_random(cross_merge(seqs, 3, 4), 113);
        },
        10, 1014);
    CHECK(res.max_rel_err <= 1e-6);
}
