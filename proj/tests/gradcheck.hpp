#pragma once

// Central finite-difference gradient probe. For each probed scalar the
// analytic gradient from one taped backward pass is compared against
// (f(x+h) - f(x-h)) / 2h computed with fresh forward passes.

#include <functional>
#include <vector>

#include "tinyvim/tensor.hpp"

namespace gradcheck {

struct Result {
    double max_rel_err = 0.0;
    int probes = 0;
};

// make_loss must rebuild the graph from the current tensor values and return
// a scalar; inputs lists the leaves to probe.
inline Result run(std::vector<tinyvim::Tensor<double>*> inputs,
                  const std::function<tinyvim::Tensor<double>()>& make_loss,
                  int probes_per_input, uint64_t seed, double h = 1e-5) {
    using tinyvim::GradTape;
    using tinyvim::TapeScope;
    using tinyvim::Tensor;

    for (auto* t : inputs) {
        t->set_requires_grad(true);
        t->zero_grad();
    }
    {
        GradTape<double> tape;
        TapeScope<double> scope(tape);
        Tensor<double> loss = make_loss();
        tape.backward(loss);
    }
    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (auto* t : inputs) {
        const double* g = t->grad_if_allocated();
        analytic.emplace_back(t->size(), 0.0);
        if (g) std::copy(g, g + t->size(), analytic.back().begin());
        t->zero_grad();
    }

    tinyvim::Rng rng(seed);
    Result res;
    for (size_t ti = 0; ti < inputs.size(); ++ti) {
        Tensor<double>* t = inputs[ti];
        for (int p = 0; p < probes_per_input; ++p) {
            const int64_t j =
                static_cast<int64_t>(rng.below(static_cast<uint64_t>(t->size())));
            const double orig = t->data()[j];
            t->data()[j] = orig + h;
            const double fp = make_loss().data()[0];
            t->data()[j] = orig - h;
            const double fm = make_loss().data()[0];
            t->data()[j] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double rel =
                std::abs(analytic[ti][static_cast<size_t>(j)] - numeric) /
                (std::abs(analytic[ti][static_cast<size_t>(j)]) + 1e-8);
            res.max_rel_err = std::max(res.max_rel_err, rel);
            ++res.probes;
        }
    }
    return res;
}

}  // namespace gradcheck
