#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tinyvim/common.hpp"
#include "tinyvim/ops.hpp"
#include "tinyvim/tensor.hpp"

namespace tinyvim {

// Name-keyed views onto a model's tensors. Learnable parameters are what the
// optimizer and count_params see; buffers (batch-norm running stats) are
// persisted but never trained.
template <typename T>
struct ParamRegistry {
    std::vector<std::pair<std::string, Tensor<T>*>> params;
    std::vector<std::pair<std::string, Tensor<T>*>> buffers;

    void add_param(const std::string& name, Tensor<T>* t) { params.emplace_back(name, t); }
    void add_buffer(const std::string& name, Tensor<T>* t) { buffers.emplace_back(name, t); }

    int64_t param_count() const {
        int64_t n = 0;
        for (const auto& [name, t] : params) n += t->size();
        return n;
    }
};

template <typename T>
void fill_kaiming_uniform(Tensor<T>& t, int fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
struct Conv2dLayer {
    Tensor<T> w, b;
    int stride = 1, pad = 0, groups = 1;

    void init(int cin, int cout, int k, int stride_, int pad_, int groups_, bool bias, Rng& rng) {
        stride = stride_;
        pad = pad_;
        groups = groups_;
        w = Tensor<T>::zeros({cout, cin / groups_, k, k});
        fill_kaiming_uniform(w, (cin / groups_) * k * k, rng);
        w.set_requires_grad(true);
        if (bias) {
            b = Tensor<T>::zeros({cout});
            b.set_requires_grad(true);
        }
    }

    Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, w, b, stride, pad, groups); }

    void register_params(ParamRegistry<T>& r, const std::string& p) const {
        r.add_param(p + ".w", const_cast<Tensor<T>*>(&w));
        if (b.defined()) r.add_param(p + ".b", const_cast<Tensor<T>*>(&b));
    }
};

template <typename T>
struct BatchNorm2dLayer {
    Tensor<T> gamma, beta, running_mean, running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);

    void init(int channels) {
        gamma = Tensor<T>::full({channels}, T(1));
        beta = Tensor<T>::zeros({channels});
        gamma.set_requires_grad(true);
        beta.set_requires_grad(true);
        running_mean = Tensor<T>::zeros({channels});
        running_var = Tensor<T>::full({channels}, T(1));
    }

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        if (!training) return batch_norm(x, gamma, beta, running_mean, running_var, false, eps);
        Tensor<T> bm, bv;
        Tensor<T> y = batch_norm(x, gamma, beta, running_mean, running_var, true, eps, &bm, &bv);
        // running-stat update is module state, not part of the pure op
        T* rm = running_mean.data();
        T* rv = running_var.data();
        for (int64_t i = 0; i < running_mean.size(); ++i) {
            rm[i] = (T(1) - momentum) * rm[i] + momentum * bm.data()[i];
            rv[i] = (T(1) - momentum) * rv[i] + momentum * bv.data()[i];
        }
        return y;
    }

    void register_params(ParamRegistry<T>& r, const std::string& p) const {
        r.add_param(p + ".gamma", const_cast<Tensor<T>*>(&gamma));
        r.add_param(p + ".beta", const_cast<Tensor<T>*>(&beta));
        r.add_buffer(p + ".running_mean", const_cast<Tensor<T>*>(&running_mean));
        r.add_buffer(p + ".running_var", const_cast<Tensor<T>*>(&running_var));
    }
};

template <typename T>
struct LayerNormLayer {
    Tensor<T> gain, bias;
    T eps = T(1e-5);

    void init(int channels) {
        gain = Tensor<T>::full({channels}, T(1));
        bias = Tensor<T>::zeros({channels});
        gain.set_requires_grad(true);
        bias.set_requires_grad(true);
    }

    Tensor<T> forward(const Tensor<T>& x) const { return layer_norm(x, gain, bias, eps); }

    void register_params(ParamRegistry<T>& r, const std::string& p) const {
        r.add_param(p + ".gain", const_cast<Tensor<T>*>(&gain));
        r.add_param(p + ".bias", const_cast<Tensor<T>*>(&bias));
    }
};

template <typename T>
struct LinearLayer {
    Tensor<T> w, b;

    void init(int in, int out, bool bias, Rng& rng) {
        w = Tensor<T>::zeros({out, in});
        fill_kaiming_uniform(w, in, rng);
        w.set_requires_grad(true);
        if (bias) {
            b = Tensor<T>::zeros({out});
            b.set_requires_grad(true);
        }
    }

    Tensor<T> forward(const Tensor<T>& x) const { return linear(x, w, b); }

    void register_params(ParamRegistry<T>& r, const std::string& p) const {
        r.add_param(p + ".w", const_cast<Tensor<T>*>(&w));
        if (b.defined()) r.add_param(p + ".b", const_cast<Tensor<T>*>(&b));
    }
};

}  // namespace tinyvim
