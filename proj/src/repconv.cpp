#include "tinyvim/repconv.hpp"

#include <iostream>

namespace tinyvim {

template <typename T>
void RepDw3<T>::init(int channels_, int stride_, Rng& rng) {
    channels = channels_;
    stride = stride_;
    conv3.init(channels, channels, 3, stride, 1, channels, /*bias=*/false, rng);
    bn3.init(channels);
    conv1.init(channels, channels, 1, stride, 0, channels, /*bias=*/false, rng);
    bn1.init(channels);
    if (has_identity()) bn_id.init(channels);
}

template <typename T>
Tensor<T> RepDw3<T>::forward(const Tensor<T>& x, bool training) {
    if (fused) return fused_conv.forward(x);
    return forward_branches(x, training);
}

template <typename T>
Tensor<T> RepDw3<T>::forward_branches(const Tensor<T>& x, bool training) {
    Tensor<T> y = add(bn3.forward(conv3.forward(x), training),
                      bn1.forward(conv1.forward(x), training));
    if (has_identity()) y = add(y, bn_id.forward(x, training));
    return y;
}

namespace {

// BN(conv(x)) == conv'(x) with w' = w * gamma / sqrt(var + eps) and
// b' = beta - mean * gamma / sqrt(var + eps), per output channel.
template <typename T>
std::pair<T, T> bn_fold_factors(const BatchNorm2dLayer<T>& bn, int c) {
    const T s = bn.gamma.data()[c] /
                std::sqrt(bn.running_var.data()[c] + bn.eps);
    const T b = bn.beta.data()[c] - bn.running_mean.data()[c] * s;
    return {s, b};
}

}  // namespace

template <typename T>
void RepDw3<T>::fuse() {
    if (fused) {
        std::cerr << "RepDw3::fuse: already fused, no-op\n";
        return;
    }
    fused_conv.stride = stride;
    fused_conv.pad = 1;
    fused_conv.groups = channels;
    fused_conv.w = Tensor<T>::zeros({channels, 1, 3, 3});
    fused_conv.b = Tensor<T>::zeros({channels});
    for (int c = 0; c < channels; ++c) {
        auto [s3, b3] = bn_fold_factors(bn3, c);
        for (int kh = 0; kh < 3; ++kh)
            for (int kw = 0; kw < 3; ++kw)
                fused_conv.w.at(c, 0, kh, kw) = conv3.w.at(c, 0, kh, kw) * s3;
        auto [s1, b1] = bn_fold_factors(bn1, c);
        fused_conv.w.at(c, 0, 1, 1) += conv1.w.at(c, 0, 0, 0) * s1;
        T bias = b3 + b1;
        if (has_identity()) {
            auto [si, bi] = bn_fold_factors(bn_id, c);
            fused_conv.w.at(c, 0, 1, 1) += si;
            bias += bi;
        }
        fused_conv.b.at(c) = bias;
    }
    fused_conv.w.set_requires_grad(true);
    fused_conv.b.set_requires_grad(true);
    fused = true;
}

template <typename T>
void RepDw3<T>::register_params(ParamRegistry<T>& r, const std::string& p) const {
    if (fused) {
        fused_conv.register_params(r, p + ".fused");
        return;
    }
    conv3.register_params(r, p + ".conv3");
    bn3.register_params(r, p + ".bn3");
    conv1.register_params(r, p + ".conv1");
    bn1.register_params(r, p + ".bn1");
    if (has_identity()) bn_id.register_params(r, p + ".bn_id");
}

template struct RepDw3<float>;
template struct RepDw3<double>;

}  // namespace tinyvim
