#include "tinyvim/laplace.hpp"

#include <cmath>

namespace tinyvim {

MixerMode mixer_mode_from_string(const std::string& s) {
    if (s == "low-only") return MixerMode::LowOnly;
    if (s == "high-only") return MixerMode::HighOnly;
    if (s == "low+high" || s == "low-high") return MixerMode::LowHigh;
    if (s == "conv-only") return MixerMode::ConvOnly;
    if (s == "baseline") return MixerMode::Baseline;
    throw std::invalid_argument("unknown mixer mode: " + s);
}

std::string to_string(MixerMode m) {
    switch (m) {
        case MixerMode::LowOnly: return "low-only";
        case MixerMode::HighOnly: return "high-only";
        case MixerMode::LowHigh: return "low+high";
        case MixerMode::ConvOnly: return "conv-only";
        case MixerMode::Baseline: return "baseline";
    }
    return "?";
}

int MixerConfig::low_channels() const {
    const double exact = alpha * channels;
    const int rounded = static_cast<int>(std::lround(exact));
    if (std::abs(exact - rounded) > 1e-9)
        throw std::invalid_argument("MixerConfig: alpha * channels must be an integer");
    return rounded;
}

void MixerConfig::validate() const {
    if (channels < 1) throw std::invalid_argument("MixerConfig: channels must be positive");
    if (alpha <= 0.0 || alpha > 1.0)
        throw std::invalid_argument("MixerConfig: alpha must be in (0, 1]");
    if (pool_ratio < 1) throw std::invalid_argument("MixerConfig: pool_ratio must be positive");
    const int cl = low_channels();
    if (cl < 1) throw std::invalid_argument("MixerConfig: low branch needs at least one channel");
}

int effective_pool_ratio(int nominal, int H, int W) {
    int r = nominal;
    while (r > 1 && (H % r != 0 || W % r != 0)) r /= 2;
    return r < 1 ? 1 : r;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, double alpha) {
    if (x.ndim() != 4) throw std::invalid_argument("split_channels: rank-4 input required");
    MixerConfig probe{alpha, 1, x.dim(1)};
    const int cl = probe.low_channels();
    if (cl < 1 || cl > x.dim(1)) throw std::invalid_argument("split_channels: bad alpha");
    if (cl == x.dim(1)) return {x, Tensor<T>{}};
    return {slice_channels(x, 0, cl), slice_channels(x, cl, x.dim(1))};
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> laplace_decompose(const Tensor<T>& x_l, int r) {
    Tensor<T> x_ll = avg_pool2d(x_l, r);
    Tensor<T> x_lh = sub(x_l, upsample_nearest(x_ll, r));
    return {x_ll, x_lh};
}

template <typename T>
void LaplaceMixer<T>::init(const MixerConfig& cfg_, MixerMode mode_, int n_state, Rng& rng) {
    cfg = cfg_;
    cfg.validate();
    mode = mode_;
    const int d = cfg.channels;
    if (mode != MixerMode::Baseline) rep_high.init(d, 1, rng);
    // ConvOnly keeps the low-branch parameters so the routing contract --
    // no SSM parameter receives gradient -- is checkable.
    if (mode == MixerMode::LowOnly || mode == MixerMode::LowHigh || mode == MixerMode::ConvOnly) {
        ss2d_low = std::make_unique<Ss2dBlock<T>>();
        ss2d_low->init(cfg.low_channels(), n_state, rng);
    }
    if (mode == MixerMode::HighOnly || mode == MixerMode::LowHigh || mode == MixerMode::Baseline) {
        ss2d_high = std::make_unique<Ss2dBlock<T>>();
        ss2d_high->init(d, n_state, rng);
    }
    fuse_conv.init(d, d, 1, 1, 0, 1, /*bias=*/true, rng);
}

template <typename T>
Tensor<T> LaplaceMixer<T>::forward(const Tensor<T>& x, bool training, MixerTaps<T>* taps) {
    if (x.ndim() != 4 || x.dim(1) != cfg.channels)
        throw std::invalid_argument("LaplaceMixer: channel count mismatch");
    const int H = x.dim(2), W = x.dim(3);
    tokens_last = 0;

    if (mode == MixerMode::Baseline) {
        Tensor<T> y = ss2d_high->forward(x);
        tokens_last = ss2d_high->tokens_last;
        if (taps) {
            taps->low_upsampled = y.clone();
            taps->high_out = Tensor<T>{};
        }
        return fuse_conv.forward(y);
    }

    const int r = effective_pool_ratio(cfg.pool_ratio, H, W);
    const int cl = cfg.low_channels();
    auto [x_l, x_h] = split_channels(x, cfg.alpha);
    auto [x_ll, x_lh] = laplace_decompose(x_l, r);

    Tensor<T> x_hh = x_h.defined() ? concat_channels<T>({x_lh, x_h}) : x_lh;
    Tensor<T> high = rep_high.forward(x_hh, training);
    if (mode == MixerMode::HighOnly || mode == MixerMode::LowHigh) {
        high = ss2d_high->forward(high);
        tokens_last += ss2d_high->tokens_last;
    }

    Tensor<T> low = x_ll;
    if (mode == MixerMode::LowOnly || mode == MixerMode::LowHigh) {
        low = ss2d_low->forward(x_ll);
        tokens_last += ss2d_low->tokens_last;
    }
    Tensor<T> low_up = upsample_nearest(low, r);

    if (taps) {
        taps->low_upsampled = low_up.clone();
        taps->high_out = high.clone();
    }

    // the upsampled state branch lands on its corresponding channels [0, cl)
    Tensor<T> merged;
    if (cl == cfg.channels) {
        merged = add(high, low_up);
    } else {
        Tensor<T> head = add(slice_channels(high, 0, cl), low_up);
        merged = concat_channels<T>({head, slice_channels(high, cl, cfg.channels)});
    }
    return fuse_conv.forward(merged);
}

template <typename T>
void LaplaceMixer<T>::register_params(ParamRegistry<T>& r, const std::string& p) const {
    if (mode != MixerMode::Baseline) rep_high.register_params(r, p + ".rep");
    if (ss2d_low) ss2d_low->register_params(r, p + ".ss2d_low");
    if (ss2d_high) ss2d_high->register_params(r, p + ".ss2d_high");
    fuse_conv.register_params(r, p + ".fuse");
}

#define TINYVIM_INSTANTIATE_LAPLACE(T)                                                    \
    template std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>&, double);    \
    template std::pair<Tensor<T>, Tensor<T>> laplace_decompose(const Tensor<T>&, int);    \
    template struct LaplaceMixer<T>;

TINYVIM_INSTANTIATE_LAPLACE(float)
TINYVIM_INSTANTIATE_LAPLACE(double)

#undef TINYVIM_INSTANTIATE_LAPLACE

}  // namespace tinyvim
