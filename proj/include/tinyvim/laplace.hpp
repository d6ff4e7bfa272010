#pragma once

#include <memory>
#include <string>
#include <utility>

#include "tinyvim/repconv.hpp"
#include "tinyvim/ssm.hpp"

namespace tinyvim {

// Routing of the state-space branch inside the mixer. LowOnly is the
// shipped design: only the pooled low-frequency band passes state. The other
// modes exist for the frequency-input comparison at toy scale.
enum class MixerMode { LowOnly, HighOnly, LowHigh, ConvOnly, Baseline };

MixerMode mixer_mode_from_string(const std::string& s);
std::string to_string(MixerMode m);

struct MixerConfig {
    double alpha = 0.5;  // partition coefficient in (0, 1]
    int pool_ratio = 1;
    int channels = 0;

    int low_channels() const;  // alpha * channels, validated integral
    void validate() const;
};

// First alpha*D channels are the low branch; concatenating the two parts
// restores the input exactly. The high part is undefined when alpha == 1.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, double alpha);

// X_ll = Pool(X_l); X_lh = X_l - Upsample(X_ll).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> laplace_decompose(const Tensor<T>& x_l, int r);

// Largest power-of-two ratio <= nominal that divides both H and W. The
// 224-pixel path is untouched; smaller inputs clamp so pooled dims stay >= 1.
int effective_pool_ratio(int nominal, int H, int W);

// Branch outputs captured for spectral diagnostics.
template <typename T>
struct MixerTaps {
    Tensor<T> low_upsampled;  // state branch output restored to full resolution
    Tensor<T> high_out;       // conv branch output
};

template <typename T>
struct LaplaceMixer {
    MixerConfig cfg;
    MixerMode mode = MixerMode::LowOnly;
    RepDw3<T> rep_high;                      // depth-wise over all D channels
    std::unique_ptr<Ss2dBlock<T>> ss2d_low;  // over alpha*D channels, pooled grid
    std::unique_ptr<Ss2dBlock<T>> ss2d_high; // over D channels, full grid
    Conv2dLayer<T> fuse_conv;                // 1x1 over D channels
    int64_t tokens_last = 0;                 // per-sample tokens through SSM

    void init(const MixerConfig& cfg_, MixerMode mode_, int n_state, Rng& rng);
    Tensor<T> forward(const Tensor<T>& x, bool training, MixerTaps<T>* taps = nullptr);
    void register_params(ParamRegistry<T>& r, const std::string& prefix) const;
};

}  // namespace tinyvim
