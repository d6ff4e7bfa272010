#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "tinyvim/laplace.hpp"

namespace tinyvim {

struct StageSpec {
    int local_blocks = 0;
    int tinyvim_blocks = 0;
    int channels = 0;
    double alpha = 0.5;
    int pool_ratio = 1;
};

struct ModelSpec {
    std::array<StageSpec, 4> stages;
    int ffn_expansion = 4;
    int num_classes = 1000;
    int ssm_state = 16;

    static ModelSpec variant(char v, int num_classes = 1000);
    // Stage widths quartered for desk-scale training; everything else intact.
    static ModelSpec toy_variant(char v, int num_classes = 10);

    std::string to_json() const;
    static ModelSpec from_json(const std::string& text);

    void validate() const;
};

template <typename T>
struct ConvFfn {
    Conv2dLayer<T> fc1, fc2;
    BatchNorm2dLayer<T> bn1, bn2;

    void init(int channels, int expansion, Rng& rng);
    Tensor<T> forward(const Tensor<T>& x, bool training);
    void register_params(ParamRegistry<T>& r, const std::string& prefix) const;
};

// Rep3 then FFN; the rep unit's identity branch provides the conv-level
// skip, and the FFN gets an explicit residual.
template <typename T>
struct LocalBlock {
    RepDw3<T> rep;
    ConvFfn<T> ffn;

    void init(int channels, int expansion, Rng& rng);
    Tensor<T> forward(const Tensor<T>& x, bool training);
    void register_params(ParamRegistry<T>& r, const std::string& prefix) const;
};

// x' = LaplaceMixer(x) + x; out = FFN(x') + x'.
template <typename T>
struct TinyVimBlock {
    LaplaceMixer<T> mixer;
    ConvFfn<T> ffn;

    void init(const MixerConfig& cfg, MixerMode mode, int n_state, int expansion, Rng& rng);
    Tensor<T> forward(const Tensor<T>& x, bool training, MixerTaps<T>* taps = nullptr);
    void register_params(ParamRegistry<T>& r, const std::string& prefix) const;
};

// Stride-2 reparameterized depth-wise conv, then 1x1 to the new width.
template <typename T>
struct PatchEmbed {
    RepDw3<T> rep;
    Conv2dLayer<T> pw;
    BatchNorm2dLayer<T> bn;

    void init(int cin, int cout, Rng& rng);
    Tensor<T> forward(const Tensor<T>& x, bool training);
    void register_params(ParamRegistry<T>& r, const std::string& prefix) const;
};

template <typename T>
struct StemUnit {
    RepDw3<T> rep;
    Conv2dLayer<T> pw;
    BatchNorm2dLayer<T> bn;

    void init(int cin, int cout, Rng& rng);
    Tensor<T> forward(const Tensor<T>& x, bool training);
    void register_params(ParamRegistry<T>& r, const std::string& prefix) const;
};

template <typename T>
struct Model {
    ModelSpec spec;
    MixerMode mode = MixerMode::LowOnly;
    bool training = true;

    StemUnit<T> stem0, stem1;
    struct Block {
        std::unique_ptr<LocalBlock<T>> local;
        std::unique_ptr<TinyVimBlock<T>> tvm;
    };
    struct Stage {
        std::unique_ptr<PatchEmbed<T>> embed;  // absent for stage 1
        std::vector<Block> blocks;
    };
    std::array<Stage, 4> stages;
    LinearLayer<T> head;

    void init(const ModelSpec& spec_, MixerMode mode_, uint64_t seed);
    // Input (B, 3, H, W) with H, W divisible by 32; returns logits
    // (B, num_classes). stage_feats, when given, receives the four stage
    // outputs.
    Tensor<T> forward(const Tensor<T>& x, std::vector<Tensor<T>>* stage_feats = nullptr);
    void set_training(bool t) { training = t; }

    ParamRegistry<T> registry();
    int64_t ssm_tokens_last() const;  // per-sample tokens through SSM, last forward
};

// (S, B, L) -> model built from the variant table.
template <typename T>
Model<T> build_model(char variant, int num_classes = 1000,
                     MixerMode mode = MixerMode::LowOnly, uint64_t seed = 42);

template <typename T>
int64_t count_params(Model<T>& model);
// Multiply-accumulates of conv, linear and scan ops for one sample at H x W.
template <typename T>
int64_t count_macs(Model<T>& model, int H, int W);
// Collapse every rep unit into its single fused conv. Idempotent (warns).
template <typename T>
void fuse_reparam(Model<T>& model);

template <typename T>
void save_weights(Model<T>& model, const std::string& path);
template <typename T>
void load_weights(Model<T>& model, const std::string& path);

}  // namespace tinyvim
