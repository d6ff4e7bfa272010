#pragma once

#include "tinyvim/layers.hpp"

namespace tinyvim {

// Reparameterized 3x3 depth-wise unit. Training runs three parallel branches
// (3x3 DW + BN, 1x1 DW + BN, identity + BN; the identity branch exists only
// at stride 1). fuse() folds the batch norms and collapses the branches into
// a single 3x3 depth-wise conv with bias; the collapse uses the frozen
// running statistics, so freeze training before fusing.
template <typename T>
struct RepDw3 {
    int channels = 0;
    int stride = 1;
    bool fused = false;

    Conv2dLayer<T> conv3;
    BatchNorm2dLayer<T> bn3;
    Conv2dLayer<T> conv1;
    BatchNorm2dLayer<T> bn1;
    BatchNorm2dLayer<T> bn_id;
    Conv2dLayer<T> fused_conv;

    bool has_identity() const { return stride == 1; }

    void init(int channels_, int stride_, Rng& rng);
    Tensor<T> forward(const Tensor<T>& x, bool training);
    // Multi-branch output of the training graph regardless of fusion state;
    // the fusion-equivalence tests compare against this.
    Tensor<T> forward_branches(const Tensor<T>& x, bool training);
    void fuse();
    void register_params(ParamRegistry<T>& r, const std::string& prefix) const;
};

}  // namespace tinyvim
