#pragma once

#include <vector>

#include "tinyvim/tensor.hpp"

// Neural-network op set. Every op is pure: inputs are never modified and a
// repeated call with the same inputs is bit-identical (parallel loops
// partition output elements; no cross-thread reductions). When a GradTape is
// active and an input requires grad, the op appends its backward rule.
namespace tinyvim {

// elementwise
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T> Tensor<T> gelu(const Tensor<T>& x);      // exact erf form
template <typename T> Tensor<T> silu(const Tensor<T>& x);
template <typename T> Tensor<T> softplus(const Tensor<T>& x);

// reductions / shape
template <typename T> Tensor<T> sum_all(const Tensor<T>& x);   // -> [1]
template <typename T> Tensor<T> reshape(const Tensor<T>& x, std::vector<int> dims);
template <typename T> Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs);
template <typename T> Tensor<T> slice_channels(const Tensor<T>& x, int c_begin, int c_end);
// last-axis slice of a rank-3 tensor (B, L, K) -> (B, L, k1-k0)
template <typename T> Tensor<T> slice_last(const Tensor<T>& x, int k0, int k1);

// nn
// x (B, Cin, H, W); w (Cout, Cin/groups, K, K); b (Cout) or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int pad,
                 int groups = 1);
template <typename T> Tensor<T> avg_pool2d(const Tensor<T>& x, int r);
template <typename T> Tensor<T> upsample_nearest(const Tensor<T>& x, int r);
// x (..., In); w (Out, In); b (Out) or undefined.
template <typename T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);
// Normalizes over the channel axis: axis 1 for rank-4 NCHW input (per
// spatial position), the last axis otherwise. gain/bias have that extent.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps);
// Normalization with the statistics supplied by the caller: batch statistics
// (training, use_batch_stats=true, also written to mean_out/var_out) or
// frozen running statistics (eval).
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     const Tensor<T>& running_mean, const Tensor<T>& running_var,
                     bool use_batch_stats, T eps, Tensor<T>* mean_out = nullptr,
                     Tensor<T>* var_out = nullptr);
template <typename T> Tensor<T> global_avg_pool(const Tensor<T>& x);  // (B,C,H,W) -> (B,C)
// logits (B, K); mean cross-entropy against integer labels.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels);

}  // namespace tinyvim
