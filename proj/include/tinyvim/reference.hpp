#pragma once

#include "tinyvim/tensor.hpp"

// Serial reference kernels: straight nested loops, no OpenMP, no autograd.
// They stay independent of the parallel implementations in ops.cpp and are
// what the unit tests and the kernel benchmark compare against.
namespace tinyvim::ref {

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int pad,
                 int groups = 1);

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, int r);

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int r);

// Sequential state-space recurrence with static per-(channel,state) discrete
// parameters: h_t = a_bar h_{t-1} + b_bar x_t, y_t = sum_n c h_t (+ d x_t).
// x (L, D); a_bar/b_bar/c (D, N); d_skip (D) or undefined.
template <typename T>
Tensor<T> ssm_scan(const Tensor<T>& x, const Tensor<T>& a_bar, const Tensor<T>& b_bar,
                   const Tensor<T>& c, const Tensor<T>& d_skip);

}  // namespace tinyvim::ref
