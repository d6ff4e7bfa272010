#pragma once

#include <array>

#include "tinyvim/layers.hpp"
#include "tinyvim/ops.hpp"
#include "tinyvim/tensor.hpp"

namespace tinyvim {

// (e^z - 1) / z, with its analytic limit 1 at z = 0. The zero-order-hold
// update divides by A, so the small-|z| branch switches to a 4-term Taylor
// expansion below |z| = 1e-4.
template <typename T>
inline T phi1(T z) {
    if (std::abs(z) < T(1e-4))
        return T(1) + z * (T(0.5) + z * (T(1) / T(6) + z * (T(1) / T(24))));
    return std::expm1(z) / z;
}

// d phi1 / dz; limit 1/2 at z = 0.
template <typename T>
inline T phi1_prime(T z) {
    if (std::abs(z) < T(1e-4))
        return T(0.5) + z * (T(1) / T(3) + z * (T(0.125) + z * (T(1) / T(30))));
    return (std::exp(z) * (z - T(1)) + T(1)) / (z * z);
}

// Zero-order-hold discretization of one diagonal entry:
// a_bar = exp(delta a), b_bar = ((exp(delta a) - 1) / a) b.
template <typename T>
std::pair<T, T> zoh_discretize(T a, T b, T delta) {
    if (delta <= T(0)) throw std::invalid_argument("zoh_discretize: delta must be positive");
    const T z = delta * a;
    return {std::exp(z), delta * phi1(z) * b};
}

// Elementwise tensor form; all three inputs share one shape.
template <typename T>
void zoh_discretize(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& delta,
                    Tensor<T>& a_bar, Tensor<T>& b_bar);

enum class ScanDirection { RowFwd = 0, RowRev = 1, ColFwd = 2, ColRev = 3 };

// Flat grid offset (h*W + w) visited at sequence position i by a direction.
inline int64_t scan_grid_offset(ScanDirection d, int64_t i, int H, int W) {
    const int64_t L = int64_t(H) * W;
    switch (d) {
        case ScanDirection::RowFwd: return i;
        case ScanDirection::RowRev: return L - 1 - i;
        case ScanDirection::ColFwd: return (i % H) * W + (i / H);
        case ScanDirection::ColRev: {
            const int64_t j = L - 1 - i;
            return (j % H) * W + (j / H);
        }
    }
    return 0;
}

// Sequential recurrence h_t = a_bar h_{t-1} + b_bar x_t, y_t = sum_n c h_t
// (+ d_skip x_t). x is (L, D). Parameters are either static (D, N) grids or
// per-token (L, D, N); c may also be per-token. Plain utility, no autograd.
template <typename T>
Tensor<T> ssm_scan_sequential(const Tensor<T>& x, const Tensor<T>& a_bar, const Tensor<T>& b_bar,
                              const Tensor<T>& c, const Tensor<T>& d_skip);

// Global-convolution kernel of a static SSM: k[d, j] = sum_n c a_bar^j b_bar.
template <typename T>
Tensor<T> ssm_kernel(const Tensor<T>& a_bar, const Tensor<T>& b_bar, const Tensor<T>& c, int L);

// Causal convolution y_t = sum_{j<=t} k[j] x_{t-j} (+ d_skip x_t); k (D, L), x (L, D).
template <typename T>
Tensor<T> ssm_conv_apply(const Tensor<T>& k_bar, const Tensor<T>& x, const Tensor<T>& d_skip);

// Input-dependent selective scan (autograd op). Per token:
//   delta = softplus(dt_raw), a = -exp(a_log), (a_bar, b_bar) by ZOH,
//   h = a_bar h + b_bar u, y = sum_n c h (+ d_skip u).
// u, dt_raw (B, L, D); a_log (D, N); b_seq, c_seq (B, L, N); d_skip (D) or
// undefined. Channels scan independently; the recurrence is sequential in L.
template <typename T>
Tensor<T> selective_scan(const Tensor<T>& u, const Tensor<T>& dt_raw, const Tensor<T>& a_log,
                         const Tensor<T>& b_seq, const Tensor<T>& c_seq, const Tensor<T>& d_skip);

// Selective parameter bundle: B_t, C_t, delta_t are projected from the token.
template <typename T>
struct SsmParams {
    Tensor<T> a_log;     // (d_inner, N); A = -exp(a_log), strictly negative
    Tensor<T> x_proj_w;  // (dt_rank + 2N, d_inner)
    Tensor<T> dt_proj_w; // (d_inner, dt_rank)
    Tensor<T> dt_proj_b; // (d_inner)
    Tensor<T> d_skip;    // (d_inner)
    int d_inner = 0;
    int n_state = 16;
    int dt_rank = 1;
    bool use_skip = true;

    void init(int d_inner_, int n_state_, Rng& rng);
    void register_params(ParamRegistry<T>& r, const std::string& prefix) const;
};

// x (B, L, d_inner) -> y of the same shape, differentiable end-to-end.
template <typename T>
Tensor<T> s6_forward(const Tensor<T>& x, const SsmParams<T>& p);

// Four-direction flattening of a feature grid and its inverse-sum.
template <typename T>
Tensor<T> scan_direction(const Tensor<T>& x, ScanDirection d);  // (B,C,H,W) -> (B,L,C)
template <typename T>
Tensor<T> unscan_direction(const Tensor<T>& seq, ScanDirection d, int H, int W);
template <typename T>
std::array<Tensor<T>, 4> cross_scan(const Tensor<T>& x);
template <typename T>
Tensor<T> cross_merge(const std::array<Tensor<T>, 4>& seqs, int H, int W);

// Minimal VSS-style 2D selective-scan block:
// 1x1 in-projection (x and gate halves), 3x3 depth-wise conv, silu,
// shared-parameter scan over the four directions, merge, layer norm,
// silu-gated multiply, 1x1 out-projection.
template <typename T>
struct Ss2dBlock {
    int channels = 0;
    int d_inner = 0;
    Conv2dLayer<T> in_proj;  // 1x1 C -> 2*d_inner
    Conv2dLayer<T> dw;       // 3x3 depth-wise on d_inner
    SsmParams<T> ssm;
    LayerNormLayer<T> out_norm;
    Conv2dLayer<T> out_proj;  // 1x1 d_inner -> C
    int64_t tokens_last = 0;  // grid positions scanned per sample in the last forward

    void init(int channels_, int n_state, Rng& rng);
    Tensor<T> forward(const Tensor<T>& x);
    void register_params(ParamRegistry<T>& r, const std::string& prefix) const;
};

}  // namespace tinyvim
