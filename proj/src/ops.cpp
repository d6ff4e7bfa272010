#include "tinyvim/ops.hpp"

#include <cmath>
#include <cstring>

namespace tinyvim {

namespace {

constexpr int64_t kGrain = 4096;  // below this, threading overhead dominates

inline bool par(int64_t work) { return max_threads() > 1 && work > kGrain; }

template <typename T>
void require_same_dims(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (!a.same_dims(b)) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

template <typename T, class F, class DF>
Tensor<T> unary_op(const char* name, const Tensor<T>& x, F f, DF df) {
    Tensor<T> y = Tensor<T>::zeros(x.dims());
    const T* xp = x.data();
    T* yp = y.data();
    const int64_t n = x.size();
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(n))
    for (int64_t i = 0; i < n; ++i) yp[i] = f(xp[i]);
    check_finite(y, name);
    if (detail::recording(x)) {
        y.set_requires_grad(true);
        Tensor<T> xc = x, yc = y;
        active_tape<T>()->record([xc, yc, df]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            T* gx = xc.grad();
            const T* xp2 = xc.data();
            const int64_t m = xc.size();
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(m))
            for (int64_t i = 0; i < m; ++i) gx[i] += gy[i] * df(xp2[i]);
        });
    }
    return y;
}

template <typename T>
inline T sigmoid_stable(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_dims(a, b, "add");
    Tensor<T> y = Tensor<T>::zeros(a.dims());
    const T* ap = a.data();
    const T* bp = b.data();
    T* yp = y.data();
    const int64_t n = a.size();
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(n))
    for (int64_t i = 0; i < n; ++i) yp[i] = ap[i] + bp[i];
    check_finite(y, "add");
    if (detail::recording(a, b)) {
        y.set_requires_grad(true);
        Tensor<T> ac = a, bc = b, yc = y;
        active_tape<T>()->record([ac, bc, yc]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            const int64_t m = yc.size();
            if (ac.requires_grad()) {
                T* ga = ac.grad();
                for (int64_t i = 0; i < m; ++i) ga[i] += gy[i];
            }
            if (bc.requires_grad()) {
                T* gb = bc.grad();
                for (int64_t i = 0; i < m; ++i) gb[i] += gy[i];
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_dims(a, b, "sub");
    Tensor<T> y = Tensor<T>::zeros(a.dims());
    const T* ap = a.data();
    const T* bp = b.data();
    T* yp = y.data();
    const int64_t n = a.size();
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(n))
    for (int64_t i = 0; i < n; ++i) yp[i] = ap[i] - bp[i];
    check_finite(y, "sub");
    if (detail::recording(a, b)) {
        y.set_requires_grad(true);
        Tensor<T> ac = a, bc = b, yc = y;
        active_tape<T>()->record([ac, bc, yc]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            const int64_t m = yc.size();
            if (ac.requires_grad()) {
                T* ga = ac.grad();
                for (int64_t i = 0; i < m; ++i) ga[i] += gy[i];
            }
            if (bc.requires_grad()) {
                T* gb = bc.grad();
                for (int64_t i = 0; i < m; ++i) gb[i] -= gy[i];
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_dims(a, b, "mul");
    Tensor<T> y = Tensor<T>::zeros(a.dims());
    const T* ap = a.data();
    const T* bp = b.data();
    T* yp = y.data();
    const int64_t n = a.size();
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(n))
    for (int64_t i = 0; i < n; ++i) yp[i] = ap[i] * bp[i];
    check_finite(y, "mul");
    if (detail::recording(a, b)) {
        y.set_requires_grad(true);
        Tensor<T> ac = a, bc = b, yc = y;
        active_tape<T>()->record([ac, bc, yc]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            const int64_t m = yc.size();
            const T* ap2 = ac.data();
            const T* bp2 = bc.data();
            if (ac.requires_grad()) {
                T* ga = ac.grad();
                for (int64_t i = 0; i < m; ++i) ga[i] += gy[i] * bp2[i];
            }
            if (bc.requires_grad()) {
                T* gb = bc.grad();
                for (int64_t i = 0; i < m; ++i) gb[i] += gy[i] * ap2[i];
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    return unary_op("scale", a, [s](T v) { return s * v; }, [s](T) { return s; });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    const T inv_sqrt2 = T(0.7071067811865475244008443621048490393L);
    const T inv_sqrt2pi = T(0.3989422804014326779399460599343818685L);
    return unary_op(
        "gelu", x,
        [=](T v) { return T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2)); },
        [=](T v) {
            const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
            return cdf + v * inv_sqrt2pi * std::exp(T(-0.5) * v * v);
        });
}

template <typename T>
Tensor<T> silu(const Tensor<T>& x) {
    return unary_op(
        "silu", x,
        [](T v) { return v * sigmoid_stable(v); },
        [](T v) {
            const T s = sigmoid_stable(v);
            return s * (T(1) + v * (T(1) - s));
        });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
    return unary_op(
        "softplus", x,
        [](T v) {
            if (v > T(30)) return v;
            if (v < T(-30)) return std::exp(v);
            return std::log1p(std::exp(v));
        },
        [](T v) { return sigmoid_stable(v); });
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
    T acc = T(0);
    const T* xp = x.data();
    for (int64_t i = 0; i < x.size(); ++i) acc += xp[i];
    Tensor<T> y = Tensor<T>::scalar(acc);
    check_finite(y, "sum_all");
    if (detail::recording(x)) {
        y.set_requires_grad(true);
        Tensor<T> xc = x, yc = y;
        active_tape<T>()->record([xc, yc]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            T* gx = xc.grad();
            for (int64_t i = 0; i < xc.size(); ++i) gx[i] += gy[0];
        });
    }
    return y;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, std::vector<int> dims) {
    Tensor<T> y = Tensor<T>::from(std::move(dims), x.values());
    if (y.size() != x.size()) throw std::invalid_argument("reshape: element count mismatch");
    if (detail::recording(x)) {
        y.set_requires_grad(true);
        Tensor<T> xc = x, yc = y;
        active_tape<T>()->record([xc, yc]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            T* gx = xc.grad();
            for (int64_t i = 0; i < xc.size(); ++i) gx[i] += gy[i];
        });
    }
    return y;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_channels: no inputs");
    const int B = xs[0].dim(0), H = xs[0].dim(2), W = xs[0].dim(3);
    int C = 0;
    for (const auto& x : xs) {
        if (x.ndim() != 4 || x.dim(0) != B || x.dim(2) != H || x.dim(3) != W)
            throw std::invalid_argument("concat_channels: shape mismatch");
        C += x.dim(1);
    }
    Tensor<T> y = Tensor<T>::zeros({B, C, H, W});
    const int64_t hw = int64_t(H) * W;
    T* yp = y.data();
    int c_off = 0;
    bool track = false;
    for (const auto& x : xs) {
        const int ci = x.dim(1);
        const T* xp = x.data();
        for (int b = 0; b < B; ++b)
            std::memcpy(yp + (int64_t(b) * C + c_off) * hw, xp + int64_t(b) * ci * hw,
                        sizeof(T) * ci * hw);
        c_off += ci;
        track = track || detail::recording(x);
    }
    if (track) {
        y.set_requires_grad(true);
        std::vector<Tensor<T>> xc = xs;
        Tensor<T> yc = y;
        active_tape<T>()->record([xc, yc, B, C, hw]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            int off = 0;
            for (auto& x : xc) {
                const int ci = x.dim(1);
                if (x.requires_grad()) {
                    T* gx = x.grad();
                    for (int b = 0; b < B; ++b) {
                        const T* src = gy + (int64_t(b) * C + off) * hw;
                        T* dst = gx + int64_t(b) * ci * hw;
                        for (int64_t i = 0; i < ci * hw; ++i) dst[i] += src[i];
                    }
                }
                off += ci;
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int c_begin, int c_end) {
    if (x.ndim() != 4) throw std::invalid_argument("slice_channels: rank-4 input required");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (c_begin < 0 || c_end > C || c_begin >= c_end)
        throw std::invalid_argument("slice_channels: bad channel range");
    const int cs = c_end - c_begin;
    const int64_t hw = int64_t(H) * W;
    Tensor<T> y = Tensor<T>::zeros({B, cs, H, W});
    const T* xp = x.data();
    T* yp = y.data();
    for (int b = 0; b < B; ++b)
        std::memcpy(yp + int64_t(b) * cs * hw, xp + (int64_t(b) * C + c_begin) * hw,
                    sizeof(T) * cs * hw);
    if (detail::recording(x)) {
        y.set_requires_grad(true);
        Tensor<T> xc = x, yc = y;
        active_tape<T>()->record([xc, yc, c_begin, cs, B, C, hw]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            T* gx = xc.grad();
            for (int b = 0; b < B; ++b) {
                const T* src = gy + int64_t(b) * cs * hw;
                T* dst = gx + (int64_t(b) * C + c_begin) * hw;
                for (int64_t i = 0; i < cs * hw; ++i) dst[i] += src[i];
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> slice_last(const Tensor<T>& x, int k0, int k1) {
    if (x.ndim() != 3) throw std::invalid_argument("slice_last: rank-3 input required");
    const int B = x.dim(0), L = x.dim(1), K = x.dim(2);
    if (k0 < 0 || k1 > K || k0 >= k1) throw std::invalid_argument("slice_last: bad range");
    const int ks = k1 - k0;
    Tensor<T> y = Tensor<T>::zeros({B, L, ks});
    const T* xp = x.data();
    T* yp = y.data();
    const int64_t rows = int64_t(B) * L;
    for (int64_t r = 0; r < rows; ++r)
        std::memcpy(yp + r * ks, xp + r * K + k0, sizeof(T) * ks);
    if (detail::recording(x)) {
        y.set_requires_grad(true);
        Tensor<T> xc = x, yc = y;
        active_tape<T>()->record([xc, yc, k0, ks, rows, K]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            T* gx = xc.grad();
            for (int64_t r = 0; r < rows; ++r)
                for (int i = 0; i < ks; ++i) gx[r * K + k0 + i] += gy[r * ks + i];
        });
    }
    return y;
}

namespace {

template <typename T>
struct ConvDims {
    int B, Cin, H, W, Cout, K, Ho, Wo, cig, cog;
};

template <typename T>
ConvDims<T> conv_check(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                       int pad, int groups) {
    if (x.ndim() != 4 || w.ndim() != 4) throw std::invalid_argument("conv2d: rank-4 x and w required");
    if (stride <= 0) throw std::invalid_argument("conv2d: stride must be positive");
    if (pad < 0) throw std::invalid_argument("conv2d: pad must be non-negative");
    if (groups <= 0) throw std::invalid_argument("conv2d: groups must be positive");
    ConvDims<T> d;
    d.B = x.dim(0); d.Cin = x.dim(1); d.H = x.dim(2); d.W = x.dim(3);
    d.Cout = w.dim(0); d.K = w.dim(2);
    if (w.dim(2) != w.dim(3)) throw std::invalid_argument("conv2d: square kernels only");
    if (d.Cin % groups != 0 || d.Cout % groups != 0)
        throw std::invalid_argument("conv2d: channel counts not divisible by groups");
    d.cig = d.Cin / groups;
    d.cog = d.Cout / groups;
    if (w.dim(1) != d.cig) throw std::invalid_argument("conv2d: weight channel dim mismatch");
    if (b.defined() && (b.ndim() != 1 || b.dim(0) != d.Cout))
        throw std::invalid_argument("conv2d: bias shape mismatch");
    d.Ho = (d.H + 2 * pad - d.K) / stride + 1;
    d.Wo = (d.W + 2 * pad - d.K) / stride + 1;
    if (d.H + 2 * pad < d.K || d.W + 2 * pad < d.K || d.Ho <= 0 || d.Wo <= 0)
        throw std::invalid_argument("conv2d: kernel larger than padded input");
    return d;
}

template <typename T>
void conv_forward_kernel(const T* xp, const T* wp, const T* bp, T* yp, const ConvDims<T>& d,
                         int stride, int pad) {
    const int64_t hw = int64_t(d.H) * d.W;
    const int64_t ohw = int64_t(d.Ho) * d.Wo;
    const int64_t bc = int64_t(d.B) * d.Cout;
    if (d.K == 1 && stride == 1 && pad == 0 && d.cig > 1) {
        // pointwise: channel mixing over contiguous spatial rows
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(bc * ohw))
        for (int64_t bco = 0; bco < bc; ++bco) {
            const int b = static_cast<int>(bco / d.Cout);
            const int co = static_cast<int>(bco % d.Cout);
            const int g = co / d.cog;
            T* out = yp + bco * ohw;
            if (bp) {
                for (int64_t i = 0; i < ohw; ++i) out[i] = bp[co];
            }
            for (int ci = 0; ci < d.cig; ++ci) {
                const T wv = wp[int64_t(co) * d.cig + ci];
                const T* in = xp + (int64_t(b) * d.Cin + g * d.cig + ci) * hw;
                for (int64_t i = 0; i < ohw; ++i) out[i] += wv * in[i];
            }
        }
        return;
    }
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(bc * ohw * d.K * d.K))
    for (int64_t bco = 0; bco < bc; ++bco) {
        const int b = static_cast<int>(bco / d.Cout);
        const int co = static_cast<int>(bco % d.Cout);
        const int g = co / d.cog;
        const T* wrow = wp + int64_t(co) * d.cig * d.K * d.K;
        T* out = yp + bco * ohw;
        for (int ho = 0; ho < d.Ho; ++ho) {
            for (int wo = 0; wo < d.Wo; ++wo) {
                T acc = bp ? bp[co] : T(0);
                for (int ci = 0; ci < d.cig; ++ci) {
                    const T* in = xp + (int64_t(b) * d.Cin + g * d.cig + ci) * hw;
                    const T* wk = wrow + int64_t(ci) * d.K * d.K;
                    for (int kh = 0; kh < d.K; ++kh) {
                        const int h = ho * stride - pad + kh;
                        if (h < 0 || h >= d.H) continue;
                        for (int kw = 0; kw < d.K; ++kw) {
                            const int wcol = wo * stride - pad + kw;
                            if (wcol < 0 || wcol >= d.W) continue;
                            acc += in[int64_t(h) * d.W + wcol] * wk[kh * d.K + kw];
                        }
                    }
                }
                out[int64_t(ho) * d.Wo + wo] = acc;
            }
        }
    }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int pad,
                 int groups) {
    const ConvDims<T> d = conv_check(x, w, b, stride, pad, groups);
    Tensor<T> y = Tensor<T>::zeros({d.B, d.Cout, d.Ho, d.Wo});
    conv_forward_kernel<T>(x.data(), w.data(), b.defined() ? b.data() : nullptr, y.data(), d,
                           stride, pad);
    check_finite(y, "conv2d");
    const bool track = detail::recording(x, w) || (b.defined() && detail::recording(b));
    if (track) {
        y.set_requires_grad(true);
        Tensor<T> xc = x, wc = w, bc = b, yc = y;
        active_tape<T>()->record([xc, wc, bc, yc, d, stride, pad]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            const int64_t hw = int64_t(d.H) * d.W;
            const int64_t ohw = int64_t(d.Ho) * d.Wo;
            if (bc.defined() && bc.requires_grad()) {
                T* gb = bc.grad();
                for (int co = 0; co < d.Cout; ++co) {
                    T acc = T(0);
                    for (int b2 = 0; b2 < d.B; ++b2) {
                        const T* g = gy + (int64_t(b2) * d.Cout + co) * ohw;
                        for (int64_t i = 0; i < ohw; ++i) acc += g[i];
                    }
                    gb[co] += acc;
                }
            }
            if (wc.requires_grad()) {
                T* gw = wc.grad();
                const T* xp = xc.data();
#pragma omp parallel for schedule(static) num_threads(max_threads()) \
    if (par(int64_t(d.Cout) * d.cig * d.K * d.K * d.B * ohw / 16))
                for (int co = 0; co < d.Cout; ++co) {
                    const int g = co / d.cog;
                    for (int ci = 0; ci < d.cig; ++ci) {
                        for (int kh = 0; kh < d.K; ++kh) {
                            for (int kw = 0; kw < d.K; ++kw) {
                                T acc = T(0);
                                for (int b2 = 0; b2 < d.B; ++b2) {
                                    const T* in = xp + (int64_t(b2) * d.Cin + g * d.cig + ci) * hw;
                                    const T* gout = gy + (int64_t(b2) * d.Cout + co) * ohw;
                                    for (int ho = 0; ho < d.Ho; ++ho) {
                                        const int h = ho * stride - pad + kh;
                                        if (h < 0 || h >= d.H) continue;
                                        for (int wo = 0; wo < d.Wo; ++wo) {
                                            const int wcol = wo * stride - pad + kw;
                                            if (wcol < 0 || wcol >= d.W) continue;
                                            acc += in[int64_t(h) * d.W + wcol] *
                                                   gout[int64_t(ho) * d.Wo + wo];
                                        }
                                    }
                                }
                                gw[((int64_t(co) * d.cig + ci) * d.K + kh) * d.K + kw] += acc;
                            }
                        }
                    }
                }
            }
            if (xc.requires_grad()) {
                T* gx = xc.grad();
                const T* wp = wc.data();
                const int64_t bci = int64_t(d.B) * d.Cin;
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(bci * hw))
                for (int64_t bcidx = 0; bcidx < bci; ++bcidx) {
                    const int b2 = static_cast<int>(bcidx / d.Cin);
                    const int ci_abs = static_cast<int>(bcidx % d.Cin);
                    const int g = ci_abs / d.cig;
                    const int ci = ci_abs % d.cig;
                    T* gin = gx + bcidx * hw;
                    for (int h = 0; h < d.H; ++h) {
                        for (int wcol = 0; wcol < d.W; ++wcol) {
                            T acc = T(0);
                            for (int kh = 0; kh < d.K; ++kh) {
                                const int ho_num = h + pad - kh;
                                if (ho_num < 0 || ho_num % stride != 0) continue;
                                const int ho = ho_num / stride;
                                if (ho >= d.Ho) continue;
                                for (int kw = 0; kw < d.K; ++kw) {
                                    const int wo_num = wcol + pad - kw;
                                    if (wo_num < 0 || wo_num % stride != 0) continue;
                                    const int wo = wo_num / stride;
                                    if (wo >= d.Wo) continue;
                                    for (int co = g * d.cog; co < (g + 1) * d.cog; ++co) {
                                        acc += wp[((int64_t(co) * d.cig + ci) * d.K + kh) * d.K +
                                                  kw] *
                                               gy[(int64_t(b2) * d.Cout + co) * ohw +
                                                  int64_t(ho) * d.Wo + wo];
                                    }
                                }
                            }
                            gin[int64_t(h) * d.W + wcol] += acc;
                        }
                    }
                }
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, int r) {
    if (x.ndim() != 4) throw std::invalid_argument("avg_pool2d: rank-4 input required");
    if (r <= 0) throw std::invalid_argument("avg_pool2d: ratio must be positive");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H % r != 0 || W % r != 0)
        throw std::invalid_argument("avg_pool2d: spatial dims not divisible by ratio");
    const int Ho = H / r, Wo = W / r;
    Tensor<T> y = Tensor<T>::zeros({B, C, Ho, Wo});
    const T* xp = x.data();
    T* yp = y.data();
    const int64_t bc = int64_t(B) * C;
    const T inv = T(1) / (T(r) * T(r));
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(bc * H * W))
    for (int64_t p = 0; p < bc; ++p) {
        const T* in = xp + p * H * W;
        T* out = yp + p * int64_t(Ho) * Wo;
        for (int ho = 0; ho < Ho; ++ho) {
            for (int wo = 0; wo < Wo; ++wo) {
                T acc = T(0);
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < r; ++j) acc += in[int64_t(ho * r + i) * W + wo * r + j];
                out[int64_t(ho) * Wo + wo] = acc * inv;
            }
        }
    }
    check_finite(y, "avg_pool2d");
    if (detail::recording(x)) {
        y.set_requires_grad(true);
        Tensor<T> xc = x, yc = y;
        active_tape<T>()->record([xc, yc, r, bc, H, W, Ho, Wo, inv]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            T* gx = xc.grad();
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(bc * H * W))
            for (int64_t p = 0; p < bc; ++p) {
                const T* g = gy + p * int64_t(Ho) * Wo;
                T* out = gx + p * int64_t(H) * W;
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w)
                        out[int64_t(h) * W + w] += g[int64_t(h / r) * Wo + w / r] * inv;
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int r) {
    if (x.ndim() != 4) throw std::invalid_argument("upsample_nearest: rank-4 input required");
    if (r <= 0) throw std::invalid_argument("upsample_nearest: ratio must be positive");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Ho = H * r, Wo = W * r;
    Tensor<T> y = Tensor<T>::zeros({B, C, Ho, Wo});
    const T* xp = x.data();
    T* yp = y.data();
    const int64_t bc = int64_t(B) * C;
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(bc * Ho * Wo))
    for (int64_t p = 0; p < bc; ++p) {
        const T* in = xp + p * int64_t(H) * W;
        T* out = yp + p * int64_t(Ho) * Wo;
        for (int ho = 0; ho < Ho; ++ho)
            for (int wo = 0; wo < Wo; ++wo)
                out[int64_t(ho) * Wo + wo] = in[int64_t(ho / r) * W + wo / r];
    }
    if (detail::recording(x)) {
        y.set_requires_grad(true);
        Tensor<T> xc = x, yc = y;
        active_tape<T>()->record([xc, yc, r, bc, H, W, Ho, Wo]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            T* gx = xc.grad();
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(bc * H * W))
            for (int64_t p = 0; p < bc; ++p) {
                const T* g = gy + p * int64_t(Ho) * Wo;
                T* out = gx + p * int64_t(H) * W;
                for (int h = 0; h < H; ++h) {
                    for (int w = 0; w < W; ++w) {
                        T acc = T(0);
                        for (int i = 0; i < r; ++i)
                            for (int j = 0; j < r; ++j)
                                acc += g[int64_t(h * r + i) * Wo + w * r + j];
                        out[int64_t(h) * W + w] += acc;
                    }
                }
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (w.ndim() != 2) throw std::invalid_argument("linear: rank-2 weight required");
    const int In = w.dim(1), Out = w.dim(0);
    if (x.dim(x.ndim() - 1) != In) throw std::invalid_argument("linear: input feature dim mismatch");
    if (b.defined() && (b.ndim() != 1 || b.dim(0) != Out))
        throw std::invalid_argument("linear: bias shape mismatch");
    std::vector<int> ydims = x.dims();
    ydims.back() = Out;
    Tensor<T> y = Tensor<T>::zeros(ydims);
    const int64_t rows = x.size() / In;
    const T* xp = x.data();
    const T* wp = w.data();
    const T* bp = b.defined() ? b.data() : nullptr;
    T* yp = y.data();
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(rows * In * Out / 4))
    for (int64_t rI = 0; rI < rows; ++rI) {
        const T* xin = xp + rI * In;
        T* out = yp + rI * Out;
        for (int o = 0; o < Out; ++o) {
            const T* wrow = wp + int64_t(o) * In;
            T acc = bp ? bp[o] : T(0);
            for (int i = 0; i < In; ++i) acc += xin[i] * wrow[i];
            out[o] = acc;
        }
    }
    check_finite(y, "linear");
    const bool track = detail::recording(x, w) || (b.defined() && detail::recording(b));
    if (track) {
        y.set_requires_grad(true);
        Tensor<T> xc = x, wc = w, bc = b, yc = y;
        active_tape<T>()->record([xc, wc, bc, yc, rows, In, Out]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            if (bc.defined() && bc.requires_grad()) {
                T* gb = bc.grad();
                for (int o = 0; o < Out; ++o) {
                    T acc = T(0);
                    for (int64_t rI = 0; rI < rows; ++rI) acc += gy[rI * Out + o];
                    gb[o] += acc;
                }
            }
            if (wc.requires_grad()) {
                T* gw = wc.grad();
                const T* xp2 = xc.data();
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(int64_t(Out) * In * rows / 16))
                for (int o = 0; o < Out; ++o) {
                    T* grow = gw + int64_t(o) * In;
                    for (int64_t rI = 0; rI < rows; ++rI) {
                        const T g = gy[rI * Out + o];
                        const T* xin = xp2 + rI * In;
                        for (int i = 0; i < In; ++i) grow[i] += g * xin[i];
                    }
                }
            }
            if (xc.requires_grad()) {
                T* gx = xc.grad();
                const T* wp2 = wc.data();
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(rows * In * Out / 4))
                for (int64_t rI = 0; rI < rows; ++rI) {
                    const T* grow = gy + rI * Out;
                    T* gxin = gx + rI * In;
                    for (int o = 0; o < Out; ++o) {
                        const T g = grow[o];
                        const T* wrow = wp2 + int64_t(o) * In;
                        for (int i = 0; i < In; ++i) gxin[i] += g * wrow[i];
                    }
                }
            }
        });
    }
    return y;
}

namespace {

// Rows-with-stride view used by layer_norm: rank-4 normalizes axis 1 (one row
// per (b, h, w) position, channel elements H*W apart); other ranks normalize
// the contiguous last axis.
struct NormLayout {
    int64_t rows;
    int C;
    int64_t stride;  // distance between channel elements within a row
};

template <typename T>
NormLayout norm_layout(const Tensor<T>& x) {
    NormLayout nl;
    if (x.ndim() == 4) {
        nl.C = x.dim(1);
        nl.rows = int64_t(x.dim(0)) * x.dim(2) * x.dim(3);
        nl.stride = int64_t(x.dim(2)) * x.dim(3);
    } else {
        nl.C = x.dim(x.ndim() - 1);
        nl.rows = x.size() / nl.C;
        nl.stride = 1;
    }
    return nl;
}

template <typename T>
int64_t norm_row_base(const Tensor<T>& x, const NormLayout& nl, int64_t rI) {
    if (x.ndim() == 4) {
        const int64_t hw = int64_t(x.dim(2)) * x.dim(3);
        const int64_t b = rI / hw;
        const int64_t pos = rI % hw;
        return (b * x.dim(1)) * hw + pos;
    }
    return rI * nl.C;
}

}  // namespace

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
    if (eps <= T(0)) throw std::invalid_argument("layer_norm: eps must be positive");
    const NormLayout nl = norm_layout(x);
    if (gain.size() != nl.C || bias.size() != nl.C)
        throw std::invalid_argument("layer_norm: gain/bias extent mismatch");
    Tensor<T> y = Tensor<T>::zeros(x.dims());
    const T* xp = x.data();
    const T* gp = gain.data();
    const T* bp = bias.data();
    T* yp = y.data();
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(nl.rows * nl.C))
    for (int64_t rI = 0; rI < nl.rows; ++rI) {
        const int64_t base = norm_row_base(x, nl, rI);
        T mean = T(0);
        for (int c = 0; c < nl.C; ++c) mean += xp[base + c * nl.stride];
        mean /= T(nl.C);
        T var = T(0);
        for (int c = 0; c < nl.C; ++c) {
            const T d = xp[base + c * nl.stride] - mean;
            var += d * d;
        }
        var /= T(nl.C);
        const T inv = T(1) / std::sqrt(var + eps);
        for (int c = 0; c < nl.C; ++c) {
            const int64_t idx = base + c * nl.stride;
            yp[idx] = (xp[idx] - mean) * inv * gp[c] + bp[c];
        }
    }
    check_finite(y, "layer_norm");
    if (detail::recording(x, gain, bias)) {
        y.set_requires_grad(true);
        Tensor<T> xc = x, gc = gain, bc = bias, yc = y;
        active_tape<T>()->record([xc, gc, bc, yc, nl, eps]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            const T* xp2 = xc.data();
            const T* gp2 = gc.data();
            const int C = nl.C;
            if (xc.requires_grad()) {
                T* gx = xc.grad();
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(nl.rows * C))
                for (int64_t rI = 0; rI < nl.rows; ++rI) {
                    const int64_t base = norm_row_base(xc, nl, rI);
                    T mean = T(0);
                    for (int c = 0; c < C; ++c) mean += xp2[base + c * nl.stride];
                    mean /= T(C);
                    T var = T(0);
                    for (int c = 0; c < C; ++c) {
                        const T d = xp2[base + c * nl.stride] - mean;
                        var += d * d;
                    }
                    var /= T(C);
                    const T inv = T(1) / std::sqrt(var + eps);
                    T sum_dxh = T(0), sum_dxh_xh = T(0);
                    for (int c = 0; c < C; ++c) {
                        const int64_t idx = base + c * nl.stride;
                        const T xh = (xp2[idx] - mean) * inv;
                        const T dxh = gy[idx] * gp2[c];
                        sum_dxh += dxh;
                        sum_dxh_xh += dxh * xh;
                    }
                    for (int c = 0; c < C; ++c) {
                        const int64_t idx = base + c * nl.stride;
                        const T xh = (xp2[idx] - mean) * inv;
                        const T dxh = gy[idx] * gp2[c];
                        gx[idx] += inv * (dxh - sum_dxh / T(C) - xh * sum_dxh_xh / T(C));
                    }
                }
            }
            if (gc.requires_grad() || bc.requires_grad()) {
                T* gg = gc.requires_grad() ? gc.grad() : nullptr;
                T* gb = bc.requires_grad() ? bc.grad() : nullptr;
                for (int64_t rI = 0; rI < nl.rows; ++rI) {
                    const int64_t base = norm_row_base(xc, nl, rI);
                    T mean = T(0);
                    for (int c = 0; c < C; ++c) mean += xp2[base + c * nl.stride];
                    mean /= T(C);
                    T var = T(0);
                    for (int c = 0; c < C; ++c) {
                        const T d = xp2[base + c * nl.stride] - mean;
                        var += d * d;
                    }
                    var /= T(C);
                    const T inv = T(1) / std::sqrt(var + eps);
                    for (int c = 0; c < C; ++c) {
                        const int64_t idx = base + c * nl.stride;
                        if (gg) gg[c] += gy[idx] * (xp2[idx] - mean) * inv;
                        if (gb) gb[c] += gy[idx];
                    }
                }
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     const Tensor<T>& running_mean, const Tensor<T>& running_var,
                     bool use_batch_stats, T eps, Tensor<T>* mean_out, Tensor<T>* var_out) {
    if (x.ndim() != 4) throw std::invalid_argument("batch_norm: rank-4 input required");
    if (eps <= T(0)) throw std::invalid_argument("batch_norm: eps must be positive");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (gamma.size() != C || beta.size() != C || running_mean.size() != C ||
        running_var.size() != C)
        throw std::invalid_argument("batch_norm: per-channel parameter extent mismatch");
    const int64_t hw = int64_t(H) * W;
    const int64_t m = int64_t(B) * hw;

    Tensor<T> mean = Tensor<T>::zeros({C});
    Tensor<T> var = Tensor<T>::zeros({C});
    if (use_batch_stats) {
        T* mp = mean.data();
        T* vp = var.data();
        const T* xp = x.data();
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(int64_t(C) * m))
        for (int c = 0; c < C; ++c) {
            T acc = T(0);
            for (int b = 0; b < B; ++b) {
                const T* in = xp + (int64_t(b) * C + c) * hw;
                for (int64_t i = 0; i < hw; ++i) acc += in[i];
            }
            const T mu = acc / T(m);
            T v = T(0);
            for (int b = 0; b < B; ++b) {
                const T* in = xp + (int64_t(b) * C + c) * hw;
                for (int64_t i = 0; i < hw; ++i) {
                    const T d = in[i] - mu;
                    v += d * d;
                }
            }
            mp[c] = mu;
            vp[c] = v / T(m);
        }
    } else {
        mean = running_mean.clone();
        var = running_var.clone();
    }
    if (mean_out) *mean_out = mean.clone();
    if (var_out) *var_out = var.clone();

    Tensor<T> y = Tensor<T>::zeros(x.dims());
    {
        const T* xp = x.data();
        const T* mp = mean.data();
        const T* vp = var.data();
        const T* gp = gamma.data();
        const T* bp = beta.data();
        T* yp = y.data();
        const int64_t bc = int64_t(B) * C;
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(bc * hw))
        for (int64_t p = 0; p < bc; ++p) {
            const int c = static_cast<int>(p % C);
            const T inv = T(1) / std::sqrt(vp[c] + eps);
            const T g = gp[c] * inv;
            const T sh = bp[c] - mp[c] * g;
            const T* in = xp + p * hw;
            T* out = yp + p * hw;
            for (int64_t i = 0; i < hw; ++i) out[i] = in[i] * g + sh;
        }
    }
    check_finite(y, "batch_norm");
    if (detail::recording(x, gamma, beta)) {
        y.set_requires_grad(true);
        Tensor<T> xc = x, gc = gamma, bc2 = beta, yc = y, mc = mean, vc = var;
        active_tape<T>()->record([xc, gc, bc2, yc, mc, vc, use_batch_stats, eps, B, C, hw,
                                  m]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            const T* xp = xc.data();
            const T* mp = mc.data();
            const T* vp = vc.data();
            const T* gp = gc.data();
            T* gx = xc.requires_grad() ? xc.grad() : nullptr;
            T* gg = gc.requires_grad() ? gc.grad() : nullptr;
            T* gb = bc2.requires_grad() ? bc2.grad() : nullptr;
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(int64_t(C) * m))
            for (int c = 0; c < C; ++c) {
                const T inv = T(1) / std::sqrt(vp[c] + eps);
                T dgamma = T(0), dbeta = T(0);
                for (int b = 0; b < B; ++b) {
                    const T* in = xp + (int64_t(b) * C + c) * hw;
                    const T* g = gy + (int64_t(b) * C + c) * hw;
                    for (int64_t i = 0; i < hw; ++i) {
                        dgamma += g[i] * (in[i] - mp[c]) * inv;
                        dbeta += g[i];
                    }
                }
                if (gg) gg[c] += dgamma;
                if (gb) gb[c] += dbeta;
                if (gx) {
                    if (use_batch_stats) {
                        const T k = gp[c] * inv / T(m);
                        for (int b = 0; b < B; ++b) {
                            const T* in = xp + (int64_t(b) * C + c) * hw;
                            const T* g = gy + (int64_t(b) * C + c) * hw;
                            T* out = gx + (int64_t(b) * C + c) * hw;
                            for (int64_t i = 0; i < hw; ++i) {
                                const T xh = (in[i] - mp[c]) * inv;
                                out[i] += k * (T(m) * g[i] - dbeta - xh * dgamma);
                            }
                        }
                    } else {
                        const T k = gp[c] * inv;
                        for (int b = 0; b < B; ++b) {
                            const T* g = gy + (int64_t(b) * C + c) * hw;
                            T* out = gx + (int64_t(b) * C + c) * hw;
                            for (int64_t i = 0; i < hw; ++i) out[i] += k * g[i];
                        }
                    }
                }
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
    if (x.ndim() != 4) throw std::invalid_argument("global_avg_pool: rank-4 input required");
    const int B = x.dim(0), C = x.dim(1);
    const int64_t hw = int64_t(x.dim(2)) * x.dim(3);
    Tensor<T> y = Tensor<T>::zeros({B, C});
    const T* xp = x.data();
    T* yp = y.data();
    const int64_t bc = int64_t(B) * C;
    for (int64_t p = 0; p < bc; ++p) {
        T acc = T(0);
        const T* in = xp + p * hw;
        for (int64_t i = 0; i < hw; ++i) acc += in[i];
        yp[p] = acc / T(hw);
    }
    if (detail::recording(x)) {
        y.set_requires_grad(true);
        Tensor<T> xc = x, yc = y;
        active_tape<T>()->record([xc, yc, bc, hw]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            T* gx = xc.grad();
            for (int64_t p = 0; p < bc; ++p) {
                const T g = gy[p] / T(hw);
                T* out = gx + p * hw;
                for (int64_t i = 0; i < hw; ++i) out[i] += g;
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2) throw std::invalid_argument("softmax_cross_entropy: rank-2 logits");
    const int B = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(labels.size()) != B)
        throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
    for (int l : labels)
        if (l < 0 || l >= K) throw std::invalid_argument("softmax_cross_entropy: label out of range");
    const T* zp = logits.data();
    T loss = T(0);
    for (int b = 0; b < B; ++b) {
        const T* z = zp + int64_t(b) * K;
        T zmax = z[0];
        for (int k = 1; k < K; ++k) zmax = std::max(zmax, z[k]);
        T se = T(0);
        for (int k = 0; k < K; ++k) se += std::exp(z[k] - zmax);
        loss += std::log(se) + zmax - z[labels[b]];
    }
    loss /= T(B);
    Tensor<T> y = Tensor<T>::scalar(loss);
    check_finite(y, "softmax_cross_entropy");
    if (detail::recording(logits)) {
        y.set_requires_grad(true);
        Tensor<T> lc = logits, yc = y;
        std::vector<int> lab = labels;
        active_tape<T>()->record([lc, yc, lab, B, K]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            T* gz = lc.grad();
            const T* zp2 = lc.data();
            const T g = gy[0] / T(B);
            for (int b = 0; b < B; ++b) {
                const T* z = zp2 + int64_t(b) * K;
                T* gout = gz + int64_t(b) * K;
                T zmax = z[0];
                for (int k = 1; k < K; ++k) zmax = std::max(zmax, z[k]);
                T se = T(0);
                for (int k = 0; k < K; ++k) se += std::exp(z[k] - zmax);
                for (int k = 0; k < K; ++k) {
                    T p = std::exp(z[k] - zmax) / se;
                    gout[k] += g * (p - (k == lab[b] ? T(1) : T(0)));
                }
            }
        });
    }
    return y;
}

#define TINYVIM_INSTANTIATE_OPS(T)                                                                \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> scale(const Tensor<T>&, T);                                                \
    template Tensor<T> gelu(const Tensor<T>&);                                                    \
    template Tensor<T> silu(const Tensor<T>&);                                                    \
    template Tensor<T> softplus(const Tensor<T>&);                                                \
    template Tensor<T> sum_all(const Tensor<T>&);                                                 \
    template Tensor<T> reshape(const Tensor<T>&, std::vector<int>);                               \
    template Tensor<T> concat_channels(const std::vector<Tensor<T>>&);                            \
    template Tensor<T> slice_channels(const Tensor<T>&, int, int);                                \
    template Tensor<T> slice_last(const Tensor<T>&, int, int);                                    \
    template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int,     \
                              int);                                                               \
    template Tensor<T> avg_pool2d(const Tensor<T>&, int);                                         \
    template Tensor<T> upsample_nearest(const Tensor<T>&, int);                                   \
    template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);              \
    template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);       \
    template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                  const Tensor<T>&, const Tensor<T>&, bool, T, Tensor<T>*,        \
                                  Tensor<T>*);                                                    \
    template Tensor<T> global_avg_pool(const Tensor<T>&);                                         \
    template Tensor<T> softmax_cross_entropy(const Tensor<T>&, const std::vector<int>&);

TINYVIM_INSTANTIATE_OPS(float)
TINYVIM_INSTANTIATE_OPS(double)

#undef TINYVIM_INSTANTIATE_OPS

}  // namespace tinyvim
