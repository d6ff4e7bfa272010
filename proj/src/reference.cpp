#include "tinyvim/reference.hpp"

namespace tinyvim::ref {

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int pad,
                 int groups) {
    const int B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = w.dim(0), K = w.dim(2);
    const int cig = Cin / groups, cog = Cout / groups;
    const int Ho = (H + 2 * pad - K) / stride + 1;
    const int Wo = (W + 2 * pad - K) / stride + 1;
    Tensor<T> y = Tensor<T>::zeros({B, Cout, Ho, Wo});
    for (int bb = 0; bb < B; ++bb)
        for (int co = 0; co < Cout; ++co)
            for (int ho = 0; ho < Ho; ++ho)
                for (int wo = 0; wo < Wo; ++wo) {
                    T acc = b.defined() ? b.at(co) : T(0);
                    const int g = co / cog;
                    for (int ci = 0; ci < cig; ++ci)
                        for (int kh = 0; kh < K; ++kh)
                            for (int kw = 0; kw < K; ++kw) {
                                const int h = ho * stride - pad + kh;
                                const int wc = wo * stride - pad + kw;
                                if (h < 0 || h >= H || wc < 0 || wc >= W) continue;
                                acc += x.at(bb, g * cig + ci, h, wc) * w.at(co, ci, kh, kw);
                            }
                    y.at(bb, co, ho, wo) = acc;
                }
    return y;
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, int r) {
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor<T> y = Tensor<T>::zeros({B, C, H / r, W / r});
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int ho = 0; ho < H / r; ++ho)
                for (int wo = 0; wo < W / r; ++wo) {
                    T acc = T(0);
                    for (int i = 0; i < r; ++i)
                        for (int j = 0; j < r; ++j) acc += x.at(b, c, ho * r + i, wo * r + j);
                    y.at(b, c, ho, wo) = acc / (T(r) * T(r));
                }
    return y;
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int r) {
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor<T> y = Tensor<T>::zeros({B, C, H * r, W * r});
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int h = 0; h < H * r; ++h)
                for (int w = 0; w < W * r; ++w) y.at(b, c, h, w) = x.at(b, c, h / r, w / r);
    return y;
}

template <typename T>
Tensor<T> ssm_scan(const Tensor<T>& x, const Tensor<T>& a_bar, const Tensor<T>& b_bar,
                   const Tensor<T>& c, const Tensor<T>& d_skip) {
    const int L = x.dim(0), D = x.dim(1), N = a_bar.dim(1);
    Tensor<T> y = Tensor<T>::zeros({L, D});
    std::vector<T> h(static_cast<size_t>(D) * N, T(0));
    for (int t = 0; t < L; ++t)
        for (int d = 0; d < D; ++d) {
            T acc = T(0);
            for (int n = 0; n < N; ++n) {
                T& hv = h[static_cast<size_t>(d) * N + n];
                hv = a_bar.at(d, n) * hv + b_bar.at(d, n) * x.at(t, d);
                acc += c.at(d, n) * hv;
            }
            if (d_skip.defined()) acc += d_skip.at(d) * x.at(t, d);
            y.at(t, d) = acc;
        }
    return y;
}

#define TINYVIM_INSTANTIATE_REF(T)                                                              \
    template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int,   \
                              int);                                                             \
    template Tensor<T> avg_pool2d(const Tensor<T>&, int);                                       \
    template Tensor<T> upsample_nearest(const Tensor<T>&, int);                                 \
    template Tensor<T> ssm_scan(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                const Tensor<T>&, const Tensor<T>&);

TINYVIM_INSTANTIATE_REF(float)
TINYVIM_INSTANTIATE_REF(double)

#undef TINYVIM_INSTANTIATE_REF

}  // namespace tinyvim::ref
