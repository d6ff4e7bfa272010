#include "tinyvim/ssm.hpp"

#include <cmath>

namespace tinyvim {

namespace {

inline bool par(int64_t work) { return max_threads() > 1 && work > 4096; }

template <typename T>
inline T sigmoid_stable(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
inline T softplus_stable(T x) {
    if (x > T(30)) return x;
    if (x < T(-30)) return std::exp(x);
    return std::log1p(std::exp(x));
}

}  // namespace

template <typename T>
void zoh_discretize(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& delta,
                    Tensor<T>& a_bar, Tensor<T>& b_bar) {
    if (!a.same_dims(b) || !a.same_dims(delta))
        throw std::invalid_argument("zoh_discretize: shape mismatch");
    a_bar = Tensor<T>::zeros(a.dims());
    b_bar = Tensor<T>::zeros(a.dims());
    for (int64_t i = 0; i < a.size(); ++i) {
        auto [ab, bb] = zoh_discretize(a.data()[i], b.data()[i], delta.data()[i]);
        a_bar.data()[i] = ab;
        b_bar.data()[i] = bb;
    }
}

template <typename T>
Tensor<T> ssm_scan_sequential(const Tensor<T>& x, const Tensor<T>& a_bar, const Tensor<T>& b_bar,
                              const Tensor<T>& c, const Tensor<T>& d_skip) {
    if (x.ndim() != 2) throw std::invalid_argument("ssm_scan_sequential: x must be (L, D)");
    const int L = x.dim(0), D = x.dim(1);
    auto check_param = [&](const Tensor<T>& p, const char* name) -> bool {
        if (p.ndim() == 2) {
            if (p.dim(0) != D) throw std::invalid_argument(std::string("ssm_scan_sequential: ") +
                                                           name + " channel dim mismatch");
            return false;  // static
        }
        if (p.ndim() == 3) {
            if (p.dim(0) != L)
                throw std::invalid_argument(std::string("ssm_scan_sequential: ") + name +
                                            " length mismatch with x");
            if (p.dim(1) != D) throw std::invalid_argument(std::string("ssm_scan_sequential: ") +
                                                           name + " channel dim mismatch");
            return true;  // per token
        }
        throw std::invalid_argument(std::string("ssm_scan_sequential: ") + name + " bad rank");
    };
    const bool a_tok = check_param(a_bar, "a_bar");
    const bool b_tok = check_param(b_bar, "b_bar");
    const bool c_tok = check_param(c, "c");
    const int N = a_bar.dim(a_tok ? 2 : 1);
    if (b_bar.dim(b_tok ? 2 : 1) != N || c.dim(c_tok ? 2 : 1) != N)
        throw std::invalid_argument("ssm_scan_sequential: state size mismatch");
    if (d_skip.defined() && d_skip.size() != D)
        throw std::invalid_argument("ssm_scan_sequential: d_skip extent mismatch");

    Tensor<T> y = Tensor<T>::zeros({L, D});
    const T* xp = x.data();
    T* yp = y.data();
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(int64_t(L) * D * N))
    for (int d = 0; d < D; ++d) {
        std::vector<T> h(static_cast<size_t>(N), T(0));
        for (int t = 0; t < L; ++t) {
            const T u = xp[int64_t(t) * D + d];
            T acc = T(0);
            for (int n = 0; n < N; ++n) {
                const T ab = a_tok ? a_bar.at(t, d, n) : a_bar.at(d, n);
                const T bb = b_tok ? b_bar.at(t, d, n) : b_bar.at(d, n);
                const T cv = c_tok ? c.at(t, d, n) : c.at(d, n);
                h[static_cast<size_t>(n)] = ab * h[static_cast<size_t>(n)] + bb * u;
                acc += cv * h[static_cast<size_t>(n)];
            }
            if (d_skip.defined()) acc += d_skip.data()[d] * u;
            yp[int64_t(t) * D + d] = acc;
        }
    }
    return y;
}

template <typename T>
Tensor<T> ssm_kernel(const Tensor<T>& a_bar, const Tensor<T>& b_bar, const Tensor<T>& c, int L) {
    if (a_bar.ndim() != 2 || b_bar.ndim() != 2 || c.ndim() != 2)
        throw std::invalid_argument("ssm_kernel: static (D, N) parameters required");
    if (!a_bar.same_dims(b_bar) || !a_bar.same_dims(c))
        throw std::invalid_argument("ssm_kernel: shape mismatch");
    if (L <= 0) throw std::invalid_argument("ssm_kernel: L must be positive");
    const int D = a_bar.dim(0), N = a_bar.dim(1);
    Tensor<T> k = Tensor<T>::zeros({D, L});
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(int64_t(D) * L * N))
    for (int d = 0; d < D; ++d) {
        for (int n = 0; n < N; ++n) {
            T pw = b_bar.at(d, n);  // a_bar^j * b_bar
            const T ab = a_bar.at(d, n);
            const T cv = c.at(d, n);
            for (int j = 0; j < L; ++j) {
                k.at(d, j) += cv * pw;
                pw *= ab;
            }
        }
    }
    return k;
}

template <typename T>
Tensor<T> ssm_conv_apply(const Tensor<T>& k_bar, const Tensor<T>& x, const Tensor<T>& d_skip) {
    if (k_bar.ndim() != 2 || x.ndim() != 2)
        throw std::invalid_argument("ssm_conv_apply: k (D, L) and x (L, D) required");
    const int D = k_bar.dim(0), L = k_bar.dim(1);
    if (x.dim(0) != L || x.dim(1) != D)
        throw std::invalid_argument("ssm_conv_apply: kernel/input length mismatch");
    if (d_skip.defined() && d_skip.size() != D)
        throw std::invalid_argument("ssm_conv_apply: d_skip extent mismatch");
    Tensor<T> y = Tensor<T>::zeros({L, D});
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(int64_t(D) * L * L / 2))
    for (int d = 0; d < D; ++d) {
        const T* kd = k_bar.data() + int64_t(d) * L;
        for (int t = 0; t < L; ++t) {
            T acc = T(0);
            for (int j = 0; j <= t; ++j) acc += kd[j] * x.at(t - j, d);
            if (d_skip.defined()) acc += d_skip.data()[d] * x.at(t, d);
            y.at(t, d) = acc;
        }
    }
    return y;
}

template <typename T>
Tensor<T> selective_scan(const Tensor<T>& u, const Tensor<T>& dt_raw, const Tensor<T>& a_log,
                         const Tensor<T>& b_seq, const Tensor<T>& c_seq, const Tensor<T>& d_skip) {
    if (u.ndim() != 3 || dt_raw.ndim() != 3)
        throw std::invalid_argument("selective_scan: u and dt_raw must be (B, L, D)");
    if (!u.same_dims(dt_raw)) throw std::invalid_argument("selective_scan: dt_raw shape mismatch");
    const int B = u.dim(0), L = u.dim(1), D = u.dim(2);
    if (a_log.ndim() != 2 || a_log.dim(0) != D)
        throw std::invalid_argument("selective_scan: a_log must be (D, N)");
    const int N = a_log.dim(1);
    if (b_seq.ndim() != 3 || b_seq.dim(0) != B || b_seq.dim(1) != L || b_seq.dim(2) != N)
        throw std::invalid_argument("selective_scan: b_seq must be (B, L, N)");
    if (!b_seq.same_dims(c_seq)) throw std::invalid_argument("selective_scan: c_seq shape mismatch");
    if (d_skip.defined() && d_skip.size() != D)
        throw std::invalid_argument("selective_scan: d_skip extent mismatch");

    const bool track = detail::recording(u, dt_raw, a_log, b_seq, c_seq) ||
                       (d_skip.defined() && detail::recording(d_skip));
    Tensor<T> y = Tensor<T>::zeros({B, L, D});
    // Hidden-state history is kept only when the tape needs it for BPTT.
    std::shared_ptr<std::vector<T>> h_store;
    if (track) h_store = std::make_shared<std::vector<T>>(size_t(B) * L * D * N, T(0));

    {
        const T* up = u.data();
        const T* dtp = dt_raw.data();
        const T* alp = a_log.data();
        const T* bp = b_seq.data();
        const T* cp = c_seq.data();
        const T* dp = d_skip.defined() ? d_skip.data() : nullptr;
        T* yp = y.data();
        T* hs = h_store ? h_store->data() : nullptr;
        const int64_t bd = int64_t(B) * D;
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(bd * L * N))
        for (int64_t bdi = 0; bdi < bd; ++bdi) {
            const int b = static_cast<int>(bdi / D);
            const int d = static_cast<int>(bdi % D);
            std::vector<T> a_row(static_cast<size_t>(N));
            for (int n = 0; n < N; ++n) a_row[static_cast<size_t>(n)] = -std::exp(alp[int64_t(d) * N + n]);
            std::vector<T> h(static_cast<size_t>(N), T(0));
            for (int t = 0; t < L; ++t) {
                const int64_t tok = int64_t(b) * L + t;
                const T delta = softplus_stable(dtp[tok * D + d]);
                const T uval = up[tok * D + d];
                T acc = T(0);
                for (int n = 0; n < N; ++n) {
                    const T a = a_row[static_cast<size_t>(n)];
                    const T z = delta * a;
                    const T abar = std::exp(z);
                    const T bbar = delta * phi1(z) * bp[tok * N + n];
                    T& hv = h[static_cast<size_t>(n)];
                    hv = abar * hv + bbar * uval;
                    acc += cp[tok * N + n] * hv;
                    if (hs) hs[(tok * D + d) * N + n] = hv;
                }
                if (dp) acc += dp[d] * uval;
                yp[tok * D + d] = acc;
            }
        }
    }
    check_finite(y, "selective_scan");

    if (track) {
        y.set_requires_grad(true);
        Tensor<T> uc = u, dtc = dt_raw, alc = a_log, bc = b_seq, cc = c_seq, dc = d_skip, yc = y;
        active_tape<T>()->record([uc, dtc, alc, bc, cc, dc, yc, h_store, B, L, D, N]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            const T* up = uc.data();
            const T* dtp = dtc.data();
            const T* alp = alc.data();
            const T* bp = bc.data();
            const T* cp = cc.data();
            const T* dp = dc.defined() ? dc.data() : nullptr;
            const T* hs = h_store->data();

            T* gu = uc.requires_grad() ? uc.grad() : nullptr;
            T* gdt = dtc.requires_grad() ? dtc.grad() : nullptr;
            T* gb = bc.requires_grad() ? bc.grad() : nullptr;
            T* gc = cc.requires_grad() ? cc.grad() : nullptr;
            const bool need_a = alc.requires_grad();
            const bool need_d = dc.defined() && dc.requires_grad();

            // Per-batch partials for the shared parameters keep the parallel
            // loop race-free; they are reduced in batch order afterwards.
            std::vector<T> ga_part(need_a ? size_t(B) * D * N : 0, T(0));
            std::vector<T> gd_part(need_d ? size_t(B) * D : 0, T(0));

#pragma omp parallel for schedule(static) num_threads(max_threads()) \
    if (par(int64_t(B) * L * D * N) && B > 1)
            for (int b = 0; b < B; ++b) {
                std::vector<T> gh(static_cast<size_t>(N));
                std::vector<T> a_row(static_cast<size_t>(N));
                for (int d = 0; d < D; ++d) {
                    for (int n = 0; n < N; ++n)
                        a_row[static_cast<size_t>(n)] = -std::exp(alp[int64_t(d) * N + n]);
                    std::fill(gh.begin(), gh.end(), T(0));
                    for (int t = L - 1; t >= 0; --t) {
                        const int64_t tok = int64_t(b) * L + t;
                        const T go = gy[tok * D + d];
                        const T dtr = dtp[tok * D + d];
                        const T delta = softplus_stable(dtr);
                        const T uval = up[tok * D + d];
                        T du_acc = (dp && gu) ? go * dp[d] : T(0);
                        T ddelta = T(0);
                        for (int n = 0; n < N; ++n) {
                            const T a = a_row[static_cast<size_t>(n)];
                            const T z = delta * a;
                            const T ez = std::exp(z);
                            const T p1 = phi1(z);
                            const T p1d = phi1_prime(z);
                            const T bv = bp[tok * N + n];
                            const T cv = cp[tok * N + n];
                            const T h_t = hs[(tok * D + d) * N + n];
                            const T h_prev =
                                t > 0 ? hs[((tok - 1) * D + d) * N + n] : T(0);
                            // y_t = sum_n c h_t (+ d u)
                            T& ghn = gh[static_cast<size_t>(n)];
                            ghn += go * cv;
                            if (gc) gc[tok * N + n] += go * h_t;
                            // h_t = abar h_{t-1} + (delta phi1(z) b) u
                            const T dabar = ghn * h_prev;
                            const T dbbar = ghn * uval;
                            du_acc += ghn * (delta * p1 * bv);
                            if (gb) gb[tok * N + n] += dbbar * delta * p1;
                            ddelta += dabar * a * ez + dbbar * bv * (p1 + z * p1d);
                            if (need_a)
                                ga_part[(size_t(b) * D + d) * N + n] +=
                                    dabar * delta * ez + dbbar * delta * delta * p1d * bv;
                            ghn *= ez;  // becomes dL/dh_{t-1}
                        }
                        if (gdt) gdt[tok * D + d] += ddelta * sigmoid_stable(dtr);
                        if (gu) gu[tok * D + d] += du_acc;
                        if (need_d) gd_part[size_t(b) * D + d] += go * uval;
                    }
                }
            }
            if (need_a) {
                T* ga = alc.grad();
                for (int b = 0; b < B; ++b)
                    for (int64_t i = 0; i < int64_t(D) * N; ++i) {
                        // chain through A = -exp(a_log): dA/da_log = A
                        const T a = -std::exp(alp[i]);
                        ga[i] += ga_part[size_t(b) * D * N + i] * a;
                    }
            }
            if (need_d) {
                T* gd = dc.grad();
                for (int b = 0; b < B; ++b)
                    for (int d = 0; d < D; ++d) gd[d] += gd_part[size_t(b) * D + d];
            }
        });
    }
    return y;
}

template <typename T>
void SsmParams<T>::init(int d_inner_, int n_state_, Rng& rng) {
    d_inner = d_inner_;
    n_state = n_state_;
    dt_rank = (d_inner + 15) / 16;
    a_log = Tensor<T>::zeros({d_inner, n_state});
    for (int d = 0; d < d_inner; ++d)
        for (int n = 0; n < n_state; ++n) a_log.at(d, n) = static_cast<T>(std::log(double(n + 1)));
    a_log.set_requires_grad(true);

    x_proj_w = Tensor<T>::zeros({dt_rank + 2 * n_state, d_inner});
    fill_kaiming_uniform(x_proj_w, d_inner, rng);
    x_proj_w.set_requires_grad(true);

    dt_proj_w = Tensor<T>::zeros({d_inner, dt_rank});
    fill_kaiming_uniform(dt_proj_w, dt_rank, rng);
    dt_proj_w.set_requires_grad(true);

    // bias such that softplus(bias) lands log-uniformly in [1e-3, 1e-1]
    dt_proj_b = Tensor<T>::zeros({d_inner});
    for (int d = 0; d < d_inner; ++d) {
        const double dt = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
        dt_proj_b.at(d) = static_cast<T>(std::log(std::expm1(dt)));
    }
    dt_proj_b.set_requires_grad(true);

    d_skip = Tensor<T>::full({d_inner}, T(1));
    d_skip.set_requires_grad(true);
}

template <typename T>
void SsmParams<T>::register_params(ParamRegistry<T>& r, const std::string& p) const {
    r.add_param(p + ".a_log", const_cast<Tensor<T>*>(&a_log));
    r.add_param(p + ".x_proj_w", const_cast<Tensor<T>*>(&x_proj_w));
    r.add_param(p + ".dt_proj_w", const_cast<Tensor<T>*>(&dt_proj_w));
    r.add_param(p + ".dt_proj_b", const_cast<Tensor<T>*>(&dt_proj_b));
    if (use_skip) r.add_param(p + ".d_skip", const_cast<Tensor<T>*>(&d_skip));
}

template <typename T>
Tensor<T> s6_forward(const Tensor<T>& x, const SsmParams<T>& p) {
    if (x.ndim() != 3 || x.dim(2) != p.d_inner)
        throw std::invalid_argument("s6_forward: x must be (B, L, d_inner)");
    Tensor<T> projected = linear(x, p.x_proj_w, Tensor<T>{});
    Tensor<T> dt_low = slice_last(projected, 0, p.dt_rank);
    Tensor<T> b_seq = slice_last(projected, p.dt_rank, p.dt_rank + p.n_state);
    Tensor<T> c_seq = slice_last(projected, p.dt_rank + p.n_state, p.dt_rank + 2 * p.n_state);
    Tensor<T> dt_raw = linear(dt_low, p.dt_proj_w, p.dt_proj_b);
    return selective_scan(x, dt_raw, p.a_log, b_seq, c_seq,
                          p.use_skip ? p.d_skip : Tensor<T>{});
}

template <typename T>
Tensor<T> scan_direction(const Tensor<T>& x, ScanDirection dir) {
    if (x.ndim() != 4) throw std::invalid_argument("scan_direction: rank-4 input required");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t L = int64_t(H) * W;
    Tensor<T> y = Tensor<T>::zeros({B, static_cast<int>(L), C});
    const T* xp = x.data();
    T* yp = y.data();
    const int64_t hw = L;
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(int64_t(B) * C * L))
    for (int b = 0; b < B; ++b)
        for (int64_t i = 0; i < L; ++i) {
            const int64_t g = scan_grid_offset(dir, i, H, W);
            T* out = yp + (int64_t(b) * L + i) * C;
            const T* in = xp + int64_t(b) * C * hw + g;
            for (int c = 0; c < C; ++c) out[c] = in[int64_t(c) * hw];
        }
    if (detail::recording(x)) {
        y.set_requires_grad(true);
        Tensor<T> xc = x, yc = y;
        active_tape<T>()->record([xc, yc, dir, B, C, H, W, L, hw]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            T* gx = xc.grad();
            for (int b = 0; b < B; ++b)
                for (int64_t i = 0; i < L; ++i) {
                    const int64_t g = scan_grid_offset(dir, i, H, W);
                    const T* grow = gy + (int64_t(b) * L + i) * C;
                    T* gin = gx + int64_t(b) * C * hw + g;
                    for (int c = 0; c < C; ++c) gin[int64_t(c) * hw] += grow[c];
                }
        });
    }
    return y;
}

template <typename T>
Tensor<T> unscan_direction(const Tensor<T>& seq, ScanDirection dir, int H, int W) {
    if (seq.ndim() != 3) throw std::invalid_argument("unscan_direction: rank-3 input required");
    const int B = seq.dim(0), C = seq.dim(2);
    const int64_t L = int64_t(H) * W;
    if (seq.dim(1) != L) throw std::invalid_argument("unscan_direction: grid size mismatch");
    Tensor<T> y = Tensor<T>::zeros({B, C, H, W});
    const T* sp = seq.data();
    T* yp = y.data();
#pragma omp parallel for schedule(static) num_threads(max_threads()) if (par(int64_t(B) * C * L))
    for (int b = 0; b < B; ++b)
        for (int64_t i = 0; i < L; ++i) {
            const int64_t g = scan_grid_offset(dir, i, H, W);
            const T* in = sp + (int64_t(b) * L + i) * C;
            T* out = yp + int64_t(b) * C * L + g;
            for (int c = 0; c < C; ++c) out[int64_t(c) * L] = in[c];
        }
    if (detail::recording(seq)) {
        y.set_requires_grad(true);
        Tensor<T> sc = seq, yc = y;
        active_tape<T>()->record([sc, yc, dir, B, C, H, W, L]() mutable {
            const T* gy = yc.grad_if_allocated();
            if (!gy) return;
            T* gs = sc.grad();
            for (int b = 0; b < B; ++b)
                for (int64_t i = 0; i < L; ++i) {
                    const int64_t g = scan_grid_offset(dir, i, H, W);
                    T* grow = gs + (int64_t(b) * L + i) * C;
                    const T* gin = gy + int64_t(b) * C * L + g;
                    for (int c = 0; c < C; ++c) grow[c] += gin[int64_t(c) * L];
                }
        });
    }
    return y;
}

template <typename T>
std::array<Tensor<T>, 4> cross_scan(const Tensor<T>& x) {
    return {scan_direction(x, ScanDirection::RowFwd), scan_direction(x, ScanDirection::RowRev),
            scan_direction(x, ScanDirection::ColFwd), scan_direction(x, ScanDirection::ColRev)};
}

template <typename T>
Tensor<T> cross_merge(const std::array<Tensor<T>, 4>& seqs, int H, int W) {
    Tensor<T> acc = unscan_direction(seqs[0], ScanDirection::RowFwd, H, W);
    acc = add(acc, unscan_direction(seqs[1], ScanDirection::RowRev, H, W));
    acc = add(acc, unscan_direction(seqs[2], ScanDirection::ColFwd, H, W));
    acc = add(acc, unscan_direction(seqs[3], ScanDirection::ColRev, H, W));
    return acc;
}

template <typename T>
void Ss2dBlock<T>::init(int channels_, int n_state, Rng& rng) {
    channels = channels_;
    d_inner = 2 * channels_;
    in_proj.init(channels, 2 * d_inner, 1, 1, 0, 1, /*bias=*/false, rng);
    dw.init(d_inner, d_inner, 3, 1, 1, d_inner, /*bias=*/true, rng);
    ssm.init(d_inner, n_state, rng);
    out_norm.init(d_inner);
    out_proj.init(d_inner, channels, 1, 1, 0, 1, /*bias=*/false, rng);
}

template <typename T>
Tensor<T> Ss2dBlock<T>::forward(const Tensor<T>& x) {
    if (x.ndim() != 4 || x.dim(1) != channels)
        throw std::invalid_argument("Ss2dBlock: channel count mismatch");
    const int H = x.dim(2), W = x.dim(3);
    Tensor<T> xz = in_proj.forward(x);
    Tensor<T> xs = slice_channels(xz, 0, d_inner);
    Tensor<T> z = slice_channels(xz, d_inner, 2 * d_inner);
    xs = silu(dw.forward(xs));
    std::array<Tensor<T>, 4> seqs = cross_scan(xs);
    std::array<Tensor<T>, 4> outs;
    for (int k = 0; k < 4; ++k) outs[static_cast<size_t>(k)] = s6_forward(seqs[static_cast<size_t>(k)], ssm);
    Tensor<T> merged = cross_merge(outs, H, W);
    Tensor<T> normed = out_norm.forward(merged);
    Tensor<T> gated = mul(normed, silu(z));
    tokens_last = int64_t(H) * W;
    return out_proj.forward(gated);
}

template <typename T>
void Ss2dBlock<T>::register_params(ParamRegistry<T>& r, const std::string& p) const {
    in_proj.register_params(r, p + ".in_proj");
    dw.register_params(r, p + ".dw");
    ssm.register_params(r, p + ".ssm");
    out_norm.register_params(r, p + ".norm");
    out_proj.register_params(r, p + ".out_proj");
}

#define TINYVIM_INSTANTIATE_SSM(T)                                                                \
    template void zoh_discretize(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                 Tensor<T>&, Tensor<T>&);                                         \
    template Tensor<T> ssm_scan_sequential(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                           const Tensor<T>&, const Tensor<T>&);                   \
    template Tensor<T> ssm_kernel(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int);    \
    template Tensor<T> ssm_conv_apply(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);     \
    template Tensor<T> selective_scan(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);     \
    template struct SsmParams<T>;                                                                 \
    template Tensor<T> s6_forward(const Tensor<T>&, const SsmParams<T>&);                         \
    template Tensor<T> scan_direction(const Tensor<T>&, ScanDirection);                           \
    template Tensor<T> unscan_direction(const Tensor<T>&, ScanDirection, int, int);               \
    template std::array<Tensor<T>, 4> cross_scan(const Tensor<T>&);                               \
    template Tensor<T> cross_merge(const std::array<Tensor<T>, 4>&, int, int);                    \
    template struct Ss2dBlock<T>;

TINYVIM_INSTANTIATE_SSM(float)
TINYVIM_INSTANTIATE_SSM(double)

#undef TINYVIM_INSTANTIATE_SSM

}  // namespace tinyvim
