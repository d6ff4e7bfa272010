#include "tinyvim/spectral.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace tinyvim {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// iterative radix-2 Cooley-Tukey, in place
void fft1d_pow2(std::complex<double>* a, int n) {
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / len;
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

void dft1d_direct(const std::complex<double>* in, std::complex<double>* out, int n) {
    for (int k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (int t = 0; t < n; ++t) {
            const double ang = -2.0 * M_PI * double(k) * double(t) / double(n);
            acc += in[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
}

void fft1d(std::vector<std::complex<double>>& line) {
    const int n = static_cast<int>(line.size());
    if (n == 1) return;
    if (is_pow2(n)) {
        fft1d_pow2(line.data(), n);
        return;
    }
    std::vector<std::complex<double>> out(line.size());
    dft1d_direct(line.data(), out.data(), n);
    line = std::move(out);
}

// Normalizes features to a (B, C, H, W) dims view.
template <typename T>
std::array<int, 4> feature_dims(const Tensor<T>& f) {
    switch (f.ndim()) {
        case 2: return {1, 1, f.dim(0), f.dim(1)};
        case 3: return {1, f.dim(0), f.dim(1), f.dim(2)};
        case 4: return {f.dim(0), f.dim(1), f.dim(2), f.dim(3)};
        default:
            throw std::invalid_argument("spectral: rank-2/3/4 features required");
    }
}

template <typename T>
std::vector<std::complex<double>> channel_spectrum(const T* plane, int H, int W) {
    std::vector<double> buf(static_cast<size_t>(H) * W);
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<double>(plane[i]);
    return fft2d(buf.data(), H, W);
}

}  // namespace

std::vector<std::complex<double>> fft2d(const double* x, int H, int W) {
    if (H < 1 || W < 1) throw std::invalid_argument("fft2d: dims must be positive");
    std::vector<std::complex<double>> grid(static_cast<size_t>(H) * W);
    for (int64_t i = 0; i < int64_t(H) * W; ++i) grid[static_cast<size_t>(i)] = {x[i], 0.0};
    std::vector<std::complex<double>> line(static_cast<size_t>(W));
    for (int h = 0; h < H; ++h) {
        for (int w = 0; w < W; ++w) line[static_cast<size_t>(w)] = grid[static_cast<size_t>(h) * W + w];
        fft1d(line);
        for (int w = 0; w < W; ++w) grid[static_cast<size_t>(h) * W + w] = line[static_cast<size_t>(w)];
    }
    std::vector<std::complex<double>> col(static_cast<size_t>(H));
    for (int w = 0; w < W; ++w) {
        for (int h = 0; h < H; ++h) col[static_cast<size_t>(h)] = grid[static_cast<size_t>(h) * W + w];
        fft1d(col);
        for (int h = 0; h < H; ++h) grid[static_cast<size_t>(h) * W + w] = col[static_cast<size_t>(h)];
    }
    return grid;
}

std::vector<std::complex<double>> fftshift2d(const std::vector<std::complex<double>>& s, int H,
                                             int W) {
    std::vector<std::complex<double>> out(s.size());
    const int sh = H - H / 2, sw = W - W / 2;  // DC lands at (H/2, W/2)
    for (int u = 0; u < H; ++u)
        for (int v = 0; v < W; ++v)
            out[static_cast<size_t>(u) * W + v] =
                s[static_cast<size_t>((u + sh) % H) * W + (v + sw) % W];
    return out;
}

template <typename T>
std::vector<std::pair<double, double>> relative_log_amplitude(const Tensor<T>& features) {
    const auto [B, C, H, W] = feature_dims(features);
    if (H != W) throw std::invalid_argument("relative_log_amplitude: square features required");
    if (B < 1) throw std::invalid_argument("relative_log_amplitude: empty batch");
    std::vector<double> avg(static_cast<size_t>(H) * W, 0.0);
    const int64_t hw = int64_t(H) * W;
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            auto spec = channel_spectrum(features.data() + (int64_t(b) * C + c) * hw, H, W);
            auto shifted = fftshift2d(spec, H, W);
            for (size_t i = 0; i < shifted.size(); ++i) avg[i] += std::abs(shifted[i]);
        }
    const double scale = 1.0 / (double(B) * double(C));
    for (auto& v : avg) v *= scale;

    const int kmax = (H + 1) / 2;  // ceil(H/2) annuli beyond DC
    std::vector<double> bin_sum(static_cast<size_t>(kmax) + 1, 0.0);
    std::vector<int64_t> bin_cnt(static_cast<size_t>(kmax) + 1, 0);
    const int cy = H / 2, cx = W / 2;
    for (int u = 0; u < H; ++u)
        for (int v = 0; v < W; ++v) {
            const double dist = std::hypot(double(u - cy), double(v - cx));
            const int k = static_cast<int>(std::lround(dist));
            if (k > kmax) continue;  // corner cells beyond the f=1 circle
            bin_sum[static_cast<size_t>(k)] += avg[static_cast<size_t>(u) * W + v];
            bin_cnt[static_cast<size_t>(k)] += 1;
        }
    std::vector<std::pair<double, double>> curve;
    const double log0 = std::log(bin_sum[0] / double(bin_cnt[0]));
    for (int k = 0; k <= kmax; ++k) {
        if (bin_cnt[static_cast<size_t>(k)] == 0) continue;
        const double amp = bin_sum[static_cast<size_t>(k)] / double(bin_cnt[static_cast<size_t>(k)]);
        const double f = double(k) / (double(H) / 2.0);
        curve.emplace_back(f, k == 0 ? 0.0 : std::log(amp) - log0);
    }
    return curve;
}

template <typename T>
double low_freq_energy_ratio(const Tensor<T>& features, double rho) {
    if (rho <= 0.0 || rho > 1.0)
        throw std::invalid_argument("low_freq_energy_ratio: rho must be in (0, 1]");
    const auto [B, C, H, W] = feature_dims(features);
    const int64_t hw = int64_t(H) * W;
    const int cy = H / 2, cx = W / 2;
    // largest grid radius, so rho = 1 covers every bin including corners
    double rmax = 0.0;
    for (int u = 0; u < H; ++u)
        for (int v = 0; v < W; ++v)
            rmax = std::max(rmax, std::hypot(double(u - cy), double(v - cx)));
    double inside = 0.0, total = 0.0;
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            auto spec = channel_spectrum(features.data() + (int64_t(b) * C + c) * hw, H, W);
            auto shifted = fftshift2d(spec, H, W);
            for (int u = 0; u < H; ++u)
                for (int v = 0; v < W; ++v) {
                    const double e = std::norm(shifted[static_cast<size_t>(u) * W + v]);
                    const double nr =
                        rmax == 0.0 ? 0.0
                                    : std::hypot(double(u - cy), double(v - cx)) / rmax;
                    total += e;
                    if (nr <= rho) inside += e;
                }
        }
    if (total == 0.0) throw std::runtime_error("low_freq_energy_ratio: zero-energy input");
    return inside / total;
}

template <typename T>
SpectrumReport analyze_spectrum(const Tensor<T>& features, double rho) {
    const auto [B, C, H, W] = feature_dims(features);
    SpectrumReport rep;
    rep.height = H;
    rep.width = W;
    rep.channels = C;
    rep.rho = rho;
    rep.magnitude.assign(static_cast<size_t>(C) * H * W, 0.0);
    const int64_t hw = int64_t(H) * W;
    for (int c = 0; c < C; ++c) {
        for (int b = 0; b < B; ++b) {
            auto spec = channel_spectrum(features.data() + (int64_t(b) * C + c) * hw, H, W);
            auto shifted = fftshift2d(spec, H, W);
            for (int64_t i = 0; i < hw; ++i)
                rep.magnitude[static_cast<size_t>(c * hw + i)] += std::abs(shifted[static_cast<size_t>(i)]);
        }
        for (int64_t i = 0; i < hw; ++i) rep.magnitude[static_cast<size_t>(c * hw + i)] /= double(B);
    }
    if (H == W) rep.rla_curve = relative_log_amplitude(features);
    rep.energy_ratio = low_freq_energy_ratio(features, rho);
    return rep;
}

template <typename T>
std::vector<std::string> export_magnitude_grid(const Tensor<T>& features,
                                               const std::string& prefix) {
    const auto [B, C, H, W] = feature_dims(features);
    (void)B;
    const int64_t hw = int64_t(H) * W;
    std::vector<std::string> paths;
    for (int c = 0; c < C; ++c) {
        auto spec = channel_spectrum(features.data() + int64_t(c) * hw, H, W);
        auto shifted = fftshift2d(spec, H, W);
        std::vector<double> lm(static_cast<size_t>(hw));
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int64_t i = 0; i < hw; ++i) {
            lm[static_cast<size_t>(i)] = std::log1p(std::abs(shifted[static_cast<size_t>(i)]));
            lo = std::min(lo, lm[static_cast<size_t>(i)]);
            hi = std::max(hi, lm[static_cast<size_t>(i)]);
        }
        std::string bytes;
        bytes.reserve(static_cast<size_t>(hw));
        const double range = hi - lo;
        for (int64_t i = 0; i < hw; ++i) {
            const double v = range > 0.0 ? (lm[static_cast<size_t>(i)] - lo) / range : 0.0;
            bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
        }
        const std::string path = prefix + "_ch" + std::to_string(c) + ".pgm";
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("export_magnitude_grid: cannot write " + path);
        f << "P5\n" << W << " " << H << "\n255\n";
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw std::runtime_error("export_magnitude_grid: write failed for " + path);
        paths.push_back(path);
    }
    return paths;
}

void write_rla_csv(const std::vector<std::pair<double, double>>& curve, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("write_rla_csv: cannot write " + path);
    f << "freq,delta_log_amp\n";
    f << std::setprecision(17);
    for (const auto& [freq, v] : curve) f << freq << "," << v << "\n";
    if (!f) throw std::runtime_error("write_rla_csv: write failed for " + path);
}

#define TINYVIM_INSTANTIATE_SPECTRAL(T)                                                       \
    template std::vector<std::pair<double, double>> relative_log_amplitude(const Tensor<T>&); \
    template double low_freq_energy_ratio(const Tensor<T>&, double);                          \
    template SpectrumReport analyze_spectrum(const Tensor<T>&, double);                       \
    template std::vector<std::string> export_magnitude_grid(const Tensor<T>&,                 \
                                                            const std::string&);

TINYVIM_INSTANTIATE_SPECTRAL(float)
TINYVIM_INSTANTIATE_SPECTRAL(double)

#undef TINYVIM_INSTANTIATE_SPECTRAL

}  // namespace tinyvim
