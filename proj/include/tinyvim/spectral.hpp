#pragma once

#include <complex>
#include <string>
#include <vector>

#include "tinyvim/tensor.hpp"

namespace tinyvim {

// 2D DFT of a real H x W grid, exact DFT semantics. Power-of-two dims take
// the radix-2 path, everything else a direct transform; output is row-major
// H x W complex, DC at (0, 0).
std::vector<std::complex<double>> fft2d(const double* x, int H, int W);

// fftshift: DC moved to (H/2, W/2).
std::vector<std::complex<double>> fftshift2d(const std::vector<std::complex<double>>& s, int H,
                                             int W);

struct SpectrumReport {
    int height = 0, width = 0, channels = 0;
    // center-shifted magnitude per channel (averaged over batch), C x H x W
    std::vector<double> magnitude;
    // (normalized frequency in [0, 1], log amplitude minus its value at f=0)
    std::vector<std::pair<double, double>> rla_curve;
    double energy_ratio = 0.0;  // fraction of spectral energy inside the rho disc
    double rho = 0.0;
};

// Fig. 2(b)-style curve: per sample and channel the shifted amplitude
// spectrum, averaged, then radially binned into ceil(H/2)+1 annuli at
// normalized radius k/(H/2), logged, and referenced to f = 0. Square
// features required.
template <typename T>
std::vector<std::pair<double, double>> relative_log_amplitude(const Tensor<T>& features);

// Energy inside normalized radius rho over total energy, on the shifted
// spectrum aggregated over batch and channels. Radius is normalized by the
// largest grid radius so rho = 1 always covers everything.
template <typename T>
double low_freq_energy_ratio(const Tensor<T>& features, double rho);

template <typename T>
SpectrumReport analyze_spectrum(const Tensor<T>& features, double rho);

// Per-channel log-magnitude grids of batch item 0, min-max normalized,
// written as 8-bit binary PGM files "<prefix>_ch<k>.pgm". Returns the paths.
template <typename T>
std::vector<std::string> export_magnitude_grid(const Tensor<T>& features,
                                               const std::string& prefix);

// rla curve as CSV with header freq,delta_log_amp.
void write_rla_csv(const std::vector<std::pair<double, double>>& curve, const std::string& path);

}  // namespace tinyvim
