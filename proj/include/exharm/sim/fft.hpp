#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "exharm/error.hpp"
#include "exharm/spectrum.hpp"

namespace exharm {

/// Fourier coefficients of uniformly sampled data spanning exactly `periods`
/// fundamental periods (N dt = periods T, first sample at phase tau_start).
/// Rectangular window; coefficients are referred to the excitation phase tau.
inline HarmonicSpectrum fft_window_spectrum(std::span<const double> samples, int periods, int order,
                                            double tau_start = 0.0) {
    if (periods < 1) throw ValidationError("FFT window shorter than one period");
    const std::size_t n = samples.size();
    require(order >= 0, "spectrum order must be non-negative");
    require(static_cast<std::size_t>(order) * static_cast<std::size_t>(periods) * 2 < n,
            "too few samples per period for the requested order");

    std::vector<double> in(samples.begin(), samples.end());
    std::vector<std::complex<double>> out(n / 2 + 1);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(),
                                          reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);

    HarmonicSpectrum spec(order);
    const double scale = 1.0 / static_cast<double>(n);
    spec.set(0, out[0] * scale);
    for (int h = 1; h <= order; ++h) {
        const auto bin = static_cast<std::size_t>(h) * static_cast<std::size_t>(periods);
        spec.set(h, 2.0 * scale * out[bin] * std::polar(1.0, -h * tau_start));
    }
    return spec;
}

} // namespace exharm
