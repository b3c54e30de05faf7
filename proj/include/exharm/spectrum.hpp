#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "exharm/error.hpp"

namespace exharm {

using cplx = std::complex<double>;

/// Truncated Fourier series f(tau) = F_0 + Re sum_{h=1..H} F_h e^{i h tau}.
///
/// The DC coefficient is kept real; every spectrum in the project (applied
/// force, voltage command, response) uses this convention.
class HarmonicSpectrum {
public:
    HarmonicSpectrum() : coeffs_(2) {}
    explicit HarmonicSpectrum(int order) : coeffs_(static_cast<std::size_t>(order) + 1) {
        require(order >= 0, "spectrum order must be non-negative");
    }

    int order() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }

    cplx operator[](int h) const { return coeffs_.at(static_cast<std::size_t>(h)); }

    void set(int h, cplx value) {
        if (h == 0) value = cplx(value.real(), 0.0);
        coeffs_.at(static_cast<std::size_t>(h)) = value;
    }

    void add(int h, cplx delta) { set(h, (*this)[h] + delta); }

    double dc() const noexcept { return coeffs_.front().real(); }
    double magnitude(int h) const { return std::abs((*this)[h]); }

    const std::vector<cplx>& coefficients() const noexcept { return coeffs_; }

    /// Evaluates the series at phase tau.
    double evaluate(double tau) const noexcept {
        const cplx rot(std::cos(tau), std::sin(tau));
        cplx e = rot;
        double value = coeffs_.front().real();
        for (std::size_t h = 1; h < coeffs_.size(); ++h) {
            value += (coeffs_[h] * e).real();
            e *= rot;
        }
        return value;
    }

    /// Coefficients of f(tau - shift): F_h e^{-i h shift}.
    HarmonicSpectrum shifted(double shift) const {
        HarmonicSpectrum out(order());
        for (int h = 0; h <= order(); ++h)
            out.set(h, (*this)[h] * std::polar(1.0, -h * shift));
        return out;
    }

    /// Copy truncated or zero-padded to the given order.
    HarmonicSpectrum resized(int order) const {
        HarmonicSpectrum out(order);
        for (int h = 0; h <= std::min(order, this->order()); ++h) out.set(h, (*this)[h]);
        return out;
    }

    friend bool operator==(const HarmonicSpectrum&, const HarmonicSpectrum&) = default;

private:
    std::vector<cplx> coeffs_;
};

} // namespace exharm
