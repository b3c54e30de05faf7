#pragma once

// Steady-flow Fourier coefficient estimation: time-continuous LMS adaptive
// filter, discretised with explicit Euler at the sample rate.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "exharm/error.hpp"
#include "exharm/spectrum.hpp"

namespace exharm {

class AdaptiveFilter {
public:
    AdaptiveFilter(int order, double cutoff) : estimate_(order), cutoff_(cutoff) {
        require(order >= 1, "adaptive filter order must be >= 1");
        require(cutoff > 0.0 && std::isfinite(cutoff), "adaptive filter cutoff must be positive");
    }

    int order() const noexcept { return estimate_.order(); }
    double cutoff() const noexcept { return cutoff_; }
    const HarmonicSpectrum& estimate() const noexcept { return estimate_; }

    /// True once a step with dt * cutoff > 0.1 has been taken.
    bool coarse_step_seen() const noexcept { return coarse_step_seen_; }

    void reset(const HarmonicSpectrum& estimate) {
        require(estimate.order() == order(), "estimate order mismatch");
        estimate_ = estimate;
    }

    /// One explicit-Euler step of
    ///   dF_h/dt = 2 w_LP e^{-i h tau} (f - Re sum_k F_k e^{i k tau}),  h >= 1,
    /// with gain w_LP on the DC channel.
    void step(double sample, double tau, double dt) {
        if (!std::isfinite(sample)) throw NumericalError("non-finite sample fed to adaptive filter");
        require(dt > 0.0, "filter step must be positive");
        if (dt * cutoff_ > 0.1) coarse_step_seen_ = true;

        const double error = sample - estimate_.evaluate(tau);
        estimate_.add(0, cutoff_ * dt * error);
        const double gain = 2.0 * cutoff_ * dt * error;
        const cplx rot(std::cos(tau), -std::sin(tau));
        cplx e = rot;
        for (int h = 1; h <= order(); ++h) {
            estimate_.add(h, gain * e);
            e *= rot;
        }
    }

private:
    HarmonicSpectrum estimate_;
    double cutoff_;
    bool coarse_step_seen_ = false;
};

/// Per-harmonic fluctuation over a history of filter snapshots: the maximum
/// deviation of |F_h| from its window mean, normalised by the mean |F_1|.
/// `duration` and `fundamental_period` guard the >= 5 period precondition.
inline std::vector<double> fluctuation_metric(std::span<const HarmonicSpectrum> history, double duration,
                                              double fundamental_period) {
    if (history.empty()) throw ValidationError("fluctuation metric needs a non-empty history");
    require(duration >= 5.0 * fundamental_period * (1.0 - 1e-9), "fluctuation window must cover >= 5 periods");
    const int order = history.front().order();
    std::vector<double> mean(static_cast<std::size_t>(order) + 1, 0.0);
    for (const auto& s : history)
        for (int h = 0; h <= order; ++h) mean[h] += s.magnitude(h);
    for (double& m : mean) m /= static_cast<double>(history.size());

    const double scale = order >= 1 ? mean[1] : 0.0;
    std::vector<double> metric(mean.size(), 0.0);
    for (const auto& s : history)
        for (int h = 0; h <= order; ++h) metric[h] = std::max(metric[h], std::abs(s.magnitude(h) - mean[h]));
    if (scale > 0.0)
        for (double& v : metric) v /= scale;
    return metric;
}

} // namespace exharm
