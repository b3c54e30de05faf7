#pragma once

#include <cmath>
#include <numbers>

#include "exharm/error.hpp"

namespace exharm {

/// Excitation frequency over a segment: a half-cosine blend from `from` to
/// `to` over `duration`, constant afterwards. The phase is the exact integral.
struct FrequencyProgram {
    double t_start = 0.0;
    double tau_start = 0.0;
    double from = 0.0;
    double to = 0.0;
    double duration = 0.0;

    double omega(double t) const noexcept {
        const double s = t - t_start;
        if (duration <= 0.0 || s >= duration) return to;
        if (s <= 0.0) return from;
        return from + (to - from) * 0.5 * (1.0 - std::cos(std::numbers::pi * s / duration));
    }

    double phase(double t) const noexcept {
        const double s = t - t_start;
        if (duration <= 0.0) return tau_start + to * s;
        if (s >= duration) return tau_start + 0.5 * (from + to) * duration + to * (s - duration);
        return tau_start + from * s +
               0.5 * (to - from) * (s - duration / std::numbers::pi * std::sin(std::numbers::pi * s / duration));
    }
};

inline FrequencyProgram hold_frequency(double omega, double t_start = 0.0, double tau_start = 0.0) {
    return {t_start, tau_start, omega, omega, 0.0};
}

inline FrequencyProgram ramp_frequency(double from, double to, double duration, double t_start = 0.0,
                                       double tau_start = 0.0) {
    require(duration > 0.0, "ramp duration must be positive");
    return {t_start, tau_start, from, to, duration};
}

} // namespace exharm
