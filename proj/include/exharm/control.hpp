#pragma once

// Command synthesis: fundamental level controller and the per-harmonic PI
// harmonization module acting on Fourier coefficients of the voltage.

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "exharm/error.hpp"
#include "exharm/spectrum.hpp"

namespace exharm {

struct PiGains {
    double kp = 0.0;  // V per unit excitation
    double ki = 0.0;  // V per unit excitation per second

    friend bool operator==(const PiGains&, const PiGains&) = default;
};

class Harmonizer {
public:
    Harmonizer() = default;

    Harmonizer(std::vector<int> harmonics, PiGains gains) : harmonics_(std::move(harmonics)), gains_(gains) {
        std::sort(harmonics_.begin(), harmonics_.end());
        harmonics_.erase(std::unique(harmonics_.begin(), harmonics_.end()), harmonics_.end());
        for (int h : harmonics_) require(h >= 2, "harmonized set must only contain h >= 2");
        require(std::isfinite(gains.kp) && std::isfinite(gains.ki), "harmonizer gains must be finite");
        require(gains.ki >= 0.0, "integral gain must be non-negative");
        integrators_.assign(harmonics_.size(), cplx{});
        commands_.assign(harmonics_.size(), cplx{});
    }

    bool enabled() const noexcept { return !harmonics_.empty(); }
    const std::vector<int>& harmonics() const noexcept { return harmonics_; }
    int max_harmonic() const noexcept { return harmonics_.empty() ? 1 : harmonics_.back(); }
    const PiGains& gains() const noexcept { return gains_; }

    /// Per-harmonic override; off by default (same gains for all harmonics).
    void override_gains(int h, PiGains gains) {
        require(index_of(h) >= 0, "override for a harmonic that is not harmonized");
        require(gains.ki >= 0.0, "integral gain must be non-negative");
        overrides_[h] = gains;
    }

    PiGains gains_for(int h) const {
        auto it = overrides_.find(h);
        return it == overrides_.end() ? gains_ : it->second;
    }

    cplx integrator(int h) const { return integrators_.at(checked_index(h)); }
    void set_integrator(int h, cplx value) { integrators_.at(checked_index(h)) = value; }
    cplx command(int h) const {
        const int i = index_of(h);
        return i < 0 ? cplx{} : commands_[static_cast<std::size_t>(i)];
    }

    /// err_h = -F_h;  I_h += dt err_h;  U_h = kp err_h + ki I_h.
    /// `freeze` holds the integrators (anti-windup at the voltage limit).
    void step(const HarmonicSpectrum& estimate, double dt, bool freeze = false) {
        require(estimate.order() >= max_harmonic(), "spectrum order below the harmonized set");
        for (std::size_t i = 0; i < harmonics_.size(); ++i) {
            const int h = harmonics_[i];
            const cplx err = -estimate[h];
            if (!freeze) integrators_[i] += dt * err;
            const PiGains g = gains_for(h);
            commands_[i] = g.kp * err + g.ki * integrators_[i];
        }
    }

    /// Writes U_h into the command spectrum for every h; zero outside the set.
    void write_commands(HarmonicSpectrum& command) const {
        for (int h = 2; h <= command.order(); ++h) command.set(h, this->command(h));
    }

    void reset() {
        std::fill(integrators_.begin(), integrators_.end(), cplx{});
        std::fill(commands_.begin(), commands_.end(), cplx{});
    }

private:
    int index_of(int h) const noexcept {
        auto it = std::lower_bound(harmonics_.begin(), harmonics_.end(), h);
        return (it != harmonics_.end() && *it == h) ? static_cast<int>(it - harmonics_.begin()) : -1;
    }
    std::size_t checked_index(int h) const {
        const int i = index_of(h);
        require(i >= 0, "harmonic not in harmonized set");
        return static_cast<std::size_t>(i);
    }

    std::vector<int> harmonics_;
    PiGains gains_;
    std::map<int, PiGains> overrides_;
    std::vector<cplx> integrators_;
    std::vector<cplx> commands_;
};

/// Integral level controller on |F_1| with the command phase pinned at zero.
class FundamentalController {
public:
    FundamentalController() = default;
    FundamentalController(double target, double gain, double voltage_limit, double initial_u1 = 0.0)
        : target_(target), gain_(gain), voltage_limit_(voltage_limit), u1_(initial_u1) {
        require(target > 0.0, "fundamental target level must be positive");
        require(gain >= 0.0, "fundamental controller gain must be non-negative");
        require(voltage_limit > 0.0, "voltage limit must be positive");
        clamp();
    }

    double target() const noexcept { return target_; }
    double gain() const noexcept { return gain_; }
    double voltage_limit() const noexcept { return voltage_limit_; }
    double u1() const noexcept { return u1_; }
    bool saturated() const noexcept { return saturated_; }

    void set_u1(double u1) { u1_ = u1; clamp(); }
    void set_target(double target) { require(target > 0.0, "target must be positive"); target_ = target; }

    /// |U_1| += k_f (target - |F_1|) dt, clamped to [0, voltage limit].
    /// Returns true if the command saturated on this step.
    bool step(const HarmonicSpectrum& estimate, double dt) {
        const double level = estimate.magnitude(1);
        if (!std::isfinite(level)) throw NumericalError("non-finite fundamental estimate");
        u1_ += gain_ * (target_ - level) * dt;
        return clamp();
    }

private:
    bool clamp() {
        saturated_ = u1_ > voltage_limit_;
        u1_ = std::clamp(u1_, 0.0, voltage_limit_);
        return saturated_;
    }

    double target_ = 1.0;
    double gain_ = 0.0;
    double voltage_limit_ = 10.0;
    double u1_ = 0.0;
    bool saturated_ = false;
};

/// u = Re{U_1 e^{i tau}} + Re{sum_{h>=2} U_h e^{i h tau}} (DC term included if set).
inline double synthesize_command(const HarmonicSpectrum& command, double tau) {
    if (!std::isfinite(tau)) throw ValidationError("command phase must be finite");
    return command.evaluate(tau);
}

} // namespace exharm
