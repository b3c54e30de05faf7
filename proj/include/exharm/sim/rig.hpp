#pragma once

// Virtual test rig: plant + adaptive filter + fundamental controller +
// harmonizer, advanced sample by sample. The plant is integrated with
// Dormand-Prince between samples while the command coefficients are held;
// filter and controllers are updated once per sample.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "exharm/control.hpp"
#include "exharm/estimator.hpp"
#include "exharm/model.hpp"
#include "exharm/sim/frequency.hpp"
#include "exharm/sim/integrator.hpp"

namespace exharm {

struct RigSettings {
    double sample_rate = 10'000.0;  // Hz
    IntegratorConfig integrator{};
    double noise_std = 0.0;         // additive Gaussian noise on the measured excitation
    std::uint64_t seed = 0;
    std::vector<double> observe_row;
    Frame frame = Frame::relative;
};

/// Per-sample signals, appended by Rig::run when supplied.
struct SampleLog {
    std::vector<double> time;
    std::vector<double> phase;
    std::vector<double> command;
    std::vector<double> excitation;
    std::vector<double> response;

    void clear() {
        time.clear();
        phase.clear();
        command.clear();
        excitation.clear();
        response.clear();
    }
    void reserve(std::size_t n) {
        time.reserve(n);
        phase.reserve(n);
        command.reserve(n);
        excitation.reserve(n);
        response.reserve(n);
    }
    std::size_t size() const noexcept { return time.size(); }
};

/// Decimated history of adaptive-filter estimates.
struct EstimateLog {
    std::size_t decimation = 10;
    std::vector<double> time;
    std::vector<HarmonicSpectrum> estimates;
};

class Rig {
public:
    Rig(Plant plant, AdaptiveFilter filter, FundamentalController fundamental, Harmonizer harmonizer,
        RigSettings settings)
        : plant_(std::move(plant)),
          filter_(std::move(filter)),
          fundamental_(fundamental),
          harmonizer_(std::move(harmonizer)),
          settings_(std::move(settings)),
          integrator_(settings_.integrator),
          x_(plant_.state_size(), 0.0),
          scratch_(plant_.state_size(), 0.0),
          command_(filter_.order()),
          rng_(settings_.seed) {
        plant_.validate();
        require(settings_.sample_rate > 0.0, "sample rate must be positive");
        require(harmonizer_.max_harmonic() <= filter_.order(), "adaptive filter order below harmonized set");
        if (settings_.observe_row.empty()) settings_.observe_row.assign(static_cast<std::size_t>(plant_.modes()), 0.0);
        require(settings_.observe_row.size() == static_cast<std::size_t>(plant_.modes()),
                "observation row has wrong length");
        refresh_command();
    }

    const Plant& plant() const noexcept { return plant_; }
    const AdaptiveFilter& filter() const noexcept { return filter_; }
    const FundamentalController& fundamental() const noexcept { return fundamental_; }
    FundamentalController& fundamental() noexcept { return fundamental_; }
    const Harmonizer& harmonizer() const noexcept { return harmonizer_; }
    Harmonizer& harmonizer() noexcept { return harmonizer_; }
    const RigSettings& settings() const noexcept { return settings_; }
    const HarmonicSpectrum& command() const noexcept { return command_; }
    const StateVector& state() const noexcept { return x_; }
    double time() const noexcept { return t_; }
    double phase() const noexcept { return tau_; }
    double omega() const noexcept { return omega_; }
    std::size_t saturated_samples() const noexcept { return saturated_samples_; }
    const DormandPrince& integrator() const noexcept { return integrator_; }

    void set_state(StateVector x) {
        require(x.size() == plant_.state_size(), "state has wrong dimension");
        x_ = std::move(x);
    }
    void set_omega(double omega) { omega_ = omega; }

    bool fundamental_active() const noexcept { return fundamental_active_; }
    bool harmonizer_active() const noexcept { return harmonizer_active_; }
    void set_fundamental_active(bool on) { fundamental_active_ = on; }
    void set_harmonizer_active(bool on) {
        harmonizer_active_ = on;
        if (!on) harmonizer_.reset();
        refresh_command();
    }

    /// Fixed voltage spectrum applied instead of the controller output; both
    /// controllers are frozen while it is set.
    void set_open_loop(std::optional<HarmonicSpectrum> command) {
        if (command) require(command->order() == command_.order(), "open-loop command has wrong order");
        open_loop_ = std::move(command);
        refresh_command();
    }
    bool open_loop() const noexcept { return open_loop_.has_value(); }

    /// Sample interval that places an integer number of samples in one period.
    double sample_interval(double omega) const {
        const double period = 2.0 * std::numbers::pi / omega;
        const double n = std::max(1.0, std::round(period * settings_.sample_rate));
        return period / n;
    }

    /// Advance `samples` samples of length dt along a frequency program that
    /// starts at the current time and phase.
    void run(FrequencyProgram program, std::size_t samples, double dt, SampleLog* log = nullptr,
             EstimateLog* estimates = nullptr) {
        require(dt > 0.0, "sample interval must be positive");
        program.t_start = t_;
        program.tau_start = tau_;
        auto system = [&](const StateVector& x, StateVector& dxdt, double t) {
            state_derivative(plant_, applied(command_.evaluate(program.phase(t))), x, dxdt);
        };
        std::normal_distribution<double> noise(0.0, 1.0);
        const double t0 = t_;
        for (std::size_t k = 1; k <= samples; ++k) {
            integrator_.advance(system, x_, t_, t0 + static_cast<double>(k) * dt);
            tau_ = program.phase(t_);
            omega_ = program.omega(t_);

            const double u_raw = command_.evaluate(tau_);
            const double u = applied(u_raw);
            const bool saturated = std::abs(u_raw) > fundamental_.voltage_limit();
            if (saturated) ++saturated_samples_;
            const double excitation = state_derivative(plant_, u, x_, scratch_);
            double measured = excitation;
            if (settings_.noise_std > 0.0) measured += settings_.noise_std * noise(rng_);

            filter_.step(measured, tau_, dt);
            if (!open_loop_) {
                if (fundamental_active_) fundamental_.step(filter_.estimate(), dt);
                if (harmonizer_active_) harmonizer_.step(filter_.estimate(), dt, saturated);
            }
            refresh_command();

            if (log) {
                log->time.push_back(t_);
                log->phase.push_back(tau_);
                log->command.push_back(u);
                log->excitation.push_back(measured);
                log->response.push_back(observe(plant_, x_, settings_.observe_row, settings_.frame).displacement);
            }
            if (estimates && (sample_counter_ % estimates->decimation == 0)) {
                estimates->time.push_back(t_);
                estimates->estimates.push_back(filter_.estimate());
            }
            ++sample_counter_;
        }
    }

    void hold(double omega, std::size_t samples, double dt, SampleLog* log = nullptr,
              EstimateLog* estimates = nullptr) {
        run(hold_frequency(omega), samples, dt, log, estimates);
    }

    void ramp(double to, double duration, double dt, SampleLog* log = nullptr, EstimateLog* estimates = nullptr) {
        const auto samples = static_cast<std::size_t>(std::max(1.0, std::round(duration / dt)));
        run(ramp_frequency(omega_, to, static_cast<double>(samples) * dt), samples, dt, log, estimates);
    }

    /// Sudden step of excitation frequency and fundamental voltage.
    void jump(double delta_omega, double delta_u1) {
        omega_ += delta_omega;
        fundamental_.set_u1(fundamental_.u1() + delta_u1);
        refresh_command();
    }

private:
    double applied(double u) const noexcept {
        const double lim = fundamental_.voltage_limit();
        return std::clamp(u, -lim, lim);
    }

    void refresh_command() {
        if (open_loop_) {
            command_ = *open_loop_;
            return;
        }
        command_.set(1, fundamental_.u1());
        if (harmonizer_active_) harmonizer_.write_commands(command_);
        else
            for (int h = 2; h <= command_.order(); ++h) command_.set(h, 0.0);
    }

    Plant plant_;
    AdaptiveFilter filter_;
    FundamentalController fundamental_;
    Harmonizer harmonizer_;
    RigSettings settings_;
    DormandPrince integrator_;
    StateVector x_;
    StateVector scratch_;
    HarmonicSpectrum command_;
    std::optional<HarmonicSpectrum> open_loop_;
    std::mt19937_64 rng_;
    double t_ = 0.0;
    double tau_ = 0.0;
    double omega_ = 0.0;
    bool fundamental_active_ = true;
    bool harmonizer_active_ = true;
    std::size_t saturated_samples_ = 0;
    std::size_t sample_counter_ = 0;
};

} // namespace exharm
