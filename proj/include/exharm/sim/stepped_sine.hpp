#pragma once

// Stepped-sine test protocol on the virtual rig: half-cosine ramps between
// grid points, fixed hold phases, FFT post-processing over an integer number
// of excitation periods, and the branch-jump maneuver.

#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include "exharm/bench/scenario.hpp"
#include "exharm/sim/fft.hpp"
#include "exharm/sim/rig.hpp"

namespace exharm {

struct PointRecord {
    double omega = 0.0;
    std::string segment = "main";     // "main" or "jump"
    HarmonicSpectrum excitation_fft;
    HarmonicSpectrum excitation_filter;
    HarmonicSpectrum response_fft;
    HarmonicSpectrum command;
    std::vector<double> fluctuation;  // per harmonic, relative to |F_1|
    double settle_deviation = 0.0;    // max_h |F_h(first half) - F_h(second half)| / target
    double response_drift = 0.0;      // |Q_1(first) - Q_1(second)| / |Q_1|
    bool settled = true;
    bool periodic = true;
    bool failed = false;
    std::string error;
    std::size_t plant_settles = 1;
    std::size_t saturated_samples = 0;
    double wall_seconds = 0.0;
    StateVector final_state;
    double final_phase = 0.0;         // excitation phase tau at final_state

    double level_ratio(double target) const { return excitation_fft.magnitude(1) / target; }
    /// max_{h in set} |F_h| / target.
    double distortion(const std::vector<int>& harmonics, double target) const {
        double d = 0.0;
        for (int h : harmonics)
            if (h <= excitation_fft.order()) d = std::max(d, excitation_fft.magnitude(h) / target);
        return d;
    }
};

struct RunRecord {
    std::string scenario;
    double target = 0.0;
    int order = 0;
    std::vector<int> harmonics;
    std::vector<PointRecord> points;
    double wall_seconds = 0.0;
    std::size_t plant_settles() const {
        std::size_t n = 0;
        for (const auto& p : points) n += p.plant_settles;
        return n;
    }
};

struct SteppedSineOptions {
    double settle_tolerance = 2e-3;   // fraction of the target level
    double periodicity_tolerance = 1e-3;
    bool abort_on_failure = false;
    std::size_t estimate_decimation = 20;
    /// Called with the window samples of every point (time-series dumps).
    std::function<void(std::size_t, const SampleLog&)> on_window;
    std::function<void(const PointRecord&)> on_point;
};

/// Samples per period at the rig's sample clock for frequency omega.
inline std::size_t samples_per_period(const Rig& rig, double omega) {
    const double period = 2.0 * std::numbers::pi / omega;
    return static_cast<std::size_t>(std::llround(period / rig.sample_interval(omega)));
}

/// Holds the current frequency for `hold_periods`, post-processes the last
/// `window_periods` and fills a point record (except segment bookkeeping).
inline PointRecord settle_and_measure(Rig& rig, double omega, int hold_periods, int window_periods, double target,
                                      const SteppedSineOptions& opt, std::size_t index = 0) {
    PointRecord rec;
    rec.omega = omega;
    const double dt = rig.sample_interval(omega);
    const std::size_t n = samples_per_period(rig, omega);
    const int order = rig.filter().order();
    const std::size_t saturated_before = rig.saturated_samples();

    rig.hold(omega, static_cast<std::size_t>(hold_periods - window_periods) * n, dt);
    SampleLog log;
    log.reserve(static_cast<std::size_t>(window_periods) * n);
    EstimateLog est{opt.estimate_decimation, {}, {}};
    rig.hold(omega, static_cast<std::size_t>(window_periods) * n, dt, &log, &est);

    const double tau0 = log.phase.front();
    rec.excitation_fft = fft_window_spectrum(log.excitation, window_periods, order, tau0);
    rec.response_fft = fft_window_spectrum(log.response, window_periods, order, tau0);
    rec.excitation_filter = rig.filter().estimate();
    rec.command = rig.command();
    rec.final_state = rig.state();
    rec.final_phase = rig.phase();
    rec.saturated_samples = rig.saturated_samples() - saturated_before;
    rec.fluctuation = fluctuation_metric(est.estimates, window_periods * 2.0 * std::numbers::pi / omega,
                                         2.0 * std::numbers::pi / omega);

    const int half = window_periods / 2;
    if (half >= 1) {
        const std::size_t len = static_cast<std::size_t>(half) * n;
        const std::span<const double> exc(log.excitation), resp(log.response);
        const std::size_t second = log.size() - len;
        const auto e1 = fft_window_spectrum(exc.first(len), half, order, log.phase[0]);
        const auto e2 = fft_window_spectrum(exc.subspan(second, len), half, order, log.phase[second]);
        const auto r1 = fft_window_spectrum(resp.first(len), half, 1, log.phase[0]);
        const auto r2 = fft_window_spectrum(resp.subspan(second, len), half, 1, log.phase[second]);
        for (int h = 0; h <= order; ++h)
            rec.settle_deviation = std::max(rec.settle_deviation, std::abs(e1[h] - e2[h]) / target);
        const double q = std::max(std::abs(r2[1]), 1e-300);
        rec.response_drift = std::abs(r1[1] - r2[1]) / q;
    }
    rec.settled = rec.settle_deviation < opt.settle_tolerance;
    rec.periodic = rec.response_drift < opt.periodicity_tolerance;
    if (opt.on_window) opt.on_window(index, log);
    return rec;
}

/// Builds a rig at rest for the scenario.
inline Rig make_rig(const Scenario& sc) {
    RigSettings rs;
    rs.sample_rate = sc.simulation.sample_rate;
    rs.integrator = sc.simulation.integrator;
    rs.noise_std = sc.noise.std;
    rs.seed = sc.seed;
    rs.observe_row = sc.plant.structure.shape(sc.plant.observe_location);
    Rig rig(sc.plant.build(), sc.make_filter(), sc.make_fundamental(), sc.make_harmonizer(), rs);
    rig.set_fundamental_active(sc.control.fundamental_enabled);
    rig.set_harmonizer_active(sc.control.harmonizer_enabled && !sc.control.harmonics.empty());
    return rig;
}

/// Steps the rig from its current frequency to each grid frequency in turn.
inline void step_through(Rig& rig, const Scenario& sc, const SteppedSineSchedule& schedule,
                         const std::vector<double>& grid, const std::string& segment, bool ramp_first,
                         const SteppedSineOptions& opt, RunRecord& record) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        const double omega = grid[i];
        PointRecord rec;
        try {
            if (ramp_first || i > 0) rig.ramp(omega, sc.ramp_duration(), rig.sample_interval(omega));
            else rig.set_omega(omega);
            rec = settle_and_measure(rig, omega, schedule.hold_periods, schedule.window_periods,
                                     sc.control.target_level, opt, record.points.size());
        } catch (const NumericalError& e) {
            rec.omega = omega;
            rec.failed = true;
            rec.error = e.what();
            if (opt.abort_on_failure) throw;
        }
        rec.segment = segment;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        record.points.push_back(rec);
        if (opt.on_point) opt.on_point(record.points.back());
        if (rec.failed) return;  // rig state is no longer meaningful
    }
}

/// Sudden increase of frequency and fundamental voltage, a hold at the landing
/// frequency, then stepping along the continuation grid. Controllers stay on.
inline void jump_and_continue(Rig& rig, const Scenario& sc, const SteppedSineSchedule& schedule, const JumpSpec& jump,
                              const SteppedSineOptions& opt, RunRecord& record) {
    rig.jump(jump.delta_omega, jump.delta_u1);
    step_through(rig, sc, schedule, {rig.omega()}, "jump", false, opt, record);
    if (record.points.back().failed || jump.continuation.empty()) return;
    step_through(rig, sc, schedule, jump.continuation, "jump", true, opt, record);
}

inline RunRecord run_stepped_sine(const Scenario& sc, const SteppedSineSchedule& schedule,
                                  const SteppedSineOptions& opt = {}) {
    sc.validate();
    schedule.validate();
    const auto start = std::chrono::steady_clock::now();
    RunRecord record;
    record.scenario = sc.name;
    record.target = sc.control.target_level;
    record.order = sc.estimator.order;
    record.harmonics = sc.control.harmonizer_enabled ? sc.control.harmonics : std::vector<int>{};

    Rig rig = make_rig(sc);
    if (!schedule.jump) {
        step_through(rig, sc, schedule, schedule.omegas, "main", false, opt, record);
    } else {
        const auto& j = *schedule.jump;
        std::vector<double> main(schedule.omegas.begin(), schedule.omegas.begin() + static_cast<long>(j.after_point) + 1);
        step_through(rig, sc, schedule, main, "main", false, opt, record);
        if (!record.points.empty() && !record.points.back().failed) {
            jump_and_continue(rig, sc, schedule, j, opt, record);
        }
    }
    record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return record;
}

} // namespace exharm
