#pragma once

// Heuristic tuning at a representative point: largest admissible adaptive
// filter cutoff from an open-loop record, then proportional and integral gain
// sweeps until oscillation onset, each selected at half its critical value.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exharm/bench/scenario.hpp"
#include "exharm/error.hpp"
#include "exharm/estimator.hpp"
#include "exharm/sim/stepped_sine.hpp"

namespace exharm {

struct OnsetOptions {
    double threshold_fraction = 0.05;  // of the target level
    int window_periods = 10;           // excitation periods per window
    int min_history_periods = 20;
};

struct OnsetResult {
    bool fired = false;
    int harmonic = 0;
    std::size_t window = 0;            // index of the window that fired
    std::vector<double> peak_to_peak;  // per window, max over harmonics
};

/// Coefficient histories sampled every `sample_dt` seconds at excitation
/// frequency omega. Fires when the windowed peak-to-peak of any |F_h| grows
/// from one window to the next and exceeds the threshold.
inline OnsetResult detect_oscillation_onset(std::span<const HarmonicSpectrum> history, double sample_dt, double omega,
                                            double target, const std::vector<int>& harmonics,
                                            const OnsetOptions& opt = {}) {
    require(sample_dt > 0.0 && omega > 0.0 && target > 0.0, "onset detector needs positive dt, frequency and level");
    require(opt.window_periods >= 1, "onset window must span at least one period");
    const double period = 2.0 * std::numbers::pi / omega;
    const double span = static_cast<double>(history.size()) * sample_dt;
    if (span < opt.min_history_periods * period)
        throw ValidationError("onset detector needs at least " + std::to_string(opt.min_history_periods) +
                              " periods of history");
    const auto per_window = static_cast<std::size_t>(std::max(1.0, std::round(opt.window_periods * period / sample_dt)));
    const std::size_t windows = history.size() / per_window;
    OnsetResult out;
    std::vector<double> previous(harmonics.size(), INFINITY);
    for (std::size_t w = 0; w < windows; ++w) {
        double worst = 0.0;
        for (std::size_t k = 0; k < harmonics.size(); ++k) {
            const int h = harmonics[k];
            double lo = INFINITY, hi = -INFINITY;
            for (std::size_t i = w * per_window; i < (w + 1) * per_window; ++i) {
                const double m = history[i].magnitude(h);
                lo = std::min(lo, m);
                hi = std::max(hi, m);
            }
            const double p2p = hi - lo;
            worst = std::max(worst, p2p);
            if (!out.fired && w > 0 && p2p > previous[k] && p2p > opt.threshold_fraction * target) {
                out.fired = true;
                out.harmonic = h;
                out.window = w;
            }
            previous[k] = p2p;
        }
        out.peak_to_peak.push_back(worst);
    }
    return out;
}

struct TuningOptions {
    double epsilon_tol = 0.01;          // admissible fluctuation (fraction of |F_1|) is half of this
    std::vector<double> cutoff_grid;    // w_LP / w_1; default: 9 log-spaced values over [0.01, 1]
    double fallback_cutoff = 0.1;       // w_LP / w_1 for the gain sweeps when the scan is uninformative
    double gain_ratio = 1.5;
    double kp_start = 0.5;              // k_p G/R
    double kp_max = 50.0;
    double ki_start = 0.25;             // k_i G/(R w_LP)
    double ki_max = 50.0;
    int settle_periods = 400;           // fundamental-only settle before each trial
    int record_periods = 200;           // open-loop record for the cutoff scan
    int trial_periods = 1200;           // closed-loop observation per gain trial
    std::size_t decimation = 10;
    OnsetOptions onset{};

    std::vector<double> cutoffs() const {
        if (!cutoff_grid.empty()) return cutoff_grid;
        std::vector<double> g;
        for (int i = 0; i <= 8; ++i) g.push_back(std::pow(10.0, -2.0 + 0.25 * i));
        return g;
    }
};

struct CutoffTrial {
    double cutoff_over_omega1 = 0.0;
    double fluctuation = 0.0;  // max over harmonics
    bool admissible = false;
};

struct GainTrial {
    double normalized = 0.0;
    bool onset = false;
    int harmonic = 0;
    double max_peak_to_peak = 0.0;
};

struct TuningReport {
    double omega = 0.0;
    double level = 0.0;
    std::vector<CutoffTrial> cutoff_trials;
    double cutoff_over_omega1 = 0.0;    // largest admissible on the scan grid
    double gain_cutoff_over_omega1 = 0.0;  // cutoff used for the gain sweeps
    bool cutoff_admissible = true;
    std::vector<GainTrial> kp_trials;
    std::optional<double> kp_critical;
    double kp_selected = 0.0;
    std::vector<GainTrial> ki_trials;
    std::optional<double> ki_critical;
    double ki_selected = 0.0;
    std::vector<std::string> notes;
};

namespace detail {

inline std::vector<double> geometric_sweep(double start, double stop, double ratio) {
    std::vector<double> v;
    for (double x = start; x <= stop * (1.0 + 1e-12); x *= ratio) v.push_back(x);
    return v;
}

// Runs a rig copy with the given gains for trial_periods and applies the detector.
inline GainTrial gain_trial(const Rig& settled, const Scenario& sc, double kp_norm, double ki_norm,
                            const TuningOptions& opt, double normalized) {
    Rig rig = settled;
    const double g = sc.plant.exciter.force_gain();
    const PiGains gains{kp_norm / g, ki_norm * sc.cutoff() / g};
    for (int h : sc.control.harmonics) rig.harmonizer().override_gains(h, gains);
    rig.set_harmonizer_active(true);
    const double omega = rig.omega();
    const double dt = rig.sample_interval(omega);
    EstimateLog est{opt.decimation, {}, {}};
    GainTrial t;
    t.normalized = normalized;
    try {
        rig.hold(omega, static_cast<std::size_t>(opt.trial_periods) * samples_per_period(rig, omega), dt, nullptr, &est);
        const auto r = detect_oscillation_onset(est.estimates, dt * static_cast<double>(opt.decimation), omega,
                                                sc.control.target_level, sc.control.harmonics, opt.onset);
        t.onset = r.fired;
        t.harmonic = r.harmonic;
        for (double p : r.peak_to_peak) t.max_peak_to_peak = std::max(t.max_peak_to_peak, p);
    } catch (const NumericalError&) {
        t.onset = true;  // divergence counts as onset
    }
    return t;
}

} // namespace detail

/// Tunes at (omega, level) with the fundamental controller active throughout.
inline TuningReport tune(const Scenario& base, double omega, const TuningOptions& opt = {}) {
    base.validate();
    require(omega > 0.0, "representative frequency must be positive");
    require(opt.epsilon_tol > 0.0, "fluctuation tolerance must be positive");
    require(opt.gain_ratio > 1.0, "gain sweep ratio must exceed 1");
    require(opt.fallback_cutoff > 0.0, "fallback cutoff must be positive");
    require(!base.control.harmonics.empty(), "tuning needs at least one harmonized order");
    TuningReport rep;
    rep.omega = omega;
    rep.level = base.control.target_level;

    // (1) open-loop record, offline filter scan
    const auto grid = opt.cutoffs();
    for (double c : grid) require(c > 0.0, "cutoff grid values must be positive");
    Scenario sc = base;
    sc.control.harmonizer_enabled = false;
    {
        Rig rig = make_rig(sc);
        rig.set_omega(omega);
        const double dt = rig.sample_interval(omega);
        const std::size_t n = samples_per_period(rig, omega);
        rig.hold(omega, static_cast<std::size_t>(opt.settle_periods) * n, dt);
        rig.set_open_loop(rig.command());
        SampleLog log;
        rig.hold(omega, static_cast<std::size_t>(opt.record_periods) * n, dt, &log);
        const double period = 2.0 * std::numbers::pi / omega;
        for (double c : grid) {
            AdaptiveFilter f(sc.estimator.order, c * sc.omega1());
            std::vector<HarmonicSpectrum> hist;
            const std::size_t skip = log.size() / 2;  // let the filter converge
            for (std::size_t i = 0; i < log.size(); ++i) {
                f.step(log.excitation[i], log.phase[i], dt);
                if (i >= skip && (i - skip) % opt.decimation == 0) hist.push_back(f.estimate());
            }
            const double duration = static_cast<double>(log.size() - skip) * dt;
            const auto fl = fluctuation_metric(hist, duration, period);
            CutoffTrial t{c, 0.0, false};
            for (double v : fl) t.fluctuation = std::max(t.fluctuation, v);
            t.admissible = t.fluctuation < 0.5 * opt.epsilon_tol;
            rep.cutoff_trials.push_back(t);
        }
    }
    double best = 0.0;
    for (const auto& t : rep.cutoff_trials)
        if (t.admissible) best = std::max(best, t.cutoff_over_omega1);
    if (best <= 0.0) {
        rep.cutoff_admissible = false;
        rep.notes.push_back("no admissible cutoff: improve signal-to-noise ratio");
        best = *std::min_element(grid.begin(), grid.end());
    }
    const double top = *std::max_element(grid.begin(), grid.end());
    rep.cutoff_over_omega1 = best;
    rep.gain_cutoff_over_omega1 = best;
    if (grid.size() > 1 && best >= top) {
        rep.gain_cutoff_over_omega1 = opt.fallback_cutoff;
        rep.notes.push_back("cutoff scan accepted the top of the range; gain sweeps use the fallback cutoff w_1/" +
                            std::to_string(static_cast<int>(std::lround(1.0 / opt.fallback_cutoff))));
    }
    sc.estimator.cutoff_over_omega1 = rep.gain_cutoff_over_omega1;

    // settled fundamental-only rig shared by all gain trials
    Scenario closed = sc;
    closed.control.harmonizer_enabled = true;
    Rig settled = make_rig(closed);
    settled.set_harmonizer_active(false);
    settled.set_omega(omega);
    {
        const double dt = settled.sample_interval(omega);
        settled.hold(omega, static_cast<std::size_t>(opt.settle_periods) * samples_per_period(settled, omega), dt);
    }

    // (2) proportional sweep with k_i = 0
    for (double kp : detail::geometric_sweep(opt.kp_start, opt.kp_max, opt.gain_ratio)) {
        auto t = detail::gain_trial(settled, closed, kp, 0.0, opt, kp);
        rep.kp_trials.push_back(t);
        if (t.onset) {
            rep.kp_critical = kp;
            break;
        }
    }
    if (rep.kp_critical) rep.kp_selected = *rep.kp_critical / 2.0;
    else {
        rep.kp_selected = opt.kp_max / 2.0;
        rep.notes.push_back("no proportional onset below the sweep bound; half the bound selected");
    }

    // (3) integral sweep at the selected k_p
    for (double ki : detail::geometric_sweep(opt.ki_start, opt.ki_max, opt.gain_ratio)) {
        auto t = detail::gain_trial(settled, closed, rep.kp_selected, ki, opt, ki);
        rep.ki_trials.push_back(t);
        if (t.onset) {
            rep.ki_critical = ki;
            break;
        }
    }
    if (rep.ki_critical) rep.ki_selected = *rep.ki_critical / 2.0;
    else {
        rep.ki_selected = opt.ki_max / 2.0;
        rep.notes.push_back("no integral onset below the sweep bound; half the bound selected");
    }
    return rep;
}

} // namespace exharm
