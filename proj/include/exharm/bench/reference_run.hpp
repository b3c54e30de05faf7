#pragma once

// Assembles the reference branches of a scenario on its frequency grid:
// main branch forward, low branch backward, the S-shaped overhang by
// arclength, and optionally an isolated branch seeded from a rig state.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "exharm/bench/scenario.hpp"
#include "exharm/reference.hpp"
#include "exharm/sim/stepped_sine.hpp"

namespace exharm {

struct LabeledBranch {
    std::string label;
    std::vector<BranchPoint> points;
    bool on_grid = true;        // points sit exactly on grid frequencies
    std::string diagnostic;
};

struct ReferenceSet {
    std::vector<LabeledBranch> branches;
    std::vector<double> turning_points;       // main-branch folds (rad/s), from arclength
    std::vector<double> isola_turning_points;

    const LabeledBranch* find(const std::string& label) const {
        for (const auto& b : branches)
            if (b.label == label) return &b;
        return nullptr;
    }
    /// First fold of the main branch when stepping upwards (rad/s).
    std::optional<double> main_turning_point() const {
        if (turning_points.empty()) return std::nullopt;
        return turning_points.front();
    }
};

struct ReferenceOptions {
    int steps_per_period = 1000;
    ContinuationOptions continuation{};
    ArclengthOptions arclength{};
    bool trace_overhang = true;
};

/// Shooting problem for the scenario: the target level imposed as a pure
/// cosine at the drive point, response observed at the observation location.
inline ShootingProblem make_shooting_problem(const Scenario& sc, double omega, int steps_per_period = 1000) {
    ShootingProblem p;
    p.plant = sc.plant.build();
    p.amplitude = sc.control.target_level;
    p.omega = omega;
    p.steps_per_period = steps_per_period;
    p.observe_row = sc.plant.structure.shape(sc.plant.observe_location);
    p.order = sc.estimator.order;
    return p;
}

/// Converts a rig state recorded at phase tau, with measured fundamental
/// excitation coefficient f1, to the shooting phase convention (forcing
/// F cos(W t) with t = 0), by integrating the ideal forcing to the next period
/// boundary.
inline StateVector handoff_state(const ShootingProblem& problem, const StateVector& rig_state, double tau, cplx f1) {
    const int m = problem.plant.modes();
    require(rig_state.size() >= static_cast<std::size_t>(2 * m), "rig state too short");
    StateVector x(rig_state.begin(), rig_state.begin() + 2 * m);
    const double two_pi = 2.0 * std::numbers::pi;
    double phase = std::fmod(tau + std::arg(f1), two_pi);
    if (phase < 0.0) phase += two_pi;
    const double t0 = phase / problem.omega;
    const double remaining = problem.period() - t0;
    if (remaining <= 0.0) return x;
    const int steps = std::max(1, static_cast<int>(std::ceil(problem.steps_per_period * remaining / problem.period())));
    const double amp = problem.amplitude, w = problem.omega;
    return newmark_integrate(problem.plant, [amp, w, t0](double t) { return amp * std::cos(w * (t + t0)); },
                             remaining, steps, x)
        .final_state;
}

/// Seed for capture_isola from a settled stepped-sine point.
inline std::pair<StateVector, double> isola_seed_from(const Scenario& sc, const PointRecord& p,
                                                      int steps_per_period = 1000) {
    require(!p.final_state.empty(), "point carries no final state");
    const auto problem = make_shooting_problem(sc, p.omega, steps_per_period);
    return {handoff_state(problem, p.final_state, p.final_phase, p.excitation_fft[1]), p.omega};
}

namespace detail {

// H1 response amplitudes of the S-curve points interpolated at omega.
inline std::vector<double> amplitudes_at(const std::vector<BranchPoint>& curve, double omega) {
    std::vector<double> out;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const double a = curve[i - 1].omega, b = curve[i].omega;
        if ((omega - a) * (omega - b) > 0.0 || a == b) continue;
        const double s = (omega - a) / (b - a);
        out.push_back(curve[i - 1].amplitude(1) + s * (curve[i].amplitude(1) - curve[i - 1].amplitude(1)));
    }
    return out;
}

} // namespace detail

/// Main and low branches on `grid` (increasing), the overhang, and the
/// isolated branch when a seed (state at shooting phase zero, frequency) is given.
inline ReferenceSet compute_reference(const Scenario& sc, const std::vector<double>& grid,
                                      const std::optional<std::pair<StateVector, double>>& isola_seed = std::nullopt,
                                      ReferenceOptions opt = {}) {
    require(grid.size() >= 2, "reference grid needs at least two points");
    for (std::size_t i = 1; i < grid.size(); ++i) require(grid[i] > grid[i - 1], "reference grid must increase");
    ReferenceSet set;
    const double w1 = sc.omega1();
    ShootingProblem p = make_shooting_problem(sc, grid.front(), opt.steps_per_period);
    if (opt.arclength.omega_scale == 1.0) opt.arclength.omega_scale = w1;

    const BranchPoint first = shoot(p, linear_guess(p), opt.continuation.shooting);
    auto forward = continue_branch(p, first, std::vector<double>(grid.begin() + 1, grid.end()), opt.continuation);
    LabeledBranch main{"main", {first}, true, forward.diagnostic};
    main.points.insert(main.points.end(), forward.points.begin(), forward.points.end());
    set.branches.push_back(main);

    if (!forward.complete) {
        ShootingProblem q = p;
        q.omega = grid.back();
        const BranchPoint last = shoot(q, linear_guess(q), opt.continuation.shooting);
        std::vector<double> down(grid.rbegin() + 1, grid.rend());
        auto backward = continue_branch(q, last, down, opt.continuation);
        LabeledBranch low{"low", {last}, true, backward.diagnostic};
        low.points.insert(low.points.end(), backward.points.begin(), backward.points.end());
        std::reverse(low.points.begin(), low.points.end());
        set.branches.push_back(low);
    }

    std::vector<BranchPoint> s_curve;
    if (opt.trace_overhang && !forward.complete) {
        auto arc = trace_arclength(p, main.points.back(), grid.front(), grid.back(), +1.0, opt.arclength);
        set.turning_points = turning_points(arc);
        s_curve = arc.points;
        set.branches.push_back({"main-arclength", arc.points, false, arc.diagnostic});
    }

    if (isola_seed) {
        const auto known = [&](double w) {
            auto a = detail::amplitudes_at(s_curve, w);
            for (const auto& b : set.branches) {
                if (!b.on_grid) continue;
                for (const auto& pt : b.points)
                    if (std::abs(pt.omega - w) <= 1e-9 * w) a.push_back(pt.amplitude(1));
            }
            return a;
        };
        auto cap = capture_isola(p, isola_seed->first, isola_seed->second, grid, known, grid.front(),
                                 grid.back() * 1.5, opt.continuation, opt.arclength);
        if (!cap.found) {
            set.branches.push_back({"isola", {}, true, cap.diagnostic});
        } else {
            LabeledBranch iso{"isola", {}, true, cap.diagnostic};
            iso.points = cap.upper_backward.points;
            std::reverse(iso.points.begin(), iso.points.end());
            const bool seed_on_grid = std::any_of(grid.begin(), grid.end(), [&](double w) {
                return std::abs(w - cap.seed.omega) <= 1e-9 * w;
            });
            if (seed_on_grid) iso.points.push_back(cap.seed);
            iso.points.insert(iso.points.end(), cap.upper_forward.points.begin(), cap.upper_forward.points.end());
            set.branches.push_back(iso);
            set.branches.push_back({"isola-arclength", cap.loop.points, false, cap.loop.diagnostic});
            set.isola_turning_points = turning_points(cap.loop);
        }
    }
    return set;
}

} // namespace exharm
