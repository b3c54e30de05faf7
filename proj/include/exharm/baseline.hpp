#pragma once

// Iterative harmonization: Newton/Broyden root finding on the settled
// excitation spectrum with the voltage Fourier coefficients as unknowns.
// Every residual evaluation is a full plant settle.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "exharm/bench/scenario.hpp"
#include "exharm/error.hpp"
#include "exharm/sim/stepped_sine.hpp"
#include "exharm/spectrum.hpp"

namespace exharm {

enum class JacobianPolicy { finite_difference, broyden };

inline const char* to_string(JacobianPolicy p) {
    return p == JacobianPolicy::finite_difference ? "fd" : "broyden";
}

struct IterativeOptions {
    double epsilon_fraction = 0.005;  // termination threshold relative to the target
    double fd_step_fraction = 0.01;   // FD step relative to |U_1|
    int max_iterations = 20;
    int hold_periods = 300;           // per residual evaluation
    int window_periods = 100;
    bool warm_start = true;           // start each point from the previous solution
    bool reuse_jacobian = false;      // carry the last Jacobian to the next point
};

/// Unknowns u = [Re U_1, Re U_2, Im U_2, ..., Re U_H, Im U_H];
/// residual r = [|F_1| - target, Re F_2, Im F_2, ..., Re F_H, Im F_H].
struct IterativeHarmonizationProblem {
    int max_harmonic = 1;
    double target = 1.0;
    IterativeOptions options{};

    int dimension() const noexcept { return 2 * max_harmonic - 1; }
    double epsilon() const noexcept { return options.epsilon_fraction * target; }

    void validate() const {
        require(max_harmonic >= 1, "iterative problem needs at least the fundamental");
        require(target > 0.0, "target level must be positive");
        require(options.epsilon_fraction > 0.0, "termination threshold must be positive");
        require(options.fd_step_fraction > 0.0, "finite-difference step must be positive");
        require(options.max_iterations >= 1, "at least one iteration required");
        require(options.window_periods >= 2 && options.hold_periods > options.window_periods,
                "residual hold must exceed its window");
    }

    Eigen::VectorXd pack(const HarmonicSpectrum& u) const {
        Eigen::VectorXd x(dimension());
        x[0] = u[1].real();
        for (int h = 2; h <= max_harmonic; ++h) {
            x[2 * h - 3] = u[h].real();
            x[2 * h - 2] = u[h].imag();
        }
        return x;
    }

    HarmonicSpectrum unpack(const Eigen::VectorXd& x, int order) const {
        HarmonicSpectrum u(order);
        u.set(1, x[0]);
        for (int h = 2; h <= max_harmonic; ++h) u.set(h, cplx(x[2 * h - 3], x[2 * h - 2]));
        return u;
    }

    Eigen::VectorXd residual(const HarmonicSpectrum& f) const {
        Eigen::VectorXd r(dimension());
        r[0] = f.magnitude(1) - target;
        for (int h = 2; h <= max_harmonic; ++h) {
            r[2 * h - 3] = f[h].real();
            r[2 * h - 2] = f[h].imag();
        }
        return r;
    }

    bool converged(const Eigen::VectorXd& r) const { return r.cwiseAbs().maxCoeff() < epsilon(); }
};

struct ResidualEvaluation {
    Eigen::VectorXd residual;
    PointRecord measurement;
};

/// Applies the fixed voltage spectrum u open-loop, settles the plant at omega
/// from its current state and returns the residual of the FFT spectrum.
inline ResidualEvaluation evaluate_residual(Rig& rig, const IterativeHarmonizationProblem& problem,
                                            const HarmonicSpectrum& u, double omega) {
    rig.set_open_loop(u);
    SteppedSineOptions opt;
    ResidualEvaluation ev;
    ev.measurement = settle_and_measure(rig, omega, problem.options.hold_periods, problem.options.window_periods,
                                        problem.target, opt);
    ev.residual = problem.residual(ev.measurement.excitation_fft);
    if (!ev.residual.allFinite()) throw NumericalError("non-finite residual", rig.time());
    return ev;
}

struct IterationStep {
    int iteration = 0;
    JacobianPolicy policy = JacobianPolicy::finite_difference;  // Jacobian used for the update that follows
    double max_residual = 0.0;
    std::size_t settles = 0;  // plant settles spent in this iteration
    bool regularized = false;
};

struct SolveTrace {
    std::vector<IterationStep> steps;
    bool converged = false;
    int iterations = 0;           // residual evaluations at iterates, initial one included
    std::size_t settles = 0;      // all plant settles, FD columns included
    std::size_t jacobian_builds = 0;
    std::string error;
};

struct SolveResult {
    HarmonicSpectrum command;
    PointRecord measurement;
    SolveTrace trace;
    Eigen::MatrixXd jacobian;
};

/// Broyden rank-one update: J += (dr - J du) du^T / (du^T du).
inline void broyden_update(Eigen::MatrixXd& jac, const Eigen::VectorXd& du, const Eigen::VectorXd& dr) {
    const double n = du.squaredNorm();
    if (n <= 0.0) return;
    jac += (dr - jac * du) * du.transpose() / n;
}

/// Forward-difference Jacobian around u0 (one settle per unknown).
inline Eigen::MatrixXd finite_difference_jacobian(Rig& rig, const IterativeHarmonizationProblem& problem,
                                                  const Eigen::VectorXd& u0, const Eigen::VectorXd& r0, double omega,
                                                  int order) {
    const double step = problem.options.fd_step_fraction * std::max(std::abs(u0[0]), 1e-6);
    Eigen::MatrixXd jac(problem.dimension(), problem.dimension());
    for (int j = 0; j < problem.dimension(); ++j) {
        Eigen::VectorXd u = u0;
        u[j] += step;
        const auto ev = evaluate_residual(rig, problem, problem.unpack(u, order), omega);
        jac.col(j) = (ev.residual - r0) / step;
    }
    return jac;
}

namespace detail {

inline std::optional<Eigen::VectorXd> newton_step(const Eigen::MatrixXd& jac, const Eigen::VectorXd& r, bool& regularized) {
    regularized = false;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (lu.isInvertible()) {
        Eigen::VectorXd du = lu.solve(-r);
        if (du.allFinite()) return du;
    }
    regularized = true;
    const double lambda = 1e-8 * std::max(jac.squaredNorm(), 1e-300);
    Eigen::MatrixXd a = jac.transpose() * jac;
    a.diagonal().array() += lambda;
    Eigen::VectorXd du = a.ldlt().solve(-jac.transpose() * r);
    if (!du.allFinite()) return std::nullopt;
    return du;
}

} // namespace detail

/// FD Jacobian in the first and every second iteration, Broyden updates in
/// between. `jacobian` optionally seeds the first iteration instead of FD.
inline SolveResult solve(Rig& rig, const IterativeHarmonizationProblem& problem, const HarmonicSpectrum& initial,
                         double omega, const Eigen::MatrixXd* jacobian = nullptr) {
    problem.validate();
    const int order = initial.order();
    require(order >= problem.max_harmonic, "command order below the iterated harmonics");
    SolveResult out;
    Eigen::VectorXd u = problem.pack(initial);
    auto ev = evaluate_residual(rig, problem, problem.unpack(u, order), omega);
    out.trace.settles = 1;
    Eigen::MatrixXd jac;
    bool have_jac = false;
    if (jacobian && jacobian->rows() == problem.dimension() && jacobian->cols() == problem.dimension()) {
        jac = *jacobian;
        have_jac = true;
    }

    for (int k = 0;; ++k) {
        IterationStep step;
        step.iteration = k;
        step.max_residual = ev.residual.cwiseAbs().maxCoeff();
        step.settles = k == 0 ? 1 : 0;
        out.trace.iterations = k + 1;
        if (problem.converged(ev.residual)) {
            out.trace.converged = true;
            out.trace.steps.push_back(step);
            break;
        }
        if (k + 1 >= problem.options.max_iterations) {
            out.trace.steps.push_back(step);
            out.trace.error = "maximum number of iterations exceeded";
            break;
        }
        const bool fd = (k % 2 == 0) && !(k == 0 && have_jac);
        if (fd) {
            jac = finite_difference_jacobian(rig, problem, u, ev.residual, omega, order);
            step.settles += static_cast<std::size_t>(problem.dimension());
            out.trace.settles += static_cast<std::size_t>(problem.dimension());
            ++out.trace.jacobian_builds;
        }
        step.policy = fd ? JacobianPolicy::finite_difference : JacobianPolicy::broyden;
        auto du = detail::newton_step(jac, ev.residual, step.regularized);
        if (!du) {
            out.trace.steps.push_back(step);
            out.trace.error = "singular Jacobian";
            break;
        }
        const Eigen::VectorXd r_old = ev.residual;
        u += *du;
        ev = evaluate_residual(rig, problem, problem.unpack(u, order), omega);
        ++step.settles;
        ++out.trace.settles;
        out.trace.steps.push_back(step);
        // The update for the next iteration: Broyden correction of the current Jacobian.
        broyden_update(jac, *du, ev.residual - r_old);
    }
    out.command = problem.unpack(u, order);
    out.measurement = ev.measurement;
    out.jacobian = jac;
    return out;
}

struct IterativeRunRecord {
    RunRecord run;
    std::vector<SolveTrace> traces;

    double mean_iterations() const {
        if (traces.empty()) return 0.0;
        double s = 0.0;
        for (const auto& t : traces) s += t.iterations;
        return s / static_cast<double>(traces.size());
    }
};

inline IterativeHarmonizationProblem make_iterative_problem(const Scenario& sc, const IterativeOptions& opt = {}) {
    IterativeHarmonizationProblem p;
    p.max_harmonic = 1;
    for (int h : sc.control.harmonics) p.max_harmonic = std::max(p.max_harmonic, h);
    p.target = sc.control.target_level;
    p.options = opt;
    return p;
}

/// Stepped sine with iterative harmonization at every grid point. The first
/// point starts from a settle under the fundamental controller alone.
inline IterativeRunRecord stepped_sine_iterative(const Scenario& sc, const SteppedSineSchedule& schedule,
                                                 const IterativeOptions& opt = {},
                                                 const std::function<void(const PointRecord&, const SolveTrace&)>&
                                                     on_point = {}) {
    sc.validate();
    schedule.validate();
    const auto problem = make_iterative_problem(sc, opt);
    problem.validate();
    const auto start = std::chrono::steady_clock::now();
    IterativeRunRecord out;
    out.run.scenario = sc.name;
    out.run.target = sc.control.target_level;
    out.run.order = sc.estimator.order;
    out.run.harmonics = sc.control.harmonics;

    Scenario fundamental_only = sc;
    fundamental_only.control.harmonizer_enabled = false;
    Rig rig = make_rig(fundamental_only);
    std::optional<HarmonicSpectrum> previous;
    std::optional<Eigen::MatrixXd> previous_jacobian;

    for (std::size_t i = 0; i < schedule.omegas.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const double omega = schedule.omegas[i];
        PointRecord rec;
        SolveTrace trace;
        bool integration_failed = false;
        try {
            std::size_t extra = 0;
            if (i > 0) rig.ramp(omega, sc.ramp_duration(), rig.sample_interval(omega));
            else rig.set_omega(omega);
            HarmonicSpectrum u0(sc.estimator.order);
            if (!previous || !opt.warm_start) {
                rig.set_open_loop(std::nullopt);
                settle_and_measure(rig, omega, schedule.hold_periods, schedule.window_periods, sc.control.target_level,
                                   SteppedSineOptions{});
                u0.set(1, rig.command()[1]);
                extra = 1;
            } else {
                u0 = *previous;
            }
            const Eigen::MatrixXd* seed = opt.reuse_jacobian && previous_jacobian ? &*previous_jacobian : nullptr;
            auto res = solve(rig, problem, u0, omega, seed);
            trace = res.trace;
            trace.settles += extra;
            rec = res.measurement;
            rec.command = res.command;
            if (!trace.converged) {
                rec.failed = true;
                rec.error = trace.error;
            } else {
                previous = res.command;
                previous_jacobian = res.jacobian;
            }
            rig.fundamental().set_u1(res.command[1].real());
        } catch (const NumericalError& e) {
            integration_failed = true;
            rec.failed = true;
            rec.error = e.what();
            trace.error = e.what();
        }
        rec.omega = omega;
        rec.segment = "main";
        rec.plant_settles = trace.settles;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.run.points.push_back(rec);
        out.traces.push_back(trace);
        if (on_point) on_point(rec, trace);
        if (integration_failed) break;  // rig state no longer meaningful
    }
    out.run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

} // namespace exharm
