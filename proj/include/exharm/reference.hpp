#pragma once

// Ground-truth periodic responses under ideal mono-harmonic excitation
// F cos(W t) imposed directly on the structure (exciter bypassed): shooting on
// the constant-average-acceleration Newmark map, Floquet multipliers from the
// exact derivative of that map, and branch continuation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "exharm/error.hpp"
#include "exharm/model.hpp"
#include "exharm/sim/fft.hpp"
#include "exharm/sim/integrator.hpp"
#include "exharm/spectrum.hpp"

namespace exharm {

struct ShootingProblem {
    Plant plant;
    double amplitude = 1.0;  // F (N) or base acceleration (m/s^2)
    double omega = 1.0;      // rad/s
    int steps_per_period = 1000;
    std::vector<double> observe_row;
    int order = 7;           // harmonics kept in the response spectrum

    double period() const { return 2.0 * std::numbers::pi / omega; }

    void validate() const {
        plant.validate();
        require(amplitude > 0.0, "forcing amplitude must be positive");
        require(omega > 0.0, "forcing frequency must be positive");
        require(steps_per_period >= 100, "shooting needs >= 100 steps per period");
    }
};

struct NewmarkResult {
    StateVector final_state;
    Eigen::MatrixXd monodromy;          // d x(T) / d x(0), when requested
    std::vector<double> displacements;  // observed displacement at t_0 .. t_{N-1}, when requested
    int max_newton_iterations = 0;
};

namespace detail {

struct NewmarkModel {
    Eigen::VectorXd damping;    // 2 D w
    Eigen::VectorXd stiffness;  // w^2
    Eigen::VectorXd input;      // modal forcing per unit excitation
    Eigen::VectorXd spring;     // cubic spring shape
    double k_nl = 0.0;

    explicit NewmarkModel(const Plant& p) {
        const int m = p.modes();
        damping.resize(m);
        stiffness.resize(m);
        input.resize(m);
        spring.resize(m);
        const auto b = modal_input_vector(p);
        for (int l = 0; l < m; ++l) {
            const double w = p.structure.omega[l];
            damping[l] = 2.0 * p.structure.damping[l] * w;
            stiffness[l] = w * w;
            input[l] = b[l];
            spring[l] = p.spring.shape[l];
        }
        k_nl = p.spring.stiffness;
    }

    Eigen::VectorXd restoring(const Eigen::VectorXd& q) const {
        const double y = spring.dot(q);
        return stiffness.cwiseProduct(q) + spring * (k_nl * y * y * y);
    }

    Eigen::MatrixXd tangent_stiffness(const Eigen::VectorXd& q) const {
        const double y = spring.dot(q);
        Eigen::MatrixXd k = (3.0 * k_nl * y * y) * spring * spring.transpose();
        k.diagonal() += stiffness;
        return k;
    }
};

} // namespace detail

/// Constant-average-acceleration Newmark (gamma = 1/2, beta = 1/4) over one
/// span [0, duration] with `steps` steps under excitation(t). The optional
/// sensitivity is the exact derivative of the discrete map.
template <class Excitation>
NewmarkResult newmark_integrate(const Plant& plant, Excitation&& excitation, double duration, int steps,
                                const StateVector& x0, bool sensitivity = false,
                                const std::vector<double>* observe_row = nullptr) {
    require(steps >= 1 && duration > 0.0, "invalid Newmark span");
    const int m = plant.modes();
    require(x0.size() >= static_cast<std::size_t>(2 * m), "initial state too short");
    constexpr double gamma = 0.5, beta = 0.25;
    const double h = duration / steps;
    const detail::NewmarkModel model(plant);

    Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(x0.data(), m);
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(x0.data() + m, m);
    Eigen::VectorXd a = model.input * excitation(0.0) - model.damping.cwiseProduct(v) - model.restoring(q);

    Eigen::MatrixXd dq, dv, da;
    if (sensitivity) {
        dq = Eigen::MatrixXd::Zero(m, 2 * m);
        dv = Eigen::MatrixXd::Zero(m, 2 * m);
        dq.leftCols(m).setIdentity();
        dv.rightCols(m).setIdentity();
        da = -(model.damping.asDiagonal() * dv) - model.tangent_stiffness(q) * dq;
    }

    NewmarkResult out;
    Eigen::VectorXd row;
    if (observe_row) {
        row = Eigen::Map<const Eigen::VectorXd>(observe_row->data(), m);
        out.displacements.reserve(static_cast<std::size_t>(steps));
    }

    for (int n = 0; n < steps; ++n) {
        if (observe_row) out.displacements.push_back(row.dot(q));
        const double t1 = (n + 1) * h;
        const Eigen::VectorXd q_pred = q + h * v + h * h * (0.5 - beta) * a;
        const Eigen::VectorXd v_pred = v + h * (1.0 - gamma) * a;
        const Eigen::VectorXd load = model.input * excitation(t1);

        Eigen::VectorXd a1 = a;
        Eigen::MatrixXd jac(m, m);
        int it = 0;
        for (;; ++it) {
            const Eigen::VectorXd q1 = q_pred + beta * h * h * a1;
            const Eigen::VectorXd v1 = v_pred + gamma * h * a1;
            const Eigen::VectorXd res = a1 + model.damping.cwiseProduct(v1) + model.restoring(q1) - load;
            jac = model.tangent_stiffness(q1) * (beta * h * h);
            jac.diagonal() += Eigen::VectorXd::Ones(m) + gamma * h * model.damping;
            const Eigen::VectorXd delta = jac.partialPivLu().solve(-res);
            a1 += delta;
            if (delta.norm() <= 1e-13 * (1.0 + a1.norm())) break;
            if (it >= 30 || !a1.allFinite()) throw NumericalError("Newmark step Newton iteration did not converge", n * h);
        }
        out.max_newton_iterations = std::max(out.max_newton_iterations, it + 1);

        const Eigen::VectorXd q1 = q_pred + beta * h * h * a1;
        const Eigen::VectorXd v1 = v_pred + gamma * h * a1;
        if (sensitivity) {
            const Eigen::MatrixXd dq_pred = dq + h * dv + h * h * (0.5 - beta) * da;
            const Eigen::MatrixXd dv_pred = dv + h * (1.0 - gamma) * da;
            Eigen::MatrixXd k1 = model.tangent_stiffness(q1);
            Eigen::MatrixXd jeff = k1 * (beta * h * h);
            jeff.diagonal() += Eigen::VectorXd::Ones(m) + gamma * h * model.damping;
            const Eigen::MatrixXd rhs = -(model.damping.asDiagonal() * dv_pred) - k1 * dq_pred;
            da = jeff.partialPivLu().solve(rhs);
            dq = dq_pred + beta * h * h * da;
            dv = dv_pred + gamma * h * da;
        }
        q = q1;
        v = v1;
        a = a1;
    }

    out.final_state.assign(q.data(), q.data() + m);
    out.final_state.insert(out.final_state.end(), v.data(), v.data() + m);
    if (sensitivity) {
        out.monodromy.resize(2 * m, 2 * m);
        out.monodromy << dq, dv;
    }
    return out;
}

enum class Stability { stable, unstable, marginal };

inline const char* to_string(Stability s) {
    switch (s) {
    case Stability::stable: return "stable";
    case Stability::unstable: return "unstable";
    default: return "marginal";
    }
}

struct BranchPoint {
    double omega = 0.0;
    StateVector state;                        // x(0), forcing phase zero at t = 0
    HarmonicSpectrum response;                // displacement at the observation row
    std::vector<std::complex<double>> multipliers;
    Stability stability = Stability::marginal;
    bool torus = false;                       // complex pair outside the unit circle
    double residual = 0.0;                    // scaled relative periodicity residual
    int iterations = 0;

    bool stable() const noexcept { return stability == Stability::stable; }
    double amplitude(int h = 1) const { return response.magnitude(h); }
};

struct ShootingOptions {
    double tolerance = 1e-8;     // relative, scaled residual
    int max_iterations = 25;
    double unit_circle_band = 1e-6;
};

namespace detail {

// Positions weighted 1, velocities weighted 1/W.
inline double scaled_norm(const StateVector& x, int m, double omega) {
    double s = 0.0;
    for (int i = 0; i < 2 * m; ++i) {
        const double v = i < m ? x[i] : x[i] / omega;
        s += v * v;
    }
    return std::sqrt(s);
}

inline NewmarkResult one_period(const ShootingProblem& p, const StateVector& x0, bool sensitivity,
                                bool keep_response, int steps) {
    const double amp = p.amplitude, w = p.omega;
    return newmark_integrate(p.plant, [amp, w](double t) { return amp * std::cos(w * t); }, p.period(), steps, x0,
                             sensitivity, keep_response ? &p.observe_row : nullptr);
}

inline void classify(BranchPoint& bp, const Eigen::MatrixXd& monodromy, double band) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(monodromy, false);
    bp.multipliers.clear();
    double rmax = 0.0;
    bp.torus = false;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const auto mu = es.eigenvalues()[i];
        bp.multipliers.push_back(mu);
        rmax = std::max(rmax, std::abs(mu));
        if (std::abs(mu) > 1.0 + band && std::abs(mu.imag()) > 1e-9) bp.torus = true;
    }
    bp.stability = rmax < 1.0 - band ? Stability::stable : rmax > 1.0 + band ? Stability::unstable : Stability::marginal;
}

} // namespace detail

/// Newton shooting on x(T) - x(0) = 0 from the guess x0.
inline BranchPoint shoot(const ShootingProblem& problem, StateVector x0, const ShootingOptions& opt = {}) {
    problem.validate();
    const int m = problem.plant.modes();
    const auto dim = static_cast<std::size_t>(2 * m);
    require(x0.size() >= dim, "initial guess too short");
    x0.resize(dim);
    if (problem.observe_row.size() != static_cast<std::size_t>(m))
        throw ValidationError("shooting observation row has wrong length");

    BranchPoint bp;
    bp.omega = problem.omega;
    double previous = INFINITY;
    for (int it = 0; it <= opt.max_iterations; ++it) {
        const auto r = detail::one_period(problem, x0, true, false, problem.steps_per_period);
        Eigen::VectorXd res(2 * m);
        StateVector diff(dim);
        for (std::size_t i = 0; i < dim; ++i) diff[i] = res[static_cast<Eigen::Index>(i)] = r.final_state[i] - x0[i];
        const double scale = std::max(detail::scaled_norm(x0, m, problem.omega), 1e-14);
        const double rel = detail::scaled_norm(diff, m, problem.omega) / scale;
        bp.iterations = it;
        if (!std::isfinite(rel)) throw NumericalError("shooting residual not finite");
        if (rel < opt.tolerance) {
            bp.state = x0;
            bp.residual = rel;
            detail::classify(bp, r.monodromy, opt.unit_circle_band);
            const auto traj = detail::one_period(problem, x0, false, true, problem.steps_per_period);
            bp.response = fft_window_spectrum(traj.displacements, 1, problem.order, 0.0);
            return bp;
        }
        if (it > 3 && rel > 10.0 * previous) throw NumericalError("shooting diverged");
        previous = rel;
        Eigen::MatrixXd jac = r.monodromy - Eigen::MatrixXd::Identity(2 * m, 2 * m);
        const Eigen::VectorXd step = jac.fullPivLu().solve(-res);
        if (!step.allFinite()) throw NumericalError("singular shooting Jacobian");
        for (std::size_t i = 0; i < dim; ++i) x0[i] += step[static_cast<Eigen::Index>(i)];
    }
    throw NumericalError("shooting did not converge within the iteration limit");
}

/// Re-integrates a converged point with twice the steps per period and
/// returns the relative periodicity residual.
inline double refined_residual(const ShootingProblem& problem, const BranchPoint& bp) {
    ShootingProblem p = problem;
    p.omega = bp.omega;
    const int m = p.plant.modes();
    const auto r = detail::one_period(p, bp.state, false, false, 2 * p.steps_per_period);
    StateVector diff(bp.state.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = r.final_state[i] - bp.state[i];
    return detail::scaled_norm(diff, m, p.omega) / std::max(detail::scaled_norm(bp.state, m, p.omega), 1e-14);
}

/// Analytic linear response amplitude at the observation row (spring ignored).
inline double linear_response_amplitude(const Plant& plant, const std::vector<double>& row, double amplitude,
                                        double omega) {
    const auto b = modal_input_vector(plant);
    cplx q{};
    for (int l = 0; l < plant.modes(); ++l) {
        const double w = plant.structure.omega[l], d = plant.structure.damping[l];
        q += row[l] * b[l] * amplitude / cplx(w * w - omega * omega, 2.0 * d * w * omega);
    }
    return std::abs(q);
}

/// Linear periodic solution used as the default initial guess.
inline StateVector linear_guess(const ShootingProblem& p) {
    const auto b = modal_input_vector(p.plant);
    const int m = p.plant.modes();
    StateVector x(static_cast<std::size_t>(2 * m));
    for (int l = 0; l < m; ++l) {
        const double w = p.plant.structure.omega[l], d = p.plant.structure.damping[l];
        const cplx eta = b[l] * p.amplitude / cplx(w * w - p.omega * p.omega, 2.0 * d * w * p.omega);
        x[l] = eta.real();
        x[m + l] = (cplx(0.0, p.omega) * eta).real();
    }
    return x;
}

struct Branch {
    std::vector<BranchPoint> points;
    bool complete = false;       // reached the end of the grid
    double last_omega = 0.0;     // last converged frequency (turning point estimate if incomplete)
    std::string diagnostic;
};

struct ContinuationOptions {
    ShootingOptions shooting{};
    int max_halvings = 8;
    double max_amplitude_jump = 0.25;  // relative change vs. predictor that counts as branch switching
};

/// Sequential (natural-parameter) continuation over a grid with the previous
/// solution as predictor and step halving on failure.
inline Branch continue_branch(const ShootingProblem& problem, const BranchPoint& start, const std::vector<double>& grid,
                              const ContinuationOptions& opt = {}) {
    Branch branch;
    branch.last_omega = start.omega;
    BranchPoint prev = start;
    std::optional<BranchPoint> before;
    for (double target : grid) {
        double reached = prev.omega;
        double step = target - reached;
        int halvings = 0;
        bool ok = true;
        while (std::abs(target - reached) > 1e-12 * std::abs(target)) {
            const double next = std::abs(step) >= std::abs(target - reached) ? target : reached + step;
            ShootingProblem p = problem;
            p.omega = next;
            StateVector guess = prev.state;
            if (before && std::abs(prev.omega - before->omega) > 0.0) {
                const double r = (next - prev.omega) / (prev.omega - before->omega);
                for (std::size_t i = 0; i < guess.size(); ++i) guess[i] += r * (prev.state[i] - before->state[i]);
            }
            bool accepted = false;
            try {
                BranchPoint bp = shoot(p, guess, opt.shooting);
                const double a_prev = prev.amplitude(1);
                const double rel = std::abs(bp.amplitude(1) - a_prev) / std::max(a_prev, 1e-300);
                accepted = rel <= opt.max_amplitude_jump;
                if (accepted) {
                    before = prev;
                    prev = bp;
                    reached = next;
                    branch.last_omega = next;
                }
            } catch (const NumericalError&) {
                accepted = false;
            }
            if (!accepted) {
                if (++halvings > opt.max_halvings) {
                    ok = false;
                    break;
                }
                step *= 0.5;
            }
        }
        if (!ok) {
            branch.diagnostic = "branch lost (turning point) near omega = " + std::to_string(branch.last_omega);
            return branch;
        }
        branch.points.push_back(prev);
    }
    branch.complete = true;
    return branch;
}

struct ArclengthOptions {
    ShootingOptions shooting{};
    double initial_step = 0.02;   // in scaled arclength units
    double min_step = 1e-5;
    double max_step = 0.2;
    int max_points = 2000;
    int max_corrector_iterations = 12;
    double omega_scale = 1.0;     // rad/s per unit of scaled arclength
    double max_omega_step = 0.05; // largest relative frequency change per step
};

struct ArclengthBranch {
    std::vector<BranchPoint> points;
    bool closed = false;          // returned to the starting point (isola)
    std::string diagnostic;
};

namespace detail {

struct Augmented {
    Eigen::MatrixXd jac;   // 2M x (2M+1) in scaled variables
    Eigen::VectorXd res;   // 2M
    Eigen::MatrixXd monodromy;
};

// Scaled unknowns y = (x / s_x, W / s_W).
inline Augmented evaluate_augmented(const ShootingProblem& base, const Eigen::VectorXd& y, const Eigen::VectorXd& sx,
                                    double sw) {
    const int n = static_cast<int>(sx.size());
    ShootingProblem p = base;
    p.omega = y[n] * sw;
    StateVector x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[i] = y[i] * sx[i];
    const auto r = one_period(p, x, true, false, p.steps_per_period);
    Augmented a;
    a.res.resize(n);
    for (int i = 0; i < n; ++i) a.res[i] = (r.final_state[i] - x[i]) / sx[i];
    a.jac.resize(n, n + 1);
    a.monodromy = r.monodromy;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a.jac(i, j) = (r.monodromy(i, j) - (i == j ? 1.0 : 0.0)) * sx[j] / sx[i];
    const double dw = 1e-6 * p.omega;
    ShootingProblem pp = p, pm = p;
    pp.omega += dw;
    pm.omega -= dw;
    const auto rp = one_period(pp, x, false, false, p.steps_per_period);
    const auto rm = one_period(pm, x, false, false, p.steps_per_period);
    for (int i = 0; i < n; ++i) a.jac(i, n) = (rp.final_state[i] - rm.final_state[i]) / (2.0 * dw) * sw / sx[i];
    return a;
}

inline Eigen::VectorXd tangent_of(const Eigen::MatrixXd& jac, const Eigen::VectorXd& previous) {
    const int n = static_cast<int>(jac.rows());
    Eigen::MatrixXd a(n + 1, n + 1);
    a << jac, previous.transpose();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    rhs[n] = 1.0;
    Eigen::VectorXd t = a.fullPivLu().solve(rhs);
    return t / t.norm();
}

} // namespace detail

/// Pseudo-arclength continuation in (state, W) that passes turning points.
/// Stops when W leaves [omega_min, omega_max], the loop closes, or the
/// point budget is exhausted. `direction` picks the initial sense in W.
inline ArclengthBranch trace_arclength(const ShootingProblem& problem, const BranchPoint& start, double omega_min,
                                       double omega_max, double direction, const ArclengthOptions& opt = {}) {
    const int n = 2 * problem.plant.modes();
    Eigen::VectorXd sx(n);
    double amp = 0.0;
    for (int i = 0; i < n / 2; ++i) amp = std::max(amp, std::abs(start.state[i]));
    amp = std::max(amp, 1e-9);
    for (int i = 0; i < n; ++i) sx[i] = i < n / 2 ? amp : amp * start.omega;
    const double sw = opt.omega_scale;

    Eigen::VectorXd y(n + 1);
    for (int i = 0; i < n; ++i) y[i] = start.state[i] / sx[i];
    y[n] = start.omega / sw;
    const Eigen::VectorXd y_start = y;

    ArclengthBranch out;
    out.points.push_back(start);
    auto aug = detail::evaluate_augmented(problem, y, sx, sw);
    Eigen::VectorXd seed = Eigen::VectorXd::Zero(n + 1);
    seed[n] = direction >= 0.0 ? 1.0 : -1.0;
    Eigen::VectorXd tangent = detail::tangent_of(aug.jac, seed);
    if (tangent[n] * seed[n] < 0.0) tangent = -tangent;

    double ds = opt.initial_step;
    double travelled = 0.0;
    while (static_cast<int>(out.points.size()) < opt.max_points) {
        const double dw = std::abs(ds * tangent[n]);
        if (dw > opt.max_omega_step * y[n]) ds *= opt.max_omega_step * y[n] / dw;
        const Eigen::VectorXd pred = y + ds * tangent;
        Eigen::VectorXd z = pred;
        bool converged = false;
        detail::Augmented a;
        int it = 0;
        try {
            for (; it < opt.max_corrector_iterations; ++it) {
                if (!(z[n] > 0.0)) break;
                a = detail::evaluate_augmented(problem, z, sx, sw);
                Eigen::MatrixXd big(n + 1, n + 1);
                big << a.jac, tangent.transpose();
                Eigen::VectorXd rhs(n + 1);
                rhs << -a.res, -tangent.dot(z - pred);
                const Eigen::VectorXd dz = big.fullPivLu().solve(rhs);
                if (!dz.allFinite()) break;
                z += dz;
                if (dz.norm() < 1e-10 * (1.0 + z.norm()) && a.res.norm() < 1e-8 * (1.0 + z.head(n).norm())) {
                    a = detail::evaluate_augmented(problem, z, sx, sw);
                    converged = true;
                    break;
                }
            }
        } catch (const NumericalError&) {
            converged = false;
        }
        if (!converged) {
            ds *= 0.5;
            if (ds < opt.min_step) {
                out.diagnostic = "arclength step underflow";
                return out;
            }
            continue;
        }

        Eigen::VectorXd t_new = detail::tangent_of(a.jac, tangent);
        if (t_new.dot(tangent) < 0.0) t_new = -t_new;
        travelled += (z - y).norm();
        y = z;
        tangent = t_new;

        BranchPoint bp;
        bp.omega = y[n] * sw;
        bp.state.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) bp.state[i] = y[i] * sx[i];
        detail::classify(bp, a.monodromy, opt.shooting.unit_circle_band);
        ShootingProblem p = problem;
        p.omega = bp.omega;
        const auto traj = detail::one_period(p, bp.state, false, true, p.steps_per_period);
        bp.response = fft_window_spectrum(traj.displacements, 1, p.order, 0.0);
        bp.residual = a.res.norm() / std::max(y.head(n).norm(), 1e-14);
        bp.iterations = it + 1;
        out.points.push_back(bp);

        if (bp.omega < omega_min || bp.omega > omega_max) {
            out.diagnostic = "left the frequency window";
            return out;
        }
        if (travelled > 4.0 * ds && (y - y_start).norm() < 1.5 * ds && out.points.size() > 8) {
            out.closed = true;
            out.diagnostic = "branch closed";
            return out;
        }
        if (it <= 3) ds = std::min(ds * 1.5, opt.max_step);
        else if (it > 6) ds *= 0.7;
    }
    out.diagnostic = "point budget exhausted";
    return out;
}

/// Fold points (sign changes of dW along the arclength branch).
inline std::vector<double> turning_points(const ArclengthBranch& branch) {
    std::vector<double> out;
    for (std::size_t i = 2; i < branch.points.size(); ++i) {
        const double d1 = branch.points[i - 1].omega - branch.points[i - 2].omega;
        const double d2 = branch.points[i].omega - branch.points[i - 1].omega;
        if (d1 * d2 < 0.0) out.push_back(branch.points[i - 1].omega);
    }
    return out;
}

struct IsolaCapture {
    bool found = false;
    std::string diagnostic;
    BranchPoint seed;
    Branch upper_forward;       // grid points from the seed upwards
    Branch upper_backward;      // grid points from the seed downwards
    ArclengthBranch loop;       // closed branch through the seed
};

/// Captures an isolated branch from a state handed off by the virtual
/// experiment. `known_amplitudes(W)` lists response H1 amplitudes of the
/// branches already known at W; a seed that converges onto one of them is
/// rejected.
template <class KnownAmplitudes>
IsolaCapture capture_isola(const ShootingProblem& problem, const StateVector& seed_state, double seed_omega,
                           const std::vector<double>& grid, KnownAmplitudes&& known_amplitudes,
                           double omega_min, double omega_max, const ContinuationOptions& copt = {},
                           ArclengthOptions aopt = {}) {
    IsolaCapture cap;
    ShootingProblem p = problem;
    p.omega = seed_omega;
    try {
        cap.seed = shoot(p, seed_state, copt.shooting);
    } catch (const NumericalError& e) {
        cap.diagnostic = std::string("seed did not converge: ") + e.what();
        return cap;
    }
    for (double a : known_amplitudes(seed_omega)) {
        if (std::abs(cap.seed.amplitude(1) - a) <= 0.05 * std::max(a, cap.seed.amplitude(1))) {
            cap.diagnostic = "seed converged onto a known (non-isolated) branch";
            return cap;
        }
    }
    std::vector<double> up, down;
    for (double w : grid) {
        if (w > seed_omega) up.push_back(w);
        if (w < seed_omega) down.push_back(w);
    }
    std::reverse(down.begin(), down.end());
    cap.upper_forward = continue_branch(problem, cap.seed, up, copt);
    cap.upper_backward = continue_branch(problem, cap.seed, down, copt);
    aopt.shooting = copt.shooting;
    cap.loop = trace_arclength(problem, cap.seed, omega_min, omega_max, +1.0, aopt);
    cap.found = true;
    cap.diagnostic = cap.loop.closed ? "isolated branch closed" : "isolated branch found; " + cap.loop.diagnostic;
    return cap;
}

} // namespace exharm
