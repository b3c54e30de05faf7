#pragma once

// Adaptive Dormand-Prince 5(4) stepping on top of Boost.Odeint, with the step
// capped by a maximum step and diagnostic errors on underflow or blow-up.

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "exharm/error.hpp"

namespace exharm {

struct IntegratorConfig {
    double max_step = 1e-3;
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    double min_step = 1e-12;

    void validate() const {
        require(max_step > 0.0, "integrator max step must be positive");
        require(rel_tol > 0.0 && abs_tol > 0.0, "integrator tolerances must be positive");
        require(min_step > 0.0 && min_step < max_step, "integrator min step must be in (0, max step)");
    }

    friend bool operator==(const IntegratorConfig&, const IntegratorConfig&) = default;
};

using StateVector = std::vector<double>;

class DormandPrince {
public:
    explicit DormandPrince(IntegratorConfig config = {})
        : config_(config),
          stepper_(boost::numeric::odeint::make_controlled(config.abs_tol, config.rel_tol,
                                                           boost::numeric::odeint::runge_kutta_dopri5<StateVector>())) {
        config_.validate();
        suggested_ = config_.max_step;
    }

    const IntegratorConfig& config() const noexcept { return config_; }
    std::size_t accepted_steps() const noexcept { return accepted_; }
    std::size_t rejected_steps() const noexcept { return rejected_; }

    /// Advances x from t to t_end. `system(x, dxdt, t)` may change between
    /// calls, so the FSAL derivative is re-evaluated at the start.
    template <class System>
    void advance(System&& system, StateVector& x, double& t, double t_end) {
        dxdt_.resize(x.size());
        system(x, dxdt_, t);
        while (t < t_end) {
            const double remaining = t_end - t;
            double dt = std::min({suggested_, config_.max_step, remaining});
            const bool last = dt >= remaining * (1.0 - 1e-12);
            if (last) dt = remaining;
            const double t_before = t;
            auto result = boost::numeric::odeint::fail;
            try {
                result = stepper_.try_step(system, x, dxdt_, t, dt);
            } catch (const NumericalError&) {
                throw NumericalError("state blow-up during integration", t_before);
            }
            if (result == boost::numeric::odeint::success) {
                ++accepted_;
                for (double v : x)
                    if (!std::isfinite(v)) throw NumericalError("non-finite state after step", t_before);
                if (last) t = t_end;
                // dt now holds the controller's proposal; a step clipped by the
                // segment end must not shrink the proposal.
                suggested_ = std::min(last ? std::max(suggested_, dt) : dt, config_.max_step);
            } else {
                ++rejected_;
                suggested_ = dt;
                if (dt < config_.min_step) throw NumericalError("step size underflow", t);
            }
        }
    }

private:
    IntegratorConfig config_;
    boost::numeric::odeint::controlled_runge_kutta<boost::numeric::odeint::runge_kutta_dopri5<StateVector>> stepper_;
    StateVector dxdt_;
    double suggested_ = 1e-3;
    std::size_t accepted_ = 0;
    std::size_t rejected_ = 0;
};

struct Trajectory {
    std::vector<double> time;
    std::vector<StateVector> states;
};

/// Integrates `system` over [t0, t1] and returns samples every `output_dt`
/// (the first sample at t0, the last at t1).
template <class System>
Trajectory integrate_segment(System&& system, StateVector x, double t0, double t1, double output_dt,
                             const IntegratorConfig& config = {}) {
    require(t1 >= t0 && output_dt > 0.0, "invalid integration span");
    for (double v : x) require(std::isfinite(v), "initial state must be finite");
    DormandPrince dp(config);
    Trajectory out;
    out.time.push_back(t0);
    out.states.push_back(x);
    const auto n = static_cast<std::size_t>(std::ceil((t1 - t0) / output_dt - 1e-9));
    double t = t0;
    for (std::size_t k = 1; k <= n; ++k) {
        const double target = std::min(t1, t0 + static_cast<double>(k) * output_dt);
        dp.advance(system, x, t, target);
        out.time.push_back(target);
        out.states.push_back(x);
    }
    return out;
}

} // namespace exharm
