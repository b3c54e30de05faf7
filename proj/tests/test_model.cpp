#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "exharm/bench/scenario.hpp"
#include "exharm/model.hpp"
#include "exharm/sim/integrator.hpp"

using namespace exharm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Plant shaw_plant(double k_nl = 2.517e6) {
    Scenario sc = shaw_beam();
    sc.plant.cubic_stiffness = k_nl;
    return sc.plant.build();
}

} // namespace

TEST_CASE("cubic modal force examples") {
    const Plant p = shaw_plant();
    CHECK(nonlinear_modal_force(p.spring, std::vector<double>{0.0, 0.0}) == std::vector<double>{0.0, 0.0});

    CubicSpring linear{0.0, {5.34, 4.67}};
    const auto z = nonlinear_modal_force(linear, std::vector<double>{0.3, -2.0});
    CHECK(z[0] == 0.0);
    CHECK(z[1] == 0.0);

    const auto d = nonlinear_modal_force(p.spring, std::vector<double>{1e-3, 0.0});
    const double y = 5.34e-3;
    CHECK_THAT(d[0], WithinRel(5.34 * 2.517e6 * y * y * y, 1e-14));
    CHECK_THAT(d[1], WithinRel(4.67 * 2.517e6 * y * y * y, 1e-14));
}

TEST_CASE("applied force examples") {
    const Plant p = shaw_plant();
    const std::vector<double> zero(4, 0.0);
    CHECK(applied_force(p, 0.0, zero) == 0.0);

    const double expected = (6.78 / 2.0) / (1.0 + 0.057 * (0.125 * 0.125 + 0.575 * 0.575));
    CHECK_THAT(applied_force(p, 1.0, zero), WithinRel(expected, 1e-14));

    Plant massless = p;
    massless.exciter.moving_mass = 0.0;
    const std::vector<double> x{1e-3, -2e-4, 0.05, 0.3};
    CHECK_THAT(applied_force(massless, 1.3, x), WithinRel(1.3 * 6.78 / 2.0, 1e-14));

    Plant base = p;
    base.coupling = BaseDrive{{0.0, 0.0}};
    CHECK_THROWS_AS(applied_force(base, 1.0, std::vector<double>(6, 0.0)), ValidationError);
}

TEST_CASE("algebraic loop residual is at machine precision") {
    const Plant p = shaw_plant();
    const std::vector<double> x{2e-3, -5e-4, 0.11, -0.04};
    const double u = 0.7;
    std::vector<double> dxdt(4);
    const double f = state_derivative(p, u, x, dxdt);
    const auto& phi = p.coupling_vector();
    const auto& e = p.exciter;
    const double q = phi[0] * x[0] + phi[1] * x[1];
    const double qd = phi[0] * x[2] + phi[1] * x[3];
    const double qdd = phi[0] * dxdt[2] + phi[1] * dxdt[3];
    const double exciter_eq =
        e.force_gain() * u - e.moving_mass * (qdd + 2.0 * e.damping * e.omega * qd + e.omega * e.omega * q);
    CHECK(std::abs(f - exciter_eq) < 1e-12 * std::abs(f));

    const auto d = nonlinear_modal_force(p.spring, std::span<const double>(x).first(2));
    for (int l = 0; l < 2; ++l) {
        const double w = p.structure.omega[l], D = p.structure.damping[l];
        const double structure_eq = phi[l] * f - 2.0 * D * w * x[2 + l] - w * w * x[l] - d[l];
        CHECK(std::abs(dxdt[2 + l] - structure_eq) < 1e-12 * std::abs(dxdt[2 + l]));
    }
}

TEST_CASE("state derivative vanishes at the equilibrium and rejects blow-up") {
    const Plant p = shaw_plant();
    const auto d = state_derivative(p, 0.0, std::vector<double>(4, 0.0));
    for (double v : d) CHECK(v == 0.0);
    CHECK_THROWS_AS(state_derivative(p, 0.0, std::vector<double>{NAN, 0.0, 0.0, 0.0}), NumericalError);
}

TEST_CASE("free decay of mode 1 has rate D1 w1") {
    Plant p = shaw_plant(0.0);
    p.exciter.moving_mass = 0.0;  // exciter bypassed
    const double w = 55.92, D = 0.01, sigma = D * w;
    const double wd = w * std::sqrt(1.0 - D * D), td = 2.0 * std::numbers::pi / wd;
    auto sys = [&](const StateVector& x, StateVector& dxdt, double) { state_derivative(p, 0.0, x, dxdt); };
    IntegratorConfig cfg;
    const auto tr = integrate_segment(sys, {1.0, 0.0, -sigma, 0.0}, 0.0, 10.0 * td, td, cfg);
    // eta_1(t) = e^{-sigma t} (cos wd t) with eta_dot(0) = -sigma: peaks at multiples of td.
    const double rate = -std::log(tr.states.back()[0]) / (10.0 * td);
    CHECK_THAT(rate, WithinRel(0.5592, 0.01));
    CHECK(tr.states.back()[1] == 0.0);
}

TEST_CASE("imposed mono-harmonic force matches the linear resonance amplitude") {
    const Plant p = shaw_plant(0.0);
    const double w = 55.92, D = 0.01, F = 2.0;
    auto sys = [&](const StateVector& x, StateVector& dxdt, double t) {
        imposed_structure_derivative(p, F * std::cos(w * t), x, dxdt);
    };
    const double period = 2.0 * std::numbers::pi / w;
    const double settle = 300.0 * period;  // e^{-D w t} ~ 1e-8
    auto tr = integrate_segment(sys, StateVector(4, 0.0), 0.0, settle, period);
    StateVector x = tr.states.back();
    auto last = integrate_segment(sys, x, settle, settle + period, period / 400.0);
    double amp = 0.0;
    for (const auto& s : last.states) amp = std::max(amp, std::abs(s[0]));
    CHECK_THAT(amp, WithinRel(0.125 * F / (2.0 * D * w * w), 2e-3));
}

TEST_CASE("observation rows") {
    const Plant p = shaw_plant();
    CHECK(observe(p, std::vector<double>(4, 0.0), "x3").displacement == 0.0);
    CHECK_THAT(observe(p, std::vector<double>{1.0, 0.0, 0.0, 0.0}, "x3").displacement, WithinAbs(5.13, 1e-15));
    CHECK_THAT(observe(p, std::vector<double>{1.0, 1.0, 0.0, 0.0}, "x4").displacement, WithinAbs(10.01, 1e-14));
    CHECK_THROWS_AS(observe(p, std::vector<double>(4, 0.0), "x9"), ValidationError);
}

TEST_CASE("modal energy is non-increasing in free linear decay") {
    Plant p = shaw_plant(0.0);
    p.exciter.moving_mass = 0.0;  // the armature would exchange energy with the modes
    auto sys = [&](const StateVector& x, StateVector& dxdt, double) { state_derivative(p, 0.0, x, dxdt); };
    const auto tr = integrate_segment(sys, {1e-3, 5e-4, 0.0, 0.1}, 0.0, 2.0, 1e-3);
    double prev = INFINITY;
    for (const auto& s : tr.states) {
        const double e = modal_energy(p, s);
        CHECK(e <= prev * (1.0 + 1e-9));
        prev = e;
    }
    // Mode 1 alone decays at 2 D w over whole periods.
    const double w = 55.92, T = 2.0 * std::numbers::pi / w;
    const auto m1 = integrate_segment(sys, {1e-3, 0.0, 0.0, 0.0}, 0.0, 20.0 * T, 20.0 * T);
    const double ratio = modal_energy(p, m1.states.back()) / modal_energy(p, m1.states.front());
    CHECK_THAT(ratio, WithinRel(std::exp(-2.0 * 0.01 * w * 20.0 * T), 0.02));
}

TEST_CASE("base drive with zero participation transports the structure rigidly") {
    Plant p = shaw_plant();
    p.coupling = BaseDrive{{0.0, 0.0}};
    p.exciter.moving_mass = 1.0;
    auto sys = [&](const StateVector& x, StateVector& dxdt, double t) {
        state_derivative(p, std::sin(100.0 * t), x, dxdt);
    };
    const auto tr = integrate_segment(sys, StateVector(6, 0.0), 0.0, 0.5, 0.01);
    for (const auto& s : tr.states) {
        CHECK(s[0] == 0.0);
        CHECK(s[1] == 0.0);
    }
    CHECK(std::abs(tr.states.back()[4]) > 0.0);
}

TEST_CASE("base drive requires a moving mass above the modal participation") {
    Plant p = shaw_plant();
    p.coupling = BaseDrive{{0.5, 0.5}};
    p.exciter.moving_mass = 0.4;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.exciter.moving_mass = 1.0;
    CHECK_NOTHROW(p.validate());
}
