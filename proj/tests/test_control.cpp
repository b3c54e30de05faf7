#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "exharm/analysis.hpp"
#include "exharm/bench/scenario.hpp"
#include "exharm/control.hpp"
#include "exharm/sim/rig.hpp"

using namespace exharm;
using Catch::Matchers::WithinAbs;

TEST_CASE("harmonizer leaves a clean plant untouched") {
    Harmonizer h({2, 3, 5}, {1.5, 4.0});
    HarmonicSpectrum est(5), cmd(5);
    for (int k = 0; k < 100; ++k) h.step(est, 1e-4);
    h.write_commands(cmd);
    for (int k = 2; k <= 5; ++k) CHECK(cmd[k] == cplx{});
}

TEST_CASE("pure proportional harmonizer") {
    Harmonizer h({3}, {0.8, 0.0});
    HarmonicSpectrum est(3);
    est.set(3, cplx(0.2, -0.1));
    for (int k = 0; k < 10; ++k) {
        h.step(est, 1e-3);
        CHECK(h.command(3) == -0.8 * est[3]);
    }
}

TEST_CASE("harmonizer integrator update and freeze") {
    Harmonizer h({2}, {1.0, 10.0});
    HarmonicSpectrum est(2);
    est.set(2, cplx(1.0, 2.0));
    h.step(est, 0.01);
    CHECK(std::abs(h.integrator(2) - cplx(-0.01, -0.02)) < 1e-15);
    CHECK(std::abs(h.command(2) - (-est[2] + 10.0 * cplx(-0.01, -0.02))) < 1e-15);
    h.step(est, 0.01, true);
    CHECK(std::abs(h.integrator(2) - cplx(-0.01, -0.02)) < 1e-15);
    CHECK(h.command(4) == cplx{});
}

TEST_CASE("harmonizer rejects bad configuration") {
    CHECK_THROWS_AS(Harmonizer({2}, {1.0, -1.0}), ValidationError);
    CHECK_THROWS_AS(Harmonizer({1}, {1.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(Harmonizer({2}, {NAN, 1.0}), ValidationError);
    Harmonizer h({2, 3}, {1.0, 1.0});
    CHECK_THROWS_AS(h.step(HarmonicSpectrum(2), 1e-3), ValidationError);
    CHECK_THROWS_AS(h.override_gains(4, {1.0, 1.0}), ValidationError);
}

TEST_CASE("fundamental controller") {
    HarmonicSpectrum est(3);
    est.set(1, cplx(0.0, 2.0));
    SECTION("zero level error leaves U_1 unchanged") {
        FundamentalController f(2.0, 0.1, 10.0, 1.3);
        for (int k = 0; k < 100; ++k) f.step(est, 1e-4);
        CHECK(f.u1() == 1.3);
    }
    SECTION("zero gain is open-loop constant voltage") {
        FundamentalController f(5.0, 0.0, 10.0, 0.7);
        for (int k = 0; k < 100; ++k) f.step(est, 1e-4);
        CHECK(f.u1() == 0.7);
    }
    SECTION("integral update and voltage clamp") {
        FundamentalController f(3.0, 0.5, 1.0, 0.0);
        f.step(est, 0.1);
        CHECK_THAT(f.u1(), WithinAbs(0.05, 1e-15));
        CHECK_FALSE(f.saturated());
        for (int k = 0; k < 100; ++k) f.step(est, 0.1);
        CHECK(f.u1() == 1.0);
        CHECK(f.saturated());
    }
    CHECK_THROWS_AS(FundamentalController(0.0, 0.1, 10.0), ValidationError);
    CHECK_THROWS_AS(FundamentalController(1.0, -0.1, 10.0), ValidationError);
}

TEST_CASE("averaged linear loop converges to U_h = -D_h R/G") {
    const Plant plant = shaw_beam().plant.build();
    const double g = plant.exciter.force_gain();
    const double omega = 1.1 * plant.structure.omega[0];
    const std::vector<int> set{2, 3, 4, 5};
    Harmonizer hz(set, {3.0 / g, 2.0 * 5.592 / g});
    HarmonicSpectrum d(5);
    d.set(2, cplx(0.3, -0.1));
    d.set(3, cplx(-1.0, 0.4));
    d.set(5, cplx(0.05, 0.02));
    const double dt = 1e-3;
    // Quasi-static loop: F_h = (G U_h + D_h) / (1 + Z_e) with U_h = -k_p F_h + k_i I_h.
    for (int k = 0; k < 200'000; ++k) {
        HarmonicSpectrum f(5);
        for (int h : set)
            f.set(h, (g * hz.gains().ki * hz.integrator(h) + d[h]) /
                         (1.0 + g * hz.gains().kp + interaction_ratio(plant, h * omega)));
        hz.step(f, dt);
    }
    for (int h : set) CHECK(std::abs(hz.command(h) - fixed_point_voltage(d[h], plant.exciter)) < 1e-9);
}

// Single-mode linear loop on the rig: harmonic 2 only, fundamental off, I_2
// displaced from the zero fixed point. Decay or growth of |I_2| is compared
// with the sign of Re{1/(1 + k_p G/R + Z_e(2 Omega))}.
TEST_CASE("simulated convergence matches the predicted stability sign") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    int agree = 0, counted = 0, excluded = 0, unstable = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Plant p;
        const double wl = 150.0 + 100.0 * u01(rng);
        p.structure.omega = {wl};
        p.structure.damping = {0.05};
        p.structure.locations = {{"d", {1.0}}};
        p.exciter = Exciter{};
        p.exciter.damping = 0.05 + 0.9 * u01(rng);
        const double mu = 0.6 * u01(rng);
        const double phi = std::sqrt(mu / p.exciter.moving_mass);
        p.coupling = ForceDrive{{phi}};
        p.spring = CubicSpring{0.0, {0.0}};
        const double g = p.exciter.force_gain();

        const double W = wl * (0.7 + 0.8 * u01(rng));
        const double omega = W / 2.0, wlp = omega / 10.0;
        const double kp_n = 2.0 * u01(rng), ki_n = 0.2;
        const double kp = kp_n / g, ki = ki_n * wlp / g;
        const double re = (1.0 / (1.0 + kp_n + interaction_ratio(p, W))).real();
        if (std::abs(re) < 0.02) {
            ++excluded;
            continue;
        }

        Harmonizer hz({2}, {kp, ki});
        hz.set_integrator(2, 1.0);
        RigSettings rs;
        Rig rig(p, AdaptiveFilter(2, wlp), FundamentalController(1.0, 0.0, 1e6), hz, rs);
        rig.set_fundamental_active(false);
        const double dt = rig.sample_interval(omega);
        rig.hold(omega, static_cast<std::size_t>(5.0 / dt), dt);
        const double end = std::abs(rig.harmonizer().integrator(2));
        const bool converged = end < 1.0;
        agree += converged == (re > 0.0);
        unstable += re < 0.0;
        ++counted;
    }
    INFO("agree " << agree << " of " << counted << ", excluded " << excluded << ", unstable " << unstable);
    REQUIRE(counted >= 70);
    REQUIRE(unstable >= 5);
    CHECK(agree >= 0.95 * counted);
}

TEST_CASE("simultaneous and sequential activation reach the same commands") {
    Scenario sc = shaw_beam();
    const Plant plant = sc.plant.build();
    const double omega = 0.9 * sc.omega1();
    auto make = [&] {
        RigSettings rs;
        rs.observe_row = plant.structure.shape(sc.plant.observe_location);
        return Rig(plant, sc.make_filter(), FundamentalController(2.0, 0.1, 10.0, 0.6),
                   Harmonizer({2, 3, 4, 5, 6, 7}, {sc.kp(), sc.ki()}), rs);
    };
    Rig all = make();
    const double dt = all.sample_interval(omega);
    const double period = 2.0 * std::numbers::pi / omega;
    const auto n = [&](double periods) { return static_cast<std::size_t>(std::round(periods * period / dt)); };
    all.hold(omega, n(700), dt);

    Rig seq = make();
    for (int h = 2; h <= 7; ++h) seq.harmonizer().override_gains(h, {0.0, 0.0});
    for (int h = 2; h <= 7; ++h) {
        seq.harmonizer().override_gains(h, {sc.kp(), sc.ki()});
        seq.hold(omega, n(100), dt);
    }
    seq.hold(omega, n(100), dt);
    for (int h = 2; h <= 7; ++h) CHECK(std::abs(all.harmonizer().command(h) - seq.harmonizer().command(h)) < 1e-4);
}
