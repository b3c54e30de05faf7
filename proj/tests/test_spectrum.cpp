#include <catch_amalgamated.hpp>

#include <numbers>
#include <random>
#include <vector>

#include "exharm/control.hpp"
#include "exharm/sim/fft.hpp"
#include "exharm/spectrum.hpp"

using namespace exharm;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<double> sample(const HarmonicSpectrum& s, int periods, int per_period, double tau0 = 0.0) {
    std::vector<double> v;
    const double dtau = 2.0 * std::numbers::pi / per_period;
    for (int k = 0; k < periods * per_period; ++k) v.push_back(s.evaluate(tau0 + k * dtau));
    return v;
}

} // namespace

TEST_CASE("dc coefficient stays real") {
    HarmonicSpectrum s(3);
    s.set(0, cplx(2.0, 5.0));
    CHECK(s[0] == cplx(2.0, 0.0));
    s.add(0, cplx(0.0, 1.0));
    CHECK(s[0].imag() == 0.0);
}

TEST_CASE("series evaluation follows F0 + Re sum F_h e^{ih tau}") {
    HarmonicSpectrum s(2);
    s.set(0, 0.5);
    s.set(1, cplx(1.0, 0.0));
    s.set(2, cplx(0.0, 2.0));
    const double tau = 0.3;
    const double expected = 0.5 + std::cos(tau) - 2.0 * std::sin(2.0 * tau);
    CHECK_THAT(s.evaluate(tau), WithinAbs(expected, 1e-15));
}

TEST_CASE("shifted spectrum evaluates the delayed signal") {
    HarmonicSpectrum s(3);
    s.set(1, cplx(1.0, -0.5));
    s.set(3, cplx(0.2, 0.7));
    const double shift = 0.8;
    const auto d = s.shifted(shift);
    for (double tau : {0.0, 1.0, 2.5}) CHECK_THAT(d.evaluate(tau), WithinAbs(s.evaluate(tau - shift), 1e-14));
}

TEST_CASE("synthesize_command examples") {
    HarmonicSpectrum u(3);
    CHECK(synthesize_command(u, 1.3) == 0.0);
    u.set(1, 1.0);
    CHECK_THAT(synthesize_command(u, 0.0), WithinAbs(1.0, 1e-15));
    u.set(3, cplx(0.0, 1.0));
    CHECK_THAT(synthesize_command(u, std::numbers::pi / 2), WithinAbs(1.0, 1e-14));
    CHECK_THROWS_AS(synthesize_command(u, NAN), ValidationError);
}

TEST_CASE("fft of a pure cosine returns a real fundamental") {
    HarmonicSpectrum s(1);
    s.set(1, 1.7);
    const auto f = fft_window_spectrum(sample(s, 4, 200), 4, 3);
    CHECK_THAT(f[1].real(), WithinAbs(1.7, 1e-12));
    CHECK_THAT(f[1].imag(), WithinAbs(0.0, 1e-12));
    CHECK_THAT(f.magnitude(3), WithinAbs(0.0, 1e-12));
}

TEST_CASE("fft of a sine at the third harmonic returns -a i") {
    const double a = 0.4;
    std::vector<double> v;
    const int n = 300, periods = 3;
    for (int k = 0; k < n * periods; ++k) v.push_back(a * std::sin(3.0 * 2.0 * std::numbers::pi * k / n));
    const auto f = fft_window_spectrum(v, periods, 5);
    CHECK_THAT(f[3].real(), WithinAbs(0.0, 1e-12));
    CHECK_THAT(f[3].imag(), WithinAbs(-a, 1e-12));
}

TEST_CASE("synthesis and fft round trip to 1e-9") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        HarmonicSpectrum u(7);
        u.set(0, d(rng));
        for (int h = 1; h <= 7; ++h) u.set(h, cplx(d(rng), d(rng)));
        const double tau0 = 3.0 * d(rng);
        const int periods = 1 + trial % 5;
        std::vector<double> v;
        const int per = 128;
        for (int k = 0; k < per * periods; ++k) v.push_back(synthesize_command(u, tau0 + 2.0 * std::numbers::pi * k / per));
        const auto f = fft_window_spectrum(v, periods, 7, tau0);
        for (int h = 0; h <= 7; ++h) CHECK(std::abs(f[h] - u[h]) < 1e-9);
    }
}

TEST_CASE("fft rejects windows shorter than one period or too coarse") {
    std::vector<double> v(64, 1.0);
    CHECK_THROWS_AS(fft_window_spectrum(v, 0, 3), ValidationError);
    CHECK_THROWS_AS(fft_window_spectrum(v, 4, 8), ValidationError);
}
