#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "exharm/estimator.hpp"
#include "exharm/sim/fft.hpp"

using namespace exharm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double pi = std::numbers::pi;

// Runs the filter on f(tau) at constant omega for `periods`, `per` samples per period.
template <class Signal>
AdaptiveFilter run(AdaptiveFilter f, Signal&& signal, double omega, double periods, int per,
                   std::vector<HarmonicSpectrum>* history = nullptr, std::vector<double>* samples = nullptr) {
    const double dt = 2.0 * pi / omega / per;
    const auto n = static_cast<long>(periods * per);
    for (long k = 1; k <= n; ++k) {
        const double tau = omega * dt * static_cast<double>(k);
        const double s = signal(tau);
        f.step(s, tau, dt);
        if (history) history->push_back(f.estimate());
        if (samples) samples->push_back(s);
    }
    return f;
}

} // namespace

TEST_CASE("constant input converges to the dc coefficient") {
    AdaptiveFilter f(3, 5.0);
    f = run(f, [](double) { return 0.7; }, 50.0, 200, 200);
    CHECK_THAT(f.estimate().dc(), WithinAbs(0.7, 1e-8));
    for (int h = 1; h <= 3; ++h) CHECK(f.estimate().magnitude(h) < 1e-6);
}

TEST_CASE("fundamental estimate behaves as a first-order low-pass at w_LP") {
    const double omega = 50.0, wlp = omega / 10.0;
    const int per = 400;
    const double dt = 2.0 * pi / omega / per, period = 2.0 * pi / omega;
    AdaptiveFilter f(2, wlp);
    // Period averages remove the 2 Omega ripple before locating the 1 - 1/e crossing.
    std::vector<double> centre, avg;
    for (int p = 0; p < 200; ++p) {
        double acc = 0.0;
        for (int k = 1; k <= per; ++k) {
            const double t = (p * per + k) * dt;
            f.step(std::cos(omega * t), omega * t, dt);
            acc += f.estimate()[1].real();
        }
        centre.push_back((p + 0.5) * period);
        avg.push_back(acc / per);
    }
    const double level = 1.0 - std::exp(-1.0);
    double crossing = -1.0;
    for (std::size_t i = 1; i < avg.size(); ++i)
        if (avg[i - 1] < level && avg[i] >= level) {
            crossing = centre[i - 1] + (level - avg[i - 1]) / (avg[i] - avg[i - 1]) * period;
            break;
        }
    REQUIRE(crossing > 0.0);
    CHECK_THAT(crossing, WithinRel(1.0 / wlp, 0.10));
    CHECK(std::abs(f.estimate()[1] - cplx(1.0, 0.0)) < 1e-3);
}

TEST_CASE("steady estimate of a three-harmonic series matches the fft") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    HarmonicSpectrum truth(3);
    for (int h = 1; h <= 3; ++h) truth.set(h, cplx(d(rng), d(rng)));
    truth.set(0, d(rng));
    const double omega = 60.0;
    const int per = 500;
    std::vector<double> samples;
    auto f = run(AdaptiveFilter(3, 3.0), [&](double tau) { return truth.evaluate(tau); }, omega, 300, per, nullptr,
                 &samples);
    std::vector<double> tail(samples.end() - 10 * per, samples.end());
    const auto fft = fft_window_spectrum(tail, 10, 3, omega * (2.0 * pi / omega / per) * static_cast<double>(samples.size() - 10 * per + 1));
    for (int h = 0; h <= 3; ++h)
        CHECK(std::abs(f.estimate()[h] - fft[h]) <= 1e-3 * std::max(std::abs(fft[h]), 1e-3));
}

TEST_CASE("exact coefficients are a fixed point up to O(dt^2)") {
    HarmonicSpectrum truth(3);
    truth.set(0, 0.2);
    truth.set(1, cplx(1.0, 0.5));
    truth.set(3, cplx(-0.3, 0.1));
    AdaptiveFilter f(3, 5.0);
    f.reset(truth);
    const double omega = 40.0, dt = 1e-4;
    double max_dev = 0.0;
    for (int k = 1; k <= 5000; ++k) {
        const double tau = omega * k * dt;
        f.step(truth.evaluate(tau), tau, dt);
        for (int h = 0; h <= 3; ++h) max_dev = std::max(max_dev, std::abs(f.estimate()[h] - truth[h]));
    }
    CHECK(max_dev < 1e-12);
}

TEST_CASE("filter response is linear in the input") {
    const double omega = 30.0;
    auto a = [](double tau) { return std::cos(tau) + 0.3; };
    auto b = [](double tau) { return 0.5 * std::sin(2.0 * tau); };
    const auto fa = run(AdaptiveFilter(3, 2.0), a, omega, 20, 100).estimate();
    const auto fb = run(AdaptiveFilter(3, 2.0), b, omega, 20, 100).estimate();
    const auto fs = run(AdaptiveFilter(3, 2.0), [&](double t) { return a(t) + b(t); }, omega, 20, 100).estimate();
    for (int h = 0; h <= 3; ++h) CHECK(std::abs(fs[h] - (fa[h] + fb[h])) < 1e-12);
}

TEST_CASE("delayed input yields rotated coefficients") {
    HarmonicSpectrum truth(3);
    truth.set(1, cplx(1.0, 0.0));
    truth.set(2, cplx(0.2, -0.4));
    truth.set(3, cplx(0.0, 0.3));
    const double phi0 = 0.9, omega = 40.0;
    auto base = run(AdaptiveFilter(3, 4.0), [&](double tau) { return truth.evaluate(tau); }, omega, 400, 200);
    auto shifted = run(AdaptiveFilter(3, 4.0), [&](double tau) { return truth.evaluate(tau - phi0); }, omega, 400, 200);
    for (int h = 1; h <= 3; ++h)
        CHECK(std::abs(shifted.estimate()[h] - base.estimate()[h] * std::polar(1.0, -h * phi0)) < 1e-6);
}

TEST_CASE("non-finite samples and bad arguments are rejected") {
    AdaptiveFilter f(2, 1.0);
    CHECK_THROWS_AS(f.step(NAN, 0.0, 1e-3), NumericalError);
    CHECK_THROWS_AS(f.step(1.0, 0.0, 0.0), ValidationError);
    CHECK_THROWS_AS(AdaptiveFilter(0, 1.0), ValidationError);
    CHECK_THROWS_AS(AdaptiveFilter(2, 0.0), ValidationError);
    f.step(1.0, 0.0, 0.2);
    CHECK(f.coarse_step_seen());
}

TEST_CASE("fluctuation metric") {
    const double omega = 50.0, period = 2.0 * pi / omega;
    SECTION("noiseless steady input gives zero") {
        HarmonicSpectrum truth(3);
        truth.set(1, 1.0);
        truth.set(3, cplx(0.0, 0.4));
        AdaptiveFilter f(3, 5.0);
        f.reset(truth);
        std::vector<HarmonicSpectrum> hist;
        run(f, [&](double tau) { return truth.evaluate(tau); }, omega, 20, 200, &hist);
        for (double v : fluctuation_metric(hist, 20 * period, period)) CHECK(v < 1e-10);
    }
    SECTION("empty history and short windows are rejected") {
        std::vector<HarmonicSpectrum> empty;
        CHECK_THROWS_AS(fluctuation_metric(empty, 10 * period, period), ValidationError);
        std::vector<HarmonicSpectrum> one(1, HarmonicSpectrum(2));
        CHECK_THROWS_AS(fluctuation_metric(one, 2 * period, period), ValidationError);
    }
    SECTION("noise: metric grows with the cutoff, halving does not increase it") {
        const std::vector<double> cutoffs = {0.5, 1.0, 2.0, 4.0, 8.0};
        std::vector<double> mean(cutoffs.size(), 0.0);
        const int seeds = 10;
        for (int s = 0; s < seeds; ++s) {
            for (std::size_t i = 0; i < cutoffs.size(); ++i) {
                std::mt19937_64 rng(100 + s);
                std::normal_distribution<double> noise(0.0, 0.2);
                AdaptiveFilter f(3, cutoffs[i]);
                HarmonicSpectrum truth(3);
                truth.set(1, 1.0);
                f.reset(truth);
                std::vector<HarmonicSpectrum> hist;
                run(f, [&](double tau) { return std::cos(tau) + noise(rng); }, omega, 60, 100, &hist);
                mean[i] += fluctuation_metric(hist, 60 * period, period)[1] / seeds;
            }
        }
        for (std::size_t i = 1; i < mean.size(); ++i) CHECK(mean[i] > mean[i - 1]);
    }
}
