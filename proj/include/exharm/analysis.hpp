#pragma once

// Closed-form frequency-domain analysis of the linearised exciter/structure
// loop: dynamic stiffnesses, interaction ratio, stability margin of the
// harmonization loop, mass ratios and drive-point screening.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "exharm/error.hpp"
#include "exharm/model.hpp"
#include "exharm/spectrum.hpp"

namespace exharm {

/// S_l(W) = -W^2 + 2 D_l w_l i W + w_l^2.
inline cplx structural_stiffness(const ModalStructure& s, int mode, double freq) {
    const double w = s.omega.at(static_cast<std::size_t>(mode));
    const double d = s.damping.at(static_cast<std::size_t>(mode));
    return {w * w - freq * freq, 2.0 * d * w * freq};
}

/// S_e(W) = -W^2 + 2 D_ex w_ex i W + w_ex^2.
inline cplx exciter_stiffness(const Exciter& e, double freq) {
    return {e.omega * e.omega - freq * freq, 2.0 * e.damping * e.omega * freq};
}

/// mu = m_ex phi_ex^2 (force drive) or gamma^2 / m_ex (base drive).
inline double mass_ratio(const Plant& plant, int mode) {
    const double c = plant.coupling_vector().at(static_cast<std::size_t>(mode));
    const double m = plant.exciter.moving_mass;
    if (!plant.base_driven()) return m * c * c;
    return m > 0.0 ? c * c / m : 0.0;
}

/// Single-mode interaction ratio Z_e,l(W).
///   force: mu_l S_e / S_l
///   base:  -mu_l W^4 / (S_e S_l)
inline cplx interaction_ratio(const Plant& plant, int mode, double freq) {
    const cplx se = exciter_stiffness(plant.exciter, freq);
    const cplx sl = structural_stiffness(plant.structure, mode, freq);
    const double mu = mass_ratio(plant, mode);
    if (!plant.base_driven()) return mu * se / sl;
    const double w2 = freq * freq;
    return -mu * w2 * w2 / (se * sl);
}

/// Z_e(W) summed over all retained modes.
inline cplx interaction_ratio(const Plant& plant, double freq) {
    cplx z{};
    for (int l = 0; l < plant.modes(); ++l) z += interaction_ratio(plant, l, freq);
    return z;
}

/// Linear voltage-to-excitation transfer P(W) of the coupled exciter/structure
/// system (force per volt, or base acceleration per volt).
inline cplx excitation_transfer(const Plant& plant, double freq) {
    const double g = plant.exciter.force_gain();
    const cplx z = interaction_ratio(plant, freq);
    if (!plant.base_driven()) return g / (1.0 + z);
    const cplx se = exciter_stiffness(plant.exciter, freq);
    return -freq * freq * g / (plant.exciter.moving_mass * se * (1.0 + z));
}

/// Harmonization-loop stability margin at frequency W (evaluate at h*Omega).
/// For force drive this is exactly Re{k_i / (1 + k_p G/R + Z_e)}; for base
/// drive the same loop expression Re{k_i/(1/P + k_p)} R/G is used. Positive
/// means the fixed point F_h = 0 is predicted asymptotically stable.
inline double stability_margin(const Plant& plant, double freq, double kp, double ki) {
    const cplx p = excitation_transfer(plant, freq);
    return (ki / (1.0 / p + kp)).real() / plant.exciter.force_gain();
}

/// Voltage coefficient that cancels an imposed disturbance D_h: U_h = -D_h R/G.
inline cplx fixed_point_voltage(cplx disturbance, const Exciter& exciter) {
    return -disturbance / exciter.force_gain();
}

struct AliasingCheck {
    bool admissible = false;      // H < 2 pi nu_s / Omega_max
    bool nyquist_warning = false; // H >= pi nu_s / Omega_max
    double bound = 0.0;
};

inline AliasingCheck check_truncation_order(int order, double sample_rate_hz, double omega_max) {
    require(sample_rate_hz > 0.0 && omega_max > 0.0, "sample rate and frequency must be positive");
    AliasingCheck c;
    c.bound = 2.0 * std::numbers::pi * sample_rate_hz / omega_max;
    c.admissible = order < c.bound;
    c.nyquist_warning = order >= 0.5 * c.bound;
    return c;
}

struct StabilityScan {
    std::string location;
    double kp = 0.0;
    double ki = 0.0;
    std::vector<double> frequencies;
    std::vector<double> margin;
    std::vector<double> mass_ratios;
    std::vector<double> negative_crossings;  // interpolated frequencies of + to - sign changes
    std::vector<double> positive_crossings;

    bool admissible() const noexcept { return negative_crossings.empty() && positive_crossings.empty() &&
                                              std::all_of(margin.begin(), margin.end(), [](double m) { return m > 0.0; }); }

    /// max |margin| / min |margin| over the band; smaller means flatter.
    double variation_ratio() const {
        double lo = INFINITY, hi = 0.0;
        for (double m : margin) {
            lo = std::min(lo, std::abs(m));
            hi = std::max(hi, std::abs(m));
        }
        return lo > 0.0 ? hi / lo : INFINITY;
    }
};

/// Margin curve of one force-drive candidate over an increasing grid.
inline StabilityScan scan_stability(const Plant& base, const std::string& location,
                                    const std::vector<double>& grid, double kp, double ki) {
    require(!grid.empty(), "stability grid is empty");
    for (std::size_t i = 1; i < grid.size(); ++i) require(grid[i] > grid[i - 1], "stability grid must increase");
    Plant plant = base;
    plant.coupling = ForceDrive{plant.structure.shape(location)};
    StabilityScan scan{location, kp, ki, grid, {}, {}, {}, {}};
    for (int l = 0; l < plant.modes(); ++l) scan.mass_ratios.push_back(mass_ratio(plant, l));
    for (double w : grid) scan.margin.push_back(stability_margin(plant, w, kp, ki));
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double a = scan.margin[i - 1], b = scan.margin[i];
        if ((a > 0.0) == (b > 0.0)) continue;
        const double w = grid[i - 1] + (grid[i] - grid[i - 1]) * a / (a - b);
        (a > 0.0 ? scan.negative_crossings : scan.positive_crossings).push_back(w);
    }
    return scan;
}

/// One StabilityScan per (candidate, kp) pair.
inline std::vector<StabilityScan> drive_point_report(const Plant& plant, const std::vector<std::string>& candidates,
                                                     const std::vector<double>& grid, const std::vector<double>& kps,
                                                     double ki) {
    require(!candidates.empty(), "drive point report needs at least one candidate");
    std::vector<StabilityScan> out;
    for (const auto& c : candidates)
        for (double kp : kps) out.push_back(scan_stability(plant, c, grid, kp, ki));
    return out;
}

} // namespace exharm
