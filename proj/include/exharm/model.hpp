#pragma once

// Time-domain plant: modal structure, electrodynamic exciter, cubic spring and
// either a force (stinger) or a base (slip table) coupling.
//
// State layout (flat, used by every integrator in the project):
//   [ eta_1 .. eta_M, eta_dot_1 .. eta_dot_M ]            force drive
//   [ eta_1 .. eta_M, eta_dot_1 .. eta_dot_M, q_b, q_b_dot ] base drive

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "exharm/error.hpp"

namespace exharm {

/// Mode-shape row at a named physical location (entries in 1/sqrt(kg)).
struct Location {
    std::string name;
    std::vector<double> shape;

    friend bool operator==(const Location&, const Location&) = default;
};

struct ModalStructure {
    std::vector<double> omega;    // rad/s
    std::vector<double> damping;  // modal damping ratio
    std::vector<Location> locations;

    int modes() const noexcept { return static_cast<int>(omega.size()); }

    const std::vector<double>& shape(std::string_view name) const {
        for (const auto& loc : locations)
            if (loc.name == name) return loc.shape;
        throw ValidationError("unknown location '" + std::string(name) + "'");
    }

    bool has_location(std::string_view name) const noexcept {
        return std::any_of(locations.begin(), locations.end(),
                           [&](const Location& l) { return l.name == name; });
    }

    void validate() const {
        require(modes() >= 1, "structure needs at least one mode");
        require(damping.size() == omega.size(), "damping and omega lengths differ");
        for (int l = 0; l < modes(); ++l) {
            require(std::isfinite(omega[l]) && omega[l] > 0.0, "modal frequency must be positive");
            require(damping[l] > 0.0 && damping[l] < 1.0, "modal damping ratio must lie in (0, 1)");
        }
        for (const auto& loc : locations) {
            require(loc.shape.size() == omega.size(), "mode shape row '" + loc.name + "' has wrong length");
            for (double v : loc.shape) require(std::isfinite(v), "mode shape row '" + loc.name + "' not finite");
        }
    }

    friend bool operator==(const ModalStructure&, const ModalStructure&) = default;
};

struct Exciter {
    double moving_mass = 0.057;   // kg
    double resistance = 2.0;      // Ohm
    double force_constant = 6.78; // N/A
    double omega = 417.4;         // rad/s
    double damping = 0.935;

    double force_gain() const noexcept { return force_constant / resistance; }

    void validate() const {
        require(moving_mass >= 0.0, "exciter moving mass must be non-negative");
        require(resistance > 0.0 && force_constant > 0.0, "exciter R and G must be positive");
        require(omega > 0.0 && damping > 0.0, "exciter frequency and damping must be positive");
    }

    friend bool operator==(const Exciter&, const Exciter&) = default;
};

struct CubicSpring {
    double stiffness = 0.0;     // N/m^3
    std::vector<double> shape;  // mode shape at the attachment point

    friend bool operator==(const CubicSpring&, const CubicSpring&) = default;
};

struct ForceDrive {
    std::vector<double> shape;  // drive-point mode shape

    friend bool operator==(const ForceDrive&, const ForceDrive&) = default;
};

struct BaseDrive {
    std::vector<double> participation;  // gamma_l = b^T M phi_l, in sqrt(kg)

    friend bool operator==(const BaseDrive&, const BaseDrive&) = default;
};

using ExcitationCoupling = std::variant<ForceDrive, BaseDrive>;

struct Plant {
    ModalStructure structure;
    Exciter exciter;
    CubicSpring spring;
    ExcitationCoupling coupling;

    int modes() const noexcept { return structure.modes(); }
    bool base_driven() const noexcept { return std::holds_alternative<BaseDrive>(coupling); }
    std::size_t state_size() const noexcept { return 2 * static_cast<std::size_t>(modes()) + (base_driven() ? 2 : 0); }

    /// Coupling coefficient vector: drive-point shape or modal participation.
    const std::vector<double>& coupling_vector() const noexcept {
        return std::visit([](const auto& c) -> const std::vector<double>& {
            if constexpr (std::is_same_v<std::decay_t<decltype(c)>, ForceDrive>) return c.shape;
            else return c.participation;
        }, coupling);
    }

    void validate() const {
        structure.validate();
        exciter.validate();
        const auto m = static_cast<std::size_t>(modes());
        require(spring.stiffness >= 0.0, "cubic stiffness must be non-negative");
        require(spring.shape.size() == m, "cubic spring shape has wrong length");
        require(coupling_vector().size() == m, "excitation coupling vector has wrong length");
        if (base_driven()) {
            const auto& g = coupling_vector();
            const double sum = std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
            require(exciter.moving_mass > sum,
                    "base drive needs moving mass (armature + table + rigid structure) above sum gamma^2");
        }
    }

    friend bool operator==(const Plant&, const Plant&) = default;
};

/// Structured view of the flat plant state.
struct PlantState {
    std::vector<double> eta;
    std::vector<double> eta_dot;
    double base = 0.0;
    double base_dot = 0.0;

    static PlantState zero(const Plant& plant) {
        const auto m = static_cast<std::size_t>(plant.modes());
        return {std::vector<double>(m, 0.0), std::vector<double>(m, 0.0), 0.0, 0.0};
    }

    static PlantState unflatten(const Plant& plant, std::span<const double> x) {
        const auto m = static_cast<std::size_t>(plant.modes());
        require(x.size() == plant.state_size(), "state vector has wrong dimension");
        PlantState s{{x.begin(), x.begin() + m}, {x.begin() + m, x.begin() + 2 * m}, 0.0, 0.0};
        if (plant.base_driven()) {
            s.base = x[2 * m];
            s.base_dot = x[2 * m + 1];
        }
        return s;
    }

    std::vector<double> flatten(const Plant& plant) const {
        std::vector<double> x(eta);
        x.insert(x.end(), eta_dot.begin(), eta_dot.end());
        if (plant.base_driven()) {
            x.push_back(base);
            x.push_back(base_dot);
        }
        return x;
    }
};

/// d_l = phi_nl,l * k_nl * (sum_n phi_nl,n eta_n)^3.
inline void nonlinear_modal_force(const CubicSpring& spring, std::span<const double> eta, std::span<double> out) {
    double deflection = 0.0;
    for (std::size_t n = 0; n < eta.size(); ++n) deflection += spring.shape[n] * eta[n];
    const double force = spring.stiffness * deflection * deflection * deflection;
    for (std::size_t l = 0; l < eta.size(); ++l) out[l] = spring.shape[l] * force;
}

inline std::vector<double> nonlinear_modal_force(const CubicSpring& spring, std::span<const double> eta) {
    std::vector<double> out(eta.size());
    nonlinear_modal_force(spring, eta, out);
    return out;
}

namespace detail {

// Free structural acceleration r_l = -2 D w eta_dot - w^2 eta - d_l (no excitation).
inline void free_acceleration(const Plant& plant, std::span<const double> x, std::span<double> r) {
    const auto m = static_cast<std::size_t>(plant.modes());
    const auto& w = plant.structure.omega;
    const auto& D = plant.structure.damping;
    nonlinear_modal_force(plant.spring, x.first(m), r);
    for (std::size_t l = 0; l < m; ++l)
        r[l] = -2.0 * D[l] * w[l] * x[m + l] - w[l] * w[l] * x[l] - r[l];
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Closed-form solution of the exciter/structure algebraic loop. Returns the
// applied excitation (force f or base acceleration a_b) given r.
inline double solve_excitation(const Plant& plant, double u, std::span<const double> x, std::span<const double> r) {
    const auto m = static_cast<std::size_t>(plant.modes());
    const auto& ex = plant.exciter;
    const auto& c = plant.coupling_vector();
    const double sum_sq = dot(c, c);
    const double g = dot(c, r);
    const double stiff = ex.omega * ex.omega;
    const double damp = 2.0 * ex.damping * ex.omega;
    if (!plant.base_driven()) {
        const double q = dot(c, x.first(m));
        const double q_dot = dot(c, x.subspan(m, m));
        return (ex.force_gain() * u - ex.moving_mass * (g + damp * q_dot + stiff * q)) /
               (1.0 + ex.moving_mass * sum_sq);
    }
    const double q_b = x[2 * m];
    const double q_b_dot = x[2 * m + 1];
    return (ex.force_gain() * u - ex.moving_mass * (damp * q_b_dot + stiff * q_b) - g) /
           (ex.moving_mass - sum_sq);
}

} // namespace detail

/// Force delivered by the exciter through the rigid stinger (force drive only).
inline double applied_force(const Plant& plant, double u, std::span<const double> x) {
    require(!plant.base_driven(), "applied_force requires a force-drive coupling");
    std::vector<double> r(static_cast<std::size_t>(plant.modes()));
    detail::free_acceleration(plant, x, r);
    return detail::solve_excitation(plant, u, x, r);
}

/// Applied excitation: force f (force drive) or base acceleration a_b (base drive).
inline double excitation_signal(const Plant& plant, double u, std::span<const double> x) {
    std::vector<double> r(static_cast<std::size_t>(plant.modes()));
    detail::free_acceleration(plant, x, r);
    return detail::solve_excitation(plant, u, x, r);
}

/// First-order state derivative of the coupled exciter/structure system for
/// voltage u. Returns the applied excitation as a by-product.
inline double state_derivative(const Plant& plant, double u, std::span<const double> x, std::span<double> dxdt) {
    const auto m = static_cast<std::size_t>(plant.modes());
    for (double v : x)
        if (!std::isfinite(v)) throw NumericalError("non-finite plant state (simulation blow-up)");
    std::span<double> acc = dxdt.subspan(m, m);
    detail::free_acceleration(plant, x, acc);
    const double e = detail::solve_excitation(plant, u, x, acc);
    const auto& c = plant.coupling_vector();
    for (std::size_t l = 0; l < m; ++l) dxdt[l] = x[m + l];
    if (!plant.base_driven()) {
        for (std::size_t l = 0; l < m; ++l) acc[l] += c[l] * e;
    } else {
        for (std::size_t l = 0; l < m; ++l) acc[l] -= c[l] * e;
        dxdt[2 * m] = x[2 * m + 1];
        dxdt[2 * m + 1] = e;
    }
    return e;
}

inline std::vector<double> state_derivative(const Plant& plant, double u, std::span<const double> x) {
    std::vector<double> dxdt(x.size());
    state_derivative(plant, u, x, dxdt);
    return dxdt;
}

/// Structure alone under an imposed excitation (exciter bypassed): f at the
/// drive point, or base acceleration a_b. State is [eta, eta_dot].
inline void imposed_structure_derivative(const Plant& plant, double excitation, std::span<const double> x,
                                         std::span<double> dxdt) {
    const auto m = static_cast<std::size_t>(plant.modes());
    std::span<double> acc = dxdt.subspan(m, m);
    detail::free_acceleration(plant, x.first(2 * m), acc);
    const auto& c = plant.coupling_vector();
    const double sign = plant.base_driven() ? -1.0 : 1.0;
    for (std::size_t l = 0; l < m; ++l) {
        dxdt[l] = x[m + l];
        acc[l] += sign * c[l] * excitation;
    }
}

/// Modal forcing per unit imposed excitation (phi_ex for force, -gamma for base).
inline std::vector<double> modal_input_vector(const Plant& plant) {
    std::vector<double> b = plant.coupling_vector();
    if (plant.base_driven())
        for (double& v : b) v = -v;
    return b;
}

enum class Frame { relative, absolute };

struct Observation {
    double displacement = 0.0;
    double velocity = 0.0;
};

/// Physical displacement/velocity at a mode-shape row. The absolute frame adds
/// the base motion (base drive only).
inline Observation observe(const Plant& plant, std::span<const double> x, const std::vector<double>& row,
                           Frame frame = Frame::relative) {
    const auto m = static_cast<std::size_t>(plant.modes());
    require(row.size() == m, "observation row has wrong length");
    Observation o{detail::dot(row, x.first(m)), detail::dot(row, x.subspan(m, m))};
    if (frame == Frame::absolute && plant.base_driven()) {
        o.displacement += x[2 * m];
        o.velocity += x[2 * m + 1];
    }
    return o;
}

inline Observation observe(const Plant& plant, std::span<const double> x, std::string_view location,
                           Frame frame = Frame::relative) {
    return observe(plant, x, plant.structure.shape(location), frame);
}

/// Total modal energy sum 1/2 (eta_dot^2 + w^2 eta^2) of the linear part.
inline double modal_energy(const Plant& plant, std::span<const double> x) {
    const auto m = static_cast<std::size_t>(plant.modes());
    double e = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
        const double w = plant.structure.omega[l];
        e += 0.5 * (x[m + l] * x[m + l] + w * w * x[l] * x[l]);
    }
    return e;
}

} // namespace exharm
