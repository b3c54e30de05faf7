#pragma once

// Scenario and schedule configuration. Files are JSON with the physical unit
// spelled out in every key; `shaw_beam()` ships the canonical beam/exciter
// scenario with the published modal and exciter parameters.

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exharm/analysis.hpp"
#include "exharm/control.hpp"
#include "exharm/error.hpp"
#include "exharm/estimator.hpp"
#include "exharm/model.hpp"
#include "exharm/sim/integrator.hpp"

namespace exharm {

using json = nlohmann::ordered_json;

struct PlantSpec {
    ModalStructure structure;
    Exciter exciter;
    double cubic_stiffness = 0.0;
    std::string spring_location;
    bool base_drive = false;
    std::string drive_location;               // force drive
    std::vector<double> participation;        // base drive gamma
    std::string observe_location;

    Plant build() const {
        Plant p;
        p.structure = structure;
        p.exciter = exciter;
        p.spring = CubicSpring{cubic_stiffness, spring_location.empty()
                                                    ? std::vector<double>(structure.omega.size(), 0.0)
                                                    : structure.shape(spring_location)};
        if (base_drive) p.coupling = BaseDrive{participation};
        else p.coupling = ForceDrive{structure.shape(drive_location)};
        p.validate();
        return p;
    }

    friend bool operator==(const PlantSpec&, const PlantSpec&) = default;
};

struct EstimatorSpec {
    int order = 7;
    double cutoff_over_omega1 = 0.1;

    friend bool operator==(const EstimatorSpec&, const EstimatorSpec&) = default;
};

struct ControlSpec {
    double target_level = 2.0;          // N (force drive) or m/s^2 (base drive)
    double fundamental_gain = 0.1;      // V per unit per s
    std::vector<int> harmonics = {2, 3, 4, 5, 6, 7};
    double kp_normalized = 3.0;         // k_p G/R
    double ki_normalized = 2.0;         // k_i G/(R w_LP)
    double voltage_limit = 10.0;        // V
    bool harmonizer_enabled = true;
    bool fundamental_enabled = true;
    std::optional<double> initial_u1;   // V; default target R/G

    friend bool operator==(const ControlSpec&, const ControlSpec&) = default;
};

struct NoiseSpec {
    double std = 0.0;  // same unit as the excitation

    friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

struct SimulationSpec {
    double sample_rate = 10'000.0;
    IntegratorConfig integrator{};

    friend bool operator==(const SimulationSpec&, const SimulationSpec&) = default;
};

struct JumpSpec {
    std::size_t after_point = 0;   // index into the main grid
    double delta_omega = 0.0;      // rad/s
    double delta_u1 = 0.0;         // V
    std::vector<double> continuation;  // rad/s, stepped after the jump

    friend bool operator==(const JumpSpec&, const JumpSpec&) = default;
};

struct SteppedSineSchedule {
    std::vector<double> omegas;     // rad/s
    double ramp_periods = 10.0;     // periods of the lowest modal frequency
    int hold_periods = 600;         // excitation periods
    int window_periods = 300;       // excitation periods, last part of each hold
    std::optional<JumpSpec> jump;

    bool forward() const noexcept { return omegas.size() < 2 || omegas.back() > omegas.front(); }

    void validate() const {
        require(!omegas.empty(), "schedule grid is empty");
        for (double w : omegas) require(std::isfinite(w) && w > 0.0, "schedule frequencies must be positive");
        const bool fwd = forward();
        for (std::size_t i = 1; i < omegas.size(); ++i)
            require(fwd ? omegas[i] > omegas[i - 1] : omegas[i] < omegas[i - 1], "schedule grid must be monotone");
        require(ramp_periods > 0.0, "ramp duration must be positive");
        require(window_periods >= 1 && window_periods <= hold_periods, "window must satisfy 1 <= window <= hold");
        if (jump) {
            require(jump->after_point < omegas.size(), "jump point outside the grid");
            for (double w : jump->continuation) require(w > 0.0, "continuation frequencies must be positive");
        }
    }

    friend bool operator==(const SteppedSineSchedule&, const SteppedSineSchedule&) = default;
};

struct Scenario {
    std::string name = "shaw-beam";
    PlantSpec plant;
    EstimatorSpec estimator;
    ControlSpec control;
    NoiseSpec noise;
    SimulationSpec simulation;
    SteppedSineSchedule schedule;
    std::uint64_t seed = 0;

    double omega1() const { return plant.structure.omega.at(0); }
    double cutoff() const { return estimator.cutoff_over_omega1 * omega1(); }
    double kp() const { return control.kp_normalized / plant.exciter.force_gain(); }
    double ki() const { return control.ki_normalized * cutoff() / plant.exciter.force_gain(); }
    double ramp_duration() const { return schedule.ramp_periods * 2.0 * std::numbers::pi / omega1(); }

    double initial_u1() const {
        if (control.initial_u1) return *control.initial_u1;
        return control.target_level / plant.exciter.force_gain();
    }

    AdaptiveFilter make_filter() const { return {estimator.order, cutoff()}; }
    FundamentalController make_fundamental() const {
        return {control.target_level, control.fundamental_gain, control.voltage_limit, initial_u1()};
    }
    Harmonizer make_harmonizer() const {
        if (!control.harmonizer_enabled) return {};
        return {control.harmonics, PiGains{kp(), ki()}};
    }

    void validate() const {
        const Plant p = plant.build();
        require(plant.structure.has_location(plant.observe_location), "unknown observation location");
        require(estimator.order >= 1, "estimator order must be >= 1");
        require(estimator.cutoff_over_omega1 > 0.0, "cutoff must be positive");
        for (int h : control.harmonics)
            require(h >= 2 && h <= estimator.order, "harmonized set must lie in 2..order");
        require(control.target_level > 0.0, "target level must be positive");
        require(control.voltage_limit > 0.0, "voltage limit must be positive");
        require(control.ki_normalized >= 0.0, "integral gain must be non-negative");
        require(noise.std >= 0.0, "noise std must be non-negative");
        require(simulation.sample_rate > 0.0, "sample rate must be positive");
        simulation.integrator.validate();
        schedule.validate();
        (void)p;
    }

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Beam with cubic spring at the free end, two modes, exciter at x1.
inline Scenario shaw_beam() {
    Scenario s;
    s.name = "shaw-beam";
    auto& st = s.plant.structure;
    st.omega = {55.92, 199.18};
    st.damping = {0.01, 0.01};
    st.locations = {{"x1", {0.125, -0.575}}, {"x2", {1.35, -3.86}}, {"x3", {5.13, 3.8}}, {"x4", {5.34, 4.67}}};
    s.plant.exciter = Exciter{0.057, 2.0, 6.78, 417.4, 0.935};
    s.plant.cubic_stiffness = 2.517e6;
    s.plant.spring_location = "x4";
    s.plant.drive_location = "x1";
    s.plant.observe_location = "x3";
    s.estimator = {7, 0.1};
    s.control = ControlSpec{};
    s.schedule.omegas.clear();
    for (int i = 0; i <= 80; ++i) s.schedule.omegas.push_back(st.omega[0] * (0.8 + 0.01 * i));
    return s;
}

// --- serialisation --------------------------------------------------------

inline json to_json(const SteppedSineSchedule& s) {
    json j;
    j["omega_rad_s"] = s.omegas;
    j["ramp_periods_of_omega1"] = s.ramp_periods;
    j["hold_periods"] = s.hold_periods;
    j["window_periods"] = s.window_periods;
    if (s.jump) {
        j["jump"] = {{"after_point", s.jump->after_point},
                     {"delta_omega_rad_s", s.jump->delta_omega},
                     {"delta_u1_V", s.jump->delta_u1},
                     {"continuation_omega_rad_s", s.jump->continuation}};
    }
    return j;
}

// Relative grid: a list of values, a {start, stop, points} range, or a list
// of ranges concatenated in order; scaled by omega1.
inline std::vector<double> relative_grid_from_json(const json& g, double omega1) {
    std::vector<double> out;
    auto range = [&](const json& r) {
        const double a = r.at("start"), b = r.at("stop");
        const int n = r.at("points");
        require(n >= 1, "grid range needs at least one point");
        for (int i = 0; i < n; ++i) out.push_back(omega1 * (n == 1 ? a : a + (b - a) * i / (n - 1)));
    };
    if (g.is_object()) {
        range(g);
    } else {
        require(g.is_array(), "relative grid must be a list or a {start, stop, points} range");
        for (const auto& e : g) {
            if (e.is_object()) range(e);
            else out.push_back(omega1 * e.get<double>());
        }
    }
    return out;
}

inline SteppedSineSchedule schedule_from_json(const json& j, double omega1) {
    SteppedSineSchedule s;
    if (j.contains("omega_rad_s")) s.omegas = j.at("omega_rad_s").get<std::vector<double>>();
    else if (j.contains("omega_over_omega1")) s.omegas = relative_grid_from_json(j.at("omega_over_omega1"), omega1);
    s.ramp_periods = j.value("ramp_periods_of_omega1", s.ramp_periods);
    s.hold_periods = j.value("hold_periods", s.hold_periods);
    s.window_periods = j.value("window_periods", s.window_periods);
    if (j.contains("jump")) {
        const auto& jj = j.at("jump");
        JumpSpec js;
        js.after_point = jj.at("after_point");
        js.delta_omega = jj.contains("delta_omega_over_omega1") ? omega1 * jj.at("delta_omega_over_omega1").get<double>()
                                                               : jj.value("delta_omega_rad_s", 0.0);
        js.delta_u1 = jj.value("delta_u1_V", 0.0);
        if (jj.contains("continuation_omega_over_omega1"))
            js.continuation = relative_grid_from_json(jj.at("continuation_omega_over_omega1"), omega1);
        else
            js.continuation = jj.value("continuation_omega_rad_s", std::vector<double>{});
        s.jump = js;
    }
    return s;
}

inline json to_json(const Scenario& s) {
    json plant;
    json locs = json::array();
    for (const auto& l : s.plant.structure.locations) locs.push_back({{"name", l.name}, {"shape_per_sqrt_kg", l.shape}});
    plant["modes"] = {{"omega_rad_s", s.plant.structure.omega}, {"damping_ratio", s.plant.structure.damping}};
    plant["locations"] = locs;
    const auto& e = s.plant.exciter;
    plant["exciter"] = {{"moving_mass_kg", e.moving_mass},
                        {"resistance_ohm", e.resistance},
                        {"force_constant_N_per_A", e.force_constant},
                        {"omega_rad_s", e.omega},
                        {"damping_ratio", e.damping}};
    plant["cubic_spring"] = {{"stiffness_N_per_m3", s.plant.cubic_stiffness}, {"location", s.plant.spring_location}};
    if (s.plant.base_drive)
        plant["excitation"] = {{"type", "base"}, {"participation_sqrt_kg", s.plant.participation}};
    else
        plant["excitation"] = {{"type", "force"}, {"drive_location", s.plant.drive_location}};
    plant["observe_location"] = s.plant.observe_location;

    json control = {{"target_level_N_or_m_per_s2", s.control.target_level},
                    {"fundamental_gain_V_per_unit_s", s.control.fundamental_gain},
                    {"harmonics", s.control.harmonics},
                    {"kp_times_G_over_R", s.control.kp_normalized},
                    {"ki_times_G_over_R_over_omega_lp", s.control.ki_normalized},
                    {"voltage_limit_V", s.control.voltage_limit},
                    {"harmonizer_enabled", s.control.harmonizer_enabled},
                    {"fundamental_enabled", s.control.fundamental_enabled}};
    if (s.control.initial_u1) control["initial_u1_V"] = *s.control.initial_u1;

    const auto& ic = s.simulation.integrator;
    json j;
    j["name"] = s.name;
    j["seed"] = s.seed;
    j["plant"] = plant;
    j["estimator"] = {{"order", s.estimator.order}, {"cutoff_over_omega1", s.estimator.cutoff_over_omega1}};
    j["control"] = control;
    j["noise"] = {{"std_N_or_m_per_s2", s.noise.std}};
    j["simulation"] = {{"sample_rate_Hz", s.simulation.sample_rate},
                       {"max_step_s", ic.max_step},
                       {"min_step_s", ic.min_step},
                       {"rel_tol", ic.rel_tol},
                       {"abs_tol", ic.abs_tol}};
    j["schedule"] = to_json(s.schedule);
    return j;
}

inline Scenario scenario_from_json(const json& j) {
    try {
        Scenario s;
        s.name = j.value("name", s.name);
        s.seed = j.value("seed", s.seed);
        const auto& p = j.at("plant");
        s.plant.structure.omega = p.at("modes").at("omega_rad_s").get<std::vector<double>>();
        s.plant.structure.damping = p.at("modes").at("damping_ratio").get<std::vector<double>>();
        for (const auto& l : p.at("locations"))
            s.plant.structure.locations.push_back({l.at("name"), l.at("shape_per_sqrt_kg").get<std::vector<double>>()});
        const auto& e = p.at("exciter");
        s.plant.exciter = Exciter{e.at("moving_mass_kg"), e.at("resistance_ohm"), e.at("force_constant_N_per_A"),
                                  e.at("omega_rad_s"), e.at("damping_ratio")};
        if (p.contains("cubic_spring")) {
            s.plant.cubic_stiffness = p.at("cubic_spring").value("stiffness_N_per_m3", 0.0);
            s.plant.spring_location = p.at("cubic_spring").value("location", std::string{});
        }
        const auto& x = p.at("excitation");
        const std::string type = x.at("type");
        if (type == "force") {
            s.plant.drive_location = x.at("drive_location");
        } else if (type == "base") {
            s.plant.base_drive = true;
            s.plant.participation = x.at("participation_sqrt_kg").get<std::vector<double>>();
        } else {
            throw ValidationError("excitation type must be 'force' or 'base'");
        }
        s.plant.observe_location = p.at("observe_location");

        if (j.contains("estimator")) {
            s.estimator.order = j["estimator"].value("order", s.estimator.order);
            s.estimator.cutoff_over_omega1 = j["estimator"].value("cutoff_over_omega1", s.estimator.cutoff_over_omega1);
        }
        if (j.contains("control")) {
            const auto& c = j["control"];
            s.control.target_level = c.value("target_level_N_or_m_per_s2", s.control.target_level);
            s.control.fundamental_gain = c.value("fundamental_gain_V_per_unit_s", s.control.fundamental_gain);
            s.control.harmonics = c.value("harmonics", s.control.harmonics);
            s.control.kp_normalized = c.value("kp_times_G_over_R", s.control.kp_normalized);
            s.control.ki_normalized = c.value("ki_times_G_over_R_over_omega_lp", s.control.ki_normalized);
            s.control.voltage_limit = c.value("voltage_limit_V", s.control.voltage_limit);
            s.control.harmonizer_enabled = c.value("harmonizer_enabled", s.control.harmonizer_enabled);
            s.control.fundamental_enabled = c.value("fundamental_enabled", s.control.fundamental_enabled);
            if (c.contains("initial_u1_V")) s.control.initial_u1 = c.at("initial_u1_V").get<double>();
        }
        if (j.contains("noise")) s.noise.std = j["noise"].value("std_N_or_m_per_s2", 0.0);
        if (j.contains("simulation")) {
            const auto& m = j["simulation"];
            auto& ic = s.simulation.integrator;
            s.simulation.sample_rate = m.value("sample_rate_Hz", s.simulation.sample_rate);
            ic.max_step = m.value("max_step_s", ic.max_step);
            ic.min_step = m.value("min_step_s", ic.min_step);
            ic.rel_tol = m.value("rel_tol", ic.rel_tol);
            ic.abs_tol = m.value("abs_tol", ic.abs_tol);
        }
        if (j.contains("schedule")) s.schedule = schedule_from_json(j["schedule"], s.omega1());
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed scenario: ") + e.what());
    }
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("cannot parse '" + path + "': " + e.what());
    }
}

inline Scenario load_scenario(const std::string& path) { return scenario_from_json(read_json_file(path)); }

} // namespace exharm
