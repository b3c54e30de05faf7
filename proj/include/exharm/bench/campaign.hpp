#pragma once

// Campaign driver: tune -> simulate (with and without harmonization, plus an
// optional jump run) -> reference -> iterate -> compare, writing every
// artifact atomically into one directory together with a manifest.

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "exharm/baseline.hpp"
#include "exharm/bench/compare.hpp"
#include "exharm/bench/io.hpp"
#include "exharm/bench/reference_run.hpp"
#include "exharm/bench/scenario.hpp"
#include "exharm/bench/tuning.hpp"
#include "exharm/sim/stepped_sine.hpp"

namespace exharm {

inline constexpr int manifest_schema = 1;
inline constexpr int comparison_csv_schema = 1;

inline const std::vector<std::string>& campaign_steps() {
    static const std::vector<std::string> steps = {"tune", "simulate", "reference", "iterate", "compare"};
    return steps;
}

/// "start:stop:points" in units of omega_1 -> increasing grid in rad/s.
inline std::vector<double> parse_grid_spec(const std::string& spec, double omega1) {
    std::vector<double> v;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ':')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw ValidationError("");
        } catch (const std::exception&) {
            throw ValidationError("grid spec '" + spec + "' is not start:stop:points");
        }
    }
    require(v.size() == 3, "grid spec '" + spec + "' is not start:stop:points");
    const double a = v[0], b = v[1];
    const auto n = static_cast<long>(v[2]);
    require(static_cast<double>(n) == v[2] && n >= 2, "grid spec needs an integer point count >= 2");
    require(a > 0.0 && b > a, "grid spec needs 0 < start < stop");
    std::vector<double> grid;
    for (long i = 0; i < n; ++i) grid.push_back(omega1 * (a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1)));
    return grid;
}

/// Point/segment statistics reported in the campaign table.
struct CampaignTable {
    std::optional<double> unharmonized_max_f3;            // max |F_3| / target
    std::optional<double> harmonized_max_distortion;      // over periodic points
    std::optional<double> harmonized_clean_fraction;      // share of periodic points below 1e-4
    std::optional<double> unharmonized_last_high;         // Omega/omega_1
    std::optional<double> harmonized_last_high;
    std::optional<double> reference_turning_point;
    std::optional<double> max_reference_h1_error;         // harmonized runs vs stable reference
    std::optional<double> max_reference_h3_error;
    std::optional<double> iterative_mean_iterations;
    std::optional<double> settle_ratio;                   // iterative / harmonized, per matched point
};

inline json to_json(const CampaignTable& t) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return {{"unharmonized_max_F3_over_target", opt(t.unharmonized_max_f3)},
            {"harmonized_max_distortion", opt(t.harmonized_max_distortion)},
            {"harmonized_fraction_below_1e-4", opt(t.harmonized_clean_fraction)},
            {"unharmonized_last_high_over_omega1", opt(t.unharmonized_last_high)},
            {"harmonized_last_high_over_omega1", opt(t.harmonized_last_high)},
            {"reference_turning_point_over_omega1", opt(t.reference_turning_point)},
            {"max_reference_h1_error", opt(t.max_reference_h1_error)},
            {"max_reference_h3_error", opt(t.max_reference_h3_error)},
            {"iterative_mean_iterations", opt(t.iterative_mean_iterations)},
            {"settle_ratio_iterative_over_harmonized", opt(t.settle_ratio)}};
}

struct CampaignOptions {
    std::vector<std::string> commands = campaign_steps();
    std::optional<SteppedSineSchedule> jump_schedule;     // harmonized run that lands on the isola
    std::optional<SteppedSineSchedule> iterate_schedule;  // default: the scenario schedule
    double tune_omega_over_omega1 = 1.0;
    IterativeOptions iterative{};
    ReferenceOptions reference{};
};

struct CampaignResult {
    json manifest;
    std::optional<TuningReport> tuning;
    std::optional<RunRecord> unharmonized, harmonized, jump;
    std::optional<ReferenceSet> reference;
    std::optional<IterativeRunRecord> iterative;
    CampaignTable table;
};

namespace detail {

inline std::vector<double> increasing(std::vector<double> g) {
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

inline void fill_table(CampaignResult& r, const Scenario& sc) {
    const double w1 = sc.omega1(), target = sc.control.target_level;
    auto& t = r.table;
    if (r.unharmonized) {
        double m = 0.0;
        for (const auto& p : r.unharmonized->points)
            if (!p.failed && p.excitation_fft.order() >= 3) m = std::max(m, p.excitation_fft.magnitude(3) / target);
        t.unharmonized_max_f3 = m;
        if (auto i = last_high_branch_index(*r.unharmonized)) t.unharmonized_last_high = r.unharmonized->points[*i].omega / w1;
    }
    std::vector<const RunRecord*> harmonized;
    if (r.harmonized) harmonized.push_back(&*r.harmonized);
    if (r.jump) harmonized.push_back(&*r.jump);
    if (!harmonized.empty()) {
        double worst = 0.0;
        std::size_t clean = 0, counted = 0;
        for (const auto* run : harmonized)
            for (const auto& p : run->points) {
                if (p.failed || !p.periodic) continue;
                const double d = p.distortion(sc.control.harmonics, target);
                worst = std::max(worst, d);
                ++counted;
                if (d < 1e-4) ++clean;
            }
        t.harmonized_max_distortion = worst;
        if (counted > 0) t.harmonized_clean_fraction = static_cast<double>(clean) / static_cast<double>(counted);
    }
    if (r.harmonized)
        if (auto i = last_high_branch_index(*r.harmonized)) t.harmonized_last_high = r.harmonized->points[*i].omega / w1;
    if (r.reference) {
        if (auto tp = r.reference->main_turning_point()) t.reference_turning_point = *tp / w1;
        double e1 = 0.0, e3 = 0.0;
        bool any = false;
        for (const auto* run : harmonized)
            for (const auto& p : run->points) {
                if (p.failed || !p.periodic) continue;
                const auto m = match_reference(p, *r.reference);
                if (!m.found) continue;
                any = true;
                e1 = std::max(e1, m.h1_error);
                e3 = std::max(e3, m.h3_error);
            }
        if (any) {
            t.max_reference_h1_error = e1;
            t.max_reference_h3_error = e3;
        }
    }
    if (r.iterative) {
        t.iterative_mean_iterations = r.iterative->mean_iterations();
        if (r.harmonized) {
            const auto c = compare_runs(*r.harmonized, r.iterative->run);
            if (c.settles_a > 0) t.settle_ratio = static_cast<double>(c.settles_b) / static_cast<double>(c.settles_a);
        }
    }
}

} // namespace detail

/// Runs the requested steps in the fixed order tune, simulate, reference,
/// iterate, compare. Artifacts written before a failing step are kept and the
/// manifest records the failure before the exception propagates.
inline CampaignResult run_campaign(const Scenario& sc, const std::filesystem::path& out,
                                   const CampaignOptions& opt = {}) {
    sc.validate();
    for (const auto& c : opt.commands)
        require(std::find(campaign_steps().begin(), campaign_steps().end(), c) != campaign_steps().end(),
                "unknown campaign step '" + c + "'");
    if (opt.jump_schedule) opt.jump_schedule->validate();
    if (opt.iterate_schedule) opt.iterate_schedule->validate();
    std::filesystem::create_directories(out);
    const double w1 = sc.omega1();
    auto wants = [&opt](const std::string& s) {
        return std::find(opt.commands.begin(), opt.commands.end(), s) != opt.commands.end();
    };

    CampaignResult res;
    json& m = res.manifest;
    m["schema"] = manifest_schema;
    m["scenario"] = sc.name;
    m["seed"] = sc.seed;
    m["scenario_hash"] = config_hash(to_json(sc));
    m["csv_schemas"] = {{"run", run_csv_schema},
                        {"branch", branch_csv_schema},
                        {"stability", stability_csv_schema},
                        {"comparison", comparison_csv_schema}};
    json cmds = json::array();
    for (const auto& s : campaign_steps())
        if (wants(s)) cmds.push_back(s);
    m["commands"] = cmds;
    m["steps"] = json::array();
    auto write_manifest = [&] { atomic_write(out / "manifest.json", dump(m)); };
    auto record = [&](const std::string& step, const json& config, const std::vector<std::string>& files) {
        m["steps"].push_back({{"step", step}, {"config_hash", config_hash(config)}, {"artifacts", files}});
        write_manifest();
    };
    auto write_run = [&](const std::string& stem, const RunRecord& run) {
        atomic_write(out / (stem + ".csv"), run_csv(run, w1));
        atomic_write(out / (stem + ".json"), dump(to_json(run)));
    };

    write_manifest();
    std::string current;
    try {
        if (wants("tune")) {
            current = "tune";
            TuningOptions topt;
            const double omega = opt.tune_omega_over_omega1 * w1;
            res.tuning = tune(sc, omega, topt);
            atomic_write(out / "tune.json", dump(to_json(*res.tuning)));
            record(current, {{"scenario", m["scenario_hash"]}, {"omega_rad_s", omega}}, {"tune.json"});
        }
        if (wants("simulate")) {
            current = "simulate";
            Scenario off = sc;
            off.control.harmonizer_enabled = false;
            res.unharmonized = run_stepped_sine(off, sc.schedule);
            write_run("run-unharmonized", *res.unharmonized);
            res.harmonized = run_stepped_sine(sc, sc.schedule);
            write_run("run-harmonized", *res.harmonized);
            std::vector<std::string> files = {"run-unharmonized.csv", "run-unharmonized.json", "run-harmonized.csv",
                                              "run-harmonized.json"};
            json config = {{"scenario", m["scenario_hash"]}, {"schedule", to_json(sc.schedule)}};
            if (opt.jump_schedule) {
                res.jump = run_stepped_sine(sc, *opt.jump_schedule);
                write_run("run-jump", *res.jump);
                files.insert(files.end(), {"run-jump.csv", "run-jump.json"});
                config["jump_schedule"] = to_json(*opt.jump_schedule);
            }
            record(current, config, files);
        }
        if (wants("reference")) {
            current = "reference";
            std::optional<std::pair<StateVector, double>> seed;
            if (res.jump)
                for (const auto& p : res.jump->points)
                    if (p.segment == "jump" && !p.failed && !p.final_state.empty()) {
                        seed = isola_seed_from(sc, p, opt.reference.steps_per_period);
                        break;
                    }
            res.reference = compute_reference(sc, detail::increasing(sc.schedule.omegas), seed, opt.reference);
            atomic_write(out / "reference.csv", branch_csv(*res.reference, w1));
            atomic_write(out / "reference.json", dump(to_json(*res.reference)));
            record(current,
                   {{"scenario", m["scenario_hash"]},
                    {"grid", detail::increasing(sc.schedule.omegas)},
                    {"steps_per_period", opt.reference.steps_per_period},
                    {"isola_seed", seed.has_value()}},
                   {"reference.csv", "reference.json"});
        }
        if (wants("iterate")) {
            current = "iterate";
            const auto& sched = opt.iterate_schedule ? *opt.iterate_schedule : sc.schedule;
            res.iterative = stepped_sine_iterative(sc, sched, opt.iterative);
            write_run("run-iterative", res.iterative->run);
            atomic_write(out / "iterative-traces.json", dump(to_json(*res.iterative)));
            record(current, {{"scenario", m["scenario_hash"]}, {"schedule", to_json(sched)}},
                   {"run-iterative.csv", "run-iterative.json", "iterative-traces.json"});
        }
        if (wants("compare")) {
            current = "compare";
            std::vector<std::string> files;
            const ReferenceSet* ref = res.reference ? &*res.reference : nullptr;
            auto emit = [&](const std::string& stem, const RunRecord& a, const RunRecord& b) {
                const auto c = compare_runs(a, b, ref);
                atomic_write(out / (stem + ".csv"), comparison_csv(c, w1));
                atomic_write(out / (stem + ".json"), dump(to_json(c)));
                files.insert(files.end(), {stem + ".csv", stem + ".json"});
            };
            if (res.unharmonized && res.harmonized)
                emit("compare-unharmonized-harmonized", *res.unharmonized, *res.harmonized);
            if (res.harmonized && res.iterative) emit("compare-harmonized-iterative", *res.harmonized, res.iterative->run);
            detail::fill_table(res, sc);
            atomic_write(out / "table.json", dump(to_json(res.table)));
            files.push_back("table.json");
            record(current, {{"scenario", m["scenario_hash"]}, {"reference", ref != nullptr}}, files);
        }
    } catch (const std::exception& e) {
        m["failed_step"] = current;
        m["error"] = e.what();
        write_manifest();
        throw;
    }
    return res;
}

} // namespace exharm
