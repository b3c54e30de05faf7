// exharm: command-line front end of the virtual harmonization bench.
//
// Exit codes: 0 success, 2 validation error (bad arguments or input files),
// 3 numerical failure, 1 anything else (I/O).

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "exharm/bench/campaign.hpp"

namespace fs = std::filesystem;
using namespace exharm;

namespace {

struct Common {
    std::string scenario_path;
    std::string schedule_path;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c, bool schedule) {
    sub->add_option("--scenario", c.scenario_path, "scenario JSON (default: built-in shaw-beam)");
    if (schedule) sub->add_option("--schedule", c.schedule_path, "schedule JSON (default: the scenario's)");
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
    sub->add_option("--seed", c.seed, "override the scenario noise seed");
}

Scenario load(const Common& c) {
    Scenario sc = c.scenario_path.empty() ? shaw_beam() : load_scenario(c.scenario_path);
    if (!c.schedule_path.empty()) sc.schedule = schedule_from_json(read_json_file(c.schedule_path), sc.omega1());
    if (c.seed) sc.seed = *c.seed;
    sc.validate();
    return sc;
}

std::optional<SteppedSineSchedule> load_schedule(const std::string& path, double omega1) {
    if (path.empty()) return std::nullopt;
    auto s = schedule_from_json(read_json_file(path), omega1);
    s.validate();
    return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

// Seed file: {"omega_rad_s", "state"} at shooting phase zero, or a run record
// whose first jump point (else last point) carries a final state.
std::pair<StateVector, double> load_isola_seed(const std::string& path, const Scenario& sc) {
    const json j = read_json_file(path);
    if (!j.contains("points")) {
        try {
            return {j.at("state").get<StateVector>(), j.at("omega_rad_s").get<double>()};
        } catch (const json::exception& e) {
            throw ValidationError(std::string("malformed isola seed: ") + e.what());
        }
    }
    const RunRecord run = run_from_json(j);
    const PointRecord* pick = nullptr;
    for (const auto& p : run.points)
        if (p.segment == "jump" && !p.failed) {
            pick = &p;
            break;
        }
    if (!pick && !run.points.empty()) pick = &run.points.back();
    require(pick != nullptr, "isola seed run has no points");
    return isola_seed_from(sc, *pick);
}

void print_run(const RunRecord& r, const Scenario& sc) {
    std::size_t failed = 0, aperiodic = 0;
    double worst = 0.0;
    for (const auto& p : r.points) {
        failed += p.failed;
        aperiodic += !p.periodic;
        if (!p.failed) worst = std::max(worst, p.distortion(sc.control.harmonics, sc.control.target_level));
    }
    std::printf("points %zu  failed %zu  non-periodic %zu  max distortion %.3e  settles %zu  wall %.1f s\n",
                r.points.size(), failed, aperiodic, worst, r.plant_settles(), r.wall_seconds);
}

// Artifacts are written first; a failed point still ends the command as a numerical failure.
void throw_on_failed_points(const RunRecord& r) {
    for (const auto& p : r.points)
        if (p.failed) throw NumericalError("point at " + std::to_string(p.omega) + " rad/s failed: " + p.error);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"virtual vibration-test bench for iteration-free excitation harmonization"};
    app.require_subcommand(1);

    Common sim_c, ref_c, stab_c, tune_c, iter_c, cmp_c, camp_c;

    auto* sim = app.add_subcommand("simulate", "stepped-sine run on the virtual rig");
    add_common(sim, sim_c, true);
    bool no_harmonizer = false, dump_series = false;
    sim->add_flag("--no-harmonizer", no_harmonizer, "disable higher-harmonic control");
    sim->add_flag("--dump-time-series", dump_series, "write the measurement window of every point");

    auto* ref = app.add_subcommand("reference", "shooting reference branches");
    add_common(ref, ref_c, true);
    std::string ref_grid, isola_seed;
    int ref_steps = 1000;
    ref->add_option("--grid", ref_grid, "start:stop:points in omega/omega_1 (default: schedule grid)");
    ref->add_option("--isola-seed", isola_seed, "seed state file or run record");
    ref->add_option("--steps-per-period", ref_steps, "Newmark steps per period")->capture_default_str();

    auto* stab = app.add_subcommand("stability", "drive-point stability margins");
    add_common(stab, stab_c, false);
    std::string drives = "x1,x2", stab_grid = "0.5:8:751";
    std::vector<double> kps;
    std::optional<double> stab_ki;
    stab->add_option("--drive", drives, "comma-separated drive locations")->capture_default_str();
    stab->add_option("--grid", stab_grid, "start:stop:points in omega/omega_1")->capture_default_str();
    stab->add_option("--kp", kps, "k_p G/R values (default: the scenario's)");
    stab->add_option("--ki", stab_ki, "k_i G/(R w_LP) (default: the scenario's)");

    auto* tn = app.add_subcommand("tune", "heuristic filter and gain tuning");
    add_common(tn, tune_c, false);
    double tune_at = 1.0;
    tn->add_option("--omega-over-omega1", tune_at, "representative frequency")->capture_default_str();

    auto* it = app.add_subcommand("iterate", "iterative (Newton/Broyden) harmonization baseline");
    add_common(it, iter_c, true);

    auto* cmp = app.add_subcommand("compare", "compare two runs, optionally against a reference");
    add_common(cmp, cmp_c, false);
    std::vector<std::string> runs;
    std::string cmp_ref;
    cmp->add_option("--runs", runs, "two run records (JSON)")->expected(2)->required();
    cmp->add_option("--reference", cmp_ref, "reference record (JSON)");

    auto* camp = app.add_subcommand("campaign", "tune, simulate, reference, iterate, compare");
    add_common(camp, camp_c, true);
    std::string commands = "tune,simulate,reference,iterate,compare", jump_path, iterate_path;
    camp->add_option("--commands", commands, "comma-separated steps; empty writes the manifest only")
        ->capture_default_str();
    camp->add_option("--jump-schedule", jump_path, "schedule of the harmonized jump run");
    camp->add_option("--iterate-schedule", iterate_path, "schedule of the iterative baseline");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*sim) {
            Scenario sc = load(sim_c);
            if (no_harmonizer) sc.control.harmonizer_enabled = false;
            const fs::path out = sim_c.out;
            SteppedSineOptions opt;
            if (dump_series)
                opt.on_window = [&out](std::size_t i, const SampleLog& log) {
                    char name[32];
                    std::snprintf(name, sizeof name, "point-%04zu.bin", i);
                    write_time_series(out / "time-series" / name, log);
                };
            const auto run = run_stepped_sine(sc, sc.schedule, opt);
            atomic_write(out / "run.csv", run_csv(run, sc.omega1()));
            atomic_write(out / "run.json", dump(to_json(run)));
            print_run(run, sc);
            throw_on_failed_points(run);
        } else if (*ref) {
            const Scenario sc = load(ref_c);
            const auto grid = ref_grid.empty() ? detail::increasing(sc.schedule.omegas)
                                               : parse_grid_spec(ref_grid, sc.omega1());
            std::optional<std::pair<StateVector, double>> seed;
            if (!isola_seed.empty()) seed = load_isola_seed(isola_seed, sc);
            ReferenceOptions opt;
            opt.steps_per_period = ref_steps;
            const auto set = compute_reference(sc, grid, seed, opt);
            const fs::path out = ref_c.out;
            atomic_write(out / "reference.csv", branch_csv(set, sc.omega1()));
            atomic_write(out / "reference.json", dump(to_json(set)));
            for (const auto& b : set.branches)
                std::printf("%-16s %4zu points  %s\n", b.label.c_str(), b.points.size(), b.diagnostic.c_str());
            if (auto tp = set.main_turning_point()) std::printf("turning point %.5f omega_1\n", *tp / sc.omega1());
        } else if (*stab) {
            const Scenario sc = load(stab_c);
            const double g = sc.plant.exciter.force_gain();
            if (kps.empty()) kps.push_back(sc.control.kp_normalized);
            std::vector<double> kp_raw;
            for (double k : kps) kp_raw.push_back(k / g);
            const auto grid = parse_grid_spec(stab_grid, sc.omega1());
            const auto scans = drive_point_report(sc.plant.build(), split(drives, ','), grid, kp_raw,
                                                  stab_ki.value_or(sc.control.ki_normalized) * sc.cutoff() / g);
            const fs::path out = stab_c.out;
            atomic_write(out / "stability.csv", stability_csv(scans, sc.omega1(), g));
            const json verdicts = stability_verdicts(scans, sc.omega1(), g);
            atomic_write(out / "verdicts.json", dump(verdicts));
            std::cout << verdicts.dump(2) << '\n';
        } else if (*tn) {
            const Scenario sc = load(tune_c);
            const auto rep = tune(sc, tune_at * sc.omega1());
            atomic_write(fs::path(tune_c.out) / "tune.json", dump(to_json(rep)));
            std::printf("cutoff %.4g omega_1 (gain sweeps at %.4g)  kp G/R %.4g  ki G/(R w_LP) %.4g\n",
                        rep.cutoff_over_omega1, rep.gain_cutoff_over_omega1, rep.kp_selected, rep.ki_selected);
            for (const auto& n : rep.notes) std::printf("note: %s\n", n.c_str());
        } else if (*it) {
            const Scenario sc = load(iter_c);
            const auto rec = stepped_sine_iterative(sc, sc.schedule);
            const fs::path out = iter_c.out;
            atomic_write(out / "run.csv", run_csv(rec.run, sc.omega1()));
            atomic_write(out / "run.json", dump(to_json(rec)));
            print_run(rec.run, sc);
            std::printf("mean iterations %.2f\n", rec.mean_iterations());
            throw_on_failed_points(rec.run);
        } else if (*cmp) {
            const Scenario sc = load(cmp_c);
            const auto a = run_from_json(read_json_file(runs[0]));
            const auto b = run_from_json(read_json_file(runs[1]));
            std::optional<ReferenceSet> rs;
            if (!cmp_ref.empty()) rs = reference_from_json(read_json_file(cmp_ref));
            const auto c = compare_runs(a, b, rs ? &*rs : nullptr);
            const fs::path out = cmp_c.out;
            atomic_write(out / "compare.csv", comparison_csv(c, sc.omega1()));
            atomic_write(out / "compare.json", dump(to_json(c)));
            std::cout << to_json(c).dump(2) << '\n';
        } else if (*camp) {
            const Scenario sc = load(camp_c);
            CampaignOptions opt;
            opt.commands = split(commands, ',');
            opt.jump_schedule = load_schedule(jump_path, sc.omega1());
            opt.iterate_schedule = load_schedule(iterate_path, sc.omega1());
            const auto res = run_campaign(sc, camp_c.out, opt);
            std::cout << to_json(res.table).dump(2) << '\n';
        }
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
