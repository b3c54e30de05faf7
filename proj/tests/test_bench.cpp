#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "exharm/bench/campaign.hpp"
#include "exharm/bench/compare.hpp"
#include "exharm/bench/io.hpp"
#include "exharm/bench/scenario.hpp"
#include "exharm/bench/tuning.hpp"

using namespace exharm;
namespace fs = std::filesystem;
using Catch::Matchers::WithinRel;

namespace {

const std::string scenario_dir = EXHARM_SCENARIO_DIR;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("exharm-test-bench-" + name);
    fs::remove_all(p);
    return p;
}

std::vector<HarmonicSpectrum> history(int n, const std::function<double(double)>& f3, double dt) {
    std::vector<HarmonicSpectrum> h;
    for (int i = 0; i < n; ++i) {
        HarmonicSpectrum s(3);
        s.set(1, 2.0);
        s.set(3, f3(i * dt));
        h.push_back(s);
    }
    return h;
}

SteppedSineSchedule tiny_schedule(const Scenario& sc) {
    SteppedSineSchedule s;
    s.omegas = {0.9 * sc.omega1(), 0.95 * sc.omega1()};
    s.hold_periods = 60;
    s.window_periods = 20;
    return s;
}

} // namespace

TEST_CASE("scenario round trip") {
    const Scenario sc = shaw_beam();
    const json a = to_json(sc);
    const Scenario back = scenario_from_json(a);
    CHECK(to_json(back) == a);
    CHECK(to_json(scenario_from_json(json::parse(a.dump()))) == a);
}

TEST_CASE("shipped scenario and schedules load and validate") {
    const Scenario file = load_scenario(scenario_dir + "/shaw-beam.json");
    const Scenario builtin = shaw_beam();
    json a = to_json(file), b = to_json(builtin);
    a.erase("schedule");
    b.erase("schedule");
    CHECK(a == b);
    REQUIRE(file.schedule.omegas.size() == builtin.schedule.omegas.size());
    for (std::size_t i = 0; i < file.schedule.omegas.size(); ++i)
        CHECK_THAT(file.schedule.omegas[i], WithinRel(builtin.schedule.omegas[i], 1e-14));
    CHECK(file.schedule.omegas.size() == 81);
    CHECK_THAT(file.schedule.omegas.back(), WithinRel(1.6 * file.omega1(), 1e-12));
    for (const char* name : {"iterate.json", "resonance.json", "jump.json"}) {
        const auto s = schedule_from_json(read_json_file(scenario_dir + "/" + name), file.omega1());
        CHECK_NOTHROW(s.validate());
    }
    const auto jump = schedule_from_json(read_json_file(scenario_dir + "/jump.json"), file.omega1());
    REQUIRE(jump.jump);
    CHECK(jump.jump->after_point == 2);
    CHECK(jump.jump->continuation.size() == 58);
    // schedules survive their own serialization
    const auto again = schedule_from_json(to_json(jump), file.omega1());
    CHECK(again.omegas == jump.omegas);
    CHECK(again.jump->continuation == jump.jump->continuation);
    CHECK(again.jump->delta_omega == jump.jump->delta_omega);
}

TEST_CASE("malformed scenarios are validation errors") {
    const json good = to_json(shaw_beam());
    auto broken = [&](auto&& edit) {
        json j = good;
        edit(j);
        return j;
    };
    CHECK_THROWS_AS(scenario_from_json(broken([](json& j) { j["plant"].erase("exciter"); })), ValidationError);
    CHECK_THROWS_AS(scenario_from_json(broken([](json& j) { j["plant"]["modes"]["damping_ratio"] = {-0.01, 0.01}; })),
                    ValidationError);
    CHECK_THROWS_AS(scenario_from_json(broken([](json& j) { j["plant"]["excitation"]["drive_location"] = "x9"; })),
                    ValidationError);
    CHECK_THROWS_AS(scenario_from_json(broken([](json& j) { j["plant"]["excitation"]["type"] = "magnetic"; })),
                    ValidationError);
    CHECK_THROWS_AS(scenario_from_json(broken([](json& j) { j["control"]["target_level_N_or_m_per_s2"] = "two"; })),
                    ValidationError);
    CHECK_THROWS_AS(scenario_from_json(broken([](json& j) { j["control"]["harmonics"] = {1, 2}; })), ValidationError);
    CHECK_THROWS_AS(scenario_from_json(json::array()), ValidationError);
    CHECK_THROWS_AS(load_scenario(scenario_dir + "/does-not-exist.json"), ValidationError);
    const auto bad = fs::temp_directory_path() / "exharm-test-bench-bad.json";
    {
        std::ofstream(bad) << "{ \"plant\": ";
    }
    CHECK_THROWS_AS(load_scenario(bad.string()), ValidationError);
    fs::remove(bad);
}

TEST_CASE("grid specs") {
    const auto g = parse_grid_spec("0.8:1.6:81", 10.0);
    REQUIRE(g.size() == 81);
    CHECK(g.front() == 8.0);
    CHECK_THAT(g.back(), WithinRel(16.0, 1e-14));
    CHECK_THAT(g[40], WithinRel(12.0, 1e-14));
    for (const char* bad : {"", "1:2", "1:2:3:4", "a:2:3", "2:1:5", "1:2:1", "1:2:2.5", "0:1:3", "1:2:3x"})
        CHECK_THROWS_AS(parse_grid_spec(bad, 10.0), ValidationError);
}

TEST_CASE("oscillation onset detector") {
    const double omega = 50.0, period = 2.0 * std::numbers::pi / omega, dt = period / 20.0;
    const int n = 20 * 60;  // 60 periods, 6 windows of 10 periods
    SECTION("monotonically settling coefficients") {
        const auto h = history(n, [](double t) { return 0.8 * std::exp(-t); }, dt);
        CHECK_FALSE(detect_oscillation_onset(h, dt, omega, 2.0, {3}).fired);
    }
    SECTION("growing oscillation fires within three windows") {
        const double grow = 10.0 * period;  // e-folding per window
        const auto h = history(n, [&](double t) { return 0.06 * std::exp(t / grow) * (1.0 + std::sin(7.0 * t)); }, dt);
        const auto r = detect_oscillation_onset(h, dt, omega, 2.0, {3});
        CHECK(r.fired);
        CHECK(r.harmonic == 3);
        CHECK(r.window <= 3);
    }
    SECTION("bounded ripple below the threshold") {
        const auto h = history(n, [](double t) { return 0.3 + 0.04 * std::sin(9.0 * t); }, dt);
        const auto r = detect_oscillation_onset(h, dt, omega, 2.0, {3});
        CHECK_FALSE(r.fired);
        REQUIRE(r.peak_to_peak.size() == 6);
        for (double p : r.peak_to_peak) CHECK(p < 0.1);
    }
    SECTION("insufficient history") {
        const auto h = history(19 * 20, [](double) { return 0.0; }, dt);
        CHECK_THROWS_AS(detect_oscillation_onset(h, dt, omega, 2.0, {3}), ValidationError);
    }
}

TEST_CASE("tuning on a decoupled plant takes the conservative path") {
    Scenario sc = shaw_beam();
    sc.plant.exciter.moving_mass = 0.0;
    sc.plant.cubic_stiffness = 0.0;
    sc.control.harmonics = {2, 3};
    TuningOptions opt;
    opt.settle_periods = 100;
    opt.record_periods = 60;
    opt.trial_periods = 100;
    opt.kp_max = 10.0;
    opt.ki_max = 10.0;
    const auto rep = tune(sc, sc.omega1(), opt);
    CHECK_FALSE(rep.kp_critical);
    CHECK_FALSE(rep.ki_critical);
    CHECK(rep.kp_selected == opt.kp_max / 2.0);
    CHECK(rep.ki_selected == opt.ki_max / 2.0);
    // noiseless: the top of the cutoff range is accepted, the fallback drives the sweeps
    CHECK(rep.cutoff_admissible);
    CHECK(rep.cutoff_over_omega1 == 1.0);
    CHECK(rep.gain_cutoff_over_omega1 == opt.fallback_cutoff);
    CHECK(rep.notes.size() == 3);
    for (const auto& t : rep.kp_trials) CHECK_FALSE(t.onset);
}

TEST_CASE("tuning selects half the detected critical gains") {
    Scenario sc = shaw_beam();
    sc.control.harmonics = {2, 3};
    TuningOptions opt;
    opt.settle_periods = 300;
    opt.record_periods = 60;
    opt.trial_periods = 400;
    opt.cutoff_grid = {0.05, 0.1, 0.2};
    const auto rep = tune(sc, sc.omega1(), opt);
    REQUIRE(rep.kp_critical);
    REQUIRE(rep.ki_critical);
    CHECK(rep.kp_selected == *rep.kp_critical / 2.0);
    CHECK(rep.ki_selected == *rep.ki_critical / 2.0);
    CHECK(rep.kp_trials.back().onset);
    for (std::size_t i = 0; i + 1 < rep.kp_trials.size(); ++i) CHECK_FALSE(rep.kp_trials[i].onset);
    // the selected cutoff is the largest admissible one on the grid
    double best = 0.0;
    for (const auto& t : rep.cutoff_trials)
        if (t.admissible) best = std::max(best, t.cutoff_over_omega1);
    CHECK(rep.cutoff_over_omega1 == best);
}

TEST_CASE("tuning rejects bad options") {
    Scenario sc = shaw_beam();
    TuningOptions opt;
    opt.gain_ratio = 1.0;
    CHECK_THROWS_AS(tune(sc, sc.omega1(), opt), ValidationError);
    sc.control.harmonics.clear();
    CHECK_THROWS_AS(tune(sc, sc.omega1()), ValidationError);
}

TEST_CASE("campaign with no commands writes only the manifest") {
    const auto dir = scratch("empty");
    CampaignOptions opt;
    opt.commands.clear();
    const auto res = run_campaign(shaw_beam(), dir, opt);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path().filename().string());
    CHECK(files == std::vector<std::string>{"manifest.json"});
    const auto m = read_json_file((dir / "manifest.json").string());
    CHECK(m == res.manifest);
    CHECK(m.at("steps").empty());
    CHECK(m.at("scenario_hash") == config_hash(to_json(shaw_beam())));
    fs::remove_all(dir);
}

TEST_CASE("campaign reruns give identical manifests") {
    Scenario sc = shaw_beam();
    sc.schedule = tiny_schedule(sc);
    CampaignOptions opt;
    opt.commands = {"simulate", "compare"};
    const auto d1 = scratch("rerun-1"), d2 = scratch("rerun-2");
    const auto r1 = run_campaign(sc, d1, opt);
    const auto r2 = run_campaign(sc, d2, opt);
    CHECK(r1.manifest == r2.manifest);
    CHECK(r1.manifest.at("steps").size() == 2);
    for (const char* f : {"run-harmonized.csv", "run-unharmonized.csv", "table.json", "compare-unharmonized-harmonized.csv"})
        CHECK(fs::exists(d1 / f));
    const auto j1 = read_json_file((d1 / "run-harmonized.json").string());
    const auto j2 = read_json_file((d2 / "run-harmonized.json").string());
    CHECK(j1.at("points").at(1).at("excitation_fft") == j2.at("points").at(1).at("excitation_fft"));
    sc.seed = 9;
    const auto r3 = run_campaign(sc, scratch("rerun-3"), opt);
    CHECK(r3.manifest.at("scenario_hash") != r1.manifest.at("scenario_hash"));
    CampaignOptions unknown;
    unknown.commands = {"dance"};
    CHECK_THROWS_AS(run_campaign(sc, scratch("rerun-4"), unknown), ValidationError);
    for (const auto& d : {d1, d2, scratch("rerun-3"), scratch("rerun-4")}) fs::remove_all(d);
}

TEST_CASE("run records, spectra and time series round trip") {
    Scenario sc = shaw_beam();
    Rig rig = make_rig(sc);
    const double omega = 0.9 * sc.omega1();
    rig.set_omega(omega);
    RunRecord run;
    run.scenario = sc.name;
    run.target = sc.control.target_level;
    run.order = sc.estimator.order;
    run.harmonics = sc.control.harmonics;
    SampleLog last;
    SteppedSineOptions so;
    so.on_window = [&](std::size_t, const SampleLog& log) { last = log; };
    run.points.push_back(settle_and_measure(rig, omega, 40, 10, sc.control.target_level, so));
    const json j = to_json(run);
    const auto back = run_from_json(json::parse(j.dump()));
    CHECK(to_json(back) == j);
    CHECK(back.points[0].excitation_fft == run.points[0].excitation_fft);
    CHECK(back.points[0].final_state == run.points[0].final_state);
    CHECK_THROWS_AS(run_from_json(json::object()), ValidationError);

    REQUIRE(last.size() > 0);
    const auto path = fs::temp_directory_path() / "exharm-test-bench.ts";
    write_time_series(path, last);
    const auto ts = read_time_series(path);
    CHECK(ts.names == std::vector<std::string>{"time_s", "phase_rad", "command_V", "excitation", "response_m"});
    CHECK(ts.columns[0] == last.time);
    CHECK(ts.columns[3] == last.excitation);
    CHECK(ts.columns[4] == last.response);
    {
        std::ofstream(path, std::ios::binary) << "EXHTS01";
    }
    CHECK_THROWS_AS(read_time_series(path), ValidationError);
    fs::remove(path);
}

TEST_CASE("reference sets round trip") {
    ReferenceSet set;
    BranchPoint b;
    b.omega = 61.5;
    b.state = {1e-3, -2e-4, 0.1, 0.02};
    b.response = HarmonicSpectrum(3);
    b.response.set(1, cplx(0.01, -0.002));
    b.response.set(3, cplx(1e-4, 3e-5));
    b.multipliers = {cplx(0.9, 0.1), cplx(0.9, -0.1)};
    b.stability = Stability::stable;
    b.residual = 3e-10;
    b.iterations = 4;
    set.branches.push_back({"main", {b}, true, ""});
    set.turning_points = {67.4};
    const json j = to_json(set);
    const auto back = reference_from_json(json::parse(j.dump()));
    CHECK(to_json(back) == j);
    REQUIRE(back.find("main"));
    CHECK(back.find("main")->points[0].response == b.response);
    CHECK(back.main_turning_point() == 67.4);
}

TEST_CASE("comparing a run with itself gives zero deltas") {
    const Scenario sc = shaw_beam();
    const auto run = run_stepped_sine(sc, tiny_schedule(sc));
    const auto c = compare_runs(run, run);
    REQUIRE(c.rows.size() == run.points.size());
    CHECK(c.max_excitation_delta == 0.0);
    CHECK(c.max_h1_delta == 0.0);
    for (const auto& r : c.rows) CHECK(r.h3_delta == 0.0);
    CHECK(c.settles_a == c.settles_b);
    const auto csv = comparison_csv(c, sc.omega1());
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(run.points.size()) + 1);
}

TEST_CASE("atomic writes leave no temporary files") {
    const auto dir = scratch("atomic");
    fs::create_directories(dir);
    atomic_write(dir / "a.txt", "one");
    atomic_write(dir / "a.txt", "two");
    std::size_t count = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        (void)e;
        ++count;
    }
    CHECK(count == 1);
    std::ifstream in(dir / "a.txt");
    std::string s;
    in >> s;
    CHECK(s == "two");
    fs::remove_all(dir);
}
