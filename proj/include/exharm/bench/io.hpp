#pragma once

// Result persistence: CSV tables in full-precision scientific notation, JSON
// records, a raw binary time-series layout, and atomic write-then-rename.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "exharm/analysis.hpp"
#include "exharm/baseline.hpp"
#include "exharm/bench/reference_run.hpp"
#include "exharm/bench/scenario.hpp"
#include "exharm/bench/tuning.hpp"
#include "exharm/sim/stepped_sine.hpp"

namespace exharm {

inline constexpr int run_csv_schema = 2;
inline constexpr int branch_csv_schema = 1;
inline constexpr int stability_csv_schema = 1;

/// Writes to `<path>.tmp` and renames over `path`.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

inline std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17e", x);
    return buf;
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string config_hash(const json& j) { return fnv1a_hex(j.dump()); }

// --- spectra --------------------------------------------------------------

inline json to_json(const HarmonicSpectrum& s) {
    json a = json::array();
    for (const auto& c : s.coefficients()) a.push_back({c.real(), c.imag()});
    return a;
}

inline HarmonicSpectrum spectrum_from_json(const json& j) {
    require(j.is_array() && !j.empty(), "spectrum must be a non-empty array");
    HarmonicSpectrum s(static_cast<int>(j.size()) - 1);
    for (std::size_t h = 0; h < j.size(); ++h) s.set(static_cast<int>(h), cplx(j[h].at(0), j[h].at(1)));
    return s;
}

// --- stepped-sine runs ------------------------------------------------------

inline json to_json(const PointRecord& p) {
    json j;
    j["omega_rad_s"] = p.omega;
    j["segment"] = p.segment;
    j["excitation_fft"] = to_json(p.excitation_fft);
    j["excitation_filter"] = to_json(p.excitation_filter);
    j["response_fft"] = to_json(p.response_fft);
    j["command_V"] = to_json(p.command);
    j["fluctuation"] = p.fluctuation;
    j["settle_deviation"] = p.settle_deviation;
    j["response_drift"] = p.response_drift;
    j["settled"] = p.settled;
    j["periodic"] = p.periodic;
    j["failed"] = p.failed;
    j["error"] = p.error;
    j["plant_settles"] = p.plant_settles;
    j["saturated_samples"] = p.saturated_samples;
    j["wall_seconds"] = p.wall_seconds;
    j["final_state"] = p.final_state;
    j["final_phase_rad"] = p.final_phase;
    return j;
}

inline PointRecord point_from_json(const json& j) {
    PointRecord p;
    p.omega = j.at("omega_rad_s");
    p.segment = j.value("segment", std::string("main"));
    p.excitation_fft = spectrum_from_json(j.at("excitation_fft"));
    p.excitation_filter = spectrum_from_json(j.at("excitation_filter"));
    p.response_fft = spectrum_from_json(j.at("response_fft"));
    p.command = spectrum_from_json(j.at("command_V"));
    p.fluctuation = j.value("fluctuation", std::vector<double>{});
    p.settle_deviation = j.value("settle_deviation", 0.0);
    p.response_drift = j.value("response_drift", 0.0);
    p.settled = j.value("settled", true);
    p.periodic = j.value("periodic", true);
    p.failed = j.value("failed", false);
    p.error = j.value("error", std::string{});
    p.plant_settles = j.value("plant_settles", std::size_t{1});
    p.saturated_samples = j.value("saturated_samples", std::size_t{0});
    p.wall_seconds = j.value("wall_seconds", 0.0);
    p.final_state = j.value("final_state", StateVector{});
    p.final_phase = j.value("final_phase_rad", 0.0);
    return p;
}

inline json to_json(const RunRecord& r) {
    json j;
    j["scenario"] = r.scenario;
    j["target"] = r.target;
    j["order"] = r.order;
    j["harmonics"] = r.harmonics;
    j["wall_seconds"] = r.wall_seconds;
    j["points"] = json::array();
    for (const auto& p : r.points) j["points"].push_back(to_json(p));
    return j;
}

inline RunRecord run_from_json(const json& j) {
    try {
        RunRecord r;
        r.scenario = j.value("scenario", std::string{});
        r.target = j.at("target");
        r.order = j.at("order");
        r.harmonics = j.value("harmonics", std::vector<int>{});
        r.wall_seconds = j.value("wall_seconds", 0.0);
        for (const auto& p : j.at("points")) r.points.push_back(point_from_json(p));
        return r;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed run record: ") + e.what());
    }
}

inline json to_json(const SolveTrace& t) {
    json steps = json::array();
    for (const auto& s : t.steps)
        steps.push_back({{"iteration", s.iteration},
                         {"jacobian", to_string(s.policy)},
                         {"max_residual", s.max_residual},
                         {"settles", s.settles},
                         {"regularized", s.regularized}});
    return {{"converged", t.converged}, {"iterations", t.iterations},     {"settles", t.settles},
            {"jacobian_builds", t.jacobian_builds}, {"error", t.error}, {"steps", steps}};
}

inline json to_json(const IterativeRunRecord& r) {
    json j = to_json(r.run);
    j["traces"] = json::array();
    for (const auto& t : r.traces) j["traces"].push_back(to_json(t));
    j["mean_iterations"] = r.mean_iterations();
    return j;
}

/// One row per point: frequency, Re/Im of the FFT and filter excitation
/// spectra and of the response spectrum for h = 0..H, flags, cost.
inline std::string run_csv(const RunRecord& r, double omega1) {
    std::ostringstream o;
    o << "index,segment,omega_rad_s,omega_over_omega1";
    for (const char* tag : {"F_fft", "F_filter", "Q_fft"})
        for (int h = 0; h <= r.order; ++h) o << ',' << tag << h << "_re," << tag << h << "_im";
    o << ",settled,periodic,failed,settle_deviation,response_drift,plant_settles,saturated_samples,wall_seconds\n";
    auto coeffs = [&o, &r](const HarmonicSpectrum& s) {
        for (int h = 0; h <= r.order; ++h) {
            const cplx c = h <= s.order() ? s[h] : cplx{};
            o << ',' << sci(c.real()) << ',' << sci(c.imag());
        }
    };
    for (std::size_t i = 0; i < r.points.size(); ++i) {
        const auto& p = r.points[i];
        o << i << ',' << p.segment << ',' << sci(p.omega) << ',' << sci(p.omega / omega1);
        coeffs(p.excitation_fft);
        coeffs(p.excitation_filter);
        coeffs(p.response_fft);
        o << ',' << p.settled << ',' << p.periodic << ',' << p.failed << ',' << sci(p.settle_deviation) << ','
          << sci(p.response_drift) << ',' << p.plant_settles << ',' << p.saturated_samples << ','
          << sci(p.wall_seconds) << '\n';
    }
    return o.str();
}

// --- reference --------------------------------------------------------------

inline json to_json(const BranchPoint& b) {
    json mult = json::array();
    for (const auto& m : b.multipliers) mult.push_back({m.real(), m.imag()});
    return {{"omega_rad_s", b.omega},       {"state", b.state},         {"response", to_json(b.response)},
            {"multipliers", mult},          {"stability", to_string(b.stability)},
            {"torus", b.torus},             {"residual", b.residual}, {"iterations", b.iterations}};
}

inline BranchPoint branch_point_from_json(const json& j) {
    BranchPoint b;
    b.omega = j.at("omega_rad_s");
    b.state = j.at("state").get<StateVector>();
    b.response = spectrum_from_json(j.at("response"));
    for (const auto& m : j.at("multipliers")) b.multipliers.emplace_back(m.at(0), m.at(1));
    const std::string s = j.at("stability");
    b.stability = s == "stable" ? Stability::stable : s == "unstable" ? Stability::unstable : Stability::marginal;
    b.torus = j.value("torus", false);
    b.residual = j.value("residual", 0.0);
    b.iterations = j.value("iterations", 0);
    return b;
}

inline json to_json(const ReferenceSet& set) {
    json j;
    j["turning_points_rad_s"] = set.turning_points;
    j["isola_turning_points_rad_s"] = set.isola_turning_points;
    j["branches"] = json::array();
    for (const auto& b : set.branches) {
        json pts = json::array();
        for (const auto& p : b.points) pts.push_back(to_json(p));
        j["branches"].push_back({{"label", b.label}, {"on_grid", b.on_grid}, {"diagnostic", b.diagnostic}, {"points", pts}});
    }
    return j;
}

inline ReferenceSet reference_from_json(const json& j) {
    try {
        ReferenceSet set;
        set.turning_points = j.value("turning_points_rad_s", std::vector<double>{});
        set.isola_turning_points = j.value("isola_turning_points_rad_s", std::vector<double>{});
        for (const auto& b : j.at("branches")) {
            LabeledBranch lb{b.at("label"), {}, b.value("on_grid", true), b.value("diagnostic", std::string{})};
            for (const auto& p : b.at("points")) lb.points.push_back(branch_point_from_json(p));
            set.branches.push_back(std::move(lb));
        }
        return set;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed reference record: ") + e.what());
    }
}

/// Columns compatible with run_csv: branch, frequency, |Q_1|, |Q_3|,
/// stability, torus flag, largest multiplier modulus.
inline std::string branch_csv(const ReferenceSet& set, double omega1) {
    std::ostringstream o;
    o << "branch,omega_rad_s,omega_over_omega1,Q1_abs_m,Q3_abs_m,stability,torus,max_multiplier_abs,residual\n";
    for (const auto& b : set.branches)
        for (const auto& p : b.points) {
            double mu = 0.0;
            for (const auto& m : p.multipliers) mu = std::max(mu, std::abs(m));
            o << b.label << ',' << sci(p.omega) << ',' << sci(p.omega / omega1) << ',' << sci(p.amplitude(1)) << ','
              << sci(p.response.order() >= 3 ? p.amplitude(3) : 0.0) << ',' << to_string(p.stability) << ','
              << p.torus << ',' << sci(mu) << ',' << sci(p.residual) << '\n';
        }
    return o.str();
}

// --- stability ----------------------------------------------------------------

inline std::string stability_csv(const std::vector<StabilityScan>& scans, double omega1, double force_gain) {
    std::ostringstream o;
    o << "location,kp_times_G_over_R,omega_rad_s,omega_over_omega1,margin\n";
    for (const auto& s : scans)
        for (std::size_t i = 0; i < s.frequencies.size(); ++i)
            o << s.location << ',' << sci(s.kp * force_gain) << ',' << sci(s.frequencies[i]) << ','
              << sci(s.frequencies[i] / omega1) << ',' << sci(s.margin[i]) << '\n';
    return o.str();
}

inline json stability_verdicts(const std::vector<StabilityScan>& scans, double omega1, double force_gain) {
    json a = json::array();
    for (const auto& s : scans) {
        std::vector<double> neg, pos;
        for (double w : s.negative_crossings) neg.push_back(w / omega1);
        for (double w : s.positive_crossings) pos.push_back(w / omega1);
        a.push_back({{"location", s.location},
                     {"kp_times_G_over_R", s.kp * force_gain},
                     {"admissible", s.admissible()},
                     {"negative_crossings_over_omega1", neg},
                     {"positive_crossings_over_omega1", pos},
                     {"mass_ratios", s.mass_ratios},
                     {"variation_ratio", s.variation_ratio()}});
    }
    return a;
}

// --- tuning -------------------------------------------------------------------

inline json to_json(const TuningReport& r) {
    json cut = json::array(), kp = json::array(), ki = json::array();
    for (const auto& t : r.cutoff_trials)
        cut.push_back({{"cutoff_over_omega1", t.cutoff_over_omega1}, {"fluctuation", t.fluctuation},
                       {"admissible", t.admissible}});
    for (const auto& t : r.kp_trials)
        kp.push_back({{"kp_times_G_over_R", t.normalized}, {"onset", t.onset}, {"harmonic", t.harmonic},
                      {"max_peak_to_peak", t.max_peak_to_peak}});
    for (const auto& t : r.ki_trials)
        ki.push_back({{"ki_times_G_over_R_over_omega_lp", t.normalized}, {"onset", t.onset}, {"harmonic", t.harmonic},
                      {"max_peak_to_peak", t.max_peak_to_peak}});
    json j;
    j["omega_rad_s"] = r.omega;
    j["level"] = r.level;
    j["cutoff_trials"] = cut;
    j["cutoff_over_omega1"] = r.cutoff_over_omega1;
    j["gain_cutoff_over_omega1"] = r.gain_cutoff_over_omega1;
    j["cutoff_admissible"] = r.cutoff_admissible;
    j["kp_trials"] = kp;
    j["kp_critical"] = r.kp_critical ? json(*r.kp_critical) : json(nullptr);
    j["kp_selected"] = r.kp_selected;
    j["ki_trials"] = ki;
    j["ki_critical"] = r.ki_critical ? json(*r.ki_critical) : json(nullptr);
    j["ki_selected"] = r.ki_selected;
    j["notes"] = r.notes;
    return j;
}

// --- binary time series -------------------------------------------------------
//
// Layout (little-endian host order): 8-byte magic "EXHTS01\0", uint32 channel
// count C, uint64 sample count N, C channel names each as uint32 length +
// bytes, then C contiguous float64 columns of N values.

inline void write_time_series(const std::filesystem::path& path, const SampleLog& log) {
    const std::vector<std::pair<std::string, const std::vector<double>*>> cols = {
        {"time_s", &log.time},
        {"phase_rad", &log.phase},
        {"command_V", &log.command},
        {"excitation", &log.excitation},
        {"response_m", &log.response}};
    std::string buf("EXHTS01", 8);
    auto put = [&buf](const void* p, std::size_t n) { buf.append(static_cast<const char*>(p), n); };
    const auto c = static_cast<std::uint32_t>(cols.size());
    const auto n = static_cast<std::uint64_t>(log.size());
    put(&c, sizeof c);
    put(&n, sizeof n);
    for (const auto& [name, _] : cols) {
        const auto len = static_cast<std::uint32_t>(name.size());
        put(&len, sizeof len);
        put(name.data(), name.size());
    }
    for (const auto& [_, v] : cols) put(v->data(), v->size() * sizeof(double));
    atomic_write(path, buf);
}

struct TimeSeries {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
};

inline TimeSeries read_time_series(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 7) != "EXHTS01") throw ValidationError("not a time-series file");
    std::uint32_t c = 0;
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&c), sizeof c);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    TimeSeries ts;
    for (std::uint32_t i = 0; i < c; ++i) {
        std::uint32_t len = 0;
        in.read(reinterpret_cast<char*>(&len), sizeof len);
        std::string name(len, '\0');
        in.read(name.data(), len);
        ts.names.push_back(name);
    }
    for (std::uint32_t i = 0; i < c; ++i) {
        std::vector<double> v(n);
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
        ts.columns.push_back(std::move(v));
    }
    if (!in) throw ValidationError("truncated time-series file");
    return ts;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

} // namespace exharm
