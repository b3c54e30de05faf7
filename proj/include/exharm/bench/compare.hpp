#pragma once

// Run-versus-run and run-versus-reference comparison: excitation spectrum
// deltas, response H1/H3 deviations, iterations, settle counts and wall time.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "exharm/bench/io.hpp"
#include "exharm/bench/reference_run.hpp"
#include "exharm/sim/stepped_sine.hpp"

namespace exharm {

struct ReferenceMatch {
    bool found = false;
    std::string branch;
    BranchPoint point;
    double h1_error = 0.0;  // relative
    double h3_error = 0.0;  // relative
};

/// Reference point at the same frequency (on-grid branches only) whose H1
/// amplitude is closest to the measured one.
inline ReferenceMatch match_reference(const PointRecord& p, const ReferenceSet& ref, bool stable_only = true,
                                      double omega_rel_tol = 1e-9) {
    ReferenceMatch best;
    const double q1 = p.response_fft.magnitude(1);
    double dist = INFINITY;
    for (const auto& b : ref.branches) {
        if (!b.on_grid) continue;
        for (const auto& r : b.points) {
            if (std::abs(r.omega - p.omega) > omega_rel_tol * p.omega) continue;
            if (stable_only && !r.stable()) continue;
            const double d = std::abs(r.amplitude(1) - q1);
            if (d < dist) {
                dist = d;
                best.found = true;
                best.branch = b.label;
                best.point = r;
            }
        }
    }
    if (best.found) {
        best.h1_error = std::abs(q1 - best.point.amplitude(1)) / best.point.amplitude(1);
        const double r3 = best.point.amplitude(3);
        best.h3_error = std::abs(p.response_fft.magnitude(3) - r3) / std::max(r3, 1e-300);
    }
    return best;
}

/// Index of the last point of the leading high-level stretch of a segment:
/// the point before the first relative H1 response drop larger than
/// `drop_fraction`. Empty if the segment never drops.
inline std::optional<std::size_t> last_high_branch_index(const RunRecord& run, const std::string& segment = "main",
                                                         double drop_fraction = 0.4) {
    std::optional<std::size_t> prev;
    for (std::size_t i = 0; i < run.points.size(); ++i) {
        const auto& p = run.points[i];
        if (p.segment != segment || p.failed) continue;
        if (prev) {
            const double a = run.points[*prev].response_fft.magnitude(1);
            const double b = p.response_fft.magnitude(1);
            if (b < (1.0 - drop_fraction) * a) return prev;
        }
        prev = i;
    }
    return std::nullopt;
}

struct ComparisonRow {
    double omega = 0.0;
    std::string segment;
    double excitation_delta = 0.0;  // max_h |F_a - F_b| / target
    double h1_delta = 0.0;          // relative, b vs a
    double h3_delta = 0.0;
    std::size_t settles_a = 0, settles_b = 0;
    double wall_a = 0.0, wall_b = 0.0;
    std::optional<ReferenceMatch> reference_a, reference_b;
};

struct Comparison {
    std::vector<ComparisonRow> rows;
    std::size_t settles_a = 0, settles_b = 0;
    double wall_a = 0.0, wall_b = 0.0;
    double max_excitation_delta = 0.0;
    double max_h1_delta = 0.0;
    double max_reference_h1_error_a = 0.0, max_reference_h1_error_b = 0.0;
};

inline Comparison compare_runs(const RunRecord& a, const RunRecord& b, const ReferenceSet* ref = nullptr) {
    Comparison c;
    std::vector<bool> used(b.points.size(), false);
    for (const auto& pa : a.points) {
        if (pa.failed) continue;
        for (std::size_t k = 0; k < b.points.size(); ++k) {
            const auto& pb = b.points[k];
            if (used[k] || pb.failed || pb.segment != pa.segment || std::abs(pb.omega - pa.omega) > 1e-9 * pa.omega)
                continue;
            used[k] = true;
            ComparisonRow row;
            row.omega = pa.omega;
            row.segment = pa.segment;
            const int order = std::min(pa.excitation_fft.order(), pb.excitation_fft.order());
            for (int h = 1; h <= order; ++h)
                row.excitation_delta =
                    std::max(row.excitation_delta, std::abs(pa.excitation_fft[h] - pb.excitation_fft[h]) / a.target);
            const double a1 = pa.response_fft.magnitude(1), a3 = pa.response_fft.magnitude(3);
            row.h1_delta = std::abs(pb.response_fft.magnitude(1) - a1) / std::max(a1, 1e-300);
            row.h3_delta = std::abs(pb.response_fft.magnitude(3) - a3) / std::max(a3, 1e-300);
            row.settles_a = pa.plant_settles;
            row.settles_b = pb.plant_settles;
            row.wall_a = pa.wall_seconds;
            row.wall_b = pb.wall_seconds;
            if (ref) {
                auto ma = match_reference(pa, *ref), mb = match_reference(pb, *ref);
                if (ma.found) {
                    c.max_reference_h1_error_a = std::max(c.max_reference_h1_error_a, ma.h1_error);
                    row.reference_a = ma;
                }
                if (mb.found) {
                    c.max_reference_h1_error_b = std::max(c.max_reference_h1_error_b, mb.h1_error);
                    row.reference_b = mb;
                }
            }
            c.settles_a += row.settles_a;
            c.settles_b += row.settles_b;
            c.wall_a += row.wall_a;
            c.wall_b += row.wall_b;
            c.max_excitation_delta = std::max(c.max_excitation_delta, row.excitation_delta);
            c.max_h1_delta = std::max(c.max_h1_delta, row.h1_delta);
            c.rows.push_back(row);
            break;
        }
    }
    return c;
}

inline std::string comparison_csv(const Comparison& c, double omega1) {
    std::ostringstream o;
    o << "segment,omega_rad_s,omega_over_omega1,excitation_delta_rel,h1_delta_rel,h3_delta_rel,settles_a,settles_b,"
         "wall_a_s,wall_b_s,ref_branch_a,ref_h1_error_a,ref_h3_error_a,ref_branch_b,ref_h1_error_b,ref_h3_error_b\n";
    for (const auto& r : c.rows) {
        o << r.segment << ',' << sci(r.omega) << ',' << sci(r.omega / omega1) << ',' << sci(r.excitation_delta) << ','
          << sci(r.h1_delta) << ',' << sci(r.h3_delta) << ',' << r.settles_a << ',' << r.settles_b << ','
          << sci(r.wall_a) << ',' << sci(r.wall_b);
        for (const auto& m : {r.reference_a, r.reference_b}) {
            if (m) o << ',' << m->branch << ',' << sci(m->h1_error) << ',' << sci(m->h3_error);
            else o << ",,,";
        }
        o << '\n';
    }
    return o.str();
}

inline json to_json(const Comparison& c) {
    const double ratio = c.settles_a > 0 ? static_cast<double>(c.settles_b) / static_cast<double>(c.settles_a) : 0.0;
    return {{"matched_points", c.rows.size()},
            {"settles_a", c.settles_a},
            {"settles_b", c.settles_b},
            {"settle_ratio_b_over_a", ratio},
            {"wall_a_s", c.wall_a},
            {"wall_b_s", c.wall_b},
            {"max_excitation_delta_rel", c.max_excitation_delta},
            {"max_h1_delta_rel", c.max_h1_delta},
            {"max_reference_h1_error_a", c.max_reference_h1_error_a},
            {"max_reference_h1_error_b", c.max_reference_h1_error_b}};
}

} // namespace exharm
