#pragma once

// Empirical picture of the sphere process's invariant law: snapshot sampling
// along a long trajectory, modulus-of-continuity tightness diagnostics,
// marginal distances between runs started from different initial conditions
// (uniqueness evidence), and the spatial form of the growth-rate average.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "eta.hpp"
#include "rng.hpp"
#include "stats.hpp"
#include "trajectory.hpp"

namespace sdde {

struct SphereSampleSet {
    std::vector<UnitSegment> samples;  // unit-sphere snapshots at integer times
    std::vector<double> coords;        // designated marginal coordinates
    std::string eta_label;
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;
    int T = 0;
    int N = 0;
    int burn_in = 0;
    int thin = 0;
};

inline const std::vector<double>& default_marginal_coords() {
    static const std::vector<double> coords{-1.0, -0.5, 0.0};
    return coords;
}

/// Snapshot the running unit segment at integer times burn_in, burn_in+thin, …
/// along a single trajectory of T unit intervals.
[[nodiscard]] inline SphereSampleSet sample_sphere_path(
    const Segment& eta, int T, int N, int burn_in, int thin, std::uint64_t master_seed,
    std::uint64_t stream_id = 0, std::string eta_label = "",
    std::vector<double> coords = default_marginal_coords()) {
    if (is_zero_segment(eta)) throw ZeroStateError();
    if (N < 2) throw std::invalid_argument("sphere sampling: N must be at least 2");
    if (thin < 1) throw std::invalid_argument("sphere sampling: thin must be positive");
    if (burn_in < 0 || T <= burn_in) {
        throw std::invalid_argument("sphere sampling: need T > burn_in >= 0");
    }

    RngStream rng(master_seed, stream_id);
    SphereTrajectory traj(eta);
    SphereSampleSet set;
    set.coords = std::move(coords);
    set.eta_label = std::move(eta_label);
    set.master_seed = master_seed;
    set.stream_id = stream_id;
    set.T = T;
    set.N = N;
    set.burn_in = burn_in;
    set.thin = thin;
    set.samples.reserve(static_cast<std::size_t>((T - burn_in) / thin) + 1);

    for (int n = 0; n < T; ++n) {
        if (n >= burn_in && (n - burn_in) % thin == 0) {
            set.samples.push_back(traj.state());
        }
        (void)traj.step(draw_noise(rng, N));
    }
    return set;
}

/// Largest |value difference| over grid pairs at distance at most delta.
/// delta below one grid step falls back to the one-step modulus.
[[nodiscard]] inline double modulus_of_continuity(const UnitSegment& seg, double delta) {
    if (!(delta > 0.0 && delta <= 1.0)) {
        throw std::invalid_argument("modulus of continuity: delta must lie in (0, 1]");
    }
    const auto values = seg.segment().values();
    const int n = seg.resolution();
    // Window width in grid steps; the tiny slack absorbs binary rounding of
    // delta/h so that delta = k*h includes exactly k-step pairs.
    const int w = std::max(1, static_cast<int>(std::floor(delta * n + 1e-9)));
    double mod = 0.0;
    for (int i = 0; i <= n; ++i) {
        double lo = values[static_cast<std::size_t>(i)];
        double hi = lo;
        for (int j = i + 1; j <= std::min(i + w, n); ++j) {
            lo = std::min(lo, values[static_cast<std::size_t>(j)]);
            hi = std::max(hi, values[static_cast<std::size_t>(j)]);
        }
        mod = std::max(mod, hi - lo);
    }
    return mod;
}

struct TightnessReport {
    std::vector<double> deltas;
    std::vector<double> epsilons;
    // exceedance[d][e] = fraction of snapshots with modulus(S, deltas[d]) >= epsilons[e]
    std::vector<std::vector<double>> exceedance;
};

/// Table of empirical P(modulus(S, delta) >= eps). Shrinking delta can only
/// shrink each column (event monotonicity); the tightness evidence is that it
/// does so substantially.
[[nodiscard]] inline TightnessReport tightness_report(const SphereSampleSet& set,
                                                      std::vector<double> deltas,
                                                      std::vector<double> epsilons) {
    if (set.samples.size() < 100) {
        throw std::invalid_argument("tightness report: need at least 100 snapshots");
    }
    TightnessReport report;
    report.deltas = std::move(deltas);
    report.epsilons = std::move(epsilons);
    report.exceedance.assign(report.deltas.size(),
                             std::vector<double>(report.epsilons.size(), 0.0));
    for (std::size_t d = 0; d < report.deltas.size(); ++d) {
        for (const UnitSegment& s : set.samples) {
            const double mod = modulus_of_continuity(s, report.deltas[d]);
            for (std::size_t e = 0; e < report.epsilons.size(); ++e) {
                if (mod >= report.epsilons[e]) report.exceedance[d][e] += 1.0;
            }
        }
        for (double& frac : report.exceedance[d]) {
            frac /= static_cast<double>(set.samples.size());
        }
    }
    return report;
}

/// Values of every snapshot at one designated coordinate.
[[nodiscard]] inline std::vector<double> marginal_values(const SphereSampleSet& set, double coord) {
    if (std::find(set.coords.begin(), set.coords.end(), coord) == set.coords.end()) {
        throw std::invalid_argument("marginal: coordinate not in the configured list");
    }
    std::vector<double> out;
    out.reserve(set.samples.size());
    for (const UnitSegment& s : set.samples) out.push_back(s.segment().at_coord(coord));
    return out;
}

/// Two-sample KS distance between the coord-marginals of two sample sets.
[[nodiscard]] inline double marginal_distance(const SphereSampleSet& a, const SphereSampleSet& b,
                                              double coord) {
    if (a.samples.empty() || b.samples.empty()) {
        throw std::invalid_argument("marginal distance: empty sample set");
    }
    if (a.coords != b.coords) {
        throw std::invalid_argument("marginal distance: coordinate lists differ");
    }
    return ks_statistic(marginal_values(a, coord), marginal_values(b, coord));
}

/// Joint (s(-1), s(0)) energy distance — secondary two-sample diagnostic on
/// the pair of coordinates the functionals f and g actually read.
[[nodiscard]] inline double head_tail_energy_distance(const SphereSampleSet& a,
                                                      const SphereSampleSet& b) {
    auto flatten = [](const SphereSampleSet& s) {
        std::vector<double> flat;
        flat.reserve(2 * s.samples.size());
        for (const UnitSegment& u : s.samples) {
            flat.push_back(u.tail());
            flat.push_back(u.head());
        }
        return flat;
    };
    return energy_distance(flatten(a), flatten(b), 2);
}

/// Spatial form of the growth-rate average: mean of psi over snapshots.
[[nodiscard]] inline double lambda_from_measure(const SphereSampleSet& set) {
    if (set.samples.empty()) throw std::invalid_argument("lambda from measure: empty sample set");
    CompensatedSum acc;
    for (const UnitSegment& s : set.samples) acc.add(functional_psi(s));
    return acc.total() / static_cast<double>(set.samples.size());
}

}  // namespace sdde
