#pragma once

// Asymptotic-coupling construction. X solves the driftless equation; the
// difference process Z = X - Y (Y being the steered copy) solves
//   dZ(t) = -lambda rho(t) Z(t) dt + Z(t-1) dW(t)
// with the switching rule: rho = 1 on [n, n+1) exactly when the event
//   A_n = { Y_n in B } and { Z_n in R }
// holds at the interval's left endpoint. B collects segments bounded away
// from zero relative to their sup; R collects segments whose head value
// dominates. The run tracks contraction of ⫴Z_n⫴, waiting times between
// A-events, and the control cost whose finiteness keeps the steered law
// absolutely continuous with respect to the free one.
//
// X and Z are renormalized independently (each to unit M2 norm, with its own
// accumulated log amplitude). The equations are linear in each component
// separately, so the split is exact, and it survives regimes where the ratio
// ⫴Z⫴/⫴X⫴ underflows any fixed-scale representation (large lambda, long T).

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "integrator.hpp"
#include "rng.hpp"
#include "segment.hpp"
#include "stats.hpp"

namespace sdde {

/// B: no grid zeros, and the grid minimum of |values| is at least half the
/// maximum. (A grid cannot certify the absence of zeros between nodes; the
/// grid-level reading is the documented approximation.)
[[nodiscard]] inline bool in_B(const Segment& seg) noexcept {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (double v : seg.values()) {
        const double a = std::abs(v);
        lo = std::min(lo, a);
        hi = std::max(hi, a);
    }
    return lo > 0.0 && lo >= 0.5 * hi;
}

/// R ("reasonable"): kappa * sup norm <= |head value|.
[[nodiscard]] inline bool in_R(const Segment& seg, double kappa) {
    if (kappa <= 0.0) throw std::invalid_argument("in_R: kappa must be positive");
    return kappa * sup_norm(seg) <= std::abs(seg.head());
}

/// Contraction budget r(lambda) = 2 / (kappa^2 lambda): the conditional
/// one-interval bound on E ⫴Z_{n+1}⫴/⫴Z_n⫴ over A_n is 2 sqrt(r).
[[nodiscard]] inline double r_of_lambda(double lambda, double kappa) {
    if (lambda <= 0.0) throw std::invalid_argument("r_of_lambda: lambda must be positive");
    if (kappa <= 0.0) throw std::invalid_argument("r_of_lambda: kappa must be positive");
    return 2.0 / (kappa * kappa * lambda);
}

struct CouplingConfig {
    double lambda = 64.0;  // feedback strength; 0 switches the drift off entirely
    double kappa = 0.05;   // head-dominance threshold for R
    int T = 500;           // unit intervals
    int N = 64;            // grid steps per unit interval
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;
    Segment eta;  // initial condition of X
    Segment phi;  // initial condition of the steered copy; Z starts at eta - phi
};

inline void validate(const CouplingConfig& cfg) {
    if (cfg.lambda < 0.0) throw std::invalid_argument("coupling: lambda must be nonnegative");
    if (!(cfg.kappa > 0.0 && cfg.kappa <= 1.0)) {
        throw std::invalid_argument("coupling: kappa must lie in (0, 1]");
    }
    if (cfg.T < 1) throw std::invalid_argument("coupling: T must be positive");
    if (cfg.N < 2) throw std::invalid_argument("coupling: N must be at least 2");
    if (cfg.eta.resolution() != cfg.phi.resolution()) throw ResolutionMismatchError();
    if (cfg.eta == cfg.phi) {
        throw std::invalid_argument("coupling: eta and phi coincide (difference process starts at zero)");
    }
    if (sup_norm(cfg.eta) == 0.0) throw ZeroStateError();
}

/// One unit interval of the coupled run: the state read at the left endpoint
/// n, the switching decision, and the control-cost increment over [n, n+1).
struct CouplingIntervalRow {
    int n = 0;
    double log_z_norm = 0.0;  // log ⫴Z_n⫴ (true scale; -inf once Z merges to 0)
    bool y_in_B = false;
    bool z_in_R = false;
    bool a_event = false;  // y_in_B && z_in_R
    bool rho = false;      // equals a_event by the switching rule
    double girsanov_increment = 0.0;  // ∫ rho lambda^2 Z^2(t)/Y^2(t-1) dt, trapezoid
    int clamp_count = 0;   // quadrature nodes whose denominator hit the floor
    [[nodiscard]] bool clamp_flag() const noexcept { return clamp_count > 0; }
};

struct CouplingTrace {
    double lambda = 0.0;
    double kappa = 0.0;
    int N = 0;
    std::vector<CouplingIntervalRow> rows;  // one per interval, n = 0..T-1
    double final_log_z_norm = 0.0;          // log ⫴Z_T⫴
    double final_log_x_norm = 0.0;          // log ⫴X_T⫴
};

/// Denominator floor for the cost quadrature, relative to sup_norm(Y_n)^2.
/// Hitting it is counted, never silent.
inline constexpr double kGirsanovClampRel = 1e-12;

[[nodiscard]] inline CouplingTrace run_coupling(const CouplingConfig& cfg) {
    validate(cfg);
    const double h = 1.0 / cfg.N;
    RngStream rng(cfg.master_seed, cfg.stream_id);

    // X state: unit segment + log amplitude.
    Projection px = project(cfg.eta);
    Segment x_shape = px.unit.segment();
    double log_x = px.log_norm;

    // Z state: unit shape + its own log amplitude; the shape becomes the
    // exact zero segment if Z ever merges (and then stays there).
    Segment z0 = axpy(-1.0, cfg.phi, cfg.eta);
    const double z0_norm = m2_norm(z0);
    if (z0_norm == 0.0) {
        throw std::invalid_argument("coupling: eta and phi coincide in M2 norm");
    }
    Segment z_shape = scaled(z0, 1.0 / z0_norm);
    double log_z = std::log(z0_norm);

    CouplingTrace trace;
    trace.lambda = cfg.lambda;
    trace.kappa = cfg.kappa;
    trace.N = cfg.N;
    trace.rows.reserve(static_cast<std::size_t>(cfg.T));

    for (int n = 0; n < cfg.T; ++n) {
        const double log_ratio = log_z - log_x;
        if (log_ratio > 700.0) {
            throw std::overflow_error("coupling: ⫴Z⫴/⫴X⫴ overflows despite renormalization");
        }
        const double zx = std::exp(log_ratio);  // 0 once merged or deeply contracted

        // Y_n = X_n - Z_n, evaluated at X's scale; both B and R are
        // scale-invariant, so unit shapes decide the events exactly.
        const Segment y_rel = axpy(-zx, z_shape, x_shape);
        CouplingIntervalRow row;
        row.n = n;
        row.log_z_norm = log_z;
        row.y_in_B = in_B(y_rel);
        row.z_in_R = in_R(z_shape, cfg.kappa);
        row.a_event = row.y_in_B && row.z_in_R;
        row.rho = row.a_event;

        const NoiseBlock noise = draw_noise(rng, cfg.N);
        const Segment x_next = advance_unit(x_shape, noise);
        const Segment z_next = advance_damped_unit(z_shape, noise, cfg.lambda, row.rho);

        if (row.rho && cfg.lambda > 0.0) {
            // Cost over [n, n+1): Z(n+kh) = e^{log_z} z_next[k],
            // Y(n+kh-1) = e^{log_x} y_rel[k]; the scales combine into q.
            const double q = std::exp(2.0 * log_ratio);
            const double sup_y = sup_norm(y_rel);
            const double floor = kGirsanovClampRel * sup_y * sup_y;
            CompensatedSum s;
            for (int k = 0; k <= cfg.N; ++k) {
                const double w = (k == 0 || k == cfg.N) ? 0.5 : 1.0;
                const double zv = z_next[static_cast<std::size_t>(k)];
                double den = y_rel[static_cast<std::size_t>(k)] * y_rel[static_cast<std::size_t>(k)];
                if (den < floor) {
                    den = floor;
                    ++row.clamp_count;
                }
                s.add(w * zv * zv / den);
            }
            row.girsanov_increment = cfg.lambda * cfg.lambda * h * q * s.total();
        }
        trace.rows.push_back(row);

        const double nx = m2_norm(x_next);
        if (nx == 0.0 || !std::isfinite(nx)) throw ExtinctStateError();
        x_shape = scaled(x_next, 1.0 / nx);
        log_x += std::log(nx);

        const double nz = m2_norm(z_next);
        if (!std::isfinite(nz)) throw ExtinctStateError();
        if (nz == 0.0) {
            // Merged: the zero segment is a fixed point of the dynamics.
            z_shape = Segment::constant(0.0, cfg.N);
            log_z = -std::numeric_limits<double>::infinity();
        } else {
            z_shape = scaled(z_next, 1.0 / nz);
            log_z += std::log(nz);
        }
    }

    trace.final_log_z_norm = log_z;
    trace.final_log_x_norm = log_x;
    return trace;
}

struct ContractionStats {
    double slope = 0.0;  // least-squares slope of n -> log ⫴Z_n⫴
    double conditional_ratio_on_A = std::numeric_limits<double>::quiet_NaN();
    double conditional_ratio_off_A = std::numeric_limits<double>::quiet_NaN();
    long on_count = 0;   // intervals with A_n (and a finite ratio)
    long off_count = 0;
};

/// Slope of the log-norm trajectory plus the sample means of the one-interval
/// norm ratios ⫴Z_{n+1}⫴/⫴Z_n⫴, split by whether A_n held. A trace without
/// any A-event reports on_count = 0 and a NaN on-ratio (not an error).
[[nodiscard]] inline ContractionStats contraction_stats(const CouplingTrace& trace) {
    if (trace.rows.size() < 100) {
        throw std::invalid_argument("contraction stats: trace shorter than 100 intervals");
    }
    std::vector<double> logs;
    logs.reserve(trace.rows.size());
    for (const auto& row : trace.rows) {
        if (!std::isfinite(row.log_z_norm)) break;  // merged tail carries no information
        logs.push_back(row.log_z_norm);
    }
    ContractionStats out;
    out.slope = least_squares_slope(logs);

    CompensatedSum on_sum, off_sum;
    for (std::size_t n = 0; n < trace.rows.size(); ++n) {
        const double cur = trace.rows[n].log_z_norm;
        const double next = (n + 1 < trace.rows.size()) ? trace.rows[n + 1].log_z_norm
                                                        : trace.final_log_z_norm;
        if (!std::isfinite(cur) || !std::isfinite(next)) continue;
        const double ratio = std::exp(next - cur);
        if (trace.rows[n].a_event) {
            on_sum.add(ratio);
            ++out.on_count;
        } else {
            off_sum.add(ratio);
            ++out.off_count;
        }
    }
    if (out.on_count > 0) out.conditional_ratio_on_A = on_sum.total() / out.on_count;
    if (out.off_count > 0) out.conditional_ratio_off_A = off_sum.total() / out.off_count;
    return out;
}

struct WaitingTimeStats {
    int event_count = 0;
    std::vector<int> gaps;              // successive A-event index differences
    std::vector<double> tail_prob;      // tail_prob[k-1] = P(gap > k), k = 1..max gap
    double fitted_rate = 0.0;           // geometric MLE q = 1/mean(gap)
    double rate_se = 0.0;               // sqrt(q^2 (1-q) / #gaps)
};

/// Empirical waiting-time distribution between successive A-events.
[[nodiscard]] inline WaitingTimeStats waiting_time_stats(const CouplingTrace& trace) {
    std::vector<int> events;
    for (const auto& row : trace.rows) {
        if (row.a_event) events.push_back(row.n);
    }
    if (events.size() < 10) {
        throw std::invalid_argument("waiting time stats: fewer than 10 A-events in trace");
    }
    WaitingTimeStats out;
    out.event_count = static_cast<int>(events.size());
    out.gaps.reserve(events.size() - 1);
    int max_gap = 0;
    double gap_sum = 0.0;
    for (std::size_t i = 1; i < events.size(); ++i) {
        const int g = events[i] - events[i - 1];
        out.gaps.push_back(g);
        max_gap = std::max(max_gap, g);
        gap_sum += g;
    }
    const double n_gaps = static_cast<double>(out.gaps.size());
    out.fitted_rate = n_gaps / gap_sum;
    out.rate_se = std::sqrt(out.fitted_rate * out.fitted_rate * (1.0 - out.fitted_rate) / n_gaps);
    out.tail_prob.resize(static_cast<std::size_t>(max_gap));
    for (int k = 1; k <= max_gap; ++k) {
        long count = 0;
        for (int g : out.gaps) {
            if (g > k) ++count;
        }
        out.tail_prob[static_cast<std::size_t>(k) - 1] = static_cast<double>(count) / n_gaps;
    }
    return out;
}

struct GirsanovCost {
    double total = 0.0;
    double tail_sum = 0.0;      // contribution of the last 20% of intervals
    long clamp_steps = 0;       // clamped quadrature nodes across rho=1 intervals
    long rho_steps = 0;         // evaluated quadrature nodes across rho=1 intervals
    long flagged_intervals = 0; // intervals with at least one clamp
};

/// Total control cost with its tail share and the clamp audit. A stabilized
/// run has a tail share near zero; clamps must stay rare.
[[nodiscard]] inline GirsanovCost girsanov_cost(const CouplingTrace& trace) {
    GirsanovCost out;
    CompensatedSum total, tail;
    const std::size_t tail_start = trace.rows.size() - trace.rows.size() / 5;
    for (std::size_t i = 0; i < trace.rows.size(); ++i) {
        const auto& row = trace.rows[i];
        total.add(row.girsanov_increment);
        if (i >= tail_start) tail.add(row.girsanov_increment);
        if (row.rho) {
            out.rho_steps += trace.N + 1;
            out.clamp_steps += row.clamp_count;
            if (row.clamp_count > 0) ++out.flagged_intervals;
        }
    }
    out.total = total.total();
    out.tail_sum = tail.total();
    return out;
}

}  // namespace sdde
