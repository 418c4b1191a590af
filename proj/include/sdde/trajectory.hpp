#pragma once

// Long-horizon driver for the renormalized segment process. Advances one unit
// interval at a time, re-projecting to the M2 unit sphere after each interval
// (exact by linearity), and reports per-interval statistics consumed by the
// growth-rate estimators.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "integrator.hpp"
#include "segment.hpp"

namespace sdde {

/// What one unit interval contributed to the running estimators.
struct IntervalStats {
    /// log ⫴X_{n+1}⫴ − log ⫴X_n⫴ (the direct M2 growth increment).
    double dlog_m2 = 0.0;
    /// log sup-norm of the re-projected (unit-M2) segment after the step;
    /// together with dlog_m2 this telescopes to the sup-norm growth.
    double log_sup_unit = 0.0;
    /// ∫ psi(S_u) du across the interval, left-endpoint rule at every grid
    /// step (the ergodic-average increment).
    double psi_integral = 0.0;
};

/// Renormalized sphere trajectory: holds the current unit segment, the
/// accumulated log amplitude, and advances unit interval by unit interval.
class SphereTrajectory {
public:
    explicit SphereTrajectory(const Segment& initial) : state_(PathState::from(initial)) {}

    [[nodiscard]] const UnitSegment& state() const noexcept { return state_.segment; }
    [[nodiscard]] double log_scale() const noexcept { return state_.log_scale; }
    [[nodiscard]] int t() const noexcept { return state_.t; }
    [[nodiscard]] int resolution() const noexcept { return state_.segment.resolution(); }

    /// Advance one unit interval. psi is sampled at every grid time in
    /// [n, n+1): the M2 norm of the sliding window [t-1, t] is maintained
    /// incrementally (trapezoid body B), so the whole interval costs O(N).
    IntervalStats step(const NoiseBlock& noise) {
        const Segment& prev = state_.segment.segment();
        const int n = prev.resolution();
        if (noise.resolution() != n) throw ResolutionMismatchError();
        const double h = prev.grid_step();

        const Segment next = advance_unit(prev, noise);

        // Trapezoid body of the current (unit) segment; its M2 norm is 1, so
        // B_0 = 1 - head^2 up to rounding — computed directly for robustness.
        CompensatedSum body;
        for (int k = 0; k <= n; ++k) {
            const double v = prev[static_cast<std::size_t>(k)];
            body.add(((k == 0 || k == n) ? 0.5 : 1.0) * h * v * v);
        }

        CompensatedSum psi_acc;
        for (int k = 0; k < n; ++k) {
            const double head = next[static_cast<std::size_t>(k)];   // X(n + kh); next[0] = prev head
            const double tail = prev[static_cast<std::size_t>(k)];   // X(n + kh - 1)
            const double m2_sq = head * head + std::max(body.total(), 0.0);
            if (m2_sq > 0.0) {
                const double f = head * head / m2_sq;
                const double g = 2.0 * head * tail / m2_sq;
                psi_acc.add(h * (0.5 * f - 0.25 * g * g));
            }
            // Slide the window [n-1+kh, n+kh] -> [n-1+(k+1)h, n+(k+1)h]:
            // prev[k] leaves (edge weight), prev[k+1] becomes the new edge,
            // next[k] becomes interior, next[k+1] enters as the new edge.
            const double xk = next[static_cast<std::size_t>(k)];
            const double xk1 = next[static_cast<std::size_t>(k) + 1];
            const double pk = prev[static_cast<std::size_t>(k)];
            const double pk1 = prev[static_cast<std::size_t>(k) + 1];
            body.add(0.5 * h * (xk * xk + xk1 * xk1 - pk * pk - pk1 * pk1));
        }

        const double norm = m2_norm(next);
        if (norm == 0.0 || !std::isfinite(norm)) throw ExtinctStateError();
        const double sup_unit = sup_norm(next) / norm;
        state_ = PathState{UnitSegment(scaled(next, 1.0 / norm)), state_.log_scale + std::log(norm),
                           state_.t + 1};

        return IntervalStats{std::log(norm), std::log(sup_unit), psi_acc.total()};
    }

private:
    PathState state_;
};

}  // namespace sdde
