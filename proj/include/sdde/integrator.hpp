#pragma once

// One-unit-interval integration steps for the delay equation
//   dX(t) = X(t-1) dW(t)
// and its damped partner dZ(t) = -lambda rho(t) Z(t) dt + Z(t-1) dW(t).
// The grid step h = 1/N divides the delay exactly, so the delayed coefficient
// is always a stored grid value; no interpolation enters the scheme.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "rng.hpp"
#include "segment.hpp"

namespace sdde {

/// The N Brownian increments driving one unit interval at resolution N.
/// Carries its provenance — (seed, stream, starting position) — so any block
/// in a result file can be regenerated exactly.
class NoiseBlock {
public:
    struct Provenance {
        std::uint64_t master_seed = 0;
        std::uint64_t stream_id = 0;
        std::uint64_t position = 0;  // stream draw counter before this block
    };

    explicit NoiseBlock(std::vector<double> increments)
        : NoiseBlock(std::move(increments), Provenance{0, 0, 0}) {}

    NoiseBlock(std::vector<double> increments, Provenance provenance)
        : dw_(std::move(increments)), provenance_(provenance) {
        if (dw_.size() < 2) {
            throw std::invalid_argument("noise block needs at least 2 increments (N >= 2)");
        }
    }

    [[nodiscard]] const Provenance& provenance() const noexcept { return provenance_; }

    [[nodiscard]] int resolution() const noexcept { return static_cast<int>(dw_.size()); }
    [[nodiscard]] std::span<const double> increments() const noexcept { return dw_; }
    [[nodiscard]] double operator[](std::size_t k) const noexcept { return dw_[k]; }

    /// Sum of the increments: W(t+1) - W(t) for the interval this block drives.
    [[nodiscard]] double total() const noexcept {
        CompensatedSum acc;
        for (double d : dw_) acc.add(d);
        return acc.total();
    }

private:
    std::vector<double> dw_;
    Provenance provenance_;
};

/// Draw the N increments for one unit interval; each has variance 1/N.
[[nodiscard]] inline NoiseBlock draw_noise(RngStream& rng, int resolution) {
    if (resolution < 2) {
        throw std::invalid_argument("noise block needs at least 2 increments (N >= 2)");
    }
    const NoiseBlock::Provenance origin{rng.master_seed(), rng.stream_id(), rng.position()};
    const double sd = 1.0 / std::sqrt(static_cast<double>(resolution));
    std::vector<double> dw(static_cast<std::size_t>(resolution));
    for (double& d : dw) d = sd * rng.next_gaussian();
    return NoiseBlock(std::move(dw), origin);
}

namespace detail {

/// Shared Euler kernel: out[0] = head, out[k+1] = decay*out[k] + prev[k]*dW_k.
/// decay == 1.0 gives the driftless equation; the damped equation passes
/// exp(-lambda*h) (integrating-factor step, noise added after the decay).
/// Both equations route through this one function so that lambda == 0
/// reproduces the driftless update bit for bit.
[[nodiscard]] inline std::vector<double> euler_unit(double head, std::span<const double> prev,
                                                    const NoiseBlock& noise, double decay) {
    const std::size_t n = noise.increments().size();
    std::vector<double> out(n + 1);
    out[0] = head;
    for (std::size_t k = 0; k < n; ++k) {
        out[k + 1] = decay * out[k] + prev[k] * noise[k];
    }
    return out;
}

}  // namespace detail

/// Advance the driftless equation across one unit interval.
/// The returned segment covers [t, t+1] when `seg` covered [t-1, t].
[[nodiscard]] inline Segment advance_unit(const Segment& seg, const NoiseBlock& noise) {
    if (seg.resolution() != noise.resolution()) throw ResolutionMismatchError();
    return Segment(detail::euler_unit(seg.head(), seg.values(), noise, 1.0));
}

/// Renormalized path state: the true segment is exp(log_scale) * segment.
/// Keeping the stored segment on the unit sphere makes arbitrarily long runs
/// immune to overflow/underflow; the equation is linear, so the split is exact.
struct PathState {
    UnitSegment segment;
    double log_scale;
    int t = 0;  // unit intervals advanced so far

    static PathState from(const Segment& seg) {
        auto [unit, log_norm] = project(seg);
        return PathState{std::move(unit), log_norm, 0};
    }
};

/// Advance one unit interval and re-project to the unit sphere.
/// Throws ExtinctStateError if the advanced segment is numerically zero
/// (possible only through catastrophic noise cancellation at tiny N).
[[nodiscard]] inline PathState advance_unit_renormalized(const PathState& state,
                                                         const NoiseBlock& noise) {
    const Segment next = advance_unit(state.segment.segment(), noise);
    const double norm = m2_norm(next);
    if (norm == 0.0 || !std::isfinite(norm)) throw ExtinctStateError();
    return PathState{UnitSegment(scaled(next, 1.0 / norm)), state.log_scale + std::log(norm),
                     state.t + 1};
}

/// One damped-equation step across a unit interval:
///   z_{k+1} = exp(-lambda*h) * z_k + z(t+kh-1) * dW_k   when damping is on,
///   z_{k+1} =                  z_k + z(t+kh-1) * dW_k   when off.
/// `damped` is the indicator rho for the whole interval (it is constant on
/// unit intervals by construction of the control).
[[nodiscard]] inline Segment advance_damped_unit(const Segment& seg, const NoiseBlock& noise,
                                                 double lambda, bool damped) {
    if (seg.resolution() != noise.resolution()) throw ResolutionMismatchError();
    if (lambda < 0.0) throw std::invalid_argument("damping rate must be nonnegative");
    const double decay = (damped && lambda > 0.0)
                             ? std::exp(-lambda * seg.grid_step())
                             : 1.0;
    return Segment(detail::euler_unit(seg.head(), seg.values(), noise, decay));
}

struct CoupledSegments {
    Segment x;  // driftless solution
    Segment z;  // damped solution, same noise
};

/// Advance the pair (X, Z) across one unit interval with identical noise.
[[nodiscard]] inline CoupledSegments advance_coupled_unit(const Segment& x, const Segment& z,
                                                          const NoiseBlock& noise, double lambda,
                                                          bool damped) {
    if (x.resolution() != z.resolution()) throw ResolutionMismatchError();
    return CoupledSegments{advance_unit(x, noise),
                           advance_damped_unit(z, noise, lambda, damped)};
}

}  // namespace sdde
