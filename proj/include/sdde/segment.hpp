#pragma once

// Segment state of the delay equation on [-1, 0]: uniform-grid samples,
// the three norms (sup, L2, M2), projection to the M2 unit sphere, and the
// scalar functionals that drive the growth-rate formula.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sdde {

struct ZeroStateError : std::domain_error {
    ZeroStateError() : std::domain_error("zero state: segment has vanishing M2 norm") {}
};

struct ExtinctStateError : std::runtime_error {
    ExtinctStateError() : std::runtime_error("extinct state: advanced segment is numerically zero") {}
};

struct ResolutionMismatchError : std::invalid_argument {
    ResolutionMismatchError() : std::invalid_argument("segment resolutions do not match") {}
};

/// Neumaier-compensated accumulator; keeps quadrature error flat in N.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    [[nodiscard]] double total() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Uniform-grid sample of a path on [-1, 0]: values[k] is the path at
/// -1 + k/N for k = 0..N. Values are immutable after construction and
/// validated finite, so segments are safe to share across threads.
class Segment {
public:
    Segment() = default;

    explicit Segment(std::vector<double> values) : values_(std::move(values)) {
        if (values_.size() < 2) {
            throw std::invalid_argument("segment needs at least 2 grid values (N >= 1)");
        }
        for (double v : values_) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("segment values must be finite");
            }
        }
    }

    static Segment constant(double c, int resolution) {
        return Segment(std::vector<double>(static_cast<std::size_t>(resolution) + 1, c));
    }

    /// Sample f(s) at the grid points s = -1 + k/N.
    template <typename F>
    static Segment sample(F&& f, int resolution) {
        std::vector<double> v(static_cast<std::size_t>(resolution) + 1);
        const double h = 1.0 / resolution;
        for (std::size_t k = 0; k < v.size(); ++k) {
            v[k] = f(-1.0 + static_cast<double>(k) * h);
        }
        return Segment(std::move(v));
    }

    [[nodiscard]] int resolution() const noexcept { return static_cast<int>(values_.size()) - 1; }
    [[nodiscard]] double grid_step() const noexcept { return 1.0 / resolution(); }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] double operator[](std::size_t k) const noexcept { return values_[k]; }

    /// Value at s = 0 (the head of the segment).
    [[nodiscard]] double head() const noexcept { return values_.back(); }
    /// Value at s = -1.
    [[nodiscard]] double tail() const noexcept { return values_.front(); }

    /// Value at the grid point nearest to s in [-1, 0].
    [[nodiscard]] double at_coord(double s) const {
        const long idx = std::lround((s + 1.0) * resolution());
        return values_[static_cast<std::size_t>(std::clamp<long>(idx, 0, resolution()))];
    }

    [[nodiscard]] bool operator==(const Segment& other) const noexcept { return values_ == other.values_; }

private:
    std::vector<double> values_;
};

[[nodiscard]] inline double sup_norm(const Segment& seg) noexcept {
    double m = 0.0;
    for (double v : seg.values()) m = std::max(m, std::abs(v));
    return m;
}

/// Trapezoidal quadrature of seg(s)^2 over [-1, 0]. The squared value itself
/// can over/underflow for extreme amplitudes; use m2_norm where that matters.
[[nodiscard]] inline double l2_norm_sq(const Segment& seg) noexcept {
    const int n = seg.resolution();
    CompensatedSum acc;
    for (int k = 0; k <= n; ++k) {
        const double v = seg[static_cast<std::size_t>(k)];
        const double w = (k == 0 || k == n) ? 0.5 : 1.0;
        acc.add(w * v * v);
    }
    return acc.total() / n;
}

/// M2 norm: sqrt(seg(0)^2 + int_{-1}^0 seg(s)^2 ds), trapezoidal body.
/// Computed on sup-rescaled values so amplitudes down to 1e-300 survive.
[[nodiscard]] inline double m2_norm(const Segment& seg) noexcept {
    const double scale = sup_norm(seg);
    if (scale == 0.0) return 0.0;
    const int n = seg.resolution();
    CompensatedSum acc;
    for (int k = 0; k <= n; ++k) {
        const double r = seg[static_cast<std::size_t>(k)] / scale;
        const double w = (k == 0 || k == n) ? 0.5 : 1.0;
        acc.add(w * r * r);
    }
    const double body = acc.total() / n;
    const double head = seg.head() / scale;
    return scale * std::sqrt(head * head + body);
}

/// Pointwise a*x + y.
[[nodiscard]] inline Segment axpy(double a, const Segment& x, const Segment& y) {
    if (x.resolution() != y.resolution()) throw ResolutionMismatchError();
    std::vector<double> out(x.values().size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = a * x[k] + y[k];
    }
    return Segment(std::move(out));
}

[[nodiscard]] inline Segment scaled(const Segment& x, double a) {
    std::vector<double> out(x.values().begin(), x.values().end());
    for (double& v : out) v *= a;
    return Segment(std::move(out));
}

/// A segment on the M2 unit sphere. Construction checks the norm, so holding
/// a UnitSegment is the proof that the invariant held at build time.
class UnitSegment {
public:
    static constexpr double kNormTolerance = 1e-12;

    explicit UnitSegment(Segment seg) : seg_(std::move(seg)) {
        if (std::abs(m2_norm(seg_) - 1.0) > kNormTolerance) {
            throw std::invalid_argument("unit segment: M2 norm deviates from 1 beyond tolerance");
        }
    }

    [[nodiscard]] const Segment& segment() const noexcept { return seg_; }
    [[nodiscard]] double head() const noexcept { return seg_.head(); }
    [[nodiscard]] double tail() const noexcept { return seg_.tail(); }
    [[nodiscard]] int resolution() const noexcept { return seg_.resolution(); }

private:
    Segment seg_;
};

struct Projection {
    UnitSegment unit;
    double log_norm;
};

/// Scale seg to the M2 unit sphere; returns the unit part and log of the
/// factored-out norm. Exact for the dynamics by linearity of the equation.
[[nodiscard]] inline Projection project(const Segment& seg) {
    const double norm = m2_norm(seg);
    if (norm == 0.0 || !std::isfinite(norm)) throw ZeroStateError();
    return Projection{UnitSegment(scaled(seg, 1.0 / norm)), std::log(norm)};
}

/// f(eta) = eta(0)^2, the drift functional of d log M2-norm.
[[nodiscard]] inline double functional_f(const UnitSegment& s) noexcept {
    return s.head() * s.head();
}

/// g(eta) = 2 eta(0) eta(-1), the diffusion functional.
[[nodiscard]] inline double functional_g(const UnitSegment& s) noexcept {
    return 2.0 * s.head() * s.tail();
}

/// psi = f/2 - g^2/4, the ergodic integrand whose sphere average is the
/// exponential growth rate. Bounded above by 1/2 on the unit sphere.
[[nodiscard]] inline double functional_psi(const UnitSegment& s) noexcept {
    const double g = functional_g(s);
    return 0.5 * functional_f(s) - 0.25 * g * g;
}

}  // namespace sdde
