#pragma once

// Statistical plumbing shared by the estimators and experiment checks:
// batch-means error bars for time averages, least-squares slopes,
// autocorrelation / effective sample size, and the two-sample
// Kolmogorov–Smirnov distance with an ESS-aware critical value.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "segment.hpp"  // CompensatedSum

namespace sdde {

struct MeanWithError {
    double mean = 0.0;
    double standard_error = 0.0;
};

[[nodiscard]] inline double mean_of(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean of empty series");
    CompensatedSum acc;
    for (double x : xs) acc.add(x);
    return acc.total() / static_cast<double>(xs.size());
}

[[nodiscard]] inline double sample_sd(std::span<const double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("sample SD needs at least 2 points");
    const double m = mean_of(xs);
    CompensatedSum acc;
    for (double x : xs) acc.add((x - m) * (x - m));
    return std::sqrt(acc.total() / static_cast<double>(xs.size() - 1));
}

/// Time-average error bar: split the first batches*m points into contiguous
/// batches, SE = sd(batch means)/sqrt(batches). The reported mean is over the
/// whole series. Correlated-series workhorse; batches must see many mixing
/// times each for the SE to be honest, which the callers' defaults ensure.
[[nodiscard]] inline MeanWithError batch_means_ci(std::span<const double> series, int batches) {
    if (batches < 2) throw std::invalid_argument("batch means needs at least 2 batches");
    if (series.size() < 2 * static_cast<std::size_t>(batches)) {
        throw std::invalid_argument("batch means: series shorter than 2 points per batch");
    }
    const std::size_t m = series.size() / static_cast<std::size_t>(batches);
    std::vector<double> batch_means(static_cast<std::size_t>(batches));
    for (std::size_t b = 0; b < batch_means.size(); ++b) {
        batch_means[b] = mean_of(series.subspan(b * m, m));
    }
    const double se = sample_sd(batch_means) / std::sqrt(static_cast<double>(batches));
    return MeanWithError{mean_of(series), se};
}

/// Least-squares slope of k -> ys[k], k = 0..n-1.
[[nodiscard]] inline double least_squares_slope(std::span<const double> ys) {
    const std::size_t n = ys.size();
    if (n < 2) throw std::invalid_argument("slope needs at least 2 points");
    const double x_mean = 0.5 * static_cast<double>(n - 1);
    const double y_mean = mean_of(ys);
    CompensatedSum sxy, sxx;
    for (std::size_t k = 0; k < n; ++k) {
        const double dx = static_cast<double>(k) - x_mean;
        sxy.add(dx * (ys[k] - y_mean));
        sxx.add(dx * dx);
    }
    return sxy.total() / sxx.total();
}

/// Lag-k sample autocorrelation (biased normalization, standard for ACF).
[[nodiscard]] inline double autocorrelation(std::span<const double> xs, std::size_t lag) {
    if (xs.size() < 2 || lag >= xs.size()) {
        throw std::invalid_argument("autocorrelation: lag out of range");
    }
    const double m = mean_of(xs);
    CompensatedSum num, den;
    for (std::size_t k = 0; k + lag < xs.size(); ++k) {
        num.add((xs[k] - m) * (xs[k + lag] - m));
    }
    for (double x : xs) den.add((x - m) * (x - m));
    const double d = den.total();
    return d > 0.0 ? num.total() / d : 0.0;
}

/// Integrated autocorrelation time 1 + 2*sum rho_k, truncated at the first
/// lag where rho drops below 0.05 or at n/4, whichever is first. Clamped to
/// at least 1 (white noise).
[[nodiscard]] inline double integrated_autocorrelation_time(std::span<const double> xs) {
    if (xs.size() < 8) return 1.0;
    const std::size_t max_lag = xs.size() / 4;
    double tau = 1.0;
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        const double rho = autocorrelation(xs, lag);
        if (rho < 0.05) break;
        tau += 2.0 * rho;
    }
    return std::max(tau, 1.0);
}

/// Effective number of independent samples in a correlated series.
[[nodiscard]] inline double effective_sample_size(std::span<const double> xs) {
    return static_cast<double>(xs.size()) / integrated_autocorrelation_time(xs);
}

/// Two-sample Kolmogorov–Smirnov statistic sup_x |F_a(x) - F_b(x)|.
[[nodiscard]] inline double ks_statistic(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("KS statistic of empty sample");
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < sa.size() && j < sb.size()) {
        const double x = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] <= x) ++i;
        while (j < sb.size() && sb[j] <= x) ++j;
        const double fa = static_cast<double>(i) / static_cast<double>(sa.size());
        const double fb = static_cast<double>(j) / static_cast<double>(sb.size());
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

/// Two-sample KS critical value c(alpha) * sqrt((n+m)/(n m)) for the
/// asymptotic Kolmogorov distribution; callers pass effective (ESS-corrected)
/// sample sizes when the samples are autocorrelated.
[[nodiscard]] inline double ks_critical_value(double n_eff, double m_eff, double alpha) {
    if (n_eff <= 0.0 || m_eff <= 0.0) throw std::invalid_argument("KS critical value: empty sample");
    if (alpha <= 0.0 || alpha >= 1.0) throw std::invalid_argument("KS critical value: alpha in (0,1)");
    const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
    return c * std::sqrt((n_eff + m_eff) / (n_eff * m_eff));
}

/// Energy distance between two d-dimensional samples (rows of flat arrays):
/// 2 E|X-Y| - E|X-X'| - E|Y-Y'| with Euclidean norms. Secondary,
/// rotation-free measure-distance diagnostic for low-dimensional marginals.
[[nodiscard]] inline double energy_distance(std::span<const double> a, std::span<const double> b,
                                            std::size_t dim) {
    if (dim == 0 || a.size() % dim != 0 || b.size() % dim != 0) {
        throw std::invalid_argument("energy distance: flat sample size not divisible by dim");
    }
    const std::size_t na = a.size() / dim, nb = b.size() / dim;
    if (na == 0 || nb == 0) throw std::invalid_argument("energy distance of empty sample");
    auto dist = [dim](std::span<const double> u, std::size_t i, std::span<const double> v,
                      std::size_t j) {
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double d = u[i * dim + k] - v[j * dim + k];
            s += d * d;
        }
        return std::sqrt(s);
    };
    CompensatedSum ab, aa, bb;
    for (std::size_t i = 0; i < na; ++i)
        for (std::size_t j = 0; j < nb; ++j) ab.add(dist(a, i, b, j));
    for (std::size_t i = 0; i < na; ++i)
        for (std::size_t j = 0; j < na; ++j) aa.add(dist(a, i, a, j));
    for (std::size_t i = 0; i < nb; ++i)
        for (std::size_t j = 0; j < nb; ++j) bb.add(dist(b, i, b, j));
    return 2.0 * ab.total() / static_cast<double>(na * nb) -
           aa.total() / static_cast<double>(na * na) - bb.total() / static_cast<double>(nb * nb);
}

}  // namespace sdde
