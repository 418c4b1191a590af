#pragma once

// Growth-rate estimation. Two independent routes to the same number:
//   direct     time-slope of log-norm of the renormalized segment process
//              (M2 or sup norm),
//   furstenberg time average of psi(S_t) along the sphere trajectory,
//              sampled at every grid step.
// Both carry batch-means error bars, and a multi-initial-condition harness
// checks that the estimates agree pairwise — the rate does not depend on
// where the path starts.

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

enum class RateMethod { direct_m2, direct_sup, furstenberg };

[[nodiscard]] inline const char* to_string(RateMethod m) noexcept {
    switch (m) {
        case RateMethod::direct_m2: return "direct_m2";
        case RateMethod::direct_sup: return "direct_sup";
        case RateMethod::furstenberg: return "furstenberg";
    }
    return "?";
}

/// Common run geometry for the estimators.
struct RunParams {
    int T = 2000;      // unit intervals simulated
    int N = 64;        // grid steps per unit interval
    int burn_in = 50;  // leading intervals discarded before averaging
    int batches = 20;  // batch-means block count
};

inline void validate(const RunParams& p) {
    if (p.N < 2) throw std::invalid_argument("run params: N must be at least 2");
    if (p.T < 100) throw std::invalid_argument("run params: T must be at least 100");
    if (p.burn_in < 0 || p.burn_in >= p.T) {
        throw std::invalid_argument("run params: burn-in must lie in [0, T)");
    }
    if (p.batches < 10) throw std::invalid_argument("run params: need at least 10 batches");
    if (p.T - p.burn_in < 2 * p.batches) {
        throw std::invalid_argument("run params: T - burn_in too small for the batch count");
    }
}

struct EstimateReport {
    double estimate = 0.0;        // per-unit-time growth rate
    double standard_error = 0.0;  // batch-means SE
    int batch_count = 0;
    int horizon_T = 0;
    int resolution_N = 0;
    RateMethod method = RateMethod::direct_m2;
    std::uint64_t seed = 0;  // master seed; the stream id is replica-derived
    std::string initial_condition_label;

    /// The growth rate is provably at most 1/2; an estimate beyond five
    /// standard errors above that signals a defect somewhere.
    [[nodiscard]] bool violates_growth_bound() const noexcept {
        return estimate > 0.5 + 5.0 * standard_error;
    }
};

/// Per-interval increment series from one trajectory, after burn-in.
/// One simulation feeds all three estimators, so cross-method comparisons on
/// "the same seed" really are comparisons on the same noise path.
struct RateSeries {
    std::vector<double> dlog_m2;   // direct M2-norm increments
    std::vector<double> dlog_sup;  // direct sup-norm increments
    std::vector<double> psi;       // per-interval psi integrals
};

[[nodiscard]] inline RateSeries collect_rate_series(const Segment& eta, const RunParams& params,
                                                    RngStream& rng) {
    validate(params);
    if (is_zero_segment(eta)) throw ZeroStateError();

    SphereTrajectory traj(eta);
    const int kept = params.T - params.burn_in;
    RateSeries series;
    series.dlog_m2.reserve(static_cast<std::size_t>(kept));
    series.dlog_sup.reserve(static_cast<std::size_t>(kept));
    series.psi.reserve(static_cast<std::size_t>(kept));

    double prev_log_sup_unit = std::log(sup_norm(traj.state().segment()));
    for (int n = 0; n < params.T; ++n) {
        const IntervalStats stats = traj.step(draw_noise(rng, params.N));
        if (n >= params.burn_in) {
            series.dlog_m2.push_back(stats.dlog_m2);
            // log sup X_{n+1} - log sup X_n telescopes through the unit-sphere
            // representation: M2 increment plus the change in unit-sup.
            series.dlog_sup.push_back(stats.dlog_m2 + stats.log_sup_unit - prev_log_sup_unit);
            series.psi.push_back(stats.psi_integral);
        }
        prev_log_sup_unit = stats.log_sup_unit;
    }
    return series;
}

namespace detail {

[[nodiscard]] inline EstimateReport make_report(std::span<const double> series, RateMethod method,
                                                const RunParams& params, std::uint64_t master_seed,
                                                std::string label) {
    const auto [mean, se] = batch_means_ci(series, params.batches);
    EstimateReport r;
    r.estimate = mean;
    r.standard_error = se;
    r.batch_count = params.batches;
    r.horizon_T = params.T;
    r.resolution_N = params.N;
    r.method = method;
    r.seed = master_seed;
    r.initial_condition_label = std::move(label);
    return r;
}

}  // namespace detail

enum class RateNorm { m2, sup };

/// All three estimates from a single trajectory (one simulation pass).
struct RateEstimates {
    EstimateReport direct_m2;
    EstimateReport direct_sup;
    EstimateReport furstenberg;
};

[[nodiscard]] inline RateEstimates estimate_rates(const Segment& eta, const RunParams& params,
                                                  std::uint64_t master_seed,
                                                  std::uint64_t stream_id,
                                                  const std::string& label) {
    RngStream rng(master_seed, stream_id);
    const RateSeries series = collect_rate_series(eta, params, rng);
    return RateEstimates{
        detail::make_report(series.dlog_m2, RateMethod::direct_m2, params, master_seed, label),
        detail::make_report(series.dlog_sup, RateMethod::direct_sup, params, master_seed, label),
        detail::make_report(series.psi, RateMethod::furstenberg, params, master_seed, label),
    };
}

/// Direct log-norm growth estimate in the chosen norm.
[[nodiscard]] inline EstimateReport run_direct(const Segment& eta, const RunParams& params,
                                               std::uint64_t master_seed, RateNorm norm,
                                               const std::string& label = "",
                                               std::uint64_t stream_id = 0) {
    const RateEstimates all = estimate_rates(eta, params, master_seed, stream_id, label);
    return norm == RateNorm::m2 ? all.direct_m2 : all.direct_sup;
}

/// Ergodic-average estimate: time average of psi along the sphere trajectory.
[[nodiscard]] inline EstimateReport run_furstenberg(const Segment& eta, const RunParams& params,
                                                    std::uint64_t master_seed,
                                                    const std::string& label = "",
                                                    std::uint64_t stream_id = 0) {
    return estimate_rates(eta, params, master_seed, stream_id, label).furstenberg;
}

struct PairwiseComparison {
    std::size_t first_index = 0;   // indices into the eta list
    std::size_t second_index = 0;
    double abs_difference = 0.0;   // |pooled estimate_i - pooled estimate_j|
    double combined_se = 0.0;      // sqrt(se_i^2 + se_j^2) of the pooled means
    [[nodiscard]] bool within_3se() const noexcept { return abs_difference <= 3.0 * combined_se; }
};

struct MultiEtaResult {
    // One report per (eta, replica), eta-major order, method = furstenberg's
    // companion direct_m2 (the headline estimator).
    std::vector<EstimateReport> reports;
    std::vector<double> pooled_estimates;  // per eta: mean over replicas
    std::vector<double> pooled_se;         // per eta: sqrt(sum se^2)/replicas
    std::vector<PairwiseComparison> table;
};

/// Run several initial conditions across shared replica noise streams.
/// Stream r is reused for every eta, so cross-eta differences are
/// common-random-number comparisons and eta vs -eta matches exactly.
[[nodiscard]] inline MultiEtaResult multi_eta_harness(const std::vector<Segment>& etas,
                                                      const std::vector<std::string>& labels,
                                                      const RunParams& params, int replicas,
                                                      std::uint64_t master_seed) {
    if (etas.size() < 2) throw std::invalid_argument("multi-eta harness needs at least 2 etas");
    if (labels.size() != etas.size()) {
        throw std::invalid_argument("multi-eta harness: one label per eta required");
    }
    if (replicas < 1) throw std::invalid_argument("multi-eta harness: replicas must be positive");
    for (const Segment& eta : etas) {
        if (is_zero_segment(eta)) throw ZeroStateError();
    }

    MultiEtaResult result;
    result.reports.reserve(etas.size() * static_cast<std::size_t>(replicas));
    for (std::size_t e = 0; e < etas.size(); ++e) {
        double mean_acc = 0.0;
        double var_acc = 0.0;
        for (int r = 0; r < replicas; ++r) {
            const RateEstimates est = estimate_rates(etas[e], params, master_seed,
                                                     static_cast<std::uint64_t>(r),
                                                     labels[e] + "#" + std::to_string(r));
            result.reports.push_back(est.direct_m2);
            mean_acc += est.direct_m2.estimate;
            var_acc += est.direct_m2.standard_error * est.direct_m2.standard_error;
        }
        result.pooled_estimates.push_back(mean_acc / replicas);
        result.pooled_se.push_back(std::sqrt(var_acc) / replicas);
    }
    for (std::size_t i = 0; i < etas.size(); ++i) {
        for (std::size_t j = i + 1; j < etas.size(); ++j) {
            PairwiseComparison cmp;
            cmp.first_index = i;
            cmp.second_index = j;
            cmp.abs_difference = std::abs(result.pooled_estimates[i] - result.pooled_estimates[j]);
            cmp.combined_se = std::sqrt(result.pooled_se[i] * result.pooled_se[i] +
                                        result.pooled_se[j] * result.pooled_se[j]);
            result.table.push_back(cmp);
        }
    }
    return result;
}

}  // namespace sdde
