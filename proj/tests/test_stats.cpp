// ============================================================================
// Unit tests: batch-means errors, slope fitting, autocorrelation summaries,
// and the two-sample distances used by the experiment checks.
// ============================================================================

#include <sdde/stats.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

using Catch::Approx;
using namespace sdde;

namespace {

// Small deterministic LCG so statistical fixtures need no library RNG.
double next_unit(std::uint64_t& state) {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<double>(state >> 11) * 0x1.0p-53;
}

}  // namespace

TEST_CASE("Batch means on a constant series", "[stats]") {
    const std::vector<double> xs(200, 4.25);
    const MeanWithError r = batch_means_ci(xs, 10);
    REQUIRE(r.mean == 4.25);
    REQUIRE(r.standard_error == 0.0);
}

TEST_CASE("Batch means recovers the exact mean and shifts linearly", "[stats]") {
    std::vector<double> xs(240);
    std::iota(xs.begin(), xs.end(), 1.0);  // 1..240: mean 120.5 exactly

    const MeanWithError base = batch_means_ci(xs, 12);
    REQUIRE(base.mean == Approx(120.5).epsilon(1e-15));
    REQUIRE(base.standard_error > 0.0);

    for (double& x : xs) x += 1000.0;
    const MeanWithError shifted = batch_means_ci(xs, 12);
    REQUIRE(shifted.mean == Approx(1120.5).epsilon(1e-15));
    REQUIRE(shifted.standard_error == Approx(base.standard_error).epsilon(1e-12));
}

TEST_CASE("Batch means validates its inputs", "[stats]") {
    const std::vector<double> xs(19, 1.0);
    REQUIRE_THROWS_AS(batch_means_ci(xs, 10), std::invalid_argument);  // <2 per batch
    REQUIRE_THROWS_AS(batch_means_ci(xs, 1), std::invalid_argument);
}

TEST_CASE("Least-squares slope on exact lines", "[stats]") {
    std::vector<double> ys;
    for (int k = 0; k < 50; ++k) ys.push_back(3.0 - 0.25 * k);
    REQUIRE(least_squares_slope(ys) == Approx(-0.25).epsilon(1e-12));

    const std::vector<double> flat(50, 7.0);
    REQUIRE(least_squares_slope(flat) == Approx(0.0).margin(1e-12));
}

TEST_CASE("Autocorrelation identifies independence and repetition", "[stats]") {
    std::uint64_t state = 3;
    std::vector<double> iid(20'000);
    for (double& x : iid) x = next_unit(state);

    REQUIRE(autocorrelation(iid, 0) == Approx(1.0).epsilon(1e-12));
    REQUIRE(std::abs(autocorrelation(iid, 1)) < 0.03);

    SECTION("integrated time of an iid series is near one") {
        const double tau = integrated_autocorrelation_time(iid);
        REQUIRE(tau == Approx(1.0).margin(0.15));
        REQUIRE(effective_sample_size(iid) == Approx(iid.size() / tau).epsilon(1e-12));
    }
    SECTION("duplicating every value doubles the integrated time") {
        std::vector<double> doubled;
        doubled.reserve(iid.size());
        for (std::size_t i = 0; i < iid.size() / 2; ++i) {
            doubled.push_back(iid[i]);
            doubled.push_back(iid[i]);
        }
        REQUIRE(integrated_autocorrelation_time(doubled) == Approx(2.0).margin(0.2));
    }
}

TEST_CASE("KS statistic matches hand-computed steps", "[stats][ks]") {
    SECTION("three against one") {
        const std::vector<double> a = {1.0, 2.0, 3.0};
        const std::vector<double> b = {1.5};
        // F_a jumps 1/3 at each of 1,2,3; F_b jumps to 1 at 1.5. The largest
        // gap is |1/3 - 1| = 2/3 just right of 1.5.
        REQUIRE(ks_statistic(a, b) == Approx(2.0 / 3.0).epsilon(1e-12));
    }
    SECTION("identical samples have zero distance") {
        const std::vector<double> a = {0.3, -1.0, 2.5, 0.3};
        REQUIRE(ks_statistic(a, a) == 0.0);
    }
    SECTION("disjoint supports have distance one") {
        const std::vector<double> a = {1.0, 2.0};
        const std::vector<double> b = {5.0, 6.0};
        REQUIRE(ks_statistic(a, b) == 1.0);
    }
}

TEST_CASE("KS critical value uses the asymptotic two-sample form", "[stats][ks]") {
    // c(alpha) sqrt((n+m)/(n m)) with c(0.01) = sqrt(-ln(0.005)/2).
    const double c = std::sqrt(-0.5 * std::log(0.005));
    REQUIRE(ks_critical_value(100.0, 100.0, 0.01) ==
            Approx(c * std::sqrt(0.02)).epsilon(1e-12));
    REQUIRE(ks_critical_value(760.0, 190.0, 0.05) ==
            Approx(std::sqrt(-0.5 * std::log(0.025)) * std::sqrt(1.0 / 760.0 + 1.0 / 190.0))
                .epsilon(1e-12));
    REQUIRE_THROWS_AS(ks_critical_value(0.0, 10.0, 0.01), std::invalid_argument);
    REQUIRE_THROWS_AS(ks_critical_value(10.0, 10.0, 1.5), std::invalid_argument);
}

TEST_CASE("Energy distance on flat point sets", "[stats][energy]") {
    SECTION("a set against itself vanishes") {
        const std::vector<double> pts = {0.0, 0.1, 1.0, -0.4, 0.7, 0.7};
        REQUIRE(energy_distance(pts, pts, 2) == Approx(0.0).margin(1e-12));
    }
    SECTION("two singletons reduce to twice the distance") {
        const std::vector<double> a = {0.0, 0.0};
        const std::vector<double> b = {3.0, 4.0};
        REQUIRE(energy_distance(a, b, 2) == Approx(10.0).epsilon(1e-12));  // 2 * 5
    }
    SECTION("dimension must divide the flat size") {
        const std::vector<double> a = {0.0, 0.0, 1.0};
        REQUIRE_THROWS_AS(energy_distance(a, a, 2), std::invalid_argument);
    }
}

TEST_CASE("Mean and sample SD basics", "[stats]") {
    const std::vector<double> xs = {1.0, 2.0, 3.0, 4.0};
    REQUIRE(mean_of(xs) == Approx(2.5).epsilon(1e-15));
    REQUIRE(sample_sd(xs) == Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-12));
    REQUIRE_THROWS_AS(mean_of(std::vector<double>{}), std::invalid_argument);
    REQUIRE_THROWS_AS(sample_sd(std::vector<double>{1.0}), std::invalid_argument);
}
