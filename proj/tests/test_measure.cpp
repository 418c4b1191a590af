// ============================================================================
// Unit tests: sphere-path sampling, the continuity-modulus table, marginal
// distances, and the occupation-average growth functional.
// ============================================================================

#include <sdde/eta.hpp>
#include <sdde/lyapunov.hpp>
#include <sdde/measure.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

using Catch::Approx;
using namespace sdde;

TEST_CASE("Sphere sampling takes snapshots on the documented schedule", "[measure]") {
    const Segment eta = make_eta("const:1", 32);
    const SphereSampleSet set = sample_sphere_path(eta, 100, 32, 10, 7, 5, 0, "const:1");

    // Snapshots at n = 10, 17, ..., 94: floor((100-10-1)/7)+1 = 13 of them.
    REQUIRE(set.samples.size() == 13);
    REQUIRE(set.T == 100);
    REQUIRE(set.burn_in == 10);
    REQUIRE(set.thin == 7);
    REQUIRE(set.eta_label == "const:1");
    REQUIRE(set.coords == default_marginal_coords());

    SECTION("every snapshot sits on the unit sphere") {
        for (const UnitSegment& s : set.samples) {
            REQUIRE(std::abs(m2_norm(s.segment()) - 1.0) <= 1e-9);
        }
    }
    SECTION("input validation") {
        REQUIRE_THROWS_AS(sample_sphere_path(Segment::constant(0.0, 32), 100, 32, 10, 7, 5),
                          ZeroStateError);
        REQUIRE_THROWS_AS(sample_sphere_path(eta, 100, 32, 10, 0, 5), std::invalid_argument);
        REQUIRE_THROWS_AS(sample_sphere_path(eta, 10, 32, 10, 1, 5), std::invalid_argument);
    }
}

TEST_CASE("Mirrored histories sample mirrored snapshots", "[measure][symmetry]") {
    const Segment eta = make_eta("cos:2", 32);
    const SphereSampleSet plus = sample_sphere_path(eta, 60, 32, 5, 3, 11);
    const SphereSampleSet minus = sample_sphere_path(scaled(eta, -1.0), 60, 32, 5, 3, 11);

    REQUIRE(plus.samples.size() == minus.samples.size());
    for (std::size_t i = 0; i < plus.samples.size(); ++i) {
        const auto& a = plus.samples[i].segment();
        const auto& b = minus.samples[i].segment();
        for (std::size_t k = 0; k < a.values().size(); ++k) {
            REQUIRE(b[k] == -a[k]);  // exact sign flip, same noise
        }
    }
}

TEST_CASE("Modulus of continuity on closed forms", "[measure][modulus]") {
    const UnitSegment ramp = project(Segment::sample([](double s) { return s; }, 64)).unit;
    const double scale = 1.0 / m2_norm(Segment::sample([](double s) { return s; }, 64));

    SECTION("the ramp moves exactly delta over any delta-window") {
        for (double delta : {1.0, 0.5, 0.25, 0.125}) {
            REQUIRE(modulus_of_continuity(ramp, delta) ==
                    Approx(scale * delta).epsilon(1e-12));
        }
    }
    SECTION("delta below one grid step falls back to the one-step modulus") {
        REQUIRE(modulus_of_continuity(ramp, 1e-6) ==
                Approx(scale / 64.0).epsilon(1e-12));
    }
    SECTION("a constant has zero modulus") {
        const UnitSegment flat = project(Segment::constant(1.0, 64)).unit;
        REQUIRE(modulus_of_continuity(flat, 0.5) == 0.0);
    }
    SECTION("delta is validated") {
        REQUIRE_THROWS_AS(modulus_of_continuity(ramp, 0.0), std::invalid_argument);
        REQUIRE_THROWS_AS(modulus_of_continuity(ramp, 1.5), std::invalid_argument);
    }
}

TEST_CASE("Tightness table is monotone in both directions", "[measure][statistical]") {
    const Segment eta = make_eta("const:1", 64);
    const SphereSampleSet set = sample_sphere_path(eta, 800, 64, 100, 5, 19);
    REQUIRE(set.samples.size() >= 100);

    const TightnessReport rep =
        tightness_report(set, {1.0, 0.5, 0.25, 0.125}, {0.25, 0.5, 1.0});
    REQUIRE(rep.exceedance.size() == 4);
    REQUIRE(rep.exceedance[0].size() == 3);

    for (std::size_t d = 0; d < rep.deltas.size(); ++d) {
        for (std::size_t e = 0; e < rep.epsilons.size(); ++e) {
            const double frac = rep.exceedance[d][e];
            REQUIRE(frac >= 0.0);
            REQUIRE(frac <= 1.0);
            // Shrinking the window can only shrink the modulus.
            if (d > 0) REQUIRE(frac <= rep.exceedance[d - 1][e]);
            // Raising the threshold can only shrink the exceedance.
            if (e > 0) REQUIRE(frac <= rep.exceedance[d][e - 1]);
        }
    }
    SECTION("experiments with too few snapshots are rejected") {
        const SphereSampleSet small = sample_sphere_path(eta, 120, 64, 100, 5, 19);
        REQUIRE_THROWS_AS(tightness_report(small, {1.0}, {0.5}), std::invalid_argument);
    }
}

TEST_CASE("Marginals and distances", "[measure]") {
    const Segment eta = make_eta("const:1", 64);
    const SphereSampleSet set = sample_sphere_path(eta, 300, 64, 50, 5, 23);

    SECTION("marginal values come from the requested coordinate") {
        const std::vector<double> heads = marginal_values(set, 0.0);
        REQUIRE(heads.size() == set.samples.size());
        for (std::size_t i = 0; i < heads.size(); ++i) {
            REQUIRE(heads[i] == set.samples[i].head());
        }
        REQUIRE_THROWS_AS(marginal_values(set, -0.7), std::invalid_argument);
    }
    SECTION("a set has zero distance to itself") {
        REQUIRE(marginal_distance(set, set, 0.0) == 0.0);
        REQUIRE(head_tail_energy_distance(set, set) == Approx(0.0).margin(1e-12));
    }
    SECTION("mirrored sets agree in distribution") {
        const SphereSampleSet minus =
            sample_sphere_path(scaled(eta, -1.0), 300, 64, 50, 5, 23);
        // Sign flip commutes with the dynamics, so the mirrored run samples
        // the same law; the distance stays below the 1% critical value.
        const double n = static_cast<double>(set.samples.size());
        REQUIRE(marginal_distance(set, minus, 0.0) < ks_critical_value(n, n, 0.01));
    }
    SECTION("a folded set is far away in the head marginal") {
        // Flip only the samples with negative head: about half of the mass
        // moves across zero, so the sup-distance approaches one half and the
        // whole-segment energy distance is decisively positive.
        SphereSampleSet folded = set;
        std::size_t flipped = 0;
        for (UnitSegment& s : folded.samples) {
            if (s.head() < 0.0) {
                s = project(scaled(s.segment(), -1.0)).unit;
                ++flipped;
            }
        }
        REQUIRE(flipped > set.samples.size() / 4);
        REQUIRE(marginal_distance(set, folded, 0.0) > 0.3);
        REQUIRE(head_tail_energy_distance(set, folded) > 0.05);
    }
}

TEST_CASE("Occupation average of psi tracks the trajectory estimator",
          "[measure][statistical]") {
    // Same seed, same stream, same horizon: the snapshot average of psi and
    // the per-interval time average estimate the same ergodic limit; they
    // differ only by burn-in handling, thinning, and within-interval weighting.
    RunParams p;
    p.T = 1500;
    p.N = 64;
    p.burn_in = 100;
    p.batches = 20;
    const Segment eta = make_eta("const:1", 64);

    const SphereSampleSet set = sample_sphere_path(eta, p.T, p.N, p.burn_in, 1, 29);
    const double snapshot_avg = lambda_from_measure(set);
    const EstimateReport fh = run_furstenberg(eta, p, 29);

    REQUIRE(snapshot_avg ==
            Approx(fh.estimate).margin(3.0 * fh.standard_error + 0.01));
    REQUIRE_THROWS_AS(lambda_from_measure(SphereSampleSet{}), std::invalid_argument);
}
