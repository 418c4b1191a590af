// ============================================================================
// Unit tests: coupled-pair bookkeeping. The central test mirrors the
// renormalized coupled run with plain un-renormalized arithmetic over a short
// horizon and demands the same events, log norms, and control costs.
// ============================================================================

#include <sdde/coupling.hpp>
#include <sdde/eta.hpp>
#include <sdde/integrator.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

using Catch::Approx;
using namespace sdde;

TEST_CASE("Set membership B: positive grid with dominated minimum", "[coupling][sets]") {
    SECTION("a constant segment qualifies") {
        REQUIRE(in_B(Segment::constant(1.0, 16)));
        REQUIRE(in_B(Segment::constant(-2.5, 16)));  // sign does not matter
    }
    SECTION("minimum below half the maximum fails") {
        const Segment ramp = Segment::sample([](double s) { return 1.0 + 0.6 * s; }, 16);
        REQUIRE_FALSE(in_B(ramp));  // min 0.4 < 0.5 = half of max 1.0
    }
    SECTION("a grid zero fails") {
        std::vector<double> vals(17, 1.0);
        vals[8] = 0.0;
        REQUIRE_FALSE(in_B(Segment(std::move(vals))));
    }
    SECTION("membership is scale-invariant across extreme magnitudes") {
        const Segment good = Segment::sample([](double s) { return 0.8 - 0.19 * s; }, 16);
        const Segment bad = Segment::sample([](double s) { return 1.0 + 0.6 * s; }, 16);
        for (double a : {1e300, 1e-300, -7.0}) {
            REQUIRE(in_B(scaled(good, a)) == in_B(good));
            REQUIRE(in_B(scaled(bad, a)) == in_B(bad));
        }
    }
}

TEST_CASE("Set membership R: head dominates kappa times the sup", "[coupling][sets]") {
    REQUIRE(in_R(Segment::constant(1.0, 16), 0.05));
    REQUIRE(in_R(Segment::constant(1.0, 16), 1.0));

    // Head 0.04 against sup 1.0 fails the kappa = 0.05 threshold.
    const Segment weak_head = Segment::sample([](double s) { return 0.04 - 0.96 * s; }, 16);
    REQUIRE_FALSE(in_R(weak_head, 0.05));
    REQUIRE(in_R(weak_head, 0.04));
    REQUIRE(in_R(scaled(weak_head, 1e300), 0.04));  // scale-invariant

    REQUIRE_THROWS_AS(in_R(Segment::constant(1.0, 16), 0.0), std::invalid_argument);
}

TEST_CASE("Contraction factor r(lambda)", "[coupling]") {
    REQUIRE(r_of_lambda(64.0, 0.05) == Approx(12.5).epsilon(1e-15));
    // r = 1 exactly at lambda = 2 / kappa^2.
    REQUIRE(r_of_lambda(2.0 / (0.05 * 0.05), 0.05) == Approx(1.0).epsilon(1e-15));
    REQUIRE_THROWS_AS(r_of_lambda(0.0, 0.05), std::invalid_argument);
    REQUIRE_THROWS_AS(r_of_lambda(-1.0, 0.05), std::invalid_argument);
    REQUIRE_THROWS_AS(r_of_lambda(64.0, 0.0), std::invalid_argument);
}

TEST_CASE("Coupling configuration validation", "[coupling]") {
    const Segment eta = Segment::constant(1.0, 16);
    const Segment phi = Segment::constant(1.001, 16);
    CouplingConfig good{64.0, 0.05, 100, 16, 0, 0, eta, phi};
    REQUIRE_NOTHROW(validate(good));
    REQUIRE_NOTHROW(
        validate(CouplingConfig{0.0, 0.05, 100, 16, 0, 0, eta, phi}));  // drift may be off

    REQUIRE_THROWS_AS(validate(CouplingConfig{-1.0, 0.05, 100, 16, 0, 0, eta, phi}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(validate(CouplingConfig{64.0, 1.5, 100, 16, 0, 0, eta, phi}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(validate(CouplingConfig{64.0, 0.05, 0, 16, 0, 0, eta, phi}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(
        validate(CouplingConfig{64.0, 0.05, 100, 16, 0, 0, eta, Segment::constant(1.0, 8)}),
        ResolutionMismatchError);
    REQUIRE_THROWS_AS(validate(CouplingConfig{64.0, 0.05, 100, 16, 0, 0, eta, eta}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(validate(CouplingConfig{64.0, 0.05, 100, 16, 0, 0,
                                              Segment::constant(0.0, 16), phi}),
                      ZeroStateError);
}

TEST_CASE("Renormalized coupled run matches plain arithmetic on a short horizon",
          "[coupling][oracle]") {
    // Over 20 intervals nothing overflows, so the whole coupled system can be
    // run in raw coordinates with the identical noise stream. Every recorded
    // quantity must agree with the renormalized bookkeeping.
    const int n_grid = 16;
    const int horizon = 20;
    const double lambda = 3.0;
    const double kappa = 0.05;
    const Segment eta = Segment::constant(1.0, n_grid);
    const Segment phi = scaled(eta, 1.0 + 1e-3);

    CouplingConfig cfg{lambda, kappa, horizon, n_grid, 7, 0, eta, phi};
    const CouplingTrace trace = run_coupling(cfg);
    REQUIRE(trace.rows.size() == static_cast<std::size_t>(horizon));

    RngStream rng(7, 0);  // replay the identical noise
    Segment x = eta;
    Segment z = axpy(-1.0, phi, eta);  // Z_0 = eta - phi
    const double h = 1.0 / n_grid;
    long a_events = 0;

    for (int n = 0; n < horizon; ++n) {
        const auto& row = trace.rows[static_cast<std::size_t>(n)];
        const Segment y = axpy(-1.0, z, x);

        REQUIRE(row.n == n);
        REQUIRE(row.y_in_B == in_B(y));
        REQUIRE(row.z_in_R == in_R(z, kappa));
        REQUIRE(row.a_event == (row.y_in_B && row.z_in_R));
        REQUIRE(row.rho == row.a_event);
        REQUIRE(row.log_z_norm == Approx(std::log(m2_norm(z))).epsilon(1e-9));
        if (row.a_event) ++a_events;

        const NoiseBlock noise = draw_noise(rng, n_grid);
        const Segment x_next = advance_unit(x, noise);
        const Segment z_next = advance_damped_unit(z, noise, lambda, row.rho);

        if (row.rho) {
            // Trapezoid of Z^2(t) / Y^2(t-1) over the interval, with the
            // documented relative denominator floor.
            const double sup_y = sup_norm(y);
            const double floor = kGirsanovClampRel * sup_y * sup_y;
            double s = 0.0;
            for (int k = 0; k <= n_grid; ++k) {
                const double w = (k == 0 || k == n_grid) ? 0.5 : 1.0;
                const double zv = z_next[static_cast<std::size_t>(k)];
                const double yv = y[static_cast<std::size_t>(k)];
                s += w * zv * zv / std::max(yv * yv, floor);
            }
            REQUIRE(row.girsanov_increment ==
                    Approx(lambda * lambda * h * s).epsilon(1e-9));
        } else {
            REQUIRE(row.girsanov_increment == 0.0);
        }

        x = x_next;
        z = z_next;
    }
    REQUIRE(trace.final_log_x_norm == Approx(std::log(m2_norm(x))).epsilon(1e-9));
    REQUIRE(trace.final_log_z_norm == Approx(std::log(m2_norm(z))).epsilon(1e-9));
    REQUIRE(a_events >= 1);  // the cost branch above was actually exercised
}

TEST_CASE("Without drift the difference process grows like the path itself",
          "[coupling][statistical]") {
    const Segment eta = Segment::constant(1.0, 64);
    CouplingConfig cfg{0.0, 0.05, 500, 64, 13, 0, eta, scaled(eta, 1.0 + 1e-6)};
    const CouplingTrace trace = run_coupling(cfg);

    const GirsanovCost cost = girsanov_cost(trace);
    REQUIRE(cost.total == 0.0);  // lambda = 0 never accrues cost
    REQUIRE(cost.rho_steps >= 0);

    // Z follows the undamped dynamics, so its log norm drifts at the growth
    // rate of the equation itself (about 0.02 per unit time), not downward.
    const ContractionStats stats = contraction_stats(trace);
    REQUIRE(stats.slope > -0.08);
    REQUIRE(stats.slope < 0.12);
}

TEST_CASE("Strong damping contracts the difference while X keeps growing",
          "[coupling][statistical]") {
    const Segment eta = Segment::constant(1.0, 64);
    CouplingConfig cfg{256.0, 0.05, 500, 64, 13, 0, eta, scaled(eta, 1.0 + 1e-6)};
    const CouplingTrace trace = run_coupling(cfg);
    REQUIRE(std::isfinite(trace.final_log_x_norm));
    REQUIRE(trace.final_log_z_norm < trace.final_log_x_norm - 20.0);
    for (const auto& row : trace.rows) {
        REQUIRE(!std::isnan(row.log_z_norm));
    }
}

TEST_CASE("Contraction summary on synthetic traces", "[coupling][contraction]") {
    SECTION("an exact line recovers its slope and uniform ratios") {
        CouplingTrace trace;
        trace.N = 64;
        for (int n = 0; n < 150; ++n) {
            CouplingIntervalRow row;
            row.n = n;
            row.log_z_norm = -0.1 * n;
            row.a_event = (n % 2 == 0);
            row.rho = row.a_event;
            trace.rows.push_back(row);
        }
        trace.final_log_z_norm = -0.1 * 150;

        const ContractionStats stats = contraction_stats(trace);
        REQUIRE(stats.slope == Approx(-0.1).epsilon(1e-12));
        REQUIRE(stats.on_count == 75);
        REQUIRE(stats.off_count == 75);
        REQUIRE(stats.conditional_ratio_on_A == Approx(std::exp(-0.1)).epsilon(1e-12));
        REQUIRE(stats.conditional_ratio_off_A == Approx(std::exp(-0.1)).epsilon(1e-12));
    }
    SECTION("a merged tail is excluded from the fit and the ratios") {
        CouplingTrace trace;
        trace.N = 64;
        for (int n = 0; n < 150; ++n) {
            CouplingIntervalRow row;
            row.n = n;
            row.log_z_norm = (n < 120) ? -0.2 * n
                                       : -std::numeric_limits<double>::infinity();
            row.a_event = true;
            trace.rows.push_back(row);
        }
        trace.final_log_z_norm = -std::numeric_limits<double>::infinity();

        const ContractionStats stats = contraction_stats(trace);
        REQUIRE(stats.slope == Approx(-0.2).epsilon(1e-12));
        REQUIRE(stats.on_count == 119);  // the step into -inf carries no ratio
    }
    SECTION("short traces are rejected") {
        CouplingTrace trace;
        trace.rows.resize(99);
        REQUIRE_THROWS_AS(contraction_stats(trace), std::invalid_argument);
    }
}

TEST_CASE("Waiting-time summary on a synthetic trace", "[coupling][waiting]") {
    CouplingTrace trace;
    trace.N = 64;
    for (int n = 0; n < 48; ++n) {
        CouplingIntervalRow row;
        row.n = n;
        row.log_z_norm = 0.0;
        row.a_event = (n % 3 == 0);  // events at 0, 3, ..., 45
        trace.rows.push_back(row);
    }

    const WaitingTimeStats wt = waiting_time_stats(trace);
    REQUIRE(wt.event_count == 16);
    REQUIRE(wt.gaps.size() == 15);
    REQUIRE(wt.fitted_rate == Approx(1.0 / 3.0).epsilon(1e-12));
    REQUIRE(wt.rate_se ==
            Approx(std::sqrt((1.0 / 9.0) * (2.0 / 3.0) / 15.0)).epsilon(1e-12));
    REQUIRE(wt.tail_prob.size() == 3);
    REQUIRE(wt.tail_prob[0] == 1.0);  // P(gap > 1)
    REQUIRE(wt.tail_prob[1] == 1.0);  // P(gap > 2)
    REQUIRE(wt.tail_prob[2] == 0.0);  // P(gap > 3)

    SECTION("too few events is an error") {
        CouplingTrace sparse;
        sparse.N = 64;
        for (int n = 0; n < 48; ++n) {
            CouplingIntervalRow row;
            row.n = n;
            row.a_event = (n % 6 == 0);  // only 8 events
            sparse.rows.push_back(row);
        }
        REQUIRE_THROWS_AS(waiting_time_stats(sparse), std::invalid_argument);
    }
}

TEST_CASE("Cost summary on a synthetic trace", "[coupling][girsanov]") {
    CouplingTrace trace;
    trace.N = 4;
    for (int n = 0; n < 10; ++n) {
        CouplingIntervalRow row;
        row.n = n;
        row.girsanov_increment = static_cast<double>(n + 1);  // 1..10
        row.rho = (n == 0 || n == 2);
        row.clamp_count = (n == 2) ? 3 : 0;
        trace.rows.push_back(row);
    }

    const GirsanovCost cost = girsanov_cost(trace);
    REQUIRE(cost.total == Approx(55.0).epsilon(1e-15));
    REQUIRE(cost.tail_sum == Approx(19.0).epsilon(1e-15));  // rows 8 and 9
    REQUIRE(cost.rho_steps == 10);                          // two intervals of N+1 nodes
    REQUIRE(cost.clamp_steps == 3);
    REQUIRE(cost.flagged_intervals == 1);
}
