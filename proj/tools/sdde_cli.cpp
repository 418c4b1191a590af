// Batch experiment runner. Five experiment families:
//   moments   scheme validation against closed-form second moments
//   lyapunov  growth-rate estimation (direct + ergodic-average, replicated)
//   couple    one coupled run with contraction / waiting-time / cost reports
//   sweep     coupling contraction across a lambda grid with common noise
//   measure   sphere-process snapshots: tightness, marginals, uniqueness
//
// Configuration: built-in defaults < JSON config file (--config) < flags.
// Results land in --out-dir (default $SDDE_OUT_DIR or ./results), written
// atomically, together with a manifest that pins every seed and parameter.
// Identical (config, seed) produces byte-identical outputs.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error,
//             3 acceptance-threshold violation under --check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sdde/coupling.hpp"
#include "sdde/eta.hpp"
#include "sdde/io.hpp"
#include "sdde/lyapunov.hpp"
#include "sdde/measure.hpp"
#include "sdde/moments.hpp"
#include "sdde/segment.hpp"
#include "sdde/stats.hpp"
#include "sdde/version.hpp"

namespace {

using nlohmann::ordered_json;

constexpr int kExitSuccess = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCheckFailed = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string command;
    int N = 64;
    int T = 2000;
    int burn_in = 50;
    int thin = 5;
    int batches = 20;
    int replicas = 8;
    double kappa = 0.05;
    double lambda = 64.0;
    std::vector<double> lambda_grid{4.0, 16.0, 64.0, 256.0};
    double eps = 1e-6;  // couple: default phi = eta * (1 + eps)
    std::string eta_spec;
    std::string phi_spec;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string format = "csv";
    bool check = false;
};

std::string default_out_dir() {
    if (const char* env = std::getenv("SDDE_OUT_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return "results";
}

// Which flags were given explicitly (so they override the config file).
struct Presence {
    bool N = false, T = false, burn_in = false, thin = false, batches = false, replicas = false;
    bool kappa = false, lambda = false, lambda_grid = false, eps = false;
    bool eta = false, phi = false, seed = false, out_dir = false, format = false;
};

struct RawOptions {
    ExperimentConfig values;
    Presence given;
    std::string config_path;
    std::vector<double> lambda_values;  // --lambda accepts a comma list for sweep
};

void overlay_config_file(ExperimentConfig& cfg, const std::string& path,
                         const std::string& command) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw UsageError("config file " + path + " is not valid JSON: " + e.what());
    }
    try {
        if (j.contains("command") && j["command"].get<std::string>() != command) {
            throw UsageError("config file names command '" + j["command"].get<std::string>() +
                             "' but the command line says '" + command + "'");
        }
        if (j.contains("N")) cfg.N = j["N"].get<int>();
        if (j.contains("T")) cfg.T = j["T"].get<int>();
        if (j.contains("burn_in")) cfg.burn_in = j["burn_in"].get<int>();
        if (j.contains("thin")) cfg.thin = j["thin"].get<int>();
        if (j.contains("batches")) cfg.batches = j["batches"].get<int>();
        if (j.contains("replicas")) cfg.replicas = j["replicas"].get<int>();
        if (j.contains("kappa")) cfg.kappa = j["kappa"].get<double>();
        if (j.contains("lambda")) cfg.lambda = j["lambda"].get<double>();
        if (j.contains("lambda_grid")) cfg.lambda_grid = j["lambda_grid"].get<std::vector<double>>();
        if (j.contains("eps")) cfg.eps = j["eps"].get<double>();
        if (j.contains("eta")) cfg.eta_spec = j["eta"].get<std::string>();
        if (j.contains("phi")) cfg.phi_spec = j["phi"].get<std::string>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
        if (j.contains("format")) cfg.format = j["format"].get<std::string>();
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        throw UsageError("config file " + path + ": " + e.what());
    }
}

void validate_common(const ExperimentConfig& cfg) {
    if (cfg.N < 2) throw UsageError("--N must be at least 2");
    if (cfg.T < 1) throw UsageError("--T must be positive");
    if (cfg.burn_in < 0) throw UsageError("--burn-in must be nonnegative");
    if (cfg.thin < 1) throw UsageError("--thin must be positive");
    if (cfg.batches < 2) throw UsageError("--batches must be at least 2");
    if (cfg.replicas < 1) throw UsageError("--replicas must be positive");
    if (!(cfg.kappa > 0.0 && cfg.kappa <= 1.0)) throw UsageError("--kappa must lie in (0, 1]");
    if (cfg.lambda < 0.0) throw UsageError("--lambda must be nonnegative");
    if (cfg.format != "csv" && cfg.format != "json") {
        throw UsageError("--format must be csv or json");
    }
}

sdde::Segment resolve_eta(const ExperimentConfig& cfg) {
    if (cfg.eta_spec.empty()) throw UsageError("--eta is required for this command");
    sdde::Segment eta = [&] {
        try {
            return sdde::make_eta(cfg.eta_spec, cfg.N);
        } catch (const sdde::EtaSpecError& e) {
            throw UsageError(e.what());
        }
    }();
    if (sdde::is_zero_segment(eta)) {
        throw UsageError("--eta resolves to the zero segment; a nonzero start is required");
    }
    return eta;
}

// ---------------------------------------------------------------------------
// Output assembly

struct OutputSink {
    std::filesystem::path dir;
    std::string format;  // csv | json
    std::vector<std::string> files_written;

    void write(const std::string& name, const std::string& content) {
        sdde::write_text_atomic(dir / name, content);
        files_written.push_back(name);
    }

    /// Tabular payload: CSV text or a JSON array of row objects, per --format.
    void write_table(const std::string& stem, const std::vector<std::string>& columns,
                     const std::vector<std::vector<std::string>>& rows) {
        if (format == "csv") {
            std::string text = sdde::csv_row(columns);
            for (const auto& row : rows) text += sdde::csv_row(row);
            write(stem + ".csv", text);
        } else {
            ordered_json arr = ordered_json::array();
            for (const auto& row : rows) {
                ordered_json obj;
                for (std::size_t c = 0; c < columns.size(); ++c) {
                    // Values are pre-formatted; keep them as strings so the
                    // two formats stay byte-stable and round-trippable.
                    obj[columns[c]] = c < row.size() ? row[c] : "";
                }
                arr.push_back(obj);
            }
            write(stem + ".json", arr.dump(2) + "\n");
        }
    }
};

std::string fmt(double x) { return sdde::format_double(x); }
std::string fmt(int x) { return std::to_string(x); }
std::string fmt(long x) { return std::to_string(x); }
std::string fmt(bool b) { return b ? "1" : "0"; }
std::string fmt(std::uint64_t x) { return std::to_string(x); }

ordered_json config_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["command"] = cfg.command;
    j["N"] = cfg.N;
    j["T"] = cfg.T;
    j["burn_in"] = cfg.burn_in;
    j["thin"] = cfg.thin;
    j["batches"] = cfg.batches;
    j["replicas"] = cfg.replicas;
    j["kappa"] = cfg.kappa;
    j["lambda"] = cfg.lambda;
    j["lambda_grid"] = cfg.lambda_grid;
    j["eps"] = cfg.eps;
    j["eta"] = cfg.eta_spec;
    j["phi"] = cfg.phi_spec;
    j["seed"] = cfg.seed;
    j["format"] = cfg.format;
    return j;
}

void write_manifest(OutputSink& sink, const ExperimentConfig& cfg, ordered_json streams) {
    ordered_json m;
    m["schema_version"] = sdde::kSchemaVersion;
    m["library"] = {{"name", sdde::kLibraryName}, {"version", sdde::kLibraryVersion}};
    m["config"] = config_json(cfg);
    m["streams"] = std::move(streams);
    m["outputs"] = sink.files_written;
    sdde::write_text_atomic(sink.dir / (cfg.command + "_manifest.json"), m.dump(2) + "\n");
}

struct CheckLog {
    bool enabled = false;
    bool all_passed = true;
    std::vector<std::string> lines;

    void require(bool ok, const std::string& what) {
        if (!enabled) return;
        lines.push_back(std::string(ok ? "pass" : "FAIL") + ": " + what);
        if (!ok) all_passed = false;
    }
};

// ---------------------------------------------------------------------------
// moments

int run_moments(const ExperimentConfig& cfg) {
    OutputSink sink{cfg.out_dir, cfg.format, {}};
    CheckLog check{cfg.check};

    const sdde::MomentCheck headline =
        sdde::run_moment_check(cfg.seed, /*stream_id=*/0, cfg.replicas, cfg.N);
    const sdde::BiasLadder ladder =
        sdde::crn_bias_ladder(cfg.seed, /*stream_id=*/1, cfg.replicas);

    sink.write_table("moments",
                     {"N", "replicas", "mean_x1_sq", "se_x1_sq", "mean_x2_sq", "se_x2_sq",
                      "oracle_x1_sq", "oracle_x2_sq", "scheme_exact_x2_sq"},
                     {{fmt(headline.resolution_N), fmt(headline.replicas), fmt(headline.mean_x1_sq),
                       fmt(headline.se_x1_sq), fmt(headline.mean_x2_sq), fmt(headline.se_x2_sq),
                       fmt(sdde::kMomentOneOracle), fmt(sdde::kMomentTwoOracle),
                       fmt(sdde::discrete_moment_two(headline.resolution_N))}});

    std::vector<std::vector<std::string>> ladder_rows;
    for (std::size_t i = 0; i < ladder.levels.size(); ++i) {
        const auto& lv = ladder.levels[i];
        std::string dm = "", dse = "";
        if (i > 0) {
            dm = fmt(ladder.pairs[i - 1].diff_mean);
            dse = fmt(ladder.pairs[i - 1].diff_se);
        }
        ladder_rows.push_back({fmt(lv.resolution_N), fmt(ladder.replicas), fmt(lv.mean_x2_sq),
                               fmt(lv.se_x2_sq), fmt(lv.mean_x2_sq - sdde::kMomentTwoOracle),
                               fmt(sdde::discrete_moment_two(lv.resolution_N) -
                                   sdde::kMomentTwoOracle),
                               dm, dse});
    }
    sink.write_table("moments_ladder",
                     {"N", "replicas", "mean_x2_sq", "se_x2_sq", "bias_est", "bias_exact",
                      "diff_from_coarser_mean", "diff_se"},
                     ladder_rows);

    check.require(std::abs(headline.mean_x1_sq - sdde::kMomentOneOracle) <=
                      3.0 * headline.se_x1_sq,
                  "E X(1)^2 = 2 within 3 SE");
    check.require(std::abs(headline.mean_x2_sq - sdde::kMomentTwoOracle) <=
                      3.0 * headline.se_x2_sq,
                  "E X(2)^2 = 3.5 within 3 SE");
    // Bias-refinement evidence needs scale; below this replica count the
    // paired differences have no power and the check would only report noise.
    if (cfg.replicas >= 200000) {
        for (const auto& p : ladder.pairs) {
            check.require(p.diff_mean > 3.0 * p.diff_se,
                          "bias shrinks from N=" + std::to_string(p.coarse_N) +
                              " to N=" + std::to_string(p.fine_N) + " (3 SE)");
        }
        for (std::size_t i = 1; i < ladder.levels.size(); ++i) {
            check.require(std::abs(ladder.levels[i].mean_x2_sq - sdde::kMomentTwoOracle) <
                              std::abs(ladder.levels[i - 1].mean_x2_sq - sdde::kMomentTwoOracle),
                          "|bias| strictly decreases at N=" +
                              std::to_string(ladder.levels[i].resolution_N));
        }
    }

    ordered_json summary;
    summary["schema_version"] = sdde::kSchemaVersion;
    summary["headline"] = {{"N", headline.resolution_N},
                           {"replicas", headline.replicas},
                           {"mean_x1_sq", headline.mean_x1_sq},
                           {"se_x1_sq", headline.se_x1_sq},
                           {"mean_x2_sq", headline.mean_x2_sq},
                           {"se_x2_sq", headline.se_x2_sq}};
    summary["checks"] = check.lines;
    sink.write("moments_summary.json", summary.dump(2) + "\n");

    write_manifest(sink, cfg,
                   ordered_json{{{"role", "headline"}, {"stream_id", 0}},
                                {{"role", "bias_ladder"}, {"stream_id", 1}}});
    for (const auto& line : check.lines) std::cout << line << "\n";
    return check.all_passed ? kExitSuccess : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// lyapunov

int run_lyapunov(const ExperimentConfig& cfg) {
    const sdde::Segment eta = resolve_eta(cfg);
    sdde::RunParams params{cfg.T, cfg.N, cfg.burn_in, cfg.batches};
    try {
        sdde::validate(params);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    OutputSink sink{cfg.out_dir, cfg.format, {}};
    CheckLog check{cfg.check};

    std::vector<sdde::RateEstimates> runs;
    runs.reserve(static_cast<std::size_t>(cfg.replicas));
    for (int r = 0; r < cfg.replicas; ++r) {
        runs.push_back(sdde::estimate_rates(eta, params, cfg.seed,
                                            static_cast<std::uint64_t>(r), cfg.eta_spec));
    }

    const std::vector<std::string> columns{"replica",     "method",   "estimate",
                                           "standard_error", "batch_count", "horizon_T",
                                           "resolution_N", "seed",    "initial_condition"};
    std::vector<std::vector<std::string>> rows;
    auto add_row = [&](int replica, const sdde::EstimateReport& rep) {
        rows.push_back({fmt(replica), sdde::to_string(rep.method), fmt(rep.estimate),
                        fmt(rep.standard_error), fmt(rep.batch_count), fmt(rep.horizon_T),
                        fmt(rep.resolution_N), fmt(rep.seed), rep.initial_condition_label});
    };
    for (int r = 0; r < cfg.replicas; ++r) {
        add_row(r, runs[static_cast<std::size_t>(r)].direct_m2);
        add_row(r, runs[static_cast<std::size_t>(r)].direct_sup);
        add_row(r, runs[static_cast<std::size_t>(r)].furstenberg);
    }
    sink.write_table("lyapunov", columns, rows);

    auto pooled = [&](auto pick) {
        double mean = 0.0, var = 0.0;
        for (const auto& run : runs) {
            const sdde::EstimateReport& rep = pick(run);
            mean += rep.estimate;
            var += rep.standard_error * rep.standard_error;
        }
        const double n = static_cast<double>(runs.size());
        return sdde::MeanWithError{mean / n, std::sqrt(var) / n};
    };
    const auto pool_m2 = pooled([](const sdde::RateEstimates& r) { return r.direct_m2; });
    const auto pool_sup = pooled([](const sdde::RateEstimates& r) { return r.direct_sup; });
    const auto pool_fh = pooled([](const sdde::RateEstimates& r) { return r.furstenberg; });

    auto agree = [&](const sdde::MeanWithError& a, const sdde::MeanWithError& b,
                     const std::string& what) {
        const double diff = std::abs(a.mean - b.mean);
        const double se = std::hypot(a.standard_error, b.standard_error);
        check.require(diff <= 3.0 * se, what + " within 3 combined SE");
        ordered_json j;
        j["abs_difference"] = diff;
        j["combined_se"] = se;
        j["within_3se"] = diff <= 3.0 * se;
        return j;
    };

    ordered_json summary;
    summary["schema_version"] = sdde::kSchemaVersion;
    summary["pooled"] = {
        {"direct_m2", {{"estimate", pool_m2.mean}, {"se", pool_m2.standard_error}}},
        {"direct_sup", {{"estimate", pool_sup.mean}, {"se", pool_sup.standard_error}}},
        {"furstenberg", {{"estimate", pool_fh.mean}, {"se", pool_fh.standard_error}}}};
    summary["agreement"] = {{"m2_vs_furstenberg", agree(pool_m2, pool_fh, "direct_m2 vs furstenberg")},
                            {"m2_vs_sup", agree(pool_m2, pool_sup, "direct_m2 vs direct_sup")}};
    bool bound_ok = true;
    for (const auto& run : runs) {
        for (const sdde::EstimateReport* rep :
             {&run.direct_m2, &run.direct_sup, &run.furstenberg}) {
            if (rep->estimate - 3.0 * rep->standard_error > 0.5) bound_ok = false;
        }
    }
    check.require(bound_ok, "every estimate satisfies estimate - 3 SE <= 1/2");
    summary["growth_bound_ok"] = bound_ok;
    summary["checks"] = check.lines;
    sink.write("lyapunov_summary.json", summary.dump(2) + "\n");

    ordered_json streams = ordered_json::array();
    for (int r = 0; r < cfg.replicas; ++r) {
        streams.push_back({{"replica", r}, {"stream_id", r}});
    }
    write_manifest(sink, cfg, streams);
    for (const auto& line : check.lines) std::cout << line << "\n";
    return check.all_passed ? kExitSuccess : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// couple and sweep

sdde::CouplingConfig coupling_config(const ExperimentConfig& cfg, const sdde::Segment& eta,
                                     double lambda, std::uint64_t stream_id) {
    sdde::Segment phi = cfg.phi_spec.empty() ? sdde::scaled(eta, 1.0 + cfg.eps) : [&] {
        try {
            return sdde::make_eta(cfg.phi_spec, cfg.N);
        } catch (const sdde::EtaSpecError& e) {
            throw UsageError(e.what());
        }
    }();
    sdde::CouplingConfig ccfg{lambda, cfg.kappa, cfg.T, cfg.N, cfg.seed, stream_id, eta,
                              std::move(phi)};
    try {
        sdde::validate(ccfg);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return ccfg;
}

void check_ratio_bounds(CheckLog& check, const sdde::ContractionStats& stats, double lambda,
                        double kappa, const std::string& tag) {
    constexpr double tol = 1.25;
    if (lambda > 0.0 && stats.on_count > 0) {
        const double bound = 2.0 * std::sqrt(sdde::r_of_lambda(lambda, kappa)) * tol;
        check.require(stats.conditional_ratio_on_A <= bound,
                      tag + ": conditional ratio on A within 2 sqrt(r) * 1.25");
    }
    if (stats.off_count > 0) {
        check.require(stats.conditional_ratio_off_A <= 2.0 * std::sqrt(2.0) * tol,
                      tag + ": conditional ratio off A within 2 sqrt(2) * 1.25");
    }
}

ordered_json contraction_json(const sdde::ContractionStats& stats) {
    ordered_json j;
    j["slope"] = stats.slope;
    if (stats.on_count > 0) j["conditional_ratio_on_A"] = stats.conditional_ratio_on_A;
    if (stats.off_count > 0) j["conditional_ratio_off_A"] = stats.conditional_ratio_off_A;
    j["on_count"] = stats.on_count;
    j["off_count"] = stats.off_count;
    return j;
}

ordered_json waiting_json(const sdde::CouplingTrace& trace) {
    ordered_json j;
    try {
        const sdde::WaitingTimeStats wt = sdde::waiting_time_stats(trace);
        j["event_count"] = wt.event_count;
        j["fitted_rate"] = wt.fitted_rate;
        j["rate_se"] = wt.rate_se;
        j["tail_prob"] = wt.tail_prob;
    } catch (const std::invalid_argument&) {
        j["event_count"] = 0;
        j["note"] = "fewer than 10 A-events; no tail fit";
    }
    return j;
}

ordered_json girsanov_json(const sdde::GirsanovCost& cost) {
    ordered_json j;
    j["total"] = cost.total;
    j["tail_sum"] = cost.tail_sum;
    j["tail_share"] = cost.total > 0.0 ? cost.tail_sum / cost.total : 0.0;
    j["clamp_steps"] = cost.clamp_steps;
    j["rho_steps"] = cost.rho_steps;
    j["flagged_intervals"] = cost.flagged_intervals;
    return j;
}

int run_couple(const ExperimentConfig& cfg) {
    const sdde::Segment eta = resolve_eta(cfg);
    const sdde::CouplingConfig ccfg = coupling_config(cfg, eta, cfg.lambda, /*stream_id=*/0);

    OutputSink sink{cfg.out_dir, cfg.format, {}};
    CheckLog check{cfg.check};

    const sdde::CouplingTrace trace = sdde::run_coupling(ccfg);

    std::vector<std::vector<std::string>> rows;
    rows.reserve(trace.rows.size());
    bool rho_rule_ok = true;
    for (const auto& row : trace.rows) {
        if (row.a_event != (row.y_in_B && row.z_in_R) || row.rho != row.a_event) {
            rho_rule_ok = false;
        }
        rows.push_back({fmt(row.n), fmt(row.log_z_norm), fmt(std::exp(row.log_z_norm)),
                        fmt(row.y_in_B), fmt(row.z_in_R), fmt(row.a_event), fmt(row.rho),
                        fmt(row.girsanov_increment), fmt(row.clamp_count)});
    }
    sink.write_table("couple_trace",
                     {"n", "log_z_norm", "z_norm", "y_in_B", "z_in_R", "a_event", "rho",
                      "girsanov_increment", "clamp_count"},
                     rows);
    check.require(rho_rule_ok, "rho equals the indicator of A_n at every interval");

    ordered_json summary;
    summary["schema_version"] = sdde::kSchemaVersion;
    summary["lambda"] = trace.lambda;
    summary["kappa"] = trace.kappa;
    summary["final_log_z_norm"] = trace.final_log_z_norm;
    summary["final_log_x_norm"] = trace.final_log_x_norm;
    if (cfg.T >= 100) {
        const sdde::ContractionStats stats = sdde::contraction_stats(trace);
        summary["contraction"] = contraction_json(stats);
        check_ratio_bounds(check, stats, cfg.lambda, cfg.kappa, "couple");
    }
    summary["waiting_time"] = waiting_json(trace);
    const sdde::GirsanovCost cost = sdde::girsanov_cost(trace);
    summary["girsanov"] = girsanov_json(cost);
    if (cfg.lambda > 0.0) {
        check.require(cost.total <= 0.0 || cost.tail_sum <= 0.01 * cost.total,
                      "girsanov tail (last 20% of intervals) contributes at most 1%");
        check.require(cost.rho_steps == 0 ||
                          cost.clamp_steps < 0.001 * static_cast<double>(cost.rho_steps),
                      "clamped quadrature nodes below 0.1% of rho=1 nodes");
    }
    summary["checks"] = check.lines;
    sink.write("couple_summary.json", summary.dump(2) + "\n");

    write_manifest(sink, cfg, ordered_json{{{"role", "coupled_pair"}, {"stream_id", 0}}});
    for (const auto& line : check.lines) std::cout << line << "\n";
    return check.all_passed ? kExitSuccess : kExitCheckFailed;
}

int run_sweep(const ExperimentConfig& cfg) {
    if (cfg.lambda_grid.empty()) throw UsageError("--lambda-grid must be nonempty for sweep");
    for (double lam : cfg.lambda_grid) {
        if (lam < 0.0) throw UsageError("--lambda-grid entries must be nonnegative");
    }
    const sdde::Segment eta = resolve_eta(cfg);

    OutputSink sink{cfg.out_dir, cfg.format, {}};
    CheckLog check{cfg.check};

    std::vector<std::vector<std::string>> rows;
    std::vector<double> slopes;
    // Waiting-time fits per cell (NaN when a cell has too few A-events to fit).
    std::vector<double> rates(cfg.lambda_grid.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<double> rate_ses(cfg.lambda_grid.size(), std::numeric_limits<double>::quiet_NaN());
    ordered_json cells = ordered_json::array();
    for (std::size_t i = 0; i < cfg.lambda_grid.size(); ++i) {
        const double lam = cfg.lambda_grid[i];
        // Common noise across lambda cells: same stream, so the slope trend
        // along the grid is a paired comparison.
        const sdde::CouplingConfig ccfg = coupling_config(cfg, eta, lam, /*stream_id=*/0);
        const sdde::CouplingTrace trace = sdde::run_coupling(ccfg);
        const sdde::ContractionStats stats = sdde::contraction_stats(trace);
        const sdde::GirsanovCost cost = sdde::girsanov_cost(trace);
        long a_events = 0;
        for (const auto& row : trace.rows) {
            if (row.a_event) ++a_events;
        }
        slopes.push_back(stats.slope);
        const ordered_json wt = waiting_json(trace);
        if (wt.contains("fitted_rate")) {
            rates[i] = wt["fitted_rate"].get<double>();
            rate_ses[i] = wt["rate_se"].get<double>();
        }
        rows.push_back(
            {fmt(lam), fmt(stats.slope),
             stats.on_count > 0 ? fmt(stats.conditional_ratio_on_A) : "",
             stats.off_count > 0 ? fmt(stats.conditional_ratio_off_A) : "", fmt(stats.on_count),
             fmt(stats.off_count),
             fmt(static_cast<double>(a_events) / static_cast<double>(trace.rows.size())),
             std::isnan(rates[i]) ? "" : fmt(rates[i]),
             std::isnan(rate_ses[i]) ? "" : fmt(rate_ses[i]), fmt(cost.total),
             fmt(cost.total > 0.0 ? cost.tail_sum / cost.total : 0.0), fmt(cost.clamp_steps)});
        ordered_json cell;
        cell["lambda"] = lam;
        cell["contraction"] = contraction_json(stats);
        cell["waiting_time"] = wt;
        cell["girsanov"] = girsanov_json(cost);
        cells.push_back(cell);
        check_ratio_bounds(check, stats, lam, cfg.kappa, "lambda=" + fmt(lam));
    }
    sink.write_table("sweep",
                     {"lambda", "slope", "ratio_on_A", "ratio_off_A", "on_count", "off_count",
                      "a_fraction", "fitted_rate", "rate_se", "girsanov_total",
                      "girsanov_tail_share", "clamp_steps"},
                     rows);

    bool monotone = true;
    for (std::size_t i = 1; i < slopes.size(); ++i) {
        if (!(slopes[i] < slopes[i - 1])) monotone = false;
    }
    check.require(monotone, "slope strictly decreases along the lambda grid");
    for (std::size_t i = 0; i < cfg.lambda_grid.size(); ++i) {
        if (cfg.lambda_grid[i] >= 64.0) {
            check.require(slopes[i] < 0.0,
                          "slope negative at lambda=" + fmt(cfg.lambda_grid[i]));
        }
    }
    if (cfg.lambda_grid.size() >= 2) {
        // The A-event frequency should not depend on the damping strength: compare
        // the fitted waiting-time rates of the weakest and strongest damping cells.
        std::size_t lo = 0;
        std::size_t hi = 0;
        for (std::size_t i = 1; i < cfg.lambda_grid.size(); ++i) {
            if (cfg.lambda_grid[i] < cfg.lambda_grid[lo]) lo = i;
            if (cfg.lambda_grid[i] > cfg.lambda_grid[hi]) hi = i;
        }
        const bool fits_available = !std::isnan(rates[lo]) && !std::isnan(rates[hi]);
        check.require(fits_available, "waiting-time rate fitted at the extreme lambda cells");
        if (fits_available) {
            const bool overlap = std::abs(rates[lo] - rates[hi]) <=
                                 1.96 * (rate_ses[lo] + rate_ses[hi]);
            check.require(overlap, "waiting-time rate agrees between lambda=" +
                                       fmt(cfg.lambda_grid[lo]) + " and lambda=" +
                                       fmt(cfg.lambda_grid[hi]) + " (CI overlap)");
        }
    }

    ordered_json summary;
    summary["schema_version"] = sdde::kSchemaVersion;
    summary["cells"] = cells;
    summary["slopes_strictly_decreasing"] = monotone;
    summary["checks"] = check.lines;
    sink.write("sweep_summary.json", summary.dump(2) + "\n");

    ordered_json streams = ordered_json::array();
    for (double lam : cfg.lambda_grid) {
        streams.push_back({{"lambda", lam}, {"stream_id", 0}});
    }
    write_manifest(sink, cfg, streams);
    for (const auto& line : check.lines) std::cout << line << "\n";
    return check.all_passed ? kExitSuccess : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// measure

int run_measure(const ExperimentConfig& cfg) {
    const sdde::Segment eta = resolve_eta(cfg);
    if (cfg.T <= cfg.burn_in) throw UsageError("measure needs T > burn-in");

    OutputSink sink{cfg.out_dir, cfg.format, {}};
    CheckLog check{cfg.check};

    const auto set_a = sdde::sample_sphere_path(eta, cfg.T, cfg.N, cfg.burn_in, cfg.thin,
                                                cfg.seed, /*stream_id=*/0, cfg.eta_spec);
    std::optional<sdde::SphereSampleSet> set_b;
    if (!cfg.phi_spec.empty()) {
        const sdde::Segment phi = [&] {
            try {
                return sdde::make_eta(cfg.phi_spec, cfg.N);
            } catch (const sdde::EtaSpecError& e) {
                throw UsageError(e.what());
            }
        }();
        if (sdde::is_zero_segment(phi)) {
            throw UsageError("--phi resolves to the zero segment; a nonzero start is required");
        }
        // Independent stream: uniqueness evidence needs independent noise,
        // otherwise the two sphere paths couple and the distance collapses.
        set_b = sdde::sample_sphere_path(phi, cfg.T, cfg.N, cfg.burn_in, cfg.thin, cfg.seed,
                                         /*stream_id=*/1, cfg.phi_spec);
    }

    auto snapshot_rows = [&](const sdde::SphereSampleSet& set) {
        std::vector<std::vector<std::string>> rows;
        rows.reserve(set.samples.size());
        for (std::size_t i = 0; i < set.samples.size(); ++i) {
            const auto& s = set.samples[i];
            std::vector<std::string> row{fmt(set.burn_in + static_cast<int>(i) * set.thin)};
            for (double c : set.coords) row.push_back(fmt(s.segment().at_coord(c)));
            row.push_back(fmt(sdde::functional_psi(s)));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    std::vector<std::string> columns{"t"};
    for (double c : set_a.coords) columns.push_back("s_at_" + fmt(c));
    columns.push_back("psi");
    sink.write_table("measure_samples_a", columns, snapshot_rows(set_a));
    if (set_b) sink.write_table("measure_samples_b", columns, snapshot_rows(*set_b));

    // Unit-norm invariant at every snapshot.
    double worst_norm_dev = 0.0;
    auto scan_norms = [&](const sdde::SphereSampleSet& set) {
        for (const auto& s : set.samples) {
            worst_norm_dev =
                std::max(worst_norm_dev, std::abs(sdde::m2_norm(s.segment()) - 1.0));
        }
    };
    scan_norms(set_a);
    if (set_b) scan_norms(*set_b);
    check.require(worst_norm_dev <= 1e-9, "snapshots unit-normed within 1e-9");

    const std::vector<double> deltas{1.0, 0.5, 0.25, 0.125};
    const std::vector<double> epsilons{0.25, 0.5, 1.0};
    const sdde::TightnessReport tight = sdde::tightness_report(set_a, deltas, epsilons);
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
        bool nonincreasing = true;
        for (std::size_t d = 1; d < deltas.size(); ++d) {
            if (tight.exceedance[d][e] > tight.exceedance[d - 1][e]) nonincreasing = false;
        }
        check.require(nonincreasing, "exceedance nonincreasing as delta shrinks at eps=" +
                                         fmt(epsilons[e]));
    }

    ordered_json summary;
    summary["schema_version"] = sdde::kSchemaVersion;
    summary["lambda_from_measure"] = sdde::lambda_from_measure(set_a);
    summary["sample_count_a"] = set_a.samples.size();
    ordered_json tj;
    tj["deltas"] = tight.deltas;
    tj["epsilons"] = tight.epsilons;
    tj["exceedance"] = tight.exceedance;
    summary["tightness"] = tj;

    if (set_b) {
        ordered_json dist;
        for (double c : set_a.coords) {
            const double d = sdde::marginal_distance(set_a, *set_b, c);
            dist["ks_at_" + fmt(c)] = d;
        }
        const auto marg_a = sdde::marginal_values(set_a, 0.0);
        const auto marg_b = sdde::marginal_values(*set_b, 0.0);
        const double ess_a = sdde::effective_sample_size(marg_a);
        const double ess_b = sdde::effective_sample_size(marg_b);
        const double crit = sdde::ks_critical_value(ess_a, ess_b, 0.01);
        const double d0 = sdde::marginal_distance(set_a, *set_b, 0.0);
        dist["ess_a"] = ess_a;
        dist["ess_b"] = ess_b;
        dist["ks_critical_1pct"] = crit;
        dist["energy_distance_head_tail"] = sdde::head_tail_energy_distance(set_a, *set_b);
        summary["distance"] = dist;
        summary["sample_count_b"] = set_b->samples.size();
        check.require(d0 < crit,
                      "KS at coord 0 below the 1% critical value (ESS-corrected)");
    }
    summary["checks"] = check.lines;
    sink.write("measure_summary.json", summary.dump(2) + "\n");

    ordered_json streams = ordered_json::array();
    streams.push_back({{"set", "a"}, {"stream_id", 0}});
    if (set_b) streams.push_back({{"set", "b"}, {"stream_id", 1}});
    write_manifest(sink, cfg, streams);
    for (const auto& line : check.lines) std::cout << line << "\n";
    return check.all_passed ? kExitSuccess : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"delay-equation simulation experiments"};
    app.require_subcommand(1);

    RawOptions raw;
    auto add_common = [&](CLI::App* sub, bool needs_eta) {
        sub->add_option("--config", raw.config_path, "JSON config file (flags override it)");
        auto* oN = sub->add_option("--N", raw.values.N, "grid steps per unit interval");
        auto* oT = sub->add_option("--T", raw.values.T, "horizon in unit intervals");
        auto* oB = sub->add_option("--burn-in", raw.values.burn_in, "intervals discarded");
        auto* oTh = sub->add_option("--thin", raw.values.thin, "snapshot thinning (measure)");
        auto* oBa = sub->add_option("--batches", raw.values.batches, "batch-means blocks");
        auto* oR = sub->add_option("--replicas", raw.values.replicas, "independent replicas");
        auto* oK = sub->add_option("--kappa", raw.values.kappa, "head-dominance threshold");
        // couple takes one value; sweep accepts a comma list as the grid.
        auto* oL = sub->add_option("--lambda", raw.lambda_values,
                                   "coupling drift strength (sweep: comma-separated grid)")
                       ->delimiter(',');
        auto* oG = sub->add_option("--lambda-grid", raw.values.lambda_grid,
                                   "lambda values for sweep")
                       ->delimiter(',')
                       ->excludes(oL);
        auto* oE = sub->add_option("--eps", raw.values.eps, "default phi = eta*(1+eps)");
        CLI::Option* oEta = nullptr;
        if (needs_eta) {
            oEta = sub->add_option("--eta", raw.values.eta_spec,
                                   "initial condition (const:c | linear | cos:k | saw | file:path)");
        }
        auto* oPhi = sub->add_option("--phi", raw.values.phi_spec,
                                     "second initial condition (couple/measure)");
        auto* oS = sub->add_option("--seed", raw.values.seed, "master seed");
        auto* oO = sub->add_option("--out-dir", raw.values.out_dir, "output directory");
        auto* oF = sub->add_option("--format", raw.values.format, "csv | json");
        sub->add_flag("--check", raw.values.check, "validate acceptance thresholds (exit 3 on violation)");
        sub->callback([=, &raw] {
            raw.given.N = oN->count() > 0;
            raw.given.T = oT->count() > 0;
            raw.given.burn_in = oB->count() > 0;
            raw.given.thin = oTh->count() > 0;
            raw.given.batches = oBa->count() > 0;
            raw.given.replicas = oR->count() > 0;
            raw.given.kappa = oK->count() > 0;
            raw.given.lambda = oL->count() > 0;
            raw.given.lambda_grid = oG->count() > 0;
            raw.given.eps = oE->count() > 0;
            raw.given.eta = oEta != nullptr && oEta->count() > 0;
            raw.given.phi = oPhi->count() > 0;
            raw.given.seed = oS->count() > 0;
            raw.given.out_dir = oO->count() > 0;
            raw.given.format = oF->count() > 0;
        });
    };

    add_common(app.add_subcommand("moments", "second-moment oracle validation"), false);
    add_common(app.add_subcommand("lyapunov", "growth-rate estimation"), true);
    add_common(app.add_subcommand("couple", "single coupled run"), true);
    add_common(app.add_subcommand("sweep", "coupling sweep over a lambda grid"), true);
    add_common(app.add_subcommand("measure", "sphere-process snapshots and distances"), true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        const std::string command = app.get_subcommands().front()->get_name();

        // Resolution order: per-command defaults, then config file, then flags.
        ExperimentConfig cfg;
        cfg.command = command;
        if (command == "measure") cfg.burn_in = 200;  // distributional convergence is slower
        cfg.out_dir = default_out_dir();
        if (!raw.config_path.empty()) overlay_config_file(cfg, raw.config_path, command);

        const ExperimentConfig& flags = raw.values;
        const Presence& given = raw.given;
        if (given.N) cfg.N = flags.N;
        if (given.T) cfg.T = flags.T;
        if (given.burn_in) cfg.burn_in = flags.burn_in;
        if (given.thin) cfg.thin = flags.thin;
        if (given.batches) cfg.batches = flags.batches;
        if (given.replicas) cfg.replicas = flags.replicas;
        if (given.kappa) cfg.kappa = flags.kappa;
        if (given.lambda) {
            if (command == "sweep") {
                cfg.lambda_grid = raw.lambda_values;
            } else if (raw.lambda_values.size() == 1) {
                cfg.lambda = raw.lambda_values.front();
            } else {
                throw UsageError("--lambda takes exactly one value here (lists are for sweep)");
            }
        }
        if (given.lambda_grid) cfg.lambda_grid = flags.lambda_grid;
        if (given.eps) cfg.eps = flags.eps;
        if (given.eta) cfg.eta_spec = flags.eta_spec;
        if (given.phi) cfg.phi_spec = flags.phi_spec;
        if (given.seed) cfg.seed = flags.seed;
        if (given.out_dir) cfg.out_dir = flags.out_dir;
        if (given.format) cfg.format = flags.format;
        cfg.check = flags.check;

        validate_common(cfg);

        if (command == "moments") return run_moments(cfg);
        if (command == "lyapunov") return run_lyapunov(cfg);
        if (command == "couple") return run_couple(cfg);
        if (command == "sweep") return run_sweep(cfg);
        if (command == "measure") return run_measure(cfg);
        throw UsageError("unknown command: " + command);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
