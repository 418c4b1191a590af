#pragma once

// Initial-condition descriptors. Experiments name their starting segment with
// a small textual spec — "const:1", "linear", "cos:2", "saw", "file:path" —
// so configs stay serializable and runs reproducible from the manifest alone.

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "segment.hpp"

namespace sdde {

struct EtaSpecError : std::invalid_argument {
    explicit EtaSpecError(const std::string& what) : std::invalid_argument(what) {}
};

/// Materialize an initial-condition spec at the given grid resolution.
///   const:c   constant segment ≡ c
///   linear    s ↦ s (vanishes at the head)
///   cos:k     s ↦ cos(kπs)
///   saw       sign-changing triangle wave of period 1/2 and amplitude 1
///   file:path one grid value per line; must hold exactly N+1 values
[[nodiscard]] inline Segment make_eta(const std::string& spec, int resolution) {
    if (resolution < 2) throw EtaSpecError("eta spec: resolution must be at least 2");
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);

    auto parse_real = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw EtaSpecError("eta spec '" + spec + "': expected a number after ':'");
        }
        if (used != s.size()) {
            throw EtaSpecError("eta spec '" + spec + "': trailing characters after the number");
        }
        return v;
    };

    if (kind == "const") {
        if (arg.empty()) throw EtaSpecError("eta spec 'const' needs a value, e.g. const:1");
        return Segment::constant(parse_real(arg), resolution);
    }
    if (kind == "linear") {
        if (!arg.empty()) throw EtaSpecError("eta spec 'linear' takes no argument");
        return Segment::sample([](double s) { return s; }, resolution);
    }
    if (kind == "cos") {
        if (arg.empty()) throw EtaSpecError("eta spec 'cos' needs a frequency, e.g. cos:2");
        const double k = parse_real(arg);
        return Segment::sample([k](double s) { return std::cos(k * std::numbers::pi * s); },
                               resolution);
    }
    if (kind == "saw") {
        if (!arg.empty()) throw EtaSpecError("eta spec 'saw' takes no argument");
        return Segment::sample(
            [](double s) {
                return 2.0 / std::numbers::pi * std::asin(std::sin(4.0 * std::numbers::pi * s));
            },
            resolution);
    }
    if (kind == "file") {
        if (arg.empty()) throw EtaSpecError("eta spec 'file' needs a path, e.g. file:eta.txt");
        std::ifstream in(arg);
        if (!in) throw EtaSpecError("eta spec: cannot open '" + arg + "'");
        std::vector<double> values;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            values.push_back(parse_real(line));
        }
        if (values.size() != static_cast<std::size_t>(resolution) + 1) {
            std::ostringstream msg;
            msg << "eta spec: '" << arg << "' holds " << values.size() << " values but resolution "
                << resolution << " needs exactly " << resolution + 1;
            throw EtaSpecError(msg.str());
        }
        return Segment(std::move(values));
    }
    throw EtaSpecError("unknown eta spec '" + spec + "' (expected const:c, linear, cos:k, saw, file:path)");
}

/// True if the spec names an identically-zero segment (rejected by callers
/// that need a nonzero start).
[[nodiscard]] inline bool is_zero_segment(const Segment& seg) noexcept {
    return sup_norm(seg) == 0.0;
}

}  // namespace sdde
