#pragma once

// Deterministic random streams. Every consumer derives its stream from
// (master seed, stream id), so replicas and commands are reproducible
// bit-for-bit and independent streams never share state.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace sdde {

/// SplitMix64 step; used only to expand seeds into xoshiro state.
inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// xoshiro256++ with an explicit (seed, stream) identity and a draw counter.
/// The counter lets manifests record how much randomness each stage consumed
/// and lets tests assert two runs stayed in lockstep.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id) noexcept
        : master_seed_(master_seed), stream_id_(stream_id) {
        // Mix the id in twice, at both ends of the expansion, so low ids and
        // low seeds still produce well-separated states.
        std::uint64_t s = master_seed ^ (0xD1B54A32D192ED03ULL * (stream_id + 1));
        for (auto& word : state_) word = splitmix64(s);
        std::uint64_t t = stream_id;
        state_[3] ^= splitmix64(t);
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    [[nodiscard]] std::uint64_t master_seed() const noexcept { return master_seed_; }
    [[nodiscard]] std::uint64_t stream_id() const noexcept { return stream_id_; }
    /// Number of raw 64-bit words drawn so far.
    [[nodiscard]] std::uint64_t position() const noexcept { return position_; }

    std::uint64_t next_u64() noexcept {
        ++position_;
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on (0, 1]; never returns 0, so it is safe under log().
    double next_uniform() noexcept {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller. Pairs are drawn eagerly and the spare
    /// cached, so draw parity stays deterministic.
    double next_gaussian() noexcept {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    void fill_gaussian(std::span<double> out) noexcept {
        for (double& x : out) x = next_gaussian();
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
    std::uint64_t master_seed_ = 0;
    std::uint64_t stream_id_ = 0;
    std::uint64_t position_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace sdde
