// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>

namespace mvsde::rng {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Stateless:
/// the output is a pure function of (key, counter), so any increment can be
/// regenerated independently of the order in which others were drawn.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit constexpr Philox4x32(std::uint64_t seed) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    [[nodiscard]] constexpr Counter operator()(Counter ctr) const noexcept {
        Key key = key_;
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, key);
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static constexpr Counter single_round(const Counter& c, const Key& k) noexcept {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
                static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    }

    Key key_;
};

/// Uniform on (0, 1] from 64 random bits, 53-bit resolution.
[[nodiscard]] inline double to_unit_open_closed(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

/// Standard normal draw keyed by a 4-word counter (Box-Muller, cosine branch).
[[nodiscard]] inline double standard_normal(const Philox4x32& gen, Philox4x32::Counter ctr) noexcept {
    const auto words = gen(ctr);
    const double u1 = to_unit_open_closed(words[0], words[1]);
    const double u2 = to_unit_open_closed(words[2], words[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Uniform on (0, 1] keyed by a 4-word counter.
[[nodiscard]] inline double uniform(const Philox4x32& gen, Philox4x32::Counter ctr) noexcept {
    const auto words = gen(ctr);
    return to_unit_open_closed(words[0], words[1]);
}

/// Sequential draws over a counter-based generator: draw k uses counter
/// (k_lo, k_hi, tag, 0xFFFFFFFF). The last word keeps these counters apart
/// from the per-increment keys used for noise bundles.
class Stream {
public:
    explicit Stream(std::uint64_t seed, std::uint32_t tag = 0) noexcept : gen_(seed), tag_(tag) {}

    double uniform() noexcept { return rng::uniform(gen_, next_counter()); }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    double normal() noexcept { return standard_normal(gen_, next_counter()); }
    /// Uniform integer in [0, n), n > 0.
    std::size_t below(std::size_t n) noexcept {
        const auto bound = static_cast<double>(n);
        const auto k = static_cast<std::size_t>((1.0 - uniform()) * bound);
        return k < n ? k : n - 1;
    }

private:
    Philox4x32::Counter next_counter() noexcept {
        const std::uint64_t k = index_++;
        return {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32), tag_, 0xFFFFFFFFu};
    }

    Philox4x32 gen_;
    std::uint32_t tag_;
    std::uint64_t index_ = 0;
};

}  // namespace mvsde::rng
