#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

#include "normlab/errors.hpp"

namespace normlab {

/// Identifies one reproducible sequence of draws.
///
/// A draw sequence is a pure function of (seed, stream): the seed keys a
/// Philox4x32-10 block cipher and the stream occupies the upper 64 bits of
/// its 128-bit counter. Callers that run in parallel give each worker its own
/// stream, typically through derive_stream().
struct RngState {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    friend bool operator==(const RngState&, const RngState&) = default;
};

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Philox4x32 with 10 rounds (Salmon et al., SC'11).
inline constexpr std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                            std::array<std::uint32_t, 2> key)
{
    constexpr std::uint64_t kMul0 = 0xD2511F53u;
    constexpr std::uint64_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = kMul0 * ctr[0];
        const std::uint64_t p1 = kMul1 * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

} // namespace detail

/// Stable 64-bit hash of a label (FNV-1a), used to name sub-streams.
inline constexpr std::uint64_t stream_label(std::string_view label)
{
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

/// Child stream identifier for item `index` under `parent`.
inline constexpr std::uint64_t derive_stream(std::uint64_t parent, std::uint64_t index)
{
    return detail::splitmix64(detail::splitmix64(parent) ^ detail::splitmix64(index + 0x632BE59BD9B4E019ull));
}

inline constexpr RngState derive(RngState state, std::uint64_t index)
{
    return {state.seed, derive_stream(state.stream, index)};
}

inline constexpr RngState derive(RngState state, std::string_view label, std::uint64_t index = 0)
{
    return {state.seed, derive_stream(derive_stream(state.stream, stream_label(label)), index)};
}

/// Sequential sampler over one (seed, stream) pair.
///
/// Uniforms take 53 bits from two consecutive 32-bit words. Normals use the
/// Marsaglia polar method and return both members of each accepted pair in
/// order, so the sequence of normals is fixed by the sequence of words.
class Generator {
public:
    explicit Generator(RngState state)
        : key_{static_cast<std::uint32_t>(state.seed), static_cast<std::uint32_t>(state.seed >> 32)}
        , stream_(state.stream)
    {
    }

    std::uint32_t next_u32()
    {
        if (cursor_ == block_.size()) {
            refill();
        }
        return block_[cursor_++];
    }

    std::uint64_t next_u64()
    {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1p-53; }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        double v = 0.0;
        double s = 0.0;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double scale = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * scale;
        has_spare_ = true;
        return u * scale;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer on the closed range [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi)
    {
        detail::require(lo <= hi, "uniform_int: empty range");
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) {
            return static_cast<std::int64_t>(next_u64());
        }
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t x = 0;
        do {
            x = next_u64();
        } while (x >= limit);
        return lo + static_cast<std::int64_t>(x % span);
    }

private:
    void refill()
    {
        block_ = detail::philox4x32_10({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                                        static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                                       key_);
        ++counter_;
        cursor_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    std::size_t cursor_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace normlab
