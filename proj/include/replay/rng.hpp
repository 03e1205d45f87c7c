#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace replay {

//---------------------------------------------------------------------------//
/*!
 * Philox4x32-10 block function (Salmon et al., SC'11).
 *
 * Maps a 128-bit counter and a 64-bit key to 128 pseudo-random bits. The
 * function is stateless, so any position of any stream can be generated
 * independently of all others.
 */
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key);

// SplitMix64 finalizer; used to derive keys and stream ids.
std::uint64_t mix64(std::uint64_t x);

// Fold a path of integers into a seed: derive_seed(s, {a, b}) differs from
// derive_seed(s, {b, a}).
std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> path);

//---------------------------------------------------------------------------//
/*!
 * A counter-based random stream.
 *
 * The stream is identified by (key, stream id); consecutive draws advance a
 * 64-bit position counter. split() yields a child stream with an independent
 * id, so work item j of a parallel loop can own stream split(j) and produce
 * the same numbers regardless of scheduling.
 *
 * Satisfies UniformRandomBitGenerator, but the sampling helpers below are
 * preferred over <random> distributions because their output is fixed
 * across standard library implementations.
 */
class RandomStream
{
  public:
    using result_type = std::uint64_t;

    explicit RandomStream(std::uint64_t key, std::uint64_t stream = 0);

    RandomStream split(std::uint64_t id) const;

    // One Philox call: 128 fresh bits. Never mixes with buffered output.
    std::array<std::uint64_t, 2> next_block();

    result_type operator()();

    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    // Uniform integer on [0, n). Requires n > 0.
    std::uint64_t below(std::uint64_t n);
    // Standard normal; consumes exactly one block.
    double normal();

    std::uint64_t key() const { return key_; }
    std::uint64_t stream_id() const { return stream_; }
    std::uint64_t position() const { return position_; }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max()
    {
        return std::numeric_limits<result_type>::max();
    }

  private:
    std::uint64_t key_;
    std::uint64_t stream_;
    std::uint64_t position_ = 0;
    std::uint64_t buffered_ = 0;
    bool has_buffered_ = false;
};

// Conversions from raw bits, shared by the sampling code.
inline double bits_to_unit(std::uint64_t x)
{
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Multiply-shift range reduction; bias is at most n / 2^64.
inline std::uint64_t bits_below(std::uint64_t x, std::uint64_t n)
{
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(x) * n) >> 64);
}

}  // namespace replay
