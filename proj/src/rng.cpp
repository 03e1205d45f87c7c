#include "replay/rng.hpp"

#include <cmath>
#include <numbers>

namespace replay {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo)
{
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

PhiloxCounter philox4x32(PhiloxCounter c, PhiloxKey k)
{
    for (int round = 0; round < 10; ++round)
    {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, c[0], hi0, lo0);
        mulhilo(kPhiloxM1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kPhiloxW0;
        k[1] += kPhiloxW1;
    }
    return c;
}

std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> path)
{
    std::uint64_t s = mix64(master);
    for (std::uint64_t p : path)
    {
        s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ull));
    }
    return s;
}

RandomStream::RandomStream(std::uint64_t key, std::uint64_t stream)
    : key_(key), stream_(stream)
{
}

RandomStream RandomStream::split(std::uint64_t id) const
{
    return RandomStream(key_, derive_seed(stream_, {id}));
}

std::array<std::uint64_t, 2> RandomStream::next_block()
{
    PhiloxCounter ctr = {static_cast<std::uint32_t>(position_),
                         static_cast<std::uint32_t>(position_ >> 32),
                         static_cast<std::uint32_t>(stream_),
                         static_cast<std::uint32_t>(stream_ >> 32)};
    PhiloxKey key = {static_cast<std::uint32_t>(key_),
                     static_cast<std::uint32_t>(key_ >> 32)};
    ++position_;
    PhiloxCounter out = philox4x32(ctr, key);
    return {(static_cast<std::uint64_t>(out[1]) << 32) | out[0],
            (static_cast<std::uint64_t>(out[3]) << 32) | out[2]};
}

RandomStream::result_type RandomStream::operator()()
{
    if (has_buffered_)
    {
        has_buffered_ = false;
        return buffered_;
    }
    auto block = next_block();
    buffered_ = block[1];
    has_buffered_ = true;
    return block[0];
}

double RandomStream::uniform()
{
    return bits_to_unit((*this)());
}

std::uint64_t RandomStream::below(std::uint64_t n)
{
    return bits_below((*this)(), n);
}

double RandomStream::normal()
{
    auto block = next_block();
    // u1 in (0, 1] keeps the logarithm finite.
    double u1 = (static_cast<double>(block[0] >> 11) + 1.0) * 0x1.0p-53;
    double u2 = bits_to_unit(block[1]);
    return std::sqrt(-2.0 * std::log(u1))
           * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace replay
