#include <doctest.h>

#include <cmath>
#include <set>
#include <thread>
#include <vector>

#include "replay/parallel.hpp"
#include "replay/rng.hpp"

using namespace replay;

TEST_CASE("philox4x32-10 known answers")
{
    // Reference vectors from the Random123 distribution (kat_vectors).
    auto zero = philox4x32({0, 0, 0, 0}, {0, 0});
    CHECK(zero == PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});

    auto ones = philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                           {0xffffffff, 0xffffffff});
    CHECK(ones == PhiloxCounter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});

    auto pi = philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                         {0xa4093822, 0x299f31d0});
    CHECK(pi == PhiloxCounter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and positioned")
{
    RandomStream a(42), b(42);
    for (int i = 0; i < 100; ++i)
        CHECK(a() == b());
    CHECK(a.position() == b.position());

    RandomStream c(43);
    RandomStream d(42);
    int same = 0;
    for (int i = 0; i < 100; ++i)
        same += c() == d();
    CHECK(same == 0);
}

TEST_CASE("split streams are independent of the parent position")
{
    RandomStream root(7);
    RandomStream child1 = root.split(3);
    root.next_block();
    root.next_block();
    RandomStream child2 = root.split(3);
    for (int i = 0; i < 10; ++i)
        CHECK(child1() == child2());

    std::set<std::uint64_t> firsts;
    for (std::uint64_t id = 0; id < 1000; ++id)
        firsts.insert(root.split(id).next_block()[0]);
    CHECK(firsts.size() == 1000);
}

TEST_CASE("derive_seed depends on path order")
{
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    CHECK(derive_seed(1, {}) != derive_seed(2, {}));
    CHECK(derive_seed(1, {0}) != derive_seed(1, {}));
}

TEST_CASE("uniform, below and normal have the right moments")
{
    RandomStream rng(2024);
    const int n = 200000;
    double su = 0, su2 = 0, sn = 0, sn2 = 0;
    int hits[5] = {0, 0, 0, 0, 0};
    for (int i = 0; i < n; ++i)
    {
        double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        su += u;
        su2 += u * u;
        double z = rng.normal();
        sn += z;
        sn2 += z * z;
        auto b = rng.below(5);
        REQUIRE(b < 5);
        ++hits[b];
    }
    // 3σ bands for the sample means.
    CHECK(std::abs(su / n - 0.5) < 3 * std::sqrt(1.0 / 12 / n));
    CHECK(std::abs(su2 / n - 1.0 / 3) < 3 * std::sqrt(4.0 / 45 / n));
    CHECK(std::abs(sn / n) < 3 / std::sqrt(double(n)));
    CHECK(std::abs(sn2 / n - 1.0) < 3 * std::sqrt(2.0 / n));
    for (int h : hits)
        CHECK(std::abs(h / double(n) - 0.2) < 3 * std::sqrt(0.2 * 0.8 / n));
}

TEST_CASE("normal consumes exactly one block")
{
    RandomStream a(5);
    a.normal();
    CHECK(a.position() == 1);
    a.normal();
    CHECK(a.position() == 2);
}

TEST_CASE("bits helpers")
{
    CHECK(bits_to_unit(0) == 0.0);
    CHECK(bits_to_unit(~0ull) < 1.0);
    CHECK(bits_below(~0ull, 10) == 9);
    CHECK(bits_below(0, 10) == 0);
}

TEST_CASE("parallel_for fills every slot and rethrows")
{
    std::vector<int> out(1000, 0);
    parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i) * 2; });
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out[i] == static_cast<int>(i) * 2);

    CHECK_THROWS_AS(parallel_for(10, 3,
                                 [](std::size_t i) {
                                     if (i == 7)
                                         throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
}
