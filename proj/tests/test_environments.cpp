#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "replay/environments.hpp"

using namespace replay;
using std::numbers::pi;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& body)
{
    auto p = std::filesystem::temp_directory_path() / ("replay_env_" + name);
    std::ofstream out(p);
    out << body;
    return p;
}

}  // namespace

TEST_CASE("OU transition parameters")
{
    auto z = ou_transition_params(OuSpec{}, 0.0);
    CHECK(z.mean == 0.0);
    CHECK(z.variance == doctest::Approx(std::expm1(0.01) / 0.1).epsilon(1e-14));

    auto one = ou_transition_params(OuSpec{}, 1.0);
    CHECK(one.mean == doctest::Approx(1.00501252085940).epsilon(1e-13));
    CHECK(one.variance == doctest::Approx(0.100501670841679).epsilon(1e-13));

    OuSpec tiny{1e-8, 1.0, 0.1};
    CHECK(ou_transition_params(tiny, 0.5).variance == doctest::Approx(0.1).epsilon(1e-6));
    OuSpec zero{0.0, 2.0, 0.1};
    CHECK(ou_transition_params(zero, 0.5).variance == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(ou_transition_params(zero, 0.5).mean == 0.5);

    // The MDP and OU parameterizations agree at Δt = 0.1.
    const double lambda = 0.05;
    auto p = ou_transition_params(OuSpec{lambda, 1.0, 0.1}, 1.3);
    CHECK(p.mean == doctest::Approx(1.3 * std::exp(lambda / 10)).epsilon(1e-15));
    CHECK(p.variance == doctest::Approx(std::expm1(lambda / 5) / (2 * lambda)).epsilon(1e-14));
}

TEST_CASE("truncated normal stays in support")
{
    RandomStream rng(3);
    InitSpec wide{0.0, 3.0, -pi, pi};
    for (int i = 0; i < 20000; ++i)
    {
        double s = sample_truncated_normal(wide, rng);
        CHECK(s >= -pi);
        CHECK(s <= pi);
    }
}

TEST_CASE("trajectory sampler")
{
    auto ts = sample_trajectories(OuSpec{0.0, 0.0, 0.1}, InitSpec{}, 20, 3, 1);
    REQUIRE(ts.size() == 20);
    for (const auto& t : ts)
    {
        CHECK(t.steps() == 3);
        CHECK(t.dt == 0.1);
        for (double s : t.states)
            CHECK(s == t.states[0]);
    }

    auto a = sample_trajectories(OuSpec{}, InitSpec{}, 50, 2, 9);
    auto b = sample_trajectories(OuSpec{}, InitSpec{}, 50, 2, 9);
    CHECK(a == b);
    // Trajectory i depends only on (seed, i).
    auto c = sample_trajectories(OuSpec{}, InitSpec{}, 10, 2, 9);
    for (std::size_t i = 0; i < 10; ++i)
        CHECK(c[i] == a[i]);
    for (const auto& t : a)
    {
        CHECK(t.states[0] >= -pi);
        CHECK(t.states[0] <= pi);
    }
}

TEST_CASE("transition mean and step stationarity by Monte Carlo")
{
    // Start far from zero so the ratio s1/s0 is well behaved.
    const std::size_t n = 100000;
    InitSpec init{2.0, 0.1, -pi, pi};
    OuSpec spec{0.05, 0.2, 0.1};
    auto ts = sample_trajectories(spec, init, n, 2, 5);
    double r1 = 0, r1sq = 0, inc1 = 0, inc2 = 0, inc1sq = 0, inc2sq = 0;
    for (const auto& t : ts)
    {
        double r = t.states[1] / t.states[0];
        r1 += r;
        r1sq += r * r;
        // Standardized increments have the same law at each step.
        double z1 = (t.states[1] - t.states[0] * std::exp(0.005));
        double z2 = (t.states[2] - t.states[1] * std::exp(0.005));
        inc1 += z1;
        inc2 += z2;
        inc1sq += z1 * z1;
        inc2sq += z2 * z2;
    }
    const double N = double(n);
    double mean = r1 / N, sd = std::sqrt(r1sq / N - mean * mean);
    CHECK(std::abs(mean - std::exp(0.005)) < 3 * sd / std::sqrt(N));
    double v = ou_transition_params(spec, 0.0).variance;
    CHECK(std::abs(inc1 / N) < 3 * std::sqrt(v / N));
    CHECK(std::abs(inc2 / N) < 3 * std::sqrt(v / N));
    // Sample variance has sd ≈ v √(2/N).
    CHECK(std::abs(inc1sq / N - v) < 3 * v * std::sqrt(2 / N));
    CHECK(std::abs(inc2sq / N - v) < 3 * v * std::sqrt(2 / N));
}

TEST_CASE("rewards and the value function")
{
    CHECK(reward_cont(0.0) == doctest::Approx(1.6).epsilon(1e-15));
    CHECK(reward_mdp(0.0) == doctest::Approx(0.16).epsilon(1e-15));
    CHECK(std::abs(reward_cont(pi / 2)) < 1e-15);
    RandomStream rng(8);
    for (int i = 0; i < 100; ++i)
    {
        double s = -pi + 2 * pi * rng.uniform();
        CHECK(std::abs(reward_mdp(s) - 0.1 * reward_cont(s)) < 1e-12);
    }
    CHECK(true_value(0.0) == 1.0);
    CHECK(true_value(pi / 3) == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(std::abs(true_value(pi / 2)) < 1e-15);
    CHECK(mdp_discount() == std::exp(-0.1));
}

TEST_CASE("reward solves the continuous-time Bellman equation for cos³")
{
    // βV - λ s V′ - ½σ² V″ = r with V = cos³.
    const RewardParams p{0.07, 0.8, 0.3, 0.1};
    RandomStream rng(2);
    for (int i = 0; i < 50; ++i)
    {
        double s = -pi + 2 * pi * rng.uniform();
        double c = std::cos(s), sn = std::sin(s);
        double v1 = -3 * c * c * sn;
        double v2 = 6 * c * sn * sn - 3 * c * c * c;
        double lhs = p.beta * c * c * c - p.drift * s * v1 - 0.5 * p.sigma * p.sigma * v2;
        CHECK(reward_cont(s, p) == doctest::Approx(lhs).epsilon(1e-13));
    }
}

TEST_CASE("regression surface and sampler")
{
    CHECK(regression_surface(0.25, 0.25)
          == doctest::Approx(1 + 0.5 * std::exp(-14 * 2 * 0.45 * 0.45)).epsilon(1e-14));
    CHECK(regression_surface(0.25, 0.25) == doctest::Approx(1.00172).epsilon(1e-5));
    CHECK(regression_surface(0.7, 0.7) == doctest::Approx(0.51742).epsilon(1e-5));

    const std::size_t n = 100000;
    auto pts = sample_regression(RegressionSpec{}, n, 4);
    REQUIRE(pts.size() == n);
    double s = 0, s2 = 0;
    for (const auto& p : pts)
    {
        CHECK(p.x.size() == 2);
        CHECK(p.x.minCoeff() >= 0.0);
        CHECK(p.x.maxCoeff() < 1.0);
        double e = p.y - regression_surface(p.x[0], p.x[1]);
        s += e;
        s2 += e * e;
    }
    double var = s2 / n - (s / n) * (s / n);
    // Var of the sample variance for normal noise: 2σ⁴/n.
    CHECK(std::abs(var - 0.25) < 3 * 0.25 * std::sqrt(2.0 / n));
    CHECK(sample_regression(RegressionSpec{}, 10, 4)[3] == pts[3]);
}

TEST_CASE("test grid")
{
    CHECK(mdp_test_grid(2) == std::vector<double>{-pi, pi});
    auto g3 = mdp_test_grid(3);
    CHECK(g3[0] == -pi);
    CHECK(g3[1] == doctest::Approx(0.0));
    CHECK(g3[2] == pi);
    auto g50 = mdp_test_grid(50);
    CHECK(g50.size() == 50);
    CHECK(g50[1] - g50[0] == doctest::Approx(2 * pi / 49).epsilon(1e-13));
    CHECK(g50.back() == pi);
    CHECK_THROWS(mdp_test_grid(1));
}

TEST_CASE("ingest_csv")
{
    auto header_only = temp_file("header.csv", "x1,x2,y\n");
    CHECK_THROWS_AS(ingest_csv(header_only.string()), EmptyFile);

    auto good = temp_file("good.csv", "x1,x2,y\n0.1,0.2,1.5\n-3,4e-1,2\n");
    auto pts = ingest_csv(good.string());
    REQUIRE(pts.size() == 2);
    CHECK(pts[1].x[0] == -3.0);
    CHECK(pts[1].x[1] == 0.4);
    CHECK(pts[1].y == 2.0);

    auto bad = temp_file("bad.csv", "x1,x2,y\n0.1,0.2,1.5\n0.3,abc,2\n");
    try
    {
        ingest_csv(bad.string());
        FAIL("expected ParseError");
    }
    catch (const ParseError& e)
    {
        CHECK(e.line() == 3);
    }

    auto ragged = temp_file("ragged.csv", "x1,x2,y\n0.1,0.2,1.5\n0.3,2\n");
    CHECK_THROWS_AS(ingest_csv(ragged.string()), ParseError);
    CHECK_THROWS(ingest_csv("/nonexistent/file.csv"));

    auto round = std::filesystem::temp_directory_path() / "replay_env_round.csv";
    auto sample = sample_regression(RegressionSpec{}, 7, 1);
    write_regression_csv(round.string(), sample);
    CHECK(ingest_csv(round.string()) == sample);

    for (const auto& p : {header_only, good, bad, ragged, round})
        std::filesystem::remove(p);
}
