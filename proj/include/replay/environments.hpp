#pragma once

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "replay/kernel_regression.hpp"
#include "replay/policy_eval.hpp"

namespace replay {

// ds = λ s dt + σ dB_t observed every Δt. Defaults are the experiment preset.
struct OuSpec
{
    double drift = 0.05;  // λ
    double sigma = 1.0;
    double dt = 0.1;
};

// Truncated normal for s_0.
struct InitSpec
{
    double mean = 0.0;
    double sd = 0.1;
    double lo = -std::numbers::pi;
    double hi = std::numbers::pi;
};

struct GaussianParams
{
    double mean = 0.0;
    double variance = 0.0;
};

// Exact one-step law: mean s e^{λΔt}, variance σ²(e^{2λΔt} - 1)/(2λ)
// (σ²Δt when λ = 0).
GaussianParams ou_transition_params(const OuSpec& spec, double s);

double sample_truncated_normal(const InitSpec& init, RandomStream& rng);

// Trajectory i uses stream split(i) of `seed`.
std::vector<Trajectory> sample_trajectories(const OuSpec& spec,
                                            const InitSpec& init, std::size_t n,
                                            std::size_t L, std::uint64_t seed);

// Constants of the reward functions: drift λ, diffusion σ, discount β, Δt.
struct RewardParams
{
    double drift = 0.05;
    double sigma = 1.0;
    double beta = 0.1;
    double dt = 0.1;
};

// r(s) = βcos³s - λs(-3cos²s sin s) - ½σ²(6 cos s sin²s - 3cos³s); its value
// function is cos³s.
double reward_cont(double s, const RewardParams& p = {});
// Per-step MDP reward, Δt · reward_cont(s).
double reward_mdp(double s, const RewardParams& p = {});
double true_value(double s);

// MDP preset discount γ = e^{-Δt} (e^{-0.1} at Δt = 0.1). The MDP reward
// bracket has unit weight on cos³, so this is exp(-βΔt) with β = 1.
double mdp_discount(const RewardParams& p = {});

struct RegressionSpec
{
    std::size_t p = 2;
    double noise_sd = 0.5;
};

// e^{10(-(x1-.25)² - (x2-.25)²)} + 0.5 e^{14(-(x1-.7)² - (x2-.7)²)}.
double regression_surface(double x1, double x2);

// Point i uses stream split(i) of `seed`.
std::vector<LabeledPoint> sample_regression(const RegressionSpec& spec,
                                            std::size_t n, std::uint64_t seed);

// s_j = -π + 2(j-1)π/(m-1), j = 1..m.
std::vector<double> mdp_test_grid(std::size_t m);

// Header row, then numeric rows; the last column is the response.
std::vector<LabeledPoint> ingest_csv(const std::string& path);

void write_regression_csv(const std::string& path,
                          const std::vector<LabeledPoint>& points);

}  // namespace replay
