#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "replay/replay_core.hpp"

namespace replay {

enum class Application
{
    Lstd,
    Phibe1,
    Phibe2,
    Krr
};

// Base learner for KRR: random-feature θ (the MomentMap route) or exact
// Gaussian-kernel ridge regression averaged over the same subsets.
enum class KrrSolver
{
    Features,
    Exact
};

// How WEIGHTED replay assigns per-experience sampling weights.
enum class WeightRule
{
    Uniform,
    // |r(s_0)| for trajectories, |y| for labeled points, floored at 1e-3.
    AbsTarget
};

std::string to_string(Application a);
Application application_from_string(const std::string& s);
std::string to_string(KrrSolver s);
KrrSolver krr_solver_from_string(const std::string& s);
std::string to_string(WeightRule r);
WeightRule weight_rule_from_string(const std::string& s);

// Overridable experiment constants. Unset optionals take derived defaults:
// γ = exp(-Δt), ℓ = √p, ridge = n^{-2/3} for KRR and 0 otherwise.
struct Presets
{
    double drift = 0.05;
    double sigma = 1.0;
    double beta = 0.1;
    double dt = 0.1;
    std::optional<double> gamma;
    int harmonics = 4;
    std::int64_t features = 256;
    std::optional<double> bandwidth;
    std::optional<double> ridge;
    KrrSolver krr_solver = KrrSolver::Features;
    // Center and scale each predictor by the training buffer's mean and
    // sample sd before any kernel evaluation, as R's krls does.
    bool standardize = true;

    bool operator==(const Presets&) const = default;
};

inline constexpr int kConfigSchemaVersion = 1;

struct ExperimentConfig
{
    int schema_version = kConfigSchemaVersion;
    Application application = Application::Lstd;
    std::size_t n = 500;
    std::size_t L = 2;
    std::size_t m = 50;
    std::size_t M = 50;
    std::vector<Scheme> schemes = {Scheme::Full, Scheme::UStat, Scheme::VStat};
    std::size_t B = 100;
    std::optional<std::size_t> k;
    std::optional<double> k_ratio = 0.3;
    std::uint64_t seed = 20250101;
    unsigned threads = 1;
    bool timed = false;
    // Every replication reuses replication 0's seeds (zero-variance check).
    bool freeze_replications = false;
    WeightRule weight_rule = WeightRule::Uniform;
    WeightedMode weighted_mode = WeightedMode::SelfNormalized;
    Presets presets;

    bool operator==(const ExperimentConfig&) const = default;

    std::size_t subsample_size() const;
    double ridge() const;
    double bandwidth() const;
    double gamma() const;
    bool has(Scheme s) const;

    // Throws ConfigError.
    void validate() const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
// Rejects unknown keys and schema mismatches with ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

//---------------------------------------------------------------------------//
// Report
//---------------------------------------------------------------------------//

struct FiveNumber
{
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;

    bool operator==(const FiveNumber&) const = default;
};

// Linear-interpolation quantile of ascending `sorted` at p ∈ [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);
FiveNumber summarize_boxplot(std::span<const double> values);

// Per-scheme results across replications.
struct SchemeSeries
{
    Scheme scheme = Scheme::Full;
    // Per test point, over successful kept replications (denominator M - 1).
    std::vector<double> variance;
    std::vector<double> mean;
    std::vector<double> ci_normal_low;   // mean ± 1.96 sd/√M
    std::vector<double> ci_normal_high;
    std::vector<double> pct_low;         // 2.5% and 97.5% quantiles
    std::vector<double> pct_high;
    // Per kept replication; empty where the scheme failed.
    std::vector<std::optional<double>> rmse;
    std::size_t failures = 0;
    std::size_t skipped_subsamples = 0;

    bool operator==(const SchemeSeries&) const = default;
};

// Wall-clock seconds summed over replications; only the estimation and
// prediction steps are timed. "EXACT" is the exact-kernel KRR baseline.
using Timings = std::map<std::string, double>;

struct ExperimentReport
{
    ExperimentConfig config;
    std::vector<std::vector<double>> test_points;
    std::vector<double> truth;  // V(s_j) or the test response y_j
    std::vector<SchemeSeries> series;
    std::size_t kept_replications = 0;
    std::size_t dropped_replications = 0;
    Timings timings;

    bool operator==(const ExperimentReport&) const = default;

    const SchemeSeries& get(Scheme s) const;
    // Var(FULL) - Var(s) per test point.
    std::vector<double> variance_diff(Scheme s) const;
    // (Var(FULL) - Var(s)) / Var(FULL) per test point.
    std::vector<double> relative_reduction(Scheme s) const;
    // R̃_i - R̂_i over replications where both succeeded.
    std::vector<double> rmse_diff(Scheme s) const;
};

double median_of(std::vector<double> values);
double fraction_positive(std::span<const double> values);

ExperimentReport run_experiment(const ExperimentConfig& cfg);

// report.json (everything except wall-clock timings, so it is reproducible
// bit for bit), variance_diffs.csv, rmse.csv, timings.csv, boxplot.csv,
// bands.csv.
void emit_report(const ExperimentReport& report, const std::string& dir);
ExperimentReport load_report(const std::string& dir);

nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);

}  // namespace replay
