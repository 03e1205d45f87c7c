#include "replay/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "replay/environments.hpp"
#include "replay/errors.hpp"
#include "replay/kernel_regression.hpp"
#include "replay/policy_eval.hpp"

namespace replay {

using nlohmann::json;

//---------------------------------------------------------------------------//
// Enum names
//---------------------------------------------------------------------------//

std::string to_string(Application a)
{
    switch (a)
    {
        case Application::Lstd: return "LSTD";
        case Application::Phibe1: return "PHIBE1";
        case Application::Phibe2: return "PHIBE2";
        case Application::Krr: return "KRR";
    }
    return "?";
}

Application application_from_string(const std::string& s)
{
    if (s == "LSTD") return Application::Lstd;
    if (s == "PHIBE1") return Application::Phibe1;
    if (s == "PHIBE2") return Application::Phibe2;
    if (s == "KRR") return Application::Krr;
    throw ConfigError("unknown application '" + s + "'");
}

std::string to_string(KrrSolver s)
{
    return s == KrrSolver::Exact ? "exact" : "features";
}

KrrSolver krr_solver_from_string(const std::string& s)
{
    if (s == "features") return KrrSolver::Features;
    if (s == "exact") return KrrSolver::Exact;
    throw ConfigError("unknown krr_solver '" + s + "'");
}

std::string to_string(WeightRule r)
{
    return r == WeightRule::AbsTarget ? "abs_target" : "uniform";
}

WeightRule weight_rule_from_string(const std::string& s)
{
    if (s == "uniform") return WeightRule::Uniform;
    if (s == "abs_target") return WeightRule::AbsTarget;
    throw ConfigError("unknown weighting '" + s + "'");
}

//---------------------------------------------------------------------------//
// Config
//---------------------------------------------------------------------------//

std::size_t ExperimentConfig::subsample_size() const
{
    if (k)
        return *k;
    auto r = static_cast<std::size_t>(std::llround(*k_ratio * static_cast<double>(n)));
    return std::max<std::size_t>(r, 1);
}

double ExperimentConfig::ridge() const
{
    if (presets.ridge)
        return *presets.ridge;
    return application == Application::Krr ? auto_ridge(n) : 0.0;
}

double ExperimentConfig::bandwidth() const
{
    if (presets.bandwidth)
        return *presets.bandwidth;
    return std::sqrt(static_cast<double>(RegressionSpec{}.p));
}

double ExperimentConfig::gamma() const
{
    if (presets.gamma)
        return *presets.gamma;
    return std::exp(-presets.dt);
}

bool ExperimentConfig::has(Scheme s) const
{
    return std::find(schemes.begin(), schemes.end(), s) != schemes.end();
}

void ExperimentConfig::validate() const
{
    auto fail = [](const std::string& what) { throw ConfigError(what); };
    if (schema_version != kConfigSchemaVersion)
        fail("unsupported schema_version " + std::to_string(schema_version));
    if (n < 1)
        fail("n must be at least 1");
    if (M < 2)
        fail("M must be at least 2");
    if (m < 1)
        fail("m must be at least 1");
    if (application != Application::Krr && m < 2)
        fail("the state test grid needs m >= 2");
    if (k.has_value() == k_ratio.has_value())
        fail("set exactly one of k and k_ratio");
    if (k_ratio && !(*k_ratio > 0.0 && *k_ratio <= 1.0))
        fail("k_ratio must lie in (0, 1]");
    const std::size_t kk = subsample_size();
    if (kk < 1 || kk > n)
        fail("k must lie in [1, n]");
    if (schemes.empty())
        fail("schemes must be nonempty");
    if (!has(Scheme::Full))
        fail("schemes must include FULL");
    std::set<Scheme> seen(schemes.begin(), schemes.end());
    if (seen.size() != schemes.size())
        fail("schemes contains duplicates");
    if (B < 1)
        fail("B must be at least 1");
    if (threads < 1)
        fail("threads must be at least 1");

    const Presets& p = presets;
    if (!(p.dt > 0.0))
        fail("dt must be positive");
    if (!(p.sigma >= 0.0))
        fail("sigma must be nonnegative");
    if (!std::isfinite(p.drift))
        fail("drift must be finite");
    if (p.harmonics < 0)
        fail("harmonics must be nonnegative");
    if (p.features < 1)
        fail("features must be at least 1");
    if (p.bandwidth && !(*p.bandwidth > 0.0))
        fail("bandwidth must be positive");
    if (p.ridge && !(*p.ridge >= 0.0))
        fail("ridge must be nonnegative");

    switch (application)
    {
        case Application::Lstd:
        {
            double g = gamma();
            if (!(g >= 0.0 && g < 1.0))
                fail("gamma must lie in [0, 1)");
            if (L < 1)
                fail("L must be at least 1");
            break;
        }
        case Application::Phibe1:
        case Application::Phibe2:
            if (!(p.beta > 0.0))
                fail("beta must be positive");
            if (L < (application == Application::Phibe2 ? 2u : 1u))
                fail("L is too short for the PhiBE order");
            break;
        case Application::Krr:
            if (p.krr_solver == KrrSolver::Exact)
            {
                if (n > kExactKrrCap)
                    fail("exact KRR is capped at n = " + std::to_string(kExactKrrCap));
                if (!(ridge() > 0.0))
                    fail("exact KRR replay needs a positive ridge");
            }
            break;
    }
}

namespace {

template <class T>
T take(const json& j, const char* key)
{
    try
    {
        return j.at(key).get<T>();
    }
    catch (const json::exception& e)
    {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where)
{
    if (!j.is_object())
        throw ConfigError(where + " must be a JSON object");
    for (const auto& item : j.items())
    {
        bool ok = std::any_of(allowed.begin(), allowed.end(),
                              [&](const char* a) { return item.key() == a; });
        if (!ok)
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
}

}  // namespace

json config_to_json(const ExperimentConfig& cfg)
{
    json j;
    j["schema_version"] = cfg.schema_version;
    j["application"] = to_string(cfg.application);
    j["n"] = cfg.n;
    j["L"] = cfg.L;
    j["m"] = cfg.m;
    j["M"] = cfg.M;
    j["schemes"] = json::array();
    for (Scheme s : cfg.schemes)
        j["schemes"].push_back(to_string(s));
    j["B"] = cfg.B;
    if (cfg.k)
        j["k"] = *cfg.k;
    if (cfg.k_ratio)
        j["k_ratio"] = *cfg.k_ratio;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["timed"] = cfg.timed;
    j["freeze_replications"] = cfg.freeze_replications;
    j["weighting"] = to_string(cfg.weight_rule);
    j["weighted_mode"] = to_string(cfg.weighted_mode);

    const Presets& p = cfg.presets;
    json pj;
    pj["drift"] = p.drift;
    pj["sigma"] = p.sigma;
    pj["beta"] = p.beta;
    pj["dt"] = p.dt;
    if (p.gamma)
        pj["gamma"] = *p.gamma;
    pj["harmonics"] = p.harmonics;
    pj["features"] = p.features;
    if (p.bandwidth)
        pj["bandwidth"] = *p.bandwidth;
    if (p.ridge)
        pj["ridge"] = *p.ridge;
    else
        pj["ridge"] = "auto";
    pj["krr_solver"] = to_string(p.krr_solver);
    pj["standardize"] = p.standardize;
    j["presets"] = pj;
    return j;
}

ExperimentConfig config_from_json(const json& j)
{
    reject_unknown(j,
                   {"schema_version", "application", "n", "L", "m", "M", "schemes",
                    "B", "k", "k_ratio", "seed", "threads", "timed",
                    "freeze_replications", "weighting", "weighted_mode", "presets"},
                   "config");
    if (!j.contains("schema_version"))
        throw ConfigError("config is missing schema_version");

    ExperimentConfig cfg;
    cfg.schema_version = take<int>(j, "schema_version");
    if (cfg.schema_version != kConfigSchemaVersion)
        throw ConfigError("unsupported schema_version "
                          + std::to_string(cfg.schema_version));
    if (j.contains("application"))
        cfg.application = application_from_string(take<std::string>(j, "application"));
    if (j.contains("n")) cfg.n = take<std::size_t>(j, "n");
    if (j.contains("L")) cfg.L = take<std::size_t>(j, "L");
    if (j.contains("m")) cfg.m = take<std::size_t>(j, "m");
    if (j.contains("M")) cfg.M = take<std::size_t>(j, "M");
    if (j.contains("schemes"))
    {
        cfg.schemes.clear();
        for (const auto& s : take<std::vector<std::string>>(j, "schemes"))
        {
            try
            {
                cfg.schemes.push_back(scheme_from_string(s));
            }
            catch (const Error& e)
            {
                throw ConfigError(e.what());
            }
        }
    }
    if (j.contains("B")) cfg.B = take<std::size_t>(j, "B");
    if (j.contains("k") && j.contains("k_ratio"))
        throw ConfigError("set exactly one of k and k_ratio");
    if (j.contains("k"))
    {
        cfg.k = take<std::size_t>(j, "k");
        cfg.k_ratio.reset();
    }
    if (j.contains("k_ratio"))
        cfg.k_ratio = take<double>(j, "k_ratio");
    if (j.contains("seed")) cfg.seed = take<std::uint64_t>(j, "seed");
    if (j.contains("threads")) cfg.threads = take<unsigned>(j, "threads");
    if (j.contains("timed")) cfg.timed = take<bool>(j, "timed");
    if (j.contains("freeze_replications"))
        cfg.freeze_replications = take<bool>(j, "freeze_replications");
    if (j.contains("weighting"))
        cfg.weight_rule = weight_rule_from_string(take<std::string>(j, "weighting"));
    if (j.contains("weighted_mode"))
    {
        try
        {
            cfg.weighted_mode =
                weighted_mode_from_string(take<std::string>(j, "weighted_mode"));
        }
        catch (const ConfigError&)
        {
            throw;
        }
        catch (const Error& e)
        {
            throw ConfigError(e.what());
        }
    }

    if (j.contains("presets"))
    {
        const json& pj = j.at("presets");
        reject_unknown(pj,
                       {"drift", "sigma", "beta", "dt", "gamma", "harmonics",
                        "features", "bandwidth", "ridge", "krr_solver", "standardize"},
                       "presets");
        Presets& p = cfg.presets;
        if (pj.contains("drift")) p.drift = take<double>(pj, "drift");
        if (pj.contains("sigma")) p.sigma = take<double>(pj, "sigma");
        if (pj.contains("beta")) p.beta = take<double>(pj, "beta");
        if (pj.contains("dt")) p.dt = take<double>(pj, "dt");
        if (pj.contains("gamma") && !pj.at("gamma").is_null())
            p.gamma = take<double>(pj, "gamma");
        if (pj.contains("harmonics")) p.harmonics = take<int>(pj, "harmonics");
        if (pj.contains("features")) p.features = take<std::int64_t>(pj, "features");
        if (pj.contains("bandwidth") && !pj.at("bandwidth").is_null())
            p.bandwidth = take<double>(pj, "bandwidth");
        if (pj.contains("ridge"))
        {
            const json& r = pj.at("ridge");
            if (r.is_string())
            {
                if (r.get<std::string>() != "auto")
                    throw ConfigError("ridge must be a number or \"auto\"");
            }
            else if (!r.is_null())
                p.ridge = take<double>(pj, "ridge");
        }
        if (pj.contains("krr_solver"))
            p.krr_solver = krr_solver_from_string(take<std::string>(pj, "krr_solver"));
        if (pj.contains("standardize")) p.standardize = take<bool>(pj, "standardize");
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config '" + path + "'");
    json j;
    try
    {
        in >> j;
    }
    catch (const json::exception& e)
    {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

//---------------------------------------------------------------------------//
// Summaries
//---------------------------------------------------------------------------//

double quantile_sorted(std::span<const double> sorted, double p)
{
    if (sorted.empty())
        throw InvalidArgument("quantile of an empty sample");
    double h = p * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

FiveNumber summarize_boxplot(std::span<const double> values)
{
    if (values.empty())
        throw InvalidArgument("summarize_boxplot: empty input");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    return {v.front(), quantile_sorted(v, 0.25), quantile_sorted(v, 0.5),
            quantile_sorted(v, 0.75), v.back()};
}

double median_of(std::vector<double> values)
{
    std::erase_if(values, [](double x) { return std::isnan(x); });
    if (values.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, 0.5);
}

double fraction_positive(std::span<const double> values)
{
    if (values.empty())
        return 0.0;
    auto pos = std::count_if(values.begin(), values.end(), [](double x) { return x > 0.0; });
    return static_cast<double>(pos) / static_cast<double>(values.size());
}

const SchemeSeries& ExperimentReport::get(Scheme s) const
{
    for (const auto& ser : series)
        if (ser.scheme == s)
            return ser;
    throw InvalidArgument("scheme " + to_string(s) + " is not in the report");
}

std::vector<double> ExperimentReport::variance_diff(Scheme s) const
{
    const auto& full = get(Scheme::Full).variance;
    const auto& other = get(s).variance;
    std::vector<double> d(full.size());
    for (std::size_t j = 0; j < d.size(); ++j)
        d[j] = full[j] - other[j];
    return d;
}

std::vector<double> ExperimentReport::relative_reduction(Scheme s) const
{
    const auto& full = get(Scheme::Full).variance;
    auto d = variance_diff(s);
    for (std::size_t j = 0; j < d.size(); ++j)
        d[j] /= full[j];
    return d;
}

std::vector<double> ExperimentReport::rmse_diff(Scheme s) const
{
    const auto& full = get(Scheme::Full).rmse;
    const auto& other = get(s).rmse;
    std::vector<double> d;
    for (std::size_t i = 0; i < full.size(); ++i)
        if (full[i] && other[i])
            d.push_back(*full[i] - *other[i]);
    return d;
}

//---------------------------------------------------------------------------//
// Experiment
//---------------------------------------------------------------------------//

namespace {

using Clock = std::chrono::steady_clock;

struct RepResult
{
    bool full_ok = false;
    std::vector<std::optional<Vector>> predictions;  // per scheme
    std::vector<double> seconds;
    std::vector<std::size_t> skipped;
    double exact_seconds = 0.0;
};

ReplayConfig replay_config(const ExperimentConfig& cfg, Scheme s, std::size_t rep,
                           std::vector<double> weights)
{
    ReplayConfig rc;
    rc.scheme = s;
    rc.B = cfg.B;
    rc.k = cfg.subsample_size();
    rc.seed = derive_seed(cfg.seed, {2, rep, static_cast<std::uint64_t>(s)});
    rc.weighted_mode = cfg.weighted_mode;
    rc.threads = 1;
    if (s == Scheme::Weighted)
        rc.weights = std::move(weights);
    return rc;
}

template <class Fn>
double timed_call(Fn&& fn)
{
    auto t0 = Clock::now();
    fn();
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Runs every scheme on one buffer; `predict` maps θ to the m test outputs.
template <class Payload, class Predict>
RepResult run_schemes(const ExperimentConfig& cfg, std::size_t rep,
                      const ReplayBuffer<Payload>& buffer, const MomentMap<Payload>& m,
                      const std::vector<double>& weights, Predict&& predict)
{
    RepResult out;
    const std::size_t ns = cfg.schemes.size();
    out.predictions.resize(ns);
    out.seconds.assign(ns, 0.0);
    out.skipped.assign(ns, 0);
    for (std::size_t s = 0; s < ns; ++s)
    {
        ReplayConfig rc = replay_config(cfg, cfg.schemes[s], rep, weights);
        std::optional<Vector> pred;
        std::size_t skipped = 0;
        out.seconds[s] = timed_call([&] {
            try
            {
                ThetaEstimate est = estimate_resampled(buffer, m, rc);
                skipped = est.subsamples_skipped;
                pred = predict(est.theta);
            }
            catch (const Error&)
            {
                pred.reset();
            }
        });
        if (cfg.schemes[s] == Scheme::Full)
            out.full_ok = pred.has_value();
        out.predictions[s] = std::move(pred);
        out.skipped[s] = skipped;
    }
    return out;
}

// Exact-kernel predictions averaged over the planned subsets, combined the
// same way estimate_resampled combines θ.
Vector exact_replay_predict(const std::vector<LabeledPoint>& data, const ReplayConfig& rc,
                            double bandwidth, double ridge, const Matrix& test_x,
                            std::size_t& skipped)
{
    const Eigen::Index mt = test_x.cols();
    auto predict_all = [&](std::span<const LabeledPoint> pts) {
        ExactKrr model(pts, bandwidth, ridge);
        Vector y(mt);
        for (Eigen::Index j = 0; j < mt; ++j)
            y[j] = model.predict(test_x.col(j));
        return y;
    };
    if (rc.scheme == Scheme::Full)
        return predict_all(data);

    SubsamplePlan plan = plan_subsamples(data.size(), rc);
    CompensatedSum sum(mt);
    CompensatedScalar wsum;
    std::size_t used = 0;
    std::vector<LabeledPoint> subset;
    for (std::size_t b = 0; b < plan.subsets.size(); ++b)
    {
        subset.clear();
        for (std::size_t i : plan.subsets[b])
            subset.push_back(data[i]);
        Vector y;
        try
        {
            y = predict_all(subset);
        }
        catch (const SingularSystem&)
        {
            ++skipped;
            continue;
        }
        ++used;
        double w = plan.weights[b];
        sum.add(w == 1.0 ? y : Vector(w * y));
        wsum.add(w);
    }
    if (used == 0)
        throw AllSubsamplesSingular("every exact-KRR subsample failed");
    double denom = static_cast<double>(used);
    if (rc.scheme == Scheme::Weighted && rc.weighted_mode == WeightedMode::SelfNormalized)
        denom = wsum.value();
    return sum.value() / denom;
}

std::vector<double> abs_weights(std::vector<double> w)
{
    for (double& x : w)
        x = std::max(std::abs(x), 1e-3);
    return w;
}

// Columnwise (x - mean) / sd with the training sample's statistics, applied
// to the training points and the test matrix alike.
void standardize_predictors(std::vector<LabeledPoint>& data, Matrix& test_x)
{
    const Eigen::Index p = data.front().x.size();
    const double cnt = static_cast<double>(data.size());
    Vector mean = Vector::Zero(p);
    for (const auto& pt : data)
        mean += pt.x;
    mean /= cnt;
    Vector sd = Vector::Zero(p);
    for (const auto& pt : data)
        sd.array() += (pt.x - mean).array().square();
    for (Eigen::Index c = 0; c < p; ++c)
    {
        sd[c] = data.size() > 1 ? std::sqrt(sd[c] / (cnt - 1.0)) : 0.0;
        if (!(sd[c] > 0.0))
            sd[c] = 1.0;
    }
    for (auto& pt : data)
        pt.x = ((pt.x - mean).array() / sd.array()).matrix();
    test_x = ((test_x.colwise() - mean).array().colwise() / sd.array()).matrix();
}

RewardParams reward_params(const Presets& p)
{
    return {p.drift, p.sigma, p.beta, p.dt};
}

RepResult run_rl_rep(const ExperimentConfig& cfg, std::size_t rep, const Matrix& phi_test)
{
    const Presets& p = cfg.presets;
    OuSpec ou{p.drift, p.sigma, p.dt};
    auto trajs = sample_trajectories(ou, InitSpec{}, cfg.n, cfg.L,
                                     derive_seed(cfg.seed, {1, rep}));
    FourierBasis basis(p.harmonics);
    RewardParams rp = reward_params(p);
    RewardFn reward;
    MomentMap<Trajectory> m;
    if (cfg.application == Application::Lstd)
    {
        reward = [rp](double s) { return reward_mdp(s, rp); };
        m = lstd_moments(basis, cfg.gamma(), reward);
    }
    else
    {
        reward = [rp](double s) { return reward_cont(s, rp); };
        int alpha = cfg.application == Application::Phibe2 ? 2 : 1;
        m = phibe_moments(basis, p.beta, reward, PhibeOrder(alpha));
    }
    m.ridge = cfg.ridge();

    std::vector<double> weights;
    if (cfg.has(Scheme::Weighted))
    {
        weights.reserve(trajs.size());
        for (const auto& t : trajs)
            weights.push_back(cfg.weight_rule == WeightRule::AbsTarget ? reward(t.states[0])
                                                                       : 1.0);
        if (cfg.weight_rule == WeightRule::AbsTarget)
            weights = abs_weights(std::move(weights));
    }
    ReplayBuffer<Trajectory> buffer(std::move(trajs));
    return run_schemes(cfg, rep, buffer, m, weights,
                       [&](const Vector& theta) { return Vector(phi_test * theta); });
}

RepResult run_krr_rep(const ExperimentConfig& cfg, std::size_t rep, const FeatureMap* fm,
                      const Matrix& test_x_raw)
{
    auto data = sample_regression(RegressionSpec{}, cfg.n, derive_seed(cfg.seed, {1, rep}));
    std::vector<double> weights;
    if (cfg.has(Scheme::Weighted))
    {
        weights.reserve(data.size());
        for (const auto& pt : data)
            weights.push_back(cfg.weight_rule == WeightRule::AbsTarget ? pt.y : 1.0);
        if (cfg.weight_rule == WeightRule::AbsTarget)
            weights = abs_weights(std::move(weights));
    }
    Matrix test_x = test_x_raw;
    if (cfg.presets.standardize)
        standardize_predictors(data, test_x);
    Matrix feat_test;
    if (fm)
        feat_test = fm->features(test_x);
    const double ridge = cfg.ridge();
    const double bw = cfg.bandwidth();

    RepResult out;
    if (cfg.presets.krr_solver == KrrSolver::Features)
    {
        MomentMap<LabeledPoint> m = krr_moments(*fm, ridge);
        ReplayBuffer<LabeledPoint> buffer(data);
        out = run_schemes(cfg, rep, buffer, m, weights,
                          [&](const Vector& theta) { return Vector(feat_test * theta); });
        if (cfg.timed)
        {
            out.exact_seconds = timed_call([&] {
                ReplayConfig rc = replay_config(cfg, Scheme::Full, rep, {});
                std::size_t ignored = 0;
                exact_replay_predict(data, rc, bw, ridge, test_x, ignored);
            });
        }
        return out;
    }

    const std::size_t ns = cfg.schemes.size();
    out.predictions.resize(ns);
    out.seconds.assign(ns, 0.0);
    out.skipped.assign(ns, 0);
    for (std::size_t s = 0; s < ns; ++s)
    {
        ReplayConfig rc = replay_config(cfg, cfg.schemes[s], rep, weights);
        std::optional<Vector> pred;
        std::size_t skipped = 0;
        out.seconds[s] = timed_call([&] {
            try
            {
                pred = exact_replay_predict(data, rc, bw, ridge, test_x, skipped);
            }
            catch (const Error&)
            {
                pred.reset();
            }
        });
        if (cfg.schemes[s] == Scheme::Full)
        {
            out.full_ok = pred.has_value();
            out.exact_seconds = out.seconds[s];
        }
        out.predictions[s] = std::move(pred);
        out.skipped[s] = skipped;
    }
    return out;
}

void fill_series(SchemeSeries& ser, const std::vector<const Vector*>& preds,
                 std::size_t m, const std::vector<double>& truth)
{
    ser.variance.assign(m, std::numeric_limits<double>::quiet_NaN());
    ser.mean.assign(m, std::numeric_limits<double>::quiet_NaN());
    ser.ci_normal_low = ser.ci_normal_high = ser.pct_low = ser.pct_high = ser.mean;

    ser.rmse.clear();
    for (const Vector* p : preds)
    {
        if (!p)
        {
            ser.rmse.push_back(std::nullopt);
            continue;
        }
        CompensatedScalar sq;
        for (std::size_t j = 0; j < m; ++j)
        {
            double e = (*p)[static_cast<Eigen::Index>(j)] - truth[j];
            sq.add(e * e);
        }
        ser.rmse.push_back(std::sqrt(sq.value() / static_cast<double>(m)));
    }

    std::vector<double> column;
    for (std::size_t j = 0; j < m; ++j)
    {
        column.clear();
        for (const Vector* p : preds)
            if (p)
                column.push_back((*p)[static_cast<Eigen::Index>(j)]);
        if (column.empty())
            continue;
        const double cnt = static_cast<double>(column.size());
        CompensatedScalar s1;
        for (double v : column)
            s1.add(v);
        const double mean = s1.value() / cnt;
        CompensatedScalar s2;
        for (double v : column)
            s2.add((v - mean) * (v - mean));
        ser.mean[j] = mean;
        if (column.size() >= 2)
        {
            double var = s2.value() / (cnt - 1.0);
            double half = 1.96 * std::sqrt(var / cnt);
            ser.variance[j] = var;
            ser.ci_normal_low[j] = mean - half;
            ser.ci_normal_high[j] = mean + half;
        }
        std::sort(column.begin(), column.end());
        ser.pct_low[j] = quantile_sorted(column, 0.025);
        ser.pct_high[j] = quantile_sorted(column, 0.975);
    }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    ExperimentReport report;
    report.config = cfg;

    // Fixed across replications: the test set and, for KRR, the feature map.
    Matrix phi_test;
    Matrix test_x;
    std::optional<FeatureMap> fm;
    if (cfg.application == Application::Krr)
    {
        auto test = sample_regression(RegressionSpec{}, cfg.m, derive_seed(cfg.seed, {3}));
        test_x = Matrix(static_cast<Eigen::Index>(RegressionSpec{}.p),
                        static_cast<Eigen::Index>(cfg.m));
        for (std::size_t j = 0; j < cfg.m; ++j)
        {
            test_x.col(static_cast<Eigen::Index>(j)) = test[j].x;
            report.test_points.emplace_back(test[j].x.data(),
                                            test[j].x.data() + test[j].x.size());
            report.truth.push_back(test[j].y);
        }
        if (cfg.presets.krr_solver == KrrSolver::Features)
            fm.emplace(static_cast<Eigen::Index>(RegressionSpec{}.p),
                       static_cast<Eigen::Index>(cfg.presets.features), cfg.bandwidth(),
                       derive_seed(cfg.seed, {4}));
    }
    else
    {
        FourierBasis basis(cfg.presets.harmonics);
        auto grid = mdp_test_grid(cfg.m);
        phi_test = Matrix(static_cast<Eigen::Index>(cfg.m), basis.size());
        for (std::size_t j = 0; j < cfg.m; ++j)
        {
            phi_test.row(static_cast<Eigen::Index>(j)) = basis.value(grid[j]).transpose();
            report.test_points.push_back({grid[j]});
            report.truth.push_back(true_value(grid[j]));
        }
    }

    std::vector<RepResult> reps(cfg.M);
    const unsigned threads = cfg.timed ? 1u : cfg.threads;
    parallel_for(cfg.M, threads, [&](std::size_t r) {
        const std::size_t rep = cfg.freeze_replications ? 0 : r;
        if (cfg.application == Application::Krr)
            reps[r] = run_krr_rep(cfg, rep, fm ? &*fm : nullptr, test_x);
        else
            reps[r] = run_rl_rep(cfg, rep, phi_test);
    });

    const std::size_t ns = cfg.schemes.size();
    report.series.resize(ns);
    std::vector<std::vector<const Vector*>> kept(ns);
    for (std::size_t s = 0; s < ns; ++s)
    {
        report.series[s].scheme = cfg.schemes[s];
        report.timings[to_string(cfg.schemes[s])] = 0.0;
    }
    if (cfg.application == Application::Krr && cfg.timed)
        report.timings["EXACT"] = 0.0;

    for (const RepResult& rr : reps)
    {
        if (!rr.full_ok)
        {
            ++report.dropped_replications;
            continue;
        }
        ++report.kept_replications;
        for (std::size_t s = 0; s < ns; ++s)
        {
            SchemeSeries& ser = report.series[s];
            if (rr.predictions[s])
                kept[s].push_back(&*rr.predictions[s]);
            else
            {
                kept[s].push_back(nullptr);
                ++ser.failures;
            }
            ser.skipped_subsamples += rr.skipped[s];
            report.timings[to_string(cfg.schemes[s])] += rr.seconds[s];
        }
        if (cfg.application == Application::Krr && cfg.timed)
            report.timings["EXACT"] += rr.exact_seconds;
    }
    for (std::size_t s = 0; s < ns; ++s)
        fill_series(report.series[s], kept[s], cfg.m, report.truth);
    return report;
}

}  // namespace replay
