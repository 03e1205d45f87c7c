#include "replay/cli.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "replay/diagnostics.hpp"
#include "replay/environments.hpp"
#include "replay/errors.hpp"
#include "replay/experiment.hpp"
#include "replay/json_io.hpp"

namespace replay {

using nlohmann::json;

namespace {

// Inputs the user can fix by changing arguments or files.
bool is_validation_error(const Error& e)
{
    return dynamic_cast<const InvalidArgument*>(&e) || dynamic_cast<const ConfigError*>(&e)
           || dynamic_cast<const ParseError*>(&e) || dynamic_cast<const EmptyFile*>(&e)
           || dynamic_cast<const InvalidWeights*>(&e)
           || dynamic_cast<const DimensionMismatch*>(&e)
           || dynamic_cast<const CapExceeded*>(&e)
           || dynamic_cast<const TrajectoryTooShort*>(&e)
           || dynamic_cast<const IndexOutOfRange*>(&e);
}

struct ScalarProblem
{
    MomentMap<double> map;
    ExperienceGenerator<double> generator;
};

ScalarProblem scalar_problem(const std::string& name)
{
    if (name == "mean")
        return {mean_problem(), [](RandomStream& rng) { return rng.normal(); }};
    if (name == "ratio")
        return {ratio_problem(),
                [](RandomStream& rng) { return 2.0 * rng.uniform() - 1.0; }};
    throw InvalidArgument("unknown problem '" + name + "' (expected mean or ratio)");
}

struct SimulateArgs
{
    std::string kind = "trajectories";
    std::size_t n = 500;
    std::size_t L = 2;
    std::uint64_t seed = 1;
    std::string out;
    double drift = 0.05;
    double sigma = 1.0;
    double dt = 0.1;
};

int run_simulate(const SimulateArgs& a, std::ostream& out)
{
    namespace fs = std::filesystem;
    fs::create_directories(a.out);
    if (a.kind == "trajectories")
    {
        if (a.n < 1 || a.L < 1)
            throw InvalidArgument("simulate: need n >= 1 and L >= 1");
        auto trajs = sample_trajectories(OuSpec{a.drift, a.sigma, a.dt}, InitSpec{}, a.n,
                                         a.L, a.seed);
        auto csv = (fs::path(a.out) / "trajectories.csv").string();
        auto manifest = (fs::path(a.out) / "manifest.json").string();
        write_trajectories(csv, manifest, trajs);
        out << json{{"trajectories", csv}, {"manifest", manifest}, {"n", a.n}}.dump()
            << '\n';
        return kExitOk;
    }
    if (a.kind == "regression")
    {
        if (a.n < 1)
            throw InvalidArgument("simulate: need n >= 1");
        auto pts = sample_regression(RegressionSpec{}, a.n, a.seed);
        auto csv = (fs::path(a.out) / "regression.csv").string();
        write_regression_csv(csv, pts);
        out << json{{"regression", csv}, {"n", a.n}}.dump() << '\n';
        return kExitOk;
    }
    throw InvalidArgument("simulate: unknown kind '" + a.kind + "'");
}

struct EstimateArgs
{
    std::string data;
    std::string manifest;
    std::string application = "LSTD";
    std::string scheme = "FULL";
    std::size_t B = 100;
    std::optional<std::size_t> k;
    std::uint64_t seed = 1;
    std::string weighted_mode = "self_normalized";
    int harmonics = 4;
    double beta = 0.1;
    double drift = 0.05;
    double sigma = 1.0;
    std::optional<double> gamma;
    std::int64_t features = 256;
    std::optional<double> bandwidth;
    std::optional<double> ridge;
    unsigned threads = 1;
};

int run_estimate(const EstimateArgs& a, std::ostream& out)
{
    Application app = application_from_string(a.application);
    ReplayConfig rc;
    rc.scheme = scheme_from_string(a.scheme);
    rc.B = a.B;
    rc.seed = a.seed;
    rc.weighted_mode = weighted_mode_from_string(a.weighted_mode);
    rc.threads = a.threads;

    auto finish = [&](const ThetaEstimate& est) {
        json j = est;
        out << j.dump() << '\n';
        return kExitOk;
    };

    if (app == Application::Krr)
    {
        auto pts = ingest_csv(a.data);
        const auto p = pts.front().x.size();
        double bw = a.bandwidth ? *a.bandwidth : std::sqrt(static_cast<double>(p));
        double ridge = a.ridge ? *a.ridge : auto_ridge(pts.size());
        FeatureMap fm(p, a.features, bw, derive_seed(a.seed, {4}));
        auto m = krr_moments(fm, ridge);
        rc.k = a.k ? *a.k : std::max<std::size_t>(1, pts.size() / 3);
        rc.weights.assign(pts.size(), 1.0);
        ReplayBuffer<LabeledPoint> buffer(std::move(pts));
        return finish(estimate_resampled(buffer, m, rc));
    }

    if (a.manifest.empty())
        throw InvalidArgument("estimate: trajectory data needs --manifest");
    auto trajs = read_trajectories(a.data, a.manifest);
    if (trajs.empty())
        throw EmptyFile("estimate: no trajectories in '" + a.data + "'");
    const double dt = trajs.front().dt;
    RewardParams rp{a.drift, a.sigma, a.beta, dt};
    FourierBasis basis(a.harmonics);
    MomentMap<Trajectory> m;
    if (app == Application::Lstd)
        m = lstd_moments(basis, a.gamma ? *a.gamma : mdp_discount(rp),
                         [rp](double s) { return reward_mdp(s, rp); });
    else
        m = phibe_moments(basis, a.beta, [rp](double s) { return reward_cont(s, rp); },
                          PhibeOrder(app == Application::Phibe2 ? 2 : 1));
    if (a.ridge)
        m.ridge = *a.ridge;
    rc.k = a.k ? *a.k : std::max<std::size_t>(1, trajs.size() * 3 / 10);
    rc.weights.assign(trajs.size(), 1.0);
    ReplayBuffer<Trajectory> buffer(std::move(trajs));
    return finish(estimate_resampled(buffer, m, rc));
}

struct ExperimentArgs
{
    std::string config;
    std::string out;
    std::optional<unsigned> threads;
    bool timed = false;
};

int run_experiment_cmd(const ExperimentArgs& a, std::ostream& out)
{
    ExperimentConfig cfg = load_config(a.config);
    if (a.threads)
        cfg.threads = *a.threads;
    if (a.timed)
        cfg.timed = true;
    cfg.validate();
    ExperimentReport r = run_experiment(cfg);
    emit_report(r, a.out);
    out << json{{"out", a.out},
                {"kept_replications", r.kept_replications},
                {"dropped_replications", r.dropped_replications}}
               .dump()
        << '\n';
    return kExitOk;
}

struct ZetaArgs
{
    std::string problem = "mean";
    std::size_t c = 1;
    std::size_t k = 5;
    std::size_t reps = 20000;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

int run_zeta(const ZetaArgs& a, std::ostream& out)
{
    ScalarProblem p = scalar_problem(a.problem);
    VarianceComponents z =
        estimate_zeta(p.generator, p.map, a.c, a.k, a.reps, a.seed, a.threads);
    out << json{{"c", z.c},
                {"k", z.k},
                {"reps", z.mc_reps},
                {"zeta", matrix_to_json(z.zeta)},
                {"std_err", matrix_to_json(z.std_err)}}
               .dump()
        << '\n';
    return kExitOk;
}

struct BlomArgs
{
    std::string problem = "mean";
    std::size_t n = 8;
    std::size_t k = 3;
    std::size_t B = 5;
    std::size_t reps = 2000;
    std::size_t zeta_reps = 20000;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

int run_blom(const BlomArgs& a, std::ostream& out)
{
    ScalarProblem p = scalar_problem(a.problem);
    BlomReport r = blom_variance_check(p.generator, p.map, a.n, a.k, a.B, a.reps, a.seed,
                                       a.zeta_reps, kDefaultEnumerationCap, a.threads);
    json j = r;
    out << j.dump() << '\n';
    return kExitOk;
}

int run_report(const std::string& dir, std::ostream& out)
{
    ExperimentReport r = load_report(dir);
    json j;
    j["application"] = to_string(r.config.application);
    j["kept_replications"] = r.kept_replications;
    j["dropped_replications"] = r.dropped_replications;
    json schemes = json::object();
    for (const auto& s : r.series)
    {
        if (s.scheme == Scheme::Full)
            continue;
        auto diff = r.variance_diff(s.scheme);
        auto rd = r.rmse_diff(s.scheme);
        double mean_rd = 0.0;
        for (double x : rd)
            mean_rd += x;
        json sj;
        sj["median_variance_diff"] = median_of(diff);
        sj["fraction_positive"] = fraction_positive(diff);
        sj["median_relative_reduction"] = median_of(r.relative_reduction(s.scheme));
        sj["mean_rmse_diff"] = rd.empty() ? json(nullptr) : json(mean_rd / static_cast<double>(rd.size()));
        sj["failures"] = s.failures;
        schemes[to_string(s.scheme)] = sj;
    }
    j["schemes"] = schemes;
    j["timings"] = r.timings;
    out << j.dump(2) << '\n';
    return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Resampled experience replay: estimators, diagnostics and experiments",
                 "replay_cli"};
    app.require_subcommand(1);
    std::function<int()> action;

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Write OU trajectories or regression data");
    c_sim->add_option("--kind", sim.kind, "trajectories or regression")
        ->check(CLI::IsMember({"trajectories", "regression"}));
    c_sim->add_option("--n", sim.n, "number of trajectories or points");
    c_sim->add_option("--L", sim.L, "transitions per trajectory");
    c_sim->add_option("--seed", sim.seed);
    c_sim->add_option("--out", sim.out, "output directory")->required();
    c_sim->add_option("--drift", sim.drift);
    c_sim->add_option("--sigma", sim.sigma);
    c_sim->add_option("--dt", sim.dt);
    c_sim->callback([&] { action = [&] { return run_simulate(sim, out); }; });

    EstimateArgs est;
    auto* c_est = app.add_subcommand("estimate", "Run one scheme on a data file");
    c_est->add_option("--data", est.data, "trajectory CSV or regression CSV")
        ->required()
        ->check(CLI::ExistingFile);
    c_est->add_option("--manifest", est.manifest, "trajectory manifest JSON");
    c_est->add_option("--application", est.application, "LSTD, PHIBE1, PHIBE2 or KRR");
    c_est->add_option("--scheme", est.scheme, "FULL, U, V or WEIGHTED");
    c_est->add_option("--B", est.B);
    c_est->add_option("--k", est.k);
    c_est->add_option("--seed", est.seed);
    c_est->add_option("--weighted-mode", est.weighted_mode);
    c_est->add_option("--harmonics", est.harmonics);
    c_est->add_option("--beta", est.beta);
    c_est->add_option("--drift", est.drift);
    c_est->add_option("--sigma", est.sigma);
    c_est->add_option("--gamma", est.gamma);
    c_est->add_option("--features", est.features);
    c_est->add_option("--bandwidth", est.bandwidth);
    c_est->add_option("--ridge", est.ridge);
    c_est->add_option("--threads", est.threads);
    c_est->callback([&] { action = [&] { return run_estimate(est, out); }; });

    ExperimentArgs ex;
    auto* c_ex = app.add_subcommand("experiment", "Run an M-replication study");
    c_ex->add_option("--config", ex.config, "experiment config JSON")->required();
    c_ex->add_option("--out", ex.out, "report directory")->required();
    c_ex->add_option("--threads", ex.threads, "worker threads for replications");
    c_ex->add_flag("--timed", ex.timed, "sequential execution for timing");
    c_ex->callback([&] { action = [&] { return run_experiment_cmd(ex, out); }; });

    ZetaArgs zt;
    auto* c_z = app.add_subcommand("zeta", "Monte Carlo variance component for a scalar problem");
    c_z->add_option("--problem", zt.problem, "mean or ratio");
    c_z->add_option("--c", zt.c);
    c_z->add_option("--k", zt.k);
    c_z->add_option("--reps", zt.reps);
    c_z->add_option("--seed", zt.seed);
    c_z->add_option("--threads", zt.threads);
    c_z->callback([&] { action = [&] { return run_zeta(zt, out); }; });

    BlomArgs bl;
    auto* c_b = app.add_subcommand("blom", "Incomplete-U variance identity check");
    c_b->add_option("--problem", bl.problem, "mean or ratio");
    c_b->add_option("--n", bl.n);
    c_b->add_option("--k", bl.k);
    c_b->add_option("--B", bl.B);
    c_b->add_option("--reps", bl.reps);
    c_b->add_option("--zeta-reps", bl.zeta_reps);
    c_b->add_option("--seed", bl.seed);
    c_b->add_option("--threads", bl.threads);
    c_b->callback([&] { action = [&] { return run_blom(bl, out); }; });

    std::string report_dir;
    auto* c_r = app.add_subcommand("report", "Summarize an emitted report directory");
    c_r->add_option("--dir", report_dir)->required();
    c_r->callback([&] { action = [&] { return run_report(report_dir, out); }; });

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp&)
    {
        out << app.help();
        return kExitOk;
    }
    catch (const CLI::ParseError& e)
    {
        if (argc > 1)
            err << "error: " << e.what() << '\n';
        err << app.help();
        return kExitUsage;
    }

    try
    {
        return action();
    }
    catch (const Error& e)
    {
        err << "error: " << e.what() << '\n';
        return is_validation_error(e) ? kExitUsage : kExitRuntime;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

int cli_main(int argc, const char* const* argv)
{
    return cli_main(argc, argv, std::cout, std::cerr);
}

}  // namespace replay
