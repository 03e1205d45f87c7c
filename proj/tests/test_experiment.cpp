#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "replay/environments.hpp"
#include "replay/experiment.hpp"

using namespace replay;
using nlohmann::json;

namespace {

std::filesystem::path temp_dir(const std::string& name)
{
    auto p = std::filesystem::temp_directory_path() / ("replay_exp_" + name);
    std::filesystem::remove_all(p);
    return p;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);)
        out.push_back(line);
    return out;
}

ExperimentConfig small_rl(Application app)
{
    ExperimentConfig c;
    c.application = app;
    c.n = 60;
    c.m = 7;
    c.M = 4;
    c.B = 10;
    c.k_ratio = 0.5;
    c.seed = 3;
    c.presets.harmonics = 1;
    return c;
}

ExperimentConfig small_krr()
{
    ExperimentConfig c;
    c.application = Application::Krr;
    c.n = 40;
    c.m = 5;
    c.M = 4;
    c.B = 8;
    c.k = 10;
    c.k_ratio.reset();
    c.seed = 5;
    c.presets.features = 32;
    return c;
}

}  // namespace

TEST_CASE("five-number summaries")
{
    std::vector<double> five = {5, 3, 1, 4, 2};
    CHECK(summarize_boxplot(five) == FiveNumber{1, 2, 3, 4, 5});
    std::vector<double> four = {4, 1, 3, 2};
    FiveNumber f = summarize_boxplot(four);
    CHECK(f.q1 == doctest::Approx(1.75));
    CHECK(f.median == doctest::Approx(2.5));
    CHECK(f.q3 == doctest::Approx(3.25));
    std::vector<double> same(6, 0.3);
    CHECK(summarize_boxplot(same) == FiveNumber{0.3, 0.3, 0.3, 0.3, 0.3});
    CHECK_THROWS(summarize_boxplot(std::vector<double>{}));

    std::vector<double> sorted = {0, 10};
    CHECK(quantile_sorted(sorted, 0.025) == doctest::Approx(0.25));
    CHECK(median_of({3, std::nan(""), 1, 2}) == 2.0);
    std::vector<double> mixed = {1, -1, 2, 0};
    CHECK(fraction_positive(mixed) == 0.5);
}

TEST_CASE("config JSON: defaults, round-trip and rejection")
{
    ExperimentConfig d;
    CHECK(d.subsample_size() == 150);
    CHECK(d.gamma() == std::exp(-0.1));
    CHECK(d.ridge() == 0.0);
    CHECK(d.bandwidth() == doctest::Approx(std::sqrt(2.0)));
    ExperimentConfig k = small_krr();
    CHECK(k.ridge() == doctest::Approx(std::pow(40.0, -2.0 / 3)));

    json j = config_to_json(k);
    CHECK(j["presets"]["ridge"] == "auto");
    CHECK(config_from_json(j) == k);

    ExperimentConfig r = small_rl(Application::Phibe2);
    r.presets.gamma = 0.5;
    r.presets.ridge = 1e-3;
    r.schemes = {Scheme::Full, Scheme::Weighted};
    r.weight_rule = WeightRule::AbsTarget;
    r.weighted_mode = WeightedMode::HorvitzThompson;
    CHECK(config_from_json(config_to_json(r)) == r);

    json minimal = {{"schema_version", 1}, {"application", "KRR"}, {"n", 100}, {"k", 10}};
    ExperimentConfig mc = config_from_json(minimal);
    CHECK(mc.subsample_size() == 10);
    CHECK(!mc.k_ratio);

    json unknown = minimal;
    unknown["bogus"] = 1;
    CHECK_THROWS_AS(config_from_json(unknown), ConfigError);
    json no_version = minimal;
    no_version.erase("schema_version");
    CHECK_THROWS_AS(config_from_json(no_version), ConfigError);
    json wrong_version = minimal;
    wrong_version["schema_version"] = 2;
    CHECK_THROWS_AS(config_from_json(wrong_version), ConfigError);
    json both = minimal;
    both["k_ratio"] = 0.2;
    CHECK_THROWS_AS(config_from_json(both), ConfigError);
    json bad_preset = minimal;
    bad_preset["presets"] = {{"nope", 1}};
    CHECK_THROWS_AS(config_from_json(bad_preset), ConfigError);
}

TEST_CASE("config validation")
{
    auto bad = [](auto mutate) {
        ExperimentConfig c = small_rl(Application::Lstd);
        mutate(c);
        CHECK_THROWS_AS(c.validate(), ConfigError);
    };
    bad([](ExperimentConfig& c) { c.M = 1; });
    bad([](ExperimentConfig& c) { c.m = 0; });
    bad([](ExperimentConfig& c) { c.k_ratio = 1.5; });
    bad([](ExperimentConfig& c) { c.k = 1000; c.k_ratio.reset(); });
    bad([](ExperimentConfig& c) { c.schemes = {Scheme::UStat}; });
    bad([](ExperimentConfig& c) { c.schemes = {Scheme::Full, Scheme::UStat, Scheme::UStat}; });
    bad([](ExperimentConfig& c) { c.B = 0; });
    bad([](ExperimentConfig& c) { c.presets.gamma = 1.0; });
    bad([](ExperimentConfig& c) { c.presets.dt = 0.0; });
    bad([](ExperimentConfig& c) {
        c.application = Application::Phibe2;
        c.L = 1;
    });
    bad([](ExperimentConfig& c) {
        c.application = Application::Krr;
        c.presets.krr_solver = KrrSolver::Exact;
        c.n = 3000;
    });
    CHECK_NOTHROW(small_rl(Application::Lstd).validate());
}

TEST_CASE("frozen replications give zero variance")
{
    for (auto app : {Application::Lstd, Application::Phibe1, Application::Krr})
    {
        ExperimentConfig c = app == Application::Krr ? small_krr() : small_rl(app);
        c.M = 2;
        c.freeze_replications = true;
        ExperimentReport r = run_experiment(c);
        CHECK(r.kept_replications == 2);
        for (const auto& s : r.series)
            for (double v : s.variance)
                CHECK(v == 0.0);
    }
}

TEST_CASE("two-replication variance equals (v - w)²/2")
{
    ExperimentConfig c = small_rl(Application::Lstd);
    c.M = 2;
    ExperimentReport r = run_experiment(c);
    REQUIRE(r.kept_replications == 2);

    // Rebuild FULL predictions directly from the documented seed layout.
    FourierBasis basis(c.presets.harmonics);
    RewardParams rp{c.presets.drift, c.presets.sigma, c.presets.beta, c.presets.dt};
    auto m = lstd_moments(basis, std::exp(-c.presets.dt),
                          [rp](double s) { return reward_mdp(s, rp); });
    auto grid = mdp_test_grid(c.m);
    std::vector<std::vector<double>> preds(2);
    std::vector<double> rmse(2);
    for (std::size_t rep = 0; rep < 2; ++rep)
    {
        auto ts = sample_trajectories(OuSpec{c.presets.drift, c.presets.sigma, c.presets.dt},
                                      InitSpec{}, c.n, c.L, derive_seed(c.seed, {1, rep}));
        Vector theta = estimate_full(ReplayBuffer<Trajectory>(std::move(ts)), m).theta;
        double sq = 0;
        for (double s : grid)
        {
            double v = value_predict(theta, basis, s);
            preds[rep].push_back(v);
            sq += (v - true_value(s)) * (v - true_value(s));
        }
        rmse[rep] = std::sqrt(sq / double(c.m));
    }
    const SchemeSeries& full = r.get(Scheme::Full);
    for (std::size_t j = 0; j < c.m; ++j)
    {
        double d = preds[0][j] - preds[1][j];
        double scale = std::max(1.0, d * d);
        CHECK(std::abs(full.variance[j] - d * d / 2) <= 1e-9 * scale);
        CHECK(full.mean[j] == doctest::Approx((preds[0][j] + preds[1][j]) / 2).epsilon(1e-10));
        CHECK(r.truth[j] == true_value(grid[j]));
    }
    CHECK(*full.rmse[0] == doctest::Approx(rmse[0]).epsilon(1e-10));
    CHECK(*full.rmse[1] == doctest::Approx(rmse[1]).epsilon(1e-10));
}

TEST_CASE("confidence bands")
{
    ExperimentConfig c = small_rl(Application::Phibe2);
    c.M = 6;
    ExperimentReport r = run_experiment(c);
    for (const auto& s : r.series)
        for (std::size_t j = 0; j < c.m; ++j)
        {
            double half = 1.96 * std::sqrt(s.variance[j] / double(r.kept_replications));
            CHECK(s.ci_normal_low[j] == doctest::Approx(s.mean[j] - half).epsilon(1e-12));
            CHECK(s.ci_normal_high[j] == doctest::Approx(s.mean[j] + half).epsilon(1e-12));
            CHECK(s.pct_low[j] <= s.pct_high[j]);
        }
}

TEST_CASE("report derived quantities")
{
    ExperimentReport r;
    r.series.resize(2);
    r.series[0].scheme = Scheme::Full;
    r.series[0].variance = {4, 2};
    r.series[0].rmse = {1.0, 2.0, std::nullopt};
    r.series[1].scheme = Scheme::UStat;
    r.series[1].variance = {1, 3};
    r.series[1].rmse = {0.5, std::nullopt, 1.0};
    CHECK(r.variance_diff(Scheme::UStat) == std::vector<double>{3, -1});
    CHECK(r.relative_reduction(Scheme::UStat) == std::vector<double>{0.75, -0.5});
    CHECK(r.rmse_diff(Scheme::UStat) == std::vector<double>{0.5});
    CHECK_THROWS(r.get(Scheme::VStat));
}

TEST_CASE("reports are reproducible across runs and thread counts")
{
    for (auto app : {Application::Lstd, Application::Phibe2, Application::Krr})
    {
        ExperimentConfig c = app == Application::Krr ? small_krr() : small_rl(app);
        c.schemes = {Scheme::Full, Scheme::UStat, Scheme::VStat, Scheme::Weighted};
        c.threads = 1;
        ExperimentReport a = run_experiment(c);
        c.threads = 4;
        ExperimentReport b = run_experiment(c);
        CHECK(report_to_json(a).dump() == report_to_json(b).dump());
        c.threads = 1;
        CHECK(report_to_json(run_experiment(c)).dump() == report_to_json(a).dump());
    }
}

TEST_CASE("adding a scheme leaves the others untouched")
{
    ExperimentConfig c = small_rl(Application::Phibe1);
    c.schemes = {Scheme::Full, Scheme::VStat};
    ExperimentReport a = run_experiment(c);
    c.schemes = {Scheme::Full, Scheme::UStat, Scheme::VStat};
    ExperimentReport b = run_experiment(c);
    CHECK(a.get(Scheme::VStat) == b.get(Scheme::VStat));
    CHECK(a.get(Scheme::Full) == b.get(Scheme::Full));
}

TEST_CASE("emit and load")
{
    ExperimentConfig c = small_krr();
    c.timed = true;
    ExperimentReport r = run_experiment(c);
    CHECK(r.timings.count("FULL"));
    CHECK(r.timings.count("EXACT"));
    auto dir = temp_dir("emit");
    emit_report(r, dir.string());
    for (const char* f : {"report.json", "variance_diffs.csv", "rmse.csv", "timings.csv",
                          "boxplot.csv", "bands.csv"})
        CHECK(std::filesystem::exists(dir / f));

    ExperimentReport back = load_report(dir.string());
    CHECK(back.config == r.config);
    CHECK(back.series == r.series);
    CHECK(back.truth == r.truth);
    CHECK(back.test_points == r.test_points);
    CHECK(back.timings == r.timings);
    CHECK(back == r);

    auto vd = lines_of(dir / "variance_diffs.csv");
    CHECK(vd.size() == c.m + 1);
    CHECK(vd[0] == "test_index,var_full,var_u,var_v,diff_u,diff_v");
    auto rm = lines_of(dir / "rmse.csv");
    CHECK(rm[0] == "rep,rmse_full,rmse_u,rmse_v");
    CHECK(rm.size() == r.kept_replications + 1);
    auto bx = lines_of(dir / "boxplot.csv");
    CHECK(bx[0] == "series,min,q1,median,q3,max");
    CHECK(lines_of(dir / "timings.csv")[0] == "scheme,seconds");

    // 17 significant digits survive a text round trip.
    std::string cell = vd[1].substr(vd[1].find(',') + 1);
    cell = cell.substr(0, cell.find(','));
    CHECK(std::stod(cell) == r.get(Scheme::Full).variance[0]);
    std::filesystem::remove_all(dir);
}

TEST_CASE("absent schemes drop their columns")
{
    ExperimentConfig c = small_rl(Application::Lstd);
    c.schemes = {Scheme::Full, Scheme::VStat};
    auto dir = temp_dir("absent");
    emit_report(run_experiment(c), dir.string());
    CHECK(lines_of(dir / "variance_diffs.csv")[0] == "test_index,var_full,var_v,diff_v");
    CHECK(lines_of(dir / "rmse.csv")[0] == "rep,rmse_full,rmse_v");

    c.schemes = {Scheme::Full};
    emit_report(run_experiment(c), dir.string());
    CHECK(lines_of(dir / "variance_diffs.csv")[0] == "test_index,var_full");
    CHECK(lines_of(dir / "boxplot.csv").size() == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("report.json does not depend on timing or thread settings")
{
    ExperimentConfig c = small_krr();
    auto d1 = temp_dir("rep1"), d2 = temp_dir("rep2");
    emit_report(run_experiment(c), d1.string());
    c.threads = 3;
    emit_report(run_experiment(c), d2.string());
    CHECK(slurp(d1 / "report.json") == slurp(d2 / "report.json"));
    CHECK(load_report(d2.string()).config.threads == 1);
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}

TEST_CASE("load_report errors")
{
    auto dir = temp_dir("broken");
    std::filesystem::create_directories(dir);
    CHECK_THROWS(load_report(dir.string()));
    {
        std::ofstream out(dir / "report.json");
        out << "{not json";
    }
    CHECK_THROWS_AS(load_report(dir.string()), ConfigError);
    {
        std::ofstream out(dir / "report.json");
        out << "{\"config\": {}}";
    }
    CHECK_THROWS_AS(load_report(dir.string()), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("exact KRR mode and RMSE of a perfect fit")
{
    ExperimentConfig c = small_krr();
    c.presets.krr_solver = KrrSolver::Exact;
    c.k = 40;
    c.schemes = {Scheme::Full, Scheme::UStat};
    c.B = 3;
    ExperimentReport r = run_experiment(c);
    // k = n makes every U subsample the full buffer.
    const auto& full = r.get(Scheme::Full);
    const auto& u = r.get(Scheme::UStat);
    for (std::size_t j = 0; j < c.m; ++j)
        CHECK(std::abs(full.mean[j] - u.mean[j]) <= 1e-10 * std::max(1.0, std::abs(full.mean[j])));
    for (std::size_t i = 0; i < r.kept_replications; ++i)
        CHECK(*full.rmse[i] >= 0.0);
}
