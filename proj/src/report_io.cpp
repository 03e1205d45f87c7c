#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "replay/csv.hpp"
#include "replay/errors.hpp"
#include "replay/experiment.hpp"

namespace replay {

using nlohmann::json;

namespace {

// NaN has no JSON spelling; it travels as null.
json number(double x)
{
    return std::isfinite(x) ? json(x) : json(nullptr);
}

json numbers(const std::vector<double>& v)
{
    json a = json::array();
    for (double x : v)
        a.push_back(number(x));
    return a;
}

double read_number(const json& j)
{
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::vector<double> read_numbers(const json& j)
{
    std::vector<double> v;
    v.reserve(j.size());
    for (const auto& x : j)
        v.push_back(read_number(x));
    return v;
}

const char* short_name(Scheme s)
{
    switch (s)
    {
        case Scheme::Full: return "full";
        case Scheme::UStat: return "u";
        case Scheme::VStat: return "v";
        case Scheme::Weighted: return "w";
    }
    return "?";
}

std::vector<double> finite_only(std::vector<double> v)
{
    std::erase_if(v, [](double x) { return !std::isfinite(x); });
    return v;
}

json five_json(const FiveNumber& f)
{
    return {{"min", f.min}, {"q1", f.q1}, {"median", f.median}, {"q3", f.q3}, {"max", f.max}};
}

std::ofstream open_out(const std::filesystem::path& p)
{
    std::ofstream out(p);
    if (!out)
        throw Error("cannot write '" + p.string() + "'");
    return out;
}

// Boxplot rows: variance differences and RMSE differences per replay scheme.
std::vector<std::pair<std::string, std::vector<double>>>
boxplot_inputs(const ExperimentReport& r)
{
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    for (const auto& ser : r.series)
    {
        if (ser.scheme == Scheme::Full)
            continue;
        rows.emplace_back(std::string("diff_") + short_name(ser.scheme),
                          finite_only(r.variance_diff(ser.scheme)));
    }
    for (const auto& ser : r.series)
    {
        if (ser.scheme == Scheme::Full)
            continue;
        rows.emplace_back(std::string("rmse_diff_") + short_name(ser.scheme),
                          finite_only(r.rmse_diff(ser.scheme)));
    }
    return rows;
}

}  // namespace

json report_to_json(const ExperimentReport& r)
{
    json j;
    // The worker count does not affect any number in the report, and leaving
    // it out keeps report.json identical across thread counts.
    j["config"] = config_to_json(r.config);
    j["config"].erase("threads");
    j["test_points"] = json::array();
    for (const auto& p : r.test_points)
        j["test_points"].push_back(numbers(p));
    j["truth"] = numbers(r.truth);
    j["kept_replications"] = r.kept_replications;
    j["dropped_replications"] = r.dropped_replications;
    j["series"] = json::array();
    for (const auto& s : r.series)
    {
        json sj;
        sj["scheme"] = to_string(s.scheme);
        sj["variance"] = numbers(s.variance);
        sj["mean"] = numbers(s.mean);
        sj["ci_normal_low"] = numbers(s.ci_normal_low);
        sj["ci_normal_high"] = numbers(s.ci_normal_high);
        sj["pct_low"] = numbers(s.pct_low);
        sj["pct_high"] = numbers(s.pct_high);
        json rm = json::array();
        for (const auto& x : s.rmse)
            rm.push_back(x ? number(*x) : json(nullptr));
        sj["rmse"] = rm;
        sj["failures"] = s.failures;
        sj["skipped_subsamples"] = s.skipped_subsamples;
        j["series"].push_back(sj);
    }
    // Derived views for readers that do not want to recompute them.
    json diffs = json::object();
    for (const auto& s : r.series)
        if (s.scheme != Scheme::Full)
            diffs[to_string(s.scheme)] = numbers(r.variance_diff(s.scheme));
    j["variance_diffs"] = diffs;
    json box = json::object();
    for (const auto& [name, values] : boxplot_inputs(r))
        if (!values.empty())
            box[name] = five_json(summarize_boxplot(values));
    j["boxplots"] = box;
    return j;
}

ExperimentReport report_from_json(const json& j)
{
    try
    {
        ExperimentReport r;
        r.config = config_from_json(j.at("config"));
        for (const auto& p : j.at("test_points"))
            r.test_points.push_back(read_numbers(p));
        r.truth = read_numbers(j.at("truth"));
        r.kept_replications = j.at("kept_replications").get<std::size_t>();
        r.dropped_replications = j.at("dropped_replications").get<std::size_t>();
        for (const auto& sj : j.at("series"))
        {
            SchemeSeries s;
            s.scheme = scheme_from_string(sj.at("scheme").get<std::string>());
            s.variance = read_numbers(sj.at("variance"));
            s.mean = read_numbers(sj.at("mean"));
            s.ci_normal_low = read_numbers(sj.at("ci_normal_low"));
            s.ci_normal_high = read_numbers(sj.at("ci_normal_high"));
            s.pct_low = read_numbers(sj.at("pct_low"));
            s.pct_high = read_numbers(sj.at("pct_high"));
            for (const auto& x : sj.at("rmse"))
                s.rmse.push_back(x.is_null() ? std::nullopt
                                             : std::optional<double>(x.get<double>()));
            s.failures = sj.at("failures").get<std::size_t>();
            s.skipped_subsamples = sj.at("skipped_subsamples").get<std::size_t>();
            r.series.push_back(std::move(s));
        }
        return r;
    }
    catch (const json::exception& e)
    {
        throw ConfigError(std::string("malformed report: ") + e.what());
    }
}

void emit_report(const ExperimentReport& r, const std::string& dir)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Error("cannot create '" + dir + "': " + ec.message());
    const fs::path base(dir);

    {
        auto out = open_out(base / "report.json");
        out << report_to_json(r).dump(2) << '\n';
    }

    const SchemeSeries& full = r.get(Scheme::Full);
    std::vector<const SchemeSeries*> others;
    for (const auto& s : r.series)
        if (s.scheme != Scheme::Full)
            others.push_back(&s);
    std::sort(others.begin(), others.end(),
              [](auto* a, auto* b) { return a->scheme < b->scheme; });

    {
        auto out = open_out(base / "variance_diffs.csv");
        // var_* columns first, then diff_*, in u, v, w order.
        out << "test_index,var_full";
        std::vector<std::vector<double>> diffs;
        for (auto* s : others)
        {
            out << ",var_" << short_name(s->scheme);
            diffs.push_back(r.variance_diff(s->scheme));
        }
        for (auto* s : others)
            out << ",diff_" << short_name(s->scheme);
        out << '\n';
        for (std::size_t j = 0; j < full.variance.size(); ++j)
        {
            out << j << ',' << format_double(full.variance[j]);
            for (auto* s : others)
                out << ',' << format_double(s->variance[j]);
            for (const auto& d : diffs)
                out << ',' << format_double(d[j]);
            out << '\n';
        }
    }

    {
        auto out = open_out(base / "rmse.csv");
        out << "rep,rmse_full";
        for (auto* s : others)
            out << ",rmse_" << short_name(s->scheme);
        out << '\n';
        for (std::size_t i = 0; i < full.rmse.size(); ++i)
        {
            out << i << ',' << (full.rmse[i] ? format_double(*full.rmse[i]) : "");
            for (auto* s : others)
                out << ',' << (s->rmse[i] ? format_double(*s->rmse[i]) : "");
            out << '\n';
        }
    }

    {
        auto out = open_out(base / "timings.csv");
        out << "scheme,seconds\n";
        for (const auto& [name, secs] : r.timings)
            out << name << ',' << format_double(secs) << '\n';
    }

    {
        auto out = open_out(base / "boxplot.csv");
        out << "series,min,q1,median,q3,max\n";
        for (const auto& [name, values] : boxplot_inputs(r))
        {
            if (values.empty())
                continue;
            FiveNumber f = summarize_boxplot(values);
            out << name << ',' << format_double(f.min) << ',' << format_double(f.q1) << ','
                << format_double(f.median) << ',' << format_double(f.q3) << ','
                << format_double(f.max) << '\n';
        }
    }

    {
        auto out = open_out(base / "bands.csv");
        out << "test_index,scheme,truth,mean,ci_normal_low,ci_normal_high,pct_low,pct_high\n";
        for (const auto& s : r.series)
            for (std::size_t j = 0; j < s.mean.size(); ++j)
                out << j << ',' << to_string(s.scheme) << ',' << format_double(r.truth[j])
                    << ',' << format_double(s.mean[j]) << ','
                    << format_double(s.ci_normal_low[j]) << ','
                    << format_double(s.ci_normal_high[j]) << ','
                    << format_double(s.pct_low[j]) << ',' << format_double(s.pct_high[j])
                    << '\n';
    }
}

ExperimentReport load_report(const std::string& dir)
{
    namespace fs = std::filesystem;
    const fs::path base(dir);
    std::ifstream in(base / "report.json");
    if (!in)
        throw Error("cannot read '" + (base / "report.json").string() + "'");
    json j;
    try
    {
        in >> j;
    }
    catch (const json::exception& e)
    {
        throw ConfigError(std::string("report.json is not valid JSON: ") + e.what());
    }
    ExperimentReport r = report_from_json(j);

    std::ifstream tin(base / "timings.csv");
    if (tin)
    {
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(tin, line))
        {
            ++lineno;
            if (lineno == 1 || line.empty())
                continue;
            auto cells = split_csv_line(line);
            double secs = 0.0;
            if (cells.size() != 2 || !parse_double(cells[1], secs))
                throw ParseError(lineno, "timings.csv: malformed row");
            r.timings[cells[0]] = secs;
        }
    }
    return r;
}

}  // namespace replay
