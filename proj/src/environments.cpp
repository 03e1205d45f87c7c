#include "replay/environments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "replay/csv.hpp"

namespace replay {

GaussianParams ou_transition_params(const OuSpec& spec, double s)
{
    if (!(spec.dt > 0.0) || !(spec.sigma >= 0.0))
        throw InvalidArgument("OuSpec: need dt > 0 and sigma >= 0");
    const double a = spec.drift * spec.dt;
    GaussianParams out;
    out.mean = s * std::exp(a);
    const double s2 = spec.sigma * spec.sigma;
    if (spec.drift == 0.0)
        out.variance = s2 * spec.dt;
    else
        out.variance = s2 * std::expm1(2.0 * a) / (2.0 * spec.drift);
    return out;
}

double sample_truncated_normal(const InitSpec& init, RandomStream& rng)
{
    if (!(init.lo < init.hi))
        throw InvalidArgument("InitSpec: empty support");
    if (init.sd == 0.0)
        return std::clamp(init.mean, init.lo, init.hi);
    for (;;)
    {
        double x = init.mean + init.sd * rng.normal();
        if (x >= init.lo && x <= init.hi)
            return x;
    }
}

std::vector<Trajectory> sample_trajectories(const OuSpec& spec,
                                            const InitSpec& init, std::size_t n,
                                            std::size_t L, std::uint64_t seed)
{
    if (n < 1 || L < 1)
        throw InvalidArgument("sample_trajectories: need n >= 1 and L >= 1");
    RandomStream root(seed);
    std::vector<Trajectory> out(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        RandomStream rng = root.split(i);
        Trajectory& traj = out[i];
        traj.dt = spec.dt;
        traj.states.resize(L + 1);
        traj.states[0] = sample_truncated_normal(init, rng);
        for (std::size_t j = 0; j < L; ++j)
        {
            GaussianParams step = ou_transition_params(spec, traj.states[j]);
            traj.states[j + 1] = step.mean + std::sqrt(step.variance) * rng.normal();
        }
    }
    return out;
}

double reward_cont(double s, const RewardParams& p)
{
    const double c = std::cos(s);
    const double sn = std::sin(s);
    return p.beta * c * c * c - p.drift * s * (-3.0 * c * c * sn)
           - 0.5 * p.sigma * p.sigma * (6.0 * c * sn * sn - 3.0 * c * c * c);
}

double reward_mdp(double s, const RewardParams& p)
{
    return p.dt * reward_cont(s, p);
}

double true_value(double s)
{
    const double c = std::cos(s);
    return c * c * c;
}

double mdp_discount(const RewardParams& p)
{
    return std::exp(-p.dt);
}

double regression_surface(double x1, double x2)
{
    const double a1 = x1 - 0.25, a2 = x2 - 0.25;
    const double b1 = x1 - 0.7, b2 = x2 - 0.7;
    return std::exp(10.0 * (-a1 * a1 - a2 * a2))
           + 0.5 * std::exp(14.0 * (-b1 * b1 - b2 * b2));
}

std::vector<LabeledPoint> sample_regression(const RegressionSpec& spec,
                                            std::size_t n, std::uint64_t seed)
{
    if (n < 1)
        throw InvalidArgument("sample_regression: need n >= 1");
    if (spec.p != 2)
        throw InvalidArgument("sample_regression: the surface has two predictors");
    RandomStream root(seed);
    std::vector<LabeledPoint> out(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        RandomStream rng = root.split(i);
        Vector x(2);
        x[0] = rng.uniform();
        x[1] = rng.uniform();
        double noise = spec.noise_sd * rng.normal();
        out[i] = {x, regression_surface(x[0], x[1]) + noise};
    }
    return out;
}

std::vector<double> mdp_test_grid(std::size_t m)
{
    if (m < 2)
        throw InvalidArgument("mdp_test_grid: need m >= 2");
    std::vector<double> grid(m);
    for (std::size_t j = 0; j < m; ++j)
    {
        grid[j] = -std::numbers::pi
                  + 2.0 * static_cast<double>(j) * std::numbers::pi
                        / static_cast<double>(m - 1);
    }
    return grid;
}

std::vector<LabeledPoint> ingest_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw EmptyFile(path + " is empty");
    const std::size_t columns = split_csv_line(line).size();
    if (columns < 2)
        throw ParseError(1, "need at least one predictor and a response");

    std::vector<LabeledPoint> out;
    std::size_t line_no = 1;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty() || line == "\r")
            continue;
        auto fields = split_csv_line(line);
        if (fields.size() != columns)
        {
            throw ParseError(line_no, "expected " + std::to_string(columns)
                                          + " fields, found "
                                          + std::to_string(fields.size()));
        }
        LabeledPoint pt;
        pt.x = Vector(static_cast<Eigen::Index>(columns - 1));
        for (std::size_t c = 0; c < columns; ++c)
        {
            double v;
            if (!parse_double(fields[c], v) || !std::isfinite(v))
            {
                throw ParseError(line_no, "non-numeric field '" + fields[c]
                                              + "' in column "
                                              + std::to_string(c + 1));
            }
            if (c + 1 == columns)
                pt.y = v;
            else
                pt.x[static_cast<Eigen::Index>(c)] = v;
        }
        out.push_back(std::move(pt));
    }
    if (out.empty())
        throw EmptyFile(path + " has a header but no data rows");
    return out;
}

void write_regression_csv(const std::string& path,
                          const std::vector<LabeledPoint>& points)
{
    if (points.empty())
        throw InvalidArgument("write_regression_csv: nothing to write");
    std::ofstream out(path);
    if (!out)
        throw Error("cannot open " + path + " for writing");
    const Eigen::Index p = points[0].x.size();
    for (Eigen::Index d = 0; d < p; ++d)
        out << 'x' << (d + 1) << ',';
    out << "y\n";
    for (const auto& pt : points)
    {
        for (Eigen::Index d = 0; d < p; ++d)
            out << format_double(pt.x[d]) << ',';
        out << format_double(pt.y) << '\n';
    }
}

}  // namespace replay
