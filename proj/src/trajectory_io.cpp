#include "replay/csv.hpp"
#include "replay/policy_eval.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <json.hpp>

namespace replay {

std::vector<std::string> split_csv_line(std::string_view line)
{
    if (!line.empty() && line.back() == '\r')
        line.remove_suffix(1);
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;)
    {
        std::size_t comma = line.find(',', start);
        std::string_view field = line.substr(
            start, comma == std::string_view::npos ? std::string_view::npos
                                                   : comma - start);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t'))
            field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t'))
            field.remove_suffix(1);
        fields.emplace_back(field);
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return fields;
}

bool parse_double(std::string_view text, double& out)
{
    if (text.empty())
        return false;
    if (text.front() == '+')
        text.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

std::string format_double(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_trajectories(const std::string& csv_path,
                        const std::string& manifest_path,
                        std::span<const Trajectory> trajectories)
{
    if (trajectories.empty())
        throw InvalidArgument("write_trajectories: nothing to write");
    std::ofstream csv(csv_path);
    if (!csv)
        throw Error("cannot open " + csv_path + " for writing");
    csv << "traj_id,step,state\n";
    bool same_length = true;
    for (std::size_t t = 0; t < trajectories.size(); ++t)
    {
        const auto& traj = trajectories[t];
        if (traj.dt != trajectories[0].dt)
            throw InvalidArgument("write_trajectories: dt differs between trajectories");
        same_length = same_length && traj.steps() == trajectories[0].steps();
        for (std::size_t j = 0; j < traj.states.size(); ++j)
            csv << t << ',' << j << ',' << format_double(traj.states[j]) << '\n';
    }
    if (!csv)
        throw Error("write failed: " + csv_path);

    nlohmann::json manifest;
    manifest["dt"] = trajectories[0].dt;
    if (same_length)
        manifest["L"] = trajectories[0].steps();
    else
        manifest["L"] = nullptr;
    std::ofstream out(manifest_path);
    if (!out)
        throw Error("cannot open " + manifest_path + " for writing");
    out << manifest.dump(2) << '\n';
}

std::vector<Trajectory> read_trajectories(const std::string& csv_path,
                                          const std::string& manifest_path)
{
    std::ifstream mf(manifest_path);
    if (!mf)
        throw Error("cannot open " + manifest_path);
    nlohmann::json manifest;
    try
    {
        manifest = nlohmann::json::parse(mf);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ParseError(1, std::string("manifest: ") + e.what());
    }
    if (!manifest.contains("dt") || !manifest["dt"].is_number())
        throw ParseError(1, "manifest: missing numeric dt");
    const double dt = manifest["dt"].get<double>();
    if (!(dt > 0.0))
        throw ParseError(1, "manifest: dt must be positive");

    std::ifstream csv(csv_path);
    if (!csv)
        throw Error("cannot open " + csv_path);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(csv, line))
        throw EmptyFile(csv_path + " is empty");
    ++line_no;
    auto header = split_csv_line(line);
    if (header != std::vector<std::string>{"traj_id", "step", "state"})
        throw ParseError(line_no, "expected header traj_id,step,state");

    std::map<long long, Trajectory> by_id;
    while (std::getline(csv, line))
    {
        ++line_no;
        if (line.empty() || line == "\r")
            continue;
        auto fields = split_csv_line(line);
        double id, step, state;
        if (fields.size() != 3 || !parse_double(fields[0], id)
            || !parse_double(fields[1], step) || !parse_double(fields[2], state)
            || id < 0 || step < 0 || id != std::floor(id) || step != std::floor(step)
            || !std::isfinite(state))
        {
            throw ParseError(line_no, "malformed trajectory row");
        }
        auto& traj = by_id[static_cast<long long>(id)];
        traj.dt = dt;
        if (static_cast<std::size_t>(step) != traj.states.size())
            throw ParseError(line_no, "steps must be consecutive from 0");
        traj.states.push_back(state);
    }
    if (by_id.empty())
        throw EmptyFile(csv_path + " has no data rows");

    std::vector<Trajectory> out;
    out.reserve(by_id.size());
    for (auto& [id, traj] : by_id)
        out.push_back(std::move(traj));
    if (manifest.contains("L") && manifest["L"].is_number_integer())
    {
        auto expected = manifest["L"].get<std::size_t>();
        for (const auto& traj : out)
            if (traj.steps() != expected)
                throw ParseError(1, "manifest L does not match trajectory length");
    }
    return out;
}

}  // namespace replay
