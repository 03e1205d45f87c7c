#include "replay/replay_core.hpp"

#include <cmath>

#include "replay/json_io.hpp"

namespace replay {

std::string to_string(Scheme s)
{
    switch (s)
    {
        case Scheme::Full: return "FULL";
        case Scheme::UStat: return "U";
        case Scheme::VStat: return "V";
        case Scheme::Weighted: return "WEIGHTED";
    }
    return "?";
}

Scheme scheme_from_string(const std::string& s)
{
    if (s == "FULL") return Scheme::Full;
    if (s == "U" || s == "U_STAT") return Scheme::UStat;
    if (s == "V" || s == "V_STAT") return Scheme::VStat;
    if (s == "WEIGHTED") return Scheme::Weighted;
    throw InvalidArgument("unknown scheme '" + s + "'");
}

std::string to_string(WeightedMode m)
{
    switch (m)
    {
        case WeightedMode::SelfNormalized: return "self_normalized";
        case WeightedMode::HorvitzThompson: return "horvitz_thompson";
        case WeightedMode::Prioritized: return "prioritized";
    }
    return "?";
}

WeightedMode weighted_mode_from_string(const std::string& s)
{
    if (s == "self_normalized") return WeightedMode::SelfNormalized;
    if (s == "horvitz_thompson") return WeightedMode::HorvitzThompson;
    if (s == "prioritized") return WeightedMode::Prioritized;
    throw InvalidArgument("unknown weighted mode '" + s + "'");
}

bool operator==(const ThetaEstimate& a, const ThetaEstimate& b)
{
    return a.theta.size() == b.theta.size() && a.theta == b.theta
           && a.subsamples_used == b.subsamples_used
           && a.subsamples_skipped == b.subsamples_skipped
           && a.max_condition_flagged == b.max_condition_flagged;
}

SubsamplePlan plan_subsamples(std::size_t n, const ReplayConfig& cfg)
{
    if (cfg.B == 0)
        throw InvalidArgument("replay ratio B must be at least 1");
    if (cfg.k == 0)
        throw InvalidArgument("subsample size k must be at least 1");
    if (cfg.scheme == Scheme::UStat && cfg.k > n)
        throw InvalidArgument("U scheme requires k <= n");

    SubsamplePlan plan;
    plan.subsets.resize(cfg.B);
    plan.weights.assign(cfg.B, 1.0);
    RandomStream root(cfg.seed);

    switch (cfg.scheme)
    {
        case Scheme::Full:
            throw InvalidArgument("plan_subsamples: FULL has no subsamples");
        case Scheme::UStat:
            for (std::size_t j = 0; j < cfg.B; ++j)
            {
                RandomStream s = root.split(j);
                plan.subsets[j] = draw_without_replacement(n, cfg.k, s);
            }
            break;
        case Scheme::VStat:
            for (std::size_t j = 0; j < cfg.B; ++j)
            {
                RandomStream s = root.split(j);
                plan.subsets[j] = draw_with_replacement(n, cfg.k, s);
                std::sort(plan.subsets[j].begin(), plan.subsets[j].end());
            }
            break;
        case Scheme::Weighted:
        {
            validate_weights(cfg.weights, n);
            AliasTable table(cfg.weights);
            const double dn = static_cast<double>(n);
            for (std::size_t j = 0; j < cfg.B; ++j)
            {
                RandomStream s = root.split(j);
                plan.subsets[j] = table.draw(cfg.k, s);
                std::sort(plan.subsets[j].begin(), plan.subsets[j].end());
                if (cfg.weighted_mode == WeightedMode::Prioritized)
                    continue;
                // w_S = Π 1 / (n p_i): likelihood ratio of uniform replay to
                // the weighted proposal.
                double log_w = 0.0;
                for (std::size_t i : plan.subsets[j])
                    log_w -= std::log(dn * table.probability(i));
                plan.weights[j] = std::exp(log_w);
            }
            break;
        }
    }
    return plan;
}

void to_json(nlohmann::json& j, const ThetaEstimate& est)
{
    j = nlohmann::json{{"theta", vector_to_json(est.theta)},
                       {"used", est.subsamples_used},
                       {"skipped", est.subsamples_skipped},
                       {"cond_flag", est.max_condition_flagged}};
}

void from_json(const nlohmann::json& j, ThetaEstimate& est)
{
    est.theta = vector_from_json(j.at("theta"));
    est.subsamples_used = j.at("used").get<std::size_t>();
    est.subsamples_skipped = j.at("skipped").get<std::size_t>();
    est.max_condition_flagged = j.at("cond_flag").get<bool>();
}

nlohmann::json vector_to_json(const Vector& v)
{
    auto arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        arr.push_back(v[i]);
    return arr;
}

Vector vector_from_json(const nlohmann::json& j)
{
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

nlohmann::json matrix_to_json(const Matrix& m)
{
    auto rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        rows.push_back(vector_to_json(m.row(r).transpose()));
    return rows;
}

Matrix matrix_from_json(const nlohmann::json& j)
{
    if (j.empty())
        return Matrix(0, 0);
    Matrix m(static_cast<Eigen::Index>(j.size()),
             static_cast<Eigen::Index>(j[0].size()));
    for (std::size_t r = 0; r < j.size(); ++r)
        m.row(static_cast<Eigen::Index>(r)) = vector_from_json(j[r]).transpose();
    return m;
}

}  // namespace replay
