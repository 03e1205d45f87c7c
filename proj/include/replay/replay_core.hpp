#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "replay/errors.hpp"
#include "replay/linalg.hpp"
#include "replay/parallel.hpp"
#include "replay/rng.hpp"
#include "replay/sampling.hpp"

namespace replay {

//---------------------------------------------------------------------------//
// Buffer
//---------------------------------------------------------------------------//

template <class Payload>
struct Experience
{
    std::size_t id;
    Payload payload;
};

// Insertion-ordered store of experiences. Payloads are read-only once added.
template <class Payload>
class ReplayBuffer
{
  public:
    using value_type = Experience<Payload>;

    ReplayBuffer() = default;
    explicit ReplayBuffer(std::vector<Payload> payloads)
    {
        items_.reserve(payloads.size());
        for (auto& p : payloads)
            push(std::move(p));
    }

    std::size_t push(Payload p)
    {
        std::size_t id = items_.size();
        items_.push_back({id, std::move(p)});
        return id;
    }

    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    const Experience<Payload>& operator[](std::size_t i) const { return items_[i]; }
    const Payload& payload(std::size_t i) const { return items_[i].payload; }

    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

  private:
    std::vector<Experience<Payload>> items_;
};

//---------------------------------------------------------------------------//
// Problem definition
//---------------------------------------------------------------------------//

/*!
 * The pair (g, f) defining θ = [E g(Z)]^{-1} E f(Z), plus a ridge λ that is
 * added once to every accumulated system.
 *
 * `accumulate` and `rank_one` are optional fast paths. When set they must
 * agree with g and f: accumulate adds g(z) and f(z) into its arguments;
 * rank_one returns (u, y) with g(z) = u uᵀ and f(z) = u y.
 */
template <class Payload>
struct MomentMap
{
    Eigen::Index q = 0;
    double ridge = 0.0;
    std::function<Matrix(const Payload&)> g;
    std::function<Vector(const Payload&)> f;
    std::function<void(const Payload&, Matrix&, Vector&)> accumulate;
    std::function<std::pair<Vector, double>(const Payload&)> rank_one;

    void add_to(const Payload& z, Matrix& gsum, Vector& fsum) const
    {
        if (accumulate)
        {
            accumulate(z, gsum, fsum);
            return;
        }
        Matrix gz = g(z);
        Vector fz = f(z);
        if (gz.rows() != gsum.rows() || gz.cols() != gsum.cols() || fz.size() != fsum.size())
            throw DimensionMismatch("MomentMap output does not match q");
        gsum += gz;
        fsum += fz;
    }
};

//---------------------------------------------------------------------------//
// Configuration and result
//---------------------------------------------------------------------------//

enum class Scheme
{
    Full,
    UStat,
    VStat,
    Weighted
};

enum class WeightedMode
{
    // Σ w_S h_S / Σ w_S with importance weights toward uniform replay.
    SelfNormalized,
    // (1/B) Σ w_S h_S.
    HorvitzThompson,
    // Plain average over weighted draws (prioritized replay, no correction).
    Prioritized
};

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);
std::string to_string(WeightedMode m);
WeightedMode weighted_mode_from_string(const std::string& s);

struct ReplayConfig
{
    Scheme scheme = Scheme::Full;
    std::size_t B = 1;
    std::size_t k = 1;
    std::uint64_t seed = 0;
    std::vector<double> weights;
    WeightedMode weighted_mode = WeightedMode::SelfNormalized;
    unsigned threads = 1;
};

struct ThetaEstimate
{
    Vector theta;
    std::size_t subsamples_used = 0;
    std::size_t subsamples_skipped = 0;
    bool max_condition_flagged = false;
};

bool operator==(const ThetaEstimate& a, const ThetaEstimate& b);

//---------------------------------------------------------------------------//
// Subset solver
//---------------------------------------------------------------------------//

namespace detail {

// Per-item moments are cached when n·q² stays below this many doubles.
inline constexpr std::size_t kMomentCacheBudget = std::size_t{1} << 23;

// Solves [Σ_{i∈S} g(Z_i) + λI] x = Σ_{i∈S} f(Z_i) for index multisets S of a
// fixed buffer. Shared read-only across threads once constructed.
template <class Payload>
class SubsetSolver
{
  public:
    SubsetSolver(const ReplayBuffer<Payload>& buffer, const MomentMap<Payload>& m)
        : buffer_(buffer), map_(m)
    {
        if (m.q <= 0)
            throw InvalidArgument("MomentMap: q must be positive");
        if (!(m.ridge >= 0.0))
            throw InvalidArgument("MomentMap: ridge must be nonnegative");
        const std::size_t n = buffer.size();
        const auto q = static_cast<std::size_t>(m.q);
        if (m.rank_one)
        {
            factors_ = Matrix(static_cast<Eigen::Index>(n), m.q);
            targets_ = Vector(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i)
            {
                auto [u, y] = m.rank_one(buffer.payload(i));
                check_dims(u.size());
                factors_.row(static_cast<Eigen::Index>(i)) = u.transpose();
                targets_[static_cast<Eigen::Index>(i)] = y;
            }
        }
        else if (n * q * q <= kMomentCacheBudget)
        {
            g_cache_.reserve(n);
            f_cache_.reserve(n);
            for (std::size_t i = 0; i < n; ++i)
            {
                Matrix gi = Matrix::Zero(m.q, m.q);
                Vector fi = Vector::Zero(m.q);
                m.add_to(buffer.payload(i), gi, fi);
                check_dims(fi.size(), gi.rows(), gi.cols());
                g_cache_.push_back(std::move(gi));
                f_cache_.push_back(std::move(fi));
            }
        }
    }

    // `sorted` must be in ascending order so the summation order, and hence
    // the result, does not depend on how the subset was listed.
    std::optional<SolveOutcome> solve(std::span<const std::size_t> sorted) const
    {
        const Eigen::Index q = map_.q;
        const auto k = static_cast<Eigen::Index>(sorted.size());
        if (k == 0)
            throw InvalidArgument("eval_h_k: subset must be nonempty");

        if (factors_.size() > 0 && map_.ridge > 0.0 && k < q)
            return solve_dual(sorted);

        Matrix gsum = Matrix::Zero(q, q);
        Vector fsum = Vector::Zero(q);
        if (factors_.size() > 0)
        {
            Matrix u(k, q);
            Vector y(k);
            gather(sorted, u, y);
            gsum.noalias() = u.transpose() * u;
            fsum.noalias() = u.transpose() * y;
        }
        else if (!g_cache_.empty())
        {
            for (std::size_t i : sorted)
            {
                gsum += g_cache_[i];
                fsum += f_cache_[i];
            }
        }
        else
        {
            for (std::size_t i : sorted)
                map_.add_to(buffer_.payload(i), gsum, fsum);
            check_dims(fsum.size(), gsum.rows(), gsum.cols());
        }
        double scale = std::abs(gsum.trace());
        if (map_.ridge > 0.0)
            gsum.diagonal().array() += map_.ridge;
        SolveOutcome out;
        if (!solve_with_jitter(gsum, fsum, scale, out))
            return std::nullopt;
        return out;
    }

  private:
    void check_dims(Eigen::Index fq, Eigen::Index gr = -1, Eigen::Index gc = -1) const
    {
        if (fq != map_.q || (gr >= 0 && (gr != map_.q || gc != map_.q)))
            throw DimensionMismatch("MomentMap output does not match q");
    }

    void gather(std::span<const std::size_t> idx, Matrix& u, Vector& y) const
    {
        for (std::size_t r = 0; r < idx.size(); ++r)
        {
            u.row(static_cast<Eigen::Index>(r)) =
                factors_.row(static_cast<Eigen::Index>(idx[r]));
            y[static_cast<Eigen::Index>(r)] =
                targets_[static_cast<Eigen::Index>(idx[r])];
        }
    }

    // (UᵀU + λI)^{-1} Uᵀy = Uᵀ (UUᵀ + λI)^{-1} y, a k×k system.
    std::optional<SolveOutcome> solve_dual(std::span<const std::size_t> idx) const
    {
        const auto k = static_cast<Eigen::Index>(idx.size());
        Matrix u(k, map_.q);
        Vector y(k);
        gather(idx, u, y);
        Matrix gram = u * u.transpose();
        gram.diagonal().array() += map_.ridge;
        Eigen::LDLT<Matrix> ldlt(gram);
        SolveOutcome out;
        if (ldlt.info() == Eigen::Success)
        {
            Vector alpha = ldlt.solve(y);
            out.x = u.transpose() * alpha;
            if (out.x.allFinite())
            {
                out.ill_conditioned = ldlt.rcond() < kConditionFlag;
                return out;
            }
        }
        return std::nullopt;
    }

    const ReplayBuffer<Payload>& buffer_;
    const MomentMap<Payload>& map_;
    Matrix factors_;
    Vector targets_;
    std::vector<Matrix> g_cache_;
    std::vector<Vector> f_cache_;
};

inline std::vector<std::size_t> sorted_copy(std::span<const std::size_t> idx)
{
    std::vector<std::size_t> s(idx.begin(), idx.end());
    std::sort(s.begin(), s.end());
    return s;
}

}  // namespace detail

//---------------------------------------------------------------------------//
// Kernel h_k
//---------------------------------------------------------------------------//

// h_k over the buffer items named by `indices` (repeats allowed). Exactly
// invariant under permutations of `indices`. Throws SingularSystem.
template <class Payload>
Vector eval_h_k(const ReplayBuffer<Payload>& buffer,
                std::span<const std::size_t> indices, const MomentMap<Payload>& m)
{
    for (std::size_t i : indices)
        if (i >= buffer.size())
            throw IndexOutOfRange("eval_h_k: index past end of buffer");
    detail::SubsetSolver<Payload> solver(buffer, m);
    auto sorted = detail::sorted_copy(indices);
    auto out = solver.solve(sorted);
    if (!out)
        throw SingularSystem("eval_h_k: accumulated system is singular");
    return std::move(out->x);
}

// h_k over an explicit sequence of payloads, summed in the given order.
template <class Payload>
Vector eval_h_k(std::span<const Payload> subset, const MomentMap<Payload>& m)
{
    if (subset.empty())
        throw InvalidArgument("eval_h_k: subset must be nonempty");
    Matrix gsum = Matrix::Zero(m.q, m.q);
    Vector fsum = Vector::Zero(m.q);
    for (const auto& z : subset)
        m.add_to(z, gsum, fsum);
    if (gsum.rows() != m.q || gsum.cols() != m.q || fsum.size() != m.q)
        throw DimensionMismatch("MomentMap output does not match q");
    double scale = std::abs(gsum.trace());
    if (m.ridge > 0.0)
        gsum.diagonal().array() += m.ridge;
    SolveOutcome out;
    if (!solve_with_jitter(gsum, fsum, scale, out))
        throw SingularSystem("eval_h_k: accumulated system is singular");
    return std::move(out.x);
}

//---------------------------------------------------------------------------//
// Estimators
//---------------------------------------------------------------------------//

// Plug-in estimator over the whole buffer. Throws SingularSystem.
template <class Payload>
ThetaEstimate estimate_full(const ReplayBuffer<Payload>& buffer,
                            const MomentMap<Payload>& m)
{
    if (buffer.empty())
        throw InvalidArgument("estimate_full: empty buffer");
    detail::SubsetSolver<Payload> solver(buffer, m);
    std::vector<std::size_t> all(buffer.size());
    for (std::size_t i = 0; i < all.size(); ++i)
        all[i] = i;
    auto out = solver.solve(all);
    if (!out)
        throw SingularSystem("estimate_full: accumulated system is singular");
    ThetaEstimate est;
    est.theta = std::move(out->x);
    est.subsamples_used = 1;
    est.max_condition_flagged = out->ill_conditioned;
    return est;
}

// The B index multisets a resampled scheme will evaluate, with their
// importance weights (all 1 except for WEIGHTED). Subsample j is drawn from
// stream split(j) of the config seed.
struct SubsamplePlan
{
    std::vector<std::vector<std::size_t>> subsets;
    std::vector<double> weights;
};

SubsamplePlan plan_subsamples(std::size_t n, const ReplayConfig& cfg);

template <class Payload>
ThetaEstimate estimate_resampled(const ReplayBuffer<Payload>& buffer,
                                 const MomentMap<Payload>& m,
                                 const ReplayConfig& cfg)
{
    if (cfg.scheme == Scheme::Full)
        return estimate_full(buffer, m);
    if (buffer.empty())
        throw InvalidArgument("estimate_resampled: empty buffer");

    SubsamplePlan plan = plan_subsamples(buffer.size(), cfg);
    detail::SubsetSolver<Payload> solver(buffer, m);

    std::vector<std::optional<SolveOutcome>> results(plan.subsets.size());
    parallel_for(plan.subsets.size(), cfg.threads, [&](std::size_t j) {
        results[j] = solver.solve(plan.subsets[j]);
    });

    ThetaEstimate est;
    CompensatedSum sum(m.q);
    CompensatedScalar weight_sum;
    for (std::size_t j = 0; j < results.size(); ++j)
    {
        if (!results[j])
        {
            ++est.subsamples_skipped;
            continue;
        }
        ++est.subsamples_used;
        est.max_condition_flagged =
            est.max_condition_flagged || results[j]->ill_conditioned;
        double w = plan.weights[j];
        if (w == 1.0)
            sum.add(results[j]->x);
        else
            sum.add(w * results[j]->x);
        weight_sum.add(w);
    }
    if (est.subsamples_used == 0)
        throw AllSubsamplesSingular("every subsample produced a singular system");

    double denom = static_cast<double>(est.subsamples_used);
    if (cfg.scheme == Scheme::Weighted
        && cfg.weighted_mode == WeightedMode::SelfNormalized)
    {
        denom = weight_sum.value();
    }
    est.theta = sum.value() / denom;
    if (!est.theta.allFinite())
        throw SingularSystem("estimate_resampled: non-finite average");
    return est;
}

template <class Payload>
ThetaEstimate estimate_resampled_U(const ReplayBuffer<Payload>& buffer,
                                   const MomentMap<Payload>& m, ReplayConfig cfg)
{
    cfg.scheme = Scheme::UStat;
    return estimate_resampled(buffer, m, cfg);
}

template <class Payload>
ThetaEstimate estimate_resampled_V(const ReplayBuffer<Payload>& buffer,
                                   const MomentMap<Payload>& m, ReplayConfig cfg)
{
    cfg.scheme = Scheme::VStat;
    return estimate_resampled(buffer, m, cfg);
}

template <class Payload>
ThetaEstimate estimate_resampled_weighted(const ReplayBuffer<Payload>& buffer,
                                          const MomentMap<Payload>& m,
                                          ReplayConfig cfg)
{
    cfg.scheme = Scheme::Weighted;
    return estimate_resampled(buffer, m, cfg);
}

}  // namespace replay
