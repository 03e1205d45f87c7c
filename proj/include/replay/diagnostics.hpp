#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <json.hpp>

#include "replay/replay_core.hpp"

namespace replay {

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

// C(n, k), saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

// Advances `idx` (strictly increasing, values < n) to the next k-combination
// in lexicographic order. Returns false after the last one.
bool next_combination(std::vector<std::size_t>& idx, std::size_t n);

//---------------------------------------------------------------------------//
// Complete U-statistic
//---------------------------------------------------------------------------//

// Exact average of h_k over all C(n, k) subsets, in lexicographic order.
template <class Payload>
Vector complete_U(const ReplayBuffer<Payload>& buffer, const MomentMap<Payload>& m,
                  std::size_t k, std::uint64_t cap = kDefaultEnumerationCap)
{
    const std::size_t n = buffer.size();
    if (k == 0 || k > n)
        throw InvalidArgument("complete_U: need 1 <= k <= n");
    std::uint64_t count = binomial(n, k);
    if (count > cap)
        throw CapExceeded("complete_U: C(n,k) exceeds the enumeration cap");

    detail::SubsetSolver<Payload> solver(buffer, m);
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i)
        idx[i] = i;
    CompensatedSum sum(m.q);
    do
    {
        auto out = solver.solve(idx);
        if (!out)
            throw SingularSystem("complete_U: singular subset system");
        sum.add(out->x);
    } while (next_combination(idx, n));
    return sum.value() / static_cast<double>(count);
}

//---------------------------------------------------------------------------//
// Scalar test problems over Z ∈ ℝ
//---------------------------------------------------------------------------//

// g ≡ 1, f(Z) = Z: θ is the mean and h_k the subset average.
MomentMap<double> mean_problem();
// g(Z) = 1 + Z², f(Z) = Z.
MomentMap<double> ratio_problem();

//---------------------------------------------------------------------------//
// Variance components ζ_{c,k}
//---------------------------------------------------------------------------//

struct VarianceComponents
{
    std::size_t c = 0;
    std::size_t k = 0;
    Matrix zeta;
    std::size_t mc_reps = 0;
    Matrix std_err;

    // Scalar summaries for matrix-valued kernels.
    double trace() const { return zeta.trace(); }
};

// Sample cross-covariance of paired draws (columns are replications) and its
// elementwise delete-1 jackknife standard error.
struct CrossCovariance
{
    Matrix cov;
    Matrix std_err;
};
CrossCovariance jackknife_cross_covariance(const Matrix& a, const Matrix& b);

template <class Payload>
using ExperienceGenerator = std::function<Payload(RandomStream&)>;

/*!
 * Monte Carlo estimate of
 *   ζ_{c,k} = Cov(h_k(Z_1..Z_k), h_k(Z_1..Z_c, Z'_{c+1}..Z'_k)).
 *
 * Replication r draws from stream split(r) of `seed`, so the result does not
 * depend on `threads`.
 */
template <class Payload>
VarianceComponents estimate_zeta(const ExperienceGenerator<Payload>& generator,
                                 const MomentMap<Payload>& m, std::size_t c,
                                 std::size_t k, std::size_t mc_reps,
                                 std::uint64_t seed, unsigned threads = 1)
{
    if (c < 1 || c > k)
        throw InvalidArgument("estimate_zeta: need 1 <= c <= k");
    if (mc_reps < 2)
        throw InvalidArgument("estimate_zeta: need at least 2 replications");

    Matrix first(m.q, static_cast<Eigen::Index>(mc_reps));
    Matrix second(m.q, static_cast<Eigen::Index>(mc_reps));
    RandomStream root(seed);
    parallel_for(mc_reps, threads, [&](std::size_t r) {
        RandomStream rng = root.split(r);
        std::vector<Payload> z;
        z.reserve(k);
        for (std::size_t i = 0; i < k; ++i)
            z.push_back(generator(rng));
        std::vector<Payload> z_shared(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(c));
        for (std::size_t i = c; i < k; ++i)
            z_shared.push_back(generator(rng));
        auto col = static_cast<Eigen::Index>(r);
        first.col(col) = eval_h_k<Payload>(z, m);
        second.col(col) = eval_h_k<Payload>(z_shared, m);
    });

    CrossCovariance cc = jackknife_cross_covariance(first, second);
    VarianceComponents out;
    out.c = c;
    out.k = k;
    out.zeta = std::move(cc.cov);
    out.std_err = std::move(cc.std_err);
    out.mc_reps = mc_reps;
    return out;
}

//---------------------------------------------------------------------------//
// Incomplete-U variance identity
//---------------------------------------------------------------------------//

struct BlomReport
{
    double lhs = 0.0;      // MC Var(U_{n,k,B})
    double rhs = 0.0;      // (1 - 1/B) Var(U_{n,k}) + ζ_{k,k} / B
    double ci_low = 0.0;   // 99% CI on lhs - rhs
    double ci_high = 0.0;
    std::size_t reps = 0;
    double var_complete = 0.0;
    double zeta_kk = 0.0;

    bool contains_zero() const { return ci_low <= 0.0 && 0.0 <= ci_high; }
};

void to_json(nlohmann::json& j, const BlomReport& r);

// Scalar pieces of the identity, computed from per-replication values.
// `incomplete` and `complete` are per-buffer statistics reduced to scalars
// (traces of outer products for q > 1 are handled by the caller).
BlomReport assemble_blom(const Matrix& incomplete, const Matrix& complete,
                         const VarianceComponents& zeta, std::size_t B);

/*!
 * Checks Var(U_{n,k,B}) = (1 - 1/B) Var(U_{n,k}) + ζ_{k,k} / B.
 *
 * For q > 1 both sides are summarized by their traces.
 */
template <class Payload>
BlomReport blom_variance_check(const ExperienceGenerator<Payload>& generator,
                               const MomentMap<Payload>& m, std::size_t n,
                               std::size_t k, std::size_t B, std::size_t outer_reps,
                               std::uint64_t seed, std::size_t zeta_reps = 20000,
                               std::uint64_t cap = kDefaultEnumerationCap,
                               unsigned threads = 1)
{
    if (outer_reps < 100)
        throw InvalidArgument("blom_variance_check: need outer_reps >= 100");
    if (k == 0 || k > n)
        throw InvalidArgument("blom_variance_check: need 1 <= k <= n");
    if (binomial(n, k) > cap)
        throw CapExceeded("blom_variance_check: C(n,k) exceeds the enumeration cap");

    Matrix incomplete(m.q, static_cast<Eigen::Index>(outer_reps));
    Matrix complete(m.q, static_cast<Eigen::Index>(outer_reps));
    RandomStream data_root = RandomStream(seed).split(0);
    const std::uint64_t draw_seed = derive_seed(seed, {1});
    parallel_for(outer_reps, threads, [&](std::size_t r) {
        RandomStream rng = data_root.split(r);
        std::vector<Payload> items;
        items.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            items.push_back(generator(rng));
        ReplayBuffer<Payload> buffer(std::move(items));
        ReplayConfig cfg;
        cfg.scheme = Scheme::UStat;
        cfg.B = B;
        cfg.k = k;
        cfg.seed = derive_seed(draw_seed, {r});
        auto col = static_cast<Eigen::Index>(r);
        incomplete.col(col) = estimate_resampled(buffer, m, cfg).theta;
        complete.col(col) = complete_U(buffer, m, k, cap);
    });

    VarianceComponents zeta =
        estimate_zeta(generator, m, k, k, zeta_reps, derive_seed(seed, {2}), threads);
    BlomReport report = assemble_blom(incomplete, complete, zeta, B);
    return report;
}

//---------------------------------------------------------------------------//
// Delta-method covariance and influence function
//---------------------------------------------------------------------------//

struct AsymptoticCovariance
{
    Matrix Sigma;   // q × q
    Matrix G;       // q × (q + q²)
    Matrix Sigma0;  // joint covariance of (f(Z), vec g(Z))
    Vector theta;   // plug-in θ̃
};

// Plug-in moments of a buffer: per-item f and vec g as columns.
struct MomentSamples
{
    Matrix f;  // q × n
    Matrix g;  // q² × n, column-stacked vec
};

template <class Payload>
MomentSamples collect_moments(const ReplayBuffer<Payload>& buffer,
                              const MomentMap<Payload>& m)
{
    const auto n = static_cast<Eigen::Index>(buffer.size());
    MomentSamples s{Matrix(m.q, n), Matrix(m.q * m.q, n)};
    for (Eigen::Index i = 0; i < n; ++i)
    {
        Matrix gi = Matrix::Zero(m.q, m.q);
        Vector fi = Vector::Zero(m.q);
        m.add_to(buffer.payload(static_cast<std::size_t>(i)), gi, fi);
        if (fi.size() != m.q || gi.rows() != m.q || gi.cols() != m.q)
            throw DimensionMismatch("MomentMap output does not match q");
        s.f.col(i) = fi;
        s.g.col(i) = vec(gi);
    }
    return s;
}

// Σ = G Σ0 Gᵀ with G = ([E g]^{-1}, -θᵀ ⊗ [E g]^{-1}).
AsymptoticCovariance lemma1_sigma(const MomentSamples& samples);

template <class Payload>
AsymptoticCovariance lemma1_sigma(const ReplayBuffer<Payload>& buffer,
                                  const MomentMap<Payload>& m)
{
    if (buffer.size() < static_cast<std::size_t>(m.q) + 2)
        throw InvalidArgument("lemma1_sigma: need n >= q + 2");
    return lemma1_sigma(collect_moments(buffer, m));
}

// H(Z_i) = μ_g^{-1}(f_i - μ_f) - μ_g^{-1}(g_i - μ_g) μ_g^{-1} μ_f, columns.
Matrix influence_values(const MomentSamples& samples);

template <class Payload>
std::vector<Vector> influence_values(const ReplayBuffer<Payload>& buffer,
                                     const MomentMap<Payload>& m)
{
    if (buffer.size() < 2)
        throw InvalidArgument("influence_values: need n >= 2");
    Matrix h = influence_values(collect_moments(buffer, m));
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(h.cols()));
    for (Eigen::Index i = 0; i < h.cols(); ++i)
        out.push_back(h.col(i));
    return out;
}

// Two-sided standard normal quantile for the given coverage (0.99 -> 2.5758).
double normal_two_sided_quantile(double coverage);

// Ratios used to judge ζ_{k,k}[ζ_{1,k}]^{-1}: trace ratio and spectral ratio
// (largest generalized eigenvalue of the symmetrized pair).
struct ZetaRatio
{
    double trace_ratio = 0.0;
    double spectral_ratio = 0.0;
};
ZetaRatio zeta_ratio(const VarianceComponents& zeta_kk,
                     const VarianceComponents& zeta_1k);

}  // namespace replay
