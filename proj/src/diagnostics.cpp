#include "replay/diagnostics.hpp"

#include <cmath>
#include <limits>

namespace replay {

std::uint64_t binomial(std::uint64_t n, std::uint64_t k)
{
    if (k > n)
        return 0;
    k = std::min(k, n - k);
    unsigned __int128 result = 1;
    for (std::uint64_t i = 1; i <= k; ++i)
    {
        // Exact at every step: result * (n - k + i) is divisible by i.
        result = result * (n - k + i) / i;
        if (result > std::numeric_limits<std::uint64_t>::max())
            return std::numeric_limits<std::uint64_t>::max();
    }
    return static_cast<std::uint64_t>(result);
}

MomentMap<double> mean_problem()
{
    MomentMap<double> m;
    m.q = 1;
    m.accumulate = [](const double& z, Matrix& g, Vector& f) {
        g(0, 0) += 1.0;
        f[0] += z;
    };
    m.g = [](const double&) { return Matrix::Ones(1, 1).eval(); };
    m.f = [](const double& z) { return Vector::Constant(1, z).eval(); };
    return m;
}

MomentMap<double> ratio_problem()
{
    MomentMap<double> m;
    m.q = 1;
    m.accumulate = [](const double& z, Matrix& g, Vector& f) {
        g(0, 0) += 1.0 + z * z;
        f[0] += z;
    };
    m.g = [](const double& z) { return Matrix::Constant(1, 1, 1.0 + z * z).eval(); };
    m.f = [](const double& z) { return Vector::Constant(1, z).eval(); };
    return m;
}

bool next_combination(std::vector<std::size_t>& idx, std::size_t n)
{
    const std::size_t k = idx.size();
    std::size_t i = k;
    while (i > 0)
    {
        --i;
        if (idx[i] < n - k + i)
        {
            ++idx[i];
            for (std::size_t j = i + 1; j < k; ++j)
                idx[j] = idx[j - 1] + 1;
            return true;
        }
    }
    return false;
}

CrossCovariance jackknife_cross_covariance(const Matrix& a, const Matrix& b)
{
    const Eigen::Index q = a.rows();
    const Eigen::Index reps = a.cols();
    const double r = static_cast<double>(reps);

    // Shift by the first replication: covariance is shift invariant and a
    // constant sample then yields exact zeros.
    Matrix da = a.colwise() - a.col(0);
    Matrix db = b.colwise() - b.col(0);
    Vector sa = da.rowwise().sum();
    Vector sb = db.rowwise().sum();
    Matrix sab = da * db.transpose();

    CrossCovariance out;
    out.cov = (sab - sa * sb.transpose() / r) / (r - 1.0);

    // Delete-1 jackknife, elementwise.
    const double rl = r - 1.0;
    Matrix mean_loo = Matrix::Zero(q, q);
    Matrix sq_loo = Matrix::Zero(q, q);
    for (Eigen::Index i = 0; i < reps; ++i)
    {
        Vector sa_i = sa - da.col(i);
        Vector sb_i = sb - db.col(i);
        Matrix loo = (sab - da.col(i) * db.col(i).transpose()
                      - sa_i * sb_i.transpose() / rl)
                     / (rl - 1.0);
        mean_loo += loo;
        sq_loo += loo.cwiseProduct(loo);
    }
    mean_loo /= r;
    Matrix var = (sq_loo / r - mean_loo.cwiseProduct(mean_loo)).cwiseMax(0.0);
    out.std_err = (var * (r - 1.0)).cwiseSqrt();
    return out;
}

void to_json(nlohmann::json& j, const BlomReport& r)
{
    j = nlohmann::json{{"lhs", r.lhs},         {"rhs", r.rhs},
                       {"ci_low", r.ci_low},   {"ci_high", r.ci_high},
                       {"reps", r.reps},       {"var_complete", r.var_complete},
                       {"zeta_kk", r.zeta_kk}};
}

double normal_two_sided_quantile(double coverage)
{
    // Invert the standard normal CDF by bisection on erfc.
    double tail = (1.0 - coverage) / 2.0;
    double lo = 0.0, hi = 40.0;
    for (int it = 0; it < 200; ++it)
    {
        double mid = 0.5 * (lo + hi);
        double upper = 0.5 * std::erfc(mid / std::sqrt(2.0));
        (upper > tail ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

BlomReport assemble_blom(const Matrix& incomplete, const Matrix& complete,
                         const VarianceComponents& zeta, std::size_t B)
{
    const Eigen::Index reps = incomplete.cols();
    const double r = static_cast<double>(reps);
    const double shrink = 1.0 - 1.0 / static_cast<double>(B);

    Vector mean_t = incomplete.rowwise().mean();
    Vector mean_u = complete.rowwise().mean();
    Vector d(reps);
    double var_t = 0.0, var_u = 0.0;
    for (Eigen::Index i = 0; i < reps; ++i)
    {
        double st = (incomplete.col(i) - mean_t).squaredNorm();
        double su = (complete.col(i) - mean_u).squaredNorm();
        var_t += st;
        var_u += su;
        d[i] = (st - shrink * su) * r / (r - 1.0);
    }
    var_t /= (r - 1.0);
    var_u /= (r - 1.0);

    BlomReport out;
    out.reps = static_cast<std::size_t>(reps);
    out.lhs = var_t;
    out.var_complete = var_u;
    out.zeta_kk = zeta.zeta.trace();
    out.rhs = shrink * var_u + out.zeta_kk / static_cast<double>(B);

    double d_mean = d.mean();
    double d_var = (d.array() - d_mean).square().sum() / (r - 1.0);
    double zeta_se2 = zeta.std_err.diagonal().squaredNorm();
    double se = std::sqrt(d_var / r
                          + zeta_se2 / (static_cast<double>(B) * static_cast<double>(B)));
    double z = normal_two_sided_quantile(0.99);
    double diff = out.lhs - out.rhs;
    out.ci_low = diff - z * se;
    out.ci_high = diff + z * se;
    return out;
}

AsymptoticCovariance lemma1_sigma(const MomentSamples& s)
{
    const Eigen::Index q = s.f.rows();
    const Eigen::Index n = s.f.cols();
    const double dn = static_cast<double>(n);

    Vector mean_f = s.f.rowwise().mean();
    Vector mean_vec_g = s.g.rowwise().mean();
    Matrix mean_g = Eigen::Map<const Matrix>(mean_vec_g.data(), q, q);

    Eigen::FullPivLU<Matrix> lu(mean_g);
    if (!lu.isInvertible())
        throw SingularSystem("lemma1_sigma: mean of g is singular");
    Matrix g_inv = lu.solve(Matrix::Identity(q, q));

    AsymptoticCovariance out;
    out.theta = lu.solve(mean_f);

    Matrix joint(q + q * q, n);
    joint.topRows(q) = s.f.colwise() - mean_f;
    joint.bottomRows(q * q) = s.g.colwise() - mean_vec_g;
    out.Sigma0 = joint * joint.transpose() / (dn - 1.0);

    out.G = Matrix(q, q + q * q);
    out.G.leftCols(q) = g_inv;
    out.G.rightCols(q * q) = -kronecker(out.theta.transpose(), g_inv);

    out.Sigma = out.G * out.Sigma0 * out.G.transpose();
    return out;
}

Matrix influence_values(const MomentSamples& s)
{
    const Eigen::Index q = s.f.rows();
    const Eigen::Index n = s.f.cols();
    Vector mean_f = s.f.rowwise().mean();
    Vector mean_vec_g = s.g.rowwise().mean();
    Matrix mean_g = Eigen::Map<const Matrix>(mean_vec_g.data(), q, q);

    Eigen::FullPivLU<Matrix> lu(mean_g);
    if (!lu.isInvertible())
        throw SingularSystem("influence_values: mean of g is singular");
    Vector theta = lu.solve(mean_f);

    Matrix h(q, n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        Matrix gi = Eigen::Map<const Matrix>(s.g.col(i).data(), q, q);
        Vector rhs = (s.f.col(i) - mean_f) - (gi - mean_g) * theta;
        h.col(i) = lu.solve(rhs);
    }
    return h;
}

ZetaRatio zeta_ratio(const VarianceComponents& zeta_kk,
                     const VarianceComponents& zeta_1k)
{
    ZetaRatio out;
    out.trace_ratio = zeta_kk.zeta.trace() / zeta_1k.zeta.trace();
    Matrix a = 0.5 * (zeta_kk.zeta + zeta_kk.zeta.transpose());
    Matrix b = 0.5 * (zeta_1k.zeta + zeta_1k.zeta.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> solver(a, b);
    if (solver.info() != Eigen::Success)
        out.spectral_ratio = std::numeric_limits<double>::quiet_NaN();
    else
        out.spectral_ratio = solver.eigenvalues().maxCoeff();
    return out;
}

}  // namespace replay
