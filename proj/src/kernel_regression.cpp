#include "replay/kernel_regression.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "replay/rng.hpp"

namespace replay {

bool operator==(const LabeledPoint& a, const LabeledPoint& b)
{
    return a.y == b.y && a.x.size() == b.x.size() && a.x == b.x;
}

FeatureMap::FeatureMap(Eigen::Index p, Eigen::Index q, double bandwidth,
                       std::uint64_t seed)
    : frequencies_(q, p), phases_(q), bandwidth_(bandwidth), seed_(seed)
{
    if (p < 1 || q < 1)
        throw InvalidArgument("FeatureMap: p and q must be positive");
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
        throw InvalidArgument("FeatureMap: bandwidth must be positive");
    scale_ = std::sqrt(2.0 / static_cast<double>(q));
    RandomStream root(seed);
    for (Eigen::Index j = 0; j < q; ++j)
    {
        RandomStream rng = root.split(static_cast<std::uint64_t>(j));
        for (Eigen::Index d = 0; d < p; ++d)
            frequencies_(j, d) = rng.normal() / bandwidth;
        phases_[j] = 2.0 * std::numbers::pi * rng.uniform();
    }
}

Vector FeatureMap::operator()(const Vector& x) const
{
    if (x.size() != input_dim())
        throw DimensionMismatch("FeatureMap: input has dimension "
                                + std::to_string(x.size()) + ", expected "
                                + std::to_string(input_dim()));
    Vector arg = frequencies_ * x + phases_;
    return scale_ * arg.array().cos().matrix();
}

Matrix FeatureMap::features(const Matrix& xs) const
{
    if (xs.rows() != input_dim())
        throw DimensionMismatch("FeatureMap: input dimension mismatch");
    Matrix arg = (frequencies_ * xs).colwise() + phases_;
    return scale_ * arg.array().cos().matrix().transpose();
}

FeatureMap make_feature_map(Eigen::Index p, Eigen::Index q, double bandwidth,
                            std::uint64_t seed)
{
    return FeatureMap(p, q, bandwidth, seed);
}

MomentMap<LabeledPoint> krr_moments(const FeatureMap& fm, double ridge)
{
    if (!(ridge >= 0.0))
        throw InvalidArgument("krr_moments: ridge must be nonnegative");
    MomentMap<LabeledPoint> m;
    m.q = fm.feature_dim();
    m.ridge = ridge;
    m.rank_one = [fm](const LabeledPoint& z) {
        return std::pair<Vector, double>(fm(z.x), z.y);
    };
    m.accumulate = [fm](const LabeledPoint& z, Matrix& g, Vector& f) {
        Vector phi = fm(z.x);
        g.selfadjointView<Eigen::Lower>().rankUpdate(phi);
        g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
        f.noalias() += z.y * phi;
    };
    m.g = [fm](const LabeledPoint& z) {
        Vector phi = fm(z.x);
        return Matrix(phi * phi.transpose());
    };
    m.f = [fm](const LabeledPoint& z) { return Vector(fm(z.x) * z.y); };
    return m;
}

double krr_predict(const Vector& theta, const FeatureMap& fm, const Vector& x)
{
    if (theta.size() != fm.feature_dim())
        throw DimensionMismatch("krr_predict: theta has "
                                + std::to_string(theta.size())
                                + " entries, feature map has "
                                + std::to_string(fm.feature_dim()));
    return fm(x).dot(theta);
}

double auto_ridge(std::size_t n)
{
    return std::pow(static_cast<double>(n), -2.0 / 3.0);
}

double gaussian_kernel(const Vector& a, const Vector& b, double bandwidth)
{
    return std::exp(-(a - b).squaredNorm() / (2.0 * bandwidth * bandwidth));
}

ExactKrr::ExactKrr(std::span<const LabeledPoint> data, double bandwidth,
                   double ridge, std::size_t cap)
    : bandwidth_(bandwidth)
{
    const std::size_t n = data.size();
    if (n == 0)
        throw InvalidArgument("exact KRR: no training data");
    if (n > cap)
        throw CapExceeded("exact KRR: n=" + std::to_string(n)
                          + " exceeds the O(n^3) cap of " + std::to_string(cap));
    if (!(bandwidth > 0.0))
        throw InvalidArgument("exact KRR: bandwidth must be positive");
    if (!(ridge >= 0.0))
        throw InvalidArgument("exact KRR: ridge must be nonnegative");

    const Eigen::Index p = data[0].x.size();
    const auto nn = static_cast<Eigen::Index>(n);
    xs_ = Matrix(p, nn);
    Vector y(nn);
    for (Eigen::Index i = 0; i < nn; ++i)
    {
        const auto& pt = data[static_cast<std::size_t>(i)];
        if (pt.x.size() != p)
            throw DimensionMismatch("exact KRR: predictors differ in dimension");
        xs_.col(i) = pt.x;
        y[i] = pt.y;
    }
    Matrix gram(nn, nn);
    for (Eigen::Index i = 0; i < nn; ++i)
    {
        gram(i, i) = 1.0 + ridge;
        for (Eigen::Index j = 0; j < i; ++j)
        {
            double kv = gaussian_kernel(xs_.col(i), xs_.col(j), bandwidth);
            gram(i, j) = kv;
            gram(j, i) = kv;
        }
    }
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
        throw SingularSystem("exact KRR: kernel system is singular");
    alpha_ = ldlt.solve(y);
    if (!alpha_.allFinite())
        throw SingularSystem("exact KRR: kernel system is singular");
}

double ExactKrr::predict(const Vector& x) const
{
    if (x.size() != xs_.rows())
        throw DimensionMismatch("exact KRR: test point dimension mismatch");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < xs_.cols(); ++i)
        acc += alpha_[i] * gaussian_kernel(xs_.col(i), x, bandwidth_);
    return acc;
}

double exact_krr_oracle(std::span<const LabeledPoint> data, double bandwidth,
                        double ridge, const Vector& test_x)
{
    return ExactKrr(data, bandwidth, ridge).predict(test_x);
}

}  // namespace replay
