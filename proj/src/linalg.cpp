#include "replay/linalg.hpp"

#include <cmath>

namespace replay {

CompensatedSum::CompensatedSum(Eigen::Index dim)
    : sum_(Vector::Zero(dim)), carry_(Vector::Zero(dim))
{
}

void CompensatedSum::add(const Vector& x)
{
    if (sum_.size() == 0 && count_ == 0)
    {
        sum_ = Vector::Zero(x.size());
        carry_ = Vector::Zero(x.size());
    }
    for (Eigen::Index i = 0; i < x.size(); ++i)
    {
        double t = sum_[i] + x[i];
        if (std::abs(sum_[i]) >= std::abs(x[i]))
            carry_[i] += (sum_[i] - t) + x[i];
        else
            carry_[i] += (x[i] - t) + sum_[i];
        sum_[i] = t;
    }
    ++count_;
}

void CompensatedScalar::add(double x)
{
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
        carry_ += (sum_ - t) + x;
    else
        carry_ += (x - t) + sum_;
    sum_ = t;
}

namespace {

bool try_solve(const Matrix& a, const Vector& b, SolveOutcome& out)
{
    Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible())
        return false;
    Vector x = lu.solve(b);
    if (!x.allFinite())
        return false;
    out.x = std::move(x);
    out.ill_conditioned = out.ill_conditioned || lu.rcond() < kConditionFlag;
    return true;
}

}  // namespace

bool solve_with_jitter(const Matrix& a, const Vector& b, double scale_trace,
                       SolveOutcome& out)
{
    out = SolveOutcome{};
    if (try_solve(a, b, out))
        return true;

    double jitter = kJitterScale * scale_trace / static_cast<double>(a.rows());
    if (!(jitter > 0.0) || !std::isfinite(jitter))
        return false;
    Matrix shifted = a;
    shifted.diagonal().array() += jitter;
    out.jittered = true;
    out.ill_conditioned = true;
    return try_solve(shifted, b, out);
}

Vector vec(const Matrix& a)
{
    Vector v(a.size());
    Eigen::Index pos = 0;
    for (Eigen::Index col = 0; col < a.cols(); ++col)
        for (Eigen::Index row = 0; row < a.rows(); ++row)
            v[pos++] = a(row, col);
    return v;
}

Matrix kronecker(const Matrix& a, const Matrix& b)
{
    Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return k;
}

}  // namespace replay
