#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace replay {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Neumaier-compensated running sum of equally sized vectors.
class CompensatedSum
{
  public:
    CompensatedSum() = default;
    explicit CompensatedSum(Eigen::Index dim);

    void add(const Vector& x);
    Vector value() const { return sum_ + carry_; }
    std::size_t count() const { return count_; }

  private:
    Vector sum_;
    Vector carry_;
    std::size_t count_ = 0;
};

// Scalar counterpart of CompensatedSum.
class CompensatedScalar
{
  public:
    void add(double x);
    double value() const { return sum_ + carry_; }

  private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

struct SolveOutcome
{
    Vector x;
    bool jittered = false;   // the diagonal shift was needed
    bool ill_conditioned = false;
};

// Reciprocal condition estimates below this are flagged.
inline constexpr double kConditionFlag = 1e-12;
inline constexpr double kJitterScale = 1e-10;

/*!
 * Solve A x = b with a fully pivoted LU.
 *
 * If A is numerically singular, retry once with
 * A + (1e-10 * scale_trace / q) I. Returns false in `ok` when both attempts
 * fail or produce non-finite output; A itself is never inverted explicitly.
 */
bool solve_with_jitter(const Matrix& a, const Vector& b, double scale_trace,
                       SolveOutcome& out);

// Column-stacking vec(A).
Vector vec(const Matrix& a);

// Kronecker product A ⊗ B.
Matrix kronecker(const Matrix& a, const Matrix& b);

}  // namespace replay
