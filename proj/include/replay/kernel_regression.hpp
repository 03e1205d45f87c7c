#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "replay/replay_core.hpp"

namespace replay {

struct LabeledPoint
{
    Vector x;
    double y = 0.0;
};

bool operator==(const LabeledPoint& a, const LabeledPoint& b);

/*!
 * Random Fourier features for the Gaussian kernel
 * k(x, x′) = exp(-‖x - x′‖² / (2ℓ²)):
 *
 *   φ_j(x) = √(2/q) cos(ω_jᵀx + b_j),  ω_j ~ N(0, I/ℓ²), b_j ~ U[0, 2π).
 *
 * Fully determined by (p, q, ℓ, seed).
 */
class FeatureMap
{
  public:
    FeatureMap(Eigen::Index p, Eigen::Index q, double bandwidth,
               std::uint64_t seed);

    Eigen::Index input_dim() const { return frequencies_.cols(); }
    Eigen::Index feature_dim() const { return frequencies_.rows(); }
    double bandwidth() const { return bandwidth_; }
    std::uint64_t seed() const { return seed_; }

    const Matrix& frequencies() const { return frequencies_; }  // q × p
    const Vector& phases() const { return phases_; }

    Vector operator()(const Vector& x) const;
    // Rows are φ(x_i)ᵀ for the columns x_i of `xs` (p × m).
    Matrix features(const Matrix& xs) const;

  private:
    Matrix frequencies_;
    Vector phases_;
    double bandwidth_;
    std::uint64_t seed_;
    double scale_;
};

FeatureMap make_feature_map(Eigen::Index p, Eigen::Index q, double bandwidth,
                            std::uint64_t seed);

// g(x, y) = φ(x)φ(x)ᵀ, f(x, y) = φ(x) y, ridge λ. Provides the rank-one
// factorization so small subsets solve in k×k form.
MomentMap<LabeledPoint> krr_moments(const FeatureMap& fm, double ridge);

// φ(x)ᵀθ.
double krr_predict(const Vector& theta, const FeatureMap& fm, const Vector& x);

// λ = n^{-2/3}.
double auto_ridge(std::size_t n);

double gaussian_kernel(const Vector& a, const Vector& b, double bandwidth);

inline constexpr std::size_t kExactKrrCap = 2000;

/*!
 * Exact Gaussian-kernel ridge regression: α = (K + λI)^{-1} y, with
 * predictions k(x, ·)ᵀα.
 */
class ExactKrr
{
  public:
    ExactKrr(std::span<const LabeledPoint> data, double bandwidth, double ridge,
             std::size_t cap = kExactKrrCap);

    double predict(const Vector& x) const;

  private:
    Matrix xs_;  // p × n
    Vector alpha_;
    double bandwidth_;
};

double exact_krr_oracle(std::span<const LabeledPoint> data, double bandwidth,
                        double ridge, const Vector& test_x);

}  // namespace replay
