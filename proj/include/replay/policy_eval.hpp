#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "replay/replay_core.hpp"

namespace replay {

// States s_0..s_L of a 1-D process sampled every `dt` time units.
struct Trajectory
{
    std::vector<double> states;
    double dt = 1.0;

    std::size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
};

bool operator==(const Trajectory& a, const Trajectory& b);

using RewardFn = std::function<double(double)>;

//---------------------------------------------------------------------------//
/*!
 * Periodic Fourier basis on [-π, π] with I harmonics, q = 2I + 1:
 *
 *   Φ(s) = (1/√(2π), cos(s)/√π, sin(s)/√π, ..., cos(Is)/√π, sin(Is)/√π).
 *
 * eval() returns Φ, Φ′ and Φ″ from the analytic derivatives.
 */
class FourierBasis
{
  public:
    struct Values
    {
        Vector phi;
        Vector d1;
        Vector d2;
    };

    explicit FourierBasis(int harmonics);

    int harmonics() const { return harmonics_; }
    Eigen::Index size() const { return 2 * harmonics_ + 1; }

    Values eval(double s) const;
    Vector value(double s) const;

  private:
    int harmonics_;
};

// Finite-difference order of the PhiBE drift/diffusion estimators.
class PhibeOrder
{
  public:
    explicit PhibeOrder(int alpha);

    int alpha() const { return alpha_; }
    // a^(1) = (1); a^(2) = (2, -1/2).
    std::span<const double> coeffs() const;

  private:
    int alpha_;
};

struct DriftDiffusion
{
    double mu = 0.0;
    double sigma2 = 0.0;
};

// μ̄_α(s_j) = (1/Δt) Σ_k a_k (s_{j+k} - s_j),
// Σ̄_α(s_j) = (1/Δt) Σ_k a_k (s_{j+k} - s_j)².
DriftDiffusion phibe_mu_sigma(const Trajectory& traj, std::size_t j,
                              PhibeOrder order);

// g = Σ_{j<L} Φ(s_j)[Φ(s_j) - γΦ(s_{j+1})]ᵀ, f = Σ_{j<L} r(s_j)Φ(s_j).
MomentMap<Trajectory> lstd_moments(const FourierBasis& basis, double gamma,
                                   RewardFn reward);

// g = Σ_{j≤L-α} Φ(s_j)[βΦ(s_j) - μ̄Φ′(s_j) - ½Σ̄Φ″(s_j)]ᵀ,
// f = Σ_{j≤L-α} r(s_j)Φ(s_j).
MomentMap<Trajectory> phibe_moments(const FourierBasis& basis, double beta,
                                    RewardFn reward, PhibeOrder order);

// Φ(s)ᵀθ.
double value_predict(const Vector& theta, const FourierBasis& basis, double s);

// Overlapping windows (s_j, ..., s_{j+window-1}), j = 0..L-window+1.
std::vector<Trajectory> split_trajectory(const Trajectory& traj,
                                         std::size_t window);

//---------------------------------------------------------------------------//
// Trajectory files: CSV `traj_id,step,state` plus a JSON manifest
// {"dt": ..., "L": ...}.
//---------------------------------------------------------------------------//

void write_trajectories(const std::string& csv_path,
                        const std::string& manifest_path,
                        std::span<const Trajectory> trajectories);

std::vector<Trajectory> read_trajectories(const std::string& csv_path,
                                          const std::string& manifest_path);

}  // namespace replay
