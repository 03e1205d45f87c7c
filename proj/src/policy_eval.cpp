#include "replay/policy_eval.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace replay {
namespace {

const double kInvSqrtPi = 1.0 / std::sqrt(std::numbers::pi);
const double kInvSqrtTwoPi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

constexpr std::array<double, 1> kOrder1 = {1.0};
constexpr std::array<double, 2> kOrder2 = {2.0, -0.5};

void require_steps(const Trajectory& traj, std::size_t min_steps,
                   const char* who)
{
    if (traj.steps() < min_steps)
    {
        throw TrajectoryTooShort(std::string(who) + ": trajectory has "
                                 + std::to_string(traj.steps())
                                 + " transitions, need "
                                 + std::to_string(min_steps));
    }
}

}  // namespace

bool operator==(const Trajectory& a, const Trajectory& b)
{
    return a.dt == b.dt && a.states == b.states;
}

FourierBasis::FourierBasis(int harmonics) : harmonics_(harmonics)
{
    if (harmonics < 0)
        throw InvalidArgument("FourierBasis: harmonic count must be >= 0");
}

FourierBasis::Values FourierBasis::eval(double s) const
{
    const Eigen::Index q = size();
    Values v{Vector(q), Vector(q), Vector(q)};
    v.phi[0] = kInvSqrtTwoPi;
    v.d1[0] = 0.0;
    v.d2[0] = 0.0;
    for (int i = 1; i <= harmonics_; ++i)
    {
        const double fi = i;
        const double c = std::cos(fi * s) * kInvSqrtPi;
        const double sn = std::sin(fi * s) * kInvSqrtPi;
        const Eigen::Index ci = 2 * i - 1;
        const Eigen::Index si = 2 * i;
        v.phi[ci] = c;
        v.phi[si] = sn;
        v.d1[ci] = -fi * sn;
        v.d1[si] = fi * c;
        v.d2[ci] = -fi * fi * c;
        v.d2[si] = -fi * fi * sn;
    }
    return v;
}

Vector FourierBasis::value(double s) const
{
    const Eigen::Index q = size();
    Vector phi(q);
    phi[0] = kInvSqrtTwoPi;
    for (int i = 1; i <= harmonics_; ++i)
    {
        phi[2 * i - 1] = std::cos(i * s) * kInvSqrtPi;
        phi[2 * i] = std::sin(i * s) * kInvSqrtPi;
    }
    return phi;
}

PhibeOrder::PhibeOrder(int alpha) : alpha_(alpha)
{
    if (alpha != 1 && alpha != 2)
        throw InvalidArgument("PhibeOrder: alpha must be 1 or 2");
}

std::span<const double> PhibeOrder::coeffs() const
{
    if (alpha_ == 1)
        return kOrder1;
    return kOrder2;
}

DriftDiffusion phibe_mu_sigma(const Trajectory& traj, std::size_t j,
                              PhibeOrder order)
{
    const auto alpha = static_cast<std::size_t>(order.alpha());
    if (traj.states.empty() || j + alpha > traj.steps())
        throw IndexOutOfRange("phibe_mu_sigma: j + alpha exceeds L");
    DriftDiffusion out;
    auto coeffs = order.coeffs();
    for (std::size_t k = 1; k <= alpha; ++k)
    {
        double d = traj.states[j + k] - traj.states[j];
        out.mu += coeffs[k - 1] * d;
        out.sigma2 += coeffs[k - 1] * d * d;
    }
    out.mu /= traj.dt;
    out.sigma2 /= traj.dt;
    return out;
}

MomentMap<Trajectory> lstd_moments(const FourierBasis& basis, double gamma,
                                   RewardFn reward)
{
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw InvalidArgument("lstd_moments: gamma must lie in [0, 1)");
    MomentMap<Trajectory> m;
    m.q = basis.size();
    m.accumulate = [basis, gamma, reward](const Trajectory& traj, Matrix& g,
                                          Vector& f) {
        require_steps(traj, 1, "lstd_moments");
        Vector cur = basis.value(traj.states[0]);
        for (std::size_t j = 0; j < traj.steps(); ++j)
        {
            Vector next = basis.value(traj.states[j + 1]);
            g.noalias() += cur * (cur - gamma * next).transpose();
            f.noalias() += reward(traj.states[j]) * cur;
            cur = std::move(next);
        }
    };
    m.g = [m](const Trajectory& traj) {
        Matrix g = Matrix::Zero(m.q, m.q);
        Vector f = Vector::Zero(m.q);
        m.accumulate(traj, g, f);
        return g;
    };
    m.f = [m](const Trajectory& traj) {
        Matrix g = Matrix::Zero(m.q, m.q);
        Vector f = Vector::Zero(m.q);
        m.accumulate(traj, g, f);
        return f;
    };
    return m;
}

MomentMap<Trajectory> phibe_moments(const FourierBasis& basis, double beta,
                                    RewardFn reward, PhibeOrder order)
{
    if (!(beta > 0.0))
        throw InvalidArgument("phibe_moments: beta must be positive");
    MomentMap<Trajectory> m;
    m.q = basis.size();
    m.accumulate = [basis, beta, reward, order](const Trajectory& traj,
                                                Matrix& g, Vector& f) {
        const auto alpha = static_cast<std::size_t>(order.alpha());
        require_steps(traj, alpha, "phibe_moments");
        for (std::size_t j = 0; j + alpha <= traj.steps(); ++j)
        {
            const double s = traj.states[j];
            auto v = basis.eval(s);
            DriftDiffusion dd = phibe_mu_sigma(traj, j, order);
            Vector generator = dd.mu * v.d1 + 0.5 * dd.sigma2 * v.d2;
            g.noalias() += v.phi * (beta * v.phi - generator).transpose();
            f.noalias() += reward(s) * v.phi;
        }
    };
    m.g = [m](const Trajectory& traj) {
        Matrix g = Matrix::Zero(m.q, m.q);
        Vector f = Vector::Zero(m.q);
        m.accumulate(traj, g, f);
        return g;
    };
    m.f = [m](const Trajectory& traj) {
        Matrix g = Matrix::Zero(m.q, m.q);
        Vector f = Vector::Zero(m.q);
        m.accumulate(traj, g, f);
        return f;
    };
    return m;
}

double value_predict(const Vector& theta, const FourierBasis& basis, double s)
{
    if (theta.size() != basis.size())
        throw DimensionMismatch("value_predict: theta has "
                                + std::to_string(theta.size())
                                + " entries, basis has "
                                + std::to_string(basis.size()));
    return basis.value(s).dot(theta);
}

std::vector<Trajectory> split_trajectory(const Trajectory& traj,
                                         std::size_t window)
{
    if (window != 2 && window != 3)
        throw InvalidArgument("split_trajectory: window must be 2 or 3");
    if (traj.states.size() < window)
        throw TrajectoryTooShort("split_trajectory: fewer states than window");
    std::vector<Trajectory> out;
    out.reserve(traj.states.size() - window + 1);
    for (std::size_t j = 0; j + window <= traj.states.size(); ++j)
    {
        Trajectory piece;
        piece.dt = traj.dt;
        piece.states.assign(traj.states.begin() + static_cast<std::ptrdiff_t>(j),
                            traj.states.begin()
                                + static_cast<std::ptrdiff_t>(j + window));
        out.push_back(std::move(piece));
    }
    return out;
}

}  // namespace replay
