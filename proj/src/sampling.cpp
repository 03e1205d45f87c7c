#include "replay/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "replay/errors.hpp"

namespace replay {

std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t k,
                                                  RandomStream& rng)
{
    if (k == 0 || k > n)
    {
        throw InvalidArgument("draw_without_replacement: need 1 <= k <= n (k="
                              + std::to_string(k) + ", n=" + std::to_string(n)
                              + ")");
    }

    // Floyd's algorithm: one draw per selected element.
    std::vector<std::size_t> out;
    out.reserve(k);
    if (n <= 64 * k)
    {
        std::vector<char> taken(n, 0);
        for (std::size_t j = n - k; j < n; ++j)
        {
            std::size_t t = bits_below(rng.next_block()[0], j + 1);
            std::size_t pick = taken[t] ? j : t;
            taken[pick] = 1;
            out.push_back(pick);
        }
    }
    else
    {
        std::unordered_set<std::size_t> taken;
        taken.reserve(2 * k);
        for (std::size_t j = n - k; j < n; ++j)
        {
            std::size_t t = bits_below(rng.next_block()[0], j + 1);
            std::size_t pick = taken.count(t) ? j : t;
            taken.insert(pick);
            out.push_back(pick);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> draw_with_replacement(std::size_t n, std::size_t k,
                                               RandomStream& rng)
{
    if (n == 0)
        throw InvalidArgument("draw_with_replacement: n must be positive");
    std::vector<std::size_t> out(k);
    for (auto& idx : out)
        idx = bits_below(rng.next_block()[0], n);
    return out;
}

void validate_weights(std::span<const double> weights, std::size_t n)
{
    if (weights.size() != n)
    {
        throw InvalidWeights("expected " + std::to_string(n)
                             + " weights, got "
                             + std::to_string(weights.size()));
    }
    double total = 0.0;
    for (double w : weights)
    {
        if (!std::isfinite(w) || w < 0.0)
            throw InvalidWeights("weights must be finite and nonnegative");
        total += w;
    }
    if (!(total > 0.0))
        throw InvalidWeights("weights must have a positive sum");
}

AliasTable::AliasTable(std::span<const double> weights)
{
    validate_weights(weights, weights.size());
    std::size_t n = weights.size();
    double total = 0.0;
    for (double w : weights)
        total += w;

    normalized_.resize(n);
    prob_.assign(n, 0.0);
    alias_.resize(n);
    std::vector<double> scaled(n);
    std::vector<std::size_t> small, large;
    for (std::size_t i = 0; i < n; ++i)
    {
        normalized_[i] = weights[i] / total;
        scaled[i] = weights[i] * static_cast<double>(n) / total;
        alias_[i] = i;
        (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty())
    {
        std::size_t s = small.back();
        small.pop_back();
        std::size_t l = large.back();
        prob_[s] = scaled[s];
        alias_[s] = l;
        scaled[l] = (scaled[l] + scaled[s]) - 1.0;
        if (scaled[l] < 1.0)
        {
            large.pop_back();
            small.push_back(l);
        }
    }
    // Leftovers are 1 up to rounding.
    for (std::size_t i : large)
        prob_[i] = 1.0;
    for (std::size_t i : small)
        prob_[i] = 1.0;
}

std::size_t AliasTable::draw(RandomStream& rng) const
{
    auto block = rng.next_block();
    std::size_t col = bits_below(block[0], prob_.size());
    return bits_to_unit(block[1]) < prob_[col] ? col : alias_[col];
}

std::vector<std::size_t> AliasTable::draw(std::size_t k, RandomStream& rng) const
{
    std::vector<std::size_t> out(k);
    for (auto& idx : out)
        idx = draw(rng);
    return out;
}

}  // namespace replay
