#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "replay/rng.hpp"

namespace replay {

// k distinct indices from [0, n), uniform over all C(n, k) subsets, sorted
// ascending. Position j of the draw consumes block j of the stream.
std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t k,
                                                  RandomStream& rng);

// k i.i.d. uniform indices from [0, n), in draw order. One block per index.
std::vector<std::size_t> draw_with_replacement(std::size_t n, std::size_t k,
                                               RandomStream& rng);

/*!
 * Walker/Vose alias table over nonnegative weights.
 *
 * A draw consumes one block: the first word picks a column, the second
 * decides between the column and its alias. With equal weights every column
 * keeps probability one, so the index stream equals draw_with_replacement on
 * the same stream.
 */
class AliasTable
{
  public:
    explicit AliasTable(std::span<const double> weights);

    std::size_t size() const { return prob_.size(); }
    // Normalized probability of index i.
    double probability(std::size_t i) const { return normalized_[i]; }

    std::size_t draw(RandomStream& rng) const;
    std::vector<std::size_t> draw(std::size_t k, RandomStream& rng) const;

  private:
    std::vector<double> prob_;
    std::vector<std::size_t> alias_;
    std::vector<double> normalized_;
};

// Throws InvalidWeights unless weights are finite, nonnegative, of length n,
// with positive sum.
void validate_weights(std::span<const double> weights, std::size_t n);

}  // namespace replay
