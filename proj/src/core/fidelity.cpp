#include "promptband/core/fidelity.hpp"

#include "promptband/core/errors.hpp"
#include "promptband/core/random.hpp"

#include <algorithm>
#include <string>

namespace promptband {

FidelityChain::FidelityChain(std::vector<int> permutation, int b_min, std::vector<int> levels)
    : permutation_(std::move(permutation)), b_min_(b_min), levels_(std::move(levels)) {
  const int n = static_cast<int>(permutation_.size());
  if (n <= 0) throw ValidationError("fidelity chain needs at least one validation instance");
  std::vector<int> seen(permutation_);
  std::sort(seen.begin(), seen.end());
  for (int k = 0; k < n; ++k) {
    if (seen[static_cast<std::size_t>(k)] != k) {
      throw ValidationError("fidelity chain is not a permutation of 0..n_valid-1");
    }
  }
  if (b_min_ < 1 || b_min_ > n) {
    throw RangeError("b_min " + std::to_string(b_min_) + " outside [1, " + std::to_string(n) + "]");
  }
  levels_.push_back(n);
  std::sort(levels_.begin(), levels_.end());
  levels_.erase(std::unique(levels_.begin(), levels_.end()), levels_.end());
  for (int b : levels_) {
    if (b < b_min_ || b > n) throw RangeError("fidelity level " + std::to_string(b) + " out of range");
  }
}

FidelityChain FidelityChain::sampled(int n_valid, int b_min, std::uint64_t seed,
                                     std::vector<int> levels) {
  if (n_valid <= 0) throw ValidationError("n_valid must be positive");
  Rng rng(seed);
  return FidelityChain(rng.permutation(n_valid), b_min, std::move(levels));
}

std::span<const int> FidelityChain::prefix(int b) const {
  if (b < 1 || b > n_valid()) {
    throw RangeError("subset size " + std::to_string(b) + " outside [1, " +
                     std::to_string(n_valid()) + "]");
  }
  return std::span<const int>(permutation_).first(static_cast<std::size_t>(b));
}

std::span<const int> fidelity_subset(const FidelityChain& chain, int b) {
  if (b < chain.b_min() || b > chain.n_valid()) {
    throw RangeError("fidelity " + std::to_string(b) + " outside [" +
                     std::to_string(chain.b_min()) + ", " + std::to_string(chain.n_valid()) + "]");
  }
  return chain.prefix(b);
}

}  // namespace promptband
