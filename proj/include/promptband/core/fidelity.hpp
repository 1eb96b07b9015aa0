#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace promptband {

/// A fixed permutation of validation instances. The subset at fidelity b is
/// the first b entries, so subsets of increasing size are nested.
class FidelityChain {
 public:
  FidelityChain(std::vector<int> permutation, int b_min, std::vector<int> levels = {});

  /// Chain over a seeded permutation of 0..n_valid-1.
  static FidelityChain sampled(int n_valid, int b_min, std::uint64_t seed,
                               std::vector<int> levels = {});

  int n_valid() const { return static_cast<int>(permutation_.size()); }
  int b_min() const { return b_min_; }
  const std::vector<int>& levels() const { return levels_; }
  const std::vector<int>& permutation() const { return permutation_; }

  /// First b entries; valid for 1 <= b <= n_valid (no level check).
  std::span<const int> prefix(int b) const;

 private:
  std::vector<int> permutation_;
  int b_min_;
  std::vector<int> levels_;
};

/// Instances used at fidelity b; requires b_min <= b <= n_valid.
std::span<const int> fidelity_subset(const FidelityChain& chain, int b);

}  // namespace promptband
