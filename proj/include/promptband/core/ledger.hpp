#pragma once

#include "promptband/core/prompt_space.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace promptband {

/// One aggregated observation: a prompt's mean loss over a validation subset.
struct FidelityRecord {
  PromptId prompt_id = 0;
  int subset_size = 0;
  double mean_error = 0.0;
  long order_index = 0;
  std::shared_ptr<const std::vector<int>> instances;
};

/// Design data plus the pointwise loss cache and the oracle-call counter.
///
/// All mutation goes through record_evaluation / record_pointwise, which are
/// expected to be called from a single thread in a deterministic order.
class EvaluationLedger {
 public:
  explicit EvaluationLedger(bool caching = true) : caching_(caching) {}

  bool caching() const { return caching_; }
  long calls_used() const { return calls_used_; }
  const std::vector<FidelityRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

  std::optional<double> cached(PromptId prompt, int instance) const;

  /// Instances of `subset` that would cost an oracle call (all of them when
  /// caching is off), in subset order.
  std::vector<int> uncached(PromptId prompt, std::span<const int> subset) const;

  /// Stores losses and appends a record; returns the record's mean error.
  double record_evaluation(PromptId prompt, std::span<const int> subset,
                           std::span<const double> losses);

  /// Stores losses without producing a record (a budget-truncated evaluation).
  void record_pointwise(PromptId prompt, std::span<const int> subset,
                        std::span<const double> losses);

  /// Distinct subset sizes present in the records, ascending.
  std::vector<int> subset_sizes() const;

  /// The latest record of every prompt at subset size b, ordered by order_index.
  std::vector<FidelityRecord> latest_at(int b) const;

  /// Number of distinct (prompt, instance) pairs in the cache.
  std::size_t distinct_pairs() const { return pointwise_.size(); }

 private:
  static std::uint64_t key(PromptId prompt, int instance) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(prompt)) << 32) |
           static_cast<std::uint32_t>(instance);
  }
  void store(PromptId prompt, std::span<const int> subset, std::span<const double> losses);

  bool caching_;
  long calls_used_ = 0;
  long next_order_ = 0;
  std::unordered_map<std::uint64_t, double> pointwise_;
  std::vector<FidelityRecord> records_;
};

}  // namespace promptband
