#include "promptband/core/ledger.hpp"

#include "promptband/core/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

namespace promptband {

std::optional<double> EvaluationLedger::cached(PromptId prompt, int instance) const {
  auto it = pointwise_.find(key(prompt, instance));
  if (it == pointwise_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> EvaluationLedger::uncached(PromptId prompt, std::span<const int> subset) const {
  if (!caching_) return {subset.begin(), subset.end()};
  std::vector<int> out;
  for (int i : subset) {
    if (!pointwise_.contains(key(prompt, i))) out.push_back(i);
  }
  return out;
}

void EvaluationLedger::store(PromptId prompt, std::span<const int> subset,
                             std::span<const double> losses) {
  if (subset.size() != losses.size()) {
    throw AlignmentError("got " + std::to_string(losses.size()) + " losses for " +
                         std::to_string(subset.size()) + " instances");
  }
  for (double l : losses) {
    if (!(l >= 0.0 && l <= 1.0)) {
      throw ValidationError("loss " + std::to_string(l) + " outside [0, 1]");
    }
  }
  for (std::size_t k = 0; k < subset.size(); ++k) {
    auto [it, inserted] = pointwise_.try_emplace(key(prompt, subset[k]), losses[k]);
    if (caching_) {
      if (inserted) ++calls_used_;
    } else {
      it->second = losses[k];
      ++calls_used_;
    }
  }
}

double EvaluationLedger::record_evaluation(PromptId prompt, std::span<const int> subset,
                                           std::span<const double> losses) {
  if (subset.empty()) throw ValidationError("cannot record an evaluation on zero instances");
  store(prompt, subset, losses);
  // Mean over the cache so the record always agrees with the pointwise map.
  double sum = 0.0;
  for (int i : subset) sum += pointwise_.at(key(prompt, i));
  const double mean = sum / static_cast<double>(subset.size());
  records_.push_back(FidelityRecord{prompt, static_cast<int>(subset.size()), mean, next_order_++,
                                    std::make_shared<const std::vector<int>>(subset.begin(),
                                                                             subset.end())});
  return mean;
}

void EvaluationLedger::record_pointwise(PromptId prompt, std::span<const int> subset,
                                        std::span<const double> losses) {
  store(prompt, subset, losses);
}

std::vector<int> EvaluationLedger::subset_sizes() const {
  std::set<int> sizes;
  for (const auto& r : records_) sizes.insert(r.subset_size);
  return {sizes.begin(), sizes.end()};
}

std::vector<FidelityRecord> EvaluationLedger::latest_at(int b) const {
  std::map<PromptId, const FidelityRecord*> latest;
  for (const auto& r : records_) {
    if (r.subset_size == b) latest[r.prompt_id] = &r;
  }
  std::vector<FidelityRecord> out;
  out.reserve(latest.size());
  for (const auto& [id, r] : latest) out.push_back(*r);
  std::sort(out.begin(), out.end(), [](const FidelityRecord& a, const FidelityRecord& c) {
    return a.order_index < c.order_index;
  });
  return out;
}

}  // namespace promptband
