#pragma once

#include "promptband/core/prompt_space.hpp"

#include <span>
#include <string>
#include <vector>

namespace promptband {

struct Stage {
  int instances = 0;  // b_i
  int prompts = 0;    // n_i
};

struct Bracket {
  int s = 0;
  std::vector<Stage> stages;
};

/// Hyperband brackets over validation-instance counts.
///
/// b_min is rounded up to the smallest n_valid / eta^k that keeps every
/// level integral, and the adjustment is reported in notes.
struct HyperbandPlan {
  int n_valid = 0;
  int b_min_requested = 0;
  int b_min = 0;
  double eta = 2.0;
  int s_max = 0;
  long bracket_budget = 0;  // (s_max + 1) * n_valid
  std::vector<Bracket> brackets;  // s = s_max .. 0
  std::vector<std::string> notes;

  /// Sorted distinct subset sizes used by the plan.
  std::vector<int> levels() const;
};

HyperbandPlan build_plan(int n_valid, int b_min, double eta);

/// CSV with columns bracket,stage,instances,prompts.
std::string plan_csv(const HyperbandPlan& plan);

/// Indices of the k smallest errors; ties go to the earlier position, and
/// positions are the proposal order. Returned in rank order.
std::vector<std::size_t> top_k_indices(std::span<const double> errors, std::size_t k);

/// The k prompts with the smallest errors, in rank order.
std::vector<PromptId> top_k(std::span<const PromptId> prompts, std::span<const double> errors,
                            std::size_t k);

/// Per-prompt instances of the successive-halving baseline:
/// max(1, floor(B / (n log2 n))).
int sh_initial_budget(long total_budget, int n_prompts);

}  // namespace promptband
