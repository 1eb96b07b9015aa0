#pragma once

#include "promptband/core/fidelity.hpp"
#include "promptband/core/prompt_space.hpp"
#include "promptband/core/trace.hpp"
#include "promptband/oracle/oracle.hpp"
#include "promptband/scheduler/session.hpp"
#include "promptband/surrogate/gp.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace promptband {

enum class MethodKind {
  RandomSearch,
  VanillaBO,
  BoPca,
  BoPsNonStructural,
  BoPsStructural,
  SuccessiveHalving,
  HbPs,
  HbBoPs,
};

const char* to_string(MethodKind kind);
MethodKind parse_method(const std::string& name);
std::vector<MethodKind> all_methods();
/// RS, vanilla BO, BoPs (both deep kernels), HbPs, HbBoPs.
std::vector<MethodKind> ladder_methods();

bool is_full_fidelity(MethodKind kind);

struct MethodConfig {
  MethodKind kind = MethodKind::HbBoPs;
  double budget = 25.0;  // in full-fidelity evaluations
  int initial_design = 10;
  double rho = 0.1;
  int b_min = 10;
  double eta = 2.0;
  int min_observations = 4;
  std::uint64_t seed = 0;
  PolicySet policies;
  FitOptions fit;

  /// Budget in oracle calls for a scenario with n_valid instances.
  long budget_calls(int n_valid) const;
  void validate(int n_valid, std::size_t n_prompts) const;
};

/// Runs one selection method until the call budget is spent.
RunTrace run_method(const MethodConfig& config, const PromptSpace& space, Oracle& oracle,
                    const FidelityChain& chain, const std::string& scenario = "");

/// Seed of the validation-instance chain for repetition seed; shared by all
/// methods so runs are paired.
std::uint64_t chain_seed(std::uint64_t run_seed);

}  // namespace promptband
