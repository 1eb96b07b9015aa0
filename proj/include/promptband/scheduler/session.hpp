#pragma once

#include "promptband/core/fidelity.hpp"
#include "promptband/core/ledger.hpp"
#include "promptband/core/trace.hpp"
#include "promptband/oracle/oracle.hpp"
#include "promptband/scheduler/hyperband.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace promptband {

enum class IncumbentPolicy { HighestFidelity, LowestError };
enum class SubsetPolicy { Superset, Independent };
enum class PairingPolicy { Paired, PerPrompt };

struct PolicySet {
  IncumbentPolicy incumbent = IncumbentPolicy::HighestFidelity;
  SubsetPolicy subset = SubsetPolicy::Superset;
  PairingPolicy pairing = PairingPolicy::Paired;
  bool caching = true;

  bool operator==(const PolicySet&) const = default;
};

const char* to_string(IncumbentPolicy p);
const char* to_string(SubsetPolicy p);
const char* to_string(PairingPolicy p);
IncumbentPolicy parse_incumbent_policy(const std::string& s);
SubsetPolicy parse_subset_policy(const std::string& s);
PairingPolicy parse_pairing_policy(const std::string& s);

struct Incumbent {
  PromptId prompt_id = 0;
  double error = 0.0;
  int fidelity = 0;
};

/// HighestFidelity: best latest record at the largest subset size present.
/// LowestError: best record overall (ties: lower prompt id, then higher b).
Incumbent select_incumbent(const EvaluationLedger& ledger, IncumbentPolicy policy);

/// Identifies the SH stage an evaluation belongs to; Independent subsets are
/// drawn fresh per key.
struct StageKey {
  long pass = 0;
  int bracket = 0;
  int stage = 0;
};

/// Oracle access under a call budget. Every completed evaluation appends a
/// trace event; an evaluation that would overrun the budget spends the
/// remaining calls on a prefix of its uncached instances and ends the run.
class EvaluationSession {
 public:
  EvaluationSession(Oracle& oracle, const FidelityChain& chain, PolicySet policies,
                    long budget_calls, std::uint64_t subset_seed);

  /// Mean error of prompt on the policy's subset of size b, or nullopt when
  /// the budget ran out.
  std::optional<double> evaluate(PromptId prompt, int b, const StageKey& key = {});

  bool exhausted() const { return ledger_.calls_used() >= budget_; }
  long remaining() const { return budget_ - ledger_.calls_used(); }
  long budget() const { return budget_; }

  const EvaluationLedger& ledger() const { return ledger_; }
  const PolicySet& policies() const { return policies_; }
  const FidelityChain& chain() const { return chain_; }
  const std::vector<TraceEvent>& events() const { return events_; }
  std::vector<std::string>& warnings() { return warnings_; }

  std::vector<int> subset(PromptId prompt, int b, const StageKey& key);

 private:
  void emit();

  Oracle& oracle_;
  const FidelityChain& chain_;
  PolicySet policies_;
  long budget_;
  std::uint64_t subset_seed_;
  EvaluationLedger ledger_;
  std::map<PromptId, std::vector<int>> prompt_permutations_;
  std::vector<TraceEvent> events_;
  std::vector<std::string> warnings_;
};

/// Returns the next prompt to evaluate given the prompts already proposed in
/// the bracket, or nullopt if no candidate is left.
using Proposer = std::function<std::optional<PromptId>(const std::vector<PromptId>& in_bracket, int b)>;

struct BracketOutcome {
  std::vector<std::vector<PromptId>> stage_prompts;
  bool budget_exhausted = false;
};

/// Successive halving from an already evaluated stage 0 through the
/// remaining stages.
BracketOutcome run_stages(const std::vector<Stage>& stages, std::vector<PromptId> first,
                          std::vector<double> first_errors, EvaluationSession& session,
                          const StageKey& key);

/// One Hyperband bracket: stage-0 prompts are proposed and evaluated one at
/// a time, then successive halving with superset extensions.
BracketOutcome run_bracket(const Bracket& bracket, const Proposer& proposer,
                           EvaluationSession& session, long pass = 0);

}  // namespace promptband
