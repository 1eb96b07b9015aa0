#include "promptband/scheduler/session.hpp"

#include "promptband/core/errors.hpp"
#include "promptband/core/random.hpp"

#include <algorithm>
#include <limits>

namespace promptband {

const char* to_string(IncumbentPolicy p) {
  return p == IncumbentPolicy::HighestFidelity ? "highest_fidelity" : "lowest_error";
}
const char* to_string(SubsetPolicy p) { return p == SubsetPolicy::Superset ? "superset" : "independent"; }
const char* to_string(PairingPolicy p) { return p == PairingPolicy::Paired ? "paired" : "per_prompt"; }

IncumbentPolicy parse_incumbent_policy(const std::string& s) {
  if (s == "highest_fidelity") return IncumbentPolicy::HighestFidelity;
  if (s == "lowest_error") return IncumbentPolicy::LowestError;
  throw ConfigError("unknown incumbent policy '" + s + "'");
}
SubsetPolicy parse_subset_policy(const std::string& s) {
  if (s == "superset") return SubsetPolicy::Superset;
  if (s == "independent") return SubsetPolicy::Independent;
  throw ConfigError("unknown subset policy '" + s + "'");
}
PairingPolicy parse_pairing_policy(const std::string& s) {
  if (s == "paired") return PairingPolicy::Paired;
  if (s == "per_prompt") return PairingPolicy::PerPrompt;
  throw ConfigError("unknown pairing policy '" + s + "'");
}

Incumbent select_incumbent(const EvaluationLedger& ledger, IncumbentPolicy policy) {
  if (ledger.empty()) throw NoIncumbentError("no evaluations yet");
  std::optional<Incumbent> best;
  auto better = [](const FidelityRecord& r, const Incumbent& inc) {
    if (r.mean_error != inc.error) return r.mean_error < inc.error;
    if (r.prompt_id != inc.prompt_id) return r.prompt_id < inc.prompt_id;
    return r.subset_size > inc.fidelity;
  };
  if (policy == IncumbentPolicy::HighestFidelity) {
    const int b = ledger.subset_sizes().back();
    for (const auto& r : ledger.latest_at(b)) {
      if (!best || better(r, *best)) best = Incumbent{r.prompt_id, r.mean_error, r.subset_size};
    }
  } else {
    for (const auto& r : ledger.records()) {
      if (!best || better(r, *best)) best = Incumbent{r.prompt_id, r.mean_error, r.subset_size};
    }
  }
  return *best;
}

EvaluationSession::EvaluationSession(Oracle& oracle, const FidelityChain& chain, PolicySet policies,
                                     long budget_calls, std::uint64_t subset_seed)
    : oracle_(oracle),
      chain_(chain),
      policies_(policies),
      budget_(budget_calls),
      subset_seed_(subset_seed),
      ledger_(policies.caching) {
  if (budget_calls <= 0) throw ConfigError("budget must be positive");
  if (oracle.n_valid() != chain.n_valid()) {
    throw ValidationError("oracle has " + std::to_string(oracle.n_valid()) +
                          " validation instances but the chain has " + std::to_string(chain.n_valid()));
  }
}

std::vector<int> EvaluationSession::subset(PromptId prompt, int b, const StageKey& key) {
  const int n = chain_.n_valid();
  if (b < 1 || b > n) throw RangeError("subset size " + std::to_string(b) + " outside 1.." + std::to_string(n));
  const bool paired = policies_.pairing == PairingPolicy::Paired;
  if (policies_.subset == SubsetPolicy::Superset) {
    if (paired) {
      auto s = chain_.prefix(b);
      return {s.begin(), s.end()};
    }
    auto it = prompt_permutations_.find(prompt);
    if (it == prompt_permutations_.end()) {
      Rng rng(derive_seed(subset_seed_, static_cast<std::uint64_t>(prompt)));
      it = prompt_permutations_.emplace(prompt, rng.permutation(n)).first;
    }
    return {it->second.begin(), it->second.begin() + b};
  }
  // Independent: a fresh draw per stage, shared by all prompts when paired.
  const std::uint64_t stage_seed =
      derive_seed(subset_seed_, static_cast<std::uint64_t>(key.pass), static_cast<std::uint64_t>(key.bracket),
                  static_cast<std::uint64_t>(key.stage), static_cast<std::uint64_t>(b));
  Rng rng(paired ? stage_seed : derive_seed(stage_seed, static_cast<std::uint64_t>(prompt)));
  std::vector<int> perm = rng.permutation(n);
  perm.resize(static_cast<std::size_t>(b));
  return perm;
}

void EvaluationSession::emit() {
  if (ledger_.empty()) return;
  const Incumbent inc = select_incumbent(ledger_, policies_.incumbent);
  events_.push_back(TraceEvent{ledger_.calls_used(), inc.prompt_id, inc.error, inc.fidelity});
}

std::optional<double> EvaluationSession::evaluate(PromptId prompt, int b, const StageKey& key) {
  if (exhausted()) return std::nullopt;
  const std::vector<int> instances = subset(prompt, b, key);
  const std::vector<int> fresh = ledger_.uncached(prompt, instances);
  const long room = remaining();

  if (static_cast<long>(fresh.size()) > room) {
    // Spend what is left, then stop.
    std::vector<int> part(fresh.begin(), fresh.begin() + room);
    try {
      const std::vector<double> losses = oracle_.evaluate(prompt, part);
      ledger_.record_pointwise(prompt, part, losses);
    } catch (const OracleUnavailable& e) {
      std::vector<int> ids;
      std::vector<double> losses;
      for (const auto& [i, l] : e.partial()) {
        if (std::find(part.begin(), part.end(), i) != part.end()) {
          ids.push_back(i);
          losses.push_back(l);
        }
      }
      ledger_.record_pointwise(prompt, ids, losses);
      throw;
    }
    warnings_.push_back("budget reached during prompt " + std::to_string(prompt) + " at b=" +
                        std::to_string(b) + " (" + std::to_string(room) + " of " +
                        std::to_string(fresh.size()) + " calls spent)");
    emit();
    return std::nullopt;
  }

  std::vector<double> fresh_losses;
  if (!fresh.empty()) {
    try {
      fresh_losses = oracle_.evaluate(prompt, fresh);
    } catch (const OracleUnavailable& e) {
      std::vector<int> ids;
      std::vector<double> losses;
      for (const auto& [i, l] : e.partial()) {
        ids.push_back(i);
        losses.push_back(l);
      }
      ledger_.record_pointwise(prompt, ids, losses);
      throw;
    }
  }
  std::vector<double> losses(instances.size());
  std::size_t f = 0;
  for (std::size_t k = 0; k < instances.size(); ++k) {
    if (f < fresh.size() && fresh[f] == instances[k]) {
      losses[k] = fresh_losses[f++];
    } else {
      losses[k] = *ledger_.cached(prompt, instances[k]);
    }
  }
  const double mean = ledger_.record_evaluation(prompt, instances, losses);
  emit();
  return mean;
}

BracketOutcome run_stages(const std::vector<Stage>& stages, std::vector<PromptId> first,
                          std::vector<double> first_errors, EvaluationSession& session,
                          const StageKey& key) {
  BracketOutcome out;
  std::vector<PromptId> prompts = std::move(first);
  std::vector<double> errors = std::move(first_errors);
  out.stage_prompts.push_back(prompts);
  for (std::size_t i = 1; i < stages.size(); ++i) {
    if (prompts.empty()) break;
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(stages[i].prompts), prompts.size());
    // Survivors are evaluated in their original proposal order.
    std::vector<std::size_t> keep = top_k_indices(errors, k);
    std::sort(keep.begin(), keep.end());
    std::vector<PromptId> next;
    std::vector<double> next_errors;
    StageKey stage_key = key;
    stage_key.stage = static_cast<int>(i);
    for (std::size_t idx : keep) {
      const auto v = session.evaluate(prompts[idx], stages[i].instances, stage_key);
      if (!v) {
        out.budget_exhausted = true;
        out.stage_prompts.push_back(next);
        return out;
      }
      next.push_back(prompts[idx]);
      next_errors.push_back(*v);
    }
    prompts = std::move(next);
    errors = std::move(next_errors);
    out.stage_prompts.push_back(prompts);
  }
  return out;
}

BracketOutcome run_bracket(const Bracket& bracket, const Proposer& proposer,
                           EvaluationSession& session, long pass) {
  if (bracket.stages.empty()) throw ValidationError("bracket has no stages");
  const Stage& s0 = bracket.stages.front();
  const StageKey key{pass, bracket.s, 0};
  std::vector<PromptId> prompts;
  std::vector<double> errors;
  for (int j = 0; j < s0.prompts; ++j) {
    const std::optional<PromptId> p = proposer(prompts, s0.instances);
    if (!p) {
      session.warnings().push_back("bracket s=" + std::to_string(bracket.s) + " ran with " +
                                   std::to_string(prompts.size()) + " of " +
                                   std::to_string(s0.prompts) + " prompts: candidates exhausted");
      break;
    }
    const auto v = session.evaluate(*p, s0.instances, key);
    if (!v) {
      BracketOutcome out;
      out.stage_prompts.push_back(prompts);
      out.budget_exhausted = true;
      return out;
    }
    prompts.push_back(*p);
    errors.push_back(*v);
  }
  BracketOutcome out = run_stages(bracket.stages, std::move(prompts), std::move(errors), session, key);
  return out;
}

}  // namespace promptband
