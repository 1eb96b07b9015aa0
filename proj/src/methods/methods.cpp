#include "promptband/methods/methods.hpp"

#include "promptband/acquisition/acquisition.hpp"
#include "promptband/core/errors.hpp"
#include "promptband/core/random.hpp"
#include "promptband/scheduler/hyperband.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace promptband {

const char* to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::RandomSearch: return "rs";
    case MethodKind::VanillaBO: return "vanilla_bo";
    case MethodKind::BoPca: return "bopca";
    case MethodKind::BoPsNonStructural: return "bops_nonstructural";
    case MethodKind::BoPsStructural: return "bops_structural";
    case MethodKind::SuccessiveHalving: return "sh";
    case MethodKind::HbPs: return "hbps";
    case MethodKind::HbBoPs: return "hbbops";
  }
  return "unknown";
}

std::vector<MethodKind> all_methods() {
  return {MethodKind::RandomSearch,      MethodKind::VanillaBO,      MethodKind::BoPca,
          MethodKind::BoPsNonStructural, MethodKind::BoPsStructural, MethodKind::SuccessiveHalving,
          MethodKind::HbPs,              MethodKind::HbBoPs};
}

std::vector<MethodKind> ladder_methods() {
  return {MethodKind::VanillaBO, MethodKind::BoPsNonStructural, MethodKind::BoPsStructural,
          MethodKind::HbPs,      MethodKind::HbBoPs,            MethodKind::RandomSearch};
}

MethodKind parse_method(const std::string& name) {
  for (MethodKind k : all_methods()) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown method '" + name + "'");
}

bool is_full_fidelity(MethodKind kind) {
  switch (kind) {
    case MethodKind::SuccessiveHalving:
    case MethodKind::HbPs:
    case MethodKind::HbBoPs:
      return false;
    default:
      return true;
  }
}

long MethodConfig::budget_calls(int n_valid) const {
  return std::lround(budget * n_valid);
}

void MethodConfig::validate(int n_valid, std::size_t n_prompts) const {
  if (!(budget > 0.0) || !std::isfinite(budget)) throw ConfigError("budget must be positive");
  if (budget_calls(n_valid) < n_valid) {
    throw ConfigError("budget of " + std::to_string(budget) +
                      " full-fidelity evaluations is smaller than one full-fidelity evaluation");
  }
  if (rho < 0.0 || rho > 1.0) throw ConfigError("rho must lie in [0, 1]");
  if (b_min < 1) throw ConfigError("b_min must be positive");
  if (!(eta > 1.0)) throw ConfigError("eta must exceed 1");
  if (min_observations < 2) throw ConfigError("min_observations must be at least 2");
  if (is_full_fidelity(kind) && kind != MethodKind::RandomSearch) {
    if (initial_design < 2) throw ConfigError("initial_design must be at least 2");
    if (static_cast<double>(initial_design) >= budget) {
      throw ConfigError("budget must exceed the initial design size");
    }
    if (static_cast<std::size_t>(initial_design) > n_prompts) {
      throw ConfigError("initial design larger than the prompt pool");
    }
  }
}

std::uint64_t chain_seed(std::uint64_t run_seed) { return derive_seed(run_seed, hash_label("chain")); }

namespace {

struct Streams {
  std::uint64_t design, proposals, subsets, fit;
  explicit Streams(std::uint64_t seed)
      : design(derive_seed(seed, hash_label("design"))),
        proposals(derive_seed(seed, hash_label("proposals"))),
        subsets(derive_seed(seed, hash_label("subsets"))),
        fit(derive_seed(seed, hash_label("fit"))) {}
};

SurrogateKind surrogate_for(MethodKind kind) {
  switch (kind) {
    case MethodKind::VanillaBO: return SurrogateKind::VanillaGP;
    case MethodKind::BoPca: return SurrogateKind::PcaGP;
    case MethodKind::BoPsNonStructural: return SurrogateKind::DeepKernelJoint;
    default: return SurrogateKind::DeepKernelStructural;
  }
}

// Interleaving probability; the shallow-GP baselines run plain EI.
double rho_for(const MethodConfig& c) {
  switch (c.kind) {
    case MethodKind::BoPsNonStructural:
    case MethodKind::BoPsStructural:
    case MethodKind::HbBoPs:
      return c.rho;
    case MethodKind::HbPs:
      return 1.0;
    default:
      return 0.0;
  }
}

std::vector<PromptId> remaining(const std::vector<PromptId>& all, const std::set<PromptId>& used) {
  std::vector<PromptId> out;
  for (PromptId p : all) {
    if (!used.count(p)) out.push_back(p);
  }
  return out;
}

// Draws u, then either a uniform pick or a model proposal. The surrogate is
// only fitted when the draw asks for one.
template <typename FitFn>
PromptId propose_lazily(std::span<const PromptId> candidates, Rng& rng, double rho,
                        const PromptSpace& space, FitFn&& fit_snapshot) {
  if (candidates.empty()) throw ExhaustedError("no candidates left to propose");
  const double u = rng.uniform();
  if (u >= rho) {
    if (std::optional<FitSnapshot> snap = fit_snapshot()) {
      return argmax_ei(*snap, space, candidates).prompt_id;
    }
  }
  return candidates[rng.index(candidates.size())];
}

void run_full_fidelity(const MethodConfig& config, const PromptSpace& space, EvaluationSession& session,
                       const Streams& streams) {
  const int n_valid = session.chain().n_valid();
  const std::vector<PromptId> ids = space.all_ids();
  Rng design_rng(streams.design);
  const std::vector<int> order = design_rng.permutation(static_cast<int>(ids.size()));

  std::set<PromptId> used;
  std::size_t next = 0;
  auto evaluate = [&](PromptId p) {
    used.insert(p);
    return session.evaluate(p, n_valid).has_value();
  };

  if (config.kind == MethodKind::RandomSearch) {
    while (next < order.size() && evaluate(ids[static_cast<std::size_t>(order[next++])])) {
    }
    return;
  }
  for (int k = 0; k < config.initial_design; ++k) {
    if (!evaluate(ids[static_cast<std::size_t>(order[next++])])) return;
  }
  Rng rng(streams.proposals);
  const SurrogateKind kind = surrogate_for(config.kind);
  const double rho = rho_for(config);
  std::uint64_t fits = 0;
  while (!session.exhausted()) {
    const std::vector<PromptId> candidates = remaining(ids, used);
    if (candidates.empty()) {
      session.warnings().push_back("every prompt evaluated before the budget ran out");
      return;
    }
    const PromptId p = propose_lazily(candidates, rng, rho, space, [&]() -> std::optional<FitSnapshot> {
      return fit(kind, space, training_slice(session.ledger(), n_valid),
                 derive_seed(streams.fit, fits++), config.fit);
    });
    if (!evaluate(p)) return;
  }
}

void run_hyperband(const MethodConfig& config, const PromptSpace& space, EvaluationSession& session,
                   const Streams& streams) {
  const int n_valid = session.chain().n_valid();
  const HyperbandPlan plan = build_plan(n_valid, config.b_min, config.eta);
  for (const auto& note : plan.notes) session.warnings().push_back(note);
  const std::vector<PromptId> ids = space.all_ids();
  Rng rng(streams.proposals);
  const double rho = rho_for(config);
  const bool model = config.kind == MethodKind::HbBoPs;
  std::uint64_t fits = 0;

  const Proposer proposer = [&](const std::vector<PromptId>& in_bracket, int) -> std::optional<PromptId> {
    const std::set<PromptId> used(in_bracket.begin(), in_bracket.end());
    const std::vector<PromptId> candidates = remaining(ids, used);
    if (candidates.empty()) return std::nullopt;
    return propose_lazily(candidates, rng, rho, space, [&]() -> std::optional<FitSnapshot> {
      if (!model) return std::nullopt;
      const auto b = select_training_fidelity(session.ledger(), config.min_observations);
      if (!b) return std::nullopt;
      return fit(SurrogateKind::DeepKernelStructural, space, training_slice(session.ledger(), *b),
                 derive_seed(streams.fit, fits++), config.fit);
    });
  };

  for (long pass = 0; !session.exhausted(); ++pass) {
    const long before = session.ledger().calls_used();
    for (const Bracket& br : plan.brackets) {
      if (run_bracket(br, proposer, session, pass).budget_exhausted || session.exhausted()) return;
    }
    if (session.ledger().calls_used() == before) {
      session.warnings().push_back("a full Hyperband pass added no oracle calls; stopping early");
      return;
    }
  }
}

void run_successive_halving(const PromptSpace& space, EvaluationSession& session, const Streams& streams) {
  const int n_valid = session.chain().n_valid();
  const std::vector<PromptId> ids = space.all_ids();
  const int n = static_cast<int>(ids.size());
  if (n < 2) throw ConfigError("successive halving needs at least 2 prompts");
  const int b0 = std::min(sh_initial_budget(session.budget(), n), n_valid);

  std::vector<Stage> stages;
  for (int count = n, b = b0;; count /= 2, b = std::min(2 * b, n_valid)) {
    stages.push_back(Stage{b, count});
    if (count <= 1) break;
  }
  Rng rng(streams.proposals);
  const std::vector<int> order = rng.permutation(n);
  std::vector<PromptId> first;
  std::vector<double> errors;
  const StageKey key{0, -1, 0};
  for (int k = 0; k < n; ++k) {
    const PromptId p = ids[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
    const auto v = session.evaluate(p, b0, key);
    if (!v) return;
    first.push_back(p);
    errors.push_back(*v);
  }
  run_stages(stages, std::move(first), std::move(errors), session, key);
}

}  // namespace

RunTrace run_method(const MethodConfig& config, const PromptSpace& space, Oracle& oracle,
                    const FidelityChain& chain, const std::string& scenario) {
  if (oracle.n_prompts() != space.size()) {
    throw ValidationError("oracle has " + std::to_string(oracle.n_prompts()) + " prompts, space has " +
                          std::to_string(space.size()));
  }
  config.validate(oracle.n_valid(), space.size());
  const Streams streams(config.seed);
  EvaluationSession session(oracle, chain, config.policies, config.budget_calls(oracle.n_valid()),
                            streams.subsets);
  switch (config.kind) {
    case MethodKind::SuccessiveHalving:
      run_successive_halving(space, session, streams);
      break;
    case MethodKind::HbPs:
    case MethodKind::HbBoPs:
      run_hyperband(config, space, session, streams);
      break;
    default:
      run_full_fidelity(config, space, session, streams);
  }
  RunTrace trace;
  trace.method = to_string(config.kind);
  trace.scenario = scenario;
  trace.seed = config.seed;
  trace.budget_calls = session.budget();
  trace.events = session.events();
  trace.warnings = session.warnings();
  return trace;
}

}  // namespace promptband
