#include "promptband/acquisition/acquisition.hpp"

namespace promptband {

Proposal argmax_ei(const FitSnapshot& snapshot, const PromptSpace& space,
                   std::span<const PromptId> candidates) {
  if (candidates.empty()) throw ExhaustedError("no candidates left to propose");
  const Posterior post = snapshot.predict(space, candidates);
  const double v_min = snapshot.best_standardized_target();
  Proposal best;
  best.source = ProposalSource::Model;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto j = static_cast<Eigen::Index>(k);
    const double ei = expected_improvement(post.mean(j), post.std(j), v_min);
    if (!best.ei || ei > *best.ei || (ei == *best.ei && candidates[k] < best.prompt_id)) {
      best.prompt_id = candidates[k];
      best.ei = ei;
    }
  }
  return best;
}

Proposal propose(const FitSnapshot* snapshot, const PromptSpace& space,
                 std::span<const PromptId> candidates, Rng& rng, double rho) {
  if (candidates.empty()) throw ExhaustedError("no candidates left to propose");
  if (rho < 0.0 || rho > 1.0) throw ParameterError("rho must lie in [0, 1]");
  const double u = rng.uniform();
  if (snapshot == nullptr || u < rho) {
    return Proposal{candidates[rng.index(candidates.size())], ProposalSource::Random, std::nullopt};
  }
  return argmax_ei(*snapshot, space, candidates);
}

}  // namespace promptband
