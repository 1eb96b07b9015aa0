#pragma once

#include "promptband/core/errors.hpp"
#include "promptband/core/prompt_space.hpp"
#include "promptband/core/random.hpp"
#include "promptband/surrogate/gp.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <string>

namespace promptband {

/// Expected improvement below v_min of a Gaussian N(mu, sigma^2) (minimization).
template <typename Scalar>
Scalar expected_improvement(Scalar mu, Scalar sigma, Scalar v_min) {
  using std::erfc;
  using std::exp;
  using std::sqrt;
  if (!std::isfinite(mu) || !std::isfinite(sigma) || !std::isfinite(v_min)) {
    throw NumericalError("expected_improvement: non-finite input");
  }
  if (sigma < Scalar(0)) throw NumericalError("expected_improvement: negative sigma");
  const Scalar gap = v_min - mu;
  if (sigma == Scalar(0)) return gap > Scalar(0) ? gap : Scalar(0);
  const Scalar t = gap / sigma;
  const Scalar cdf = Scalar(0.5) * erfc(-t / sqrt(Scalar(2)));
  const Scalar pdf = exp(Scalar(-0.5) * t * t) / sqrt(Scalar(2) * Scalar(M_PI));
  const Scalar ei = gap * cdf + sigma * pdf;
  return ei > Scalar(0) ? ei : Scalar(0);
}

enum class ProposalSource { Model, Random };

struct Proposal {
  PromptId prompt_id = 0;
  ProposalSource source = ProposalSource::Random;
  std::optional<double> ei;  // set for model-based proposals
};

/// With probability rho, or without a snapshot, a uniform pick from
/// candidates; otherwise the EI argmax (ties to the lowest prompt id).
/// The reference v_min is the snapshot's best standardized training target.
/// Exactly one uniform draw decides interleaving on every call.
Proposal propose(const FitSnapshot* snapshot, const PromptSpace& space,
                 std::span<const PromptId> candidates, Rng& rng, double rho = 0.1);

/// Argmax of EI over candidates; ties to the lowest prompt id.
Proposal argmax_ei(const FitSnapshot& snapshot, const PromptSpace& space,
                   std::span<const PromptId> candidates);

}  // namespace promptband
