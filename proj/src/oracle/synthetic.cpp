#include "promptband/oracle/synthetic.hpp"

#include "promptband/core/errors.hpp"
#include "promptband/core/random.hpp"

#include <algorithm>
#include <cmath>

namespace promptband {

namespace {

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::vector<Component> make_components(int count, const Eigen::VectorXd& quality, int dim,
                                       const SyntheticSpec& spec, Rng& rng) {
  const int factors = 1 + spec.nuisance_factors;
  Eigen::MatrixXd mixing(dim, factors);
  for (Eigen::Index r = 0; r < mixing.rows(); ++r) {
    for (Eigen::Index c = 0; c < mixing.cols(); ++c) {
      mixing(r, c) = rng.normal() / std::sqrt(static_cast<double>(factors));
    }
  }
  std::vector<Component> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    Eigen::VectorXd latent(factors);
    latent(0) = (quality(k) - 0.5) * std::sqrt(12.0);  // unit variance
    for (int f = 1; f < factors; ++f) latent(f) = spec.nuisance_scale * rng.normal();
    Eigen::VectorXd z = mixing * latent;
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) += spec.embedding_noise * rng.normal();
    out.push_back(Component{k, std::move(z)});
  }
  return out;
}

Eigen::MatrixXd draw_losses(const Eigen::VectorXd& success, int n_instances, double correlation,
                            Rng& rng) {
  const double shared = std::sqrt(correlation);
  const double own = std::sqrt(1.0 - correlation);
  Eigen::VectorXd difficulty(n_instances);
  for (int i = 0; i < n_instances; ++i) difficulty(i) = rng.normal();
  Eigen::MatrixXd losses(success.size(), n_instances);
  for (Eigen::Index p = 0; p < success.size(); ++p) {
    for (int i = 0; i < n_instances; ++i) {
      // Uniform marginal, so P(loss = 1) = 1 - success(p) exactly.
      const double u = std_normal_cdf(shared * difficulty(i) + own * rng.normal());
      losses(p, i) = u > success(p) ? 1.0 : 0.0;
    }
  }
  return losses;
}

}  // namespace

SyntheticScenario generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_instructions <= 0 || spec.n_exemplars <= 0) {
    throw ValidationError("synthetic spec has zero prompts");
  }
  if (spec.n_valid <= 0 || spec.n_test <= 0 || spec.embedding_dim <= 0) {
    throw ValidationError("synthetic spec counts must be positive");
  }
  if (spec.interaction < 0.0) throw ValidationError("interaction weight must be non-negative");
  if (spec.instance_correlation < 0.0 || spec.instance_correlation >= 1.0) {
    throw ValidationError("instance_correlation must lie in [0, 1)");
  }
  if (spec.nuisance_factors < 0) throw ValidationError("nuisance_factors must be non-negative");

  Rng rng(spec.seed);
  SyntheticScenario out;
  out.instruction_quality.resize(spec.n_instructions);
  out.exemplar_quality.resize(spec.n_exemplars);
  for (int i = 0; i < spec.n_instructions; ++i) out.instruction_quality(i) = rng.uniform();
  for (int e = 0; e < spec.n_exemplars; ++e) out.exemplar_quality(e) = rng.uniform();

  auto instructions =
      make_components(spec.n_instructions, out.instruction_quality, spec.embedding_dim, spec, rng);
  auto exemplars =
      make_components(spec.n_exemplars, out.exemplar_quality, spec.embedding_dim, spec, rng);
  out.files.space = build_prompt_space(std::move(instructions), std::move(exemplars));

  const auto n_prompts = static_cast<Eigen::Index>(out.files.space.size());
  out.success_probability.resize(n_prompts, 1);
  for (const auto& p : out.files.space.prompts()) {
    const double a = out.instruction_quality(p.instruction_index);
    const double c = out.exemplar_quality(p.exemplar_index);
    const double s = spec.w_instruction * a + spec.w_exemplar * c + spec.interaction * a * c;
    out.success_probability(p.prompt_id, 0) = std::clamp(s, 0.02, 0.98);
  }

  const Eigen::VectorXd success = out.success_probability.col(0);
  out.files.valid_losses = draw_losses(success, spec.n_valid, spec.instance_correlation, rng);
  out.files.test_losses = draw_losses(success, spec.n_test, spec.instance_correlation, rng);
  out.files.manifest = ScenarioManifest{spec.name, spec.n_valid, spec.n_test, spec.embedding_dim,
                                        "exact_match"};
  return out;
}

}  // namespace promptband
