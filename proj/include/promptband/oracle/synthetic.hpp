#pragma once

#include "promptband/core/scenario_files.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>

namespace promptband {

/// Desk-scale stand-in for an LLM benchmark.
///
/// Prompt (i, e) succeeds on an instance with probability
///   clamp(w_instruction * a_i + w_exemplar * c_e + interaction * a_i * c_e, 0.02, 0.98)
/// where a_i, c_e ~ U[0, 1]. Losses are Bernoulli with that marginal; instances
/// carry a shared difficulty so prompts are correlated on the same instance.
/// Embeddings are noisy linear images of the quality score mixed with
/// quality-free nuisance factors.
struct SyntheticSpec {
  int n_instructions = 5;
  int n_exemplars = 50;
  int n_valid = 200;
  int n_test = 100;
  int embedding_dim = 16;
  std::uint64_t seed = 7;

  double w_instruction = 0.35;
  double w_exemplar = 0.45;
  double interaction = 0.15;
  double instance_correlation = 0.5;
  int nuisance_factors = 3;
  double nuisance_scale = 3.0;
  double embedding_noise = 3.0;

  std::string name = "synthetic";
};

struct SyntheticScenario {
  ScenarioFiles files;
  Eigen::VectorXd instruction_quality;  // a_i, by instruction index
  Eigen::VectorXd exemplar_quality;     // c_e, by exemplar index
  Eigen::MatrixXd success_probability;  // prompts x 1, P(loss = 0)

  Eigen::VectorXd expected_loss() const { return 1.0 - success_probability.col(0).array(); }
};

SyntheticScenario generate_synthetic(const SyntheticSpec& spec);

}  // namespace promptband
