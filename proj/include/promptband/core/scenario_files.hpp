#pragma once

#include "promptband/core/prompt_space.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>

namespace promptband {

struct ScenarioManifest {
  std::string name;
  int n_valid = 0;
  int n_test = 0;
  int embedding_dim = 0;
  std::string loss_kind = "exact_match";
};

/// In-memory form of the on-disk scenario contract:
///   instructions.csv, exemplars.csv  id, e0..e{d-1}
///   prompts.csv                      prompt_id, instruction_id, exemplar_id
///   valid_losses.csv, test_losses.csv prompt_id, instance_id, loss
///   manifest.json                    {name, n_valid, n_test, embedding_dim, loss_kind}
struct ScenarioFiles {
  ScenarioManifest manifest;
  PromptSpace space;
  Eigen::MatrixXd valid_losses;  // prompts x n_valid
  Eigen::MatrixXd test_losses;   // prompts x n_test
};

ScenarioFiles read_scenario_files(const std::filesystem::path& dir);
void write_scenario_files(const std::filesystem::path& dir, const ScenarioFiles& files);

/// Loads only instructions.csv / exemplars.csv into a prompt space.
PromptSpace read_prompt_space(const std::filesystem::path& dir);

}  // namespace promptband
