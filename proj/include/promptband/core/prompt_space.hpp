#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace promptband {

using PromptId = int;

/// An instruction or an exemplar together with its encoder embedding.
struct Component {
  int id = 0;
  Eigen::VectorXd embedding;
};

struct Prompt {
  PromptId prompt_id = 0;
  int instruction_id = 0;
  int exemplar_id = 0;
  // Positions into the (id-sorted) component lists of the owning space.
  int instruction_index = 0;
  int exemplar_index = 0;
};

/// The finite pool of prompts, the Cartesian product of instructions and
/// exemplars. Immutable after construction.
class PromptSpace {
 public:
  PromptSpace() = default;

  std::size_t size() const { return prompts_.size(); }
  int embedding_dim() const { return embedding_dim_; }

  const std::vector<Component>& instructions() const { return instructions_; }
  const std::vector<Component>& exemplars() const { return exemplars_; }
  const std::vector<Prompt>& prompts() const { return prompts_; }
  const Prompt& prompt(PromptId id) const;

  const Eigen::VectorXd& instruction_embedding(PromptId id) const;
  const Eigen::VectorXd& exemplar_embedding(PromptId id) const;

  /// Row j holds the instruction embedding of ids[j].
  Eigen::MatrixXd instruction_matrix(std::span<const PromptId> ids) const;
  /// Row j holds the exemplar embedding of ids[j].
  Eigen::MatrixXd exemplar_matrix(std::span<const PromptId> ids) const;
  /// Row j holds [instruction | exemplar] of ids[j] (the whole-prompt input).
  Eigen::MatrixXd joint_matrix(std::span<const PromptId> ids) const;

  std::vector<PromptId> all_ids() const;

  friend PromptSpace build_prompt_space(std::vector<Component> instructions,
                                        std::vector<Component> exemplars);

 private:
  std::vector<Component> instructions_;
  std::vector<Component> exemplars_;
  std::vector<Prompt> prompts_;
  int embedding_dim_ = 0;
};

/// Builds I x E with prompt ids ordered lexicographically by
/// (instruction_id, exemplar_id).
PromptSpace build_prompt_space(std::vector<Component> instructions,
                               std::vector<Component> exemplars);

}  // namespace promptband
