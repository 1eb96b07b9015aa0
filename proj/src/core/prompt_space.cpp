#include "promptband/core/prompt_space.hpp"

#include "promptband/core/errors.hpp"

#include <algorithm>
#include <string>

namespace promptband {

namespace {

void sort_and_check(std::vector<Component>& items, const char* what, Eigen::Index& dim) {
  std::sort(items.begin(), items.end(),
            [](const Component& a, const Component& b) { return a.id < b.id; });
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (k > 0 && items[k].id == items[k - 1].id) {
      throw ValidationError(std::string("duplicate ") + what + " id " +
                            std::to_string(items[k].id));
    }
    const auto& e = items[k].embedding;
    if (dim < 0) dim = e.size();
    if (e.size() != dim || dim == 0) {
      throw DimensionError(std::string(what) + " " + std::to_string(items[k].id) +
                           " has embedding length " + std::to_string(e.size()) +
                           ", expected " + std::to_string(dim));
    }
    if (!e.allFinite()) {
      throw ValidationError(std::string(what) + " " + std::to_string(items[k].id) +
                            " has a non-finite embedding component");
    }
  }
}

}  // namespace

PromptSpace build_prompt_space(std::vector<Component> instructions,
                               std::vector<Component> exemplars) {
  if (instructions.empty()) throw EmptySpaceError("no instructions given");
  if (exemplars.empty()) throw EmptySpaceError("no exemplars given");

  Eigen::Index dim = -1;
  sort_and_check(instructions, "instruction", dim);
  sort_and_check(exemplars, "exemplar", dim);

  PromptSpace space;
  space.embedding_dim_ = static_cast<int>(dim);
  space.prompts_.reserve(instructions.size() * exemplars.size());
  PromptId next = 0;
  for (std::size_t i = 0; i < instructions.size(); ++i) {
    for (std::size_t e = 0; e < exemplars.size(); ++e) {
      space.prompts_.push_back(Prompt{next++, instructions[i].id, exemplars[e].id,
                                      static_cast<int>(i), static_cast<int>(e)});
    }
  }
  space.instructions_ = std::move(instructions);
  space.exemplars_ = std::move(exemplars);
  return space;
}

const Prompt& PromptSpace::prompt(PromptId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= prompts_.size()) {
    throw RangeError("prompt id " + std::to_string(id) + " outside [0, " +
                     std::to_string(prompts_.size()) + ")");
  }
  return prompts_[static_cast<std::size_t>(id)];
}

const Eigen::VectorXd& PromptSpace::instruction_embedding(PromptId id) const {
  return instructions_[static_cast<std::size_t>(prompt(id).instruction_index)].embedding;
}

const Eigen::VectorXd& PromptSpace::exemplar_embedding(PromptId id) const {
  return exemplars_[static_cast<std::size_t>(prompt(id).exemplar_index)].embedding;
}

Eigen::MatrixXd PromptSpace::instruction_matrix(std::span<const PromptId> ids) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), embedding_dim_);
  for (std::size_t j = 0; j < ids.size(); ++j) {
    out.row(static_cast<Eigen::Index>(j)) = instruction_embedding(ids[j]).transpose();
  }
  return out;
}

Eigen::MatrixXd PromptSpace::exemplar_matrix(std::span<const PromptId> ids) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), embedding_dim_);
  for (std::size_t j = 0; j < ids.size(); ++j) {
    out.row(static_cast<Eigen::Index>(j)) = exemplar_embedding(ids[j]).transpose();
  }
  return out;
}

Eigen::MatrixXd PromptSpace::joint_matrix(std::span<const PromptId> ids) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), 2 * embedding_dim_);
  out.leftCols(embedding_dim_) = instruction_matrix(ids);
  out.rightCols(embedding_dim_) = exemplar_matrix(ids);
  return out;
}

std::vector<PromptId> PromptSpace::all_ids() const {
  std::vector<PromptId> ids(prompts_.size());
  for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = static_cast<PromptId>(k);
  return ids;
}

}  // namespace promptband
