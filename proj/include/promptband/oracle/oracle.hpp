#pragma once

#include "promptband/core/errors.hpp"
#include "promptband/core/prompt_space.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace promptband {

struct NormalizationPolicy {
  bool trim = true;
  bool casefold = true;
};

/// 0 when the normalized strings are equal, 1 otherwise.
double exact_match_loss(std::string_view y, std::string_view y_hat,
                        const NormalizationPolicy& policy = {});

/// Raised when a remote oracle keeps failing; carries the losses that did
/// arrive, keyed by instance id.
class OracleUnavailable : public Error {
 public:
  OracleUnavailable(const std::string& what, PromptId prompt, std::map<int, double> partial)
      : Error(what), prompt_(prompt), partial_(std::move(partial)) {}
  PromptId prompt() const { return prompt_; }
  const std::map<int, double>& partial() const { return partial_; }

 private:
  PromptId prompt_;
  std::map<int, double> partial_;
};

/// Maps (prompt, validation instances) to point-wise losses, in instance order.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual std::vector<double> evaluate(PromptId prompt, std::span<const int> instances) = 0;
  virtual std::size_t n_prompts() const = 0;
  virtual int n_valid() const = 0;
  virtual bool deterministic() const { return true; }
};

/// Replays precomputed losses. evaluate() is a pure lookup into valid_matrix;
/// test_matrix only serves reporting.
class TabularOracle final : public Oracle {
 public:
  TabularOracle(Eigen::MatrixXd valid_matrix, Eigen::MatrixXd test_matrix);

  std::vector<double> evaluate(PromptId prompt, std::span<const int> instances) override;
  std::size_t n_prompts() const override { return static_cast<std::size_t>(valid_.rows()); }
  int n_valid() const override { return static_cast<int>(valid_.cols()); }
  int n_test() const { return static_cast<int>(test_.cols()); }

  const Eigen::MatrixXd& valid_matrix() const { return valid_; }
  const Eigen::MatrixXd& test_matrix() const { return test_; }

  /// Full-validation / full-test mean error of a prompt.
  double valid_error(PromptId prompt) const;
  double test_error(PromptId prompt) const;

 private:
  Eigen::MatrixXd valid_;
  Eigen::MatrixXd test_;
};

/// Variance across n_replicates bootstrap means of k losses drawn with
/// replacement from row.
double bootstrap_variance(std::span<const double> row, int k, int n_replicates, std::uint64_t seed);

}  // namespace promptband
