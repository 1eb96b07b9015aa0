#pragma once

#include "promptband/core/ledger.hpp"
#include "promptband/core/prompt_space.hpp"
#include "promptband/numerics/adamw.hpp"
#include "promptband/numerics/cholesky.hpp"
#include "promptband/numerics/feature_extractor.hpp"
#include "promptband/surrogate/mll.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace promptband {

enum class SurrogateKind {
  VanillaGP,             // Matérn-5/2 on the concatenated [instruction | exemplar] embedding
  PcaGP,                 // same after a PCA of the training inputs
  DeepKernelJoint,       // deep kernel with one extractor over the concatenated embedding
  DeepKernelStructural,  // deep kernel with separate instruction / exemplar blocks
};

const char* to_string(SurrogateKind kind);

struct FitOptions {
  int max_epochs = 3000;
  int patience = 10;
  double min_improvement = 1e-4;
  AdamWOptions optimizer;
  double noise_floor = 1e-6;
  int pca_components = 10;
  double target_std_floor = 1e-8;
};

/// Observed errors of distinct prompts at one fidelity level.
struct TrainingSlice {
  std::vector<PromptId> prompts;
  Eigen::VectorXd errors;
  int fidelity = 0;
};

/// Latest record per prompt at subset size b.
TrainingSlice training_slice(const EvaluationLedger& ledger, int b);

/// Largest subset size with at least min_count distinct prompts observed.
std::optional<int> select_training_fidelity(const EvaluationLedger& ledger, int min_count = 4);

struct Posterior {
  Eigen::VectorXd mean;  // standardized target space
  Eigen::VectorXd std;
};

/// Everything needed to predict from a fitted surrogate. Immutable.
class FitSnapshot {
 public:
  SurrogateKind kind() const { return kind_; }
  int fidelity() const { return fidelity_; }
  const std::vector<PromptId>& training_prompts() const { return training_prompts_; }
  const Eigen::VectorXd& standardized_targets() const { return targets_; }
  double target_mean() const { return target_mean_; }
  double target_std() const { return target_std_; }
  const KernelParams& kernel() const { return kernel_; }
  const RawKernelParams& raw_kernel() const { return raw_kernel_; }
  const std::optional<ExtractorParams>& extractor() const { return extractor_; }
  /// Training inputs after the model's transformation, i.e. what the kernel sees.
  const Eigen::MatrixXd& training_features() const { return features_; }
  double mll() const { return mll_; }
  double initial_mll() const { return initial_mll_; }
  int epochs() const { return epochs_; }
  /// Minimum standardized observed error over the training slice.
  double best_standardized_target() const { return targets_.minCoeff(); }

  /// Kernel-space features of arbitrary prompts.
  Eigen::MatrixXd features(const PromptSpace& space, std::span<const PromptId> ids) const;

  Posterior predict(const PromptSpace& space, std::span<const PromptId> ids) const;
  /// Posterior for already-transformed kernel inputs.
  Posterior predict_features(const Eigen::MatrixXd& features) const;

  double standardize(double v) const { return (v - target_mean_) / target_std_; }
  double unstandardize(double z) const { return z * target_std_ + target_mean_; }

  friend FitSnapshot fit(SurrogateKind, const PromptSpace&, const TrainingSlice&, std::uint64_t,
                         const FitOptions&);

 private:
  // Normalizes raw inputs to the unit cube of the training inputs.
  struct Bounds {
    Eigen::RowVectorXd lower;
    Eigen::RowVectorXd range;
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
    static Bounds of(const Eigen::MatrixXd& x);
  };

  Eigen::MatrixXd transform(const Eigen::MatrixXd& instructions, const Eigen::MatrixXd& exemplars) const;

  SurrogateKind kind_ = SurrogateKind::VanillaGP;
  int fidelity_ = 0;
  std::vector<PromptId> training_prompts_;
  Eigen::VectorXd targets_;
  double target_mean_ = 0.0;
  double target_std_ = 1.0;
  Bounds instruction_bounds_;  // deep kernels
  Bounds exemplar_bounds_;     // deep kernels
  Bounds joint_bounds_;        // vanilla: raw joint input; PCA: projected input
  Eigen::RowVectorXd pca_mean_;
  Eigen::MatrixXd pca_components_;  // D x q
  std::optional<ExtractorParams> extractor_;
  RawKernelParams raw_kernel_;
  KernelParams kernel_;
  Eigen::MatrixXd features_;
  JitteredCholesky<double> cholesky_;
  Eigen::VectorXd alpha_;
  double mll_ = 0.0;
  double initial_mll_ = 0.0;
  int epochs_ = 0;
};

/// Maximizes the marginal likelihood with AdamW over the kernel parameters
/// (and the extractor weights for deep kernels). Deterministic given seed.
FitSnapshot fit(SurrogateKind kind, const PromptSpace& space, const TrainingSlice& slice,
                std::uint64_t seed, const FitOptions& options = {});

/// Spearman rank correlation between predicted means and observed errors of
/// holdout prompts, which must be disjoint from the training prompts.
double latent_alignment_score(const FitSnapshot& snapshot, const PromptSpace& space,
                              const TrainingSlice& holdout);

/// Spearman correlation with average ranks for ties.
double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace promptband
