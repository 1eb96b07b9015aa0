#pragma once

#include "promptband/core/random.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace promptband {

/// y = x W^T + b, applied row-wise.
struct Linear {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  Linear() = default;
  Linear(Eigen::Index in, Eigen::Index out)
      : weight(Eigen::MatrixXd::Zero(out, in)), bias(Eigen::VectorXd::Zero(out)) {}

  Eigen::Index in_features() const { return weight.cols(); }
  Eigen::Index out_features() const { return weight.rows(); }
};

enum class ExtractorLayout {
  // Lin(d,64) ReLU Lin(64,32) ReLU on the instruction and exemplar embeddings
  // separately, concatenated, then Lin(64,32) ReLU Lin(32,10).
  Structural,
  // One Lin(2d,64) ReLU Lin(64,32) ReLU block on the concatenated embedding,
  // then Lin(32,32) ReLU Lin(32,10).
  Joint,
};

inline constexpr Eigen::Index kLatentDim = 10;

struct ExtractorParams {
  ExtractorLayout layout = ExtractorLayout::Structural;
  Eigen::Index embedding_dim = 0;  // d, the length of one component embedding
  std::vector<Linear> instruction_block;  // Structural: instruction block; Joint: the single block
  std::vector<Linear> exemplar_block;     // Structural only
  std::vector<Linear> head;

  static ExtractorParams structural(Eigen::Index d);
  static ExtractorParams joint(Eigen::Index d);

  /// Uniform in +-sqrt(6 / (fan_in + fan_out)) per layer, zero biases.
  void init_glorot(Rng& rng);

  Eigen::Index parameter_count() const;
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::Ref<const Eigen::VectorXd>& flat);
  bool all_finite() const;
};

/// Reverse-mode differentiable forward pass of the fixed extractor
/// architecture. forward() records activations that backward() consumes.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(ExtractorParams params) : params_(std::move(params)) {}

  const ExtractorParams& params() const { return params_; }
  ExtractorParams& params() { return params_; }

  /// Rows of `instructions` and `exemplars` are paired points; returns n x 10.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& instructions, const Eigen::MatrixXd& exemplars);

  /// Forward pass without recording (prediction path).
  Eigen::MatrixXd apply(const Eigen::MatrixXd& instructions, const Eigen::MatrixXd& exemplars) const;

  /// Gradient of sum(upstream .* output) w.r.t. the flattened parameters,
  /// for the most recent forward(). Throws StateError if there was none.
  Eigen::VectorXd backward(const Eigen::MatrixXd& upstream) const;

  void clear_tape() { tape_.reset(); }

 private:
  struct LayerTape {
    Eigen::MatrixXd input;
    Eigen::MatrixXd pre_activation;
  };
  struct Tape {
    std::vector<LayerTape> instruction_block;
    std::vector<LayerTape> exemplar_block;
    std::vector<LayerTape> head;
  };

  ExtractorParams params_;
  std::optional<Tape> tape_;
};

}  // namespace promptband
