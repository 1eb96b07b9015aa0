#include "promptband/surrogate/gp.hpp"

#include "promptband/core/errors.hpp"
#include "promptband/core/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

namespace promptband {

const char* to_string(SurrogateKind kind) {
  switch (kind) {
    case SurrogateKind::VanillaGP: return "vanilla_gp";
    case SurrogateKind::PcaGP: return "pca_gp";
    case SurrogateKind::DeepKernelJoint: return "dkgp_joint";
    case SurrogateKind::DeepKernelStructural: return "dkgp_structural";
  }
  return "unknown";
}

TrainingSlice training_slice(const EvaluationLedger& ledger, int b) {
  TrainingSlice slice;
  slice.fidelity = b;
  const auto latest = ledger.latest_at(b);
  slice.errors.resize(static_cast<Eigen::Index>(latest.size()));
  for (std::size_t k = 0; k < latest.size(); ++k) {
    slice.prompts.push_back(latest[k].prompt_id);
    slice.errors(static_cast<Eigen::Index>(k)) = latest[k].mean_error;
  }
  return slice;
}

std::optional<int> select_training_fidelity(const EvaluationLedger& ledger, int min_count) {
  const auto sizes = ledger.subset_sizes();
  for (auto it = sizes.rbegin(); it != sizes.rend(); ++it) {
    if (static_cast<int>(ledger.latest_at(*it).size()) >= min_count) return *it;
  }
  return std::nullopt;
}

FitSnapshot::Bounds FitSnapshot::Bounds::of(const Eigen::MatrixXd& x) {
  Bounds b;
  b.lower = x.colwise().minCoeff();
  b.range = x.colwise().maxCoeff() - b.lower;
  for (Eigen::Index j = 0; j < b.range.size(); ++j) {
    if (!(b.range(j) > 0.0)) b.range(j) = 1.0;
  }
  return b;
}

Eigen::MatrixXd FitSnapshot::Bounds::apply(const Eigen::MatrixXd& x) const {
  return (x.rowwise() - lower).array().rowwise() / range.array();
}

namespace {

Eigen::MatrixXd concat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd x(a.rows(), a.cols() + b.cols());
  x << a, b;
  return x;
}

}  // namespace

Eigen::MatrixXd FitSnapshot::transform(const Eigen::MatrixXd& instructions,
                                       const Eigen::MatrixXd& exemplars) const {
  switch (kind_) {
    case SurrogateKind::VanillaGP:
      return joint_bounds_.apply(concat(instructions, exemplars));
    case SurrogateKind::PcaGP: {
      const Eigen::MatrixXd centered = concat(instructions, exemplars).rowwise() - pca_mean_;
      return joint_bounds_.apply(centered * pca_components_);
    }
    case SurrogateKind::DeepKernelJoint:
    case SurrogateKind::DeepKernelStructural: {
      const FeatureExtractor net(*extractor_);
      return net.apply(instruction_bounds_.apply(instructions), exemplar_bounds_.apply(exemplars));
    }
  }
  throw StateError("unknown surrogate kind");
}

Eigen::MatrixXd FitSnapshot::features(const PromptSpace& space,
                                      std::span<const PromptId> ids) const {
  return transform(space.instruction_matrix(ids), space.exemplar_matrix(ids));
}

Posterior FitSnapshot::predict_features(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd k_star = matern52_matrix(features_, x, kernel_);  // n x m
  Posterior post;
  post.mean = k_star.transpose() * alpha_;
  const Eigen::MatrixXd v = cholesky_.solve_lower(k_star);
  const Eigen::ArrayXd var =
      (kernel_.outputscale - v.colwise().squaredNorm().transpose().array()).cwiseMax(0.0);
  post.std = var.sqrt().matrix();
  return post;
}

Posterior FitSnapshot::predict(const PromptSpace& space, std::span<const PromptId> ids) const {
  return predict_features(features(space, ids));
}

FitSnapshot fit(SurrogateKind kind, const PromptSpace& space, const TrainingSlice& slice,
                std::uint64_t seed, const FitOptions& options) {
  const auto n = static_cast<Eigen::Index>(slice.prompts.size());
  if (n < 2) throw InsufficientDataError("fit needs at least 2 training points, got " + std::to_string(n));
  if (slice.errors.size() != n) throw AlignmentError("training prompts and errors differ in length");
  if (!slice.errors.allFinite()) throw ValidationError("training errors must be finite");

  FitSnapshot snap;
  snap.kind_ = kind;
  snap.fidelity_ = slice.fidelity;
  snap.training_prompts_ = slice.prompts;
  snap.target_mean_ = slice.errors.mean();
  const double var = (slice.errors.array() - snap.target_mean_).square().sum() / static_cast<double>(n - 1);
  snap.target_std_ = std::max(std::sqrt(var), options.target_std_floor);
  snap.targets_ = (slice.errors.array() - snap.target_mean_) / snap.target_std_;

  const Eigen::MatrixXd zi = space.instruction_matrix(slice.prompts);
  const Eigen::MatrixXd ze = space.exemplar_matrix(slice.prompts);
  const bool deep = kind == SurrogateKind::DeepKernelJoint || kind == SurrogateKind::DeepKernelStructural;

  Eigen::MatrixXd fixed_inputs;  // kernel inputs of the shallow models
  Eigen::MatrixXd zi_n, ze_n;    // normalized extractor inputs
  std::optional<FeatureExtractor> net;
  if (kind == SurrogateKind::VanillaGP) {
    const Eigen::MatrixXd x = concat(zi, ze);
    snap.joint_bounds_ = FitSnapshot::Bounds::of(x);
    fixed_inputs = snap.joint_bounds_.apply(x);
  } else if (kind == SurrogateKind::PcaGP) {
    const Eigen::MatrixXd x = concat(zi, ze);
    snap.pca_mean_ = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - snap.pca_mean_;
    const Eigen::Index q = std::min<Eigen::Index>({options.pca_components, n - 1, x.cols()});
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    snap.pca_components_ = svd.matrixV().leftCols(q);
    // Fix the sign of each component so the projection does not depend on
    // the SVD's arbitrary choice.
    for (Eigen::Index j = 0; j < q; ++j) {
      Eigen::Index at;
      snap.pca_components_.col(j).cwiseAbs().maxCoeff(&at);
      if (snap.pca_components_(at, j) < 0.0) snap.pca_components_.col(j) *= -1.0;
    }
    const Eigen::MatrixXd projected = centered * snap.pca_components_;
    snap.joint_bounds_ = FitSnapshot::Bounds::of(projected);
    fixed_inputs = snap.joint_bounds_.apply(projected);
  } else {
    snap.instruction_bounds_ = FitSnapshot::Bounds::of(zi);
    snap.exemplar_bounds_ = FitSnapshot::Bounds::of(ze);
    zi_n = snap.instruction_bounds_.apply(zi);
    ze_n = snap.exemplar_bounds_.apply(ze);
    ExtractorParams params = kind == SurrogateKind::DeepKernelStructural
                                 ? ExtractorParams::structural(space.embedding_dim())
                                 : ExtractorParams::joint(space.embedding_dim());
    Rng rng(seed);
    params.init_glorot(rng);
    net.emplace(std::move(params));
  }

  const Eigen::Index dims = deep ? kLatentDim : fixed_inputs.cols();
  RawKernelParams raw = RawKernelParams::initial(dims, options.noise_floor);
  const Eigen::Index n_kernel = raw.size();
  const Eigen::Index n_net = deep ? net->params().parameter_count() : 0;

  Eigen::VectorXd theta(n_kernel + n_net);
  theta.head(n_kernel) = raw.flatten();
  if (deep) theta.tail(n_net) = net->params().flatten();

  // Evaluates the MLL at theta and its ascent direction.
  auto evaluate = [&](const Eigen::VectorXd& t, bool grads, Eigen::VectorXd* g) {
    raw.assign(t.head(n_kernel));
    if (!deep) {
      MllResult r = log_marginal_likelihood(fixed_inputs, snap.targets_, raw, grads);
      if (grads) *g = r.grad_raw;
      return r.value;
    }
    net->params().assign(t.tail(n_net));
    const Eigen::MatrixXd phi = net->forward(zi_n, ze_n);
    MllResult r = log_marginal_likelihood(phi, snap.targets_, raw, grads);
    if (grads) {
      g->resize(t.size());
      g->head(n_kernel) = r.grad_raw;
      g->tail(n_net) = net->backward(r.grad_features);
    }
    return r.value;
  };

  AdamW optimizer(options.optimizer, theta.size());
  Eigen::VectorXd grad;
  Eigen::VectorXd best_theta = theta;
  double best = -std::numeric_limits<double>::infinity();
  double reference = best;
  int stall = 0;
  int epoch = 0;
  for (; epoch < options.max_epochs; ++epoch) {
    double value;
    try {
      value = evaluate(theta, true, &grad);
      if (!std::isfinite(value) || !grad.allFinite()) throw NumericalError("non-finite marginal likelihood");
    } catch (const NumericalError&) {
      if (epoch == 0) throw;
      break;  // keep the best parameters seen so far
    }
    if (epoch == 0) snap.initial_mll_ = value;
    if (value > best) {
      best = value;
      best_theta = theta;
    }
    if (value >= reference + options.min_improvement || epoch == 0) {
      reference = value;
      stall = 0;
    } else if (++stall >= options.patience) {
      ++epoch;
      break;
    }
    try {
      optimizer.step(theta, -grad);
    } catch (const NumericalError&) {
      ++epoch;
      break;
    }
  }
  snap.epochs_ = epoch;

  raw.assign(best_theta.head(n_kernel));
  snap.raw_kernel_ = raw;
  snap.kernel_ = raw.constrained();
  if (deep) {
    net->params().assign(best_theta.tail(n_net));
    net->clear_tape();
    snap.extractor_ = net->params();
    snap.features_ = net->apply(zi_n, ze_n);
  } else {
    snap.features_ = fixed_inputs;
  }
  Eigen::MatrixXd k = matern52_matrix(snap.features_, snap.features_, snap.kernel_);
  k.diagonal().array() += snap.kernel_.noise;
  snap.cholesky_.compute(k);
  snap.alpha_ = snap.cholesky_.solve(snap.targets_);
  snap.mll_ = best;
  return snap;
}

namespace {

Eigen::VectorXd average_ranks(const Eigen::VectorXd& x) {
  const auto n = static_cast<std::size_t>(x.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x(static_cast<Eigen::Index>(a)) < x(static_cast<Eigen::Index>(b));
  });
  Eigen::VectorXd ranks(x.size());
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x(static_cast<Eigen::Index>(order[j + 1])) == x(static_cast<Eigen::Index>(order[i]))) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks(static_cast<Eigen::Index>(order[k])) = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw AlignmentError("spearman: inputs differ in length");
  if (a.size() < 3) throw InsufficientDataError("rank correlation needs at least 3 points");
  const Eigen::VectorXd ra = average_ranks(a);
  const Eigen::VectorXd rb = average_ranks(b);
  const Eigen::ArrayXd ca = ra.array() - ra.mean();
  const Eigen::ArrayXd cb = rb.array() - rb.mean();
  const double denom = std::sqrt(ca.square().sum() * cb.square().sum());
  if (!(denom > 0.0)) return 0.0;
  return (ca * cb).sum() / denom;
}

double latent_alignment_score(const FitSnapshot& snapshot, const PromptSpace& space,
                              const TrainingSlice& holdout) {
  if (holdout.prompts.size() < 3) {
    throw InsufficientDataError("latent alignment needs at least 3 holdout prompts, got " +
                                std::to_string(holdout.prompts.size()));
  }
  const std::set<PromptId> train(snapshot.training_prompts().begin(), snapshot.training_prompts().end());
  for (PromptId p : holdout.prompts) {
    if (train.count(p)) {
      throw ValidationError("holdout prompt " + std::to_string(p) + " is also a training prompt");
    }
  }
  const Posterior post = snapshot.predict(space, holdout.prompts);
  return spearman(post.mean, holdout.errors);
}

}  // namespace promptband
