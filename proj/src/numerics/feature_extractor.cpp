#include "promptband/numerics/feature_extractor.hpp"

#include "promptband/core/errors.hpp"

#include <cmath>
#include <string>

namespace promptband {

namespace {

constexpr Eigen::Index kHidden = 64;
constexpr Eigen::Index kBlockOut = 32;

std::vector<const Linear*> all_layers(const ExtractorParams& p) {
  std::vector<const Linear*> out;
  for (const auto& l : p.instruction_block) out.push_back(&l);
  for (const auto& l : p.exemplar_block) out.push_back(&l);
  for (const auto& l : p.head) out.push_back(&l);
  return out;
}

std::vector<Linear*> all_layers(ExtractorParams& p) {
  std::vector<Linear*> out;
  for (auto& l : p.instruction_block) out.push_back(&l);
  for (auto& l : p.exemplar_block) out.push_back(&l);
  for (auto& l : p.head) out.push_back(&l);
  return out;
}

Eigen::MatrixXd affine(const Linear& layer, const Eigen::MatrixXd& x) {
  if (x.cols() != layer.in_features()) {
    throw DimensionError("layer expects " + std::to_string(layer.in_features()) +
                         " inputs, got " + std::to_string(x.cols()));
  }
  Eigen::MatrixXd y = x * layer.weight.transpose();
  y.rowwise() += layer.bias.transpose();
  return y;
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

}  // namespace

ExtractorParams ExtractorParams::structural(Eigen::Index d) {
  ExtractorParams p;
  p.layout = ExtractorLayout::Structural;
  p.embedding_dim = d;
  p.instruction_block = {Linear(d, kHidden), Linear(kHidden, kBlockOut)};
  p.exemplar_block = {Linear(d, kHidden), Linear(kHidden, kBlockOut)};
  p.head = {Linear(2 * kBlockOut, kBlockOut), Linear(kBlockOut, kLatentDim)};
  return p;
}

ExtractorParams ExtractorParams::joint(Eigen::Index d) {
  ExtractorParams p;
  p.layout = ExtractorLayout::Joint;
  p.embedding_dim = d;
  p.instruction_block = {Linear(2 * d, kHidden), Linear(kHidden, kBlockOut)};
  p.head = {Linear(kBlockOut, kBlockOut), Linear(kBlockOut, kLatentDim)};
  return p;
}

void ExtractorParams::init_glorot(Rng& rng) {
  for (Linear* l : all_layers(*this)) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(l->in_features() + l->out_features()));
    for (Eigen::Index k = 0; k < l->weight.size(); ++k) l->weight.data()[k] = rng.uniform(-bound, bound);
    l->bias.setZero();
  }
}

Eigen::Index ExtractorParams::parameter_count() const {
  Eigen::Index n = 0;
  for (const Linear* l : all_layers(*this)) n += l->weight.size() + l->bias.size();
  return n;
}

Eigen::VectorXd ExtractorParams::flatten() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index at = 0;
  for (const Linear* l : all_layers(*this)) {
    flat.segment(at, l->weight.size()) = l->weight.reshaped();
    at += l->weight.size();
    flat.segment(at, l->bias.size()) = l->bias;
    at += l->bias.size();
  }
  return flat;
}

void ExtractorParams::assign(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  if (flat.size() != parameter_count()) {
    throw DimensionError("extractor expects " + std::to_string(parameter_count()) +
                         " parameters, got " + std::to_string(flat.size()));
  }
  Eigen::Index at = 0;
  for (Linear* l : all_layers(*this)) {
    l->weight.reshaped() = flat.segment(at, l->weight.size());
    at += l->weight.size();
    l->bias = flat.segment(at, l->bias.size());
    at += l->bias.size();
  }
}

bool ExtractorParams::all_finite() const {
  for (const Linear* l : all_layers(*this)) {
    if (!l->weight.allFinite() || !l->bias.allFinite()) return false;
  }
  return true;
}

Eigen::MatrixXd FeatureExtractor::apply(const Eigen::MatrixXd& instructions,
                                        const Eigen::MatrixXd& exemplars) const {
  const auto& p = params_;
  if (instructions.rows() != exemplars.rows()) {
    throw DimensionError("instruction and exemplar batches differ in size");
  }
  if (instructions.cols() != p.embedding_dim || exemplars.cols() != p.embedding_dim) {
    throw DimensionError("extractor expects embeddings of length " +
                         std::to_string(p.embedding_dim));
  }
  auto block = [](const std::vector<Linear>& layers, Eigen::MatrixXd h) {
    for (const auto& l : layers) h = relu(affine(l, h));
    return h;
  };
  Eigen::MatrixXd joined;
  if (p.layout == ExtractorLayout::Structural) {
    Eigen::MatrixXd hi = block(p.instruction_block, instructions);
    Eigen::MatrixXd he = block(p.exemplar_block, exemplars);
    joined.resize(hi.rows(), hi.cols() + he.cols());
    joined << hi, he;
  } else {
    Eigen::MatrixXd x(instructions.rows(), 2 * p.embedding_dim);
    x << instructions, exemplars;
    joined = block(p.instruction_block, x);
  }
  return affine(p.head[1], relu(affine(p.head[0], joined)));
}

Eigen::MatrixXd FeatureExtractor::forward(const Eigen::MatrixXd& instructions,
                                          const Eigen::MatrixXd& exemplars) {
  const auto& p = params_;
  if (instructions.rows() != exemplars.rows()) {
    throw DimensionError("instruction and exemplar batches differ in size");
  }
  if (instructions.cols() != p.embedding_dim || exemplars.cols() != p.embedding_dim) {
    throw DimensionError("extractor expects embeddings of length " +
                         std::to_string(p.embedding_dim));
  }
  Tape tape;
  // Every layer is followed by ReLU except the last head layer.
  auto run = [](const std::vector<Linear>& layers, Eigen::MatrixXd h,
                std::vector<LayerTape>& records, bool final_linear) {
    for (std::size_t k = 0; k < layers.size(); ++k) {
      Eigen::MatrixXd pre = affine(layers[k], h);
      records.push_back(LayerTape{std::move(h), pre});
      const bool last = final_linear && k + 1 == layers.size();
      h = last ? pre : relu(pre);
    }
    return h;
  };
  Eigen::MatrixXd joined;
  if (p.layout == ExtractorLayout::Structural) {
    Eigen::MatrixXd hi = run(p.instruction_block, instructions, tape.instruction_block, false);
    Eigen::MatrixXd he = run(p.exemplar_block, exemplars, tape.exemplar_block, false);
    joined.resize(hi.rows(), hi.cols() + he.cols());
    joined << hi, he;
  } else {
    Eigen::MatrixXd x(instructions.rows(), 2 * p.embedding_dim);
    x << instructions, exemplars;
    joined = run(p.instruction_block, std::move(x), tape.instruction_block, false);
  }
  Eigen::MatrixXd out = run(p.head, std::move(joined), tape.head, true);
  tape_ = std::move(tape);
  return out;
}

Eigen::VectorXd FeatureExtractor::backward(const Eigen::MatrixXd& upstream) const {
  if (!tape_) throw StateError("backward called without a recorded forward pass");
  const auto& p = params_;
  const auto& tape = *tape_;
  if (upstream.rows() != tape.head.back().pre_activation.rows() || upstream.cols() != kLatentDim) {
    throw DimensionError("upstream gradient shape does not match the last forward pass");
  }

  struct LayerGrad {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;
  };
  // Walks a chain backwards; `grad` is d/d(output of chain). Returns d/d(input).
  auto back = [](const std::vector<Linear>& layers, const std::vector<LayerTape>& records,
                 Eigen::MatrixXd grad, bool final_linear, std::vector<LayerGrad>& out) {
    out.resize(layers.size());
    for (std::size_t k = layers.size(); k-- > 0;) {
      const bool last = final_linear && k + 1 == layers.size();
      if (!last) grad = grad.cwiseProduct((records[k].pre_activation.array() > 0.0).cast<double>().matrix());
      out[k].weight = grad.transpose() * records[k].input;
      out[k].bias = grad.colwise().sum().transpose();
      grad = grad * layers[k].weight;
    }
    return grad;
  };

  std::vector<LayerGrad> g_head, g_inst, g_exem;
  Eigen::MatrixXd d_joined = back(p.head, tape.head, upstream, true, g_head);
  if (p.layout == ExtractorLayout::Structural) {
    const Eigen::Index half = d_joined.cols() / 2;
    back(p.instruction_block, tape.instruction_block, d_joined.leftCols(half), false, g_inst);
    back(p.exemplar_block, tape.exemplar_block, d_joined.rightCols(half), false, g_exem);
  } else {
    back(p.instruction_block, tape.instruction_block, d_joined, false, g_inst);
  }

  Eigen::VectorXd flat(p.parameter_count());
  Eigen::Index at = 0;
  for (const auto* group : {&g_inst, &g_exem, &g_head}) {
    for (const auto& g : *group) {
      flat.segment(at, g.weight.size()) = g.weight.reshaped();
      at += g.weight.size();
      flat.segment(at, g.bias.size()) = g.bias;
      at += g.bias.size();
    }
  }
  return flat;
}

}  // namespace promptband
