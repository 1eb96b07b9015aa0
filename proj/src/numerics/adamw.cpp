#include "promptband/numerics/adamw.hpp"

#include "promptband/core/errors.hpp"

#include <cmath>
#include <string>

namespace promptband {

void AdamW::step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads) {
  if (params.size() != first_.size() || grads.size() != first_.size()) {
    throw DimensionError("AdamW state has " + std::to_string(first_.size()) +
                         " parameters, got params " + std::to_string(params.size()) +
                         " / grads " + std::to_string(grads.size()));
  }
  for (Eigen::Index k = 0; k < grads.size(); ++k) {
    if (!std::isfinite(grads(k))) {
      throw NumericalError("non-finite gradient at parameter " + std::to_string(k) + " (step " +
                           std::to_string(step_ + 1) + ", value " + std::to_string(grads(k)) +
                           "); training aborted");
    }
  }
  ++step_;
  const auto& o = options_;
  params *= 1.0 - o.learning_rate * o.weight_decay;
  first_ = o.beta1 * first_ + (1.0 - o.beta1) * grads;
  second_ = o.beta2 * second_ + (1.0 - o.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(step_));
  params.array() -= o.learning_rate * (first_.array() / c1) /
                    ((second_.array() / c2).sqrt() + o.epsilon);
}

}  // namespace promptband
