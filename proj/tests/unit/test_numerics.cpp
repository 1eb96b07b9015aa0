#include <doctest.h>

#include "promptband/core/errors.hpp"
#include "promptband/core/random.hpp"
#include "promptband/numerics/adamw.hpp"
#include "promptband/numerics/cholesky.hpp"
#include "promptband/numerics/feature_extractor.hpp"
#include "support/oracles.hpp"

using namespace promptband;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.normal();
  return m;
}

Eigen::MatrixXd random_spd(Eigen::Index n, Rng& rng) {
  const Eigen::MatrixXd g = random_matrix(n, n, rng);
  return g * g.transpose() + static_cast<double>(n) * Eigen::MatrixXd::Identity(n, n);
}

// Objective sum(c .* output) as a function of the flattened parameters.
double weighted_output(FeatureExtractor& fx, const Eigen::VectorXd& flat, const Eigen::MatrixXd& zi,
                       const Eigen::MatrixXd& ze, const Eigen::MatrixXd& c) {
  ExtractorParams p = fx.params();
  p.assign(flat);
  return FeatureExtractor(p).apply(zi, ze).cwiseProduct(c).sum();
}

}  // namespace

TEST_CASE("cholesky_solve examples") {
  const Eigen::Vector3d b(1, -2, 3);
  CHECK(cholesky_solve(Eigen::Matrix3d::Identity(), b).isApprox(b));
  Eigen::MatrixXd four(1, 1);
  four << 4;
  Eigen::MatrixXd two(1, 1);
  two << 2;
  CHECK(cholesky_solve(four, two)(0, 0) == doctest::Approx(0.5));

  Rng rng(1);
  const Eigen::MatrixXd a = random_spd(6, rng);
  const Eigen::MatrixXd rhs = random_matrix(6, 2, rng);
  CHECK((cholesky_solve(a, rhs) - oracle::gauss_solve(a, rhs)).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("cholesky residual on SPD systems up to 64x64") {
  Rng rng(2);
  for (Eigen::Index n : {1, 2, 5, 17, 32, 64}) {
    const Eigen::MatrixXd a = random_spd(n, rng);
    const Eigen::MatrixXd b = random_matrix(n, 3, rng);
    const Eigen::MatrixXd x = cholesky_solve(a, b);
    CAPTURE(n);
    CHECK((a * x - b).norm() / b.norm() <= 1e-10);
    const JitteredCholesky<double> chol(a);
    CHECK(chol.jitter() == 0.0);
    CHECK(chol.log_determinant() == doctest::Approx(oracle::log_abs_det(a)).epsilon(1e-10));
  }
}

TEST_CASE("cholesky jitter repairs a singular matrix and gives up on an indefinite one") {
  Eigen::MatrixXd singular = Eigen::MatrixXd::Ones(3, 3);
  const JitteredCholesky<double> chol(singular);
  CHECK(chol.jitter() > 0.0);
  CHECK(chol.jitter() <= 1e-4 + 1e-18);

  Eigen::MatrixXd indefinite = Eigen::MatrixXd::Identity(2, 2);
  indefinite(1, 1) = -1.0;
  CHECK_THROWS_AS(JitteredCholesky<double>{indefinite}, NumericalError);
  Eigen::MatrixXd nan = Eigen::MatrixXd::Identity(2, 2);
  nan(0, 1) = NAN;
  CHECK_THROWS_AS(JitteredCholesky<double>{nan}, NumericalError);
  CHECK_THROWS_AS(JitteredCholesky<double>{Eigen::MatrixXd(2, 3)}, DimensionError);
}

TEST_CASE("extractor shapes and layout") {
  const ExtractorParams s = ExtractorParams::structural(7);
  CHECK(s.instruction_block[0].weight.rows() == 64);
  CHECK(s.instruction_block[0].weight.cols() == 7);
  CHECK(s.instruction_block[1].weight.rows() == 32);
  CHECK(s.exemplar_block[1].weight.cols() == 64);
  CHECK(s.head[0].weight.cols() == 64);
  CHECK(s.head[0].weight.rows() == 32);
  CHECK(s.head[1].weight.rows() == 10);
  CHECK(s.parameter_count() == 2 * (7 * 64 + 64 + 64 * 32 + 32) + 64 * 32 + 32 + 32 * 10 + 10);
}

TEST_CASE("extractor forward examples") {
  Rng rng(3);
  const Eigen::MatrixXd zi = random_matrix(5, 4, rng);
  const Eigen::MatrixXd ze = random_matrix(5, 4, rng);
  FeatureExtractor zero(ExtractorParams::structural(4));
  CHECK(zero.forward(zi, ze).isZero(0.0));

  ExtractorParams p = ExtractorParams::structural(4);
  p.init_glorot(rng);
  FeatureExtractor fx(p);
  const Eigen::MatrixXd out = fx.forward(zi, ze);
  CHECK(out.rows() == 5);
  CHECK(out.cols() == 10);
  CHECK(out == fx.apply(zi, ze));

  p.head.back().bias(3) = 0.7;
  const Eigen::MatrixXd once = FeatureExtractor(p).apply(zi, ze);
  p.head.back().bias(3) = 1.4;
  const Eigen::MatrixXd twice = FeatureExtractor(p).apply(zi, ze);
  Eigen::MatrixXd diff = twice - once;
  CHECK((diff.col(3).array() - 0.7).abs().maxCoeff() <= 1e-12);
  diff.col(3).setZero();
  CHECK(diff.isZero(0.0));

  CHECK_THROWS_AS(fx.forward(random_matrix(5, 3, rng), ze), DimensionError);
  CHECK_THROWS_AS(fx.forward(zi, random_matrix(4, 4, rng)), DimensionError);
}

TEST_CASE("extractor backward matches central differences") {
  // Coordinates whose h-step straddles a ReLU kink are detected by comparing
  // against a 100x smaller step and excluded; they must stay rare.
  Rng rng(4);
  double worst = 0.0;
  long checked = 0, straddling = 0;
  for (int draw = 0; draw < 100; ++draw) {
    const bool structural = draw % 2 == 0;
    ExtractorParams p = structural ? ExtractorParams::structural(3) : ExtractorParams::joint(3);
    p.init_glorot(rng);
    for (Linear* l : {&p.instruction_block[0], &p.head[0], &p.head[1]}) {
      for (Eigen::Index k = 0; k < l->bias.size(); ++k) l->bias(k) = 0.1 * rng.normal();
    }
    FeatureExtractor fx(p);
    const Eigen::MatrixXd zi = random_matrix(3, 3, rng);
    const Eigen::MatrixXd ze = random_matrix(3, 3, rng);
    const Eigen::MatrixXd c = random_matrix(3, 10, rng);
    fx.forward(zi, ze);
    const Eigen::VectorXd analytic = fx.backward(c);
    auto objective = [&](const Eigen::VectorXd& flat) { return weighted_output(fx, flat, zi, ze, c); };
    const Eigen::VectorXd numeric = oracle::central_difference(objective, p.flatten(), 1e-5);
    const Eigen::VectorXd fine = oracle::central_difference(objective, p.flatten(), 1e-7);
    const double scale = std::max(numeric.lpNorm<Eigen::Infinity>(), 1e-12);
    for (Eigen::Index k = 0; k < numeric.size(); ++k) {
      if (std::abs(numeric(k) - fine(k)) > 1e-5 * scale) {
        ++straddling;
        continue;
      }
      ++checked;
      worst = std::max(worst, std::abs(analytic(k) - numeric(k)) / scale);
    }
  }
  CHECK(worst <= 1e-4);
  CHECK(straddling * 100 < checked);
}

TEST_CASE("extractor backward special cases") {
  Rng rng(5);
  ExtractorParams p = ExtractorParams::structural(3);
  p.init_glorot(rng);
  FeatureExtractor fx(p);
  CHECK_THROWS_AS(fx.backward(Eigen::MatrixXd::Ones(2, 10)), StateError);

  // Zero instruction input with zero biases: the instruction block is dead.
  const Eigen::MatrixXd zi = Eigen::MatrixXd::Zero(4, 3);
  const Eigen::MatrixXd ze = random_matrix(4, 3, rng);
  fx.forward(zi, ze);
  const Eigen::VectorXd g = fx.backward(random_matrix(4, 10, rng));
  const Eigen::Index first_layer = 3 * 64 + 64;
  CHECK(g.head(first_layer).isZero(0.0));

  // Objective c * output[k] summed over a batch of one: d/d bias_k = c.
  FeatureExtractor one(p);
  one.forward(random_matrix(1, 3, rng), random_matrix(1, 3, rng));
  Eigen::MatrixXd up = Eigen::MatrixXd::Zero(1, 10);
  up(0, 6) = 2.5;
  const Eigen::VectorXd gb = one.backward(up).tail(10);
  CHECK(gb(6) == doctest::Approx(2.5));
  CHECK((gb.array() != 0.0).count() == 1);

  CHECK_THROWS_AS(one.backward(Eigen::MatrixXd::Zero(2, 10)), DimensionError);
}

TEST_CASE("extractor forward is bit-identical across calls") {
  Rng rng(6);
  ExtractorParams p = ExtractorParams::structural(5);
  p.init_glorot(rng);
  Rng same(6);
  ExtractorParams q = ExtractorParams::structural(5);
  q.init_glorot(same);
  CHECK(p.flatten() == q.flatten());
  const Eigen::MatrixXd zi = random_matrix(8, 5, rng);
  const Eigen::MatrixXd ze = random_matrix(8, 5, rng);
  CHECK(FeatureExtractor(p).apply(zi, ze) == FeatureExtractor(q).apply(zi, ze));
  for (const Linear* l : {&p.instruction_block[0], &p.head[1]}) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l->in_features() + l->out_features()));
    CHECK(l->weight.cwiseAbs().maxCoeff() <= bound);
    CHECK(l->bias.isZero(0.0));
  }
}

TEST_CASE("AdamW examples") {
  AdamWOptions no_decay;
  no_decay.weight_decay = 0.0;
  Eigen::VectorXd x(3);
  x << 1.0, -2.0, 0.5;
  const Eigen::VectorXd x0 = x;
  AdamW fixed(no_decay, 3);
  fixed.step(x, Eigen::VectorXd::Zero(3));
  CHECK(x == x0);

  // One step with gradient g: m_hat = g, v_hat = g^2.
  AdamW first(no_decay, 3);
  Eigen::VectorXd g(3);
  g << 0.3, -4.0, 1e-3;
  x = x0;
  first.step(x, g);
  for (int k = 0; k < 3; ++k) {
    const double expected = x0(k) - 0.01 * g(k) / (std::abs(g(k)) + 1e-8);
    CHECK(x(k) == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK(first.steps() == 1);

  AdamW decay(AdamWOptions{}, 3);
  x = x0;
  for (int s = 0; s < 5; ++s) decay.step(x, Eigen::VectorXd::Zero(3));
  CHECK((x - x0 * std::pow(1.0 - 0.01 * 0.01, 5)).lpNorm<Eigen::Infinity>() <= 1e-15);

  Eigen::VectorXd bad = g;
  bad(1) = NAN;
  CHECK_THROWS_AS(first.step(x, bad), NumericalError);
  CHECK_THROWS_AS(first.step(x, Eigen::VectorXd::Zero(2)), DimensionError);
}

TEST_CASE("AdamW second step matches a hand computation") {
  AdamWOptions o;
  AdamW opt(o, 1);
  Eigen::VectorXd x(1);
  x << 2.0;
  const double g1 = 0.5, g2 = -1.0;
  opt.step(x, Eigen::VectorXd::Constant(1, g1));
  opt.step(x, Eigen::VectorXd::Constant(1, g2));

  double p = 2.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    const double g = t == 1 ? g1 : g2;
    p *= 1.0 - o.learning_rate * o.weight_decay;
    m = o.beta1 * m + (1 - o.beta1) * g;
    v = o.beta2 * v + (1 - o.beta2) * g * g;
    const double mh = m / (1 - std::pow(o.beta1, t));
    const double vh = v / (1 - std::pow(o.beta2, t));
    p -= o.learning_rate * mh / (std::sqrt(vh) + o.epsilon);
  }
  CHECK(x(0) == doctest::Approx(p).epsilon(1e-14));
}
