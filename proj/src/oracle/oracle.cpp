#include "promptband/oracle/oracle.hpp"

#include "promptband/core/random.hpp"

#include <cctype>
#include <string>

namespace promptband {

namespace {

std::string normalize(std::string_view s, const NormalizationPolicy& policy) {
  if (policy.trim) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  }
  std::string out(s);
  if (policy.casefold) {
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace

double exact_match_loss(std::string_view y, std::string_view y_hat,
                        const NormalizationPolicy& policy) {
  return normalize(y, policy) == normalize(y_hat, policy) ? 0.0 : 1.0;
}

TabularOracle::TabularOracle(Eigen::MatrixXd valid_matrix, Eigen::MatrixXd test_matrix)
    : valid_(std::move(valid_matrix)), test_(std::move(test_matrix)) {
  if (valid_.rows() == 0 || valid_.cols() == 0) throw ValidationError("empty validation matrix");
  if (test_.size() > 0 && test_.rows() != valid_.rows()) {
    throw DimensionError("test matrix has " + std::to_string(test_.rows()) + " rows, validation has " +
                         std::to_string(valid_.rows()));
  }
  auto check = [](const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite() || (m.size() > 0 && (m.minCoeff() < 0.0 || m.maxCoeff() > 1.0))) {
      throw ValidationError(std::string(what) + " matrix entries must be finite and in [0, 1]");
    }
  };
  check(valid_, "validation");
  check(test_, "test");
}

std::vector<double> TabularOracle::evaluate(PromptId prompt, std::span<const int> instances) {
  if (prompt < 0 || prompt >= valid_.rows()) {
    throw RangeError("prompt " + std::to_string(prompt) + " outside the oracle's table");
  }
  std::vector<double> out;
  out.reserve(instances.size());
  for (int i : instances) {
    if (i < 0 || i >= valid_.cols()) {
      throw RangeError("validation instance " + std::to_string(i) + " outside [0, " +
                       std::to_string(valid_.cols()) + ")");
    }
    out.push_back(valid_(prompt, i));
  }
  return out;
}

double TabularOracle::valid_error(PromptId prompt) const { return valid_.row(prompt).mean(); }

double TabularOracle::test_error(PromptId prompt) const {
  if (test_.cols() == 0) throw ValidationError("scenario has no test matrix");
  return test_.row(prompt).mean();
}

double bootstrap_variance(std::span<const double> row, int k, int n_replicates, std::uint64_t seed) {
  if (k < 1 || static_cast<std::size_t>(k) > row.size()) {
    throw RangeError("bootstrap size k=" + std::to_string(k) + " outside [1, " +
                     std::to_string(row.size()) + "]");
  }
  if (n_replicates < 2) throw RangeError("bootstrap needs at least 2 replicates");
  Rng rng(seed);
  Eigen::VectorXd means(n_replicates);
  for (int r = 0; r < n_replicates; ++r) {
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += row[rng.index(row.size())];
    means(r) = sum / k;
  }
  const double mu = means.mean();
  return (means.array() - mu).square().sum() / (n_replicates - 1);
}

}  // namespace promptband
