#include "promptband/scheduler/hyperband.hpp"

#include "promptband/core/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace promptband {

namespace {

constexpr double kTol = 1e-9;

bool integral(double x) { return std::abs(x - std::round(x)) <= kTol * std::max(1.0, std::abs(x)); }

long floor_tol(double x) { return static_cast<long>(std::floor(x + kTol * std::max(1.0, std::abs(x)))); }
long ceil_tol(double x) { return static_cast<long>(std::ceil(x - kTol * std::max(1.0, std::abs(x)))); }

}  // namespace

std::vector<int> HyperbandPlan::levels() const {
  std::set<int> out;
  for (const auto& br : brackets) {
    for (const auto& st : br.stages) out.insert(st.instances);
  }
  return {out.begin(), out.end()};
}

HyperbandPlan build_plan(int n_valid, int b_min, double eta) {
  if (n_valid < 1) throw RangeError("n_valid must be positive");
  if (b_min < 1) throw RangeError("b_min must be at least 1");
  if (b_min > n_valid) {
    throw RangeError("b_min " + std::to_string(b_min) + " exceeds n_valid " + std::to_string(n_valid));
  }
  if (!(eta > 1.0) || !std::isfinite(eta)) throw ParameterError("eta must be greater than 1");

  HyperbandPlan plan;
  plan.n_valid = n_valid;
  plan.b_min_requested = b_min;
  plan.eta = eta;

  // Deepest k such that n_valid / eta^j is integral for all j <= k and
  // n_valid / eta^k >= b_min.
  int k = 0;
  for (int j = 1;; ++j) {
    const double level = n_valid / std::pow(eta, j);
    if (level < b_min - kTol || !integral(level)) break;
    k = j;
  }
  plan.s_max = k;
  plan.b_min = static_cast<int>(std::lround(n_valid / std::pow(eta, k)));
  if (plan.b_min != b_min) {
    const double exact = std::log(static_cast<double>(n_valid) / b_min) / std::log(eta);
    std::ostringstream note;
    note << "b_min " << b_min << " rounded up to " << plan.b_min << " (n_valid " << n_valid
         << " / eta^" << k << "); unrounded s_max would be " << floor_tol(exact);
    plan.notes.push_back(note.str());
  }
  plan.bracket_budget = static_cast<long>(plan.s_max + 1) * n_valid;

  const double ratio = static_cast<double>(plan.bracket_budget) / n_valid;
  for (int s = plan.s_max; s >= 0; --s) {
    Bracket br;
    br.s = s;
    const long n = ceil_tol(ratio * std::pow(eta, s) / (s + 1));
    for (int i = 0; i <= s; ++i) {
      Stage st;
      st.prompts = static_cast<int>(floor_tol(n * std::pow(eta, -i)));
      st.instances = static_cast<int>(std::lround(n_valid * std::pow(eta, i - s)));
      br.stages.push_back(st);
    }
    plan.brackets.push_back(std::move(br));
  }
  return plan;
}

std::string plan_csv(const HyperbandPlan& plan) {
  std::ostringstream os;
  os << "bracket,stage,instances,prompts\n";
  for (const auto& br : plan.brackets) {
    for (std::size_t i = 0; i < br.stages.size(); ++i) {
      os << br.s << ',' << i << ',' << br.stages[i].instances << ',' << br.stages[i].prompts << '\n';
    }
  }
  return os.str();
}

std::vector<std::size_t> top_k_indices(std::span<const double> errors, std::size_t k) {
  if (k > errors.size()) throw RangeError("top_k: k exceeds the number of prompts");
  std::vector<std::size_t> order(errors.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return errors[a] < errors[b]; });
  order.resize(k);
  return order;
}

std::vector<PromptId> top_k(std::span<const PromptId> prompts, std::span<const double> errors,
                            std::size_t k) {
  if (prompts.size() != errors.size()) throw AlignmentError("top_k: prompts and errors differ in length");
  std::vector<PromptId> out;
  for (std::size_t i : top_k_indices(errors, k)) out.push_back(prompts[i]);
  return out;
}

int sh_initial_budget(long total_budget, int n_prompts) {
  if (n_prompts < 2) throw RangeError("successive halving needs at least 2 prompts");
  if (total_budget < 0) throw RangeError("budget must be non-negative");
  const double denom = n_prompts * std::log2(static_cast<double>(n_prompts));
  return static_cast<int>(std::max<long>(1, floor_tol(total_budget / denom)));
}

}  // namespace promptband
