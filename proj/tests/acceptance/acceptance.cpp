// Acceptance suite: one PASS/FAIL line per criterion. A failed criterion is
// reported, not turned into a non-zero exit; the exit code only signals that
// the suite itself could not run.

#include "promptband/acquisition/acquisition.hpp"
#include "promptband/bench/bench.hpp"
#include "promptband/cli/app.hpp"
#include "promptband/core/random.hpp"
#include "promptband/methods/methods.hpp"
#include "promptband/numerics/feature_extractor.hpp"
#include "promptband/oracle/synthetic.hpp"
#include "promptband/scheduler/hyperband.hpp"
#include "promptband/scheduler/session.hpp"
#include "promptband/surrogate/gp.hpp"
#include "promptband/surrogate/mll.hpp"
#include "support/oracles.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

using namespace promptband;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;
std::ofstream report("acceptance_report.txt");

template <typename F>
void criterion(const std::string& name, double limit_seconds, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o = body();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs < limit_seconds;
  const bool pass = o.pass && in_time;
  failures += !pass;
  std::ostringstream line;
  line << (pass ? "PASS" : "FAIL") << "  " << name << "  (" << o.detail << "; " << std::fixed;
  line.precision(1);
  line << secs << " s of " << limit_seconds << " s" << (in_time ? "" : ", too slow") << ")";
  std::cout << line.str() << std::endl;
  report << line.str() << std::endl;
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.normal();
  return m;
}

PromptSpace random_space(int ni, int ne, int d, Rng& rng) {
  std::vector<Component> instr, ex;
  for (int k = 0; k < ni; ++k) instr.push_back({k, random_matrix(d, 1, rng).col(0)});
  for (int k = 0; k < ne; ++k) ex.push_back({k, random_matrix(d, 1, rng).col(0)});
  return build_prompt_space(instr, ex);
}

double relative(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Kink-aware comparison: a coordinate whose central difference disagrees with
// the analytic gradient is re-differenced with a 100x smaller step; if the two
// differences differ, the step straddles a ReLU kink and is not comparable.
struct GradientCheck {
  double worst = 0.0;
  long checked = 0;
  long skipped = 0;
};

template <typename F>
void fd_pair(F&& f, const Eigen::VectorXd& x, const Eigen::VectorXd& analytic, GradientCheck& check) {
  auto difference = [&](Eigen::Index k, double h) {
    Eigen::VectorXd probe = x;
    probe(k) = x(k) + h;
    const double up = f(probe);
    probe(k) = x(k) - h;
    return (up - f(probe)) / (2.0 * h);
  };
  const Eigen::VectorXd coarse = oracle::central_difference(f, x, 1e-5);
  const double scale = std::max(coarse.lpNorm<Eigen::Infinity>(), 1e-12);
  for (Eigen::Index k = 0; k < coarse.size(); ++k) {
    const double err = std::abs(analytic(k) - coarse(k)) / scale;
    if (err > 1e-6 && std::abs(coarse(k) - difference(k, 1e-7)) > 1e-5 * scale) {
      ++check.skipped;
      continue;
    }
    ++check.checked;
    check.worst = std::max(check.worst, err);
  }
}

bool non_increasing(const RunTrace& t, int full) {
  double best = INFINITY;
  for (const TraceEvent& e : t.events) {
    if (e.incumbent_fidelity != full) continue;
    if (e.incumbent_valid_error > best) return false;
    best = e.incumbent_valid_error;
  }
  return true;
}

}  // namespace

int main() {
  const Scenario synthetic = Scenario::from_files(generate_synthetic(SyntheticSpec{}).files);
  std::vector<RunResult> all_runs;

  criterion("HB schedule exactness", 1.0, [] {
    const char* argv[] = {"promptband", "schedule", "--n-valid", "80", "--b-min", "10", "--eta", "2"};
    std::ostringstream out, err;
    const int code = run_cli(8, argv, out, err);
    const std::string expected =
        "bracket,stage,instances,prompts\n"
        "3,0,10,8\n3,1,20,4\n3,2,40,2\n3,3,80,1\n2,0,20,6\n2,1,40,3\n2,2,80,1\n1,0,40,4\n1,1,80,2\n0,0,80,4\n";
    return Outcome{code == 0 && out.str() == expected, "10 rows compared byte-for-byte"};
  });

  criterion("Bootstrap variance", 5.0, [] {
    std::vector<double> row(1000, 0.0);
    std::fill(row.begin(), row.begin() + 500, 1.0);
    const double v10 = bootstrap_variance(row, 10, 1000, 1);
    bool ok = v10 >= 0.020 && v10 <= 0.030;
    std::string detail = "k=10: " + fmt(v10);
    for (int k : {50, 100, 500}) {
      const double ref = 0.25 / k;
      const double v = bootstrap_variance(row, k, 1000, static_cast<std::uint64_t>(k));
      ok = ok && std::abs(v - ref) <= 0.25 * ref;
      detail += ", k=" + std::to_string(k) + ": " + fmt(v / ref, 3) + "x ref";
    }
    return Outcome{ok, detail};
  });

  criterion("GP oracle equivalence", 30.0, [] {
    Rng rng(101);
    const SurrogateKind kinds[] = {SurrogateKind::VanillaGP, SurrogateKind::PcaGP, SurrogateKind::DeepKernelJoint,
                                   SurrogateKind::DeepKernelStructural};
    double worst = 0.0;
    for (int design = 0; design < 50; ++design) {
      const PromptSpace space = random_space(3, 4, 3, rng);
      const int n = 2 + static_cast<int>(rng.index(7));
      TrainingSlice slice;
      const auto perm = rng.permutation(static_cast<int>(space.size()));
      slice.prompts.assign(perm.begin(), perm.begin() + n);
      slice.errors.resize(n);
      for (int k = 0; k < n; ++k) slice.errors(k) = rng.uniform(0.0, 1.0);
      const FitSnapshot s = fit(kinds[design % 4], space, slice, static_cast<std::uint64_t>(design));

      const KernelParams& kp = s.kernel();
      const Eigen::MatrixXd& xt = s.training_features();
      const Eigen::MatrixXd xs = s.features(space, space.all_ids());
      Eigen::MatrixXd kt = oracle::gram(xt, xt, kp.lengthscales, kp.outputscale);
      kt.diagonal().array() += kp.noise;
      const Eigen::MatrixXd kstar = oracle::gram(xt, xs, kp.lengthscales, kp.outputscale);
      const Eigen::VectorXd y = s.standardized_targets();
      const Eigen::VectorXd mean = kstar.transpose() * oracle::gauss_solve(kt, y);
      const Eigen::MatrixXd sol = oracle::gauss_solve(kt, kstar);
      const double mll = -y.dot(oracle::gauss_solve(kt, y).col(0)) - oracle::log_abs_det(kt);
      const Posterior post = s.predict(space, space.all_ids());
      worst = std::max(worst, relative(s.mll(), mll));
      for (Eigen::Index j = 0; j < xs.rows(); ++j) {
        const double var = std::max(0.0, kp.outputscale - kstar.col(j).dot(sol.col(j)));
        worst = std::max(worst, relative(post.mean(j), mean(j)));
        worst = std::max(worst, relative(post.std(j) * post.std(j), var));
      }
    }
    return Outcome{worst <= 1e-8, "50 designs, all four surrogates, worst relative error " + fmt(worst, 3)};
  });

  criterion("Gradient checks", 60.0, [] {
    Rng rng(202);
    GradientCheck extractor, mll_raw, mll_features, joint;
    for (int draw = 0; draw < 100; ++draw) {
      // Extractor alone: objective sum(c .* phi).
      ExtractorParams p = draw % 2 ? ExtractorParams::joint(3) : ExtractorParams::structural(3);
      p.init_glorot(rng);
      const Eigen::MatrixXd zi = random_matrix(3, 3, rng), ze = random_matrix(3, 3, rng);
      const Eigen::MatrixXd c = random_matrix(3, kLatentDim, rng);
      FeatureExtractor fx(p);
      fx.forward(zi, ze);
      fd_pair(
          [&](const Eigen::VectorXd& flat) {
            ExtractorParams q = p;
            q.assign(flat);
            return FeatureExtractor(q).apply(zi, ze).cwiseProduct(c).sum();
          },
          p.flatten(), fx.backward(c), extractor);

      // MLL w.r.t. kernel parameters and inputs.
      const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.index(5));
      const Eigen::MatrixXd x = random_matrix(n, 3, rng);
      const Eigen::VectorXd y = random_matrix(n, 1, rng).col(0);
      RawKernelParams raw = RawKernelParams::initial(3);
      raw.log_lengthscales = 0.3 * random_matrix(3, 1, rng).col(0);
      raw.raw_noise = -1.5 + 0.5 * rng.normal();
      const MllResult r = log_marginal_likelihood(x, y, raw);
      fd_pair(
          [&](const Eigen::VectorXd& t) {
            RawKernelParams q = raw;
            q.assign(t);
            return log_marginal_likelihood(x, y, q, false).value;
          },
          raw.flatten(), r.grad_raw, mll_raw);
      fd_pair([&](const Eigen::VectorXd& flat) { return log_marginal_likelihood(flat.reshaped(n, 3), y, raw, false).value; },
              x.reshaped(), r.grad_features.reshaped(), mll_features);

      // MLL through the structural extractor, kernel and network jointly.
      if (draw % 4 == 0) {
        ExtractorParams dp = ExtractorParams::structural(2);
        dp.init_glorot(rng);
        const Eigen::MatrixXd di = random_matrix(n, 2, rng), de = random_matrix(n, 2, rng);
        RawKernelParams kraw = RawKernelParams::initial(kLatentDim);
        kraw.raw_noise = -1.0;
        FeatureExtractor net(dp);
        const MllResult jr = log_marginal_likelihood(net.forward(di, de), y, kraw);
        Eigen::VectorXd analytic(kraw.size() + dp.parameter_count()), theta(analytic.size());
        analytic << jr.grad_raw, net.backward(jr.grad_features);
        theta << kraw.flatten(), dp.flatten();
        fd_pair(
            [&](const Eigen::VectorXd& t) {
              RawKernelParams kq = kraw;
              kq.assign(t.head(kraw.size()));
              ExtractorParams eq = dp;
              eq.assign(t.tail(dp.parameter_count()));
              return log_marginal_likelihood(FeatureExtractor(eq).apply(di, de), y, kq, false).value;
            },
            theta, analytic, joint);
      }
    }
    const double worst = std::max({extractor.worst, mll_raw.worst, mll_features.worst, joint.worst});
    const long checked = extractor.checked + mll_raw.checked + mll_features.checked + joint.checked;
    const long skipped = extractor.skipped + mll_raw.skipped + mll_features.skipped + joint.skipped;
    return Outcome{worst <= 1e-3 && skipped * 100 < checked,
                   "100 draws, worst relative error " + fmt(worst, 3) + ", " + std::to_string(skipped) + " of " +
                       std::to_string(checked + skipped) + " coordinates at ReLU kinks skipped"};
  });

  criterion("EI correctness", 60.0, [] {
    Rng rng(303);
    std::mt19937_64 engine(11);
    std::normal_distribution<double> z;
    const int samples = 1000000;
    double worst_z = 0.0;
    bool ok = true;
    for (int trial = 0; trial < 50; ++trial) {
      const double mu = rng.uniform(-2.0, 2.0), sigma = rng.uniform(0.05, 2.0), v_min = rng.uniform(-2.0, 2.0);
      double sum = 0.0, sum_sq = 0.0;
      for (int s = 0; s < samples; ++s) {
        const double imp = std::max(v_min - (mu + sigma * z(engine)), 0.0);
        sum += imp;
        sum_sq += imp * imp;
      }
      const double mean = sum / samples;
      const double se = std::sqrt((sum_sq / samples - mean * mean) / samples);
      const double gap = std::abs(expected_improvement(mu, sigma, v_min) - mean);
      ok = ok && gap <= 3.0 * se + 1.0 / samples;
      if (se > 0.0) worst_z = std::max(worst_z, gap / se);
    }
    const bool degenerate = expected_improvement(1.0, 0.0, 0.0) == 0.0 &&
                            expected_improvement(-0.3, 0.0, 0.0) == 0.3 &&
                            expected_improvement(0.0, 0.0, 0.0) == 0.0;
    return Outcome{ok && degenerate, "50 triples, worst gap " + fmt(worst_z, 3) + " MC standard errors; sigma=0 cases exact"};
  });

  criterion("Caching factor", 1.0, [] {
    Rng rng(404);
    Eigen::MatrixXd v(20, 80);
    for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] = rng.bernoulli(0.4) ? 1.0 : 0.0;
    TabularOracle oracle(v, Eigen::MatrixXd::Zero(20, 1));
    const FidelityChain chain = FidelityChain::sampled(80, 10, 1);
    const Bracket s3 = build_plan(80, 10, 2.0).brackets.front();
    auto proposer = [] {
      return [next = 0](const std::vector<PromptId>&, int) mutable -> std::optional<PromptId> { return next++; };
    };
    EvaluationSession cached(oracle, chain, PolicySet{}, 100000, 1);
    run_bracket(s3, proposer(), cached);
    PolicySet off;
    off.subset = SubsetPolicy::Independent;
    off.caching = false;
    EvaluationSession uncached(oracle, chain, off, 100000, 1);
    run_bracket(s3, proposer(), uncached);
    const long a = cached.ledger().calls_used(), b = uncached.ledger().calls_used();
    return Outcome{s3.s == 3 && a == 200 && b == 320,
                   std::to_string(a) + " vs " + std::to_string(b) + " calls, ratio " + fmt(double(b) / a, 3)};
  });

  criterion("Determinism", 120.0, [&] {
    const auto grid = default_grid();
    bool ok = true;
    std::string differing;
    for (MethodKind m : all_methods()) {
      MethodConfig base;
      auto first = run_experiment(synthetic, {m}, base, 21, 1, grid, 1);
      auto second = run_experiment(synthetic, {m}, base, 21, 1, grid, 1);
      std::ostringstream a, b;
      write_results_csv(a, result_rows(first[0].trace, first[0].curve));
      write_results_csv(b, result_rows(second[0].trace, second[0].curve));
      if (a.str() != b.str()) {
        ok = false;
        differing += std::string(" ") + to_string(m);
      }
      all_runs.push_back(first[0]);
      all_runs.push_back(second[0]);
    }
    return Outcome{ok, ok ? "all 8 methods, seed 21, identical results.csv bytes" : "differs:" + differing};
  });

  criterion("Method-ladder ordering", 20 * 60.0, [&] {
    const auto runs = run_experiment(synthetic, ladder_methods(), MethodConfig{}, 0, 30, {1.0}, 1);
    all_runs.insert(all_runs.end(), runs.begin(), runs.end());
    std::map<MethodKind, double> mean;
    std::string detail;
    for (const auto& e : summarize_final(runs)) {
      mean[e.method] = e.mean;
      detail += std::string(detail.empty() ? "" : ", ") + to_string(e.method) + " " + fmt(e.mean, 3) + "+-" +
                fmt(e.se, 2);
    }
    const MethodKind chain[] = {MethodKind::HbBoPs, MethodKind::HbPs, MethodKind::BoPsStructural, MethodKind::VanillaBO,
                                MethodKind::RandomSearch};
    int violations = 0;
    bool within = true;
    for (int k = 0; k + 1 < 5; ++k) {
      const double excess = mean[chain[k]] - mean[chain[k + 1]];
      if (excess > 0.0) {
        ++violations;
        within = within && excess <= 0.01;
        detail += std::string("; violated ") + to_string(chain[k]) + " <= " + to_string(chain[k + 1]) + " by " +
                  fmt(excess, 3);
      }
    }
    return Outcome{violations == 0 || (violations == 1 && within), "30 seeds: " + detail};
  });

  criterion("Incumbent-policy ablation", 10 * 60.0, [&] {
    MethodConfig hf;
    hf.kind = MethodKind::HbPs;
    MethodConfig le = hf;
    le.policies.incumbent = IncumbentPolicy::LowestError;
    const auto a = run_experiment(synthetic, {MethodKind::HbPs}, hf, 0, 30, {1.0}, 1);
    const auto b = run_experiment(synthetic, {MethodKind::HbPs}, le, 0, 30, {1.0}, 1);
    all_runs.insert(all_runs.end(), a.begin(), a.end());
    all_runs.insert(all_runs.end(), b.begin(), b.end());
    const double ma = summarize_final(a)[0].mean, mb = summarize_final(b)[0].mean;
    return Outcome{mb - ma > 0.0, "HB with random proposals, 30 seeds: highest_fidelity " + fmt(ma, 3) +
                                      " vs lowest_error " + fmt(mb, 3)};
  });

  criterion("Full-fidelity monotonicity", 1.0, [&] {
    const int full = synthetic.oracle->n_valid();
    long checked = 0, bad = 0;
    for (const auto& r : all_runs) {
      // Under LowestError a low-fidelity incumbent may displace a full one, so
      // only highest-fidelity runs carry the guarantee.
      if (r.config.policies.incumbent != IncumbentPolicy::HighestFidelity) continue;
      ++checked;
      bad += !non_increasing(r.trace, full);
    }
    return Outcome{bad == 0 && checked > 0,
                   std::to_string(checked) + " traces from the suites above, " + std::to_string(bad) + " violations"};
  });

  const std::string summary =
      failures == 0 ? "all criteria passed"
                    : std::to_string(failures) + (failures == 1 ? " criterion failed" : " criteria failed");
  std::cout << summary << std::endl;
  report << summary << std::endl;
  return 0;
}
