#include <doctest.h>

#include "promptband/core/csv.hpp"
#include "promptband/core/errors.hpp"
#include "promptband/core/fidelity.hpp"
#include "promptband/core/ledger.hpp"
#include "promptband/core/prompt_space.hpp"
#include "promptband/core/random.hpp"
#include "promptband/core/scenario_files.hpp"
#include "promptband/core/trace.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace promptband;

namespace {

std::vector<Component> components(int n, int d, Rng& rng, int first_id = 0) {
  std::vector<Component> out;
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd e(d);
    for (int j = 0; j < d; ++j) e(j) = rng.normal();
    out.push_back({first_id + k, e});
  }
  return out;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("promptband_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("build_prompt_space sizes") {
  Rng rng(1);
  CHECK(build_prompt_space(components(5, 4, rng), components(50, 4, rng)).size() == 250);

  const PromptSpace one = build_prompt_space(components(1, 3, rng), components(1, 3, rng));
  REQUIRE(one.size() == 1);
  CHECK(one.prompts()[0].prompt_id == 0);

  const PromptSpace small = build_prompt_space(components(3, 8, rng), components(4, 8, rng));
  CHECK(small.size() == 12);
  CHECK(small.embedding_dim() == 8);
}

TEST_CASE("build_prompt_space orders prompts by (instruction_id, exemplar_id)") {
  Rng rng(2);
  auto instr = components(3, 2, rng, 10);
  std::swap(instr[0], instr[2]);  // input order must not matter
  const PromptSpace s = build_prompt_space(instr, components(2, 2, rng, 5));
  std::vector<std::pair<int, int>> pairs;
  for (const auto& p : s.prompts()) pairs.emplace_back(p.instruction_id, p.exemplar_id);
  const std::vector<std::pair<int, int>> expected{{10, 5}, {10, 6}, {11, 5}, {11, 6}, {12, 5}, {12, 6}};
  CHECK(pairs == expected);
  CHECK(s.instruction_embedding(2) == s.instructions()[1].embedding);
}

TEST_CASE("build_prompt_space errors") {
  Rng rng(3);
  CHECK_THROWS_AS(build_prompt_space(components(2, 3, rng), components(2, 4, rng)), DimensionError);
  CHECK_THROWS_AS(build_prompt_space({}, components(2, 4, rng)), EmptySpaceError);
  CHECK_THROWS_AS(build_prompt_space(components(2, 4, rng), {}), EmptySpaceError);
  auto bad = components(2, 3, rng);
  bad[1].embedding(0) = NAN;
  CHECK_THROWS_AS(build_prompt_space(bad, components(2, 3, rng)), ValidationError);
}

TEST_CASE("Cartesian completeness over random pool sizes") {
  Rng rng(4);
  for (int trial = 0; trial < 25; ++trial) {
    const int ni = 1 + static_cast<int>(rng.index(7));
    const int ne = 1 + static_cast<int>(rng.index(9));
    const PromptSpace s = build_prompt_space(components(ni, 3, rng), components(ne, 3, rng));
    REQUIRE(s.size() == static_cast<std::size_t>(ni * ne));
    std::set<std::pair<int, int>> seen;
    for (std::size_t k = 0; k < s.size(); ++k) {
      CHECK(s.prompts()[k].prompt_id == static_cast<int>(k));
      seen.emplace(s.prompts()[k].instruction_id, s.prompts()[k].exemplar_id);
    }
    CHECK(seen.size() == s.size());
  }
}

TEST_CASE("fidelity_subset is a prefix of the chain permutation") {
  const FidelityChain chain({4, 1, 3, 0, 2}, 1);
  const auto two = fidelity_subset(chain, 2);
  CHECK(std::vector<int>(two.begin(), two.end()) == std::vector<int>{4, 1});
  const auto all = fidelity_subset(chain, 5);
  CHECK(std::vector<int>(all.begin(), all.end()) == chain.permutation());
  CHECK(chain.levels().back() == 5);
  CHECK_THROWS_AS(fidelity_subset(chain, 0), RangeError);
  CHECK_THROWS_AS(fidelity_subset(chain, 6), RangeError);
  CHECK_THROWS_AS(fidelity_subset(FidelityChain({0, 1, 2}, 2), 1), RangeError);
  CHECK_THROWS(FidelityChain({0, 0, 2}, 1));
}

TEST_CASE("nesting holds for sampled chains") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FidelityChain chain = FidelityChain::sampled(40, 2, seed);
    for (int b = 2; b < 40; ++b) {
      const auto small = fidelity_subset(chain, b);
      const auto big = fidelity_subset(chain, b + 1);
      CHECK(std::equal(small.begin(), small.end(), big.begin()));
    }
    CHECK(FidelityChain::sampled(40, 2, seed).permutation() == chain.permutation());
  }
}

TEST_CASE("record_evaluation examples") {
  EvaluationLedger ledger;
  const std::vector<int> subset{0, 1, 2, 3};
  CHECK(ledger.record_evaluation(0, subset, std::vector<double>{0, 1, 1, 0}) == doctest::Approx(0.5));
  CHECK(ledger.record_evaluation(1, subset, std::vector<double>{0, 0, 0, 0}) == 0.0);
  CHECK(ledger.calls_used() == 8);

  // 10 of 20 instances already cached
  EvaluationLedger l2;
  std::vector<int> first(10), second(20);
  for (int i = 0; i < 20; ++i) {
    if (i < 10) first[i] = i;
    second[i] = i;
  }
  l2.record_evaluation(3, first, std::vector<double>(10, 1.0));
  const long before = l2.calls_used();
  CHECK(l2.uncached(3, second).size() == 10);
  l2.record_evaluation(3, second, std::vector<double>(20, 1.0));
  CHECK(l2.calls_used() - before == 10);
}

TEST_CASE("record_evaluation errors") {
  EvaluationLedger ledger;
  const std::vector<int> subset{0, 1};
  CHECK_THROWS_AS(ledger.record_evaluation(0, subset, std::vector<double>{0, 1.5}), ValidationError);
  CHECK_THROWS_AS(ledger.record_evaluation(0, subset, std::vector<double>{-0.1, 0}), ValidationError);
  CHECK_THROWS_AS(ledger.record_evaluation(0, subset, std::vector<double>{0}), AlignmentError);
  CHECK(ledger.calls_used() == 0);
}

TEST_CASE("cache soundness and call accounting under random evaluation sequences") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    EvaluationLedger ledger;
    std::map<std::pair<int, int>, double> truth;
    long last_calls = 0;
    for (int step = 0; step < 30; ++step) {
      const int prompt = static_cast<int>(rng.index(5));
      const int b = 1 + static_cast<int>(rng.index(12));
      std::vector<int> subset = rng.permutation(15);
      subset.resize(static_cast<std::size_t>(b));
      std::vector<double> losses;
      for (int i : subset) {
        // Deterministic per pair, as with a tabular oracle.
        auto [it, fresh] = truth.try_emplace({prompt, i}, double((prompt * 7 + i * 3) % 4) / 3.0);
        losses.push_back(it->second);
      }
      ledger.record_evaluation(prompt, subset, losses);
      CHECK(ledger.calls_used() >= last_calls);
      last_calls = ledger.calls_used();
    }
    CHECK(ledger.calls_used() == static_cast<long>(truth.size()));
    CHECK(ledger.distinct_pairs() == truth.size());
    long prev = -1;
    for (const auto& r : ledger.records()) {
      double sum = 0.0;
      for (int i : *r.instances) sum += *ledger.cached(r.prompt_id, i);
      CHECK(std::abs(sum / r.subset_size - r.mean_error) <= 1e-12);
      CHECK(r.order_index > prev);
      prev = r.order_index;
    }
  }
}

TEST_CASE("ledger without caching counts every pair") {
  EvaluationLedger ledger(false);
  const std::vector<int> s{0, 1, 2};
  ledger.record_evaluation(0, s, std::vector<double>{0, 0, 1});
  CHECK(ledger.uncached(0, s).size() == 3);
  ledger.record_evaluation(0, s, std::vector<double>{0, 0, 1});
  CHECK(ledger.calls_used() == 6);
}

TEST_CASE("latest_at keeps the latest record per prompt") {
  EvaluationLedger ledger(false);
  ledger.record_evaluation(1, std::vector<int>{0, 1}, std::vector<double>{1, 1});
  ledger.record_evaluation(2, std::vector<int>{0, 1}, std::vector<double>{0, 1});
  ledger.record_evaluation(1, std::vector<int>{0, 1}, std::vector<double>{0, 0});
  ledger.record_evaluation(2, std::vector<int>{0, 1, 2}, std::vector<double>{0, 0, 0});
  const auto latest = ledger.latest_at(2);
  REQUIRE(latest.size() == 2);
  CHECK(latest[0].prompt_id == 2);
  CHECK(latest[1].prompt_id == 1);
  CHECK(latest[1].mean_error == 0.0);
  CHECK(ledger.subset_sizes() == std::vector<int>{2, 3});
}

TEST_CASE("csv helpers") {
  CHECK(csv::split("a,b,,c") == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(csv::to_double("0.25") == 0.25);
  CHECK(csv::to_long("-12") == -12);
  CHECK_THROWS(csv::to_double("x1"));
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678, -0.0}) CHECK(csv::to_double(csv::format(v)) == v);
  CHECK(csv::format(NAN) == "NA");
}

TEST_CASE("scenario files round-trip") {
  Rng rng(5);
  ScenarioFiles f;
  f.space = build_prompt_space(components(2, 3, rng), components(3, 3, rng));
  f.valid_losses = Eigen::MatrixXd::Zero(6, 4);
  f.test_losses = Eigen::MatrixXd::Ones(6, 2);
  f.valid_losses(4, 2) = 1.0;
  f.manifest = ScenarioManifest{"tiny", 4, 2, 3, "exact_match"};
  const auto dir = temp_dir("roundtrip");
  write_scenario_files(dir, f);
  const ScenarioFiles g = read_scenario_files(dir);
  CHECK(g.manifest.name == "tiny");
  CHECK(g.manifest.n_valid == 4);
  CHECK(g.space.size() == 6);
  CHECK(g.valid_losses == f.valid_losses);
  CHECK(g.test_losses == f.test_losses);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(g.space.instructions()[k].embedding == f.space.instructions()[k].embedding);
  }
  std::filesystem::remove(dir / "manifest.json");
  try {
    read_scenario_files(dir);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("manifest.json") != std::string::npos);
  }
}

TEST_CASE("embedding files from an external exporter load into a prompt space") {
  // Layout written by the companion exporter: id column plus e0..e{d-1}.
  const auto dir = temp_dir("export");
  const int d = 768;
  Rng rng(6);
  auto write = [&](const std::string& file, const std::string& id_col, int n) {
    std::ofstream out(dir / file);
    out << id_col;
    for (int j = 0; j < d; ++j) out << ",e" << j;
    out << "\n";
    for (int k = 0; k < n; ++k) {
      out << k;
      for (int j = 0; j < d; ++j) out << ',' << csv::format(rng.normal());
      out << "\n";
    }
  };
  write("instructions.csv", "instruction_id", 5);
  write("exemplars.csv", "exemplar_id", 50);
  const PromptSpace a = read_prompt_space(dir);
  const PromptSpace b = read_prompt_space(dir);
  CHECK(a.embedding_dim() == 768);
  CHECK(a.size() == 250);
  CHECK(a.joint_matrix(a.all_ids()) == b.joint_matrix(b.all_ids()));
}

TEST_CASE("trace csv") {
  RunTrace t{"rs", "toy", 3, 10, {{5, 1, 0.25, 5}, {10, 2, 0.5, 5}}, {}};
  std::ostringstream os;
  write_trace_csv(os, t);
  CHECK(os.str() ==
        "method,scenario,seed,calls_used,incumbent_prompt_id,incumbent_valid_error,incumbent_fidelity\n"
        "rs,toy,3,5,1,0.25,5\nrs,toy,3,10,2,0.5,5\n");
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
  Rng a(9), b(9);
  CHECK(a.permutation(30) == b.permutation(30));
}
