#pragma once

#include "promptband/core/scenario_files.hpp"
#include "promptband/core/trace.hpp"
#include "promptband/methods/methods.hpp"
#include "promptband/oracle/oracle.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace promptband {

/// Best and worst full-set errors over all prompts of a scenario.
struct NormalizationBounds {
  double best_valid = 0.0;
  double worst_valid = 1.0;
  double best_test = 0.0;
  double worst_test = 1.0;
};

NormalizationBounds compute_bounds(const TabularOracle& oracle);

/// (raw - best) / (worst - best), unclamped.
double normalized_error(double raw, double best, double worst);

struct Scenario {
  std::string name;
  PromptSpace space;
  std::shared_ptr<const TabularOracle> oracle;
  NormalizationBounds bounds;
  std::string digest;  // content hash of the scenario data

  static Scenario from_files(const ScenarioFiles& files);
  static Scenario load(const std::filesystem::path& dir);
};

std::string scenario_digest(const ScenarioFiles& files);

struct AnytimeCurve {
  std::vector<double> fractions;
  std::vector<std::optional<double>> valid;  // normalized; nullopt before the first event
  std::vector<std::optional<double>> test;
};

/// Incumbent normalized errors at each budget fraction f, using the last
/// event with calls_used <= round(f * budget_calls).
AnytimeCurve anytime_curve(const RunTrace& trace, const TabularOracle& oracle,
                           const NormalizationBounds& bounds, const std::vector<double>& fractions);

long budget_cutoff(double fraction, long budget_calls);

/// 50 log-spaced fractions in [0.04, 1].
std::vector<double> default_grid(int points = 50, double lo = 0.04, double hi = 1.0);

struct ResultRow {
  std::string method;
  std::string scenario;
  std::uint64_t seed = 0;
  double fraction = 0.0;
  std::optional<double> valid_norm;
  std::optional<double> test_norm;
};

std::vector<ResultRow> result_rows(const RunTrace& trace, const AnytimeCurve& curve);
void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

struct AggregateRow {
  std::string method;
  std::string metric;  // "valid" or "test"
  double fraction = 0.0;
  double mean = 0.0;
  double se = 0.0;
  int n = 0;
  int missing = 0;
};

/// Mean and standard error (sample std / sqrt(n)) per method, metric and
/// fraction across seeds and scenarios. Missing values are counted, not used.
std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows);
void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows);
std::vector<AggregateRow> read_aggregate_csv(const std::filesystem::path& path);

struct PlotOptions {
  std::string metric = "valid";
  bool log_x = true;
  int width = 720;
  int height = 480;
  std::string title;
};

/// One polyline per method with a standard-error ribbon. Returns an empty
/// string (and writes nothing) for an empty table.
std::string render_plot(const std::vector<AggregateRow>& rows, const PlotOptions& options = {});
/// Writes the SVG; returns false with a warning on stderr if rows is empty.
bool emit_plot(const std::vector<AggregateRow>& rows, const std::filesystem::path& path,
               const PlotOptions& options = {});

/// Seed of repetition rep under base_seed.
std::uint64_t repetition_seed(std::uint64_t base_seed, int rep);

struct RunResult {
  MethodConfig config;
  RunTrace trace;
  AnytimeCurve curve;
};

/// Runs every (method, repetition) pair, up to jobs at a time. Results are
/// ordered by method, then repetition, independent of jobs.
std::vector<RunResult> run_experiment(const Scenario& scenario, const std::vector<MethodKind>& methods,
                                      const MethodConfig& base, std::uint64_t base_seed, int repetitions,
                                      const std::vector<double>& grid, int jobs = 1);

struct LadderEntry {
  MethodKind method;
  double mean = 0.0;  // final normalized validation error
  double se = 0.0;
  int n = 0;
};

/// Final normalized validation error per method over repetitions.
std::vector<LadderEntry> summarize_final(const std::vector<RunResult>& runs);

std::vector<LadderEntry> method_ladder(const Scenario& scenario, std::uint64_t base_seed, int repetitions,
                                       const MethodConfig& base = {}, int jobs = 1);

}  // namespace promptband
