#include "promptband/cli/app.hpp"

#include "promptband/bench/bench.hpp"
#include "promptband/cli/config.hpp"
#include "promptband/core/csv.hpp"
#include "promptband/core/errors.hpp"
#include "promptband/core/scenario_files.hpp"
#include "promptband/oracle/gateway.hpp"
#include "promptband/oracle/synthetic.hpp"
#include "promptband/scheduler/hyperband.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace promptband {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
  std::optional<std::string> config;
};

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + path.string());
  f << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& field : csv::split(s)) out.push_back(static_cast<int>(csv::to_long(field)));
  return out;
}

int cmd_schedule(int n_valid, int b_min, double eta, std::ostream& out, std::ostream& err) {
  const HyperbandPlan plan = build_plan(n_valid, b_min, eta);
  for (const auto& note : plan.notes) err << "note: " << note << "\n";
  out << plan_csv(plan);
  return 0;
}

int cmd_gen_synthetic(const Globals& g, SyntheticSpec spec, std::ostream& out) {
  if (g.config) spec = parse_synthetic_spec(read_file(*g.config));
  if (g.seed) spec.seed = *g.seed;
  const fs::path dir = g.out.value_or("scenario");
  const SyntheticScenario sc = generate_synthetic(spec);
  write_scenario_files(dir, sc.files);
  out << "wrote " << sc.files.space.size() << " prompts to " << dir.string() << "\n";
  return 0;
}

// Texts by id from a JSON list of {id, text}.
std::map<int, std::string> read_texts(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  std::map<int, std::string> out;
  for (const auto& item : j) out[item.at("id").get<int>()] = item.at("text").get<std::string>();
  return out;
}

std::vector<std::string> ordered_texts(const std::map<int, std::string>& texts,
                                       const std::vector<Component>& components, const std::string& what) {
  std::vector<std::string> out;
  for (const auto& c : components) {
    auto it = texts.find(c.id);
    if (it == texts.end()) throw ValidationError("no text for " + what + " id " + std::to_string(c.id));
    out.push_back(it->second);
  }
  return out;
}

int run_gateway(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  GatewayRun gw = *cfg.gateway;
  if (const char* url = std::getenv("PROMPTBAND_GATEWAY_URL"); url && *url) gw.config.endpoint = url;
  const PromptSpace space = read_prompt_space(*cfg.scenario);
  const fs::path assets = gw.assets;
  const auto instr = ordered_texts(read_texts(assets / "instructions.json"), space.instructions(), "instruction");
  const auto exem = ordered_texts(read_texts(assets / "exemplars.json"), space.exemplars(), "exemplar");
  std::vector<LabeledInstance> instances;
  {
    const auto j = nlohmann::json::parse(read_file(assets / "instances.json"));
    for (const auto& item : j) {
      instances.push_back({item.at("input").get<std::string>(), item.at("target").get<std::string>()});
    }
  }
  GatewayOracle oracle(gw.config, instr, exem, space, instances);
  const fs::path dir = cfg.output;
  std::ostringstream selected;
  selected << "method,seed,prompt_id,valid_error,fidelity,calls_used\n";
  int code = 0;
  for (MethodKind m : cfg.methods) {
    for (int rep = 0; rep < cfg.repetitions && code == 0; ++rep) {
      MethodConfig mc = cfg.method;
      mc.kind = m;
      mc.seed = repetition_seed(cfg.base_seed, rep);
      const FidelityChain chain = FidelityChain::sampled(oracle.n_valid(), 1, chain_seed(mc.seed));
      try {
        const RunTrace trace = run_method(mc, space, oracle, chain, "gateway");
        std::ostringstream t;
        write_trace_csv(t, trace);
        write_file(dir / "traces" / (std::string(to_string(m)) + "_rep" + std::to_string(rep) + ".csv"), t.str());
        if (!trace.events.empty()) {
          const auto& e = trace.events.back();
          selected << trace.method << ',' << trace.seed << ',' << e.incumbent_prompt_id << ','
                   << csv::format(e.incumbent_valid_error) << ',' << e.incumbent_fidelity << ',' << e.calls_used
                   << '\n';
        }
      } catch (const OracleUnavailable& e) {
        err << "error: oracle unavailable during " << to_string(m) << " repetition " << rep << ": " << e.what()
            << " (" << e.partial().size() << " partial losses kept)\n";
        code = 1;
      }
    }
  }
  write_file(dir / "selected.csv", selected.str());
  out << "gateway requests sent: " << oracle.requests_sent() << "\n";
  return code;
}

int cmd_run(const Globals& g, std::ostream& out, std::ostream& err) {
  if (!g.config) throw ConfigError("run needs --config");
  RunConfig cfg = load_run_config(*g.config);
  if (g.seed) cfg.base_seed = *g.seed;
  if (g.out) cfg.output = *g.out;
  if (g.jobs) cfg.jobs = *g.jobs;
  cfg.validate();
  if (cfg.gateway) return run_gateway(cfg, out, err);

  const Scenario scenario = cfg.scenario ? Scenario::load(*cfg.scenario)
                                         : Scenario::from_files(generate_synthetic(*cfg.synthetic).files);
  const auto grid = default_grid(cfg.grid.points, cfg.grid.lo, cfg.grid.hi);
  const auto runs =
      run_experiment(scenario, cfg.methods, cfg.method, cfg.base_seed, cfg.repetitions, grid, cfg.jobs);

  const fs::path dir = cfg.output;
  std::vector<ResultRow> rows;
  nlohmann::json warnings = nlohmann::json::object();
  std::map<std::string, int> reps;
  for (const auto& r : runs) {
    const int rep = reps[r.trace.method]++;
    const auto part = result_rows(r.trace, r.curve);
    rows.insert(rows.end(), part.begin(), part.end());
    std::ostringstream t;
    write_trace_csv(t, r.trace);
    const std::string name = r.trace.method + "_rep" + std::to_string(rep);
    write_file(dir / "traces" / (name + ".csv"), t.str());
    if (!r.trace.warnings.empty()) warnings[name] = r.trace.warnings;
  }
  std::ostringstream results, agg;
  write_results_csv(results, rows);
  const auto aggregated = aggregate(rows);
  write_aggregate_csv(agg, aggregated);
  write_file(dir / "results.csv", results.str());
  write_file(dir / "aggregate.csv", agg.str());
  write_file(dir / "config.json", serialize_run_config(cfg));
  nlohmann::json manifest = {{"scenario", scenario.name},
                             {"digest", scenario.digest},
                             {"bounds",
                              {{"best_valid", scenario.bounds.best_valid},
                               {"worst_valid", scenario.bounds.worst_valid},
                               {"best_test", scenario.bounds.best_test},
                               {"worst_test", scenario.bounds.worst_test}}},
                             {"runs", runs.size()},
                             {"warnings", warnings}};
  write_file(dir / "run_manifest.json", manifest.dump(2) + "\n");

  out << "method,final_valid_mean,final_valid_se,n\n";
  for (const auto& e : summarize_final(runs)) {
    out << to_string(e.method) << ',' << csv::format(e.mean) << ',' << csv::format(e.se) << ',' << e.n << '\n';
  }
  return 0;
}

int cmd_analyze(const Globals& g, const std::string& results_path, std::ostream& out) {
  const fs::path in = results_path.empty() ? fs::path(g.out.value_or("results")) / "results.csv" : fs::path(results_path);
  const auto rows = read_results_csv(in);
  const auto agg = aggregate(rows);
  std::ostringstream os;
  write_aggregate_csv(os, agg);
  if (g.out) {
    write_file(fs::path(*g.out) / "aggregate.csv", os.str());
  }
  out << os.str();
  return 0;
}

int cmd_bootstrap(const Globals& g, const std::string& scenario_dir, int prompt, const std::string& ks,
                  int replicates, std::ostream& out) {
  if (scenario_dir.empty()) throw ConfigError("bootstrap needs --scenario");
  const ScenarioFiles files = read_scenario_files(scenario_dir);
  if (prompt < 0 || prompt >= files.valid_losses.rows()) {
    throw RangeError("prompt " + std::to_string(prompt) + " does not exist");
  }
  const Eigen::VectorXd row = files.valid_losses.row(prompt).transpose();
  const std::span<const double> span(row.data(), static_cast<std::size_t>(row.size()));
  const double p = row.mean();
  const std::uint64_t seed = g.seed.value_or(0);
  std::ostringstream os;
  os << "k,variance,binomial_reference\n";
  for (int k : parse_int_list(ks)) {
    const double v = bootstrap_variance(span, k, replicates, derive_seed(seed, static_cast<std::uint64_t>(k)));
    os << k << ',' << csv::format(v) << ',' << csv::format(p * (1.0 - p) / k) << '\n';
  }
  if (g.out) write_file(*g.out, os.str());
  out << os.str();
  return 0;
}

int cmd_plot(const Globals& g, const std::string& aggregate_path, const PlotOptions& opts, std::ostream& out) {
  if (aggregate_path.empty()) throw ConfigError("plot needs --aggregate");
  const fs::path target = g.out.value_or("plot.svg");
  const auto rows = read_aggregate_csv(aggregate_path);
  if (emit_plot(rows, target, opts)) out << "wrote " << target.string() << "\n";
  return 0;
}

bool is_input_error(const Error& e) {
  return dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
         dynamic_cast<const RangeError*>(&e) || dynamic_cast<const ParameterError*>(&e) ||
         dynamic_cast<const DimensionError*>(&e) || dynamic_cast<const EmptySpaceError*>(&e) ||
         dynamic_cast<const AlignmentError*>(&e) || dynamic_cast<const DegenerateScenarioError*>(&e);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-fidelity prompt selection engine and benchmark harness", "promptband"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Base random seed");
  app.add_option("--out", g.out, "Output path");
  app.add_option("--jobs", g.jobs, "Parallel runs")->check(CLI::PositiveNumber);
  app.add_option("--config", g.config, "JSON configuration file");
  app.fallthrough();

  int n_valid = 0, b_min = 10;
  double eta = 2.0;
  auto* schedule = app.add_subcommand("schedule", "Print the Hyperband plan as CSV");
  schedule->add_option("--n-valid", n_valid, "Validation instances")->required();
  schedule->add_option("--b-min", b_min, "Smallest subset size");
  schedule->add_option("--eta", eta, "Halving parameter");

  SyntheticSpec spec;
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic scenario");
  gen->add_option("--n-instructions", spec.n_instructions);
  gen->add_option("--n-exemplars", spec.n_exemplars);
  gen->add_option("--n-valid", spec.n_valid);
  gen->add_option("--n-test", spec.n_test);
  gen->add_option("--dim", spec.embedding_dim);
  gen->add_option("--name", spec.name);

  auto* run = app.add_subcommand("run", "Run methods on a scenario as configured");

  std::string results_path;
  auto* analyze = app.add_subcommand("analyze", "Aggregate a results.csv");
  analyze->add_option("--results", results_path, "results.csv to aggregate");

  std::string scenario_dir, ks = "10,50,100";
  int prompt = 0, replicates = 1000;
  auto* boot = app.add_subcommand("bootstrap", "Bootstrap variance of subsampled validation error");
  boot->add_option("--scenario", scenario_dir, "Scenario directory")->required();
  boot->add_option("--prompt", prompt, "Prompt id")->required();
  boot->add_option("--k", ks, "Comma-separated subset sizes");
  boot->add_option("--replicates", replicates, "Bootstrap replicates");

  std::string aggregate_path;
  PlotOptions popts;
  bool linear = false;
  auto* plot = app.add_subcommand("plot", "Render aggregate.csv as SVG");
  plot->add_option("--aggregate", aggregate_path, "aggregate.csv")->required();
  plot->add_option("--metric", popts.metric, "valid or test");
  plot->add_flag("--linear", linear, "Linear x axis");
  plot->add_option("--title", popts.title);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (schedule->parsed()) return cmd_schedule(n_valid, b_min, eta, out, err);
    if (gen->parsed()) return cmd_gen_synthetic(g, spec, out);
    if (run->parsed()) return cmd_run(g, out, err);
    if (analyze->parsed()) return cmd_analyze(g, results_path, out);
    if (boot->parsed()) return cmd_bootstrap(g, scenario_dir, prompt, ks, replicates, out);
    if (plot->parsed()) {
      popts.log_x = !linear;
      return cmd_plot(g, aggregate_path, popts, out);
    }
  } catch (const OracleUnavailable& e) {
    err << "error: oracle unavailable: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_input_error(e) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace promptband
