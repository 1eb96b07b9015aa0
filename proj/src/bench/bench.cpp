#include "promptband/bench/bench.hpp"

#include "promptband/core/csv.hpp"
#include "promptband/core/errors.hpp"
#include "promptband/core/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

namespace promptband {

NormalizationBounds compute_bounds(const TabularOracle& oracle) {
  const Eigen::VectorXd v = oracle.valid_matrix().rowwise().mean();
  const Eigen::VectorXd t = oracle.test_matrix().rowwise().mean();
  return NormalizationBounds{v.minCoeff(), v.maxCoeff(), t.minCoeff(), t.maxCoeff()};
}

double normalized_error(double raw, double best, double worst) {
  if (!(worst > best)) {
    throw DegenerateScenarioError("cannot normalize: worst error " + csv::format(worst) +
                                  " does not exceed best error " + csv::format(best) +
                                  " (every prompt performs the same)");
  }
  return (raw - best) / (worst - best);
}

namespace {

std::uint64_t fnv(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t k = 0; k < n; ++k) {
    h ^= p[k];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv_matrix(std::uint64_t h, const Eigen::MatrixXd& m) {
  const Eigen::Index dims[2] = {m.rows(), m.cols()};
  h = fnv(h, dims, sizeof dims);
  return fnv(h, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

}  // namespace

std::string scenario_digest(const ScenarioFiles& files) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv(h, files.manifest.name.data(), files.manifest.name.size());
  for (const auto* list : {&files.space.instructions(), &files.space.exemplars()}) {
    for (const Component& c : *list) {
      h = fnv(h, &c.id, sizeof c.id);
      h = fnv(h, c.embedding.data(), sizeof(double) * static_cast<std::size_t>(c.embedding.size()));
    }
  }
  h = fnv_matrix(h, files.valid_losses);
  h = fnv_matrix(h, files.test_losses);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Scenario Scenario::from_files(const ScenarioFiles& files) {
  Scenario s;
  s.name = files.manifest.name;
  s.space = files.space;
  s.oracle = std::make_shared<const TabularOracle>(files.valid_losses, files.test_losses);
  if (s.oracle->n_prompts() != s.space.size()) {
    throw ValidationError("loss matrices have " + std::to_string(s.oracle->n_prompts()) +
                          " rows for " + std::to_string(s.space.size()) + " prompts");
  }
  s.bounds = compute_bounds(*s.oracle);
  s.digest = scenario_digest(files);
  return s;
}

Scenario Scenario::load(const std::filesystem::path& dir) { return from_files(read_scenario_files(dir)); }

long budget_cutoff(double fraction, long budget_calls) {
  return std::lround(fraction * static_cast<double>(budget_calls));
}

AnytimeCurve anytime_curve(const RunTrace& trace, const TabularOracle& oracle,
                           const NormalizationBounds& bounds, const std::vector<double>& fractions) {
  if (trace.events.empty()) throw ValidationError("trace of " + trace.method + " has no events");
  AnytimeCurve curve;
  curve.fractions = fractions;
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw RangeError("budget fraction " + csv::format(f) + " outside (0, 1]");
    const long cutoff = budget_cutoff(f, trace.budget_calls);
    const TraceEvent* last = nullptr;
    for (const auto& e : trace.events) {
      if (e.calls_used > cutoff) break;
      last = &e;
    }
    if (!last) {
      curve.valid.push_back(std::nullopt);
      curve.test.push_back(std::nullopt);
      continue;
    }
    curve.valid.push_back(
        normalized_error(oracle.valid_error(last->incumbent_prompt_id), bounds.best_valid, bounds.worst_valid));
    curve.test.push_back(
        normalized_error(oracle.test_error(last->incumbent_prompt_id), bounds.best_test, bounds.worst_test));
  }
  return curve;
}

std::vector<double> default_grid(int points, double lo, double hi) {
  if (points < 1) throw RangeError("grid needs at least one point");
  if (!(lo > 0.0 && lo <= hi && hi <= 1.0)) throw RangeError("grid bounds must satisfy 0 < lo <= hi <= 1");
  std::vector<double> grid;
  if (points == 1) return {hi};
  const double a = std::log(lo), b = std::log(hi);
  for (int k = 0; k < points; ++k) grid.push_back(std::exp(a + (b - a) * k / (points - 1)));
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

std::vector<ResultRow> result_rows(const RunTrace& trace, const AnytimeCurve& curve) {
  std::vector<ResultRow> rows;
  for (std::size_t k = 0; k < curve.fractions.size(); ++k) {
    rows.push_back(ResultRow{trace.method, trace.scenario, trace.seed, curve.fractions[k], curve.valid[k],
                             curve.test[k]});
  }
  return rows;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? csv::format(*v) : "NA"; }

std::optional<double> parse_opt(const std::string& s) {
  if (s == "NA") return std::nullopt;
  return csv::to_double(s);
}

}  // namespace

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "method,scenario,seed,fraction,valid_norm,test_norm\n";
  for (const auto& r : rows) {
    os << r.method << ',' << r.scenario << ',' << r.seed << ',' << csv::format(r.fraction) << ','
       << opt(r.valid_norm) << ',' << opt(r.test_norm) << '\n';
  }
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  const std::size_t m = t.column("method"), sc = t.column("scenario"), sd = t.column("seed"),
                    f = t.column("fraction"), v = t.column("valid_norm"), te = t.column("test_norm");
  std::vector<ResultRow> rows;
  for (const auto& r : t.rows) {
    rows.push_back(ResultRow{r[m], r[sc], std::stoull(r[sd]), csv::to_double(r[f]), parse_opt(r[v]),
                             parse_opt(r[te])});
  }
  return rows;
}

std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows) {
  std::vector<std::string> methods;
  std::map<std::tuple<std::string, std::string, double>, std::pair<std::vector<double>, int>> groups;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    for (const char* metric : {"valid", "test"}) {
      const auto& v = std::strcmp(metric, "valid") == 0 ? r.valid_norm : r.test_norm;
      auto& g = groups[{r.method, metric, r.fraction}];
      if (v) {
        g.first.push_back(*v);
      } else {
        ++g.second;
      }
    }
  }
  std::vector<AggregateRow> out;
  for (const auto& method : methods) {
    for (const char* metric : {"valid", "test"}) {
      for (auto& [key, g] : groups) {
        if (std::get<0>(key) != method || std::get<1>(key) != metric) continue;
        AggregateRow a{method, metric, std::get<2>(key), std::nan(""), 0.0, 0, g.second};
        std::vector<double> vals = g.first;
        std::sort(vals.begin(), vals.end());  // order-independent sums
        a.n = static_cast<int>(vals.size());
        if (a.n > 0) {
          double sum = 0.0;
          for (double x : vals) sum += x;
          a.mean = sum / a.n;
          if (a.n > 1) {
            double ss = 0.0;
            for (double x : vals) ss += (x - a.mean) * (x - a.mean);
            a.se = std::sqrt(ss / (a.n - 1)) / std::sqrt(static_cast<double>(a.n));
          }
        }
        out.push_back(a);
      }
    }
  }
  return out;
}

void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
  os << "method,metric,fraction,mean,se,n,missing\n";
  for (const auto& r : rows) {
    os << r.method << ',' << r.metric << ',' << csv::format(r.fraction) << ',' << csv::format(r.mean) << ','
       << csv::format(r.se) << ',' << r.n << ',' << r.missing << '\n';
  }
}

std::vector<AggregateRow> read_aggregate_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  const std::size_t m = t.column("method"), me = t.column("metric"), f = t.column("fraction"),
                    mu = t.column("mean"), se = t.column("se"), n = t.column("n"), mi = t.column("missing");
  std::vector<AggregateRow> rows;
  for (const auto& r : t.rows) {
    auto num = [](const std::string& s) { return s == "NA" ? std::nan("") : csv::to_double(s); };
    rows.push_back(AggregateRow{r[m], r[me], csv::to_double(r[f]), num(r[mu]), num(r[se]),
                                static_cast<int>(csv::to_long(r[n])), static_cast<int>(csv::to_long(r[mi]))});
  }
  return rows;
}

namespace {

std::string fmt2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_plot(const std::vector<AggregateRow>& all, const PlotOptions& o) {
  std::vector<AggregateRow> rows;
  for (const auto& r : all) {
    if (r.metric == o.metric && r.n > 0 && std::isfinite(r.mean)) rows.push_back(r);
  }
  if (rows.empty()) return {};
  for (const auto& r : rows) {
    if (o.log_x && !(r.fraction > 0.0)) {
      throw RangeError("log-scale plot cannot show fraction " + csv::format(r.fraction));
    }
  }
  std::vector<std::string> methods;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  auto xval = [&](double f) { return o.log_x ? std::log10(f) : f; };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& r : rows) {
    x0 = std::min(x0, xval(r.fraction));
    x1 = std::max(x1, xval(r.fraction));
    y0 = std::min(y0, r.mean - r.se);
    y1 = std::max(y1, r.mean + r.se);
  }
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double left = 60, right = 160, top = 40, bottom = 50;
  const double pw = o.width - left - right, ph = o.height - top - bottom;
  auto px = [&](double f) { return left + (xval(f) - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };

  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\"" << o.height
     << "\" viewBox=\"0 0 " << o.width << ' ' << o.height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!o.title.empty()) {
    os << "<text x=\"" << fmt2(left) << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">"
       << escape_xml(o.title) << "</text>\n";
  }
  os << "<line x1=\"" << fmt2(left) << "\" y1=\"" << fmt2(top + ph) << "\" x2=\"" << fmt2(left + pw)
     << "\" y2=\"" << fmt2(top + ph) << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << fmt2(left) << "\" y1=\"" << fmt2(top) << "\" x2=\"" << fmt2(left) << "\" y2=\""
     << fmt2(top + ph) << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = y0 + (y1 - y0) * k / 4.0;
    os << "<text x=\"" << fmt2(left - 6) << "\" y=\"" << fmt2(py(y) + 4)
       << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << fmt2(y) << "</text>\n";
    const double xv = x0 + (x1 - x0) * k / 4.0;
    const double f = o.log_x ? std::pow(10.0, xv) : xv;
    os << "<text x=\"" << fmt2(px(f)) << "\" y=\"" << fmt2(top + ph + 16)
       << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" << fmt2(f) << "</text>\n";
  }
  os << "<text x=\"" << fmt2(left + pw / 2) << "\" y=\"" << fmt2(o.height - 10.0)
     << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">budget fraction"
     << (o.log_x ? " (log)" : "") << "</text>\n";

  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::vector<const AggregateRow*> pts;
    for (const auto& r : rows) {
      if (r.method == methods[m]) pts.push_back(&r);
    }
    std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->fraction < b->fraction; });
    const char* color = palette[m % (sizeof palette / sizeof *palette)];
    os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (auto* p : pts) os << fmt2(px(p->fraction)) << ',' << fmt2(py(p->mean + p->se)) << ' ';
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
      os << fmt2(px((*it)->fraction)) << ',' << fmt2(py((*it)->mean - (*it)->se)) << ' ';
    }
    os << "\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < pts.size(); ++k) {
      os << (k ? " " : "") << fmt2(px(pts[k]->fraction)) << ',' << fmt2(py(pts[k]->mean));
    }
    os << "\"/>\n";
    const double ly = top + 14.0 * static_cast<double>(m);
    os << "<line x1=\"" << fmt2(left + pw + 10) << "\" y1=\"" << fmt2(ly) << "\" x2=\"" << fmt2(left + pw + 30)
       << "\" y2=\"" << fmt2(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << fmt2(left + pw + 34) << "\" y=\"" << fmt2(ly + 4)
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape_xml(methods[m]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

bool emit_plot(const std::vector<AggregateRow>& rows, const std::filesystem::path& path, const PlotOptions& o) {
  const std::string svg = render_plot(rows, o);
  if (svg.empty()) {
    std::cerr << "warning: nothing to plot for metric '" << o.metric << "'; " << path.string()
              << " not written\n";
    return false;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << svg;
  return true;
}

std::uint64_t repetition_seed(std::uint64_t base_seed, int rep) {
  return derive_seed(base_seed, static_cast<std::uint64_t>(rep));
}

std::vector<RunResult> run_experiment(const Scenario& scenario, const std::vector<MethodKind>& methods,
                                      const MethodConfig& base, std::uint64_t base_seed, int repetitions,
                                      const std::vector<double>& grid, int jobs) {
  if (repetitions < 1) throw ConfigError("repetitions must be positive");
  struct Task {
    MethodKind method;
    int rep;
  };
  std::vector<Task> tasks;
  for (MethodKind m : methods) {
    for (int r = 0; r < repetitions; ++r) tasks.push_back({m, r});
  }
  std::vector<std::optional<RunResult>> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < tasks.size();) {
      try {
        MethodConfig cfg = base;
        cfg.kind = tasks[k].method;
        cfg.seed = repetition_seed(base_seed, tasks[k].rep);
        TabularOracle oracle = *scenario.oracle;
        const FidelityChain chain =
            FidelityChain::sampled(oracle.n_valid(), 1, chain_seed(cfg.seed));
        RunTrace trace = run_method(cfg, scenario.space, oracle, chain, scenario.name);
        AnytimeCurve curve = anytime_curve(trace, oracle, scenario.bounds, grid);
        results[k] = RunResult{cfg, std::move(trace), std::move(curve)};
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::vector<RunResult> out;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    if (errors[k]) std::rethrow_exception(errors[k]);
    out.push_back(std::move(*results[k]));
  }
  return out;
}

std::vector<LadderEntry> summarize_final(const std::vector<RunResult>& runs) {
  std::vector<LadderEntry> out;
  std::map<MethodKind, std::vector<double>> finals;
  for (const auto& r : runs) {
    if (!finals.count(r.config.kind)) out.push_back(LadderEntry{r.config.kind});
    const auto& v = r.curve.valid.back();
    if (v) finals[r.config.kind].push_back(*v);
  }
  for (auto& e : out) {
    std::vector<double> vals = finals[e.method];
    std::sort(vals.begin(), vals.end());
    e.n = static_cast<int>(vals.size());
    if (e.n == 0) continue;
    double sum = 0.0;
    for (double x : vals) sum += x;
    e.mean = sum / e.n;
    if (e.n > 1) {
      double ss = 0.0;
      for (double x : vals) ss += (x - e.mean) * (x - e.mean);
      e.se = std::sqrt(ss / (e.n - 1) / e.n);
    }
  }
  return out;
}

std::vector<LadderEntry> method_ladder(const Scenario& scenario, std::uint64_t base_seed, int repetitions,
                                       const MethodConfig& base, int jobs) {
  if (repetitions < 10) throw ConfigError("the method ladder needs at least 10 repetitions");
  return summarize_final(run_experiment(scenario, ladder_methods(), base, base_seed, repetitions, {1.0}, jobs));
}

}  // namespace promptband
