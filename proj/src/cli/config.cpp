#include "promptband/cli/config.hpp"

#include "promptband/core/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace promptband {

using nlohmann::json;

namespace {

// Reads fields of one JSON object and rejects any key it was not asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  std::string where(const std::string& key = "") const {
    std::string p = path_.empty() ? "config" : path_;
    return key.empty() ? p : p + "." + key;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + where(it.key()) + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

SyntheticSpec read_synthetic(const json& j, const std::string& path) {
  SyntheticSpec s;
  ObjectReader r(j, path);
  r.get("n_instructions", s.n_instructions);
  r.get("n_exemplars", s.n_exemplars);
  r.get("n_valid", s.n_valid);
  r.get("n_test", s.n_test);
  r.get("embedding_dim", s.embedding_dim);
  r.get("seed", s.seed);
  r.get("w_instruction", s.w_instruction);
  r.get("w_exemplar", s.w_exemplar);
  r.get("interaction", s.interaction);
  r.get("instance_correlation", s.instance_correlation);
  r.get("nuisance_factors", s.nuisance_factors);
  r.get("nuisance_scale", s.nuisance_scale);
  r.get("embedding_noise", s.embedding_noise);
  r.get("name", s.name);
  r.finish();
  return s;
}

json write_synthetic(const SyntheticSpec& s) {
  return json{{"n_instructions", s.n_instructions},
              {"n_exemplars", s.n_exemplars},
              {"n_valid", s.n_valid},
              {"n_test", s.n_test},
              {"embedding_dim", s.embedding_dim},
              {"seed", s.seed},
              {"w_instruction", s.w_instruction},
              {"w_exemplar", s.w_exemplar},
              {"interaction", s.interaction},
              {"instance_correlation", s.instance_correlation},
              {"nuisance_factors", s.nuisance_factors},
              {"nuisance_scale", s.nuisance_scale},
              {"embedding_noise", s.embedding_noise},
              {"name", s.name}};
}

GatewayRun read_gateway(const json& j) {
  GatewayRun g;
  ObjectReader r(j, "config.gateway");
  r.get("endpoint", g.config.endpoint);
  long timeout = g.config.timeout.count(), backoff = g.config.backoff_base.count();
  r.get("timeout_ms", timeout);
  r.get("backoff_base_ms", backoff);
  g.config.timeout = std::chrono::milliseconds(timeout);
  g.config.backoff_base = std::chrono::milliseconds(backoff);
  r.get("max_retries", g.config.max_retries);
  r.get("max_in_flight", g.config.max_in_flight);
  r.get("backoff_factor", g.config.backoff_factor);
  r.get("prompt_template", g.config.prompt_template);
  r.get("input_template", g.config.input_template);
  r.get("assets", g.assets);
  if (const json* n = r.sub("normalization")) {
    ObjectReader nr(*n, "config.gateway.normalization");
    nr.get("trim", g.config.normalization.trim);
    nr.get("casefold", g.config.normalization.casefold);
    nr.finish();
  }
  r.finish();
  return g;
}

json write_gateway(const GatewayRun& g) {
  const auto& c = g.config;
  return json{{"endpoint", c.endpoint},
              {"timeout_ms", c.timeout.count()},
              {"backoff_base_ms", c.backoff_base.count()},
              {"max_retries", c.max_retries},
              {"max_in_flight", c.max_in_flight},
              {"backoff_factor", c.backoff_factor},
              {"prompt_template", c.prompt_template},
              {"input_template", c.input_template},
              {"assets", g.assets},
              {"normalization", {{"trim", c.normalization.trim}, {"casefold", c.normalization.casefold}}}};
}

void read_method(const json& j, MethodConfig& m) {
  ObjectReader r(j, "config.method");
  r.get("budget", m.budget);
  r.get("initial_design", m.initial_design);
  r.get("rho", m.rho);
  r.get("b_min", m.b_min);
  r.get("eta", m.eta);
  r.get("min_observations", m.min_observations);
  if (const json* p = r.sub("policies")) {
    ObjectReader pr(*p, "config.method.policies");
    std::string incumbent = to_string(m.policies.incumbent), subset = to_string(m.policies.subset),
                pairing = to_string(m.policies.pairing);
    pr.get("incumbent", incumbent);
    pr.get("subset", subset);
    pr.get("pairing", pairing);
    pr.get("caching", m.policies.caching);
    pr.finish();
    m.policies.incumbent = parse_incumbent_policy(incumbent);
    m.policies.subset = parse_subset_policy(subset);
    m.policies.pairing = parse_pairing_policy(pairing);
  }
  if (const json* f = r.sub("fit")) {
    ObjectReader fr(*f, "config.method.fit");
    fr.get("max_epochs", m.fit.max_epochs);
    fr.get("patience", m.fit.patience);
    fr.get("min_improvement", m.fit.min_improvement);
    fr.get("learning_rate", m.fit.optimizer.learning_rate);
    fr.get("beta1", m.fit.optimizer.beta1);
    fr.get("beta2", m.fit.optimizer.beta2);
    fr.get("epsilon", m.fit.optimizer.epsilon);
    fr.get("weight_decay", m.fit.optimizer.weight_decay);
    fr.get("noise_floor", m.fit.noise_floor);
    fr.get("pca_components", m.fit.pca_components);
    fr.finish();
  }
  r.finish();
}

json write_method(const MethodConfig& m) {
  const auto& f = m.fit;
  return json{{"budget", m.budget},
              {"initial_design", m.initial_design},
              {"rho", m.rho},
              {"b_min", m.b_min},
              {"eta", m.eta},
              {"min_observations", m.min_observations},
              {"policies",
               {{"incumbent", to_string(m.policies.incumbent)},
                {"subset", to_string(m.policies.subset)},
                {"pairing", to_string(m.policies.pairing)},
                {"caching", m.policies.caching}}},
              {"fit",
               {{"max_epochs", f.max_epochs},
                {"patience", f.patience},
                {"min_improvement", f.min_improvement},
                {"learning_rate", f.optimizer.learning_rate},
                {"beta1", f.optimizer.beta1},
                {"beta2", f.optimizer.beta2},
                {"epsilon", f.optimizer.epsilon},
                {"weight_decay", f.optimizer.weight_decay},
                {"noise_floor", f.noise_floor},
                {"pca_components", f.pca_components}}}};
}

}  // namespace

void RunConfig::validate() const {
  const int sources = int(scenario.has_value()) + int(synthetic.has_value());
  if (sources != 1) throw ConfigError("exactly one of 'scenario' and 'synthetic' must be given");
  if (gateway && !scenario) throw ConfigError("a gateway run needs 'scenario' for the embeddings");
  if (gateway) {
    try {
      gateway->config.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("gateway: ") + e.what());
    }
    if (gateway->assets.empty()) throw ConfigError("gateway.assets must name a directory");
  }
  if (methods.empty()) throw ConfigError("'methods' must not be empty");
  if (repetitions < 1) throw ConfigError("seeds.repetitions must be positive");
  if (jobs < 1) throw ConfigError("jobs must be positive");
  if (output.empty()) throw ConfigError("output must not be empty");
  if (grid.points < 1 || !(grid.lo > 0.0) || grid.lo > grid.hi || grid.hi > 1.0) {
    throw ConfigError("grid must satisfy points >= 1 and 0 < lo <= hi <= 1");
  }
  if (!(method.budget > 0.0)) throw ConfigError("method.budget must be positive");
  if (method.rho < 0.0 || method.rho > 1.0) throw ConfigError("method.rho must lie in [0, 1]");
  if (method.b_min < 1) throw ConfigError("method.b_min must be positive");
  if (!(method.eta > 1.0)) throw ConfigError("method.eta must exceed 1");
  if (method.fit.max_epochs < 1 || method.fit.patience < 1) {
    throw ConfigError("method.fit epochs and patience must be positive");
  }
}

RunConfig parse_run_config(const std::string& text) {
  const json j = parse_text(text);
  RunConfig c;
  ObjectReader r(j, "");
  if (const json* s = r.sub("scenario")) {
    if (!s->is_string()) throw ConfigError("config.scenario must be a path string");
    c.scenario = s->get<std::string>();
  }
  if (const json* s = r.sub("synthetic")) c.synthetic = read_synthetic(*s, "config.synthetic");
  if (const json* g = r.sub("gateway")) c.gateway = read_gateway(*g);
  std::vector<std::string> methods;
  if (r.sub("methods")) {
    r.get("methods", methods);
    c.methods.clear();
    for (const auto& m : methods) c.methods.push_back(parse_method(m));
  }
  if (const json* s = r.sub("seeds")) {
    ObjectReader sr(*s, "config.seeds");
    sr.get("base", c.base_seed);
    sr.get("repetitions", c.repetitions);
    sr.finish();
  }
  if (const json* m = r.sub("method")) read_method(*m, c.method);
  r.get("output", c.output);
  r.get("jobs", c.jobs);
  if (const json* g = r.sub("grid")) {
    ObjectReader gr(*g, "config.grid");
    gr.get("points", c.grid.points);
    gr.get("lo", c.grid.lo);
    gr.get("hi", c.grid.hi);
    gr.finish();
  }
  r.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string serialize_run_config(const RunConfig& c) {
  json j;
  j["scenario"] = c.scenario ? json(*c.scenario) : json(nullptr);
  j["synthetic"] = c.synthetic ? write_synthetic(*c.synthetic) : json(nullptr);
  j["gateway"] = c.gateway ? write_gateway(*c.gateway) : json(nullptr);
  json methods = json::array();
  for (MethodKind m : c.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["seeds"] = {{"base", c.base_seed}, {"repetitions", c.repetitions}};
  j["method"] = write_method(c.method);
  j["output"] = c.output;
  j["jobs"] = c.jobs;
  j["grid"] = {{"points", c.grid.points}, {"lo", c.grid.lo}, {"hi", c.grid.hi}};
  return j.dump(2) + "\n";
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
  return read_synthetic(parse_text(text), "spec");
}

std::string serialize_synthetic_spec(const SyntheticSpec& spec) { return write_synthetic(spec).dump(2) + "\n"; }

}  // namespace promptband
