#pragma once

#include "promptband/methods/methods.hpp"
#include "promptband/oracle/gateway.hpp"
#include "promptband/oracle/synthetic.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace promptband {

/// Remote-oracle run: embeddings come from `scenario`, texts and labeled
/// validation instances from `assets` (instructions.json, exemplars.json,
/// instances.json).
struct GatewayRun {
  GatewayConfig config;
  std::string assets;
};

struct GridSpec {
  int points = 50;
  double lo = 0.04;
  double hi = 1.0;

  bool operator==(const GridSpec&) const = default;
};

struct RunConfig {
  std::optional<std::string> scenario;      // directory with the CSV contract
  std::optional<SyntheticSpec> synthetic;   // generated in memory instead
  std::optional<GatewayRun> gateway;        // requires scenario for embeddings
  std::vector<MethodKind> methods{MethodKind::RandomSearch, MethodKind::HbBoPs};
  std::uint64_t base_seed = 0;
  int repetitions = 1;
  MethodConfig method;  // kind and seed are set per run
  std::string output = "results";
  int jobs = 1;
  GridSpec grid;

  void validate() const;
};

/// Parses a configuration; unknown keys at any level raise ConfigError.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
/// Every field written explicitly, so parse(serialize(c)) reproduces c.
std::string serialize_run_config(const RunConfig& config);

SyntheticSpec parse_synthetic_spec(const std::string& json_text);
std::string serialize_synthetic_spec(const SyntheticSpec& spec);

}  // namespace promptband
