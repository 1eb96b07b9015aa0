#include "promptband/core/scenario_files.hpp"

#include "promptband/core/csv.hpp"
#include "promptband/core/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <string>

namespace promptband {

namespace fs = std::filesystem;

namespace {

fs::path require(const fs::path& dir, const char* name) {
  fs::path p = dir / name;
  if (!fs::exists(p)) throw ValidationError("missing scenario file " + p.string());
  return p;
}

std::vector<Component> read_components(const fs::path& path, const char* id_column) {
  auto table = csv::read(path);
  const std::size_t id_col = table.column(id_column);
  std::vector<std::size_t> emb_cols;
  for (int k = 0;; ++k) {
    const std::string name = "e" + std::to_string(k);
    auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) break;
    emb_cols.push_back(static_cast<std::size_t>(it - table.header.begin()));
  }
  if (emb_cols.empty()) throw DimensionError(path.string() + " has no embedding columns e0..");
  if (emb_cols.size() + 1 != table.header.size()) {
    throw ValidationError(path.string() + " has unexpected columns");
  }
  std::vector<Component> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    Component c;
    c.id = static_cast<int>(csv::to_long(row[id_col]));
    c.embedding.resize(static_cast<Eigen::Index>(emb_cols.size()));
    for (std::size_t k = 0; k < emb_cols.size(); ++k) {
      c.embedding(static_cast<Eigen::Index>(k)) = csv::to_double(row[emb_cols[k]]);
    }
    out.push_back(std::move(c));
  }
  return out;
}

Eigen::MatrixXd read_losses(const fs::path& path, std::size_t n_prompts, int n_instances) {
  auto table = csv::read(path);
  const auto pc = table.column("prompt_id");
  const auto ic = table.column("instance_id");
  const auto lc = table.column("loss");
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n_prompts), n_instances,
                                                std::numeric_limits<double>::quiet_NaN());
  for (const auto& row : table.rows) {
    const long p = csv::to_long(row[pc]);
    const long i = csv::to_long(row[ic]);
    const double l = csv::to_double(row[lc]);
    if (p < 0 || p >= static_cast<long>(n_prompts) || i < 0 || i >= n_instances) {
      throw RangeError(path.string() + ": (prompt " + std::to_string(p) + ", instance " +
                       std::to_string(i) + ") out of range");
    }
    if (!(l >= 0.0 && l <= 1.0)) throw ValidationError(path.string() + ": loss outside [0, 1]");
    if (!std::isnan(m(p, i))) {
      throw ValidationError(path.string() + ": duplicate entry for prompt " + std::to_string(p) +
                            ", instance " + std::to_string(i));
    }
    m(p, i) = l;
  }
  if (m.hasNaN()) throw ValidationError(path.string() + " does not cover every (prompt, instance)");
  return m;
}

void write_components(const fs::path& path, const char* id_column,
                      const std::vector<Component>& items, int dim) {
  std::ofstream out(path, std::ios::binary);
  out << id_column;
  for (int k = 0; k < dim; ++k) out << ",e" << k;
  out << '\n';
  for (const auto& c : items) {
    out << c.id;
    for (Eigen::Index k = 0; k < c.embedding.size(); ++k) out << ',' << csv::format(c.embedding(k));
    out << '\n';
  }
}

void write_losses(const fs::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  out << "prompt_id,instance_id,loss\n";
  for (Eigen::Index p = 0; p < m.rows(); ++p) {
    for (Eigen::Index i = 0; i < m.cols(); ++i) {
      out << p << ',' << i << ',' << csv::format(m(p, i)) << '\n';
    }
  }
}

}  // namespace

PromptSpace read_prompt_space(const fs::path& dir) {
  return build_prompt_space(read_components(require(dir, "instructions.csv"), "instruction_id"),
                            read_components(require(dir, "exemplars.csv"), "exemplar_id"));
}

ScenarioFiles read_scenario_files(const fs::path& dir) {
  ScenarioFiles files;
  {
    std::ifstream in(require(dir, "manifest.json"));
    nlohmann::json j;
    try {
      in >> j;
      files.manifest.name = j.at("name").get<std::string>();
      files.manifest.n_valid = j.at("n_valid").get<int>();
      files.manifest.n_test = j.at("n_test").get<int>();
      files.manifest.embedding_dim = j.at("embedding_dim").get<int>();
      files.manifest.loss_kind = j.value("loss_kind", std::string("exact_match"));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError((dir / "manifest.json").string() + ": " + e.what());
    }
  }
  files.space = read_prompt_space(dir);
  if (files.space.embedding_dim() != files.manifest.embedding_dim) {
    throw DimensionError("manifest embedding_dim " + std::to_string(files.manifest.embedding_dim) +
                         " does not match embeddings (" +
                         std::to_string(files.space.embedding_dim()) + ")");
  }

  auto prompts = csv::read(require(dir, "prompts.csv"));
  if (prompts.rows.size() != files.space.size()) {
    throw ValidationError("prompts.csv lists " + std::to_string(prompts.rows.size()) +
                          " prompts, expected |I|*|E| = " + std::to_string(files.space.size()));
  }
  const auto pc = prompts.column("prompt_id");
  const auto ic = prompts.column("instruction_id");
  const auto ec = prompts.column("exemplar_id");
  for (const auto& row : prompts.rows) {
    const auto& p = files.space.prompt(static_cast<PromptId>(csv::to_long(row[pc])));
    if (p.instruction_id != csv::to_long(row[ic]) || p.exemplar_id != csv::to_long(row[ec])) {
      throw ValidationError("prompts.csv row for prompt " + row[pc] +
                            " disagrees with the (instruction_id, exemplar_id) ordering");
    }
  }

  files.valid_losses = read_losses(require(dir, "valid_losses.csv"), files.space.size(),
                                   files.manifest.n_valid);
  files.test_losses = read_losses(require(dir, "test_losses.csv"), files.space.size(),
                                  files.manifest.n_test);
  return files;
}

void write_scenario_files(const fs::path& dir, const ScenarioFiles& files) {
  fs::create_directories(dir);
  const int d = files.space.embedding_dim();
  write_components(dir / "instructions.csv", "instruction_id", files.space.instructions(), d);
  write_components(dir / "exemplars.csv", "exemplar_id", files.space.exemplars(), d);
  {
    std::ofstream out(dir / "prompts.csv", std::ios::binary);
    out << "prompt_id,instruction_id,exemplar_id\n";
    for (const auto& p : files.space.prompts()) {
      out << p.prompt_id << ',' << p.instruction_id << ',' << p.exemplar_id << '\n';
    }
  }
  write_losses(dir / "valid_losses.csv", files.valid_losses);
  write_losses(dir / "test_losses.csv", files.test_losses);
  nlohmann::ordered_json j;
  j["name"] = files.manifest.name;
  j["n_valid"] = files.manifest.n_valid;
  j["n_test"] = files.manifest.n_test;
  j["embedding_dim"] = files.manifest.embedding_dim;
  j["loss_kind"] = files.manifest.loss_kind;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << j.dump(2) << '\n';
}

}  // namespace promptband
