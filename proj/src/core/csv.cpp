#include "promptband/core/csv.hpp"

#include "promptband/core/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace promptband::csv {

std::size_t Table::column(std::string_view name) const {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return k;
  }
  throw ValidationError("missing column '" + std::string(name) + "'");
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    std::string_view field = line.substr(start, pos == std::string_view::npos ? pos : pos - start);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    out.emplace_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  Table table;
  std::string line;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (first && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) {
      line.erase(0, 3);  // UTF-8 BOM
    }
    if (line.empty() || line == "\r") continue;
    auto fields = split(line);
    if (first) {
      table.header = std::move(fields);
      first = false;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(table.header.size()) + " fields, got " +
                            std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (first) throw ValidationError(path.string() + " is empty");
  return table;
}

double to_double(std::string_view field) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ValidationError("not a number: '" + std::string(field) + "'");
  }
  return value;
}

long to_long(std::string_view field) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ValidationError("not an integer: '" + std::string(field) + "'");
  }
  return value;
}

std::string format(double value) {
  if (std::isnan(value)) return "NA";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

}  // namespace promptband::csv
