#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace promptband::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws ValidationError when absent.
  std::size_t column(std::string_view name) const;
};

/// Reads a comma-separated file with a header row. Quoting is not supported;
/// the scenario contract only carries numeric fields.
Table read(const std::filesystem::path& path);

std::vector<std::string> split(std::string_view line);

double to_double(std::string_view field);
long to_long(std::string_view field);

/// Shortest decimal representation that round-trips.
std::string format(double value);

}  // namespace promptband::csv
