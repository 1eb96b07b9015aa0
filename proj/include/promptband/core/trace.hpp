#pragma once

#include "promptband/core/prompt_space.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace promptband {

struct TraceEvent {
  long calls_used = 0;
  PromptId incumbent_prompt_id = 0;
  double incumbent_valid_error = 0.0;
  int incumbent_fidelity = 0;

  bool operator==(const TraceEvent&) const = default;
};

/// Incumbent trajectory of one method run, keyed by cumulative oracle calls.
struct RunTrace {
  std::string method;
  std::string scenario;
  std::uint64_t seed = 0;
  long budget_calls = 0;
  std::vector<TraceEvent> events;
  std::vector<std::string> warnings;

  bool operator==(const RunTrace&) const = default;
};

void write_trace_csv(std::ostream& os, const RunTrace& trace);

}  // namespace promptband
