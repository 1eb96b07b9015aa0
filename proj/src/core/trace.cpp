#include "promptband/core/trace.hpp"

#include "promptband/core/csv.hpp"

#include <ostream>

namespace promptband {

void write_trace_csv(std::ostream& os, const RunTrace& trace) {
  os << "method,scenario,seed,calls_used,incumbent_prompt_id,incumbent_valid_error,"
        "incumbent_fidelity\n";
  for (const auto& e : trace.events) {
    os << trace.method << ',' << trace.scenario << ',' << trace.seed << ',' << e.calls_used << ','
       << e.incumbent_prompt_id << ',' << csv::format(e.incumbent_valid_error) << ','
       << e.incumbent_fidelity << '\n';
  }
}

}  // namespace promptband
