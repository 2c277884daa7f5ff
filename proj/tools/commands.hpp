#pragma once

#include "mcar/config.hpp"
#include "mcar/diagnostics.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mcar::cli {

enum ExitCode { ok = 0, failure = 1, validation_error = 2, numerical_failure = 3 };

// Parses argv-style arguments (without the program name) and runs the
// subcommand. Errors are reported on `err` and mapped to exit codes.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

struct GraphOptions {
  std::string spatial, response;
  JointVariant variant = JointVariant::full;
  std::string out_dir; // empty: report only
};
void cmd_graph(const GraphOptions &o, std::ostream &out);

struct RunOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> chains;
  std::optional<std::string> out_dir;
  std::optional<int> model;
  std::optional<std::string> variant;
  std::optional<std::string> data, spatial, response;
  std::optional<long> iterations, burn_in;
  std::string resume;
};
// Loads the configuration file (if any) and applies command-line overrides.
RunConfig resolve_run_config(const RunOptions &o);

void cmd_simulate(const RunOptions &o, std::ostream &out);
void cmd_fit(const RunOptions &o, std::ostream &out);
std::vector<DICReport> cmd_compare(const std::vector<std::string> &files, std::ostream &out);
void cmd_summarize(const std::vector<std::string> &samples, const std::string &out_dir, std::ostream &out);

// Spatial and response graphs implied by a joint variant: spatial-only drops
// the response edges, response-only drops the spatial edges. The precision
// models need the interaction terms, so no-interaction is rejected.
ModelGraphs model_graphs_for_variant(AdjacencyGraph spatial, AdjacencyGraph response, JointVariant v);

int connected_components(const AdjacencyGraph &g);

} // namespace mcar::cli
