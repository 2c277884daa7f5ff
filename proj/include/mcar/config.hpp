#pragma once

#include "mcar/data.hpp"
#include "mcar/fit.hpp"
#include "mcar/graph.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mcar {

// Value of the TOML subset used for run configuration: booleans, numbers,
// strings and (nested) arrays.
struct ConfigValue {
  enum class Kind { boolean, number, string, array };
  Kind kind = Kind::number;
  bool boolean = false;
  double number = 0.0;
  std::string text;
  std::vector<ConfigValue> items;
  int line = 0;
};

using ConfigSection = std::map<std::string, ConfigValue>;
using ConfigTable = std::map<std::string, ConfigSection>; // "" holds top-level keys

// Throws ParseError with the offending line.
ConfigTable parse_config(std::istream &in);

// Typed accessors; throw ValidationError naming section.key on type errors.
double get_number(const ConfigSection &s, const std::string &section, const std::string &key, double fallback);
long get_integer(const ConfigSection &s, const std::string &section, const std::string &key, long fallback);
bool get_bool(const ConfigSection &s, const std::string &section, const std::string &key, bool fallback);
std::string get_string(const ConfigSection &s, const std::string &section, const std::string &key,
                       const std::string &fallback);
std::optional<Vector> get_vector(const ConfigSection &s, const std::string &section, const std::string &key);
std::optional<Matrix> get_matrix(const ConfigSection &s, const std::string &section, const std::string &key);

// FNV-1a over the raw configuration text.
std::uint64_t config_hash(const std::string &text);
std::string hash_hex(std::uint64_t h);

// Graph from a file path or a generator spec: "grid:RxC", "path:N",
// "cycle:N", "complete:N", "empty:N".
AdjacencyGraph load_graph(const std::string &spec);

// Model hyperparameters from the keys of a section (delta, lambda, psi, phi
// for model 1; rho, omega for model 2; omega_r, omega_s, z for model 3).
// Missing keys take the defaults of default_hyper; returns nullopt when the
// section sets none of them. psi / phi are J x J matrices or edge lists in
// response.edges() order.
std::optional<ModelParams> params_from_section(int model, const ConfigSection &s, const std::string &section,
                                               const ModelGraphs &g);

struct RunConfig {
  std::string text; // raw file contents, hashed for provenance
  std::string base_dir;

  // [model]
  int model = 2;
  JointVariant variant = JointVariant::full;
  bool fix_hyper = false;
  ConfigSection model_section;

  // [priors], [mcmc]
  PriorSettings priors;
  long iterations = 1000;
  long burn_in = 500;
  long thin = 1;
  int gwishart_sweeps = 1;
  std::uint64_t seed = 1;
  int chains = 1;

  // [io]
  std::string data, spatial, response, out_dir = ".";

  // [truth] (simulate)
  ConfigSection truth;

  std::uint64_t hash() const { return config_hash(text); }
  // Resolves relative paths against the configuration file's directory.
  std::string resolve(const std::string &path) const;
  FitConfig fit_config(const ModelGraphs &g) const;
};

RunConfig read_run_config(std::istream &in, const std::string &base_dir = "");
RunConfig read_run_config_file(const std::string &path);

} // namespace mcar
