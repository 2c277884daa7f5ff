#include "mcar/config.hpp"

#include "mcar/error.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>

namespace mcar {

namespace {

std::string trim(const std::string &s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a])))
    ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])))
    --b;
  return s.substr(a, b - a);
}

// Strips a trailing comment that is not inside a string.
std::string strip_comment(const std::string &s) {
  bool in_string = false;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] == '"' && (k == 0 || s[k - 1] != '\\'))
      in_string = !in_string;
    else if (s[k] == '#' && !in_string)
      return s.substr(0, k);
  }
  return s;
}

int bracket_balance(const std::string &s) {
  int depth = 0;
  bool in_string = false;
  for (char c : s) {
    if (c == '"')
      in_string = !in_string;
    else if (!in_string && c == '[')
      ++depth;
    else if (!in_string && c == ']')
      --depth;
  }
  return depth;
}

class ValueParser {
public:
  ValueParser(const std::string &text, int line) : s_(text), line_(line) {}

  ConfigValue parse() {
    ConfigValue v = value();
    skip_ws();
    if (pos_ != s_.size())
      fail("trailing characters after value");
    return v;
  }

private:
  [[noreturn]] void fail(const std::string &what) const { throw ParseError("config: " + what, line_); }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
      ++pos_;
  }

  ConfigValue value() {
    skip_ws();
    if (pos_ >= s_.size())
      fail("missing value");
    ConfigValue v;
    v.line = line_;
    const char c = s_[pos_];
    if (c == '[') {
      v.kind = ConfigValue::Kind::array;
      ++pos_;
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return v;
      }
      while (true) {
        v.items.push_back(value());
        skip_ws();
        if (pos_ >= s_.size())
          fail("unterminated array");
        if (s_[pos_] == ',') {
          ++pos_;
          skip_ws();
          if (pos_ < s_.size() && s_[pos_] == ']') {
            ++pos_;
            return v;
          }
          continue;
        }
        if (s_[pos_] == ']') {
          ++pos_;
          return v;
        }
        fail("expected ',' or ']' in array");
      }
    }
    if (c == '"') {
      v.kind = ConfigValue::Kind::string;
      ++pos_;
      while (pos_ < s_.size() && s_[pos_] != '"') {
        if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) {
          ++pos_;
          const char e = s_[pos_];
          v.text += e == 'n' ? '\n' : e == 't' ? '\t' : e;
        } else {
          v.text += s_[pos_];
        }
        ++pos_;
      }
      if (pos_ >= s_.size())
        fail("unterminated string");
      ++pos_;
      return v;
    }
    std::size_t end = pos_;
    while (end < s_.size() && s_[end] != ',' && s_[end] != ']' && !std::isspace(static_cast<unsigned char>(s_[end])))
      ++end;
    const std::string token = s_.substr(pos_, end - pos_);
    pos_ = end;
    if (token == "true" || token == "false") {
      v.kind = ConfigValue::Kind::boolean;
      v.boolean = token == "true";
      return v;
    }
    std::string digits;
    for (char d : token)
      if (d != '_')
        digits += d;
    char *stop = nullptr;
    v.number = std::strtod(digits.c_str(), &stop);
    if (digits.empty() || *stop != '\0')
      fail("cannot parse value '" + token + "'");
    v.kind = ConfigValue::Kind::number;
    return v;
  }

  const std::string &s_;
  std::size_t pos_ = 0;
  int line_;
};

const ConfigValue *find(const ConfigSection &s, const std::string &key) {
  auto it = s.find(key);
  return it == s.end() ? nullptr : &it->second;
}

[[noreturn]] void type_error(const std::string &section, const std::string &key, const char *want) {
  throw ValidationError("config: [" + section + "] " + key + " must be " + want);
}

Vector number_list(const ConfigValue &v, const std::string &section, const std::string &key) {
  if (v.kind == ConfigValue::Kind::number)
    return Vector::Constant(1, v.number);
  if (v.kind != ConfigValue::Kind::array)
    type_error(section, key, "a number array");
  Vector out(static_cast<long>(v.items.size()));
  for (std::size_t k = 0; k < v.items.size(); ++k) {
    if (v.items[k].kind != ConfigValue::Kind::number)
      type_error(section, key, "a number array");
    out[static_cast<long>(k)] = v.items[k].number;
  }
  return out;
}

} // namespace

ConfigTable parse_config(std::istream &in) {
  ConfigTable table;
  table[""];
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = trim(strip_comment(line));
    if (body.empty())
      continue;
    if (body.front() == '[' && body.find('=') == std::string::npos) {
      if (body.back() != ']' || body.size() < 3)
        throw ParseError("config: malformed section header", line_no);
      section = trim(body.substr(1, body.size() - 2));
      if (section.empty())
        throw ParseError("config: empty section name", line_no);
      table[section];
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ParseError("config: expected 'key = value'", line_no);
    const std::string key = trim(body.substr(0, eq));
    if (key.empty())
      throw ParseError("config: missing key", line_no);
    std::string value = trim(body.substr(eq + 1));
    const int start = line_no;
    // Arrays may continue over several lines.
    while (bracket_balance(value) > 0) {
      if (!std::getline(in, line))
        throw ParseError("config: unterminated array", start);
      ++line_no;
      value += " " + trim(strip_comment(line));
    }
    auto &sec = table[section];
    if (sec.count(key))
      throw ParseError("config: duplicate key '" + key + "'", start);
    sec[key] = ValueParser(value, start).parse();
  }
  return table;
}

double get_number(const ConfigSection &s, const std::string &section, const std::string &key, double fallback) {
  const auto *v = find(s, key);
  if (!v)
    return fallback;
  if (v->kind != ConfigValue::Kind::number)
    type_error(section, key, "a number");
  return v->number;
}

long get_integer(const ConfigSection &s, const std::string &section, const std::string &key, long fallback) {
  const auto *v = find(s, key);
  if (!v)
    return fallback;
  if (v->kind != ConfigValue::Kind::number || v->number != std::floor(v->number) || std::abs(v->number) > 9e15)
    type_error(section, key, "an integer");
  return static_cast<long>(v->number);
}

bool get_bool(const ConfigSection &s, const std::string &section, const std::string &key, bool fallback) {
  const auto *v = find(s, key);
  if (!v)
    return fallback;
  if (v->kind != ConfigValue::Kind::boolean)
    type_error(section, key, "true or false");
  return v->boolean;
}

std::string get_string(const ConfigSection &s, const std::string &section, const std::string &key,
                       const std::string &fallback) {
  const auto *v = find(s, key);
  if (!v)
    return fallback;
  if (v->kind != ConfigValue::Kind::string)
    type_error(section, key, "a string");
  return v->text;
}

std::optional<Vector> get_vector(const ConfigSection &s, const std::string &section, const std::string &key) {
  const auto *v = find(s, key);
  if (!v)
    return std::nullopt;
  return number_list(*v, section, key);
}

std::optional<Matrix> get_matrix(const ConfigSection &s, const std::string &section, const std::string &key) {
  const auto *v = find(s, key);
  if (!v)
    return std::nullopt;
  if (v->kind == ConfigValue::Kind::number)
    return Matrix::Constant(1, 1, v->number);
  if (v->kind != ConfigValue::Kind::array || v->items.empty())
    type_error(section, key, "a nested number array");
  const auto rows = static_cast<long>(v->items.size());
  long cols = -1;
  Matrix m;
  for (long r = 0; r < rows; ++r) {
    const Vector row = number_list(v->items[static_cast<std::size_t>(r)], section, key);
    if (cols < 0) {
      cols = row.size();
      m.resize(rows, cols);
    } else if (row.size() != cols) {
      type_error(section, key, "a rectangular nested array");
    }
    m.row(r) = row.transpose();
  }
  return m;
}

std::uint64_t config_hash(const std::string &text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

AdjacencyGraph load_graph(const std::string &spec) {
  const auto colon = spec.find(':');
  if (colon != std::string::npos) {
    const std::string kind = spec.substr(0, colon);
    const std::string arg = spec.substr(colon + 1);
    auto to_int = [&](const std::string &t) {
      std::size_t used = 0;
      int n = 0;
      try {
        n = std::stoi(t, &used);
      } catch (const std::exception &) {
        used = 0;
      }
      if (used != t.size() || t.empty() || n < 1)
        throw ValidationError("graph spec '" + spec + "': expected a positive integer");
      return n;
    };
    if (kind == "grid") {
      const auto x = arg.find('x');
      if (x == std::string::npos)
        throw ValidationError("graph spec '" + spec + "': expected grid:RxC");
      return grid_graph(to_int(arg.substr(0, x)), to_int(arg.substr(x + 1)));
    }
    if (kind == "path")
      return path_graph(to_int(arg));
    if (kind == "cycle")
      return cycle_graph(to_int(arg));
    if (kind == "complete")
      return complete_graph(to_int(arg));
    if (kind == "empty")
      return empty_graph(to_int(arg));
  }
  return read_adjacency_file(spec);
}

std::optional<ModelParams> params_from_section(int model, const ConfigSection &s, const std::string &section,
                                               const ModelGraphs &g) {
  ModelParams p = default_hyper(model, g);
  bool any = false;
  const int J = g.n_responses();
  auto check_size = [&](const std::string &key, long got, long want) {
    if (got != want)
      throw DimensionMismatch("config: [" + section + "] " + key + " has " + std::to_string(got) +
                              " entries, expected " + std::to_string(want));
  };
  auto square = [&](const std::string &key, int n) -> std::optional<Matrix> {
    auto m = get_matrix(s, section, key);
    if (m) {
      check_size(key + " rows", m->rows(), n);
      check_size(key + " columns", m->cols(), n);
      any = true;
    }
    return m;
  };
  if (model == 1) {
    auto &q = std::get<Model1Params>(p);
    const auto edges = g.response.edges();
    if (auto v = get_vector(s, section, "delta")) {
      if (v->size() == 1 && J > 1)
        v = Vector::Constant(J, (*v)[0]);
      check_size("delta", v->size(), J);
      q.delta = *v;
      any = true;
    }
    if (auto v = get_vector(s, section, "lambda")) {
      if (v->size() == 1 && J > 1)
        v = Vector::Constant(J, (*v)[0]);
      check_size("lambda", v->size(), J);
      q.lambda = *v;
      any = true;
    }
    for (const char *key : {"psi", "phi"}) {
      auto &target = std::string(key) == "psi" ? q.psi : q.phi;
      const auto *raw = find(s, key);
      if (!raw)
        continue;
      any = true;
      const bool nested = raw->kind == ConfigValue::Kind::array && !raw->items.empty() &&
                          raw->items.front().kind == ConfigValue::Kind::array;
      if (nested) {
        const Matrix m = *square(key, J);
        for (int a = 0; a < J; ++a)
          for (int b = 0; b < J; ++b)
            if (a != b && !g.response.has_edge(a, b) && m(a, b) != 0.0)
              throw ValidationError(std::string("config: [") + section + "] " + key +
                                    " is nonzero off the response graph");
        for (std::size_t e = 0; e < edges.size(); ++e)
          target[e] = m(edges[e].first, edges[e].second);
      } else {
        Vector v = number_list(*raw, section, key);
        if (v.size() == 1 && edges.size() > 1)
          v = Vector::Constant(static_cast<long>(edges.size()), v[0]);
        check_size(key, v.size(), static_cast<long>(edges.size()));
        for (std::size_t e = 0; e < edges.size(); ++e)
          target[e] = v[static_cast<long>(e)];
      }
    }
  } else if (model == 2) {
    auto &q = std::get<Model2Params>(p);
    if (find(s, "rho")) {
      q.rho = get_number(s, section, "rho", 0.0);
      any = true;
    }
    if (auto m = square("omega", J))
      q.omega = *m;
  } else {
    auto &q = std::get<Model3Params>(p);
    if (find(s, "z")) {
      q.z = get_number(s, section, "z", 1.0);
      any = true;
    }
    if (auto m = square("omega_r", J))
      q.omega_r = *m;
    if (auto m = square("omega_s", g.n_units()))
      q.omega_s = *m;
  }
  if (!any)
    return std::nullopt;
  return p;
}

std::string RunConfig::resolve(const std::string &path) const {
  if (path.empty() || base_dir.empty() || path.find(':') != std::string::npos)
    return path;
  const std::filesystem::path p(path);
  if (p.is_absolute())
    return path;
  return (std::filesystem::path(base_dir) / p).string();
}

FitConfig RunConfig::fit_config(const ModelGraphs &g) const {
  FitConfig f;
  f.model = model;
  f.iterations = iterations;
  f.burn_in = burn_in;
  f.thin = thin;
  f.gwishart_sweeps = gwishart_sweeps;
  f.seed = seed;
  f.priors = priors;
  f.fix_hyper = fix_hyper;
  f.initial = params_from_section(model, model_section, "model", g);
  if (priors.a.size() == 1 && g.n_responses() > 1)
    f.priors.a = Vector::Constant(g.n_responses(), priors.a[0]);
  if (priors.b.size() == 1 && g.n_responses() > 1)
    f.priors.b = Vector::Constant(g.n_responses(), priors.b[0]);
  f.validate(g);
  return f;
}

RunConfig read_run_config(std::istream &in, const std::string &base_dir) {
  RunConfig c;
  c.text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  c.base_dir = base_dir;
  std::istringstream text(c.text);
  ConfigTable t = parse_config(text);
  for (const auto &[name, sec] : t)
    if (name != "" && name != "model" && name != "priors" && name != "mcmc" && name != "io" && name != "truth")
      throw ValidationError("config: unknown section [" + name + "]");
  if (!t[""].empty())
    throw ValidationError("config: keys must appear inside a section");

  const auto &m = t["model"];
  c.model = static_cast<int>(get_integer(m, "model", "id", 2));
  if (c.model < 1 || c.model > 3)
    throw ValidationError("config: [model] id must be 1, 2 or 3");
  c.variant = parse_variant(get_string(m, "model", "variant", "full"));
  c.fix_hyper = get_bool(m, "model", "fix_hyper", false);
  c.model_section = m;

  const auto &p = t["priors"];
  c.priors.tau0_sq = get_number(p, "priors", "tau0_sq", c.priors.tau0_sq);
  if (auto v = get_vector(p, "priors", "a"))
    c.priors.a = *v;
  if (auto v = get_vector(p, "priors", "b"))
    c.priors.b = *v;
  c.priors.gw_b = get_number(p, "priors", "gw_b", c.priors.gw_b);
  if (auto v = get_matrix(p, "priors", "gw_scale"))
    c.priors.gw_scale = *v;
  c.priors.gw_b_spatial = get_number(p, "priors", "gw_b_spatial", c.priors.gw_b_spatial);
  if (auto v = get_matrix(p, "priors", "gw_scale_spatial"))
    c.priors.gw_scale_spatial = *v;

  const auto &mc = t["mcmc"];
  c.iterations = get_integer(mc, "mcmc", "iterations", c.iterations);
  c.burn_in = get_integer(mc, "mcmc", "burn_in", std::min(c.burn_in, c.iterations / 2));
  c.thin = get_integer(mc, "mcmc", "thin", c.thin);
  c.gwishart_sweeps = static_cast<int>(get_integer(mc, "mcmc", "gwishart_sweeps", c.gwishart_sweeps));
  const long seed = get_integer(mc, "mcmc", "seed", 1);
  if (seed < 0)
    throw ValidationError("config: [mcmc] seed must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.chains = static_cast<int>(get_integer(mc, "mcmc", "chains", 1));
  if (c.chains < 1)
    throw ValidationError("config: [mcmc] chains must be >= 1");

  const auto &io = t["io"];
  c.data = get_string(io, "io", "data", "");
  c.spatial = get_string(io, "io", "spatial", "");
  c.response = get_string(io, "io", "response", "");
  c.out_dir = get_string(io, "io", "out_dir", ".");

  c.truth = t["truth"];
  return c;
}

RunConfig read_run_config_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot open config file '" + path + "'");
  return read_run_config(in, std::filesystem::path(path).parent_path().string());
}

} // namespace mcar
