#include "commands.hpp"

#include "mcar/error.hpp"
#include "mcar/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace mcar::cli {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path &path) {
  std::ofstream f(path);
  if (!f)
    throw std::runtime_error("cannot write '" + path.string() + "'");
  return f;
}

std::string provenance(const RunConfig &c) {
  return "# config_hash=" + hash_hex(c.hash()) + " seed=" + std::to_string(c.seed) + "\n";
}

std::string graph_source(const std::string &spec, const std::string &what) {
  if (spec.empty())
    throw ValidationError("no " + what + " graph given (use --" + what + " or [io] " + what + ")");
  return spec;
}

// Chain c's state and draws.
struct ChainRun {
  ChainState state;
  PosteriorSamples samples;
};

PosteriorSamples pool(const std::vector<ChainRun> &runs) {
  PosteriorSamples all = runs.front().samples;
  for (std::size_t c = 1; c < runs.size(); ++c) {
    const auto &s = runs[c].samples;
    all.iteration.insert(all.iteration.end(), s.iteration.begin(), s.iteration.end());
    all.deviance.insert(all.deviance.end(), s.deviance.begin(), s.deviance.end());
    all.gamma.insert(all.gamma.end(), s.gamma.begin(), s.gamma.end());
    all.beta.insert(all.beta.end(), s.beta.begin(), s.beta.end());
    all.hyper.insert(all.hyper.end(), s.hyper.begin(), s.hyper.end());
  }
  return all;
}

} // namespace

int connected_components(const AdjacencyGraph &g) {
  std::vector<int> seen(static_cast<std::size_t>(g.n_vertices()), 0);
  int count = 0;
  for (int s = 0; s < g.n_vertices(); ++s) {
    if (seen[s])
      continue;
    ++count;
    std::vector<int> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : g.neighbors(v))
        if (!seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
    }
  }
  return count;
}

ModelGraphs model_graphs_for_variant(AdjacencyGraph spatial, AdjacencyGraph response, JointVariant v) {
  switch (v) {
  case JointVariant::full:
    break;
  case JointVariant::spatial_only:
    response = empty_graph(response.n_vertices());
    break;
  case JointVariant::response_only:
    spatial = empty_graph(spatial.n_vertices());
    break;
  case JointVariant::no_interaction:
    throw ValidationError("variant 'nointeraction' has no precision model; use it with 'mcar graph'");
  }
  return ModelGraphs::make(std::move(spatial), std::move(response));
}

void cmd_graph(const GraphOptions &o, std::ostream &out) {
  const auto spatial = load_graph(graph_source(o.spatial, "spatial"));
  const auto response = load_graph(graph_source(o.response, "response"));
  const auto joint = build_joint_adjacency(spatial, response, o.variant);
  const auto &g = joint.graph;
  out << "variant " << variant_name(o.variant) << "\n"
      << "units " << spatial.n_vertices() << "\n"
      << "responses " << response.n_vertices() << "\n"
      << "vertices " << g.n_vertices() << "\n"
      << "edges " << g.n_edges() << "\n"
      << "nonzeros " << static_cast<long>(g.n_vertices()) + 2 * static_cast<long>(g.n_edges()) << "\n"
      << "density " << std::setprecision(6)
      << (static_cast<double>(g.n_vertices()) + 2.0 * static_cast<double>(g.n_edges())) /
             (static_cast<double>(g.n_vertices()) * g.n_vertices())
      << "\n"
      << "components " << connected_components(g) << "\n";
  if (!o.out_dir.empty()) {
    fs::create_directories(o.out_dir);
    auto f = open_out(fs::path(o.out_dir) / "joint_adjacency.txt");
    write_adjacency(f, g);
  }
}

RunConfig resolve_run_config(const RunOptions &o) {
  RunConfig c = o.config.empty() ? RunConfig{} : read_run_config_file(o.config);
  if (o.seed)
    c.seed = *o.seed;
  if (o.chains) {
    if (*o.chains < 1)
      throw ValidationError("--chains must be >= 1");
    c.chains = *o.chains;
  }
  if (o.out_dir)
    c.out_dir = *o.out_dir;
  else
    c.out_dir = c.resolve(c.out_dir);
  if (o.model) {
    if (*o.model != c.model)
      c.model_section.clear(); // initial values belong to the configured model
    c.model = *o.model;
  }
  if (o.variant)
    c.variant = parse_variant(*o.variant);
  c.data = o.data ? *o.data : c.resolve(c.data);
  c.spatial = o.spatial ? *o.spatial : c.resolve(c.spatial);
  c.response = o.response ? *o.response : c.resolve(c.response);
  if (o.iterations)
    c.iterations = *o.iterations;
  if (o.burn_in)
    c.burn_in = *o.burn_in;
  return c;
}

void cmd_simulate(const RunOptions &o, std::ostream &out) {
  const RunConfig c = resolve_run_config(o);
  const auto &t = c.truth;
  std::string spatial_spec = c.spatial;
  if (auto grid = get_vector(t, "truth", "grid")) {
    if (grid->size() != 2)
      throw ValidationError("config: [truth] grid must be [rows, cols]");
    spatial_spec = "grid:" + std::to_string(static_cast<int>((*grid)[0])) + "x" +
                   std::to_string(static_cast<int>((*grid)[1]));
  }
  spatial_spec = get_string(t, "truth", "spatial", spatial_spec);
  std::string response_spec = c.response;
  if (t.count("responses"))
    response_spec = "complete:" + std::to_string(get_integer(t, "truth", "responses", 1));
  response_spec = get_string(t, "truth", "response", response_spec);
  const auto spatial = load_graph(graph_source(spatial_spec, "spatial"));
  const auto response = load_graph(graph_source(response_spec, "response"));
  const auto graphs = model_graphs_for_variant(spatial, response, c.variant);
  const int I = graphs.n_units(), J = graphs.n_responses();

  const int model = static_cast<int>(get_integer(t, "truth", "model", c.model));
  if (model < 1 || model > 3)
    throw ValidationError("config: [truth] model must be 1, 2 or 3");
  const ModelParams params = params_from_section(model, t, "truth", graphs).value_or(default_hyper(model, graphs));
  validate_or_throw(params, graphs);

  Vector beta = Vector::Zero(J);
  if (auto b = get_vector(t, "truth", "beta")) {
    if (b->size() == 1)
      beta.setConstant((*b)[0]);
    else if (b->size() == J)
      beta = *b;
    else
      throw DimensionMismatch("config: [truth] beta needs 1 or " + std::to_string(J) + " entries");
  }
  std::vector<Likelihood> tags(static_cast<std::size_t>(J), Likelihood::binomial_logit);
  if (auto it = t.find("likelihood"); it != t.end()) {
    const auto &v = it->second;
    if (v.kind == ConfigValue::Kind::string) {
      std::fill(tags.begin(), tags.end(), parse_likelihood(v.text));
    } else if (v.kind == ConfigValue::Kind::array && v.items.size() == tags.size()) {
      for (std::size_t j = 0; j < tags.size(); ++j) {
        if (v.items[j].kind != ConfigValue::Kind::string)
          throw ValidationError("config: [truth] likelihood entries must be strings");
        tags[j] = parse_likelihood(v.items[j].text);
      }
    } else {
      throw ValidationError("config: [truth] likelihood must be a tag or one tag per response");
    }
  }
  std::vector<double> exposure(static_cast<std::size_t>(I) * J);
  if (auto e = get_vector(t, "truth", "exposure")) {
    if (e->size() == 1)
      std::fill(exposure.begin(), exposure.end(), (*e)[0]);
    else if (e->size() == J)
      for (int j = 0; j < J; ++j)
        std::fill_n(exposure.begin() + static_cast<long>(j) * I, I, (*e)[j]);
    else
      throw DimensionMismatch("config: [truth] exposure needs 1 or " + std::to_string(J) + " entries");
  } else {
    std::fill(exposure.begin(), exposure.end(), 100.0);
  }

  Rng rng(c.seed);
  const Matrix u = simulate_U(params, graphs, rng);
  const ArealDataset data = simulate_counts(u, beta, exposure, tags, rng);

  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  const std::string prov = provenance(c);
  {
    auto f = open_out(dir / "data.csv");
    f << prov;
    write_dataset(f, data);
  }
  {
    auto f = open_out(dir / "spatial.adj");
    f << prov;
    write_adjacency(f, graphs.spatial);
  }
  {
    auto f = open_out(dir / "response.adj");
    f << prov;
    write_adjacency(f, graphs.response);
  }
  {
    auto f = open_out(dir / "truth.csv");
    f << prov << "parameter,value\n" << std::setprecision(17);
    f << "model," << model << "\n";
    for (int j = 0; j < J; ++j)
      f << "beta[" << j + 1 << "]," << beta[j] << "\n";
    const auto names = hyper_names(model, graphs);
    const auto values = flatten_hyper(params, graphs);
    for (std::size_t k = 0; k < names.size(); ++k)
      f << names[k] << "," << values[k] << "\n";
    for (int j = 0; j < J; ++j)
      for (int i = 0; i < I; ++i)
        f << "u[" << i + 1 << "," << j + 1 << "]," << u(i, j) << "\n";
  }
  out << "simulated " << I << " units x " << J << " responses (" << data.y.size() << " rows) into "
      << dir.string() << "\n";
}

void cmd_fit(const RunOptions &o, std::ostream &out) {
  const RunConfig c = resolve_run_config(o);
  if (c.data.empty())
    throw ValidationError("no data file given (use --data or [io] data)");
  const ArealDataset data = read_dataset_file(c.data);
  const auto graphs = model_graphs_for_variant(load_graph(graph_source(c.spatial, "spatial")),
                                               load_graph(graph_source(c.response, "response")), c.variant);
  if (data.n_units != graphs.n_units() || data.n_responses != graphs.n_responses())
    throw DimensionMismatch("data has " + std::to_string(data.n_units) + " units x " +
                            std::to_string(data.n_responses) + " responses but the graphs have " +
                            std::to_string(graphs.n_units()) + " x " + std::to_string(graphs.n_responses()));
  const FitConfig fc = c.fit_config(graphs);
  if (!o.resume.empty() && c.chains > 1)
    throw ValidationError("--resume restarts a single chain; use --chains 1");

  std::vector<ChainRun> runs(static_cast<std::size_t>(c.chains));
  std::vector<std::exception_ptr> errors(runs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (int ch = 0; ch < c.chains; ++ch) {
    try {
      Sampler sampler(data, graphs, fc);
      ChainRun &r = runs[ch];
      if (!o.resume.empty()) {
        std::ifstream in(o.resume);
        if (!in)
          throw ValidationError("cannot open checkpoint '" + o.resume + "'");
        auto [state, samples] = read_checkpoint(in, graphs);
        if (model_id(state.hyper) != fc.model)
          throw ValidationError("checkpoint holds model " + std::to_string(model_id(state.hyper)) +
                                ", configured model is " + std::to_string(fc.model));
        r.state = std::move(state);
        r.samples = std::move(samples);
      } else {
        const auto seed = c.chains == 1 ? c.seed : derive_seed(c.seed, static_cast<std::uint64_t>(ch));
        r.state = sampler.initial_state(seed);
        r.samples = sampler.empty_samples();
      }
      run_chain(sampler, r.state, r.samples);
    } catch (...) {
      errors[ch] = std::current_exception();
    }
  }
  for (auto &e : errors)
    if (e)
      std::rethrow_exception(e);

  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  const std::string prov = provenance(c);
  for (std::size_t ch = 0; ch < runs.size(); ++ch) {
    const std::string suffix = runs.size() == 1 ? "" : "_chain" + std::to_string(ch + 1);
    {
      auto f = open_out(dir / ("samples" + suffix + ".csv"));
      f << prov;
      write_samples_csv(f, runs[ch].samples);
    }
    auto f = open_out(dir / ("checkpoint" + suffix + ".txt"));
    write_checkpoint(f, runs[ch].state, runs[ch].samples, graphs);
  }
  {
    auto f = open_out(dir / "deviance.csv");
    f << prov << "chain,iteration,deviance\n" << std::setprecision(17);
    for (std::size_t ch = 0; ch < runs.size(); ++ch)
      for (std::size_t k = 0; k < runs[ch].samples.size(); ++k)
        f << ch + 1 << "," << runs[ch].samples.iteration[k] << "," << runs[ch].samples.deviance[k] << "\n";
  }
  const PosteriorSamples all = pool(runs);
  if (all.size() == 0) {
    out << "no post-burn-in draws stored; summaries skipped\n";
    return;
  }
  {
    auto f = open_out(dir / "summary.csv");
    f << prov;
    write_summary_csv(f, summarize(all));
  }
  {
    auto f = open_out(dir / "u_means.csv");
    f << prov;
    write_u_means_csv(f, posterior_u(all));
  }
  if (all.size() >= 2) {
    DICReport r = dic(all, data);
    auto f = open_out(dir / "dic.csv");
    f << prov;
    write_dic_csv(f, {r});
    out << std::setprecision(6) << "model " << fc.model << ": Dbar " << r.dbar << "  pD " << r.pd << "  DIC "
        << r.dic << "\n";
  }
  out << "wrote " << all.size() << " draws to " << dir.string() << "\n";
}

std::vector<DICReport> cmd_compare(const std::vector<std::string> &files, std::ostream &out) {
  std::vector<DICReport> reports;
  for (const auto &path : files) {
    std::ifstream in(path);
    if (!in)
      throw ValidationError("cannot open DIC report '" + path + "'");
    for (auto &r : read_dic_csv(in))
      reports.push_back(std::move(r));
  }
  const auto ranked = compare(reports);
  out << "rank,model,Dbar,pD,DIC\n";
  int rank = 1;
  for (const auto &r : ranked)
    out << rank++ << "," << r.model << "," << std::setprecision(17) << r.dbar << "," << r.pd << "," << r.dic << "\n";
  return ranked;
}

void cmd_summarize(const std::vector<std::string> &files, const std::string &out_dir, std::ostream &out) {
  if (files.empty())
    throw ValidationError("summarize: no samples files given");
  std::vector<ChainRun> runs;
  for (const auto &path : files) {
    std::ifstream in(path);
    if (!in)
      throw ValidationError("cannot open samples file '" + path + "'");
    ChainRun r;
    r.samples = read_samples_csv(in);
    if (!runs.empty() && (r.samples.n_units != runs.front().samples.n_units ||
                          r.samples.n_responses != runs.front().samples.n_responses ||
                          r.samples.hyper_names != runs.front().samples.hyper_names))
      throw DimensionMismatch("summarize: samples files describe different models");
    runs.push_back(std::move(r));
  }
  const PosteriorSamples all = pool(runs);
  const auto rows = summarize(all);
  if (out_dir.empty()) {
    write_summary_csv(out, rows);
    return;
  }
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  {
    auto f = open_out(dir / "summary.csv");
    write_summary_csv(f, rows);
  }
  {
    auto f = open_out(dir / "u_means.csv");
    write_u_means_csv(f, posterior_u(all));
  }
  {
    auto f = open_out(dir / "u_correlations.csv");
    const Matrix r = posterior_u_correlations(all);
    f << std::setprecision(17);
    for (long a = 0; a < r.rows(); ++a) {
      for (long b = 0; b < r.cols(); ++b)
        f << (b ? "," : "") << r(a, b);
      f << "\n";
    }
  }
  out << "summarized " << all.size() << " draws into " << dir.string() << "\n";
}

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Multivariate CAR models for areal count data"};
  app.require_subcommand(1);

  GraphOptions graph;
  std::string graph_variant = "full";
  auto *g = app.add_subcommand("graph", "Build the joint adjacency and report its structure");
  g->add_option("--spatial", graph.spatial, "Spatial graph file or generator (grid:RxC, path:N, ...)")->required();
  g->add_option("--response", graph.response, "Response graph file or generator")->required();
  g->add_option("--variant", graph_variant, "full | spatial | response | nointeraction");
  g->add_option("--out-dir", graph.out_dir, "Write joint_adjacency.txt here");

  RunOptions run_opts;
  auto add_run_options = [&](CLI::App *sub) {
    sub->add_option("--config", run_opts.config, "TOML configuration file");
    sub->add_option("--seed", run_opts.seed, "Random seed");
    sub->add_option("--out-dir", run_opts.out_dir, "Output directory");
    sub->add_option("--model", run_opts.model, "Precision model 1, 2 or 3")->check(CLI::Range(1, 3));
    sub->add_option("--variant", run_opts.variant, "full | spatial | response | nointeraction");
    sub->add_option("--spatial", run_opts.spatial, "Spatial graph file or generator");
    sub->add_option("--response", run_opts.response, "Response graph file or generator");
  };
  auto *sim = app.add_subcommand("simulate", "Simulate a dataset from the [truth] section");
  add_run_options(sim);

  auto *fit = app.add_subcommand("fit", "Run the MCMC sampler");
  add_run_options(fit);
  fit->add_option("--data", run_opts.data, "Data CSV");
  fit->add_option("--chains", run_opts.chains, "Number of chains");
  fit->add_option("--iterations", run_opts.iterations, "Total iterations");
  fit->add_option("--burn-in", run_opts.burn_in, "Burn-in iterations");
  fit->add_option("--resume", run_opts.resume, "Continue from a checkpoint file");

  std::vector<std::string> dic_files;
  auto *cmp = app.add_subcommand("compare", "Rank DIC reports");
  cmp->add_option("reports", dic_files, "DIC CSV files")->required();

  std::vector<std::string> sample_files;
  std::string summary_dir;
  auto *sum = app.add_subcommand("summarize", "Summarize samples files");
  sum->add_option("samples", sample_files, "Samples CSV files")->required();
  sum->add_option("--out-dir", summary_dir, "Write summary.csv, u_means.csv, u_correlations.csv here");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? ok : validation_error;
  }

  try {
    if (*g) {
      graph.variant = parse_variant(graph_variant);
      cmd_graph(graph, out);
    } else if (*sim) {
      cmd_simulate(run_opts, out);
    } else if (*fit) {
      cmd_fit(run_opts, out);
    } else if (*cmp) {
      cmd_compare(dic_files, out);
    } else if (*sum) {
      cmd_summarize(sample_files, summary_dir, out);
    }
  } catch (const ValidationError &e) {
    err << "error: " << e.what() << "\n";
    return validation_error;
  } catch (const NumericalError &e) {
    err << "numerical failure: " << e.what() << "\n";
    return numerical_failure;
  } catch (const std::invalid_argument &e) {
    err << "error: " << e.what() << "\n";
    return validation_error;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return failure;
  }
  return ok;
}

} // namespace mcar::cli
