#include "doctest.h"
#include "support.hpp"

#include "commands.hpp"
#include "mcar/config.hpp"
#include "mcar/error.hpp"

#include <fstream>
#include <sstream>

using namespace mcar;
using namespace mcar::test;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path &p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const fs::path &p, const std::string &text) { std::ofstream(p) << text; }

int run(std::vector<std::string> args, std::string *out_text = nullptr, std::string *err_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (out_text)
    *out_text = out.str();
  if (err_text)
    *err_text = err.str();
  return code;
}

const char *sim_config = R"([model]
id = 2

[mcmc]
iterations = 40
burn_in = 20
seed = 3

[io]
data = "sim/data.csv"
spatial = "sim/spatial.adj"
response = "sim/response.adj"
out_dir = "fit"

[truth]
grid = [3, 4]
responses = 2
rho = 0.5
omega = [[1.0, 0.3],
         [0.3, 1.0]]   # multi-line array
beta = [-0.5, 0.0]
likelihood = ["binlogit", "poislognorm"]
exposure = [50, 20]
)";

} // namespace

TEST_CASE("config parser") {
  std::istringstream in("# header\n[a]\nx = 1.5\nname = \"p # q\" # trailing\nflag = true\n"
                        "m = [[1, 2],\n [3, 4]]\nbig = 1_000\n[b]\nempty = []\n");
  const auto t = parse_config(in);
  CHECK(get_number(t.at("a"), "a", "x", 0) == 1.5);
  CHECK(get_string(t.at("a"), "a", "name", "") == "p # q");
  CHECK(get_bool(t.at("a"), "a", "flag", false));
  CHECK(get_integer(t.at("a"), "a", "big", 0) == 1000);
  const auto m = get_matrix(t.at("a"), "a", "m");
  REQUIRE(m);
  CHECK((*m)(1, 0) == 3.0);
  CHECK(get_vector(t.at("b"), "b", "empty")->size() == 0);
  CHECK(get_number(t.at("b"), "b", "missing", 7.0) == 7.0);
  CHECK_THROWS_AS(get_integer(t.at("a"), "a", "x", 0), ValidationError);
  CHECK_THROWS_AS(get_string(t.at("a"), "a", "x", ""), ValidationError);

  auto error_line = [](const std::string &text) {
    std::istringstream bad(text);
    try {
      parse_config(bad);
    } catch (const ParseError &e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(error_line("[a]\nx = 1\nx = 2\n").find("line 3") != std::string::npos);
  CHECK(error_line("[a]\nx 1\n").find("line 2") != std::string::npos);
  CHECK(error_line("[a]\nx = [1, 2\n").find("line 2") != std::string::npos);
  CHECK(error_line("[a]\nx = 1abc\n").find("line 2") != std::string::npos);
  CHECK(error_line("[a\n").find("line 1") != std::string::npos);
}

TEST_CASE("run configuration") {
  std::istringstream in("[model]\nid = 1\nlambda = [0.2, 0.1]\n[priors]\na = 0.5\n[mcmc]\niterations = 10\nburn_in = 5\n");
  const auto c = read_run_config(in);
  CHECK(c.model == 1);
  CHECK(c.iterations == 10);
  const auto g = ModelGraphs::make(path_graph(3), complete_graph(2));
  const auto fc = c.fit_config(g);
  REQUIRE(fc.initial);
  CHECK(std::get<Model1Params>(*fc.initial).lambda[0] == 0.2);
  CHECK(fc.priors.a.size() == 2);

  std::istringstream bad("[model]\nid = 1\nlambda = 1.5\n");
  const auto cb = read_run_config(bad);
  CHECK_THROWS_AS(cb.fit_config(g), ValidationError);
  std::istringstream unknown("[modle]\nid = 1\n");
  CHECK_THROWS_AS(read_run_config(unknown), ValidationError);
  CHECK(config_hash("a") != config_hash("b"));
  CHECK(hash_hex(config_hash("")).size() == 16);
}

TEST_CASE("graph specs") {
  CHECK(load_graph("grid:2x3") == grid_graph(2, 3));
  CHECK(load_graph("path:4") == path_graph(4));
  CHECK(load_graph("complete:3") == complete_graph(3));
  CHECK_THROWS_AS(load_graph("grid:2"), ValidationError);
  CHECK_THROWS_AS(load_graph("/nonexistent/graph.adj"), ValidationError);
}

TEST_CASE("graph command") {
  std::string out;
  CHECK(run({"graph", "--spatial", "path:2", "--response", "path:2"}, &out) == 0);
  CHECK(out.find("vertices 4\n") != std::string::npos);
  CHECK(out.find("edges 6\n") != std::string::npos);
  CHECK(run({"graph", "--spatial", "grid:23x5", "--response", "complete:5"}, &out) == 0);
  CHECK(out.find("vertices 575\n") != std::string::npos);
  CHECK(run({"graph", "--spatial", "grid:2x2", "--response", "complete:3", "--variant", "spatial"}, &out) == 0);
  CHECK(out.find("components 3\n") != std::string::npos);

  const auto dir = scratch_dir("graph");
  spit(dir / "bad.adj", "# vertices 2\n1 2\n2 1\n");
  std::string err;
  CHECK(run({"graph", "--spatial", (dir / "bad.adj").string(), "--response", "path:2"}, &out, &err) == 2);
  CHECK(err.find("line 3") != std::string::npos);
  CHECK(run({"graph", "--spatial", "path:2", "--response", "path:2", "--variant", "bogus"}) == 2);
  CHECK(run({"graph", "--spatial", "path:2", "--response", "path:2", "--out-dir", dir.string()}) == 0);
  CHECK(read_adjacency_file((dir / "joint_adjacency.txt").string()) == complete_graph(4));
}

TEST_CASE("simulate, fit, summarize and compare") {
  const auto dir = scratch_dir("pipeline");
  spit(dir / "run.toml", sim_config);
  const std::string cfg = (dir / "run.toml").string();
  std::string out, err;
  REQUIRE(run({"simulate", "--config", cfg, "--out-dir", (dir / "sim").string()}, &out, &err) == 0);
  const std::string data = slurp(dir / "sim" / "data.csv");
  CHECK(data.rfind("# config_hash=", 0) == 0);
  CHECK(std::count(data.begin(), data.end(), '\n') == 1 + 1 + 24);
  const auto ds = read_dataset_file((dir / "sim" / "data.csv").string());
  CHECK(ds.likelihood[1] == Likelihood::poisson_lognormal);

  // same seed, same files
  REQUIRE(run({"simulate", "--config", cfg, "--out-dir", (dir / "sim2").string()}) == 0);
  CHECK(slurp(dir / "sim2" / "data.csv") == data);
  CHECK(slurp(dir / "sim2" / "truth.csv") == slurp(dir / "sim" / "truth.csv"));

  REQUIRE(run({"fit", "--config", cfg}, &out, &err) == 0);
  for (const char *f : {"samples.csv", "summary.csv", "u_means.csv", "deviance.csv", "dic.csv", "checkpoint.txt"})
    CHECK(fs::exists(dir / "fit" / f));
  CHECK(slurp(dir / "fit" / "u_means.csv").find("unit,response,mean,sd\n") != std::string::npos);
  CHECK(slurp(dir / "fit" / "summary.csv").find("seed=3") != std::string::npos);

  // resume from a shorter run reproduces the full run
  REQUIRE(run({"fit", "--config", cfg, "--iterations", "30", "--out-dir", (dir / "part").string()}) == 0);
  REQUIRE(run({"fit", "--config", cfg, "--resume", (dir / "part" / "checkpoint.txt").string(), "--out-dir",
               (dir / "resumed").string()}) == 0);
  CHECK(slurp(dir / "resumed" / "checkpoint.txt") == slurp(dir / "fit" / "checkpoint.txt"));
  CHECK(slurp(dir / "resumed" / "dic.csv") == slurp(dir / "fit" / "dic.csv"));

  REQUIRE(run({"fit", "--config", cfg, "--model", "3", "--out-dir", (dir / "m3").string()}) == 0);
  REQUIRE(run({"fit", "--config", cfg, "--model", "1", "--chains", "2", "--out-dir", (dir / "m1").string()}) == 0);
  CHECK(fs::exists(dir / "m1" / "samples_chain2.csv"));

  REQUIRE(run({"compare", (dir / "fit" / "dic.csv").string(), (dir / "m3" / "dic.csv").string(),
               (dir / "m1" / "dic.csv").string()},
              &out) == 0);
  CHECK(out.rfind("rank,model,Dbar,pD,DIC\n1,", 0) == 0);
  CHECK(run({"compare", (dir / "fit" / "dic.csv").string()}, &out, &err) == 2);

  REQUIRE(run({"summarize", (dir / "m1" / "samples_chain1.csv").string(), (dir / "m1" / "samples_chain2.csv").string(),
               "--out-dir", (dir / "m1sum").string()}) == 0);
  CHECK(fs::exists(dir / "m1sum" / "u_correlations.csv"));
  REQUIRE(run({"summarize", (dir / "fit" / "samples.csv").string()}, &out) == 0);
  CHECK(out.find("rho,") != std::string::npos);
}

TEST_CASE("exit codes for validation and numerical failures") {
  const auto dir = scratch_dir("exitcodes");
  spit(dir / "run.toml", sim_config);
  const std::string cfg = (dir / "run.toml").string();
  REQUIRE(run({"simulate", "--config", cfg, "--out-dir", (dir / "sim").string()}) == 0);

  std::string text = sim_config;
  text.replace(text.find("rho = 0.5"), 9, "rho = 1.5");
  spit(dir / "bad_rho.toml", text);
  std::string err;
  CHECK(run({"simulate", "--config", (dir / "bad_rho.toml").string(), "--out-dir", (dir / "x").string()}, nullptr, &err) == 2);
  CHECK(err.find("rho") != std::string::npos);

  spit(dir / "lambda.toml", "[model]\nid = 1\nfix_hyper = true\nlambda = [1.5, 0.0]\n[mcmc]\niterations = 4\nburn_in = 2\n"
                            "[io]\ndata = \"sim/data.csv\"\nspatial = \"sim/spatial.adj\"\nresponse = \"sim/response.adj\"\n");
  CHECK(run({"fit", "--config", (dir / "lambda.toml").string(), "--out-dir", (dir / "y").string()}) == 2);

  CHECK(run({"fit", "--config", cfg, "--spatial", "grid:3x3", "--out-dir", (dir / "z").string()}) == 2);
  CHECK(run({"fit", "--config", cfg, "--variant", "nointeraction", "--out-dir", (dir / "z").string()}) == 2);
  CHECK(run({"fit", "--config", cfg, "--model", "4"}) == 2);
  CHECK(run({"nonsense"}) == 2);
  CHECK(run({}) == 2);
  CHECK(run({"fit", "--config", (dir / "missing.toml").string()}) == 2);

}
