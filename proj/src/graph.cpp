#include "mcar/graph.hpp"

#include "mcar/error.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>

namespace mcar {

AdjacencyGraph::AdjacencyGraph(int n_vertices) {
  if (n_vertices < 0)
    throw ValidationError("graph: negative vertex count");
  adj_.resize(static_cast<std::size_t>(n_vertices));
}

AdjacencyGraph AdjacencyGraph::from_edges(int n_vertices, const std::vector<Edge> &edges) {
  AdjacencyGraph g(n_vertices);
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n_vertices || v >= n_vertices)
      throw ValidationError("graph: edge (" + std::to_string(u + 1) + ", " +
                            std::to_string(v + 1) + ") out of range");
    if (u == v)
      throw ValidationError("graph: self-loop at vertex " + std::to_string(u + 1));
    if (g.has_edge(u, v))
      throw ValidationError("graph: duplicate edge (" + std::to_string(u + 1) + ", " +
                            std::to_string(v + 1) + ")");
    g.add_edge_unchecked(u, v);
  }
  return g;
}

void AdjacencyGraph::add_edge_unchecked(int u, int v) {
  auto insert_sorted = [](std::vector<int> &list, int x) {
    list.insert(std::lower_bound(list.begin(), list.end(), x), x);
  };
  insert_sorted(adj_[u], v);
  insert_sorted(adj_[v], u);
  ++n_edges_;
}

bool AdjacencyGraph::has_edge(int u, int v) const {
  const auto &list = adj_.at(u);
  return std::binary_search(list.begin(), list.end(), v);
}

bool AdjacencyGraph::has_isolated_vertex() const {
  return std::any_of(adj_.begin(), adj_.end(), [](const auto &l) { return l.empty(); });
}

bool AdjacencyGraph::is_connected() const {
  if (adj_.empty())
    return true;
  std::vector<char> seen(adj_.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj_[v])
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        stack.push_back(w);
      }
  }
  return count == adj_.size();
}

std::vector<Edge> AdjacencyGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(n_edges_);
  for (int u = 0; u < n_vertices(); ++u)
    for (int v : adj_[u])
      if (u < v)
        out.emplace_back(u, v);
  return out;
}

int AdjacencyGraph::edge_index(int u, int v) const {
  if (u > v)
    std::swap(u, v);
  if (!has_edge(u, v))
    return -1;
  int idx = 0;
  for (int a = 0; a < u; ++a)
    idx += static_cast<int>(std::count_if(adj_[a].begin(), adj_[a].end(),
                                          [a](int b) { return b > a; }));
  const auto &list = adj_[u];
  auto first_above = std::upper_bound(list.begin(), list.end(), u);
  return idx + static_cast<int>(std::distance(first_above, std::lower_bound(list.begin(), list.end(), v)));
}

std::vector<int> AdjacencyGraph::degrees() const {
  std::vector<int> d(adj_.size());
  for (std::size_t v = 0; v < adj_.size(); ++v)
    d[v] = static_cast<int>(adj_[v].size());
  return d;
}

std::vector<int> AdjacencyGraph::dense_adjacency() const {
  const auto n = adj_.size();
  std::vector<int> a(n * n, 0);
  for (std::size_t u = 0; u < n; ++u)
    for (int v : adj_[u])
      a[u * n + static_cast<std::size_t>(v)] = 1;
  return a;
}

AdjacencyGraph path_graph(int n) {
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i)
    e.emplace_back(i, i + 1);
  return AdjacencyGraph::from_edges(n, e);
}

AdjacencyGraph complete_graph(int n) {
  std::vector<Edge> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      e.emplace_back(i, j);
  return AdjacencyGraph::from_edges(n, e);
}

AdjacencyGraph empty_graph(int n) { return AdjacencyGraph(n); }

AdjacencyGraph cycle_graph(int n) {
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i)
    e.emplace_back(i, i + 1);
  if (n > 2)
    e.emplace_back(n - 1, 0);
  return AdjacencyGraph::from_edges(n, e);
}

AdjacencyGraph grid_graph(int rows, int cols) {
  if (rows < 1 || cols < 1)
    throw ValidationError("grid: dimensions must be positive");
  std::vector<Edge> e;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      int v = r * cols + c;
      if (c + 1 < cols)
        e.emplace_back(v, v + 1);
      if (r + 1 < rows)
        e.emplace_back(v, v + cols);
    }
  return AdjacencyGraph::from_edges(rows * cols, e);
}

JointVariant parse_variant(const std::string &name) {
  if (name == "full")
    return JointVariant::full;
  if (name == "spatial")
    return JointVariant::spatial_only;
  if (name == "response")
    return JointVariant::response_only;
  if (name == "nointeraction")
    return JointVariant::no_interaction;
  throw ValidationError("unknown variant '" + name + "'");
}

std::string variant_name(JointVariant v) {
  switch (v) {
  case JointVariant::full: return "full";
  case JointVariant::spatial_only: return "spatial";
  case JointVariant::response_only: return "response";
  case JointVariant::no_interaction: return "nointeraction";
  }
  return "?";
}

JointAdjacency build_joint_adjacency(const AdjacencyGraph &spatial,
                                     const AdjacencyGraph &response, JointVariant variant) {
  const int I = spatial.n_vertices();
  const int J = response.n_vertices();
  if (I < 1 || J < 1)
    throw ValidationError("joint adjacency: both graphs need at least one vertex");

  const bool spatial_terms = variant != JointVariant::response_only;
  const bool response_terms = variant != JointVariant::spatial_only;
  const bool interaction = variant == JointVariant::full;

  JointAdjacency out;
  out.n_units = I;
  out.n_responses = J;
  out.variant = variant;
  std::vector<Edge> edges;
  auto idx = [I](int i, int j) { return j * I + i; };
  for (int j = 0; j < J; ++j)
    for (int i = 0; i < I; ++i) {
      const int m = idx(i, j);
      if (spatial_terms)
        for (int i2 : spatial.neighbors(i))
          if (idx(i2, j) > m)
            edges.emplace_back(m, idx(i2, j));
      if (response_terms)
        for (int j2 : response.neighbors(j))
          if (idx(i, j2) > m)
            edges.emplace_back(m, idx(i, j2));
      if (interaction)
        for (int j2 : response.neighbors(j))
          for (int i2 : spatial.neighbors(i))
            if (idx(i2, j2) > m)
              edges.emplace_back(m, idx(i2, j2));
    }
  out.graph = AdjacencyGraph::from_edges(I * J, edges);
  return out;
}

int joint_degree(int spatial_degree, int response_degree) {
  return response_degree * spatial_degree + response_degree + spatial_degree;
}

int joint_degree(int unit, int response, const AdjacencyGraph &spatial,
                 const AdjacencyGraph &response_graph) {
  if (unit < 0 || unit >= spatial.n_vertices() || response < 0 ||
      response >= response_graph.n_vertices())
    throw std::out_of_range("joint_degree: index out of range");
  return joint_degree(spatial.degree(unit), response_graph.degree(response));
}

long nu(const AdjacencyGraph &g) {
  return static_cast<long>(g.n_vertices()) + static_cast<long>(g.n_edges());
}

namespace {

std::vector<int> intersect(const std::vector<int> &a, const std::vector<int> &b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

struct BronKerbosch {
  const AdjacencyGraph &g;
  std::vector<std::vector<int>> &found;

  void run(std::vector<int> &r, std::vector<int> p, std::vector<int> x) {
    if (p.empty() && x.empty()) {
      auto clique = r;
      std::sort(clique.begin(), clique.end());
      found.push_back(std::move(clique));
      return;
    }
    // Pivot: vertex of P u X with the most neighbours in P.
    int pivot = -1;
    std::size_t best = 0;
    for (const auto *set : {&p, &x})
      for (int u : *set) {
        auto n = intersect(p, g.neighbors(u)).size();
        if (pivot < 0 || n > best) {
          pivot = u;
          best = n;
        }
      }
    std::vector<int> candidates;
    std::set_difference(p.begin(), p.end(), g.neighbors(pivot).begin(),
                        g.neighbors(pivot).end(), std::back_inserter(candidates));
    for (int v : candidates) {
      r.push_back(v);
      run(r, intersect(p, g.neighbors(v)), intersect(x, g.neighbors(v)));
      r.pop_back();
      p.erase(std::lower_bound(p.begin(), p.end(), v));
      x.insert(std::lower_bound(x.begin(), x.end(), v), v);
    }
  }
};

} // namespace

CliqueSet maximal_cliques(const AdjacencyGraph &g, std::size_t warn_cap) {
  CliqueSet out;
  std::vector<int> r, p(static_cast<std::size_t>(g.n_vertices()));
  for (int v = 0; v < g.n_vertices(); ++v)
    p[v] = v;
  BronKerbosch{g, out.cliques}.run(r, p, {});
  std::sort(out.cliques.begin(), out.cliques.end());
  if (out.cliques.size() > warn_cap)
    std::cerr << "warning: " << out.cliques.size() << " maximal cliques exceeds cap "
              << warn_cap << "\n";
  return out;
}

AdjacencyGraph read_adjacency(std::istream &in) {
  std::string line;
  int line_no = 0;
  int n = -1;
  std::vector<Edge> edges;
  std::vector<int> edge_lines;
  while (std::getline(in, line)) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos)
      continue;
    if (line[first] == '#') {
      std::istringstream hs(line.substr(first + 1));
      std::string key;
      hs >> key;
      if (key == "vertices") {
        if (n >= 0)
          throw ParseError("repeated '# vertices' header", line_no);
        if (!(hs >> n) || n < 1)
          throw ParseError("bad vertex count in header", line_no);
      }
      continue;
    }
    if (n < 0)
      throw ParseError("edge before '# vertices N' header", line_no);
    std::istringstream ls(line);
    long u = 0, v = 0;
    std::string rest;
    if (!(ls >> u >> v) || (ls >> rest))
      throw ParseError("expected 'u v'", line_no);
    if (u < 1 || v < 1 || u > n || v > n)
      throw ParseError("vertex index out of range 1.." + std::to_string(n), line_no);
    if (u == v)
      throw ParseError("self-loop at vertex " + std::to_string(u), line_no);
    edges.emplace_back(static_cast<int>(u - 1), static_cast<int>(v - 1));
    edge_lines.push_back(line_no);
  }
  if (n < 0)
    throw ParseError("missing '# vertices N' header", 0);

  std::set<Edge> seen;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    auto [u, v] = edges[k];
    if (!seen.insert(std::minmax(u, v)).second)
      throw ParseError("duplicate edge " + std::to_string(u + 1) + " " + std::to_string(v + 1),
                       edge_lines[k]);
  }
  return AdjacencyGraph::from_edges(n, edges);
}

AdjacencyGraph read_adjacency_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot open graph file '" + path + "'");
  try {
    return read_adjacency(in);
  } catch (const ParseError &e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

void write_adjacency(std::ostream &out, const AdjacencyGraph &g) {
  out << "# vertices " << g.n_vertices() << "\n";
  for (auto [u, v] : g.edges())
    out << u + 1 << " " << v + 1 << "\n";
}

} // namespace mcar
