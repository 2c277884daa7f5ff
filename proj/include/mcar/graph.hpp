#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace mcar {

using Edge = std::pair<int, int>;

// Undirected simple graph on vertices 0..n-1. Adjacency lists are sorted.
class AdjacencyGraph {
public:
  AdjacencyGraph() = default;
  explicit AdjacencyGraph(int n_vertices);

  // Throws ValidationError on self-loops, out-of-range vertices, or a pair
  // listed twice (in either orientation).
  static AdjacencyGraph from_edges(int n_vertices, const std::vector<Edge> &edges);

  int n_vertices() const { return static_cast<int>(adj_.size()); }
  std::size_t n_edges() const { return n_edges_; }
  int degree(int v) const { return static_cast<int>(adj_.at(v).size()); }
  const std::vector<int> &neighbors(int v) const { return adj_.at(v); }
  bool has_edge(int u, int v) const;
  bool has_isolated_vertex() const;
  bool is_connected() const;

  // Edges as (u, v) with u < v, sorted lexicographically. Edge-indexed
  // parameter vectors use this order.
  std::vector<Edge> edges() const;
  // Index of edge {u, v} in edges(), or -1.
  int edge_index(int u, int v) const;

  std::vector<int> degrees() const;
  // Dense 0/1 adjacency, row-major n*n.
  std::vector<int> dense_adjacency() const;

  bool operator==(const AdjacencyGraph &other) const { return adj_ == other.adj_; }

private:
  void add_edge_unchecked(int u, int v);
  std::vector<std::vector<int>> adj_;
  std::size_t n_edges_ = 0;
};

AdjacencyGraph path_graph(int n);
AdjacencyGraph complete_graph(int n);
AdjacencyGraph empty_graph(int n);
AdjacencyGraph cycle_graph(int n);
// rows x cols lattice, rook adjacency, vertex r*cols + c.
AdjacencyGraph grid_graph(int rows, int cols);

enum class JointVariant { full, spatial_only, response_only, no_interaction };

JointVariant parse_variant(const std::string &name);
std::string variant_name(JointVariant v);

// Joint graph over I*J (unit, response) pairs. Element (i, j) sits at
// j*I + i, i.e. vec(U) stacking of the I x J field.
struct JointAdjacency {
  AdjacencyGraph graph;
  int n_units = 0;
  int n_responses = 0;
  JointVariant variant = JointVariant::full;

  int index(int unit, int response) const { return response * n_units + unit; }
  int unit_of(int v) const { return v % n_units; }
  int response_of(int v) const { return v / n_units; }
  int degree(int unit, int response) const { return graph.degree(index(unit, response)); }
};

JointAdjacency build_joint_adjacency(const AdjacencyGraph &spatial,
                                     const AdjacencyGraph &response,
                                     JointVariant variant = JointVariant::full);

// d_j^(r) d_i^(s) + d_j^(r) + d_i^(s); throws std::out_of_range on bad indices.
int joint_degree(int unit, int response, const AdjacencyGraph &spatial,
                 const AdjacencyGraph &response_graph);
int joint_degree(int spatial_degree, int response_degree);

// Number of vertices plus number of edges.
long nu(const AdjacencyGraph &g);

struct CliqueSet {
  std::vector<std::vector<int>> cliques;
};

// Exact maximal clique enumeration (Bron-Kerbosch with pivoting). Isolated
// vertices come out as singleton cliques. Each clique is sorted; the list is
// sorted lexicographically. A warning goes to stderr when the count exceeds
// warn_cap.
CliqueSet maximal_cliques(const AdjacencyGraph &g, std::size_t warn_cap = 100000);

// Edge-list text format: "# vertices N" header, then "u v" per line, 1-based.
AdjacencyGraph read_adjacency(std::istream &in);
AdjacencyGraph read_adjacency_file(const std::string &path);
void write_adjacency(std::ostream &out, const AdjacencyGraph &g);

} // namespace mcar
