#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace jmrp {

/// Undirected neighbourhood structure over districts. Edges are stored with
/// i < j; connected components are derived at construction.
class AdjacencyGraph {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  AdjacencyGraph() = default;
  /// Throws SchemaError on self-loops, duplicate edges or out-of-range nodes.
  AdjacencyGraph(std::size_t node_count, std::vector<Edge> edges);

  /// Rook adjacency on a rows x cols grid, row-major node numbering.
  static AdjacencyGraph grid(std::size_t rows, std::size_t cols);

  std::size_t node_count() const { return node_count_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::size_t>& neighbours(std::size_t node) const { return neighbours_.at(node); }
  std::size_t degree(std::size_t node) const { return neighbours_.at(node).size(); }

  std::size_t component_of(std::size_t node) const { return component_.at(node); }
  std::size_t component_count() const { return components_.size(); }
  /// Node lists per component, ordered by smallest member.
  const std::vector<std::vector<std::size_t>>& components() const { return components_; }
  bool is_isolated(std::size_t node) const { return neighbours_.at(node).empty(); }

 private:
  std::size_t node_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> neighbours_;
  std::vector<std::size_t> component_;
  std::vector<std::vector<std::size_t>> components_;
};

/// Reads a two-column integer edge list. A header row is optional.
AdjacencyGraph read_edge_list(const std::string& path, std::size_t node_count);
void write_edge_list(const std::string& path, const AdjacencyGraph& graph);

}  // namespace jmrp
