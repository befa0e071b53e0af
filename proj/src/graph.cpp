#include "jmrp/graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "jmrp/csv.hpp"
#include "jmrp/errors.hpp"

namespace jmrp {

AdjacencyGraph::AdjacencyGraph(std::size_t node_count, std::vector<Edge> edges)
    : node_count_(node_count), neighbours_(node_count), component_(node_count) {
  std::set<Edge> seen;
  for (auto& [a, b] : edges) {
    if (a >= node_count || b >= node_count) {
      throw SchemaError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                        ") references a node outside [0," + std::to_string(node_count) + ")");
    }
    if (a == b) throw SchemaError("self-loop at node " + std::to_string(a));
    if (a > b) std::swap(a, b);
    if (!seen.insert({a, b}).second) {
      throw SchemaError("duplicate edge (" + std::to_string(a) + "," + std::to_string(b) + ")");
    }
    neighbours_[a].push_back(b);
    neighbours_[b].push_back(a);
  }
  edges_ = std::move(edges);
  for (auto& nb : neighbours_) std::sort(nb.begin(), nb.end());

  // union-find
  std::vector<std::size_t> parent(node_count);
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [a, b] : edges_) {
    auto ra = root(a), rb = root(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<std::size_t> label(node_count, node_count);
  for (std::size_t i = 0; i < node_count; ++i) {
    auto r = root(i);
    if (label[r] == node_count) {
      label[r] = components_.size();
      components_.emplace_back();
    }
    component_[i] = label[r];
    components_[label[r]].push_back(i);
  }
}

AdjacencyGraph AdjacencyGraph::grid(std::size_t rows, std::size_t cols) {
  std::vector<Edge> edges;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      std::size_t node = r * cols + c;
      if (c + 1 < cols) edges.emplace_back(node, node + 1);
      if (r + 1 < rows) edges.emplace_back(node, node + cols);
    }
  }
  return AdjacencyGraph(rows * cols, std::move(edges));
}

AdjacencyGraph read_edge_list(const std::string& path, std::size_t node_count) {
  auto table = csv::read(path);
  std::vector<AdjacencyGraph::Edge> edges;
  auto to_node = [&](const std::string& field) {
    auto v = csv::parse_int(field, path);
    if (v < 0) throw SchemaError(path + ": negative node index");
    return static_cast<std::size_t>(v);
  };
  // A header consisting of two integers is itself an edge.
  bool header_is_edge = table.header.size() == 2 &&
                        std::all_of(table.header.begin(), table.header.end(), [](const std::string& s) {
                          return !s.empty() && std::all_of(s.begin(), s.end(), ::isdigit);
                        });
  if (table.header.size() != 2) throw SchemaError(path + ": edge list needs exactly two columns");
  if (header_is_edge) edges.emplace_back(to_node(table.header[0]), to_node(table.header[1]));
  for (const auto& row : table.rows) edges.emplace_back(to_node(row[0]), to_node(row[1]));
  return AdjacencyGraph(node_count, std::move(edges));
}

void write_edge_list(const std::string& path, const AdjacencyGraph& graph) {
  std::ostringstream out;
  out << "from,to\n";
  for (const auto& [a, b] : graph.edges()) out << a << ',' << b << '\n';
  csv::write_file(path, out.str());
}

}  // namespace jmrp
