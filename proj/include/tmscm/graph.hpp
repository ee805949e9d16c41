#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace tmscm {

struct NodeId {
  int value = 0;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

std::string to_string(NodeId id);

/// Directed graph over vector-valued nodes. Parents are stored per node;
/// the causal order is computed on construction (ascending-id tie-break)
/// unless an explicit order is supplied and validated.
class CausalGraph {
 public:
  struct NodeSpec {
    NodeId id;
    std::size_t dim = 1;
    std::vector<NodeId> parents;
  };

  CausalGraph() = default;
  explicit CausalGraph(std::vector<NodeSpec> nodes);
  CausalGraph(std::vector<NodeSpec> nodes, std::vector<NodeId> order);

  /// DAG with an edge from every earlier node to every later node in `order`.
  static CausalGraph complete_from_order(const std::vector<NodeId>& order, const std::map<NodeId, std::size_t>& dims);

  const std::vector<NodeId>& nodes() const { return ids_; }
  const std::vector<NodeId>& order() const { return order_; }
  std::size_t dim(NodeId id) const;
  const std::vector<NodeId>& parents(NodeId id) const;
  bool contains(NodeId id) const { return specs_.count(id) != 0; }
  std::size_t size() const { return ids_.size(); }
  std::size_t total_dim() const;
  std::size_t parent_dim(NodeId id) const;

  std::set<NodeId> ancestors(NodeId id) const;
  /// Nodes strictly before `id` in the causal order (pr(i)).
  std::vector<NodeId> predecessors(NodeId id) const;
  std::size_t position(NodeId id) const;
  /// Number of edges on the longest directed path.
  std::size_t diameter() const;

  std::vector<NodeSpec> specs() const;

 private:
  void validate() const;

  std::map<NodeId, NodeSpec> specs_;
  std::vector<NodeId> ids_;
  std::vector<NodeId> order_;
};

/// Kahn's algorithm with a min-heap so ties break by ascending node id.
std::vector<NodeId> topological_order(const CausalGraph& graph);
std::vector<NodeId> topological_order(const std::vector<CausalGraph::NodeSpec>& nodes);

/// True when every node's parents precede it in `order` and `order` is a
/// permutation of the graph's nodes.
bool is_causal_order(const CausalGraph& graph, const std::vector<NodeId>& order);

}  // namespace tmscm
