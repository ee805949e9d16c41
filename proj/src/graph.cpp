#include "tmscm/graph.hpp"

#include <algorithm>
#include <functional>
#include <queue>

#include "tmscm/error.hpp"

namespace tmscm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::NoSampler: return "NoSampler";
    case ErrorCode::NotMonotone: return "NotMonotone";
    case ErrorCode::NoBracket: return "NoBracket";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::BadRange: return "BadRange";
    case ErrorCode::DegenerateDistribution: return "DegenerateDistribution";
    case ErrorCode::NotInvertible: return "NotInvertible";
    case ErrorCode::OrderMismatch: return "OrderMismatch";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::PartialIntervention: return "PartialIntervention";
    case ErrorCode::PrefixViolation: return "PrefixViolation";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::string to_string(NodeId id) { return std::to_string(id.value); }

std::vector<NodeId> topological_order(const std::vector<CausalGraph::NodeSpec>& nodes) {
  std::map<NodeId, std::size_t> indegree;
  std::map<NodeId, std::vector<NodeId>> children;
  for (const auto& n : nodes) indegree[n.id] = 0;
  for (const auto& n : nodes) {
    for (NodeId p : n.parents) {
      require(indegree.count(p) != 0, ErrorCode::UnknownNode,
              "parent " + to_string(p) + " of node " + to_string(n.id) + " does not exist");
      children[p].push_back(n.id);
      ++indegree[n.id];
    }
  }

  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (const auto& [id, deg] : indegree)
    if (deg == 0) ready.push(id);

  std::vector<NodeId> order;
  order.reserve(nodes.size());
  while (!ready.empty()) {
    NodeId id = ready.top();
    ready.pop();
    order.push_back(id);
    for (NodeId c : children[id])
      if (--indegree[c] == 0) ready.push(c);
  }
  if (order.size() != indegree.size()) fail(ErrorCode::CycleDetected, "causal graph contains a directed cycle");
  return order;
}

std::vector<NodeId> topological_order(const CausalGraph& graph) { return topological_order(graph.specs()); }

CausalGraph::CausalGraph(std::vector<NodeSpec> nodes) {
  for (auto& n : nodes) {
    require(specs_.count(n.id) == 0, ErrorCode::ConfigError, "duplicate node id " + to_string(n.id));
    std::sort(n.parents.begin(), n.parents.end());
    n.parents.erase(std::unique(n.parents.begin(), n.parents.end()), n.parents.end());
    ids_.push_back(n.id);
    specs_.emplace(n.id, std::move(n));
  }
  std::sort(ids_.begin(), ids_.end());
  validate();
  order_ = topological_order(*this);
}

CausalGraph::CausalGraph(std::vector<NodeSpec> nodes, std::vector<NodeId> order) : CausalGraph(std::move(nodes)) {
  require(is_causal_order(*this, order), ErrorCode::OrderMismatch, "supplied order is not a causal order of the graph");
  order_ = std::move(order);
}

CausalGraph CausalGraph::complete_from_order(const std::vector<NodeId>& order,
                                             const std::map<NodeId, std::size_t>& dims) {
  std::vector<NodeSpec> specs;
  std::vector<NodeId> seen;
  for (NodeId id : order) {
    auto it = dims.find(id);
    require(it != dims.end(), ErrorCode::UnknownNode, "no dimension given for node " + to_string(id));
    specs.push_back({id, it->second, seen});
    seen.push_back(id);
  }
  return CausalGraph(std::move(specs), order);
}

void CausalGraph::validate() const {
  for (const auto& [id, spec] : specs_) {
    require(spec.dim >= 1, ErrorCode::ConfigError, "node " + to_string(id) + " has zero dimension");
    for (NodeId p : spec.parents) {
      require(specs_.count(p) != 0, ErrorCode::UnknownNode,
              "parent " + to_string(p) + " of node " + to_string(id) + " does not exist");
      require(p != id, ErrorCode::CycleDetected, "self loop at node " + to_string(id));
    }
  }
}

std::size_t CausalGraph::dim(NodeId id) const {
  auto it = specs_.find(id);
  require(it != specs_.end(), ErrorCode::UnknownNode, "unknown node " + to_string(id));
  return it->second.dim;
}

const std::vector<NodeId>& CausalGraph::parents(NodeId id) const {
  auto it = specs_.find(id);
  require(it != specs_.end(), ErrorCode::UnknownNode, "unknown node " + to_string(id));
  return it->second.parents;
}

std::size_t CausalGraph::total_dim() const {
  std::size_t d = 0;
  for (const auto& [id, spec] : specs_) d += spec.dim;
  return d;
}

std::size_t CausalGraph::parent_dim(NodeId id) const {
  std::size_t d = 0;
  for (NodeId p : parents(id)) d += dim(p);
  return d;
}

std::set<NodeId> CausalGraph::ancestors(NodeId id) const {
  std::set<NodeId> out;
  std::vector<NodeId> stack(parents(id).begin(), parents(id).end());
  while (!stack.empty()) {
    NodeId n = stack.back();
    stack.pop_back();
    if (!out.insert(n).second) continue;
    for (NodeId p : parents(n)) stack.push_back(p);
  }
  return out;
}

std::size_t CausalGraph::position(NodeId id) const {
  auto it = std::find(order_.begin(), order_.end(), id);
  require(it != order_.end(), ErrorCode::UnknownNode, "unknown node " + to_string(id));
  return static_cast<std::size_t>(it - order_.begin());
}

std::vector<NodeId> CausalGraph::predecessors(NodeId id) const {
  std::size_t pos = position(id);
  return {order_.begin(), order_.begin() + static_cast<std::ptrdiff_t>(pos)};
}

std::size_t CausalGraph::diameter() const {
  std::map<NodeId, std::size_t> depth;
  std::size_t best = 0;
  for (NodeId id : order_) {
    std::size_t d = 0;
    for (NodeId p : parents(id)) d = std::max(d, depth[p] + 1);
    depth[id] = d;
    best = std::max(best, d);
  }
  return best;
}

std::vector<CausalGraph::NodeSpec> CausalGraph::specs() const {
  std::vector<NodeSpec> out;
  for (NodeId id : ids_) out.push_back(specs_.at(id));
  return out;
}

bool is_causal_order(const CausalGraph& graph, const std::vector<NodeId>& order) {
  if (order.size() != graph.size()) return false;
  std::map<NodeId, std::size_t> pos;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!graph.contains(order[k]) || !pos.emplace(order[k], k).second) return false;
  }
  for (NodeId id : order)
    for (NodeId p : graph.parents(id))
      if (pos[p] >= pos[id]) return false;
  return true;
}

}  // namespace tmscm
