#include "tmscm/vectorize.hpp"

#include <algorithm>
#include <functional>

#include "tmscm/error.hpp"
#include "tmscm/parallel.hpp"

namespace tmscm {

Vectorization::Vectorization(const CausalGraph& graph, std::vector<NodeId> order) : order_(std::move(order)) {
  require(is_causal_order(graph, order_), ErrorCode::OrderMismatch, "vectorization order violates parent precedence");
  for (NodeId id : order_) {
    const std::size_t d = graph.dim(id);
    dims_[id] = d;
    offsets_[id] = total_;
    for (std::size_t j = 0; j < d; ++j) owner_.push_back(id);
    total_ += d;
  }
}

std::size_t Vectorization::offset(NodeId id) const {
  auto it = offsets_.find(id);
  require(it != offsets_.end(), ErrorCode::UnknownNode, "node " + to_string(id) + " is not vectorized");
  return it->second + 1;
}

std::size_t Vectorization::index(NodeId id, std::size_t j) const {
  require(j >= 1 && j <= dim(id), ErrorCode::BadRange, "coordinate index out of range");
  return offset(id) + j - 1;
}

std::pair<NodeId, std::size_t> Vectorization::inverse_index(std::size_t t) const {
  require(t >= 1 && t <= total_, ErrorCode::BadRange, "flat index out of range");
  const NodeId id = owner_[t - 1];
  return {id, t - offset(id) + 1};
}

Vec Vectorization::flatten(const NodeValues& values) const {
  require(values.size() == order_.size(), ErrorCode::ShapeMismatch, "flatten: expected one vector per node");
  Vec out(total_);
  for (NodeId id : order_) {
    auto it = values.find(id);
    require(it != values.end(), ErrorCode::ShapeMismatch, "flatten: missing node " + to_string(id));
    require(it->second.size() == dims_.at(id), ErrorCode::ShapeMismatch, "flatten: wrong length at node " + to_string(id));
    std::copy(it->second.begin(), it->second.end(), out.begin() + static_cast<std::ptrdiff_t>(offsets_.at(id)));
  }
  return out;
}

NodeValues Vectorization::unflatten(const Vec& flat) const {
  require(flat.size() == total_, ErrorCode::ShapeMismatch, "unflatten: wrong flat length");
  NodeValues out;
  for (NodeId id : order_) {
    const auto begin = flat.begin() + static_cast<std::ptrdiff_t>(offsets_.at(id));
    out[id] = Vec(begin, begin + static_cast<std::ptrdiff_t>(dims_.at(id)));
  }
  return out;
}

namespace {

ad::Matrix map_rows(const ad::Matrix& in, const std::function<Vec(const Vec&)>& f) {
  ad::Matrix out(in.rows(), in.cols());
  parallel_for(in.rows(), [&](std::size_t i) {
    const Vec row(in.row_span(i).begin(), in.row_span(i).end());
    const Vec r = f(row);
    require(r.size() == in.cols(), ErrorCode::ShapeMismatch, "flat map changed the dimension");
    std::copy(r.begin(), r.end(), out.row_span(i).begin());
  });
  return out;
}

}  // namespace

ad::Matrix FlatSolutionMap::forward_batch(const ad::Matrix& u) const {
  return map_rows(u, [this](const Vec& x) { return forward(x); });
}

ad::Matrix FlatSolutionMap::inverse_batch(const ad::Matrix& v) const {
  return map_rows(v, [this](const Vec& x) { return inverse(x); });
}

ScmSolutionMap::ScmSolutionMap(const Scm& scm) : ScmSolutionMap(scm, scm.graph().order()) {}

ScmSolutionMap::ScmSolutionMap(const Scm& scm, std::vector<NodeId> order)
    : scm_(scm), vec_(scm.graph(), std::move(order)) {}

Vec ScmSolutionMap::forward(const Vec& u) const { return vec_.flatten(solve(scm_, vec_.unflatten(u))); }

Vec ScmSolutionMap::inverse(const Vec& v) const {
  const NodeValues values = vec_.unflatten(v);
  NodeValues u;
  for (NodeId id : vec_.order()) {
    const Mechanism& m = scm_.mechanism(id);
    u[id] = m.invert(gather(values, m.parents), values.at(id));
  }
  return vec_.flatten(u);
}

}  // namespace tmscm
