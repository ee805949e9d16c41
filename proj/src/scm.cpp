#include "tmscm/scm.hpp"

#include <cmath>
#include <limits>

#include "tmscm/error.hpp"
#include "tmscm/parallel.hpp"

namespace tmscm {

Vec Mechanism::invert(std::span<const double> parents_flat, std::span<const double> v) const {
  require(invertible_in_noise, ErrorCode::NotInvertible, "mechanism of node " + to_string(node) + " is not invertible");
  require(v.size() == dim, ErrorCode::ShapeMismatch, "value length differs from node dimension");
  if (inverse) return (*inverse)(parents_flat, v);
  return tri::invert(noise_map(parents_flat), Vec(v.begin(), v.end()));
}

tri::TriangularMap Mechanism::noise_map(std::span<const double> parents_flat) const {
  require(signature.size() == dim && signature.is_tm(), ErrorCode::NotMonotone,
          "mechanism of node " + to_string(node) + " has no TM signature");
  Vec pa(parents_flat.begin(), parents_flat.end());
  auto eval_fn = eval;
  const std::size_t d = dim;
  auto comp = [eval_fn, pa, d](std::size_t j, std::span<const double> x) {
    Vec u(x.begin(), x.end());
    u.resize(d, 0.0);
    return eval_fn(pa, u)[j];
  };
  auto full = [eval_fn, pa](const Vec& u) { return eval_fn(pa, u); };
  std::optional<tri::ComponentInverseFn> inv;
  if (inverse) {
    // Analytic inverse is a whole-vector map; coordinate j of it only needs
    // the first j+1 observed coordinates because f is triangular.
    auto inv_fn = *inverse;
    inv = [eval_fn, inv_fn, pa, d](std::size_t j, std::span<const double> prefix, double z) {
      Vec u(prefix.begin(), prefix.end());
      u.resize(d, 0.0);
      Vec v = eval_fn(pa, u);
      v[j] = z;
      return inv_fn(pa, v)[j];
    };
  }
  return tri::TriangularMap(dim, signature, comp, inv, full);
}

Mechanism constant_mechanism(NodeId node, const Vec& value) {
  Mechanism m;
  m.node = node;
  m.dim = value.size();
  m.eval = [value](std::span<const double>, std::span<const double>) { return value; };
  m.signature = tri::Signature(std::vector<int>(value.size(), 0));
  m.invertible_in_noise = false;
  m.family = "constant";
  return m;
}

NodeNoise NodeNoise::point_mass(Vec value) {
  NodeNoise n;
  n.kind = Kind::PointMass;
  n.dim = value.size();
  n.point = std::move(value);
  return n;
}

NodeNoise NodeNoise::custom(std::size_t dim, std::function<Vec(Rng&)> sampler,
                            std::function<double(std::span<const double>)> density) {
  require(static_cast<bool>(sampler), ErrorCode::NoSampler, "custom noise needs a sampler");
  NodeNoise n;
  n.kind = Kind::Custom;
  n.dim = dim;
  n.sampler = std::move(sampler);
  n.density = std::move(density);
  return n;
}

NodeNoise NodeNoise::mixture(Vec weights, std::vector<Vec> means, std::vector<Vec> stddevs) {
  require(!weights.empty() && weights.size() == means.size() && means.size() == stddevs.size(), ErrorCode::ConfigError,
          "mixture needs matching weights, means and stddevs");
  double total = 0;
  for (double w : weights) {
    require(w >= 0, ErrorCode::ConfigError, "mixture weights must be nonnegative");
    total += w;
  }
  require(std::abs(total - 1.0) < 1e-9, ErrorCode::ConfigError, "mixture weights must sum to 1");
  NodeNoise n;
  n.kind = Kind::DiagonalGaussianMixture;
  n.dim = means.front().size();
  for (std::size_t k = 0; k < means.size(); ++k)
    require(means[k].size() == n.dim && stddevs[k].size() == n.dim, ErrorCode::ShapeMismatch,
            "mixture component dimension mismatch");
  n.weights = std::move(weights);
  n.means = std::move(means);
  n.stddevs = std::move(stddevs);
  return n;
}

Vec NodeNoise::sample(Rng& rng) const {
  switch (kind) {
    case Kind::StandardNormal: return rng.normal_vector(dim);
    case Kind::PointMass: return point;
    case Kind::DiagonalGaussianMixture: {
      double r = rng.uniform();
      std::size_t k = 0;
      while (k + 1 < weights.size() && r >= weights[k]) r -= weights[k++];
      Vec u(dim);
      for (std::size_t j = 0; j < dim; ++j) u[j] = means[k][j] + stddevs[k][j] * rng.normal();
      return u;
    }
    case Kind::Custom: return sampler(rng);
  }
  return {};
}

double NodeNoise::log_pdf(std::span<const double> u) const {
  require(u.size() == dim, ErrorCode::ShapeMismatch, "noise value has wrong length");
  constexpr double kLog2Pi = 1.8378770664093453;
  switch (kind) {
    case Kind::StandardNormal: {
      double s = 0;
      for (double x : u) s += x * x;
      return -0.5 * s - 0.5 * static_cast<double>(dim) * kLog2Pi;
    }
    case Kind::PointMass: {
      for (std::size_t j = 0; j < dim; ++j)
        if (u[j] != point[j]) return -std::numeric_limits<double>::infinity();
      return std::numeric_limits<double>::infinity();
    }
    case Kind::Custom:
      require(static_cast<bool>(density), ErrorCode::NoSampler, "custom noise has no density");
      return density(u);
    case Kind::DiagonalGaussianMixture: {
      Vec terms(weights.size());
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < weights.size(); ++k) {
        double s = std::log(weights[k]);
        for (std::size_t j = 0; j < dim; ++j) {
          const double z = (u[j] - means[k][j]) / stddevs[k][j];
          s += -0.5 * z * z - std::log(stddevs[k][j]) - 0.5 * kLog2Pi;
        }
        terms[k] = s;
        best = std::max(best, s);
      }
      double acc = 0;
      for (double t : terms) acc += std::exp(t - best);
      return best + std::log(acc);
    }
  }
  return 0;
}

Scm::Scm(CausalGraph graph, std::map<NodeId, Mechanism> mechanisms, ExogenousSpec exogenous)
    : graph_(std::move(graph)), mechanisms_(std::move(mechanisms)), exogenous_(std::move(exogenous)) {
  require(mechanisms_.size() == graph_.size(), ErrorCode::ConfigError, "one mechanism per node is required");
  for (NodeId id : graph_.nodes()) {
    auto it = mechanisms_.find(id);
    require(it != mechanisms_.end(), ErrorCode::UnknownNode, "missing mechanism for node " + to_string(id));
    const Mechanism& m = it->second;
    require(m.node == id, ErrorCode::ConfigError, "mechanism registered under the wrong node");
    require(m.dim == graph_.dim(id), ErrorCode::ShapeMismatch, "mechanism dimension differs from node dimension");
    if (m.family != "constant")
      require(m.parents == graph_.parents(id), ErrorCode::ConfigError,
              "mechanism parents differ from graph parents at node " + to_string(id));
  }
  for (const auto& [id, noise] : exogenous_.nodes)
    require(graph_.contains(id) && noise.dim == graph_.dim(id), ErrorCode::ShapeMismatch,
            "exogenous distribution does not match node " + to_string(id));
}

const Mechanism& Scm::mechanism(NodeId id) const {
  auto it = mechanisms_.find(id);
  require(it != mechanisms_.end(), ErrorCode::UnknownNode, "unknown node " + to_string(id));
  return it->second;
}

bool Scm::all_invertible() const {
  for (const auto& [id, m] : mechanisms_)
    if (!m.invertible_in_noise) return false;
  return true;
}

NodeValues Scm::sample_exogenous(Rng& rng) const {
  if (exogenous_.joint_sampler) return exogenous_.joint_sampler(rng);
  require(exogenous_.nodes.size() == graph_.size(), ErrorCode::NoSampler, "exogenous distribution cannot be sampled");
  NodeValues u;
  for (NodeId id : graph_.order()) u[id] = exogenous_.nodes.at(id).sample(rng);
  return u;
}

Vec gather(const NodeValues& values, const std::vector<NodeId>& ids) {
  Vec out;
  for (NodeId id : ids) {
    auto it = values.find(id);
    require(it != values.end(), ErrorCode::UnknownNode, "missing value for node " + to_string(id));
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

void check_shapes(const CausalGraph& graph, const NodeValues& values, const char* what) {
  require(values.size() == graph.size(), ErrorCode::ShapeMismatch, std::string(what) + ": expected one vector per node");
  for (const auto& [id, v] : values) {
    require(graph.contains(id), ErrorCode::UnknownNode, std::string(what) + ": unknown node " + to_string(id));
    require(v.size() == graph.dim(id), ErrorCode::ShapeMismatch,
            std::string(what) + ": wrong length at node " + to_string(id));
  }
}

void validate(const CausalGraph& graph, const Intervention& x) {
  for (const auto& [id, value] : x.targets) {
    require(graph.contains(id), ErrorCode::UnknownNode, "intervention on unknown node " + to_string(id));
    require(value.size() == graph.dim(id), ErrorCode::PartialIntervention,
            "intervention on node " + to_string(id) + " must set the whole node vector");
  }
}

NodeValues solve(const Scm& scm, const NodeValues& u) {
  check_shapes(scm.graph(), u, "exogenous values");
  NodeValues v;
  for (NodeId id : scm.graph().order()) {
    const Mechanism& m = scm.mechanism(id);
    const Vec pa = gather(v, m.parents);
    Vec out = m(pa, u.at(id));
    require(out.size() == m.dim, ErrorCode::ShapeMismatch, "mechanism returned a vector of the wrong length");
    v[id] = std::move(out);
  }
  return v;
}

Scm intervene(const Scm& scm, const Intervention& x) {
  validate(scm.graph(), x);
  std::map<NodeId, Mechanism> mechanisms = scm.mechanisms();
  for (const auto& [id, value] : x.targets) {
    Mechanism c = constant_mechanism(id, value);
    c.parents = scm.mechanism(id).parents;
    mechanisms[id] = std::move(c);
  }
  // The graph keeps its edges; constant mechanisms ignore their parents, so
  // the submodel stays recursive under the same causal order.
  return Scm(scm.graph(), std::move(mechanisms), scm.exogenous());
}

NodeValues potential_response(const Scm& scm, const Intervention& x, const NodeValues& u) {
  if (x.empty()) return solve(scm, u);
  return solve(intervene(scm, x), u);
}

double fixed_point_residual(const Scm& scm, const NodeValues& u, const NodeValues& v) {
  double worst = 0;
  for (NodeId id : scm.graph().order()) {
    const Mechanism& m = scm.mechanism(id);
    const Vec out = m(gather(v, m.parents), u.at(id));
    for (std::size_t j = 0; j < out.size(); ++j) worst = std::max(worst, std::abs(out[j] - v.at(id)[j]));
  }
  return worst;
}

std::vector<CounterfactualSample> sample_counterfactual_joint(const Scm& scm, const std::vector<Intervention>& xs,
                                                              std::size_t n, std::uint64_t seed) {
  require(scm.exogenous().joint_sampler || scm.exogenous().nodes.size() == scm.graph().size(), ErrorCode::NoSampler,
          "exogenous distribution cannot be sampled");
  std::vector<Scm> submodels;
  submodels.reserve(xs.size());
  for (const auto& x : xs) submodels.push_back(intervene(scm, x));

  std::vector<CounterfactualSample> out(n);
  parallel_for(n, [&](std::size_t s) {
    Rng rng = Rng::stream(seed, s);
    CounterfactualSample sample;
    sample.u = scm.sample_exogenous(rng);
    for (const Scm& sub : submodels) sample.responses.push_back(solve(sub, sample.u));
    out[s] = std::move(sample);
  });
  return out;
}

}  // namespace tmscm
