#include "tmscm/models/model.hpp"

#include <cmath>

#include "tmscm/error.hpp"

namespace tmscm::models {

std::string to_string(Family family) {
  switch (family) {
    case Family::Dnme: return "dnme";
    case Family::Tnme: return "tnme";
    case Family::Cmsm: return "cmsm";
    case Family::Tvsm: return "tvsm";
  }
  return "?";
}

Family family_from_string(const std::string& name) {
  for (auto f : {Family::Dnme, Family::Tnme, Family::Cmsm, Family::Tvsm})
    if (to_string(f) == name) return f;
  fail(ErrorCode::ConfigError, "unknown model family '" + name + "'");
}

namespace {

CausalGraph make_conditioning_graph(const CausalGraph& graph, bool order_only) {
  if (!order_only) return graph;
  std::map<NodeId, std::size_t> dims;
  for (NodeId id : graph.nodes()) dims[id] = graph.dim(id);
  return CausalGraph::complete_from_order(graph.order(), dims);
}

}  // namespace

std::unique_ptr<TmScmModel> TmScmModel::create(const CausalGraph& graph, const ModelConfig& config) {
  switch (config.family) {
    case Family::Dnme: return std::make_unique<DnmeModel>(graph, config);
    case Family::Tnme: return std::make_unique<TnmeModel>(graph, config);
    case Family::Cmsm: return std::make_unique<CmsmModel>(graph, config);
    case Family::Tvsm: return std::make_unique<TvsmModel>(graph, config);
  }
  fail(ErrorCode::ConfigError, "unknown model family");
}

TmScmModel::TmScmModel(const CausalGraph& graph, ModelConfig config)
    : graph_(graph),
      cond_(make_conditioning_graph(graph, config.order_only)),
      vec_(graph),
      config_(std::move(config)),
      mean_(vec_.total_dim(), 0.0),
      scale_(vec_.total_dim(), 1.0) {
  require(vec_.total_dim() > 0, ErrorCode::ConfigError, "model over an empty graph");
}

void TmScmModel::finalize_layout(std::size_t core_count) {
  core_count_ = core_count;
  exo_ = ExogenousModel(vec_, config_.exogenous, core_count_);
  theta_.assign(exo_.end(), 0.0);
}

void TmScmModel::set_parameters(Vec theta) {
  require(theta.size() == theta_.size(), ErrorCode::ShapeMismatch, "parameter vector has the wrong length");
  theta_ = std::move(theta);
}

void TmScmModel::initialize(std::uint64_t seed) {
  Rng rng(seed);
  std::fill(theta_.begin(), theta_.end(), 0.0);
  initialize_core(theta_, rng);
  exo_.initialize(theta_, rng);
}

void TmScmModel::set_standardization(Vec mean, Vec scale) {
  require(mean.size() == dim() && scale.size() == dim(), ErrorCode::DimMismatch, "standardization has the wrong size");
  for (double s : scale) require(s > 0 && std::isfinite(s), ErrorCode::ConfigError, "standardization scale must be positive");
  mean_ = std::move(mean);
  scale_ = std::move(scale);
}

void TmScmModel::fit_standardization(const Matrix& v) {
  require(v.cols() == dim(), ErrorCode::DimMismatch, "data have the wrong dimension");
  require(v.rows() >= 2, ErrorCode::DegenerateDistribution, "standardization needs two rows");
  Vec mean(dim(), 0.0), scale(dim(), 0.0);
  const double n = static_cast<double>(v.rows());
  for (std::size_t i = 0; i < v.rows(); ++i)
    for (std::size_t j = 0; j < dim(); ++j) mean[j] += v(i, j) / n;
  for (std::size_t i = 0; i < v.rows(); ++i)
    for (std::size_t j = 0; j < dim(); ++j) scale[j] += (v(i, j) - mean[j]) * (v(i, j) - mean[j]) / (n - 1);
  for (double& s : scale) s = s > 0 ? std::sqrt(s) : 1.0;
  set_standardization(std::move(mean), std::move(scale));
}

Matrix TmScmModel::standardize(const Matrix& v) const {
  require(v.cols() == dim(), ErrorCode::DimMismatch, "data have the wrong dimension");
  Matrix z(v.rows(), v.cols());
  for (std::size_t i = 0; i < v.rows(); ++i)
    for (std::size_t j = 0; j < v.cols(); ++j) z(i, j) = (v(i, j) - mean_[j]) / scale_[j];
  return z;
}

Matrix TmScmModel::destandardize(const Matrix& z) const {
  Matrix v(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) v(i, j) = mean_[j] + scale_[j] * z(i, j);
  return v;
}

double TmScmModel::log_scale_sum() const {
  double s = 0;
  for (double x : scale_) s += std::log(x);
  return s;
}

Vec TmScmModel::forward(const Vec& u) const { return forward_batch(Matrix::row(u)).storage(); }

Vec TmScmModel::inverse(const Vec& v) const { return inverse_batch(Matrix::row(v)).storage(); }

Matrix TmScmModel::forward_batch(const Matrix& u) const {
  require(u.cols() == dim(), ErrorCode::DimMismatch, "exogenous rows have the wrong dimension");
  return destandardize(core_forward(theta_, u));
}

Matrix TmScmModel::inverse_batch(const Matrix& v) const {
  return core_inverse(ad::PlainParams(theta_), standardize(v)).first;
}

Matrix TmScmModel::log_det_inverse(const Matrix& v) const {
  return core_inverse(ad::PlainParams(theta_), standardize(v)).second - log_scale_sum();
}

Matrix TmScmModel::log_prob(const Matrix& v) const { return log_prob_at(theta_, v); }

Matrix TmScmModel::log_prob_at(const Vec& theta, const Matrix& v) const {
  const ad::PlainParams p(theta);
  const auto [u, logdet] = core_inverse(p, standardize(v));
  return exo_.log_prob(p, u) + logdet - log_scale_sum();
}

namespace {

void check_rows(const Matrix& lp) {
  for (std::size_t i = 0; i < lp.rows(); ++i)
    require(std::isfinite(lp[i]), ErrorCode::NonFinite, "non-finite log-likelihood at batch row " + std::to_string(i));
}

}  // namespace

double TmScmModel::nll(const Matrix& v) const {
  require(v.rows() > 0, ErrorCode::ShapeMismatch, "nll of an empty batch");
  const Matrix lp = log_prob(v);
  check_rows(lp);
  double s = 0;
  for (std::size_t i = 0; i < lp.rows(); ++i) s += lp[i];
  return -s / static_cast<double>(lp.rows());
}

ad::GradResult TmScmModel::nll_grad(const Matrix& v) const { return nll_grad(v, theta_); }

ad::GradResult TmScmModel::nll_grad(const Matrix& v, const Vec& theta) const {
  require(v.rows() > 0, ErrorCode::ShapeMismatch, "nll of an empty batch");
  require(theta.size() == theta_.size(), ErrorCode::ShapeMismatch, "parameter vector has the wrong length");
  const Matrix z = standardize(v);
  const double log_scale = log_scale_sum();
  ad::GradResult r = ad::grad(
      [&](ad::TapeParams& p) {
        const auto [u, logdet] = core_inverse(p, z);
        return ad::mean(exo_.log_prob(p, u) + logdet) * -1.0 + log_scale;
      },
      theta);
  if (!std::isfinite(r.value)) check_rows(log_prob_at(theta, v));
  require(std::isfinite(r.value), ErrorCode::NonFinite, "non-finite log-likelihood");
  for (double g : r.gradient) require(std::isfinite(g), ErrorCode::NonFinite, "non-finite gradient");
  return r;
}

Matrix TmScmModel::sample_exogenous(std::size_t n, std::uint64_t seed) const { return exo_.sample(theta_, n, seed); }

Matrix TmScmModel::sample(std::size_t n, std::uint64_t seed) const { return forward_batch(sample_exogenous(n, seed)); }

// Mechanism-based families.

MechanismModel::MechanismModel(const CausalGraph& graph, ModelConfig config) : TmScmModel(graph, std::move(config)) {}

void MechanismModel::build(std::size_t (*head_width)(std::size_t)) {
  std::size_t offset = 0;
  for (NodeId id : vec_.order()) {
    NodeNet n;
    n.node = id;
    n.begin = vec_.offset_0(id);
    n.dim = vec_.dim(id);
    std::size_t pdim = 0;
    for (NodeId p : cond_.parents(id)) {
      n.parent_blocks.emplace_back(vec_.offset_0(p), vec_.dim(p));
      pdim += vec_.dim(p);
    }
    // Root nodes read a constant zero column so every head has an input.
    std::vector<std::size_t> widths{std::max<std::size_t>(pdim, 1)};
    widths.insert(widths.end(), config_.hidden.begin(), config_.hidden.end());
    widths.push_back(head_width(n.dim));
    n.net = ad::Mlp(widths, offset);
    offset = n.net.end();
    nets_.push_back(std::move(n));
  }
  finalize_layout(offset);
}

const MechanismModel::NodeNet& MechanismModel::node_net(NodeId node) const {
  for (const auto& n : nets_)
    if (n.node == node) return n;
  fail(ErrorCode::UnknownNode, "model has no node " + tmscm::to_string(node));
}

Matrix MechanismModel::parent_input(const NodeNet& n, const Matrix& z) const {
  if (n.parent_blocks.empty()) return Matrix(z.rows(), 1, 0.0);
  std::vector<Matrix> parts;
  for (const auto& [begin, d] : n.parent_blocks) parts.push_back(cols(z, begin, d));
  return hcat(parts);
}

Matrix MechanismModel::head(const Vec& theta, NodeId node, const Matrix& parents) const {
  const NodeNet& n = node_net(node);
  const Matrix x = parents.cols() == 0 ? Matrix(parents.rows(), 1, 0.0) : parents;
  require(x.cols() == n.net.input_dim(), ErrorCode::DimMismatch, "parent rows have the wrong dimension");
  return n.net.forward(ad::PlainParams(theta), x);
}

void MechanismModel::initialize_core(Vec& theta, Rng& rng) const {
  for (const auto& n : nets_) n.net.initialize(theta, rng, true);
}

Matrix MechanismModel::core_forward(const Vec& theta, const Matrix& u) const {
  const ad::PlainParams p(theta);
  Matrix z(u.rows(), u.cols());
  for (const auto& n : nets_) {
    const Matrix h = n.net.forward(p, parent_input(n, z));
    const Matrix zi = node_forward(h, cols(u, n.begin, n.dim));
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = 0; j < n.dim; ++j) z(i, n.begin + j) = zi(i, j);
  }
  return z;
}

template <class P>
std::pair<typename P::value_type, typename P::value_type> MechanismModel::inverse_impl(const P& p,
                                                                                      const Matrix& z) const {
  using T = typename P::value_type;
  std::vector<T> parts;
  T logdet = p.lift(Matrix(z.rows(), 1, 0.0));
  // Every parent value is observed, so all nodes invert independently.
  for (const auto& n : nets_) {
    const T h = n.net.forward(p, p.lift(parent_input(n, z)));
    auto [ui, ld] = node_inverse(h, p.lift(cols(z, n.begin, n.dim)));
    parts.push_back(ui);
    logdet = logdet + ld;
  }
  return {hcat(parts), logdet};
}

std::pair<Matrix, Matrix> MechanismModel::core_inverse(const ad::PlainParams& p, const Matrix& z) const {
  return inverse_impl(p, z);
}

std::pair<Var, Var> MechanismModel::core_inverse(const ad::TapeParams& p, const Matrix& z) const {
  return inverse_impl(p, z);
}

std::optional<Scm> MechanismModel::as_scm() const {
  std::shared_ptr<const MechanismModel> self(static_cast<MechanismModel*>(clone().release()));
  std::map<NodeId, Mechanism> mechanisms;
  ExogenousSpec exo;
  for (const auto& n : nets_) {
    Vec pm, ps;
    for (const auto& [begin, d] : n.parent_blocks)
      for (std::size_t j = 0; j < d; ++j) {
        pm.push_back(mean_[begin + j]);
        ps.push_back(scale_[begin + j]);
      }
    const Vec m(mean_.begin() + static_cast<std::ptrdiff_t>(n.begin),
                mean_.begin() + static_cast<std::ptrdiff_t>(n.begin + n.dim));
    const Vec s(scale_.begin() + static_cast<std::ptrdiff_t>(n.begin),
                scale_.begin() + static_cast<std::ptrdiff_t>(n.begin + n.dim));
    const NodeId node = n.node;
    auto head_at = [self, node, pm, ps](std::span<const double> parents) {
      require(parents.size() == pm.size(), ErrorCode::DimMismatch, "parent values have the wrong dimension");
      Matrix zp(1, pm.size());
      for (std::size_t j = 0; j < pm.size(); ++j) zp[j] = (parents[j] - pm[j]) / ps[j];
      return self->head(self->parameters(), node, zp);
    };
    Mechanism mech;
    mech.node = node;
    mech.dim = n.dim;
    mech.parents = cond_.parents(node);
    mech.signature = tri::Signature::increasing(n.dim);
    mech.invertible_in_noise = true;
    mech.family = to_string(config_.family);
    mech.eval = [self, head_at, m, s](std::span<const double> parents, std::span<const double> u) {
      const Matrix z = self->node_forward(head_at(parents), Matrix::row(u));
      Vec v(m.size());
      for (std::size_t j = 0; j < v.size(); ++j) v[j] = m[j] + s[j] * z[j];
      return v;
    };
    mech.inverse = [self, head_at, m, s](std::span<const double> parents, std::span<const double> v) {
      Matrix z(1, m.size());
      for (std::size_t j = 0; j < m.size(); ++j) z[j] = (v[j] - m[j]) / s[j];
      return self->node_inverse(head_at(parents), z).first.storage();
    };
    mechanisms.emplace(node, std::move(mech));
    exo.nodes.emplace(node, exo_.node_noise(theta_, node));
  }
  return Scm(cond_, std::move(mechanisms), std::move(exo));
}

}  // namespace tmscm::models
