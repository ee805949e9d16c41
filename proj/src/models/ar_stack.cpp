#include "tmscm/models/ar_stack.hpp"

#include <algorithm>
#include <cmath>

#include "tmscm/error.hpp"

namespace tmscm::models {

Admissibility causal_admissibility(const CausalGraph& graph, const Vectorization& vec) {
  const std::size_t d = vec.total_dim();
  Admissibility adm(d, std::vector<bool>(d, false));
  for (std::size_t t = 0; t < d; ++t) {
    const NodeId node = vec.node_at_0(t);
    const auto& pa = graph.parents(node);
    for (std::size_t s = 0; s < t; ++s) {
      const NodeId other = vec.node_at_0(s);
      adm[t][s] = other == node || std::find(pa.begin(), pa.end(), other) != pa.end();
    }
  }
  return adm;
}

Admissibility within_node_admissibility(const Vectorization& vec) {
  const std::size_t d = vec.total_dim();
  Admissibility adm(d, std::vector<bool>(d, false));
  for (std::size_t t = 0; t < d; ++t)
    for (std::size_t s = 0; s < t; ++s) adm[t][s] = vec.node_at_0(s) == vec.node_at_0(t);
  return adm;
}

namespace {

bool subset(const std::vector<bool>& a, const std::vector<bool>& b) {
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k] && !b[k]) return false;
  return true;
}

}  // namespace

std::vector<Matrix> autoregressive_masks(const Admissibility& adm, const std::vector<std::size_t>& hidden) {
  const std::size_t d = adm.size();
  require(d > 0, ErrorCode::ConfigError, "autoregressive stack over zero coordinates");
  std::vector<Matrix> masks;
  // Hidden unit k is owned by coordinate k mod D and may only read what its owner may.
  std::size_t prev = d;
  bool from_input = true;
  for (std::size_t width : hidden) {
    Matrix m(width, prev);
    for (std::size_t k = 0; k < width; ++k)
      for (std::size_t j = 0; j < prev; ++j)
        m(k, j) = from_input ? adm[k % d][j] : subset(adm[j % d], adm[k % d]);
    masks.push_back(std::move(m));
    prev = width;
    from_input = false;
  }
  Matrix out(2 * d, prev);
  for (std::size_t o = 0; o < 2 * d; ++o)
    for (std::size_t j = 0; j < prev; ++j)
      out(o, j) = from_input ? adm[o % d][j] : subset(adm[j % d], adm[o % d]);
  masks.push_back(std::move(out));
  return masks;
}

AffineArStack::AffineArStack(Admissibility adm, std::size_t layers, std::vector<std::size_t> hidden,
                             std::size_t offset)
    : dim_(adm.size()), offset_(offset), end_(offset) {
  require(layers >= 1, ErrorCode::ConfigError, "autoregressive stack needs at least one layer");
  const auto masks = autoregressive_masks(adm, hidden);
  std::vector<std::size_t> widths{dim_};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(2 * dim_);
  for (std::size_t l = 0; l < layers; ++l) {
    ad::Mlp net(widths, end_);
    net.set_masks(masks);
    end_ = net.end();
    nets_.push_back(std::move(net));
  }
}

void AffineArStack::initialize(Vec& theta, Rng& rng) const {
  for (const auto& net : nets_) net.initialize(theta, rng, true);
}

Matrix AffineArStack::forward(const Vec& theta, const Matrix& x) const {
  require(x.cols() == dim_, ErrorCode::DimMismatch, "stack input has the wrong dimension");
  const ad::PlainParams p(theta);
  Matrix cur = x;
  // T_L is applied first.
  for (std::size_t l = nets_.size(); l-- > 0;) {
    Matrix y(cur.rows(), dim_);
    for (std::size_t t = 0; t < dim_; ++t) {
      const Matrix out = nets_[l].forward(p, y);
      for (std::size_t i = 0; i < y.rows(); ++i) y(i, t) = out(i, dim_ + t) + std::exp(out(i, t)) * cur(i, t);
    }
    cur = std::move(y);
  }
  return cur;
}

template <class P>
std::pair<typename P::value_type, typename P::value_type> AffineArStack::inverse_impl(const P& p,
                                                                                     typename P::value_type y) const {
  using T = typename P::value_type;
  T logdet = p.lift(Matrix(value_of(y).rows(), dim_, 0.0));
  for (const auto& net : nets_) {
    const T out = net.forward(p, y);
    const T s = cols(out, 0, dim_);
    y = (y - cols(out, dim_, dim_)) * exp(-s);
    logdet = logdet - s;
  }
  return {y, logdet};
}

std::pair<Matrix, Matrix> AffineArStack::inverse(const ad::PlainParams& p, const Matrix& y) const {
  require(y.cols() == dim_, ErrorCode::DimMismatch, "stack input has the wrong dimension");
  return inverse_impl(p, y);
}

std::pair<Var, Var> AffineArStack::inverse(const ad::TapeParams& p, Var y) const {
  require(y.cols() == dim_, ErrorCode::DimMismatch, "stack input has the wrong dimension");
  return inverse_impl(p, y);
}

}  // namespace tmscm::models
