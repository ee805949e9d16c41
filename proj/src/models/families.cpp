#include <cmath>

#include "tmscm/error.hpp"
#include "tmscm/models/model.hpp"
#include "tmscm/models/ode.hpp"

namespace tmscm::models {

namespace {

// Initial bias of TNME off-diagonal log-entries; exp(-4) ≈ 0.018 keeps the
// starting map close to the identity.
constexpr double kTnmeOffDiagonalInit = -4.0;

std::size_t dnme_width(std::size_t d) { return 2 * d; }
std::size_t tnme_width(std::size_t d) { return d * d + d; }

template <class T>
std::pair<T, T> dnme_inverse(const T& head, const T& z) {
  const std::size_t d = value_of(z).cols();
  const T a = cols(head, 0, d);
  return {(z - cols(head, d, d)) * exp(-a), row_sum(a) * -1.0};
}

bool all_finite(const Matrix& m) {
  for (double x : m.data())
    if (!std::isfinite(x)) return false;
  return true;
}

Matrix linear_no_bias(const Matrix& x, const Matrix& w) { return linear(x, w, Matrix()); }
Var linear_no_bias(Var x, Var w) { return linear(x, w); }

}  // namespace

DnmeModel::DnmeModel(const CausalGraph& graph, ModelConfig config) : MechanismModel(graph, std::move(config)) {
  build(dnme_width);
}

Matrix DnmeModel::node_forward(const Matrix& head, const Matrix& u) const {
  const std::size_t d = u.cols();
  return cols(head, d, d) + exp(cols(head, 0, d)) * u;
}

std::pair<Matrix, Matrix> DnmeModel::node_inverse(const Matrix& head, const Matrix& z) const {
  return dnme_inverse(head, z);
}

std::pair<Var, Var> DnmeModel::node_inverse(Var head, Var z) const { return dnme_inverse(head, z); }

TnmeModel::TnmeModel(const CausalGraph& graph, ModelConfig config) : MechanismModel(graph, std::move(config)) {
  require(config_.tnme_epsilon > 0, ErrorCode::ConfigError, "TNME epsilon must be positive");
  build(tnme_width);
}

void TnmeModel::initialize_core(Vec& theta, Rng& rng) const {
  MechanismModel::initialize_core(theta, rng);
  for (const auto& n : nets_) {
    const std::size_t bias = n.net.bias_offset(n.net.layers() - 1);
    for (std::size_t j = 0; j < n.dim; ++j)
      for (std::size_t k = 0; k < j; ++k) theta[bias + j * n.dim + k] = kTnmeOffDiagonalInit;
  }
}

Matrix TnmeModel::node_forward(const Matrix& head, const Matrix& u) const {
  const std::size_t d = u.cols();
  const double eps = config_.tnme_epsilon;
  Matrix z(u.rows(), d);
  for (std::size_t i = 0; i < u.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = head(i, d * d + j);
      for (std::size_t k = 0; k <= j; ++k) s += std::exp(head(i, j * d + k) + eps) * u(i, k);
      z(i, j) = s;
    }
  return z;
}

template <class T>
std::pair<T, T> TnmeModel::inverse_t(const T& head, const T& z) const {
  const std::size_t d = value_of(z).cols();
  const double eps = config_.tnme_epsilon;
  std::vector<T> u;
  std::vector<T> diag;
  // Forward substitution through tril(exp(A + ε)).
  for (std::size_t j = 0; j < d; ++j) {
    T acc = col(z, j) - col(head, d * d + j);
    for (std::size_t k = 0; k < j; ++k) acc = acc - exp(col(head, j * d + k) + eps) * u[k];
    const T ajj = col(head, j * d + j) + eps;
    u.push_back(acc * exp(-ajj));
    diag.push_back(ajj);
  }
  return {hcat(u), row_sum(hcat(diag)) * -1.0};
}

std::pair<Matrix, Matrix> TnmeModel::node_inverse(const Matrix& head, const Matrix& z) const {
  return inverse_t(head, z);
}

std::pair<Var, Var> TnmeModel::node_inverse(Var head, Var z) const { return inverse_t(head, z); }

CmsmModel::CmsmModel(const CausalGraph& graph, ModelConfig config) : TmScmModel(graph, std::move(config)) {
  const std::size_t diameter = cond_.diameter();
  const std::size_t layers = config_.layers == 0 ? diameter + 1 : config_.layers;
  require(layers >= diameter, ErrorCode::ConfigError,
          "CMSM needs at least " + std::to_string(diameter) + " layers (graph diameter)");
  stack_ = AffineArStack(causal_admissibility(cond_, vec_), layers, config_.hidden, 0);
  finalize_layout(stack_.end());
}

void CmsmModel::initialize_core(Vec& theta, Rng& rng) const { stack_.initialize(theta, rng); }

Matrix CmsmModel::core_forward(const Vec& theta, const Matrix& u) const { return stack_.forward(theta, u); }

std::pair<Matrix, Matrix> CmsmModel::core_inverse(const ad::PlainParams& p, const Matrix& z) const {
  auto [u, logdet] = stack_.inverse(p, z);
  return {u, row_sum(logdet)};
}

std::pair<Var, Var> CmsmModel::core_inverse(const ad::TapeParams& p, const Matrix& z) const {
  auto [u, logdet] = stack_.inverse(p, p.lift(z));
  return {u, row_sum(logdet)};
}

TvsmModel::TvsmModel(const CausalGraph& graph, ModelConfig config) : TmScmModel(graph, std::move(config)) {
  require(config_.ode_steps >= 1, ErrorCode::ConfigError, "TVSM needs at least one integration step");
  const std::size_t d = vec_.total_dim();
  mask_ = Matrix(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    const NodeId node = vec_.node_at_0(j);
    const auto an = cond_.ancestors(node);
    for (std::size_t k = 0; k < d; ++k) {
      const NodeId other = vec_.node_at_0(k);
      mask_(j, k) = (other == node && k <= j) || an.count(other) != 0;
    }
  }
  std::vector<std::size_t> widths{1};
  widths.insert(widths.end(), config_.hidden.begin(), config_.hidden.end());
  widths.push_back(3 * d * d + d);
  net_ = ad::Mlp(widths, 0);
  finalize_layout(net_.end());
}

void TvsmModel::initialize_core(Vec& theta, Rng& rng) const { net_.initialize(theta, rng, true); }

template <class P>
struct TvsmModel::Field {
  using T = typename P::value_type;
  T wm, b, ugm, diag;

  // (velocity, exact trace of ∂v/∂x) per row.
  std::pair<T, T> operator()(const T& x) const {
    const T h = tanh(linear(x, wm, b));
    return {linear_no_bias(h, ugm), row_sum((square(h) * -1.0 + 1.0) * diag)};
  }
};

template <class P>
TvsmModel::Field<P> TvsmModel::field(const P& p, double t) const {
  const std::size_t d = dim(), d2 = d * d;
  const auto out = net_.forward(p, p.lift(Matrix::scalar(t)));
  const auto w = reshape(cols(out, 0, d2), d, d);
  const auto b = cols(out, d2, d);
  const auto u = reshape(cols(out, d2 + d, d2), d, d);
  const auto g = sigmoid(reshape(cols(out, 2 * d2 + d, d2), d, d));
  const auto m = p.lift(mask_);
  return {w * m, b, u * g * m, diagonal(u) * diagonal(g) * diagonal(w)};
}

Matrix TvsmModel::velocity(const Vec& theta, const Matrix& x, double t) const {
  return field(ad::PlainParams(theta), t)(x).first;
}

namespace {

struct FiniteCheck {
  template <class T>
  void operator()(const T& x, const T& ell, std::size_t step) const {
    require(all_finite(value_of(x)) && all_finite(value_of(ell)), ErrorCode::NonFinite,
            "TVSM state became non-finite at step " + std::to_string(step));
  }
};

}  // namespace

Matrix TvsmModel::core_forward(const Vec& theta, const Matrix& u) const {
  const ad::PlainParams p(theta);
  auto field_at = [&](double t) { return field(p, t); };
  return rk4_with_trace(field_at, u, Matrix(u.rows(), 1, 0.0), 0.0, 1.0, config_.ode_steps, FiniteCheck{}).first;
}

template <class P>
std::pair<typename P::value_type, typename P::value_type> TvsmModel::inverse_impl(const P& p,
                                                                                 const Matrix& z) const {
  auto field_at = [&](double t) { return field(p, t); };
  // ℓ(1) = 0 and ℓ' = tr ∂v/∂x, so ℓ(0) = -∫₀¹ tr dt = log|det ∂Γ⁻¹/∂z|.
  return rk4_with_trace(field_at, p.lift(z), p.lift(Matrix(z.rows(), 1, 0.0)), 1.0, 0.0, config_.ode_steps,
                        FiniteCheck{});
}

std::pair<Matrix, Matrix> TvsmModel::core_inverse(const ad::PlainParams& p, const Matrix& z) const {
  return inverse_impl(p, z);
}

std::pair<Var, Var> TvsmModel::core_inverse(const ad::TapeParams& p, const Matrix& z) const {
  return inverse_impl(p, z);
}

}  // namespace tmscm::models
