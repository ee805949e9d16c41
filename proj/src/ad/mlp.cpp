#include "tmscm/ad/mlp.hpp"

#include <cmath>

#include "tmscm/error.hpp"

namespace tmscm::ad {

Mlp::Mlp(std::vector<std::size_t> widths, std::size_t offset) : widths_(std::move(widths)), offset_(offset) {
  require(widths_.size() >= 2, ErrorCode::ConfigError, "an MLP needs at least input and output widths");
  std::size_t at = offset_;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    weight_offsets_.push_back(at);
    at += widths_[l + 1] * widths_[l] + widths_[l + 1];
  }
  count_ = at - offset_;
}

void Mlp::initialize(Vec& theta, Rng& rng, bool zero_last) const {
  require(end() <= theta.size(), ErrorCode::BadRange, "parameter vector too short for MLP");
  for (std::size_t l = 0; l < layers(); ++l) {
    const std::size_t in = widths_[l], out = widths_[l + 1];
    const bool last = l + 1 == layers();
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t k = 0; k < in * out; ++k)
      theta[weight_offset(l) + k] = (last && zero_last) ? 0.0 : rng.uniform(-limit, limit);
    for (std::size_t k = 0; k < out; ++k) theta[bias_offset(l) + k] = 0.0;
  }
}

void Mlp::set_masks(std::vector<Matrix> masks) {
  require(masks.size() == layers(), ErrorCode::ShapeMismatch, "one mask per layer expected");
  for (std::size_t l = 0; l < layers(); ++l)
    require(masks[l].rows() == widths_[l + 1] && masks[l].cols() == widths_[l], ErrorCode::ShapeMismatch,
            "mask shape differs from layer shape");
  masks_ = std::move(masks);
}

void adam_step(AdamState& state, Vec& params, const Vec& grads) {
  require(params.size() == grads.size() && params.size() == state.m.size(), ErrorCode::ShapeMismatch,
          "adam: parameter, gradient and state sizes differ");
  const auto& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    state.m[k] = c.beta1 * state.m[k] + (1.0 - c.beta1) * grads[k];
    state.v[k] = c.beta2 * state.v[k] + (1.0 - c.beta2) * grads[k] * grads[k];
    params[k] -= c.lr * (state.m[k] / bc1) / (std::sqrt(state.v[k] / bc2) + c.eps);
  }
}

}  // namespace tmscm::ad
