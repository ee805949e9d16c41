#pragma once

#include <cstddef>
#include <vector>

#include "tmscm/ad/tape.hpp"
#include "tmscm/rng.hpp"

namespace tmscm::ad {

/// Fully connected tanh network stored in a slice of a flat parameter vector.
/// Layer l holds W_l (out×in, row-major) followed by b_l (out).
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> widths, std::size_t offset);

  std::size_t input_dim() const { return widths_.front(); }
  std::size_t output_dim() const { return widths_.back(); }
  std::size_t layers() const { return widths_.size() - 1; }
  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t offset() const { return offset_; }
  std::size_t parameter_count() const { return count_; }
  std::size_t end() const { return offset_ + count_; }
  std::size_t weight_offset(std::size_t l) const { return weight_offsets_[l]; }
  std::size_t bias_offset(std::size_t l) const { return weight_offsets_[l] + widths_[l + 1] * widths_[l]; }

  /// Glorot-uniform weights, zero biases; the last layer is zeroed when asked
  /// so the network starts at a constant output.
  void initialize(Vec& theta, Rng& rng, bool zero_last = true) const;

  /// Optional per-layer 0/1 masks (out×in) multiplied into the weights.
  void set_masks(std::vector<Matrix> masks);
  const std::vector<Matrix>& masks() const { return masks_; }

  template <class P>
  typename P::value_type forward(const P& params, const typename P::value_type& x) const {
    typename P::value_type h = x;
    for (std::size_t l = 0; l < layers(); ++l) {
      auto w = params.get(weight_offset(l), widths_[l + 1], widths_[l]);
      if (!masks_.empty()) w = w * params.lift(masks_[l]);
      auto b = params.get(bias_offset(l), 1, widths_[l + 1]);
      h = linear(h, w, b);
      if (l + 1 < layers()) h = tanh(h);
    }
    return h;
  }

 private:
  std::vector<std::size_t> widths_;
  std::vector<std::size_t> weight_offsets_;
  std::vector<Matrix> masks_;
  std::size_t offset_ = 0;
  std::size_t count_ = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  Vec m, v;
  std::size_t step = 0;

  AdamState() = default;
  AdamState(std::size_t n, AdamConfig cfg) : config(cfg), m(n, 0.0), v(n, 0.0) {}
};

void adam_step(AdamState& state, Vec& params, const Vec& grads);

}  // namespace tmscm::ad
