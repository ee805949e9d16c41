#pragma once

#include <vector>

#include "tmscm/ad/matrix.hpp"
#include "tmscm/scm.hpp"
#include "tmscm/vectorize.hpp"

namespace tmscm::inference {

using ad::Matrix;

struct PprOptions {
  /// Allowed drift of already-fixed coordinates, scaled by 1 + |value|.
  /// Exact-inverse maps stay far below it; ODE-based maps use part of it.
  double prefix_tolerance = 1e-6;
};

/// u = Γ⁻¹(v).
Vec abduct(const FlatSolutionMap& map, const Vec& v);
Matrix abduct(const FlatSolutionMap& map, const Matrix& v);

/// V_[x](u) from the flat solution map alone: walks the flat coordinates in
/// order, and at every intervened coordinate t replaces u_t by the value
/// whose image puts x_t at t given the already-fixed prefix. Intervened
/// coordinates are returned exactly as given.
Vec pseudo_potential_response(const FlatSolutionMap& map, const Vec& u, const Intervention& x,
                              const PprOptions& opts = {});
/// Row i is answered under xs[i].
Matrix pseudo_potential_response(const FlatSolutionMap& map, const Matrix& u, const std::vector<Intervention>& xs,
                                 const PprOptions& opts = {});
NodeValues pseudo_potential_response(const FlatSolutionMap& map, const NodeValues& u, const Intervention& x,
                                     const PprOptions& opts = {});

/// Abduction, action, prediction for a factual observation.
Vec counterfactual_outcome(const FlatSolutionMap& map, const Vec& v, const Intervention& x,
                           const PprOptions& opts = {});
Matrix counterfactual_outcome(const FlatSolutionMap& map, const Matrix& v, const std::vector<Intervention>& xs,
                              const PprOptions& opts = {});

}  // namespace tmscm::inference
