#include "tmscm/inference.hpp"

#include <cmath>
#include <optional>

#include "tmscm/error.hpp"

namespace tmscm::inference {

namespace {

// Per-row target value at every flat coordinate, if intervened.
std::vector<std::vector<std::optional<double>>> flat_targets(const Vectorization& vec,
                                                             const std::vector<Intervention>& xs) {
  std::vector<std::vector<std::optional<double>>> out(xs.size(),
                                                      std::vector<std::optional<double>>(vec.total_dim()));
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (const auto& [id, value] : xs[i].targets) {
      require(vec.contains(id), ErrorCode::UnknownNode, "intervention on unknown node " + to_string(id));
      require(value.size() == vec.dim(id), ErrorCode::PartialIntervention,
              "intervention on node " + to_string(id) + " must set the whole node vector");
      for (std::size_t j = 0; j < value.size(); ++j) out[i][vec.offset_0(id) + j] = value[j];
    }
  return out;
}

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k)
    std::copy(m.row_span(rows[k]).begin(), m.row_span(rows[k]).end(), out.row_span(k).begin());
  return out;
}

}  // namespace

Vec abduct(const FlatSolutionMap& map, const Vec& v) { return map.inverse(v); }

Matrix abduct(const FlatSolutionMap& map, const Matrix& v) { return map.inverse_batch(v); }

Matrix pseudo_potential_response(const FlatSolutionMap& map, const Matrix& u, const std::vector<Intervention>& xs,
                                 const PprOptions& opts) {
  const Vectorization& vec = map.vectorization();
  const std::size_t d = vec.total_dim();
  require(d > 0, ErrorCode::ConfigError, "solution map has no vectorization");
  require(u.cols() == d, ErrorCode::DimMismatch, "exogenous rows have the wrong dimension");
  require(xs.size() == u.rows(), ErrorCode::ShapeMismatch, "one intervention per row is required");
  const auto targets = flat_targets(vec, xs);

  Matrix ustar = u;
  Matrix v = map.forward_batch(ustar);  // Γ(u*) for the current u*
  for (std::size_t t = 0; t < d; ++t) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < u.rows(); ++i)
      if (targets[i][t]) rows.push_back(i);
    if (rows.empty()) continue;
    // Γ(u*) with coordinate t overwritten; coordinates after t do not matter
    // to Γ⁻¹ at t by triangularity.
    Matrix w = take_rows(v, rows);
    for (std::size_t k = 0; k < rows.size(); ++k) w(k, t) = *targets[rows[k]][t];
    const Matrix back = map.inverse_batch(w);
    for (std::size_t k = 0; k < rows.size(); ++k) ustar(rows[k], t) = back(k, t);
    const Matrix fresh = map.forward_batch(take_rows(ustar, rows));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      for (std::size_t s = 0; s < t; ++s) {
        const double before = v(rows[k], s);
        require(std::abs(fresh(k, s) - before) <= opts.prefix_tolerance * (1 + std::abs(before)),
                ErrorCode::PrefixViolation,
                "coordinate " + std::to_string(s) + " moved while fixing coordinate " + std::to_string(t) +
                    "; the map is not triangular");
      }
      std::copy(fresh.row_span(k).begin(), fresh.row_span(k).end(), v.row_span(rows[k]).begin());
    }
  }
  for (std::size_t i = 0; i < u.rows(); ++i)
    for (std::size_t t = 0; t < d; ++t)
      if (targets[i][t]) v(i, t) = *targets[i][t];
  return v;
}

Vec pseudo_potential_response(const FlatSolutionMap& map, const Vec& u, const Intervention& x,
                              const PprOptions& opts) {
  return pseudo_potential_response(map, Matrix::row(u), {x}, opts).storage();
}

NodeValues pseudo_potential_response(const FlatSolutionMap& map, const NodeValues& u, const Intervention& x,
                                     const PprOptions& opts) {
  const Vectorization& vec = map.vectorization();
  return vec.unflatten(pseudo_potential_response(map, vec.flatten(u), x, opts));
}

Vec counterfactual_outcome(const FlatSolutionMap& map, const Vec& v, const Intervention& x, const PprOptions& opts) {
  return pseudo_potential_response(map, abduct(map, v), x, opts);
}

Matrix counterfactual_outcome(const FlatSolutionMap& map, const Matrix& v, const std::vector<Intervention>& xs,
                              const PprOptions& opts) {
  return pseudo_potential_response(map, abduct(map, v), xs, opts);
}

}  // namespace tmscm::inference
