#pragma once

#include "welfarechoice/core.hpp"
#include "welfarechoice/welfare.hpp"

#include <vector>

namespace welfarechoice {

// Operators building new welfare models from existing ones. All results are
// lazy wrappers around the inner models.

/// w(mu) = eta * inner(mu / eta), q(mu) = inner_q(mu / eta).
ModelPtr scale(ModelPtr inner, double eta);

struct MixtureComponent {
  ModelPtr model;
  std::vector<int> indices;  // zero-based alternatives seen by this component, in order
  double weight = 0.0;
};

/// w(mu) = sum_k weight_k * w_k(mu restricted to indices_k). The index sets
/// must cover 0..n-1 and may overlap; weights are nonnegative and sum to 1.
ModelPtr mix(std::vector<MixtureComponent> components, std::size_t n);

/// w(mu) = inner(A mu), q(mu) = A^T inner_q(A mu) for a nonnegative
/// row-stochastic m x n matrix A (m = inner size).
ModelPtr cross(ModelPtr inner, const Matrix& A);

}  // namespace welfarechoice
