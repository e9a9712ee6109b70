#pragma once

#include "welfarechoice/core.hpp"
#include "welfarechoice/ram.hpp"
#include "welfarechoice/welfare.hpp"

#include <vector>

namespace welfarechoice {

// Conversions between the welfare, regularizer and distribution-set views of
// one choice model.

struct ConjugateOptions {
  double gradient_tol = 1e-10;  // stop when ||x - q(y)||_inf <= gradient_tol
  int max_iterations = 20000;
  double min_coordinate = 1e-6;  // x must be at least this interior
};

struct ConjugateResult {
  double value = 0.0;  // V(x) = sup_y y^T x - w(y)
  UtilityVector maximizer;  // zero-sum y*; grad V(x) up to a multiple of e
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  double search_radius = 0.0;
};

/// Convex conjugate of w at interior x, by gradient ascent on the zero-sum
/// hyperplane inside the radius 2K, K = (w(0) - min b) / min x_i.
/// Throws DomainError for non-interior x and ToleranceError on non-convergence.
ConjugateResult conjugate_V(const WelfareModel& m, const ProbabilityVector& x,
                            const ConjugateOptions& opts = {});

struct InversionResult {
  UtilityVector mu;  // e^T mu = 0
  double residual = 0.0;  // ||q(mu) - x||_inf
  int iterations = 0;
  bool converged = false;
};

/// Utilities whose choice probabilities are x_target (simplex span).
/// Never throws on non-convergence; inspect `converged` and `residual`.
InversionResult invert_choice(const WelfareModel& m, const ProbabilityVector& x_target,
                              const ConjugateOptions& opts = {});

/// The n-point anchor distribution theta_z: with probability q_i(z) the noise
/// vector equals l(z) in coordinate i and l(z) - M(z) elsewhere.
struct AnchorDistribution {
  UtilityVector z;
  ProbabilityVector weights;
  double offset = 0.0;   // l(z) = w(z) - z^T q(z)
  double penalty = 0.0;  // M(z)
  double t_star = 0.0;   // smallest positive weight

  /// E[max_i mu_i + eps_i] under theta_z, evaluated exactly.
  double expected_max(const UtilityVector& mu) const;
};

std::vector<AnchorDistribution> anchor_family(const WelfareModel& m,
                                              const std::vector<UtilityVector>& anchors);
/// Same, with explicit superlinear bounds b.
std::vector<AnchorDistribution> anchor_family(const WelfareModel& m,
                                              const std::vector<UtilityVector>& anchors,
                                              const Vector& bounds);

/// max over anchors of E[max_i mu_i + eps_i]; a lower bound on w(mu) that is
/// attained when mu is one of the anchors.
double semiparametric_sup(const std::vector<AnchorDistribution>& family, const UtilityVector& mu);
double semiparametric_sup(const WelfareModel& m, const std::vector<UtilityVector>& anchors,
                          const UtilityVector& mu);

/// Regularizer defined by V = conjugate of w, with gradient the conjugate
/// maximizer. Used for welfare -> regularizer -> welfare round trips.
RegularizerPtr conjugate_regularizer(ModelPtr m, ConjugateOptions opts = {});

struct ConjugateGridPoint {
  ProbabilityVector x;
  double value = 0.0;
};

/// V on the interior lattice {k / N : k_i >= 1, sum k_i = N}, N = round(1 / spacing).
std::vector<ConjugateGridPoint> tabulate_conjugate(const WelfareModel& m, double spacing,
                                                   const ConjugateOptions& opts = {});

}  // namespace welfarechoice
