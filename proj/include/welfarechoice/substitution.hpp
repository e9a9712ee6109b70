#pragma once

#include "welfarechoice/core.hpp"
#include "welfarechoice/ram.hpp"
#include "welfarechoice/welfare.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace welfarechoice {

// Substitutability: alternative i is substitutable (complementary) to j at mu
// when q_j is locally decreasing (increasing) in mu_i.

enum class Relation { substitutable, complementary, indeterminate };

std::string to_string(Relation r);

struct PairClassification {
  Relation relation = Relation::indeterminate;
  double cross_partial = 0.0;  // estimate of dq_j / dmu_i
};

/// Central difference of q_j along mu_i with step h; |estimate| <= dead_zone
/// is indeterminate. i == j is always complementary (the estimate is still
/// reported). Indices are zero-based.
PairClassification classify_pair(const WelfareModel& m, const UtilityVector& mu, int i, int j,
                                 double h = 1e-2, double dead_zone = 1e-7);

struct SubstitutionReport {
  UtilityVector mu;
  std::vector<std::vector<PairClassification>> pairs;  // pairs[i][j]
  bool symmetric = true;  // cross-partials agree with their transposes
};

SubstitutionReport substitution_report(const WelfareModel& m, const UtilityVector& mu,
                                       double h = 1e-2, double dead_zone = 1e-7,
                                       double symmetry_tol = 1e-6);

struct ScanRow {
  double mu_i = 0.0;
  double q_j = 0.0;
  PairClassification classification;
};

/// q_j along mu_i in [lo, hi] (steps points, endpoints included), other
/// coordinates fixed at mu_base.
std::vector<ScanRow> scan_line(const WelfareModel& m, const UtilityVector& mu_base, int i, int j,
                               double lo, double hi, int steps);

struct CriterionTriple {
  int i = 0, j = 0, k = 0;  // zero-based
  double margin = 0.0;      // A_jk - A_ik - A_ij + A_ii
  bool pass = true;
};

struct QuadraticCriterionReport {
  std::vector<CriterionTriple> triples;  // all ordered distinct triples
  bool pass = true;
  double min_margin = 0.0;
  std::optional<CriterionTriple> worst;
};

/// Substitutability test for the quadratic regularizer x^T A x.
QuadraticCriterionReport quadratic_criterion(const Matrix& A);

/// V with coordinate i eliminated: z in R^{n-1} maps to V at the simplex
/// point with 1 - sum(z) inserted at position i; +inf unless z >= 0 and
/// e^T z <= 1.
class ReducedRegularizer {
 public:
  ReducedRegularizer(RegularizerPtr reg, int i);

  int dropped_index() const { return i_; }
  std::size_t size() const { return reg_->size() - 1; }
  ProbabilityVector reconstruct(const Vector& z) const;
  double operator()(const Vector& z) const;

 private:
  RegularizerPtr reg_;
  int i_;
};

ReducedRegularizer reduced_regularizer(RegularizerPtr reg, int i);

enum class ModularityVerdict { modular_consistent, supermodular_consistent, submodular_consistent, neither };

std::string to_string(ModularityVerdict v);

struct LatticeWitness {
  Vector x;
  Vector y;
  double gap = 0.0;  // f(x v y) + f(x ^ y) - f(x) - f(y)
};

/// Sampling falsifier: "consistent" means no counterexample among the
/// sampled pairs, not a proof.
struct ModularityReport {
  ModularityVerdict verdict = ModularityVerdict::modular_consistent;
  bool supermodular_ok = true;
  bool submodular_ok = true;
  std::optional<LatticeWitness> supermodular_witness;  // breaks f(x v y) + f(x ^ y) >= f(x) + f(y)
  std::optional<LatticeWitness> submodular_witness;
  int pairs_tested = 0;
};

using DomainSampler = std::function<Vector(Rng&)>;

DomainSampler box_sampler(std::size_t dim, double half_width);
/// Uniform on {z >= 0, e^T z <= 1 - 1e-6}.
DomainSampler simplex_body_sampler(std::size_t dim);

/// f may return +inf (extended-real semantics); pairs whose own values are
/// infinite are skipped, while an infinite join or meet is compared as is.
ModularityReport check_modularity(const ScalarField& f, const DomainSampler& sampler, int samples,
                                  std::uint64_t seed = 0, double tol = 1e-9);

struct ComplementarityWitness {
  UtilityVector mu;
  int i = 0, j = 0;
  double cross_partial = 0.0;
};

struct SubstitutabilityCheck {
  bool substitutable_consistent = true;
  ModularityReport modularity;  // of w over the sampling box
  std::optional<ComplementarityWitness> witness;  // largest positive off-diagonal cross-partial
  int points_tested = 0;
};

/// Combines the lattice test on w with pairwise classification at random mu
/// in [-box, box]^n and at utilities recovered from random interior choice
/// probabilities.
SubstitutabilityCheck substitutable_model_check(const WelfareModel& m, int samples = 200,
                                                std::uint64_t seed = 0, double box = 5.0);

}  // namespace welfarechoice
