#pragma once

#include "welfarechoice/core.hpp"

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace welfarechoice {

/// A choice welfare function w(mu) together with its choice model
/// q(mu) = grad w(mu). Implementations are immutable and re-entrant.
class WelfareModel {
 public:
  virtual ~WelfareModel() = default;

  virtual std::size_t size() const = 0;
  virtual double value(const Vector& mu) const = 0;
  virtual Vector gradient(const Vector& mu) const = 0;

  /// w and q together; models that pay for an inner solve override this.
  virtual std::pair<double, Vector> evaluate(const Vector& mu) const {
    return {value(mu), gradient(mu)};
  }

  /// Analytic b with w(mu) >= mu_i + b_i, when known.
  virtual std::optional<Vector> superlinear_bounds() const { return std::nullopt; }

  virtual std::string name() const = 0;

 protected:
  void check_input(const Vector& mu) const;
};

using ModelPtr = std::shared_ptr<const WelfareModel>;

/// Welfare built from plain callables. Without a gradient callable the
/// gradient is a central difference with step fd_step.
class FunctionWelfare final : public WelfareModel {
 public:
  FunctionWelfare(std::string name, std::size_t n, ScalarField value,
                  std::function<Vector(const Vector&)> gradient = {},
                  std::optional<Vector> bounds = std::nullopt, double fd_step = 1e-6);

  std::size_t size() const override { return n_; }
  double value(const Vector& mu) const override;
  Vector gradient(const Vector& mu) const override;
  std::optional<Vector> superlinear_bounds() const override { return bounds_; }
  std::string name() const override { return name_; }

 private:
  std::string name_;
  std::size_t n_;
  ScalarField value_;
  std::function<Vector(const Vector&)> gradient_;
  std::optional<Vector> bounds_;
  double fd_step_;
};

struct NestStructure {
  std::vector<std::vector<int>> nests;  // zero-based alternative indices
  std::vector<double> lambda;           // one dissimilarity per nest, in (0, 1]

  /// Throws ArgumentError unless the nests partition {0..n-1}.
  void validate(std::size_t n) const;
};

/// GEV generator H on the positive orthant, homogeneous of degree 1/eta.
struct GEVGenerator {
  double eta = 1.0;
  std::function<double(const Vector&)> H;
  std::function<Vector(const Vector&)> partials;  // optional dH/dy_i
};

struct GeneratorReport {
  bool positive = true;
  bool homogeneous = true;
  bool alternating_signs = true;  // orders 1..3, finite differences
  int max_order_checked = 0;
  std::optional<Vector> witness;
  std::string detail;
};

struct SuperlinearBounds {
  Vector b;
  bool estimated = false;
};

ModelPtr mnl_welfare(double eta, std::size_t n);
ModelPtr nested_logit_welfare(const NestStructure& nests, std::size_t n);
/// Validates H on a sample (positivity, homogeneity) before building.
ModelPtr gev_welfare(const GEVGenerator& gen, std::size_t n, std::uint64_t seed = 0);

/// H(y) = sum_t coef_t * prod_i y_i^{exponent_ti}; each row of `exponents`
/// must sum to 1/eta.
GEVGenerator power_sum_generator(double eta, std::vector<double> coef, Matrix exponents);
GEVGenerator mnl_generator(double eta, std::size_t n);
GEVGenerator nested_logit_generator(const NestStructure& nests, std::size_t n);

/// Positivity, homogeneity and alternating-sign checks (orders up to 3).
GeneratorReport check_generator(const GEVGenerator& gen, std::size_t n, int samples = 200,
                                std::uint64_t seed = 0);

/// w(mu) = log(e^{mu_1} + e^{mu_2} + e^{mu_3} + e^{(mu_1 + mu_2)/2}).
/// A non-RUM log-sum model in which alternatives 1 and 2 complement each
/// other once alternative 3 dominates.
ModelPtr paired_logsum_welfare();

/// Analytic bounds when present, otherwise min over a coarse grid on
/// [-20, 20]^n of w(mu) - mu_i (flagged as estimated).
SuperlinearBounds resolve_superlinear_bounds(const WelfareModel& m);

// --- axiom checking ---------------------------------------------------------

struct Witness {
  Vector first;
  Vector second;
  double scalar = 0.0;
  double violation = 0.0;
};

struct AxiomVerdict {
  bool pass = true;
  double worst_violation = 0.0;
  std::optional<Witness> witness;
};

/// Sampling-based: a pass means no violation was found.
struct AxiomReport {
  AxiomVerdict monotonic;
  AxiomVerdict translation_invariant;
  AxiomVerdict convex;
  int samples_used = 0;

  bool all_pass() const { return monotonic.pass && translation_invariant.pass && convex.pass; }
};

AxiomReport check_axioms(const WelfareModel& m, int samples = 1000, double box = 10.0,
                         std::uint64_t seed = 0);

struct SuperlinearReport {
  bool pass = true;
  std::optional<Vector> witness_mu;
  int witness_index = -1;
  double worst_gap = 0.0;  // min over samples of w(mu) - mu_i - b_i
  int samples_used = 0;
};

SuperlinearReport check_superlinear(const WelfareModel& m, const Vector& b, int samples = 1000,
                                    double box = 10.0, std::uint64_t seed = 0);

}  // namespace welfarechoice
