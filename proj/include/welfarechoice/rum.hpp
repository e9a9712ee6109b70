#pragma once

#include "welfarechoice/core.hpp"
#include "welfarechoice/welfare.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace welfarechoice {

// Random utility models: choice by argmax_i (mu_i + eps_i).

class InvalidWelfareError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// Draws one noise vector eps into `out` (already sized n).
using NoiseDraw = std::function<void(Rng&, Vector&)>;

struct NoiseSampler {
  std::size_t n = 0;
  std::string family;  // iid-gumbel | iid-normal | iid-logistic | degenerate | custom
  double parameter = 0.0;
  NoiseDraw draw;

  void sample(Rng& rng, Vector& out) const;
};

NoiseSampler iid_gumbel(double eta, std::size_t n);
NoiseSampler iid_normal(double sd, std::size_t n);
NoiseSampler iid_logistic(double scale, std::size_t n);
/// eps = 0 with probability one.
NoiseSampler degenerate_noise(std::size_t n);
NoiseSampler custom_noise(std::size_t n, NoiseDraw draw);

struct MCChoiceResult {
  ProbabilityVector probabilities;
  Vector standard_error;  // sqrt(p (1 - p) / samples)
  std::size_t samples = 0;
};

struct MCWelfareResult {
  double value = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
};

// Sample s belongs to block s / kBlockSize, which draws from Rng(seed, block).
// Per-block partial sums are merged in block order, so results do not depend
// on the number of threads.

MCChoiceResult mc_choice_probs(const NoiseSampler& sampler, const UtilityVector& mu,
                               std::size_t samples, std::uint64_t seed);
MCWelfareResult mc_welfare(const NoiseSampler& sampler, const UtilityVector& mu,
                           std::size_t samples, std::uint64_t seed);

/// Many utility vectors evaluated on one shared stream of noise draws.
struct MCBatchResult {
  std::vector<MCChoiceResult> choice;
  std::vector<MCWelfareResult> welfare;
};
MCBatchResult mc_batch(const NoiseSampler& sampler, const std::vector<UtilityVector>& mus,
                       std::size_t samples, std::uint64_t seed);

/// Welfare model whose w and q are Monte Carlo estimates on a fixed stream of
/// draws (the same seed at every mu, so differences use common random numbers).
ModelPtr mc_welfare_model(NoiseSampler sampler, std::size_t samples, std::uint64_t seed);

/// Empirical E|eps_i| per coordinate.
Vector mc_abs_mean(const NoiseSampler& sampler, std::size_t samples, std::uint64_t seed);

/// Two-alternative RUM built from a welfare function: xi has cdf
/// v'(x) = dw/dmu_1 (x, 0) and eps = (v0 - max(xi, 0), v0 - max(-xi, 0)),
/// v0 = w(0, 0).
class BinaryRUMConstruction {
 public:
  static constexpr double kMaxBracket = 1e6;

  explicit BinaryRUMConstruction(ModelPtr m);

  double v0() const { return v0_; }
  /// The cdf of xi.
  double v_prime(double x) const;
  /// Inverse cdf by bracket growth and bisection. Sets *truncated when the
  /// bracket hit kMaxBracket before enclosing u.
  double xi_quantile(double u, bool* truncated = nullptr) const;
  Vector noise_from_xi(double xi) const;
  NoiseSampler sampler() const;

 private:
  ModelPtr model_;
  double v0_ = 0.0;
};

/// Validates v' on a grid over [-50, 50]: values in [0, 1] and nondecreasing,
/// otherwise throws InvalidWelfareError. Requires n = 2.
BinaryRUMConstruction binary_rum_from_welfare(ModelPtr m);

struct SignOrderVerdict {
  int order = 0;
  bool pass = true;
  int tuples_tested = 0;
  double worst_value = -std::numeric_limits<double>::infinity();  // max of (-1)^k d^k w
  std::vector<int> witness_indices;  // zero-based; empty when pass
  Vector witness_mu;
};

struct SignTestReport {
  int max_order_tested = 0;
  std::vector<SignOrderVerdict> orders;  // orders 1..max_order_tested

  bool pass() const;
  const SignOrderVerdict& order(int k) const { return orders.at(static_cast<std::size_t>(k - 1)); }
};

/// Test points for rum_sign_test: the lattice {0,1,2,3}^n when n <= 4 (w is
/// translation invariant, so this covers utility differences up to 3),
/// followed by `samples` uniform points in [-3,3]^n.
std::vector<UtilityVector> sign_test_points(std::size_t n, int samples, std::uint64_t seed);

/// Checks (-1)^k d^k w / (dmu_i1 ... dmu_ik) <= 1e-4 max(1, |w(mu)|) for every
/// set of k distinct indices, k = 1..max_order, at each point. Mixed partials
/// use central differences with step h. max_order must be 2 or 3.
SignTestReport rum_sign_test(const WelfareModel& m, int max_order,
                             const std::vector<UtilityVector>& points, double h = 1e-2);

}  // namespace welfarechoice
