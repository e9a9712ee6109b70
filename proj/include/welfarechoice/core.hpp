#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace welfarechoice {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Deterministic utilities mu (one entry per alternative).
using UtilityVector = Eigen::VectorXd;
/// A point on the probability simplex.
using ProbabilityVector = Eigen::VectorXd;

using ScalarField = std::function<double(const Vector&)>;
using ScalarFunction = std::function<double(double)>;

inline constexpr double kSimplexTol = 1e-10;

// Error taxonomy. Argument errors are caller mistakes, numeric errors are
// failures of an otherwise valid computation.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class DomainError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public NumericError {
 public:
  using NumericError::NumericError;
};

class BracketError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ToleranceError : public NumericError {
 public:
  using NumericError::NumericError;
};

struct NumericConfig {
  double fd_step_first = 1e-6;
  double fd_step_high = 1e-2;
  double quad_abs_tol = 1e-10;
  double root_tol = 1e-12;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Throws ArgumentError unless mu has n >= 2 finite entries.
void require_utility(const Vector& mu);
bool on_simplex(const Vector& x, double tol = kSimplexTol);
/// Throws ArgumentError unless x satisfies the simplex invariants.
void require_probability(const Vector& x, double tol = kSimplexTol);

/// Euclidean projection onto the probability simplex (sort-based).
ProbabilityVector project_to_simplex(const Vector& v);

/// log(sum(exp(v))) with max-shift.
double log_sum_exp(const Vector& v);
/// exp(v) / sum(exp(v)) with max-shift.
Vector softmax(const Vector& v);

/// Central differences, one coordinate at a time.
Vector finite_diff_gradient(const ScalarField& f, const Vector& mu, double h);

/// Nested central difference for d^k f / (d mu_{i1} ... d mu_{ik}).
/// Indices are zero-based and must be distinct.
double mixed_partial(const ScalarField& f, const Vector& mu, std::span<const int> indices,
                     double h);

/// Adaptive quadrature on [a, b]; throws QuadratureError when the error
/// estimate stays above abs_tol.
double integrate_1d(const ScalarFunction& g, double a, double b, double abs_tol = 1e-10);

/// Root of g(x) = target for nondecreasing g on [lo, hi].
double bisect_increasing(const ScalarFunction& g, double target, double lo, double hi,
                         double tol = 1e-12);

double normal_cdf(double x);
double normal_pdf(double x);
/// Standard normal quantile; rational approximation refined by one Halley step.
double normal_quantile(double p);
double logistic_cdf(double x);

// --- randomness -------------------------------------------------------------
//
// Streams: block b of a stochastic computation draws from
// mt19937_64 seeded with splitmix64(seed, b). Blocks hold kBlockSize samples,
// so results depend only on (seed, samples), never on the thread count.

inline constexpr std::size_t kBlockSize = 4096;

std::uint64_t splitmix64(std::uint64_t x);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t stream);

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  double normal() { return normal_quantile(uniform()); }
  std::uint64_t next() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Worker count from WELFARECHOICE_THREADS (0 or unset = hardware concurrency).
std::size_t thread_count();

/// Runs body(task) for task in [0, tasks) across thread_count() workers.
/// Tasks are assigned round-robin; callers merge per-task results in order.
void parallel_for(std::size_t tasks, const std::function<void(std::size_t)>& body);

}  // namespace welfarechoice
