#pragma once

#include "welfarechoice/core.hpp"
#include "welfarechoice/welfare.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace welfarechoice {

class NonStrictlyConvexError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// Convex regularizer V on the simplex. value() returns +inf off the simplex;
/// gradient() is only required on the relative interior.
class Regularizer {
 public:
  virtual ~Regularizer() = default;

  virtual std::size_t size() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;

  /// Gradient magnitude blows up at the boundary; the solver then keeps
  /// iterates strictly interior.
  virtual bool boundary_barrier() const = 0;
  /// V bounded above on the simplex (equivalently, superlinear welfare).
  virtual bool upper_bounded() const = 0;
  virtual bool strictly_convex() const { return true; }
  virtual std::string name() const = 0;

  /// V at the vertex e_i, used for the superlinear bound b_i = -V(e_i).
  virtual double vertex_value(std::size_t i) const;

  /// Analytic Hessian on the relative interior, when cheap. The solver falls
  /// back to tangent-space differences of gradient() otherwise.
  virtual std::optional<Matrix> hessian(const Vector& x) const {
    (void)x;
    return std::nullopt;
  }
};

using RegularizerPtr = std::shared_ptr<const Regularizer>;

// --- marginal distributions for the marginal distribution model ------------

enum class MarginalFamily { uniform, exponential, logistic, normal, custom };

struct Marginal {
  MarginalFamily family = MarginalFamily::uniform;
  double a = 0.0;  // uniform: lower end; exponential: rate; logistic: scale; normal: sd
  double b = 1.0;  // uniform: upper end
  ScalarFunction custom_quantile;  // only for MarginalFamily::custom

  static Marginal uniform(double lo = 0.0, double hi = 1.0);
  static Marginal exponential(double rate = 1.0);
  static Marginal logistic(double scale = 1.0);
  static Marginal normal(double sd = 1.0);
  static Marginal custom(ScalarFunction quantile);

  double quantile(double t) const;
  /// F^{-1}(1 - x) without cancellation for small x.
  double upper_quantile(double x) const;
  /// d/dx F^{-1}(1 - x) magnitude, i.e. 1 / f(F^{-1}(1 - x)).
  double upper_quantile_slope(double x) const;
  /// int_{1-x}^{1} F^{-1}(t) dt; closed form for named families, quadrature
  /// (upper limit clipped to 1 - 1e-12) for custom quantiles.
  double upper_tail_integral(double x, double quad_tol = 1e-10) const;
  double mean() const { return upper_tail_integral(1.0); }
  bool bounded_quantile() const { return family == MarginalFamily::uniform; }
  void validate() const;
};

using MarginalSpec = std::vector<Marginal>;

RegularizerPtr entropy_regularizer(double eta, std::size_t n);
RegularizerPtr quadratic_regularizer(const Matrix& A);
RegularizerPtr log_barrier_regularizer(std::size_t n);
RegularizerPtr mdm_regularizer(const MarginalSpec& marginals);
RegularizerPtr mmm_regularizer(const Vector& sigma);
RegularizerPtr cmm_regularizer(const Matrix& cov);

// --- solver -----------------------------------------------------------------

struct SolverOptions {
  double kkt_tol = 1e-9;
  int max_iterations = 100000;
  double active_tol = 1e-9;
  bool record_trace = false;
};

struct SolveResult {
  ProbabilityVector x_star;
  double w_value = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // filled when record_trace is set
};

/// Maximizes mu^T x - V(x) over the simplex. Entropic mirror ascent with
/// Armijo backtracking for barrier regularizers; projected gradient
/// otherwise. Starts at the barycenter.
SolveResult solve_ram(const Regularizer& reg, const Vector& mu, const SolverOptions& opts = {});

/// Stationarity + complementarity violation of x for the simplex program.
double verify_kkt(const Regularizer& reg, const Vector& mu, const Vector& x,
                  double active_tol = 1e-9);

/// Welfare model w(mu) = max_x mu^T x - V(x); gradient is the maximizer.
/// Throws NumericError when the inner solve does not converge.
ModelPtr ram_welfare(RegularizerPtr reg, SolverOptions opts = {});

}  // namespace welfarechoice
