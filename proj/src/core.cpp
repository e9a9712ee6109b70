#include "welfarechoice/core.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

namespace welfarechoice {

void NumericConfig::validate() const {
  if (!(fd_step_first > 0) || !(fd_step_high > 0) || !(quad_abs_tol > 0) || !(root_tol > 0)) {
    throw ArgumentError("NumericConfig: all tolerances and steps must be positive");
  }
}

void require_utility(const Vector& mu) {
  if (mu.size() < 2) throw ArgumentError("utility vector needs at least two alternatives");
  if (!mu.allFinite()) throw ArgumentError("utility vector has non-finite entries");
}

bool on_simplex(const Vector& x, double tol) {
  if (x.size() == 0 || !x.allFinite()) return false;
  if (x.minCoeff() < -tol) return false;
  return std::abs(x.sum() - 1.0) <= tol;
}

void require_probability(const Vector& x, double tol) {
  if (!on_simplex(x, tol)) throw ArgumentError("vector is not on the probability simplex");
}

ProbabilityVector project_to_simplex(const Vector& v) {
  if (v.size() == 0 || !v.allFinite()) throw ArgumentError("project_to_simplex: non-finite input");
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumulative += u[k];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (u[k] - candidate > 0) theta = candidate;
  }
  Vector x = (v.array() - theta).max(0.0).matrix();
  x /= x.sum();
  return x;
}

double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

Vector softmax(const Vector& v) {
  const double m = v.maxCoeff();
  Vector e = (v.array() - m).exp().matrix();
  return e / e.sum();
}

Vector finite_diff_gradient(const ScalarField& f, const Vector& mu, double h) {
  if (!(h > 0)) throw ArgumentError("finite_diff_gradient: step must be positive");
  Vector g(mu.size());
  Vector probe = mu;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    probe[i] = mu[i] + h;
    const double up = f(probe);
    probe[i] = mu[i] - h;
    const double down = f(probe);
    probe[i] = mu[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_gradient: non-finite function value");
    }
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double mixed_partial(const ScalarField& f, const Vector& mu, std::span<const int> indices,
                     double h) {
  const std::size_t k = indices.size();
  if (k == 0 || k > static_cast<std::size_t>(mu.size())) {
    throw ArgumentError("mixed_partial: need between 1 and n indices");
  }
  for (std::size_t a = 0; a < k; ++a) {
    if (indices[a] < 0 || indices[a] >= mu.size()) throw ArgumentError("mixed_partial: index out of range");
    for (std::size_t b = a + 1; b < k; ++b) {
      if (indices[a] == indices[b]) throw ArgumentError("mixed_partial: repeated index");
    }
  }
  if (!(h > 0)) throw ArgumentError("mixed_partial: step must be positive");

  // Sum over the 2^k corners of the stencil with sign prod(s_j).
  double total = 0.0;
  Vector probe(mu.size());
  for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
    probe = mu;
    int sign = 1;
    for (std::size_t j = 0; j < k; ++j) {
      if (mask & (1u << j)) {
        probe[indices[j]] += h;
      } else {
        probe[indices[j]] -= h;
        sign = -sign;
      }
    }
    const double value = f(probe);
    if (!std::isfinite(value)) throw NumericError("mixed_partial: non-finite function value");
    total += sign * value;
  }
  return total / std::pow(2.0 * h, static_cast<double>(k));
}

double integrate_1d(const ScalarFunction& g, double a, double b, double abs_tol) {
  if (!(a <= b)) throw ArgumentError("integrate_1d: need a <= b");
  if (a == b) return 0.0;
  double error = 0.0;
  double l1 = 0.0;
  thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  double result = 0.0;
  try {
    result = integrator.integrate(g, a, b, 1e-12, &error, &l1);
  } catch (const std::domain_error& e) {
    throw QuadratureError(std::string("integrate_1d: ") + e.what());
  }
  if (!std::isfinite(result) || error > abs_tol) {
    throw QuadratureError("integrate_1d: error estimate " + std::to_string(error) +
                          " exceeds tolerance");
  }
  return result;
}

double bisect_increasing(const ScalarFunction& g, double target, double lo, double hi,
                         double tol) {
  if (!(lo <= hi)) throw ArgumentError("bisect_increasing: need lo <= hi");
  double glo = g(lo);
  double ghi = g(hi);
  if (!(glo <= target && target <= ghi)) {
    throw BracketError("bisect_increasing: target outside [g(lo), g(hi)]");
  }
  if (glo == target) return lo;
  if (ghi == target) return hi;
  for (int iter = 0; iter < 2000; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi || hi - lo <= tol) return mid;
    const double gm = g(mid);
    if (std::abs(gm - target) <= tol) return mid;
    if (gm < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_quantile(double p) {
  if (!(p > 0.0)) return p == 0.0 ? -HUGE_VAL : std::nan("");
  if (!(p < 1.0)) return p == 1.0 ? HUGE_VAL : std::nan("");

  // Acklam's rational approximation (relative error ~1.15e-9).
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // One Halley step against erfc; the upper tail is refined through its mirror
  // so that 1 - p does not lose digits.
  const bool upper = p > 0.5;
  const double tail = upper ? 1.0 - p : p;
  const double y = upper ? -x : x;
  const double e = 0.5 * std::erfc(-y / std::numbers::sqrt2) - tail;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * y * y);
  const double refined = y - u / (1.0 + 0.5 * y * u);
  return upper ? -refined : refined;
}

double logistic_cdf(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : engine_(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ull))) {}

double Rng::uniform() {
  // (k + 0.5) / 2^53 never hits 0 or 1.
  const std::uint64_t k = engine_() >> 11;
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

std::size_t thread_count() {
  std::size_t requested = 0;
  if (const char* env = std::getenv("WELFARECHOICE_THREADS")) {
    try {
      requested = static_cast<std::size_t>(std::stoul(env));
    } catch (...) {
      requested = 0;
    }
  }
  if (requested == 0) requested = std::max(1u, std::thread::hardware_concurrency());
  return requested;
}

void parallel_for(std::size_t tasks, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(thread_count(), tasks);
  if (workers <= 1) {
    for (std::size_t t = 0; t < tasks; ++t) body(t);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t t = w; t < tasks; t += workers) body(t);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace welfarechoice
