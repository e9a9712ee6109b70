#include "welfarechoice/duality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

namespace welfarechoice {

namespace {

void require_interior(const ProbabilityVector& x, std::size_t n, double min_coordinate) {
  if (static_cast<std::size_t>(x.size()) != n) throw ArgumentError("dimension mismatch");
  if (!on_simplex(x, 1e-9)) throw DomainError("x is not on the simplex");
  if (x.minCoeff() < min_coordinate) {
    throw DomainError("x must be strictly interior (all coordinates >= " +
                      std::to_string(min_coordinate) + ")");
  }
}

// Maximizes y^T x - w(y) over {e^T y = 0, ||y||_inf <= radius}.
ConjugateResult ascend(const WelfareModel& m, const ProbabilityVector& x,
                       const ConjugateOptions& opts) {
  const std::size_t n = m.size();
  const Vector origin = Vector::Zero(n);
  const SuperlinearBounds bounds = resolve_superlinear_bounds(m);
  const double k_bound = (m.value(origin) - bounds.b.minCoeff()) / x.minCoeff();
  // Estimated b may be loose, hence the factor 2.
  const double radius = 2.0 * std::max(k_bound, 1.0);

  auto tangent = [](Vector d) {
    d.array() -= d.mean();
    return d;
  };

  ConjugateResult result;
  result.search_radius = radius;
  Vector y = origin;
  auto [w, q] = m.evaluate(y);
  double phi = y.dot(x) - w;
  Vector d = tangent(x - q);
  double step = 1.0;
  Vector prev_y;
  Vector prev_d;

  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    result.residual = (x - q).cwiseAbs().maxCoeff();
    if (result.residual <= opts.gradient_tol) {
      result.converged = true;
      break;
    }
    if (iter > 0) {
      // Barzilai-Borwein step, safeguarded.
      const Vector s = y - prev_y;
      const Vector r = d - prev_d;
      const double curvature = -s.dot(r);
      if (curvature > 0) step = std::clamp(s.squaredNorm() / curvature, 1e-8, 1e8);
    }
    const double slope = d.squaredNorm();
    bool accepted = false;
    for (int k = 0; k < 80; ++k, step *= 0.5) {
      const Vector trial = y + step * d;
      if (trial.cwiseAbs().maxCoeff() > radius) continue;
      auto [w_trial, q_trial] = m.evaluate(trial);
      const double phi_trial = trial.dot(x) - w_trial;
      const double slack = 8 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(phi));
      if (phi_trial >= phi + 1e-4 * step * slope - slack) {
        prev_y = y;
        prev_d = d;
        y = trial;
        w = w_trial;
        q = std::move(q_trial);
        phi = phi_trial;
        d = tangent(x - q);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Stalled at the noise floor of the welfare evaluations.
      result.residual = (x - q).cwiseAbs().maxCoeff();
      result.converged = result.residual <= 100 * opts.gradient_tol;
      break;
    }
  }
  result.value = phi;
  result.maximizer = y;
  result.iterations = iter;
  return result;
}

class ConjugateRegularizer final : public Regularizer {
 public:
  ConjugateRegularizer(ModelPtr m, ConjugateOptions opts) : model_(std::move(m)), opts_(opts) {
    upper_bounded_ = resolve_superlinear_bounds(*model_).b.allFinite();
  }
  std::size_t size() const override { return model_->size(); }
  double value(const Vector& x) const override {
    if (!on_simplex(x, 1e-9) || x.minCoeff() < opts_.min_coordinate) {
      return std::numeric_limits<double>::infinity();
    }
    return solve(x).value;
  }
  Vector gradient(const Vector& x) const override { return solve(x).maximizer; }
  bool boundary_barrier() const override { return true; }
  bool upper_bounded() const override { return upper_bounded_; }
  std::string name() const override { return "conjugate(" + model_->name() + ")"; }

 private:
  ConjugateResult solve(const Vector& x) const {
    {
      std::lock_guard lock(mutex_);
      if (cached_x_.size() == x.size() && cached_x_ == x) return cached_;
    }
    ConjugateResult r = conjugate_V(*model_, x, opts_);
    std::lock_guard lock(mutex_);
    cached_x_ = x;
    cached_ = r;
    return r;
  }

  ModelPtr model_;
  ConjugateOptions opts_;
  bool upper_bounded_ = false;
  mutable std::mutex mutex_;
  mutable Vector cached_x_;
  mutable ConjugateResult cached_;
};

}  // namespace

ConjugateResult conjugate_V(const WelfareModel& m, const ProbabilityVector& x,
                            const ConjugateOptions& opts) {
  require_interior(x, m.size(), opts.min_coordinate);
  ConjugateResult r = ascend(m, x, opts);
  if (!r.converged) {
    throw ToleranceError("conjugate_V: ascent did not converge (residual " +
                         std::to_string(r.residual) + ")");
  }
  return r;
}

InversionResult invert_choice(const WelfareModel& m, const ProbabilityVector& x_target,
                              const ConjugateOptions& opts) {
  require_interior(x_target, m.size(), opts.min_coordinate);
  const ConjugateResult r = ascend(m, x_target, opts);
  InversionResult out;
  out.mu = r.maximizer;
  out.residual = (m.gradient(out.mu) - x_target).cwiseAbs().maxCoeff();
  out.iterations = r.iterations;
  out.converged = r.converged;
  return out;
}

double AnchorDistribution::expected_max(const UtilityVector& mu) const {
  if (mu.size() != z.size()) throw ArgumentError("expected_max: dimension mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    double others = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < mu.size(); ++j) {
      if (j != i) others = std::max(others, mu[j]);
    }
    total += weights[i] * std::max(mu[i] + offset, others + offset - penalty);
  }
  return total;
}

std::vector<AnchorDistribution> anchor_family(const WelfareModel& m,
                                              const std::vector<UtilityVector>& anchors,
                                              const Vector& bounds) {
  if (static_cast<std::size_t>(bounds.size()) != m.size()) {
    throw ArgumentError("anchor_family: bounds have wrong size");
  }
  const double min_b = bounds.minCoeff();
  std::vector<AnchorDistribution> family;
  family.reserve(anchors.size());
  for (const auto& z : anchors) {
    auto [w, q] = m.evaluate(z);
    AnchorDistribution a;
    a.z = z;
    a.weights = q;
    a.offset = w - z.dot(q);
    a.t_star = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      if (q[i] > 0.0) a.t_star = std::min(a.t_star, q[i]);
    }
    if (!(a.t_star > 0.0) || !std::isfinite(a.t_star)) {
      throw NumericError("anchor_family: gradient has no positive entry");
    }
    a.penalty = std::max(1.0 + (z.maxCoeff() - z.minCoeff()), (a.offset - min_b) / a.t_star);
    family.push_back(std::move(a));
  }
  return family;
}

std::vector<AnchorDistribution> anchor_family(const WelfareModel& m,
                                              const std::vector<UtilityVector>& anchors) {
  return anchor_family(m, anchors, resolve_superlinear_bounds(m).b);
}

double semiparametric_sup(const std::vector<AnchorDistribution>& family, const UtilityVector& mu) {
  if (family.empty()) throw ArgumentError("semiparametric_sup: empty anchor family");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& a : family) best = std::max(best, a.expected_max(mu));
  return best;
}

double semiparametric_sup(const WelfareModel& m, const std::vector<UtilityVector>& anchors,
                          const UtilityVector& mu) {
  return semiparametric_sup(anchor_family(m, anchors), mu);
}

RegularizerPtr conjugate_regularizer(ModelPtr m, ConjugateOptions opts) {
  if (!m) throw ArgumentError("conjugate_regularizer: null model");
  return std::make_shared<ConjugateRegularizer>(std::move(m), opts);
}

std::vector<ConjugateGridPoint> tabulate_conjugate(const WelfareModel& m, double spacing,
                                                   const ConjugateOptions& opts) {
  if (!(spacing > 0 && spacing < 1)) throw ArgumentError("tabulate_conjugate: spacing must be in (0, 1)");
  const std::size_t n = m.size();
  const int N = static_cast<int>(std::lround(1.0 / spacing));
  if (N < static_cast<int>(n)) throw ArgumentError("tabulate_conjugate: grid too coarse for n");
  std::vector<ConjugateGridPoint> out;
  // Compositions of N into n parts, each >= 1, in lexicographic order.
  std::vector<int> k(n, 1);
  k[n - 1] = N - static_cast<int>(n) + 1;
  while (true) {
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(k[i]) / N;
    out.push_back({x, conjugate_V(m, x, opts).value});
    // Advance: find rightmost position (excluding last) that can grow.
    int pos = static_cast<int>(n) - 2;
    while (pos >= 0 && k[n - 1] == 1) {
      k[n - 1] += k[pos] - 1;
      k[pos] = 1;
      --pos;
    }
    if (pos < 0) break;
    ++k[pos];
    --k[n - 1];
  }
  return out;
}

}  // namespace welfarechoice
