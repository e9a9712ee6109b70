#include "welfarechoice/ram.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace welfarechoice {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDomainTol = 1e-9;
constexpr double kInteriorFloor = 1e-300;

bool in_domain(const Vector& x, std::size_t n) {
  return static_cast<std::size_t>(x.size()) == n && on_simplex(x, kDomainTol);
}

double xlogx(double v) { return v > 0 ? v * std::log(v) : 0.0; }

class EntropyRegularizer final : public Regularizer {
 public:
  EntropyRegularizer(double eta, std::size_t n) : eta_(eta), n_(n) {}
  std::size_t size() const override { return n_; }
  double value(const Vector& x) const override {
    if (!in_domain(x, n_)) return kInf;
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += xlogx(std::max(x[i], 0.0));
    return eta_ * s;
  }
  Vector gradient(const Vector& x) const override {
    return (eta_ * (1.0 + x.array().log())).matrix();
  }
  std::optional<Matrix> hessian(const Vector& x) const override {
    return Matrix((eta_ * x.array().inverse()).matrix().asDiagonal());
  }
  bool boundary_barrier() const override { return true; }
  bool upper_bounded() const override { return true; }
  std::string name() const override { return "entropy"; }

 private:
  double eta_;
  std::size_t n_;
};

class QuadraticRegularizer final : public Regularizer {
 public:
  explicit QuadraticRegularizer(Matrix A) : A_(std::move(A)) {}
  std::size_t size() const override { return A_.rows(); }
  double value(const Vector& x) const override {
    if (!in_domain(x, size())) return kInf;
    return x.dot(A_ * x);
  }
  Vector gradient(const Vector& x) const override { return 2.0 * A_ * x; }
  std::optional<Matrix> hessian(const Vector&) const override { return Matrix(2.0 * A_); }
  bool boundary_barrier() const override { return false; }
  bool upper_bounded() const override { return true; }
  std::string name() const override { return "quadratic"; }

 private:
  Matrix A_;
};

class LogBarrierRegularizer final : public Regularizer {
 public:
  explicit LogBarrierRegularizer(std::size_t n) : n_(n) {}
  std::size_t size() const override { return n_; }
  double value(const Vector& x) const override {
    if (!in_domain(x, n_) || x.minCoeff() <= 0) return kInf;
    return -x.array().log().sum();
  }
  Vector gradient(const Vector& x) const override { return (-x.array().inverse()).matrix(); }
  std::optional<Matrix> hessian(const Vector& x) const override {
    return Matrix(x.array().square().inverse().matrix().asDiagonal());
  }
  bool boundary_barrier() const override { return true; }
  bool upper_bounded() const override { return false; }
  std::string name() const override { return "log_barrier"; }

 private:
  std::size_t n_;
};

class MarginalDistributionRegularizer final : public Regularizer {
 public:
  explicit MarginalDistributionRegularizer(MarginalSpec marginals)
      : marginals_(std::move(marginals)) {
    barrier_ = std::any_of(marginals_.begin(), marginals_.end(),
                           [](const Marginal& m) { return !m.bounded_quantile(); });
  }
  std::size_t size() const override { return marginals_.size(); }
  double value(const Vector& x) const override {
    if (!in_domain(x, size())) return kInf;
    double s = 0.0;
    for (std::size_t i = 0; i < marginals_.size(); ++i) {
      s += marginals_[i].upper_tail_integral(std::clamp(x[i], 0.0, 1.0));
    }
    return -s;
  }
  Vector gradient(const Vector& x) const override {
    Vector g(size());
    for (std::size_t i = 0; i < marginals_.size(); ++i) {
      g[i] = -marginals_[i].upper_quantile(x[i]);
    }
    return g;
  }
  std::optional<Matrix> hessian(const Vector& x) const override {
    if (std::any_of(marginals_.begin(), marginals_.end(),
                    [](const Marginal& m) { return m.family == MarginalFamily::custom; })) {
      return std::nullopt;
    }
    Vector d(size());
    for (std::size_t i = 0; i < marginals_.size(); ++i) d[i] = marginals_[i].upper_quantile_slope(x[i]);
    return Matrix(d.asDiagonal());
  }
  bool boundary_barrier() const override { return barrier_; }
  bool upper_bounded() const override { return true; }
  std::string name() const override { return "mdm"; }

 private:
  MarginalSpec marginals_;
  bool barrier_ = false;
};

class MarginalMomentRegularizer final : public Regularizer {
 public:
  explicit MarginalMomentRegularizer(Vector sigma) : sigma_(std::move(sigma)) {}
  std::size_t size() const override { return sigma_.size(); }
  double value(const Vector& x) const override {
    if (!in_domain(x, size())) return kInf;
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double xi = std::clamp(x[i], 0.0, 1.0);
      s += sigma_[i] * std::sqrt(xi * (1.0 - xi));
    }
    return -s;
  }
  Vector gradient(const Vector& x) const override {
    Vector g(size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (sigma_[i] == 0.0) {
        g[i] = 0.0;
        continue;
      }
      g[i] = -sigma_[i] * (1.0 - 2.0 * x[i]) / (2.0 * std::sqrt(x[i] * (1.0 - x[i])));
    }
    return g;
  }
  std::optional<Matrix> hessian(const Vector& x) const override {
    Vector d(size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      d[i] = sigma_[i] / (4.0 * std::pow(x[i] * (1.0 - x[i]), 1.5));
    }
    return Matrix(d.asDiagonal());
  }
  bool boundary_barrier() const override { return true; }
  bool upper_bounded() const override { return true; }
  // A zero sigma makes V linear in that coordinate; two of them leave a flat
  // direction on the simplex.
  bool strictly_convex() const override { return (sigma_.array() == 0.0).count() <= 1; }
  std::string name() const override { return "mmm"; }

 private:
  Vector sigma_;
};

class CrossMomentRegularizer final : public Regularizer {
 public:
  explicit CrossMomentRegularizer(const Matrix& cov) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    if (es.info() != Eigen::Success) throw NumericError("cmm: eigendecomposition failed");
    root_ = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
            es.eigenvectors().transpose();
    // S(x) e = 0 on the simplex, so M = R S R always annihilates R^{-1} e.
    // Work on its orthogonal complement to keep the null eigenvalue exact.
    const Eigen::Index n = cov.rows();
    Vector null = root_.ldlt().solve(Vector::Ones(n));
    null.normalize();
    Eigen::HouseholderQR<Matrix> qr(null);
    const Matrix full = qr.householderQ() * Matrix::Identity(n, n);
    range_ = full.rightCols(n - 1);
  }
  std::size_t size() const override { return root_.rows(); }

  double value(const Vector& x) const override {
    if (!in_domain(x, size())) return kInf;
    Eigen::SelfAdjointEigenSolver<Matrix> es(compressed(x), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericError("cmm: eigendecomposition failed");
    return -es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  }

  // dV = -1/2 tr(M^{+1/2} dM) with M = R S(x) R; with B = R M^{+1/2} R this
  // gives dV/dx_i = -1/2 (B_ii - 2 (B x)_i).
  Vector gradient(const Vector& x) const override {
    Eigen::SelfAdjointEigenSolver<Matrix> es(compressed(x));
    if (es.info() != Eigen::Success) throw NumericError("cmm: eigendecomposition failed");
    const Vector& lam = es.eigenvalues();
    Vector inv_root = Vector::Zero(lam.size());
    for (Eigen::Index k = 0; k < lam.size(); ++k) {
      if (lam[k] > kEigenFloor) inv_root[k] = 1.0 / std::sqrt(lam[k]);
    }
    const Matrix basis = range_ * es.eigenvectors();
    const Matrix P = basis * inv_root.asDiagonal() * basis.transpose();
    const Matrix B = root_ * P * root_;
    return (-0.5 * (B.diagonal() - 2.0 * B * x)).eval();
  }

  bool boundary_barrier() const override { return true; }
  bool upper_bounded() const override { return true; }
  std::string name() const override { return "cmm"; }

  static constexpr double kEigenFloor = 1e-12;

 private:
  Matrix compressed(const Vector& x) const {
    const Matrix S = Matrix(x.asDiagonal()) - x * x.transpose();
    const Matrix M = root_ * S * root_;
    Matrix C = range_.transpose() * M * range_;
    return 0.5 * (C + C.transpose());
  }

  Matrix root_;
  Matrix range_;
};

void require_symmetric(const Matrix& A, const std::string& what) {
  if (A.rows() != A.cols() || A.rows() < 2) throw ArgumentError(what + ": need a square n x n matrix, n >= 2");
  if (!A.allFinite()) throw ArgumentError(what + ": non-finite entry");
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ArgumentError(what + ": matrix is not symmetric");
  }
}

double min_eigenvalue(const Matrix& A) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  return es.eigenvalues().minCoeff();
}

}  // namespace

double Regularizer::vertex_value(std::size_t i) const {
  Vector e = Vector::Zero(size());
  e[i] = 1.0;
  return value(e);
}

// --- marginals ----------------------------------------------------------------

Marginal Marginal::uniform(double lo, double hi) { return {MarginalFamily::uniform, lo, hi, {}}; }
Marginal Marginal::exponential(double rate) { return {MarginalFamily::exponential, rate, 0.0, {}}; }
Marginal Marginal::logistic(double scale) { return {MarginalFamily::logistic, scale, 0.0, {}}; }
Marginal Marginal::normal(double sd) { return {MarginalFamily::normal, sd, 0.0, {}}; }
Marginal Marginal::custom(ScalarFunction quantile) {
  return {MarginalFamily::custom, 0.0, 0.0, std::move(quantile)};
}

void Marginal::validate() const {
  switch (family) {
    case MarginalFamily::uniform:
      if (!(a < b)) throw ArgumentError("marginal: uniform needs lo < hi");
      break;
    case MarginalFamily::exponential:
      if (!(a > 0)) throw ArgumentError("marginal: exponential rate must be positive");
      break;
    case MarginalFamily::logistic:
      if (!(a > 0)) throw ArgumentError("marginal: logistic scale must be positive");
      break;
    case MarginalFamily::normal:
      if (!(a > 0)) throw ArgumentError("marginal: normal sd must be positive");
      break;
    case MarginalFamily::custom: {
      if (!custom_quantile) throw ArgumentError("marginal: custom quantile is empty");
      double prev = -kInf;
      for (int k = 1; k < 100; ++k) {
        const double v = custom_quantile(k / 100.0);
        if (v < prev) throw ArgumentError("marginal: quantile is not nondecreasing");
        prev = v;
      }
      break;
    }
  }
}

double Marginal::quantile(double t) const {
  switch (family) {
    case MarginalFamily::uniform:
      return a + (b - a) * t;
    case MarginalFamily::exponential:
      return -std::log1p(-t) / a;
    case MarginalFamily::logistic:
      return a * (std::log(t) - std::log1p(-t));
    case MarginalFamily::normal:
      return a * normal_quantile(t);
    case MarginalFamily::custom:
      return custom_quantile(t);
  }
  return std::nan("");
}

double Marginal::upper_quantile(double x) const {
  switch (family) {
    case MarginalFamily::uniform:
      return a + (b - a) * (1.0 - x);
    case MarginalFamily::exponential:
      return -std::log(x) / a;
    case MarginalFamily::logistic:
      return a * (std::log1p(-x) - std::log(x));
    case MarginalFamily::normal:
      return -a * normal_quantile(x);
    case MarginalFamily::custom:
      return custom_quantile(1.0 - x);
  }
  return std::nan("");
}

double Marginal::upper_quantile_slope(double x) const {
  switch (family) {
    case MarginalFamily::uniform:
      return b - a;
    case MarginalFamily::exponential:
      return 1.0 / (a * x);
    case MarginalFamily::logistic:
      return a / (x * (1.0 - x));
    case MarginalFamily::normal:
      return a / normal_pdf(normal_quantile(x));
    case MarginalFamily::custom: {
      const double h = 1e-6 * std::min(x, 1.0 - x);
      return (custom_quantile(1.0 - x + h) - custom_quantile(1.0 - x - h)) / (2.0 * h);
    }
  }
  return std::nan("");
}

double Marginal::upper_tail_integral(double x, double quad_tol) const {
  if (x <= 0.0) return 0.0;
  x = std::min(x, 1.0);
  switch (family) {
    case MarginalFamily::uniform:
      return a * x + (b - a) * (x - 0.5 * x * x);
    case MarginalFamily::exponential:
      return (x - xlogx(x)) / a;
    case MarginalFamily::logistic:
      return -a * (xlogx(x) + xlogx(1.0 - x));
    case MarginalFamily::normal:
      // int_p^1 Phi^{-1}(t) dt = phi(Phi^{-1}(p)).
      return x >= 1.0 ? 0.0 : a * normal_pdf(normal_quantile(x));
    case MarginalFamily::custom:
      return integrate_1d(custom_quantile, 1.0 - x, 1.0 - 1e-12, quad_tol);
  }
  return std::nan("");
}

// --- constructors --------------------------------------------------------------

RegularizerPtr entropy_regularizer(double eta, std::size_t n) {
  if (!(eta > 0)) throw ArgumentError("entropy: eta must be positive");
  if (n < 2) throw ArgumentError("entropy: need n >= 2");
  return std::make_shared<EntropyRegularizer>(eta, n);
}

RegularizerPtr quadratic_regularizer(const Matrix& A) {
  require_symmetric(A, "quadratic");
  if (!(min_eigenvalue(A) > 0)) throw ArgumentError("quadratic: A must be positive definite");
  return std::make_shared<QuadraticRegularizer>(A);
}

RegularizerPtr log_barrier_regularizer(std::size_t n) {
  if (n < 2) throw ArgumentError("log_barrier: need n >= 2");
  return std::make_shared<LogBarrierRegularizer>(n);
}

RegularizerPtr mdm_regularizer(const MarginalSpec& marginals) {
  if (marginals.size() < 2) throw ArgumentError("mdm: need at least two marginals");
  for (const auto& m : marginals) m.validate();
  return std::make_shared<MarginalDistributionRegularizer>(marginals);
}

RegularizerPtr mmm_regularizer(const Vector& sigma) {
  if (sigma.size() < 2) throw ArgumentError("mmm: need n >= 2");
  if (!sigma.allFinite() || (sigma.array() < 0).any()) {
    throw ArgumentError("mmm: sigma must be finite and nonnegative");
  }
  return std::make_shared<MarginalMomentRegularizer>(sigma);
}

RegularizerPtr cmm_regularizer(const Matrix& cov) {
  require_symmetric(cov, "cmm");
  if (!(min_eigenvalue(cov) > 1e-10)) throw ArgumentError("cmm: covariance must be positive definite");
  return std::make_shared<CrossMomentRegularizer>(cov);
}

// --- solver ------------------------------------------------------------------

double verify_kkt(const Regularizer& reg, const Vector& mu, const Vector& x, double active_tol) {
  const Vector g = mu - reg.gradient(x);
  if (g.hasNaN()) throw NumericError("verify_kkt: NaN in regularizer gradient");
  double lambda = 0.0;
  int active = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] > active_tol) {
      lambda += g[i];
      ++active;
    }
  }
  if (active == 0) return kInf;
  lambda /= active;
  double stationarity = 0.0;
  double complementarity = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] > active_tol) {
      stationarity = std::max(stationarity, std::abs(g[i] - lambda));
    } else {
      complementarity = std::max(complementarity, g[i] - lambda);
    }
  }
  return stationarity + complementarity;
}

namespace {

// Hessian of V restricted to the tangent space of the face spanned by
// `support`: Z^T H Z with Z columns e_j - e_last.
Matrix reduced_hessian(const Regularizer& reg, const Vector& x, const std::vector<int>& support) {
  const int m = static_cast<int>(support.size()) - 1;
  const int last = support.back();
  Matrix Hz(x.size(), m);
  if (auto H = reg.hessian(x)) {
    for (int j = 0; j < m; ++j) Hz.col(j) = H->col(support[j]) - H->col(last);
  } else {
    for (int j = 0; j < m; ++j) {
      const double h = 1e-5 * std::min(x[support[j]], x[last]);
      Vector up = x;
      Vector down = x;
      up[support[j]] += h;
      up[last] -= h;
      down[support[j]] -= h;
      down[last] += h;
      Hz.col(j) = (reg.gradient(up) - reg.gradient(down)) / (2.0 * h);
    }
  }
  Matrix R(m, m);
  for (int i = 0; i < m; ++i) R.row(i) = Hz.row(support[i]) - Hz.row(last);
  return 0.5 * (R + R.transpose());
}

// Newton direction for max mu^T x - V(x) on the face of `support`.
std::optional<Vector> newton_direction(const Regularizer& reg, const Vector& x, const Vector& g,
                                       const std::vector<int>& support) {
  if (support.size() < 2) return std::nullopt;
  const Matrix R = reduced_hessian(reg, x, support);
  if (!R.allFinite()) return std::nullopt;
  const int m = static_cast<int>(support.size()) - 1;
  const int last = support.back();
  Vector rhs(m);
  for (int j = 0; j < m; ++j) rhs[j] = g[support[j]] - g[last];
  Eigen::LLT<Matrix> llt(R);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Vector u = llt.solve(rhs);
  Vector d = Vector::Zero(x.size());
  for (int j = 0; j < m; ++j) {
    d[support[j]] += u[j];
    d[last] -= u[j];
  }
  if (!d.allFinite()) return std::nullopt;
  return d;
}

}  // namespace

SolveResult solve_ram(const Regularizer& reg, const Vector& mu, const SolverOptions& opts) {
  const std::size_t n = reg.size();
  if (static_cast<std::size_t>(mu.size()) != n) throw ArgumentError("solve_ram: dimension mismatch");
  if (!mu.allFinite()) throw ArgumentError("solve_ram: non-finite utility");
  if (!reg.strictly_convex()) {
    throw NonStrictlyConvexError("solve_ram: regularizer " + reg.name() +
                                 " is not strictly convex; the maximizer may not be unique");
  }

  constexpr double kArmijo = 1e-4;
  const bool mirror = reg.boundary_barrier();
  auto objective = [&](const Vector& x) { return mu.dot(x) - reg.value(x); };
  // Slack for roundoff when comparing objective values near the optimum.
  auto accept = [&](double f_new, double f_old, double predicted) {
    return std::isfinite(f_new) &&
           f_new - f_old >= kArmijo * predicted -
                                8 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f_old));
  };
  auto gradient_at = [&](const Vector& x) {
    Vector g = mu - reg.gradient(x);
    if (g.hasNaN()) throw NumericError("solve_ram: NaN in regularizer gradient");
    return g;
  };

  SolveResult result;
  Vector x = Vector::Constant(n, 1.0 / n);
  double f = objective(x);
  double step = 1.0;
  if (opts.record_trace) result.objective_trace.push_back(f);

  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    Vector g = gradient_at(x);
    result.kkt_residual = verify_kkt(reg, mu, x, opts.active_tol);
    if (result.kkt_residual <= opts.kkt_tol) {
      result.converged = true;
      break;
    }

    // First-order step: entropic mirror ascent or projected gradient.
    bool moved = false;
    while (step > 1e-30) {
      Vector y;
      if (mirror) {
        const Vector z = x.array().log() + step * (g.array() - g.maxCoeff());
        y = (z.array() - z.maxCoeff()).exp().matrix();
        y /= y.sum();
        y = y.cwiseMax(kInteriorFloor);
        y /= y.sum();
      } else {
        y = project_to_simplex(x + step * g);
      }
      const double f_new = objective(y);
      if (accept(f_new, f, g.dot(y - x))) {
        moved = (y - x).cwiseAbs().maxCoeff() > 0.0;
        x = std::move(y);
        f = std::max(f, f_new);
        if (opts.record_trace) result.objective_trace.push_back(f_new);
        break;
      }
      step *= 0.5;
    }
    step = std::min(step * 2.0, 1e12);

    // Newton polish on the current face.
    g = gradient_at(x);
    std::vector<int> support;
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i] > (mirror ? opts.active_tol : 0.0)) support.push_back(static_cast<int>(i));
    }
    if (auto d = newton_direction(reg, x, g, support)) {
      double alpha = 1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if ((*d)[i] < 0) {
          // Barrier: stay strictly inside. Otherwise the face boundary is allowed.
          const double limit = mirror ? -0.99 * x[i] / (*d)[i] : -x[i] / (*d)[i];
          alpha = std::min(alpha, limit);
        }
      }
      for (int k = 0; k < 40 && alpha > 1e-12; ++k, alpha *= 0.5) {
        Vector y = (x + alpha * *d).cwiseMax(0.0);
        y /= y.sum();
        const double f_new = objective(y);
        if (accept(f_new, f, alpha * g.dot(*d))) {
          moved = moved || (y - x).cwiseAbs().maxCoeff() > 0.0;
          x = std::move(y);
          f = std::max(f, f_new);
          if (opts.record_trace) result.objective_trace.push_back(f_new);
          break;
        }
      }
    }

    if (!moved) {
      result.kkt_residual = verify_kkt(reg, mu, x, opts.active_tol);
      result.converged = result.kkt_residual <= opts.kkt_tol;
      ++iter;
      break;
    }
  }

  result.x_star = x;
  result.w_value = objective(x);
  result.iterations = iter;
  return result;
}

namespace {

class RamWelfare final : public WelfareModel {
 public:
  RamWelfare(RegularizerPtr reg, SolverOptions opts) : reg_(std::move(reg)), opts_(opts) {
    if (reg_->upper_bounded()) {
      Vector b(reg_->size());
      for (std::size_t i = 0; i < reg_->size(); ++i) b[i] = -reg_->vertex_value(i);
      if (b.allFinite()) bounds_ = b;
    }
  }

  std::size_t size() const override { return reg_->size(); }
  double value(const Vector& mu) const override { return solve(mu).w_value; }
  Vector gradient(const Vector& mu) const override { return solve(mu).x_star; }
  std::pair<double, Vector> evaluate(const Vector& mu) const override {
    SolveResult r = solve(mu);
    return {r.w_value, std::move(r.x_star)};
  }
  std::optional<Vector> superlinear_bounds() const override { return bounds_; }
  std::string name() const override { return "ram(" + reg_->name() + ")"; }

 private:
  SolveResult solve(const Vector& mu) const {
    check_input(mu);
    SolveResult r = solve_ram(*reg_, mu, opts_);
    if (!r.converged) {
      throw NumericError(name() + ": solver did not converge (kkt residual " +
                         std::to_string(r.kkt_residual) + ")");
    }
    return r;
  }

  RegularizerPtr reg_;
  SolverOptions opts_;
  std::optional<Vector> bounds_;
};

}  // namespace

ModelPtr ram_welfare(RegularizerPtr reg, SolverOptions opts) {
  if (!reg) throw ArgumentError("ram_welfare: null regularizer");
  if (!reg->strictly_convex()) {
    throw NonStrictlyConvexError("ram_welfare: regularizer " + reg->name() + " is not strictly convex");
  }
  return std::make_shared<RamWelfare>(std::move(reg), opts);
}

}  // namespace welfarechoice
