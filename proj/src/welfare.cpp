#include "welfarechoice/welfare.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace welfarechoice {

void WelfareModel::check_input(const Vector& mu) const {
  if (static_cast<std::size_t>(mu.size()) != size()) {
    throw ArgumentError(name() + ": expected " + std::to_string(size()) + " utilities, got " +
                        std::to_string(mu.size()));
  }
  if (!mu.allFinite()) throw ArgumentError(name() + ": non-finite utility");
}

FunctionWelfare::FunctionWelfare(std::string name, std::size_t n, ScalarField value,
                                 std::function<Vector(const Vector&)> gradient,
                                 std::optional<Vector> bounds, double fd_step)
    : name_(std::move(name)),
      n_(n),
      value_(std::move(value)),
      gradient_(std::move(gradient)),
      bounds_(std::move(bounds)),
      fd_step_(fd_step) {
  if (n_ < 2) throw ArgumentError("FunctionWelfare: need n >= 2");
  if (!value_) throw ArgumentError("FunctionWelfare: value callable is empty");
}

double FunctionWelfare::value(const Vector& mu) const {
  check_input(mu);
  return value_(mu);
}

Vector FunctionWelfare::gradient(const Vector& mu) const {
  check_input(mu);
  if (gradient_) return gradient_(mu);
  return finite_diff_gradient(value_, mu, fd_step_);
}

namespace {

class MnlWelfare final : public WelfareModel {
 public:
  MnlWelfare(double eta, std::size_t n) : eta_(eta), n_(n) {}

  std::size_t size() const override { return n_; }
  double value(const Vector& mu) const override {
    check_input(mu);
    return eta_ * log_sum_exp(mu / eta_);
  }
  Vector gradient(const Vector& mu) const override {
    check_input(mu);
    return softmax(mu / eta_);
  }
  std::optional<Vector> superlinear_bounds() const override { return Vector::Zero(n_); }
  std::string name() const override { return "mnl(eta=" + std::to_string(eta_) + ")"; }

 private:
  double eta_;
  std::size_t n_;
};

class NestedLogitWelfare final : public WelfareModel {
 public:
  NestedLogitWelfare(NestStructure nests, std::size_t n) : nests_(std::move(nests)), n_(n) {}

  std::size_t size() const override { return n_; }

  double value(const Vector& mu) const override {
    check_input(mu);
    return log_sum_exp(nest_values(mu));
  }

  Vector gradient(const Vector& mu) const override {
    check_input(mu);
    const Vector inclusive = nest_values(mu);
    const Vector nest_share = softmax(inclusive);
    Vector q(n_);
    for (std::size_t l = 0; l < nests_.nests.size(); ++l) {
      const auto& members = nests_.nests[l];
      const double lam = nests_.lambda[l];
      Vector scaled(members.size());
      for (std::size_t k = 0; k < members.size(); ++k) scaled[k] = mu[members[k]] / lam;
      const Vector within = softmax(scaled);
      for (std::size_t k = 0; k < members.size(); ++k) q[members[k]] = nest_share[l] * within[k];
    }
    return q;
  }

  std::optional<Vector> superlinear_bounds() const override { return Vector::Zero(n_); }
  std::string name() const override { return "nested_logit"; }

 private:
  // lambda_l * logsumexp(mu_i / lambda_l) per nest.
  Vector nest_values(const Vector& mu) const {
    Vector out(nests_.nests.size());
    for (std::size_t l = 0; l < nests_.nests.size(); ++l) {
      const auto& members = nests_.nests[l];
      const double lam = nests_.lambda[l];
      Vector scaled(members.size());
      for (std::size_t k = 0; k < members.size(); ++k) scaled[k] = mu[members[k]] / lam;
      out[l] = lam * log_sum_exp(scaled);
    }
    return out;
  }

  NestStructure nests_;
  std::size_t n_;
};

class GevWelfare final : public WelfareModel {
 public:
  GevWelfare(GEVGenerator gen, std::size_t n, std::string name)
      : gen_(std::move(gen)), n_(n), name_(std::move(name)) {}

  std::size_t size() const override { return n_; }

  // Homogeneity lets us shift by max(mu): w = m + eta log H(e^{mu - m}).
  double value(const Vector& mu) const override {
    check_input(mu);
    const double m = mu.maxCoeff();
    const double h = gen_.H((mu.array() - m).exp().matrix());
    if (!(h > 0) || !std::isfinite(h)) throw NumericError(name_ + ": generator value not positive");
    return m + gen_.eta * std::log(h);
  }

  Vector gradient(const Vector& mu) const override {
    check_input(mu);
    if (!gen_.partials) {
      return finite_diff_gradient([this](const Vector& x) { return value(x); }, mu, 1e-6);
    }
    const double m = mu.maxCoeff();
    const Vector y = (mu.array() - m).exp().matrix();
    const double h = gen_.H(y);
    if (!(h > 0)) throw NumericError(name_ + ": generator value not positive");
    return (gen_.eta * y.cwiseProduct(gen_.partials(y)) / h).eval();
  }

  std::string name() const override { return name_; }

 private:
  GEVGenerator gen_;
  std::size_t n_;
  std::string name_;
};

class PairedLogsumWelfare final : public WelfareModel {
 public:
  std::size_t size() const override { return 3; }

  double value(const Vector& mu) const override {
    check_input(mu);
    return log_sum_exp(terms(mu));
  }

  Vector gradient(const Vector& mu) const override {
    check_input(mu);
    const Vector s = softmax(terms(mu));
    return Vector{{s[0] + 0.5 * s[3], s[1] + 0.5 * s[3], s[2]}};
  }

  std::optional<Vector> superlinear_bounds() const override { return Vector::Zero(3); }
  std::string name() const override { return "paired_logsum"; }

 private:
  static Vector terms(const Vector& mu) {
    return Vector{{mu[0], mu[1], mu[2], 0.5 * (mu[0] + mu[1])}};
  }
};

}  // namespace

void NestStructure::validate(std::size_t n) const {
  if (nests.empty()) throw ArgumentError("nests: at least one nest required");
  if (lambda.size() != nests.size()) throw ArgumentError("lambda: one value per nest required");
  std::vector<int> seen(n, 0);
  for (std::size_t l = 0; l < nests.size(); ++l) {
    if (nests[l].empty()) throw ArgumentError("nests: nest " + std::to_string(l + 1) + " is empty");
    if (!(lambda[l] > 0.0 && lambda[l] <= 1.0)) {
      throw ArgumentError("lambda: value for nest " + std::to_string(l + 1) + " must lie in (0, 1]");
    }
    for (int i : nests[l]) {
      if (i < 0 || static_cast<std::size_t>(i) >= n) throw ArgumentError("nests: index out of range");
      ++seen[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (seen[i] != 1) {
      throw ArgumentError("nests: alternative " + std::to_string(i + 1) +
                          " must belong to exactly one nest");
    }
  }
}

ModelPtr mnl_welfare(double eta, std::size_t n) {
  if (!(eta > 0) || !std::isfinite(eta)) throw ArgumentError("mnl: eta must be positive");
  if (n < 2) throw ArgumentError("mnl: need n >= 2");
  return std::make_shared<MnlWelfare>(eta, n);
}

ModelPtr nested_logit_welfare(const NestStructure& nests, std::size_t n) {
  if (n < 2) throw ArgumentError("nested_logit: need n >= 2");
  nests.validate(n);
  return std::make_shared<NestedLogitWelfare>(nests, n);
}

GEVGenerator mnl_generator(double eta, std::size_t n) {
  if (!(eta > 0)) throw ArgumentError("mnl generator: eta must be positive");
  GEVGenerator gen;
  gen.eta = eta;
  gen.H = [eta](const Vector& y) { return y.array().pow(1.0 / eta).sum(); };
  gen.partials = [eta](const Vector& y) {
    return ((1.0 / eta) * y.array().pow(1.0 / eta - 1.0)).matrix().eval();
  };
  (void)n;
  return gen;
}

GEVGenerator nested_logit_generator(const NestStructure& nests, std::size_t n) {
  nests.validate(n);
  GEVGenerator gen;
  gen.eta = 1.0;
  gen.H = [nests](const Vector& y) {
    double total = 0.0;
    for (std::size_t l = 0; l < nests.nests.size(); ++l) {
      double s = 0.0;
      for (int i : nests.nests[l]) s += std::pow(y[i], 1.0 / nests.lambda[l]);
      total += std::pow(s, nests.lambda[l]);
    }
    return total;
  };
  gen.partials = [nests](const Vector& y) {
    Vector g = Vector::Zero(y.size());
    for (std::size_t l = 0; l < nests.nests.size(); ++l) {
      const double lam = nests.lambda[l];
      double s = 0.0;
      for (int i : nests.nests[l]) s += std::pow(y[i], 1.0 / lam);
      const double outer = std::pow(s, lam - 1.0);
      for (int i : nests.nests[l]) g[i] = outer * std::pow(y[i], 1.0 / lam - 1.0);
    }
    return g;
  };
  return gen;
}

GEVGenerator power_sum_generator(double eta, std::vector<double> coef, Matrix exponents) {
  if (!(eta > 0)) throw ArgumentError("gev_custom: eta must be positive");
  if (coef.empty() || static_cast<Eigen::Index>(coef.size()) != exponents.rows()) {
    throw ArgumentError("gev_custom: one coefficient per term required");
  }
  for (Eigen::Index t = 0; t < exponents.rows(); ++t) {
    if (!(coef[t] >= 0)) throw ArgumentError("gev_custom: coefficients must be nonnegative");
    if ((exponents.row(t).array() < 0).any()) {
      throw ArgumentError("gev_custom: exponents must be nonnegative");
    }
    if (std::abs(exponents.row(t).sum() - 1.0 / eta) > 1e-12) {
      throw ArgumentError("gev_custom: exponents of term " + std::to_string(t + 1) +
                          " must sum to 1/eta");
    }
  }
  GEVGenerator gen;
  gen.eta = eta;
  gen.H = [coef, exponents](const Vector& y) {
    double total = 0.0;
    for (Eigen::Index t = 0; t < exponents.rows(); ++t) {
      double term = coef[t];
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (exponents(t, i) != 0.0) term *= std::pow(y[i], exponents(t, i));
      }
      total += term;
    }
    return total;
  };
  gen.partials = [coef, exponents](const Vector& y) {
    Vector g = Vector::Zero(y.size());
    for (Eigen::Index t = 0; t < exponents.rows(); ++t) {
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double a = exponents(t, i);
        if (a == 0.0) continue;
        double term = coef[t] * a * std::pow(y[i], a - 1.0);
        for (Eigen::Index j = 0; j < y.size(); ++j) {
          if (j != i && exponents(t, j) != 0.0) term *= std::pow(y[j], exponents(t, j));
        }
        g[i] += term;
      }
    }
    return g;
  };
  return gen;
}

GeneratorReport check_generator(const GEVGenerator& gen, std::size_t n, int samples,
                                std::uint64_t seed) {
  if (!gen.H) throw ArgumentError("generator: H is empty");
  GeneratorReport report;
  Rng rng(seed, 0x6E6);
  const int max_order = static_cast<int>(std::min<std::size_t>(3, n));
  report.max_order_checked = max_order;
  for (int s = 0; s < samples; ++s) {
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(-3.0 + 6.0 * rng.uniform());
    const double h = gen.H(y);
    if (!(h > 0) || !std::isfinite(h)) {
      if (report.positive) {
        report.positive = false;
        report.witness = y;
        report.detail = "H(y) <= 0";
      }
      continue;
    }
    const double alpha = std::exp(-2.0 + 4.0 * rng.uniform());
    const double scaled = gen.H((alpha * y).eval());
    if (std::abs(scaled - std::pow(alpha, 1.0 / gen.eta) * h) > 1e-8 * (1.0 + std::abs(h))) {
      if (report.homogeneous) {
        report.homogeneous = false;
        report.witness = y;
        report.detail = "H(alpha y) != alpha^(1/eta) H(y) at alpha=" + std::to_string(alpha);
      }
    }
    if (!report.alternating_signs || s >= 50) continue;
    // Sign pattern (-1)^k d^k H <= 0 over every distinct index subset.
    Vector yd(n);
    for (std::size_t i = 0; i < n; ++i) yd[i] = std::exp(-1.0 + 2.0 * rng.uniform());
    const double hd = gen.H(yd);
    const double ymin = yd.minCoeff();
    const double step = 1e-2 * ymin;
    for (int k = 1; k <= max_order; ++k) {
      std::vector<int> idx(k);
      std::vector<bool> pick(n, false);
      std::fill(pick.begin(), pick.begin() + k, true);
      do {
        int c = 0;
        for (std::size_t i = 0; i < n; ++i) {
          if (pick[i]) idx[c++] = static_cast<int>(i);
        }
        const double d = mixed_partial(gen.H, yd, idx, step);
        const double signed_value = (k % 2 == 0 ? 1.0 : -1.0) * d;
        if (signed_value > 1e-3 * (1.0 + hd) / std::pow(ymin, k)) {
          report.alternating_signs = false;
          report.witness = yd;
          report.detail = "order-" + std::to_string(k) + " cross partial has the wrong sign";
          break;
        }
      } while (std::prev_permutation(pick.begin(), pick.end()));
      if (!report.alternating_signs) break;
    }
  }
  return report;
}

ModelPtr gev_welfare(const GEVGenerator& gen, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw ArgumentError("gev: need n >= 2");
  if (!(gen.eta > 0)) throw ArgumentError("gev: eta must be positive");
  if (!gen.H) throw ArgumentError("gev: generator H is empty");
  // Sign conditions are reported by check_generator but do not block
  // construction: non-GEV log-sum welfare functions are legitimate models.
  Rng rng(seed, 0x9E7);
  for (int s = 0; s < 200; ++s) {
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(-3.0 + 6.0 * rng.uniform());
    const double h = gen.H(y);
    if (!(h > 0) || !std::isfinite(h)) throw ArgumentError("gev: generator-invalid (H <= 0)");
    const double alpha = std::exp(-2.0 + 4.0 * rng.uniform());
    if (std::abs(gen.H((alpha * y).eval()) - std::pow(alpha, 1.0 / gen.eta) * h) >
        1e-8 * (1.0 + std::abs(h))) {
      throw ArgumentError("gev: generator-invalid (not homogeneous of degree 1/eta)");
    }
  }
  return std::make_shared<GevWelfare>(gen, n, "gev");
}

ModelPtr paired_logsum_welfare() { return std::make_shared<PairedLogsumWelfare>(); }

SuperlinearBounds resolve_superlinear_bounds(const WelfareModel& m) {
  if (auto b = m.superlinear_bounds()) return {*b, false};
  const std::size_t n = m.size();
  const int per_dim = n <= 3 ? 9 : n == 4 ? 7 : n == 5 ? 5 : 3;
  Vector b = Vector::Constant(n, std::numeric_limits<double>::infinity());
  std::vector<int> counter(n, 0);
  Vector mu(n);
  while (true) {
    for (std::size_t i = 0; i < n; ++i) mu[i] = -20.0 + 40.0 * counter[i] / (per_dim - 1);
    const double w = m.value(mu);
    for (std::size_t i = 0; i < n; ++i) b[i] = std::min(b[i], w - mu[i]);
    std::size_t pos = 0;
    while (pos < n && ++counter[pos] == per_dim) counter[pos++] = 0;
    if (pos == n) break;
  }
  return {b, true};
}

AxiomReport check_axioms(const WelfareModel& m, int samples, double box, std::uint64_t seed) {
  if (samples < 1) throw ArgumentError("check_axioms: samples must be >= 1");
  const std::size_t n = m.size();
  Rng rng(seed, 0xA710);
  auto draw = [&](double lo, double hi) {
    Vector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * rng.uniform();
    return v;
  };
  auto record = [](AxiomVerdict& verdict, double violation, Witness w) {
    if (violation > verdict.worst_violation) {
      verdict.worst_violation = violation;
      verdict.pass = false;
      w.violation = violation;
      verdict.witness = std::move(w);
    }
  };

  AxiomReport report;
  for (int s = 0; s < samples; ++s) {
    // Monotonicity on a coordinatewise-dominating pair.
    {
      const Vector mu = draw(-box, box);
      const Vector nu = mu + draw(0.0, box);
      const double w0 = m.value(mu);
      const double w1 = m.value(nu);
      const double tol = 1e-9 * (1.0 + std::abs(w0));
      if (w1 < w0 - tol) record(report.monotonic, w0 - w1, {mu, nu, 0.0, 0.0});
    }
    // Translation invariance.
    {
      const Vector mu = draw(-box, box);
      const double t = -box + 2.0 * box * rng.uniform();
      const double w0 = m.value(mu);
      const double w1 = m.value((mu.array() + t).matrix());
      const double tol = 1e-8 + 64 * std::numeric_limits<double>::epsilon() * (std::abs(w0) + std::abs(t));
      const double gap = std::abs(w1 - w0 - t);
      if (gap > tol) record(report.translation_invariant, gap, {mu, Vector(), t, 0.0});
    }
    // Midpoint convexity.
    {
      const Vector a = draw(-box, box);
      const Vector b = draw(-box, box);
      const double wa = m.value(a);
      const double wb = m.value(b);
      const double wm = m.value((0.5 * (a + b)).eval());
      const double tol = 1e-9 * (1.0 + 0.5 * (std::abs(wa) + std::abs(wb)));
      const double gap = wm - 0.5 * (wa + wb);
      if (gap > tol) record(report.convex, gap, {a, b, 0.0, 0.0});
    }
  }
  report.samples_used = samples;
  return report;
}

SuperlinearReport check_superlinear(const WelfareModel& m, const Vector& b, int samples,
                                    double box, std::uint64_t seed) {
  const std::size_t n = m.size();
  if (static_cast<std::size_t>(b.size()) != n) throw ArgumentError("check_superlinear: b has wrong size");
  Rng rng(seed, 0x5E1);
  SuperlinearReport report;
  report.worst_gap = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    Vector mu(n);
    for (std::size_t i = 0; i < n; ++i) mu[i] = -box + 2.0 * box * rng.uniform();
    // Every fourth sample stretches one coordinate to probe the asymptote.
    if (s % 4 == 3) mu[s % n] += 4.0 * box;
    const double w = m.value(mu);
    for (std::size_t i = 0; i < n; ++i) {
      const double gap = w - mu[i] - b[i];
      if (gap < report.worst_gap) {
        report.worst_gap = gap;
        if (gap < -1e-9 * (1.0 + std::abs(w))) {
          report.pass = false;
          report.witness_mu = mu;
          report.witness_index = static_cast<int>(i);
        }
      }
    }
  }
  report.samples_used = samples;
  return report;
}

}  // namespace welfarechoice
