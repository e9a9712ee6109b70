#include "welfarechoice/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace welfarechoice {

namespace {

class ScaledWelfare final : public WelfareModel {
 public:
  ScaledWelfare(ModelPtr inner, double eta) : inner_(std::move(inner)), eta_(eta) {}

  std::size_t size() const override { return inner_->size(); }
  double value(const Vector& mu) const override {
    check_input(mu);
    return eta_ * inner_->value(mu / eta_);
  }
  Vector gradient(const Vector& mu) const override {
    check_input(mu);
    return inner_->gradient(mu / eta_);
  }
  std::pair<double, Vector> evaluate(const Vector& mu) const override {
    check_input(mu);
    auto [w, q] = inner_->evaluate(mu / eta_);
    return {eta_ * w, std::move(q)};
  }
  std::optional<Vector> superlinear_bounds() const override {
    if (auto b = inner_->superlinear_bounds()) return Vector(eta_ * *b);
    return std::nullopt;
  }
  std::string name() const override { return "scale(" + inner_->name() + ")"; }

 private:
  ModelPtr inner_;
  double eta_;
};

class MixtureWelfare final : public WelfareModel {
 public:
  MixtureWelfare(std::vector<MixtureComponent> components, std::size_t n)
      : components_(std::move(components)), n_(n) {}

  std::size_t size() const override { return n_; }
  double value(const Vector& mu) const override { return evaluate(mu).first; }
  Vector gradient(const Vector& mu) const override { return evaluate(mu).second; }
  std::pair<double, Vector> evaluate(const Vector& mu) const override {
    check_input(mu);
    double w = 0.0;
    Vector q = Vector::Zero(static_cast<Eigen::Index>(n_));
    for (const auto& c : components_) {
      if (c.weight == 0.0) continue;
      Vector sub(static_cast<Eigen::Index>(c.indices.size()));
      for (std::size_t k = 0; k < c.indices.size(); ++k) sub[static_cast<Eigen::Index>(k)] = mu[c.indices[k]];
      auto [wk, qk] = c.model->evaluate(sub);
      w += c.weight * wk;
      for (std::size_t k = 0; k < c.indices.size(); ++k) {
        q[c.indices[k]] += c.weight * qk[static_cast<Eigen::Index>(k)];
      }
    }
    return {w, q};
  }
  std::string name() const override { return "mix"; }

 private:
  std::vector<MixtureComponent> components_;
  std::size_t n_;
};

class CrossedWelfare final : public WelfareModel {
 public:
  CrossedWelfare(ModelPtr inner, Matrix A) : inner_(std::move(inner)), A_(std::move(A)) {
    // Rows equal to a unit vector e_i give w(mu) >= mu_i + b_row.
    if (auto b = inner_->superlinear_bounds()) {
      Vector out = Vector::Constant(A_.cols(), -std::numeric_limits<double>::infinity());
      for (Eigen::Index r = 0; r < A_.rows(); ++r) {
        Eigen::Index i = 0;
        if (A_.row(r).maxCoeff(&i) == 1.0) out[i] = std::max(out[i], (*b)[r]);
      }
      if (out.allFinite()) bounds_ = out;
    }
  }

  std::size_t size() const override { return static_cast<std::size_t>(A_.cols()); }
  double value(const Vector& mu) const override {
    check_input(mu);
    return inner_->value(A_ * mu);
  }
  Vector gradient(const Vector& mu) const override {
    check_input(mu);
    return A_.transpose() * inner_->gradient(A_ * mu);
  }
  std::pair<double, Vector> evaluate(const Vector& mu) const override {
    check_input(mu);
    auto [w, q] = inner_->evaluate(A_ * mu);
    return {w, A_.transpose() * q};
  }
  std::optional<Vector> superlinear_bounds() const override { return bounds_; }
  std::string name() const override { return "cross(" + inner_->name() + ")"; }

 private:
  ModelPtr inner_;
  Matrix A_;
  std::optional<Vector> bounds_;
};

}  // namespace

ModelPtr scale(ModelPtr inner, double eta) {
  if (!inner) throw ArgumentError("scale: null model");
  if (!(eta > 0) || !std::isfinite(eta)) throw ArgumentError("scale: eta must be positive");
  return std::make_shared<ScaledWelfare>(std::move(inner), eta);
}

ModelPtr mix(std::vector<MixtureComponent> components, std::size_t n) {
  if (components.empty()) throw ArgumentError("mix: no components");
  if (n == 0) throw ArgumentError("mix: n must be positive");
  std::vector<bool> covered(n, false);
  double total = 0.0;
  for (std::size_t k = 0; k < components.size(); ++k) {
    const auto& c = components[k];
    const std::string where = "mix: component " + std::to_string(k + 1);
    if (!c.model) throw ArgumentError(where + " has no model");
    if (!(c.weight >= 0) || !std::isfinite(c.weight)) throw ArgumentError(where + " weight must be >= 0");
    if (c.indices.empty() || c.indices.size() != c.model->size()) {
      throw ArgumentError(where + " index count does not match its model size");
    }
    std::vector<bool> seen(n, false);
    for (int i : c.indices) {
      if (i < 0 || static_cast<std::size_t>(i) >= n) throw ArgumentError(where + " index out of range");
      if (seen[static_cast<std::size_t>(i)]) throw ArgumentError(where + " repeats an index");
      seen[static_cast<std::size_t>(i)] = true;
      covered[static_cast<std::size_t>(i)] = true;
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ArgumentError("mix: weights must sum to 1");
  for (std::size_t i = 0; i < n; ++i) {
    if (!covered[i]) throw ArgumentError("mix: alternative " + std::to_string(i + 1) + " is not covered");
  }
  return std::make_shared<MixtureWelfare>(std::move(components), n);
}

ModelPtr cross(ModelPtr inner, const Matrix& A) {
  if (!inner) throw ArgumentError("cross: null model");
  if (static_cast<std::size_t>(A.rows()) != inner->size()) {
    throw ArgumentError("cross: A must have one row per inner alternative");
  }
  if (A.cols() < 1 || !A.allFinite()) throw ArgumentError("cross: A must be finite with at least one column");
  if (A.minCoeff() < 0.0) throw ArgumentError("cross: A must be nonnegative");
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    if (std::abs(A.row(r).sum() - 1.0) > 1e-12) {
      throw ArgumentError("cross: row " + std::to_string(r + 1) + " of A must sum to 1");
    }
  }
  return std::make_shared<CrossedWelfare>(std::move(inner), A);
}

}  // namespace welfarechoice
