#include "welfarechoice/substitution.hpp"

#include "welfarechoice/duality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace welfarechoice {

std::string to_string(Relation r) {
  switch (r) {
    case Relation::substitutable: return "substitutable";
    case Relation::complementary: return "complementary";
    case Relation::indeterminate: return "indeterminate";
  }
  return "unknown";
}

std::string to_string(ModularityVerdict v) {
  switch (v) {
    case ModularityVerdict::modular_consistent: return "modular-consistent";
    case ModularityVerdict::supermodular_consistent: return "supermodular-consistent";
    case ModularityVerdict::submodular_consistent: return "submodular-consistent";
    case ModularityVerdict::neither: return "neither";
  }
  return "unknown";
}

namespace {

void check_index(const WelfareModel& m, int i) {
  if (i < 0 || static_cast<std::size_t>(i) >= m.size()) throw ArgumentError("alternative index out of range");
}

Relation classify(double estimate, double dead_zone) {
  if (estimate > dead_zone) return Relation::complementary;
  if (estimate < -dead_zone) return Relation::substitutable;
  return Relation::indeterminate;
}

// Column i holds (q(mu + h e_i) - q(mu - h e_i)) / 2h, i.e. entry (j, i) is dq_j/dmu_i.
Matrix jacobian(const WelfareModel& m, const UtilityVector& mu, double h) {
  const auto n = static_cast<Eigen::Index>(m.size());
  Matrix J(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector up = mu;
    Vector dn = mu;
    up[i] += h;
    dn[i] -= h;
    J.col(i) = (m.gradient(up) - m.gradient(dn)) / (2 * h);
  }
  return J;
}

}  // namespace

PairClassification classify_pair(const WelfareModel& m, const UtilityVector& mu, int i, int j,
                                 double h, double dead_zone) {
  check_index(m, i);
  check_index(m, j);
  require_utility(mu);
  if (!(h > 0)) throw ArgumentError("classify_pair: step must be positive");
  Vector up = mu;
  Vector dn = mu;
  up[i] += h;
  dn[i] -= h;
  PairClassification out;
  out.cross_partial = (m.gradient(up)[j] - m.gradient(dn)[j]) / (2 * h);
  out.relation = i == j ? Relation::complementary : classify(out.cross_partial, dead_zone);
  return out;
}

SubstitutionReport substitution_report(const WelfareModel& m, const UtilityVector& mu, double h,
                                       double dead_zone, double symmetry_tol) {
  require_utility(mu);
  const Matrix J = jacobian(m, mu, h);
  const auto n = J.rows();
  SubstitutionReport report;
  report.mu = mu;
  report.pairs.assign(static_cast<std::size_t>(n), std::vector<PairClassification>(static_cast<std::size_t>(n)));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      auto& p = report.pairs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      p.cross_partial = J(j, i);
      p.relation = i == j ? Relation::complementary : classify(p.cross_partial, dead_zone);
    }
  }
  report.symmetric = (J - J.transpose()).cwiseAbs().maxCoeff() <= symmetry_tol;
  return report;
}

std::vector<ScanRow> scan_line(const WelfareModel& m, const UtilityVector& mu_base, int i, int j,
                               double lo, double hi, int steps) {
  check_index(m, i);
  check_index(m, j);
  if (steps < 2) throw ArgumentError("scan_line: steps must be at least 2");
  if (!(lo < hi)) throw ArgumentError("scan_line: need lo < hi");
  std::vector<ScanRow> rows(static_cast<std::size_t>(steps));
  parallel_for(rows.size(), [&](std::size_t k) {
    Vector mu = mu_base;
    mu[i] = lo + (hi - lo) * static_cast<double>(k) / (steps - 1);
    rows[k].mu_i = mu[i];
    rows[k].q_j = m.gradient(mu)[j];
    rows[k].classification = classify_pair(m, mu, i, j);
  });
  return rows;
}

QuadraticCriterionReport quadratic_criterion(const Matrix& A) {
  if (A.rows() != A.cols() || A.rows() < 1) throw ArgumentError("quadratic_criterion: A must be square");
  if (!A.allFinite()) throw ArgumentError("quadratic_criterion: A has non-finite entries");
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + A.cwiseAbs().maxCoeff())) {
    throw ArgumentError("quadratic_criterion: A must be symmetric");
  }
  QuadraticCriterionReport report;
  report.min_margin = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(A.rows());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        if (i == j || j == k || i == k) continue;
        CriterionTriple t{i, j, k, A(j, k) - A(i, k) - A(i, j) + A(i, i), true};
        t.pass = t.margin >= 0.0;
        report.pass = report.pass && t.pass;
        if (t.margin < report.min_margin) {
          report.min_margin = t.margin;
          report.worst = t;
        }
        report.triples.push_back(t);
      }
    }
  }
  if (report.triples.empty()) report.min_margin = 0.0;
  return report;
}

ReducedRegularizer::ReducedRegularizer(RegularizerPtr reg, int i) : reg_(std::move(reg)), i_(i) {
  if (!reg_) throw ArgumentError("reduced_regularizer: null regularizer");
  if (reg_->size() < 2) throw ArgumentError("reduced_regularizer: need n >= 2");
  if (i < 0 || static_cast<std::size_t>(i) >= reg_->size()) {
    throw ArgumentError("reduced_regularizer: index out of range");
  }
}

ProbabilityVector ReducedRegularizer::reconstruct(const Vector& z) const {
  if (static_cast<std::size_t>(z.size()) != size()) throw ArgumentError("reduced_regularizer: wrong dimension");
  const auto n = static_cast<Eigen::Index>(reg_->size());
  Vector x(n);
  for (Eigen::Index k = 0, src = 0; k < n; ++k) {
    x[k] = k == i_ ? 1.0 - z.sum() : z[src++];
  }
  return x;
}

double ReducedRegularizer::operator()(const Vector& z) const {
  const Vector x = reconstruct(z);
  if (z.minCoeff() < 0.0 || z.sum() > 1.0) return std::numeric_limits<double>::infinity();
  return reg_->value(x);
}

ReducedRegularizer reduced_regularizer(RegularizerPtr reg, int i) {
  return ReducedRegularizer(std::move(reg), i);
}

DomainSampler box_sampler(std::size_t dim, double half_width) {
  if (dim == 0 || !(half_width > 0)) throw ArgumentError("box_sampler: bad arguments");
  return [dim, half_width](Rng& rng) {
    Vector v(static_cast<Eigen::Index>(dim));
    for (auto& c : v) c = half_width * (2 * rng.uniform() - 1);
    return v;
  };
}

DomainSampler simplex_body_sampler(std::size_t dim) {
  if (dim == 0) throw ArgumentError("simplex_body_sampler: dim must be positive");
  return [dim](Rng& rng) {
    // The first dim coordinates of a flat Dirichlet on dim + 1 points.
    Vector e(static_cast<Eigen::Index>(dim + 1));
    for (auto& c : e) c = -std::log(rng.uniform());
    return Vector((1.0 - 1e-6) * e.head(static_cast<Eigen::Index>(dim)) / e.sum());
  };
}

ModularityReport check_modularity(const ScalarField& f, const DomainSampler& sampler, int samples,
                                  std::uint64_t seed, double tol) {
  if (samples < 1) throw ArgumentError("check_modularity: samples must be at least 1");
  ModularityReport report;
  Rng rng(seed);
  double worst_super = 0.0;
  double worst_sub = 0.0;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const Vector x = sampler(rng);
    const Vector y = sampler(rng);
    const double fx = f(x);
    const double fy = f(y);
    if (!std::isfinite(fx) || !std::isfinite(fy)) continue;
    const double fj = f(x.cwiseMax(y));
    const double fm = f(x.cwiseMin(y));
    ++report.pairs_tested;
    const double lhs = fj + fm;
    const double rhs = fx + fy;
    const double gap = lhs == kInf ? kInf : lhs - rhs;
    const double scale = tol * (1.0 + std::abs(fx) + std::abs(fy));
    if (-gap > scale && -gap > worst_super) {
      worst_super = -gap;
      report.supermodular_ok = false;
      report.supermodular_witness = LatticeWitness{x, y, gap};
    }
    if (gap > scale && gap > worst_sub) {
      worst_sub = gap;
      report.submodular_ok = false;
      report.submodular_witness = LatticeWitness{x, y, gap};
    }
  }
  if (report.supermodular_ok && report.submodular_ok) {
    report.verdict = ModularityVerdict::modular_consistent;
  } else if (report.supermodular_ok) {
    report.verdict = ModularityVerdict::supermodular_consistent;
  } else if (report.submodular_ok) {
    report.verdict = ModularityVerdict::submodular_consistent;
  } else {
    report.verdict = ModularityVerdict::neither;
  }
  return report;
}

SubstitutabilityCheck substitutable_model_check(const WelfareModel& m, int samples,
                                                std::uint64_t seed, double box) {
  if (samples < 2) throw ArgumentError("substitutable_model_check: samples must be at least 2");
  const std::size_t n = m.size();
  SubstitutabilityCheck out;
  out.modularity = check_modularity([&m](const Vector& mu) { return m.value(mu); },
                                    box_sampler(n, box), samples, seed);

  std::vector<UtilityVector> points;
  Rng rng(seed, 1);
  const DomainSampler in_box = box_sampler(n, box);
  for (int s = 0; s < samples / 2; ++s) points.push_back(in_box(rng));
  if (n >= 2) {
    const DomainSampler target = simplex_body_sampler(n - 1);
    for (int s = samples / 2; s < samples; ++s) {
      const Vector z = target(rng);
      Vector x(static_cast<Eigen::Index>(n));
      x.head(static_cast<Eigen::Index>(n - 1)) = z;
      x[static_cast<Eigen::Index>(n - 1)] = 1.0 - z.sum();
      if (x.minCoeff() < 1e-3) continue;
      try {
        const InversionResult inv = invert_choice(m, x);
        if (inv.converged) points.push_back(inv.mu);
      } catch (const NumericError&) {
        // Inversion is a best-effort way to reach interior choices.
      }
    }
  }

  std::vector<std::optional<ComplementarityWitness>> found(points.size());
  parallel_for(points.size(), [&](std::size_t p) {
    const Matrix J = jacobian(m, points[p], 1e-2);
    for (Eigen::Index i = 0; i < J.rows(); ++i) {
      for (Eigen::Index j = 0; j < J.rows(); ++j) {
        if (i == j || J(j, i) <= 1e-7) continue;
        if (!found[p] || J(j, i) > found[p]->cross_partial) {
          found[p] = ComplementarityWitness{points[p], static_cast<int>(i), static_cast<int>(j), J(j, i)};
        }
      }
    }
  });
  out.points_tested = static_cast<int>(points.size());
  for (const auto& f : found) {
    if (f && (!out.witness || f->cross_partial > out.witness->cross_partial)) out.witness = f;
  }
  out.substitutable_consistent = out.modularity.submodular_ok && !out.witness;
  return out;
}

}  // namespace welfarechoice
