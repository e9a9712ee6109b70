#include "oracles.hpp"
#include "welfarechoice/duality.hpp"

#include <doctest.h>

using namespace welfarechoice;

namespace {

const Matrix kHalfA{{1.5, 1, 0}, {1, 1.5, 1}, {0, 1, 1.5}};

std::vector<UtilityVector> cube_grid(double lo, double hi, double step) {
  std::vector<UtilityVector> out;
  for (double a = lo; a <= hi + 1e-9; a += step)
    for (double b = lo; b <= hi + 1e-9; b += step)
      for (double c = lo; c <= hi + 1e-9; c += step) out.push_back(Vector{{a, b, c}});
  return out;
}

}  // namespace

TEST_SUITE("duality") {

TEST_CASE("conjugate of logit welfare is negative entropy") {
  const ModelPtr m = mnl_welfare(1.0, 3);
  Rng rng(21);
  for (int s = 0; s < 20; ++s) {
    const Vector x = oracle::random_interior(rng, 3, 0.01);
    const ConjugateResult r = conjugate_V(*m, x);
    CHECK(r.converged);
    CHECK(r.value == doctest::Approx(oracle::neg_entropy(x)).epsilon(1e-9));
    CHECK(std::abs(r.maximizer.sum()) < 1e-9);
    // The maximizer is grad V = log x up to a constant.
    const Vector lx = x.array().log().matrix();
    const Vector centered = (lx.array() - lx.mean()).matrix();
    CHECK((r.maximizer - centered).cwiseAbs().maxCoeff() < 1e-6);
  }
  CHECK(conjugate_V(*mnl_welfare(2.0, 2), Vector{{0.5, 0.5}}).value == doctest::Approx(-2 * std::log(2.0)));
}

TEST_CASE("conjugate of quadratic RAM welfare recovers the quadratic") {
  const ModelPtr m = ram_welfare(quadratic_regularizer(kHalfA));
  Rng rng(22);
  for (int s = 0; s < 5; ++s) {
    const Vector x = oracle::random_interior(rng, 3, 0.05);
    CHECK(conjugate_V(*m, x).value == doctest::Approx(x.dot(kHalfA * x)).epsilon(1e-7));
  }
}

TEST_CASE("conjugate is convex along segments") {
  const ModelPtr m = paired_logsum_welfare();
  Rng rng(23);
  for (int s = 0; s < 10; ++s) {
    const Vector a = oracle::random_interior(rng, 3, 0.05);
    const Vector b = oracle::random_interior(rng, 3, 0.05);
    const double mid = conjugate_V(*m, (0.5 * (a + b)).eval()).value;
    CHECK(mid <= 0.5 * (conjugate_V(*m, a).value + conjugate_V(*m, b).value) + 1e-8);
  }
}

TEST_CASE("conjugate rejects boundary points") {
  const ModelPtr m = mnl_welfare(1.0, 3);
  CHECK_THROWS_AS(conjugate_V(*m, Vector{{0.5, 0.5, 0.0}}), DomainError);
  CHECK_THROWS_AS(conjugate_V(*m, Vector{{0.5, 0.5, 1e-8}}), ArgumentError);
  CHECK_THROWS_AS(conjugate_V(*m, Vector{{0.5, 0.6, 0.1}}), ArgumentError);
}

TEST_CASE("choice inversion") {
  Rng rng(24);
  const std::vector<ModelPtr> models{mnl_welfare(1.0, 3), paired_logsum_welfare(),
                                     ram_welfare(quadratic_regularizer(kHalfA))};
  for (const ModelPtr& m : models) {
    for (int s = 0; s < 5; ++s) {
      const Vector x = oracle::random_interior(rng, 3, 0.02);
      const InversionResult r = invert_choice(*m, x);
      CHECK_MESSAGE(r.converged, m->name());
      CHECK(r.residual <= 1e-6);
      CHECK((m->gradient(r.mu) - x).cwiseAbs().maxCoeff() <= 1e-6);
      CHECK(std::abs(r.mu.sum()) < 1e-9);
    }
  }
  // Logit inversion is log x up to a constant.
  const Vector x{{0.2, 0.3, 0.5}};
  const InversionResult r = invert_choice(*mnl_welfare(1, 3), x);
  CHECK(r.mu[2] - r.mu[0] == doctest::Approx(std::log(2.5)).epsilon(1e-8));
}

TEST_CASE("anchor distributions") {
  const ModelPtr m = mnl_welfare(1.0, 3);
  const std::vector<UtilityVector> anchors = cube_grid(-2, 2, 1);
  const auto family = anchor_family(*m, anchors);
  REQUIRE(family.size() == anchors.size());
  for (const AnchorDistribution& a : family) {
    CHECK(a.weights.sum() == doctest::Approx(1.0));
    CHECK(a.penalty >= 1.0);
    // Equality at the anchor itself.
    CHECK(a.expected_max(a.z) == doctest::Approx(m->value(a.z)).epsilon(1e-9));
  }
  Rng rng(25);
  double worst_gap = 0.0;
  for (int s = 0; s < 300; ++s) {
    const Vector mu = oracle::random_vector(rng, 3, -2, 2);
    const double sup = semiparametric_sup(family, mu);
    const double w = m->value(mu);
    CHECK(sup <= w + 1e-9);
    worst_gap = std::max(worst_gap, w - sup);
  }
  CHECK(worst_gap <= 0.05);
}

TEST_CASE("anchor bound is monotone in the anchor set") {
  const ModelPtr m = paired_logsum_welfare();
  Rng rng(26);
  std::vector<UtilityVector> anchors;
  for (int k = 0; k < 8; ++k) anchors.push_back(oracle::random_vector(rng, 3, -2, 2));
  std::vector<UtilityVector> more = anchors;
  for (int k = 0; k < 20; ++k) more.push_back(oracle::random_vector(rng, 3, -2, 2));
  for (int s = 0; s < 50; ++s) {
    const Vector mu = oracle::random_vector(rng, 3, -2, 2);
    const double small = semiparametric_sup(*m, anchors, mu);
    const double large = semiparametric_sup(*m, more, mu);
    CHECK(large >= small - 1e-12);
    CHECK(large <= m->value(mu) + 1e-9);
  }
}

TEST_CASE("anchor expected maximum by enumeration") {
  const ModelPtr m = mnl_welfare(1.0, 3);
  const Vector z{{0.5, -1.0, 0.2}};
  const AnchorDistribution a = anchor_family(*m, {z}).front();
  const Vector mu{{1.0, 0.3, -0.4}};
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) {
    Vector eps = Vector::Constant(3, a.offset - a.penalty);
    eps[i] = a.offset;
    expected += a.weights[i] * (mu + eps).maxCoeff();
  }
  CHECK(a.expected_max(mu) == doctest::Approx(expected).epsilon(1e-14));
  CHECK((a.weights - oracle::mnl_q(z, 1)).norm() < 1e-14);
  CHECK(a.offset == doctest::Approx(oracle::mnl_w(z, 1) - z.dot(oracle::mnl_q(z, 1))));
}

TEST_CASE("welfare to regularizer to welfare round trip") {
  const ModelPtr m = mnl_welfare(1.0, 3);
  const RegularizerPtr reg = conjugate_regularizer(m);
  Rng rng(27);
  for (int s = 0; s < 20; ++s) {
    const Vector mu = oracle::random_vector(rng, 3, -3, 3);
    const SolveResult r = solve_ram(*reg, mu);
    CHECK(r.w_value == doctest::Approx(m->value(mu)).epsilon(1e-4).scale(1.0));
  }
  CHECK(reg->value(Vector{{0.5, 0.5, 0.0}}) == std::numeric_limits<double>::infinity());
}

TEST_CASE("conjugate lattice") {
  const auto grid = tabulate_conjugate(*mnl_welfare(1.0, 3), 0.02);
  CHECK(grid.size() == 1176);
  for (std::size_t k = 0; k < grid.size(); k += 97) {
    CHECK(grid[k].x.minCoeff() >= 0.02 - 1e-12);
    CHECK(grid[k].value == doctest::Approx(oracle::neg_entropy(grid[k].x)).epsilon(1e-8));
  }
  CHECK_THROWS_AS(tabulate_conjugate(*mnl_welfare(1.0, 3), 0.0), ArgumentError);
}

}  // TEST_SUITE
