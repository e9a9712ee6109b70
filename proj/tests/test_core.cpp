#include "oracles.hpp"
#include "welfarechoice/core.hpp"

#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <set>

using namespace welfarechoice;

TEST_SUITE("core") {

TEST_CASE("simplex membership and validation") {
  CHECK(on_simplex(Vector{{0.2, 0.3, 0.5}}));
  CHECK_FALSE(on_simplex(Vector{{0.2, 0.3, 0.6}}));
  CHECK_FALSE(on_simplex(Vector{{-0.1, 0.6, 0.5}}));
  CHECK_THROWS_AS(require_probability(Vector{{0.5, 0.6}}), ArgumentError);
  CHECK_THROWS_AS(require_utility(Vector{{1.0}}), ArgumentError);
  CHECK_THROWS_AS(require_utility(Vector{{1.0, std::nan("")}}), ArgumentError);
}

TEST_CASE("projection matches threshold bisection") {
  Rng rng(7);
  for (int s = 0; s < 200; ++s) {
    const Vector v = oracle::random_vector(rng, 2 + s % 5, -3, 3);
    const Vector p = project_to_simplex(v);
    CHECK(on_simplex(p, 1e-12));
    CHECK((p - oracle::simplex_projection(v)).cwiseAbs().maxCoeff() < 1e-12);
  }
  // Points already on the simplex are fixed.
  const Vector x{{0.1, 0.6, 0.3}};
  CHECK((project_to_simplex(x) - x).norm() < 1e-15);
}

TEST_CASE("log-sum-exp and softmax survive extreme utilities") {
  CHECK(log_sum_exp(Vector{{1000.0, 1000.0}}) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(std::isfinite(log_sum_exp(Vector{{-700.0, 700.0, 0.0}})));
  const Vector s = softmax(Vector{{700.0, -700.0, 700.0}});
  CHECK(s.sum() == doctest::Approx(1.0));
  CHECK(s[0] == doctest::Approx(0.5));
  const Vector mu{{0.3, -1.0, 2.0}};
  CHECK((softmax(mu) - oracle::mnl_q(mu, 1.0)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("finite differences") {
  ScalarField f = [](const Vector& v) { return v[0] * v[0] + 3 * v[0] * v[1] - v[1]; };
  const Vector g = finite_diff_gradient(f, Vector{{1.0, 2.0}}, 1e-6);
  CHECK(g[0] == doctest::Approx(8.0).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(2.0).epsilon(1e-8));

  ScalarField cube = [](const Vector& v) { return v[0] * v[1] * v[2]; };
  const int idx[] = {0, 1, 2};
  CHECK(mixed_partial(cube, Vector{{0.3, -2.0, 1.0}}, idx, 1e-2) == doctest::Approx(1.0));
  ScalarField e = [](const Vector& v) { return std::exp(v[0] + 2 * v[1]); };
  const int pair[] = {0, 1};
  // d^2/dx dy exp(x + 2y) = 2 exp(x + 2y); central stencil error O(h^2).
  CHECK(mixed_partial(e, Vector{{0.0, 0.0}}, pair, 1e-3) == doctest::Approx(2.0).epsilon(1e-5));
  const int repeated[] = {1, 1};
  CHECK_THROWS_AS(mixed_partial(e, Vector{{0.0, 0.0}}, repeated, 1e-3), ArgumentError);
}

TEST_CASE("quadrature") {
  CHECK(integrate_1d([](double x) { return x * x; }, 0, 1) == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(integrate_1d([](double x) { return std::exp(-x); }, 0, 30) == doctest::Approx(1 - std::exp(-30.0)));
  CHECK(integrate_1d([](double) { return 1.0; }, 2, 2) == 0.0);
  CHECK_THROWS_AS(integrate_1d([](double x) { return 1.0 / x; }, 0, 1, 1e-12), NumericError);
}

TEST_CASE("bracketed root finding") {
  const double r = bisect_increasing([](double x) { return x * x * x; }, 2.0, 0.0, 2.0);
  CHECK(r == doctest::Approx(std::cbrt(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(bisect_increasing([](double x) { return x; }, 5.0, 0.0, 1.0), BracketError);
}

TEST_CASE("normal and logistic distribution functions") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
  for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.7, 0.99, 1 - 1e-9}) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK(normal_pdf(0.0) == doctest::Approx(1 / std::sqrt(2 * M_PI)));
  CHECK(logistic_cdf(0.0) == 0.5);
  CHECK(logistic_cdf(std::log(3.0)) == doctest::Approx(0.75));
}

TEST_CASE("random streams are reproducible and distinct") {
  Rng a(42, 3);
  Rng b(42, 3);
  Rng c(42, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    differs = differs || u != c.uniform();
  }
  CHECK(differs);
}

TEST_CASE("parallel_for runs every task once and propagates errors") {
  std::vector<std::atomic<int>> hits(97);
  parallel_for(hits.size(), [&](std::size_t t) { hits[t]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t t) {
                    if (t == 7) throw NumericError("boom");
                  }),
                  NumericError);
}

TEST_CASE("numeric configuration validation") {
  NumericConfig c;
  CHECK_NOTHROW(c.validate());
  c.fd_step_first = 0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
}

}  // TEST_SUITE
