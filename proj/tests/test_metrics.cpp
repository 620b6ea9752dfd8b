#include "lrgq/metrics.hpp"

#include <doctest.h>

#include <random>

using namespace lrgq;

TEST_CASE("covariance errors") {
  const Matrix<double> a = Matrix<double>::Identity(3, 3);
  CHECK(frobenius_error(a, a) == 0.0);
  CHECK(infinity_error(a, a) == 0.0);
  Matrix<double> b = a;
  b(0, 1) = b(1, 0) = 3;
  CHECK(frobenius_error(b, a) == doctest::Approx(std::sqrt(18.0)));
  CHECK(infinity_error(b, a) == 3.0);

  Rng rng(2);
  std::normal_distribution<double> g;
  Matrix<double> x(5, 5), y(5, 5);
  for (Index i = 0; i < 25; ++i) x.data()[i] = g(rng), y.data()[i] = g(rng);
  double sq = 0, mx = 0;
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j) {
      sq += (x(i, j) - y(i, j)) * (x(i, j) - y(i, j));
      mx = std::max(mx, std::abs(x(i, j) - y(i, j)));
    }
  CHECK(std::abs(frobenius_error(x, y) - std::sqrt(sq)) <= 1e-12);
  CHECK(std::abs(infinity_error(x, y) - mx) <= 1e-12);
  CHECK_THROWS_AS(frobenius_error(x, Matrix<double>(4, 4)), DimensionError);
}

TEST_CASE("f1") {
  const EdgeSet e{{0, 1}, {1, 2}};
  CHECK(f1_score(e, e) == 1.0);
  CHECK(f1_score({{0, 3}}, e) == 0.0);
  const auto d = f1_detail({{0, 1}, {0, 2}}, e);
  CHECK(d.precision == 0.5);
  CHECK(d.recall == 0.5);
  CHECK(d.f1 == 0.5);
  CHECK(f1_score({}, e) == 0.0);
  const auto both = f1_detail({}, {});
  CHECK(both.f1 == 1.0);
  CHECK(both.both_empty);
  CHECK(f1_score({{1, 0}}, {{0, 1}}) == 1.0);  // unordered pairs
}

TEST_CASE("hub overlap") {
  // Star around 0; nodes 3 and 5 tie at degree 2.
  EdgeSet g{{0, 1}, {0, 2}, {0, 3}, {0, 4}, {5, 6}, {5, 7}, {3, 8}};
  CHECK(hub_overlap(g, g, 10, 3) == 1.0);
  CHECK(top_k_hubs(g, 10, 2) == std::vector<Index>{0, 3});
  CHECK(top_k_hubs(g, 10, 3) == std::vector<Index>{0, 3, 5});
  // Empty graph: the tie rule picks the lowest indices.
  CHECK(top_k_hubs({}, 10, 2) == std::vector<Index>{0, 1});
  CHECK(hub_overlap(g, {}, 10, 2) == 0.5);
  CHECK(hub_overlap(g, {}, 10, 2) == hub_overlap(g, {}, 10, 2));
  // Swap two non-hub labels (1 and 9).
  EdgeSet swapped{{0, 9}, {0, 2}, {0, 3}, {0, 4}, {5, 6}, {5, 7}, {3, 8}};
  CHECK(hub_overlap(g, swapped, 10, 2) == 1.0);
  CHECK_THROWS_AS(hub_overlap(g, g, 10, 11), PreconditionError);

  Matrix<double> t = Matrix<double>::Identity(4, 4) * 2;
  t(0, 1) = t(1, 0) = 0.3;
  const PrecisionGraph<double> pg(t, 0.1);
  CHECK(hub_overlap(pg, pg, 2) == 1.0);
}

TEST_CASE("trace preprocessing") {
  Matrix<double> raw(6, 3);
  Rng rng(5);
  std::normal_distribution<double> g;
  for (Index i = 0; i < 6; ++i) {
    raw(i, 0) = 4.0;
    raw(i, 1) = 0.5 * double(i) + 1;
    raw(i, 2) = g(rng);
  }
  const auto out = preprocess_traces(raw);
  CHECK(out.data.rows() == 5);
  CHECK(out.zero_variance == std::vector<Index>{0, 1});
  CHECK(out.data.col(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(out.data.col(1).cwiseAbs().maxCoeff() <= 1e-15);
  const auto c = out.data.col(2);
  CHECK(std::abs(c.mean()) <= 1e-12);
  CHECK(std::abs(std::sqrt(c.squaredNorm() / 4.0) - 1.0) <= 1e-12);
  CHECK_THROWS_AS(preprocess_traces(Matrix<double>(2, 3)), PreconditionError);
}

TEST_CASE("correlation") {
  Matrix<double> c(2, 2);
  c << 4, 1, 1, 9;
  const Matrix<double> r = to_correlation(c);
  CHECK(r(0, 0) == doctest::Approx(1.0));
  CHECK(r(0, 1) == doctest::Approx(1.0 / 6));
}
