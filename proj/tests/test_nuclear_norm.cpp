#include "lrgq/nuclear_norm.hpp"

#include <doctest.h>

#include <random>

using namespace lrgq;

namespace {

Matrix<double> gaussian(Index n, Index p, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g;
  Matrix<double> x(n, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < n; ++i) x(i, j) = g(rng);
  return x;
}

Matrix<double> diag2(double a, double b) {
  Matrix<double> m = Matrix<double>::Zero(2, 2);
  m.diagonal() << a, b;
  return m;
}

ObservedCovariance<double> full(const Matrix<double>& m) {
  std::vector<Index> all(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) all[static_cast<std::size_t>(i)] = i;
  return ObservedCovariance<double>(m, BlockDesign(m.rows(), {all}, {10}));
}

ObservedCovariance<double> chained_rank2(std::uint64_t seed) {
  const Matrix<double> u = gaussian(5, 2, seed);
  return ObservedCovariance<double>(u * u.transpose(), BlockDesign(5, {{0, 1, 2}, {2, 3, 4}}, {10, 10}));
}

// Subgradient method on the symmetric matrices with steps (k+1)^-0.7, or
// (k+1)^-0.5 in spiked mode; best objective seen. In spiked mode the noise level
// is set in closed form after each step.
double subgradient_oracle(const ObservedCovariance<double>& obs, double nu, bool spiked) {
  const Index p = obs.p();
  const Matrix<double> t = obs.zero_filled(), zero = Matrix<double>::Zero(p, p);
  Matrix<double> x = t;
  double s2 = 0, best = std::numeric_limits<double>::infinity();
  if (spiked) s2 = std::max(0.0, (t.diagonal() - x.diagonal()).mean());
  for (long k = 0; k < 1000000; ++k) {
    Eigen::SelfAdjointEigenSolver<Matrix<double>> es(x);
    const Vector<double> sign = es.eigenvalues().unaryExpr([](double v) { return double((v > 0) - (v < 0)); });
    Matrix<double> fit = x;
    fit.diagonal().array() += s2;
    const Matrix<double> r = obs.mask().select(fit - t, zero);
    best = std::min(best, 0.5 * r.squaredNorm() + nu * es.eigenvalues().cwiseAbs().sum());
    const Matrix<double> g = r + nu * es.eigenvectors() * sign.asDiagonal() * es.eigenvectors().transpose();
    x -= std::pow(k + 1.0, spiked ? -0.5 : -0.7) * g;
    x = (x + x.transpose()).eval() / 2;
    if (spiked) s2 = std::max(0.0, (t.diagonal() - x.diagonal()).mean());
  }
  return best;
}

// Distance of -grad from nu * subdifferential of the nuclear norm at x.
double optimality_gap(const Matrix<double>& x, const Matrix<double>& neg_grad, double nu) {
  Eigen::SelfAdjointEigenSolver<Matrix<double>> es(x);
  const Index p = x.rows();
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  std::vector<Index> support;
  for (Index i = 0; i < p; ++i)
    if (std::abs(es.eigenvalues()(i)) > 1e-7 * std::max(1.0, top)) support.push_back(i);
  const Index r = static_cast<Index>(support.size());
  Matrix<double> q(p, r);
  Vector<double> sign(r);
  for (Index a = 0; a < r; ++a) {
    q.col(a) = es.eigenvectors().col(support[static_cast<std::size_t>(a)]);
    sign(a) = es.eigenvalues()(support[static_cast<std::size_t>(a)]) > 0 ? 1 : -1;
  }
  const Matrix<double> proj = Matrix<double>::Identity(p, p) - q * q.transpose();
  double gap = (q.transpose() * neg_grad * q - nu * Matrix<double>(sign.asDiagonal())).cwiseAbs().maxCoeff();
  gap = std::max(gap, (q.transpose() * neg_grad * proj).cwiseAbs().maxCoeff());
  const Matrix<double> rest = proj * neg_grad * proj;
  gap = std::max(gap, symmetric_eigenvalues(rest).cwiseAbs().maxCoeff() - nu);
  return gap;
}

}  // namespace

TEST_CASE("svt") {
  const Matrix<double> a = gaussian(4, 4, 1);
  const Matrix<double> m = (a + a.transpose()) / 2;
  CHECK((svt(m, 0.0) - m).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((svt(diag2(3, -1), 2.0) - diag2(1, 0)).cwiseAbs().maxCoeff() <= 1e-14);

  // Singular-value-space oracle: shrink singular values, keep U and V.
  Eigen::JacobiSVD<Matrix<double>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector<double> shrunk = (svd.singularValues().array() - 0.4).cwiseMax(0.0);
  const Matrix<double> oracle = svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose();
  CHECK((svt(m, 0.4) - oracle).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(nuclear_norm_symmetric(m) == doctest::Approx(svd.singularValues().sum()).epsilon(1e-12));
  CHECK_THROWS_AS(svt(m, -1.0), PreconditionError);
}

TEST_CASE("nn exact: full observation is one prox step") {
  const auto out = nn_complete_exact(full(diag2(3, 1)), 2.0);
  CHECK((out.sigma_tilde() - diag2(1, 0)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(out.report().converged);

  const Matrix<double> a = gaussian(30, 4, 2);
  const Matrix<double> s = a.transpose() * a / 30.0;
  CHECK((nn_complete_exact(full(s), 0.0).sigma_tilde() - s).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((nn_complete_exact(full(s), 0.3).sigma_tilde() - svt(s, 0.3)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("nn exact: chained blocks against a long-run subgradient oracle") {
  const auto obs = chained_rank2(11);
  const double nu = 0.05;
  NnOptions opts;
  opts.record_history = true;
  const auto out = nn_complete_exact(obs, nu, opts);
  const double ours = nn_objective(obs, out.sigma_tilde(), nu);
  const double oracle = subgradient_oracle(obs, nu, false);
  CHECK(std::abs(ours - oracle) <= 1e-6);

  const auto& h = out.report().history;
  for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1] + 1e-12);
  CHECK(max_asymmetry(out.sigma_tilde()) <= 1e-12);

  NnOptions tight;
  tight.tol = 1e-14;
  tight.max_iter = 200000;
  const auto conv = nn_complete_exact(obs, nu, tight);
  const Matrix<double> neg_grad = -obs.mask().select(conv.sigma_tilde() - obs.zero_filled(),
                                                     Matrix<double>::Zero(5, 5));
  CHECK(optimality_gap(conv.sigma_tilde(), neg_grad, nu) <= 1e-5);
}

TEST_CASE("nn spiked") {
  SUBCASE("scaled identity is absorbed by the noise level") {
    const Matrix<double> c = 0.8 * Matrix<double>::Identity(4, 4);
    const auto out = nn_complete_spiked(full(c), 10.0);
    REQUIRE(out.low_rank_part());
    CHECK(out.low_rank_part()->cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(out.sigma2_hat() == doctest::Approx(0.8));
    CHECK((out.sigma_tilde() - c).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(out.model_kind() == ModelKind::spiked);
  }
  SUBCASE("unpenalized full observation reproduces the input") {
    const Matrix<double> a = gaussian(30, 4, 3);
    const Matrix<double> s = a.transpose() * a / 30.0;
    CHECK((nn_complete_spiked(full(s), 0.0).sigma_tilde() - s).cwiseAbs().maxCoeff() <= 1e-6);
  }
  SUBCASE("chained blocks against the long-run alternating oracle") {
    auto obs = chained_rank2(12);
    Matrix<double> v = obs.values();
    v.diagonal().array() += 0.25;
    obs = obs.with_values(v);
    const double nu = 0.05;
    NnOptions opts;
    opts.record_history = true;
    const auto out = nn_complete_spiked(obs, nu, opts);
    const double ours = nn_spiked_objective(obs, *out.low_rank_part(), out.sigma2_hat(), nu);
    CHECK(std::abs(ours - subgradient_oracle(obs, nu, true)) <= 1e-6);
    const auto& h = out.report().history;
    for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1] + 1e-12);
    CHECK(out.sigma2_hat() >= 0.0);
  }
  SUBCASE("noise update") {
    Matrix<double> t = Matrix<double>::Identity(3, 3) * 2;
    Matrix<double> l = Matrix<double>::Zero(3, 3);
    l.diagonal() << 1, 0.5, 1.5;
    CHECK(sigma2_update(t, l) == doctest::Approx(1.0));
    CHECK(sigma2_update(Matrix<double>(Matrix<double>::Zero(3, 3)), l) == 0.0);
  }
}

TEST_CASE("nn: dispatch and preconditions") {
  const auto obs = chained_rank2(13);
  CHECK_THROWS_AS(nn_complete_exact(obs, -0.1), PreconditionError);
  CHECK(nn_complete(obs, 0.1, ModelKind::spiked).model_kind() == ModelKind::spiked);
  NnOptions few;
  few.max_iter = 2;
  few.tol = 0;
  const auto out = nn_complete(obs, 0.1, ModelKind::exact, few);
  CHECK_FALSE(out.report().converged);
  CHECK_FALSE(out.report().warnings.empty());
}
