#include "lrgq/cov_estimate.hpp"
#include "lrgq/simgen.hpp"

#include <doctest.h>

#include <set>

using namespace lrgq;

namespace {

void check_truth(const GroundTruth<double>& t) {
  CHECK(min_eigenvalue(t.theta_star()) > 0);
  const Index p = t.p();
  CHECK((t.theta_star() * t.sigma_star() - Matrix<double>::Identity(p, p)).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(t.edges() == support_edges(t.theta_star(), 0.0));
}

std::vector<Index> degrees_of(const EdgeSet& e, Index p) {
  std::vector<Index> d(static_cast<std::size_t>(p), 0);
  for (const Edge& x : e) ++d[static_cast<std::size_t>(x.i)], ++d[static_cast<std::size_t>(x.j)];
  return d;
}

}  // namespace

TEST_CASE("sbm precision") {
  const auto t = gen_sbm_precision(100, 5, 0.8, 1);
  check_truth(t);
  const auto label = community_labels(100, 5);
  Index within_pairs = 5 * (20 * 19 / 2);
  for (const Edge& e : t.edges()) CHECK(label[static_cast<std::size_t>(e.i)] == label[static_cast<std::size_t>(e.j)]);
  const double density = double(t.edges().size()) / double(within_pairs);
  CHECK(density == doctest::Approx(0.8).epsilon(0.05));  // ~3.5 sd of a binomial(950, 0.8)
  for (const Edge& e : t.edges()) {
    CHECK(t.theta_star()(e.i, e.j) > 0);
    CHECK(t.theta_star()(e.i, e.j) < 2);
  }

  CHECK(gen_sbm_precision(30, 3, 0.0, 2).edges().empty());
  CHECK(gen_sbm_precision(30, 3, 1.0, 3).edges().size() == 3 * 45);
  // Remainder nodes join the last community.
  const auto labels = community_labels(22, 5);
  CHECK(labels.back() == 4);
  CHECK(std::count(labels.begin(), labels.end(), 4) == 6);

  PrecisionOptions neg;
  neg.negative_weights = true;
  const auto n = gen_sbm_precision(30, 3, 0.8, 4, neg);
  for (const Edge& e : n.edges()) CHECK(n.theta_star()(e.i, e.j) < 0);
}

TEST_CASE("multistar precision") {
  const auto t = gen_multistar_precision(100, 4, 5);
  check_truth(t);
  const auto deg = degrees_of(t.edges(), 100);
  for (Index v = 4; v < 100; ++v) CHECK(deg[static_cast<std::size_t>(v)] == 1);
  CHECK(deg[0] + deg[1] + deg[2] + deg[3] == 96);

  Matrix<double> adj = t.theta_star();
  adj.diagonal().setZero();
  const Vector<double> sv = Eigen::JacobiSVD<Matrix<double>>(adj).singularValues();
  for (Index k = 8; k < sv.size(); ++k) CHECK(sv(k) <= 1e-8 * sv(0));

  const auto star = gen_multistar_precision(10, 1, 6);
  Matrix<double> sa = star.theta_star();
  sa.diagonal().setZero();
  CHECK(Eigen::FullPivLU<Matrix<double>>(sa).rank() <= 2);
  CHECK(gen_multistar_precision(4, 3, 7).edges().size() == 1);
  CHECK_THROWS_AS(gen_multistar_precision(4, 4, 7), PreconditionError);
}

TEST_CASE("erdos-renyi precision") {
  CHECK(gen_er_precision(20, 0.0, 1).edges().empty());
  CHECK(gen_er_precision(20, 1.0, 1).edges().size() == 190);
  const double mean = 0.02 * 4950, sd = std::sqrt(4950 * 0.02 * 0.98);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto t = gen_er_precision(100, 0.02, seed);
    check_truth(t);
    CHECK(std::abs(double(t.edges().size()) - mean) <= 3 * sd);
  }
}

TEST_CASE("make_pd") {
  Matrix<double> pd = Matrix<double>::Identity(3, 3);
  CHECK(make_pd(pd, 0.5) == pd);
  Matrix<double> m(2, 2);
  m << 0, 1, 1, 0;
  const Matrix<double> out = make_pd(m, 0.1);
  CHECK(out(0, 0) == doctest::Approx(1.1));
  const Vector<double> w = symmetric_eigenvalues(out);
  CHECK(w(0) == doctest::Approx(0.1));
  CHECK(w(1) == doctest::Approx(2.1));
  CHECK(out(0, 1) == 1.0);

  Rng rng(3);
  std::normal_distribution<double> g;
  Matrix<double> d(8, 8);
  for (Index i = 0; i < 64; ++i) d.data()[i] = g(rng);
  d = (d + d.transpose()).eval() / 2;
  CHECK(min_eigenvalue(make_pd(d, 0.2)) >= 0.2 - 1e-10);
}

TEST_CASE("gaussian sampling") {
  const GroundTruth<double> eye(Matrix<double>::Identity(4, 4));
  const Index n = 20000;
  const Matrix<double> x = sample_ggm(eye, n, 1);
  CHECK((sample_covariance(x) - Matrix<double>::Identity(4, 4)).cwiseAbs().maxCoeff() <= 5.0 / std::sqrt(double(n)));
  CHECK(sample_ggm(eye, 1, 2).rows() == 1);
  CHECK(sample_ggm(eye, 1, 2).cols() == 4);
  CHECK(sample_ggm(eye, 50, 3) == sample_ggm(eye, 50, 3));
  CHECK_THROWS_AS(sample_ggm(eye, 0, 3), PreconditionError);
}

TEST_CASE("block patterns") {
  const auto two = make_block_pattern(100, 2, 60, 10);
  std::vector<Index> a = two.nodes(0), b = two.nodes(1), common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  CHECK(common.size() == 20);

  auto overlaps = [](const BlockDesign& d) {
    std::vector<Index> out;
    for (Index k = 0; k + 1 < d.num_blocks(); ++k) {
      std::vector<Index> c;
      std::set_intersection(d.nodes(k).begin(), d.nodes(k).end(), d.nodes(k + 1).begin(), d.nodes(k + 1).end(),
                            std::back_inserter(c));
      out.push_back(static_cast<Index>(c.size()));
    }
    return out;
  };
  CHECK(overlaps(make_block_pattern(100, 3, 40, 10)) == std::vector<Index>{10, 10});
  CHECK(overlaps(make_block_pattern(100, 4, 30, 10)) == std::vector<Index>{7, 7, 6});
  CHECK(make_block_pattern(10, 1, 10, 5).observed_mask().all());
  CHECK_THROWS_AS(make_block_pattern(100, 2, 40, 10), DesignError);

  // Shuffled: same overlap sizes, every node covered, reproducible.
  const auto s1 = make_block_pattern(100, 3, 40, 10, 9);
  CHECK(overlaps(s1) == std::vector<Index>{10, 10});
  CHECK(s1.node_sets() == make_block_pattern(100, 3, 40, 10, 9).node_sets());
  CHECK(s1.node_sets() != make_block_pattern(100, 3, 40, 10).node_sets());
  std::set<Index> covered;
  for (const auto& set : s1.node_sets()) covered.insert(set.begin(), set.end());
  CHECK(covered.size() == 100);
}

TEST_CASE("spiked decomposition") {
  SUBCASE("no spike") {
    const Matrix<double> theta = 2.0 * Matrix<double>::Identity(4, 4);
    const auto v = verify_spiked_decomposition(theta, 2.0, 0);
    CHECK(v.holds);
    CHECK(v.low_rank.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(v.diag_level == 0.5);
  }
  SUBCASE("one spike, explicit inversion") {
    Vector<double> u(4);
    u << 1, 2, -1, 0.5;
    u.normalize();
    Matrix<double> theta = 2.0 * Matrix<double>::Identity(4, 4) - 1.5 * u * u.transpose();
    theta = (theta + theta.transpose()).eval() / 2;
    const auto v = verify_spiked_decomposition(theta, 2.0, 1);
    CHECK(v.holds);
    CHECK(v.spectrum(0) == doctest::Approx(1.5));
    const Matrix<double> l = Matrix<double>(theta.inverse()) - 0.5 * Matrix<double>::Identity(4, 4);
    CHECK((v.low_rank - l).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("weak spike is refuted") {
    Vector<double> u = Vector<double>::Ones(3).normalized();
    const Matrix<double> theta = 2.0 * Matrix<double>::Identity(3, 3) - 0.8 * u * u.transpose();
    const auto v = verify_spiked_decomposition(Matrix<double>((theta + theta.transpose()) / 2), 2.0, 1);
    CHECK_FALSE(v.holds);
    bool named = false;
    for (const auto& f : v.failures) named = named || f.find("lambda_r(L0) <= c/2") != std::string::npos;
    CHECK(named);
  }
  SUBCASE("generated spiked truths") {
    for (bool communities : {false, true}) {
      const auto t = gen_spiked_precision(30, 3, 1.5, 11, communities);
      check_truth(t);
      REQUIRE(t.spiked());
      CHECK(t.spiked()->sigma2 == doctest::Approx(1 / 1.5));
      CHECK(verify_spiked_decomposition(t.theta_star(), 1.5, 3).holds);
    }
    const auto block = gen_spiked_precision(30, 3, 1.0, 12, true);
    CHECK(block.edges().size() == 3 * 45);
  }
}
