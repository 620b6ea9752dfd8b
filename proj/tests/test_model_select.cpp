#include "lrgq/model_select.hpp"

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

BlockDesign two_blocks(Index p, Index o) {
  const Index half = (p + o) / 2;
  std::vector<Index> a, b;
  for (Index i = 0; i < half; ++i) a.push_back(i);
  for (Index i = p - half; i < p; ++i) b.push_back(i);
  return BlockDesign(p, {a, b}, {100, 100});
}

double direct_rss(const ObservedCovariance<double>& obs, const Matrix<double>& fit) {
  double rss = 0;
  for (Index i = 0; i < obs.p(); ++i)
    for (Index j = i; j < obs.p(); ++j)
      if (obs.mask()(i, j)) rss += std::pow(fit(i, j) - obs.values()(i, j), 2);
  return rss;
}

}  // namespace

TEST_CASE("bic: parameter count and score") {
  CHECK(bic_parameter_count(10, 1, ModelKind::exact) == 10);
  CHECK(bic_parameter_count(10, 3, ModelKind::exact) == 27);
  CHECK(bic_parameter_count(10, 3, ModelKind::spiked) == 28);
  CHECK(bic_score(2.0, 10, 3, 1.0) == doctest::Approx(10 * std::log(0.2) + 3 * std::log(10.0)));
  CHECK(std::isfinite(bic_score(0.0, 10, 3, 1.0)));
}

TEST_CASE("bic: noiseless rank-2 instance selects rank 2") {
  const Matrix<double> u = gaussian(10, 2, 1);
  const ObservedCovariance<double> obs(u * u.transpose(), two_blocks(10, 4));
  for (Solver solver : {Solver::bsvd, Solver::lrf}) {
    const auto sel = select_rank_bic(obs, {1, 2, 3}, ModelKind::exact, solver);
    CHECK(sel.selected == 2);
    REQUIRE(sel.table.size() == 3);
    for (const auto& row : sel.table) {
      CompletionParams params;
      params.rank = row.rank;
      const auto fit = complete_covariance(obs, MethodSpec{solver, ModelKind::exact}, params);
      CHECK(std::abs(row.rss - direct_rss(obs, fit.sigma_tilde())) <= 1e-10);
    }
    CHECK(sel.table[0].rss > 1e-3);
    CHECK(sel.table[1].rss <= 1e-12);
  }
}

TEST_CASE("bic: singleton, infeasible candidates, errors") {
  const Matrix<double> u = gaussian(10, 2, 2);
  const ObservedCovariance<double> obs(u * u.transpose(), two_blocks(10, 4));
  CHECK(select_rank_bic(obs, {3}, ModelKind::exact, Solver::bsvd).selected == 3);
  const auto sel = select_rank_bic(obs, {2, 5}, ModelKind::exact, Solver::bsvd);
  CHECK(sel.selected == 2);
  CHECK_FALSE(sel.table[1].feasible);
  CHECK_FALSE(sel.table[1].note.empty());
  CHECK_THROWS_AS(select_rank_bic(obs, {}, ModelKind::exact, Solver::bsvd), PreconditionError);
  CHECK_THROWS_AS(select_rank_bic(obs, {2}, ModelKind::exact, Solver::nn), PreconditionError);

  BicOptions nuclear;
  nuclear.nuclear_penalty = true;
  const auto nsel = select_rank_bic(obs, {1, 2, 3}, ModelKind::exact, Solver::bsvd, nuclear);
  CHECK(nsel.selected == 2);
}

TEST_CASE("bic: pure noise selects a small rank") {
  int small = 0;
  for (int rep = 0; rep < 50; ++rep) {
    Matrix<double> e = 0.02 * gaussian(20, 20, 1000 + rep);
    Matrix<double> s = Matrix<double>::Identity(20, 20) + (e + e.transpose()) / 2;
    const ObservedCovariance<double> obs(s, two_blocks(20, 6));
    const auto sel = select_rank_bic(obs, {1, 2, 3, 4, 5}, ModelKind::spiked, Solver::bsvd);
    small += sel.selected <= 2 ? 1 : 0;
  }
  CHECK(small >= 45);
}

TEST_CASE("cv: holdout sets") {
  const ObservedCovariance<double> obs(Matrix<double>::Identity(12, 12), two_blocks(12, 4));
  const auto folds = cv_holdout_sets(obs, 0.05, 5, 9);
  REQUIRE(folds.size() == 5);
  EdgeSet all;
  for (const auto& f : folds) {
    CHECK(!f.empty());
    for (const Edge& e : f) {
      CHECK(e.i < e.j);
      CHECK(obs.mask()(e.i, e.j));
      all.push_back(e);
    }
  }
  const auto n = all.size();
  CHECK(normalize_edges(all).size() == n);  // disjoint
  CHECK(cv_holdout_sets(obs, 0.05, 5, 9) == folds);
  CHECK_THROWS_AS(cv_holdout_sets(obs, 0.0, 5, 9), PreconditionError);
}

TEST_CASE("cv: nuclear penalty") {
  const Matrix<double> u = gaussian(12, 2, 3);
  Matrix<double> s = u * u.transpose();
  Matrix<double> e = 0.05 * gaussian(12, 12, 4);
  s += (e + e.transpose()) / 2;
  const ObservedCovariance<double> obs(s, two_blocks(12, 4));

  CHECK(select_nu_cv(obs, {0.3}).selected == 0.3);
  CvOptions bad;
  bad.holdout_fraction = 0;
  CHECK_THROWS_AS(select_nu_cv(obs, {0.1, 0.2}, bad), PreconditionError);
  CHECK_THROWS_AS(select_nu_cv(obs, {}), PreconditionError);

  std::vector<double> grid;
  for (int k = 0; k < 8; ++k) grid.push_back(0.001 * std::pow(10.0, k * 3.0 / 7.0));
  CvOptions opts;
  opts.holdout_fraction = 0.1;
  opts.seed = 17;
  const auto sel = select_nu_cv(obs, grid, opts);

  // Exhaustive re-evaluation on the same holdout sets.
  const auto holdouts = cv_holdout_sets(obs, opts.holdout_fraction, opts.folds, opts.seed);
  double best = std::numeric_limits<double>::infinity(), at_selected = 0;
  for (double nu : grid) {
    double total = 0;
    for (const auto& h : holdouts)
      total += holdout_error(obs, nn_complete_exact(obs.without_pairs(h), nu).sigma_tilde(), h);
    total /= double(holdouts.size());
    best = std::min(best, total);
    if (nu == sel.selected) at_selected = total;
  }
  CHECK(at_selected <= 1.1 * best);
  CHECK(select_nu_cv(obs, grid, opts).selected == sel.selected);
}

TEST_CASE("cv: ties go to the larger penalty") {
  // Held-out entries of a diagonal input are predicted as zero at any large penalty.
  const ObservedCovariance<double> obs(Matrix<double>::Identity(8, 8) * 0.1, two_blocks(8, 4));
  const auto sel = select_nu_cv(obs, {5.0, 10.0, 20.0});
  CHECK(sel.selected == 20.0);
}

TEST_CASE("stability: instability measure") {
  CHECK(edge_instability({{}, {}, {}}, 4) == 0.0);
  CHECK(edge_instability({{{0, 1}}, {{0, 1}}}, 3) == 0.0);
  // One pair selected in half the graphs: 2 * 0.5 * 0.5 over 3 pairs.
  CHECK(edge_instability({{{0, 1}}, {}}, 3) == doctest::Approx(0.5 / 3));
}

TEST_CASE("stability selection") {
  const Matrix<double> x = gaussian(300, 8, 5);
  Matrix<double> chain = x;
  for (Index j = 1; j < 8; ++j) chain.col(j) += 0.7 * chain.col(j - 1);
  const Matrix<double> s = sample_covariance(chain);

  SUBCASE("identical subsamples are stable everywhere") {
    const Resampler<double> same = [&](Index) { return s; };
    const auto grid = lambda_grid(s, 6, 0.05);
    StabilityOptions opts;
    opts.subsamples = 3;
    const auto sel = select_lambda_stability(same, grid, opts);
    for (const auto& row : sel.curve) CHECK(row.instability == 0.0);
    CHECK(sel.selected == doctest::Approx(grid.back()));
    CHECK_FALSE(sel.all_unstable);
  }
  SUBCASE("full shrinkage is stable") {
    const Resampler<double> same = [&](Index) { return s; };
    StabilityOptions opts;
    opts.subsamples = 2;
    opts.threshold = 0.0;
    const auto sel = select_lambda_stability(same, {lambda_grid(s, 1, 1.0).front()}, opts);
    CHECK(sel.curve.front().mean_edges == 0.0);
    CHECK(sel.curve.front().instability == 0.0);
  }
  SUBCASE("resampled blocks, determinism, unstable fallback") {
    BlockData<double> data(8, {{chain.topRows(150).leftCols(5), {0, 1, 2, 3, 4}},
                               {chain.bottomRows(150).rightCols(5), {3, 4, 5, 6, 7}}});
    const Completer<double> complete = [](const ObservedCovariance<double>& o) {
      BsvdOptions<double> opts;
      opts.mode = ModelKind::spiked;
      return bsvd_complete(o, 2, opts);
    };
    const auto grid = lambda_grid(s, 8, 0.02);
    StabilityOptions opts;
    opts.subsamples = 6;
    const auto a = select_lambda_stability(block_subsample_resampler(data, complete, 0.8, 3), grid, opts);
    const auto b = select_lambda_stability(block_subsample_resampler(data, complete, 0.8, 3), grid, opts);
    CHECK(a.selected == b.selected);
    for (std::size_t i = 1; i < a.curve.size(); ++i) {
      CHECK(a.curve[i].lambda < a.curve[i - 1].lambda);
      CHECK(a.curve[i].monotone_instability >= a.curve[i - 1].monotone_instability);
    }
    const auto obs = compute_block_covariance(data);
    const Completer<double> nn = [](const ObservedCovariance<double>& o) { return nn_complete_exact(o, 0.05); };
    const auto j = select_lambda_stability(jackknife_resampler(obs, nn, 0.05, 4), grid, opts);
    CHECK(j.curve.size() == grid.size());
    const auto post = select_lambda_stability(
        post_completion_resampler(data, complete(obs).sigma_tilde(), 0.8, 5), grid, opts);
    CHECK(post.curve.size() == grid.size());

    opts.threshold = -1.0;
    const auto none = select_lambda_stability(block_subsample_resampler(data, complete, 0.8, 3), grid, opts);
    CHECK(none.all_unstable);
    CHECK(none.selected == doctest::Approx(grid.front()));
    CHECK_FALSE(none.warnings.empty());
  }
}

TEST_CASE("resampling helpers") {
  BlockData<double> data(4, {{gaussian(10, 3, 6), {0, 1, 2}}, {gaussian(7, 3, 7), {1, 2, 3}}});
  Rng rng(1);
  const auto sub = subsample_blocks(data, 0.8, rng);
  CHECK(sub.blocks()[0].data.rows() == 8);
  CHECK(sub.blocks()[1].data.rows() == 5);
  CHECK_THROWS_AS(subsample_blocks(data, 0.0, rng), PreconditionError);

  const auto obs = compute_block_covariance(data);
  const auto jk = jackknife_pairs(obs, 0.5, rng);
  CHECK(jk.observed_upper_count() == obs.observed_upper_count() - 3);  // round(0.5 * 5)
  CHECK(derived_seed(1, 2) == derived_seed(1, 2));
  CHECK(derived_seed(1, 2) != derived_seed(1, 3));
  CHECK(derived_seed(1, 2) != derived_seed(2, 2));

  const auto grid = lambda_grid(obs.zero_filled(), 5, 0.1);
  REQUIRE(grid.size() == 5);
  CHECK(grid.back() == doctest::Approx(0.1 * grid.front()));
}
