#pragma once

// Hyperparameter selection: BIC for the rank, held-out-pair cross-validation
// for the nuclear penalty, and StARS-style stability selection for the glasso
// penalty.

#include "lrgq/cov_estimate.hpp"
#include "lrgq/glasso.hpp"
#include "lrgq/methods.hpp"

#include <array>
#include <functional>
#include <random>

namespace lrgq {

// ---------------------------------------------------------------------------
// Rank by BIC

struct RankScore {
  Index rank = 0;
  bool feasible = true;
  std::string note;
  double rss = 0;
  Index params = 0;
  double penalty_units = 0;  // k(r), or the effective-rank surrogate under the nuclear variant
  double score = std::numeric_limits<double>::infinity();
};

struct RankSelection {
  Index selected = 0;
  std::vector<RankScore> table;
};

struct BicOptions {
  /// Penalize p * (nuclear norm / spectral norm) of the low-rank part instead of k(r).
  bool nuclear_penalty = false;
  LrfOptions lrf;
  BlockOrder order = BlockOrder::manifest;
};

/// Free parameters of a symmetric rank-r factorization (+1 for the noise level).
inline Index bic_parameter_count(Index p, Index r, ModelKind mode) {
  return p * r - r * (r - 1) / 2 + (mode == ModelKind::spiked ? 1 : 0);
}

/// Squared residual over distinct observed pairs i <= j.
template <typename Scalar>
double observed_rss(const ObservedCovariance<Scalar>& obs, const Matrix<Scalar>& fitted) {
  double rss = 0;
  for (Index j = 0; j < obs.p(); ++j)
    for (Index i = 0; i <= j; ++i)
      if (obs.mask()(i, j)) {
        const double d = static_cast<double>(fitted(i, j) - obs.values()(i, j));
        rss += d * d;
      }
  return rss;
}

/// N log(RSS / N) + k log N, with RSS floored at N (1e-10 max|S_O|)^2 so that
/// exact fits remain finite and rank comparisons fall to the penalty.
inline double bic_score(double rss, Index n_obs, double penalty_units, double obs_scale) {
  const double n = static_cast<double>(n_obs);
  const double floor = n * std::pow(1e-10 * std::max(obs_scale, std::numeric_limits<double>::min()), 2);
  return n * std::log(std::max(rss, floor) / n) + penalty_units * std::log(n);
}

template <typename Scalar>
RankSelection select_rank_bic(const ObservedCovariance<Scalar>& obs, const std::vector<Index>& ranks,
                              ModelKind mode, Solver solver, const BicOptions& opts = {}) {
  if (ranks.empty()) throw PreconditionError("select_rank_bic: empty candidate list");
  if (solver != Solver::bsvd && solver != Solver::lrf)
    throw PreconditionError("select_rank_bic: solver must be bsvd or lrf");
  const Index n_obs = obs.observed_upper_count();
  double obs_scale = 0;
  for (Index j = 0; j < obs.p(); ++j)
    for (Index i = 0; i <= j; ++i)
      if (obs.mask()(i, j)) obs_scale = std::max(obs_scale, std::abs(static_cast<double>(obs.values()(i, j))));

  RankSelection out;
  std::vector<Index> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (Index r : sorted) {
    RankScore row;
    row.rank = r;
    if (r < 1 || r > obs.p()) {
      row.feasible = false;
      row.note = "rank outside 1..p";
      out.table.push_back(row);
      continue;
    }
    std::optional<CompletedCovariance<Scalar>> fit;
    try {
      CompletionParams params;
      params.rank = r;
      params.order = opts.order;
      params.lrf = opts.lrf;
      fit = complete_covariance(obs, MethodSpec{solver, mode}, params);
    } catch (const InsufficientOverlapError& e) {
      row.feasible = false;
      row.note = e.what();
      out.table.push_back(row);
      continue;
    }
    row.rss = observed_rss(obs, fit->sigma_tilde());
    row.params = bic_parameter_count(obs.p(), r, mode);
    row.penalty_units = static_cast<double>(row.params);
    if (opts.nuclear_penalty) {
      Matrix<Scalar> low = fit->sigma_tilde();
      low.diagonal().array() -= fit->sigma2_hat();
      const Vector<Scalar> w = symmetric_eigenvalues(low).cwiseAbs();
      const double top = static_cast<double>(w.maxCoeff());
      const double eff = top > 0 ? static_cast<double>(w.sum()) / top : 0.0;
      row.penalty_units = static_cast<double>(obs.p()) * eff + (mode == ModelKind::spiked ? 1.0 : 0.0);
    }
    row.score = bic_score(row.rss, n_obs, row.penalty_units, obs_scale);
    out.table.push_back(row);
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& row : out.table)
    if (row.feasible && row.score < best) best = row.score, out.selected = row.rank;
  if (out.selected == 0) throw PreconditionError("select_rank_bic: no feasible candidate rank");
  return out;
}

// ---------------------------------------------------------------------------
// Nuclear penalty by cross-validation over held-out observed pairs

struct CvOptions {
  double holdout_fraction = 0.05;
  Index folds = 5;
  std::uint64_t seed = 0;
  ModelKind mode = ModelKind::exact;
  NnOptions nn;
};

struct CvRow {
  double nu = 0;
  std::vector<double> fold_errors;
  double mean_error = 0;
};

struct NuSelection {
  double selected = 0;
  std::vector<CvRow> table;
  std::vector<EdgeSet> holdouts;
};

/// Observed off-diagonal pairs i < j in column-major order.
template <typename Scalar>
EdgeSet observed_offdiagonal_pairs(const ObservedCovariance<Scalar>& obs) {
  EdgeSet pairs;
  for (Index j = 0; j < obs.p(); ++j)
    for (Index i = 0; i < j; ++i)
      if (obs.mask()(i, j)) pairs.push_back({i, j});
  return pairs;
}

/// Holdout sets of round(fraction * M) pairs each (at least one). When the
/// folds fit, they are disjoint slices of one shuffle; otherwise each fold
/// is drawn from a fresh shuffle.
template <typename Scalar>
std::vector<EdgeSet> cv_holdout_sets(const ObservedCovariance<Scalar>& obs, double fraction, Index folds,
                                     std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction >= 1.0) throw PreconditionError("cv: holdout_fraction must be in (0,1)");
  if (folds < 1) throw PreconditionError("cv: folds must be positive");
  const EdgeSet pairs = observed_offdiagonal_pairs(obs);
  const auto m = static_cast<Index>(pairs.size());
  if (m == 0) throw PreconditionError("cv: no observed off-diagonal pairs to hold out");
  const Index count = std::max<Index>(1, static_cast<Index>(std::llround(fraction * double(m))));
  Rng rng(seed);
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index(0));
  std::shuffle(order.begin(), order.end(), rng);
  const bool disjoint = double(folds) * fraction <= 1.0 && folds * count <= m;
  std::vector<EdgeSet> out;
  for (Index f = 0; f < folds; ++f) {
    if (!disjoint && f > 0) std::shuffle(order.begin(), order.end(), rng);
    const Index start = disjoint ? f * count : 0;
    EdgeSet fold;
    for (Index t = start; t < start + count; ++t) fold.push_back(pairs[static_cast<std::size_t>(order[t])]);
    out.push_back(normalize_edges(std::move(fold)));
  }
  return out;
}

/// Mean squared error of the completion on the held-out pairs.
template <typename Scalar>
double holdout_error(const ObservedCovariance<Scalar>& obs, const Matrix<Scalar>& fitted, const EdgeSet& holdout) {
  double err = 0;
  for (const Edge& e : holdout) {
    const double d = static_cast<double>(fitted(e.i, e.j) - obs.values()(e.i, e.j));
    err += d * d;
  }
  return holdout.empty() ? 0.0 : err / double(holdout.size());
}

template <typename Scalar>
NuSelection select_nu_cv(const ObservedCovariance<Scalar>& obs, const std::vector<double>& nu_grid,
                         const CvOptions& opts = {}) {
  if (nu_grid.empty()) throw PreconditionError("select_nu_cv: empty grid");
  if (!(opts.holdout_fraction > 0.0)) throw PreconditionError("select_nu_cv: holdout_fraction must be positive");
  for (double nu : nu_grid)
    if (!(nu >= 0.0)) throw PreconditionError("select_nu_cv: nu values must be nonnegative");
  NuSelection out;
  if (nu_grid.size() == 1) {
    out.selected = nu_grid.front();
    out.table.push_back({nu_grid.front(), {}, 0.0});
    return out;
  }
  out.holdouts = cv_holdout_sets(obs, opts.holdout_fraction, opts.folds, opts.seed);
  for (double nu : nu_grid) out.table.push_back({nu, {}, 0.0});
  for (const EdgeSet& holdout : out.holdouts) {
    const ObservedCovariance<Scalar> reduced = obs.without_pairs(holdout);
    for (auto& row : out.table) {
      const auto fit = nn_complete(reduced, Scalar(row.nu), opts.mode, opts.nn);
      row.fold_errors.push_back(holdout_error(obs, fit.sigma_tilde(), holdout));
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (auto& row : out.table) {
    row.mean_error = std::accumulate(row.fold_errors.begin(), row.fold_errors.end(), 0.0) /
                     double(row.fold_errors.size());
    if (row.mean_error < best || (row.mean_error == best && row.nu > out.selected)) {
      best = row.mean_error;
      out.selected = row.nu;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Glasso penalty by stability selection

/// Produces the covariance handed to glasso for subsample b.
template <typename Scalar = double>
using Resampler = std::function<Matrix<Scalar>(Index b)>;

template <typename Scalar = double>
using Completer = std::function<CompletedCovariance<Scalar>(const ObservedCovariance<Scalar>&)>;

/// Per-subsample seed: a seed_seq mix of (seed, b).
inline std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (std::uint64_t(out[0]) << 32) | out[1];
}

/// Rows subsampled without replacement within each block (floor(ratio n_k), at least 2).
template <typename Scalar>
BlockData<Scalar> subsample_blocks(const BlockData<Scalar>& data, double ratio, Rng& rng) {
  if (!(ratio > 0.0) || ratio > 1.0) throw PreconditionError("subsample ratio must be in (0,1]");
  std::vector<BlockRecord<Scalar>> blocks;
  for (const auto& b : data.blocks()) {
    const Index n = b.data.rows();
    const Index keep = std::min(n, std::max<Index>(2, static_cast<Index>(std::floor(ratio * double(n)))));
    std::vector<Index> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), Index(0));
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(static_cast<std::size_t>(keep));
    std::sort(rows.begin(), rows.end());
    Matrix<Scalar> sub(keep, b.data.cols());
    for (Index r = 0; r < keep; ++r) sub.row(r) = b.data.row(rows[static_cast<std::size_t>(r)]);
    blocks.push_back({std::move(sub), b.node_ids});
  }
  return BlockData<Scalar>(data.p(), std::move(blocks));
}

/// Observed covariance with a random `fraction` of its observed off-diagonal pairs removed.
template <typename Scalar>
ObservedCovariance<Scalar> jackknife_pairs(const ObservedCovariance<Scalar>& obs, double fraction, Rng& rng) {
  if (!(fraction > 0.0) || fraction >= 1.0) throw PreconditionError("jackknife fraction must be in (0,1)");
  EdgeSet pairs = observed_offdiagonal_pairs(obs);
  const auto count = static_cast<std::size_t>(std::llround(fraction * double(pairs.size())));
  std::shuffle(pairs.begin(), pairs.end(), rng);
  pairs.resize(count);
  return obs.without_pairs(normalize_edges(std::move(pairs)));
}

/// End to end: subsample block rows, re-estimate the covariance, complete.
template <typename Scalar>
Resampler<Scalar> block_subsample_resampler(BlockData<Scalar> data, Completer<Scalar> complete, double ratio,
                                            std::uint64_t seed) {
  return [data = std::move(data), complete = std::move(complete), ratio, seed](Index b) {
    Rng rng(derived_seed(seed, static_cast<std::uint64_t>(b)));
    return complete(compute_block_covariance(subsample_blocks(data, ratio, rng))).sigma_tilde();
  };
}

/// End to end without raw data: delete observed pairs, complete.
template <typename Scalar>
Resampler<Scalar> jackknife_resampler(ObservedCovariance<Scalar> obs, Completer<Scalar> complete, double fraction,
                                      std::uint64_t seed) {
  return [obs = std::move(obs), complete = std::move(complete), fraction, seed](Index b) {
    Rng rng(derived_seed(seed, static_cast<std::uint64_t>(b)));
    return complete(jackknife_pairs(obs, fraction, rng)).sigma_tilde();
  };
}

/// Post-completion fast mode: the completion is computed once; each subsample
/// replaces the observed entries by the subsampled block covariance.
template <typename Scalar>
Resampler<Scalar> post_completion_resampler(BlockData<Scalar> data, Matrix<Scalar> completed, double ratio,
                                            std::uint64_t seed) {
  return [data = std::move(data), completed = std::move(completed), ratio, seed](Index b) {
    Rng rng(derived_seed(seed, static_cast<std::uint64_t>(b)));
    const auto sub = compute_block_covariance(subsample_blocks(data, ratio, rng));
    return Matrix<Scalar>(sub.mask().select(sub.values(), completed));
  };
}

struct StabilityOptions {
  Index subsamples = 20;
  double threshold = 0.05;
  GlassoOptions glasso;
};

struct StabilityRow {
  double lambda = 0;
  double instability = 0;
  /// max instability over this and all larger lambdas.
  double monotone_instability = 0;
  double mean_edges = 0;
};

struct LambdaSelection {
  double selected = 0;
  /// Even the largest lambda exceeded the threshold.
  bool all_unstable = false;
  std::vector<StabilityRow> curve;  // descending lambda
  std::vector<std::string> warnings;
};

/// Mean over all node pairs of 2 q (1 - q), q the selection frequency of the pair.
inline double edge_instability(const std::vector<EdgeSet>& graphs, Index p) {
  if (graphs.empty() || p < 2) return 0.0;
  std::vector<Index> hits(static_cast<std::size_t>(p * p), 0);
  for (const auto& g : graphs)
    for (const Edge& e : g) ++hits[static_cast<std::size_t>(e.i * p + e.j)];
  double total = 0;
  const double b = static_cast<double>(graphs.size());
  for (Index i = 0; i < p; ++i)
    for (Index j = i + 1; j < p; ++j) {
      const double q = static_cast<double>(hits[static_cast<std::size_t>(i * p + j)]) / b;
      total += 2.0 * q * (1.0 - q);
    }
  return total / (0.5 * double(p) * double(p - 1));
}

/// Walks the grid from the largest lambda down and returns the smallest
/// lambda whose monotonized instability stays within the threshold.
template <typename Scalar>
LambdaSelection select_lambda_stability(const Resampler<Scalar>& resample, std::vector<double> lambda_grid,
                                        const StabilityOptions& opts = {}) {
  if (lambda_grid.empty()) throw PreconditionError("select_lambda_stability: empty grid");
  if (opts.subsamples < 1) throw PreconditionError("select_lambda_stability: subsamples must be positive");
  for (double l : lambda_grid)
    if (!(l >= 0.0)) throw PreconditionError("select_lambda_stability: lambda values must be nonnegative");
  std::sort(lambda_grid.begin(), lambda_grid.end(), std::greater<>());
  lambda_grid.erase(std::unique(lambda_grid.begin(), lambda_grid.end()), lambda_grid.end());

  std::vector<std::vector<EdgeSet>> graphs(lambda_grid.size());
  Index p = 0;
  for (Index b = 0; b < opts.subsamples; ++b) {
    const Matrix<Scalar> sigma = resample(b);
    p = sigma.rows();
    GlassoState<Scalar> state;
    for (std::size_t g = 0; g < lambda_grid.size(); ++g)
      graphs[g].push_back(graphical_lasso(sigma, Scalar(lambda_grid[g]), opts.glasso, &state).edges());
  }

  LambdaSelection out;
  double running = 0;
  bool any = false;
  for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
    StabilityRow row;
    row.lambda = lambda_grid[g];
    row.instability = edge_instability(graphs[g], p);
    running = std::max(running, row.instability);
    row.monotone_instability = running;
    double edges = 0;
    for (const auto& e : graphs[g]) edges += double(e.size());
    row.mean_edges = edges / double(graphs[g].size());
    if (running <= opts.threshold) {
      out.selected = row.lambda;
      any = true;
    }
    out.curve.push_back(row);
  }
  if (!any) {
    out.selected = lambda_grid.front();
    out.all_unstable = true;
    out.warnings.push_back("stability: every lambda exceeds the instability threshold; returning the largest");
  }
  return out;
}

/// Log-spaced grid from lambda_max = max |S_ij| (i != j) down to ratio * lambda_max.
template <typename Scalar>
std::vector<double> lambda_grid(const Matrix<Scalar>& sigma, Index count, double ratio) {
  if (count < 1) throw PreconditionError("lambda grid needs at least one point");
  if (!(ratio > 0.0) || ratio > 1.0) throw PreconditionError("lambda grid ratio must be in (0,1]");
  double top = 0;
  for (Index j = 0; j < sigma.cols(); ++j)
    for (Index i = 0; i < sigma.rows(); ++i)
      if (i != j) top = std::max(top, std::abs(static_cast<double>(sigma(i, j))));
  if (!(top > 0.0)) top = 1.0;
  std::vector<double> grid;
  for (Index k = 0; k < count; ++k) {
    const double t = count == 1 ? 0.0 : double(k) / double(count - 1);
    grid.push_back(top * std::pow(ratio, t));
  }
  return grid;
}

}  // namespace lrgq
