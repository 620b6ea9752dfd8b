#pragma once

// Ground-truth generators, Gaussian sampling, and block observation patterns
// for the synthetic experiments.

#include "lrgq/core.hpp"

#include <numeric>
#include <random>

namespace lrgq {

struct PrecisionOptions {
  /// Smallest eigenvalue guaranteed by make_pd.
  double margin = 0.1;
  /// Draw a random sign for each nonzero off-diagonal weight.
  bool random_signs = false;
  /// Store every off-diagonal weight as -w (theta = D - A for a nonnegative weighted adjacency A).
  bool negative_weights = false;
};

/// theta + c I with c = max(0, margin - lambda_min(theta)).
template <typename Derived>
Matrix<typename Derived::Scalar> make_pd(const Eigen::MatrixBase<Derived>& theta, typename Derived::Scalar margin) {
  using Scalar = typename Derived::Scalar;
  require_square(theta, "make_pd");
  if (!(margin > Scalar(0))) throw PreconditionError("make_pd: margin must be positive");
  if (!is_exactly_symmetric(theta)) throw InvariantError("make_pd: input must be symmetric");
  Matrix<Scalar> out = theta;
  const Scalar shift = std::max(Scalar(0), margin - min_eigenvalue(theta));
  out.diagonal().array() += shift;
  return out;
}

namespace detail {

/// Weighted support -> precision: weights ~ U(0,2) (optionally signed),
/// diagonal ~ U(1,2), then make_pd. Pairs are visited in (i<j) row-major order.
template <typename Scalar, typename IsEdge>
GroundTruth<Scalar> weighted_precision(Index p, Rng& rng, const PrecisionOptions& opts, IsEdge&& is_edge) {
  std::uniform_real_distribution<double> weight(0.0, 2.0), diag(1.0, 2.0);
  std::bernoulli_distribution coin(0.5);
  Matrix<Scalar> theta = Matrix<Scalar>::Zero(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = i + 1; j < p; ++j) {
      if (!is_edge(i, j)) continue;
      double w = weight(rng);
      while (w == 0.0) w = weight(rng);
      if (opts.random_signs && coin(rng)) w = -w;
      if (opts.negative_weights) w = -w;
      theta(i, j) = theta(j, i) = Scalar(w);
    }
  for (Index i = 0; i < p; ++i) theta(i, i) = Scalar(diag(rng));
  return GroundTruth<Scalar>(make_pd(theta, Scalar(opts.margin)));
}

}  // namespace detail

/// Community of each node: equal-size communities, remainder nodes join the last.
inline std::vector<Index> community_labels(Index p, Index communities) {
  if (communities < 1 || communities > p) throw PreconditionError("communities must be in 1..p");
  const Index size = p / communities;
  std::vector<Index> label(static_cast<std::size_t>(p));
  for (Index i = 0; i < p; ++i) label[static_cast<std::size_t>(i)] = std::min(i / size, communities - 1);
  return label;
}

/// Stochastic block model: edges within communities with probability within_prob.
template <typename Scalar = double>
GroundTruth<Scalar> gen_sbm_precision(Index p, Index communities, double within_prob, std::uint64_t seed,
                                      const PrecisionOptions& opts = {}) {
  if (within_prob < 0.0 || within_prob > 1.0) throw PreconditionError("within_prob must be in [0,1]");
  const auto label = community_labels(p, communities);
  Rng rng(seed);
  std::bernoulli_distribution keep(within_prob);
  return detail::weighted_precision<Scalar>(p, rng, opts, [&](Index i, Index j) {
    return label[static_cast<std::size_t>(i)] == label[static_cast<std::size_t>(j)] && keep(rng);
  });
}

/// Multistar: nodes 0..hubs-1 are hubs; each other node links to one uniformly chosen hub.
template <typename Scalar = double>
GroundTruth<Scalar> gen_multistar_precision(Index p, Index hubs, std::uint64_t seed, const PrecisionOptions& opts = {}) {
  if (hubs < 1 || hubs >= p) throw PreconditionError("multistar needs 1 <= hubs < p");
  Rng rng(seed);
  std::uniform_int_distribution<Index> pick(0, hubs - 1);
  std::vector<Index> hub_of(static_cast<std::size_t>(p), -1);
  for (Index v = hubs; v < p; ++v) hub_of[static_cast<std::size_t>(v)] = pick(rng);
  return detail::weighted_precision<Scalar>(p, rng, opts, [&](Index i, Index j) {
    return i < hubs && hub_of[static_cast<std::size_t>(j)] == i;
  });
}

/// Erdos-Renyi: each pair independently with probability edge_prob.
template <typename Scalar = double>
GroundTruth<Scalar> gen_er_precision(Index p, double edge_prob, std::uint64_t seed, const PrecisionOptions& opts = {}) {
  if (edge_prob < 0.0 || edge_prob > 1.0) throw PreconditionError("edge_prob must be in [0,1]");
  Rng rng(seed);
  std::bernoulli_distribution keep(edge_prob);
  return detail::weighted_precision<Scalar>(p, rng, opts, [&](Index, Index) { return keep(rng); });
}

/// Random orthonormal p x r matrix (QR of a Gaussian matrix).
template <typename Scalar = double>
Matrix<Scalar> random_orthonormal(Index p, Index r, Rng& rng) {
  std::normal_distribution<double> z;
  Matrix<Scalar> g(p, r);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < r; ++j) g(i, j) = Scalar(z(rng));
  Eigen::HouseholderQR<Matrix<Scalar>> qr(g);
  Matrix<Scalar> q = qr.householderQ() * Matrix<Scalar>::Identity(p, r);
  return q;
}

/// Spiked ground truth theta* = c I - L0 with L0 = V diag(mu) V', mu ~ U(lo, hi) * c.
/// With lo > 1/2 and hi < 1 the covariance is exactly L + (1/c) I with L rank r.
/// If `communities` is set, V holds the normalized community indicators (r = communities),
/// giving a block graph whose communities are complete.
template <typename Scalar = double>
GroundTruth<Scalar> gen_spiked_precision(Index p, Index r, double c, std::uint64_t seed, bool community_structure,
                                         double lo = 0.6, double hi = 0.9) {
  if (r < 1 || r > p) throw PreconditionError("spiked rank must be in 1..p");
  if (!(c > 0.0) || !(lo > 0.0) || !(hi < 1.0) || lo > hi) throw PreconditionError("spiked: invalid spectrum range");
  Rng rng(seed);
  Matrix<Scalar> basis;
  if (community_structure) {
    const auto label = community_labels(p, r);
    basis = Matrix<Scalar>::Zero(p, r);
    for (Index i = 0; i < p; ++i) basis(i, label[static_cast<std::size_t>(i)]) = Scalar(1);
    for (Index k = 0; k < r; ++k) basis.col(k).normalize();
  } else {
    basis = random_orthonormal<Scalar>(p, r, rng);
  }
  std::uniform_real_distribution<double> spread(lo, hi);
  Vector<Scalar> mu(r);
  for (Index k = 0; k < r; ++k) mu(k) = Scalar(spread(rng) * c);
  Matrix<Scalar> l0 = basis * mu.asDiagonal() * basis.transpose();
  Matrix<Scalar> theta = -symmetrize(l0);
  theta.diagonal().array() += Scalar(c);
  // Exact spectral form of the covariance: L = V diag(mu / (c (c - mu))) V'.
  Vector<Scalar> spike(r);
  for (Index k = 0; k < r; ++k) spike(k) = mu(k) / (Scalar(c) * (Scalar(c) - mu(k)));
  SpikedPart<Scalar> part{symmetrize(Matrix<Scalar>(basis * spike.asDiagonal() * basis.transpose())),
                          Scalar(1.0 / c), r};
  // Off-support entries of theta can carry rounding noise; zero them so the
  // edge set is exact.
  const Scalar noise = Scalar(1e-14) * Scalar(c);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j)
      if (i != j && std::abs(theta(i, j)) < noise) theta(i, j) = 0;
  return GroundTruth<Scalar>(std::move(theta), std::move(part));
}

/// n i.i.d. rows from N(0, sigma*) via the Cholesky factor.
template <typename Scalar>
Matrix<Scalar> sample_ggm(const GroundTruth<Scalar>& truth, Index n, std::uint64_t seed) {
  if (n < 1) throw PreconditionError("sample_ggm: n must be positive");
  Eigen::LLT<Matrix<Scalar>> llt(truth.sigma_star());
  if (llt.info() != Eigen::Success) throw InvariantError("sample_ggm: sigma* is not positive definite");
  const Index p = truth.p();
  Rng rng(seed);
  std::normal_distribution<double> z;
  Matrix<Scalar> draws(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) draws(i, j) = Scalar(z(rng));
  return draws * llt.matrixL().transpose();
}

/// K consecutive windows of o nodes covering 0..p-1. The total overlap K*o - p
/// is spread over the K-1 junctions, earliest junctions taking the remainder.
/// A seeded random relabeling decouples block membership from graph position.
inline BlockDesign make_block_pattern(Index p, Index K, Index o, Index samples_per_block,
                                      std::optional<std::uint64_t> shuffle_seed = std::nullopt) {
  if (K < 1 || o < 1 || p < 1) throw PreconditionError("block pattern needs positive p, K, o");
  if (o > p) throw PreconditionError("block pattern: o must not exceed p");
  if (K * o < p) throw DesignError("block pattern: K*o = " + std::to_string(K * o) + " cannot cover p = " +
                                   std::to_string(p));
  if (K > 1 && K * o < p + (K - 1))
    throw DesignError("block pattern: consecutive windows cannot all overlap");
  if (K == 1 && o != p) throw DesignError("block pattern: a single block must cover all p nodes");

  std::vector<Index> label(static_cast<std::size_t>(p));
  std::iota(label.begin(), label.end(), Index(0));
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    std::shuffle(label.begin(), label.end(), rng);
  }

  std::vector<std::vector<Index>> sets;
  const Index junctions = K - 1;
  const Index total_overlap = K * o - p;
  Index start = 0;
  for (Index k = 0; k < K; ++k) {
    std::vector<Index> window;
    for (Index v = start; v < start + o; ++v) window.push_back(label[static_cast<std::size_t>(v)]);
    std::sort(window.begin(), window.end());
    sets.push_back(std::move(window));
    if (k < junctions) {
      const Index overlap = total_overlap / junctions + (k < total_overlap % junctions ? 1 : 0);
      start += o - overlap;
    }
  }
  return BlockDesign(p, std::move(sets), std::vector<Index>(static_cast<std::size_t>(K), samples_per_block));
}

template <typename Scalar = double>
struct SpikedVerification {
  bool holds = false;
  Matrix<Scalar> low_rank;   // L = theta^{-1} - (1/c) I
  Scalar diag_level = 0;     // 1/c
  Vector<Scalar> spectrum;   // eigenvalues of L, descending
  std::vector<std::string> failures;
};

/// Checks the spiked decomposition of theta^{-1} implied by theta = c I - L0
/// with L0 PSD of rank r and lambda_r(L0) > c/2: L = theta^{-1} - I/c must be
/// PSD with rank r and lambda_r(L) > 1/c. Failed checks are listed, not thrown.
template <typename Scalar>
SpikedVerification<Scalar> verify_spiked_decomposition(const Matrix<Scalar>& theta, Scalar c, Index r,
                                                       Scalar rel_tol = Scalar(1e-8)) {
  require_square(theta, "verify_spiked_decomposition");
  if (!(c > Scalar(0))) throw PreconditionError("verify_spiked_decomposition: c must be positive");
  const Index p = theta.rows();
  if (r < 0 || r > p) throw PreconditionError("verify_spiked_decomposition: r must be in 0..p");
  SpikedVerification<Scalar> out;
  out.diag_level = Scalar(1) / c;

  Eigen::LLT<Matrix<Scalar>> llt(theta);
  if (llt.info() != Eigen::Success) {
    out.failures.push_back("theta is not positive definite");
    return out;
  }
  const Matrix<Scalar> sigma = symmetrize(Matrix<Scalar>(llt.solve(Matrix<Scalar>::Identity(p, p))));
  out.low_rank = sigma;
  out.low_rank.diagonal().array() -= out.diag_level;
  out.low_rank = symmetrize(out.low_rank);

  Matrix<Scalar> l0 = -theta;
  l0.diagonal().array() += c;
  const Vector<Scalar> l0_spec = symmetric_eigenvalues(l0).reverse();
  out.spectrum = symmetric_eigenvalues(out.low_rank).reverse();
  const Scalar scale = std::max({Scalar(1), out.spectrum.cwiseAbs().maxCoeff(), l0_spec.cwiseAbs().maxCoeff()});
  const Scalar tol = rel_tol * scale;

  if (l0_spec(p - 1) < -tol) out.failures.push_back("hypothesis: c I - theta is not positive semi-definite");
  const Index l0_rank = (l0_spec.array() > tol).count();
  if (l0_rank != r)
    out.failures.push_back("hypothesis: rank(c I - theta) = " + std::to_string(l0_rank) + " differs from r = " +
                           std::to_string(r));
  if (r > 0 && !(l0_spec(r - 1) > c / Scalar(2)))
    out.failures.push_back("hypothesis: lambda_r(L0) <= c/2");

  if (out.spectrum(p - 1) < -tol) out.failures.push_back("conclusion: L is not positive semi-definite");
  const Index l_rank = (out.spectrum.array() > tol).count();
  if (l_rank != r)
    out.failures.push_back("conclusion: rank(L) = " + std::to_string(l_rank) + " differs from r = " +
                           std::to_string(r));
  if (r > 0 && !(out.spectrum(r - 1) > out.diag_level))
    out.failures.push_back("conclusion: lambda_r(L) <= 1/c");

  out.holds = out.failures.empty();
  return out;
}

}  // namespace lrgq
