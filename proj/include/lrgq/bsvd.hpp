#pragma once

// Sequential block SVD completion.
//
// Each observed principal block is factored as A_k = V diag(sqrt(max(w, 0)))
// over its top-r eigenpairs. Blocks are stitched in chaining order: rows of
// A_k for nodes already assembled are aligned to the assembled factor by an
// orthogonal Procrustes rotation, and the rotated rows of the new nodes are
// appended. The completion is U U' (plus sigma^2 I in spiked mode).

#include "lrgq/core.hpp"
#include "lrgq/cov_estimate.hpp"

namespace lrgq {

/// Orthogonal W minimizing ||a - b W||_F: with b'a = P S Q', W = P Q'.
template <typename DerivedA, typename DerivedB>
Matrix<typename DerivedA::Scalar> procrustes_align(const Eigen::MatrixBase<DerivedA>& a,
                                                   const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("procrustes_align: a and b must have the same shape");
  if (a.rows() < 1) throw PreconditionError("procrustes_align: need at least one row");
  const Matrix<Scalar> cross = b.transpose() * a;
  Eigen::JacobiSVD<Matrix<Scalar>> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

enum class BlockOrder {
  manifest,        ///< blocks processed in the order given by the design
  greedy_overlap,  ///< largest block first, then repeatedly the block with the largest overlap
};

template <typename Scalar = double>
struct BsvdOptions {
  ModelKind mode = ModelKind::exact;
  /// Spiked-mode noise level; defaults to the median-diagonal estimate.
  std::optional<Scalar> sigma2;
  BlockOrder order = BlockOrder::manifest;
  /// Copy observed entries over the factor product on output.
  bool preserve_observed = false;
  /// Optional r x r rotation applied to the first block factor (alignment is
  /// relative, so the completion does not depend on it).
  std::optional<Matrix<Scalar>> first_block_rotation;
};

/// Processing order honoring `order`; validates that every block after the
/// first overlaps the already-assembled nodes in at least `rank` nodes.
inline std::vector<Index> bsvd_block_order(const BlockDesign& design, Index rank, BlockOrder order) {
  const Index K = design.num_blocks();
  std::vector<Index> seq;
  std::vector<bool> assembled(static_cast<std::size_t>(design.p()), false);
  std::vector<bool> used(static_cast<std::size_t>(K), false);
  auto overlap_of = [&](Index k) {
    Index n = 0;
    for (Index v : design.nodes(k)) n += assembled[static_cast<std::size_t>(v)] ? 1 : 0;
    return n;
  };
  for (Index step = 0; step < K; ++step) {
    Index pick = step;
    if (order == BlockOrder::greedy_overlap) {
      Index best = -1, best_score = -1;
      for (Index k = 0; k < K; ++k) {
        if (used[static_cast<std::size_t>(k)]) continue;
        const Index score = step == 0 ? static_cast<Index>(design.nodes(k).size()) : overlap_of(k);
        if (score > best_score) best = k, best_score = score;
      }
      pick = best;
    }
    if (step > 0) {
      const Index overlap = overlap_of(pick);
      if (overlap < rank) throw InsufficientOverlapError(pick, overlap, rank);
    }
    used[static_cast<std::size_t>(pick)] = true;
    for (Index v : design.nodes(pick)) assembled[static_cast<std::size_t>(v)] = true;
    seq.push_back(pick);
  }
  return seq;
}

template <typename Scalar>
CompletedCovariance<Scalar> bsvd_complete(const ObservedCovariance<Scalar>& obs, Index rank,
                                          const BsvdOptions<Scalar>& opts = {}) {
  if (rank < 1) throw PreconditionError("bsvd_complete: rank must be positive");
  const Index p = obs.p();
  const BlockDesign& design = obs.design();
  const std::vector<Index> order = bsvd_block_order(design, rank, opts.order);
  if (!obs.mask_matches_design())
    throw PreconditionError("bsvd_complete: every block must be fully observed (held-out pairs are not supported)");

  SolverReport report;
  Scalar sigma2(0);
  Matrix<Scalar> input = obs.zero_filled();
  if (opts.mode == ModelKind::spiked) {
    sigma2 = opts.sigma2.value_or(estimate_noise_variance(obs));
    if (!(sigma2 >= Scalar(0))) throw PreconditionError("bsvd_complete: sigma2 must be nonnegative");
    input.diagonal().array() -= sigma2;
    const Scalar tol = Scalar(1e-12) * std::max(Scalar(1), obs.values().diagonal().cwiseAbs().maxCoeff());
    if (input.diagonal().minCoeff() < -tol)
      report.warnings.push_back("noise-estimate-too-large: adjusted diagonal has negative entries; "
                                "eigenvalues clipped at 0");
  }

  Matrix<Scalar> factor = Matrix<Scalar>::Zero(p, rank);
  std::vector<bool> assembled(static_cast<std::size_t>(p), false);
  for (std::size_t step = 0; step < order.size(); ++step) {
    const Index k = order[step];
    const auto& nodes = design.nodes(k);
    const Index pk = static_cast<Index>(nodes.size());

    Matrix<Scalar> sub(pk, pk);
    for (Index a = 0; a < pk; ++a)
      for (Index b = 0; b < pk; ++b) sub(a, b) = input(nodes[a], nodes[b]);
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(sub);

    // Top eigenpairs in descending order, clipped at zero.
    Matrix<Scalar> block_factor = Matrix<Scalar>::Zero(pk, rank);
    const Index available = std::min(rank, pk);
    Index positive = 0;
    const Scalar top = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), std::numeric_limits<Scalar>::min());
    for (Index c = 0; c < available; ++c) {
      const Index src = pk - 1 - c;
      const Scalar w = std::max(es.eigenvalues()(src), Scalar(0));
      if (w > Scalar(1e-12) * top) ++positive;
      block_factor.col(c) = es.eigenvectors().col(src) * std::sqrt(w);
    }
    if (positive < rank)
      report.warnings.push_back("block " + std::to_string(k + 1) + " has numerical rank " +
                                std::to_string(positive) + " < " + std::to_string(rank) +
                                "; factor truncated to the available rank");

    if (step == 0) {
      if (opts.first_block_rotation) {
        if (opts.first_block_rotation->rows() != rank || opts.first_block_rotation->cols() != rank)
          throw DimensionError("first_block_rotation must be rank x rank");
        block_factor = block_factor * (*opts.first_block_rotation);
      }
    } else {
      std::vector<Index> shared_local;
      for (Index a = 0; a < pk; ++a)
        if (assembled[static_cast<std::size_t>(nodes[a])]) shared_local.push_back(a);
      const Index m = static_cast<Index>(shared_local.size());
      Matrix<Scalar> target(m, rank), source(m, rank);
      for (Index s = 0; s < m; ++s) {
        target.row(s) = factor.row(nodes[shared_local[s]]);
        source.row(s) = block_factor.row(shared_local[s]);
      }
      block_factor = block_factor * procrustes_align(target, source);
    }
    for (Index a = 0; a < pk; ++a) {
      const auto v = static_cast<std::size_t>(nodes[a]);
      if (assembled[v]) continue;
      factor.row(nodes[a]) = block_factor.row(a);
      assembled[v] = true;
    }
  }

  Matrix<Scalar> sigma_tilde = symmetrize(Matrix<Scalar>(factor * factor.transpose()));
  if (opts.mode == ModelKind::spiked) sigma_tilde.diagonal().array() += sigma2;
  report.iterations = design.num_blocks();

  if (opts.preserve_observed) {
    sigma_tilde = obs.mask().select(obs.values(), sigma_tilde);
    return CompletedCovariance<Scalar>(std::move(sigma_tilde), opts.mode, rank, sigma2, std::nullopt,
                                       std::nullopt, std::move(report));
  }
  return CompletedCovariance<Scalar>(std::move(sigma_tilde), opts.mode, rank, sigma2, std::move(factor),
                                     std::nullopt, std::move(report));
}

}  // namespace lrgq
