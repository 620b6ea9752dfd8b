#pragma once

// Observed covariance from block data, noise-level estimate, and PSD repair.
//
// Moments are pooled across blocks with 1/n normalization:
//   S_ij = m_ij - m_i m_j,
//   m_ij = sum_{k: i,j in V_k} X_i^(k)' X_j^(k) / sum_{k: i,j in V_k} n_k,
//   m_i  = sum_{k: i in V_k} 1' X_i^(k)         / sum_{k: i in V_k} n_k.

#include "lrgq/core.hpp"

namespace lrgq {

/// One block of raw observations: n_k x p_k data and the node id of each column.
template <typename Scalar = double>
struct BlockRecord {
  Matrix<Scalar> data;
  std::vector<Index> node_ids;
};

template <typename Scalar = double>
class BlockData {
 public:
  BlockData(Index p, std::vector<BlockRecord<Scalar>> blocks) : p_(p), blocks_(std::move(blocks)) {
    if (blocks_.empty()) throw DesignError("block data needs at least one block");
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const auto& b = blocks_[k];
      if (b.data.cols() != static_cast<Index>(b.node_ids.size()))
        throw DimensionError("block " + std::to_string(k + 1) + ": column count " +
                             std::to_string(b.data.cols()) + " differs from " +
                             std::to_string(b.node_ids.size()) + " node ids");
      std::vector<Index> sorted = b.node_ids;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw DesignError("block " + std::to_string(k + 1) + " repeats a node id");
      if (!sorted.empty() && (sorted.front() < 0 || sorted.back() >= p_))
        throw DesignError("block " + std::to_string(k + 1) + " has a node id outside 1.." +
                          std::to_string(p_));
    }
  }

  Index p() const { return p_; }
  Index num_blocks() const { return static_cast<Index>(blocks_.size()); }
  const std::vector<BlockRecord<Scalar>>& blocks() const { return blocks_; }

  BlockDesign design() const {
    std::vector<std::vector<Index>> sets;
    std::vector<Index> counts;
    for (const auto& b : blocks_) {
      sets.push_back(b.node_ids);
      counts.push_back(b.data.rows());
    }
    return BlockDesign(p_, std::move(sets), std::move(counts));
  }

 private:
  Index p_;
  std::vector<BlockRecord<Scalar>> blocks_;
};

/// Pooled-moment covariance over every jointly observed pair.
template <typename Scalar>
ObservedCovariance<Scalar> compute_block_covariance(const BlockData<Scalar>& data) {
  const Index p = data.p();
  Matrix<Scalar> cross = Matrix<Scalar>::Zero(p, p);
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> joint = decltype(joint)::Zero(p, p);
  Vector<Scalar> sums = Vector<Scalar>::Zero(p);
  Eigen::Matrix<Index, Eigen::Dynamic, 1> counts = decltype(counts)::Zero(p);

  for (const auto& block : data.blocks()) {
    const auto& ids = block.node_ids;
    const Index n = block.data.rows();
    const Matrix<Scalar> gram = block.data.transpose() * block.data;
    const Vector<Scalar> colsum = block.data.colwise().sum().transpose();
    for (std::size_t a = 0; a < ids.size(); ++a) {
      sums(ids[a]) += colsum(static_cast<Index>(a));
      counts(ids[a]) += n;
      for (std::size_t b = 0; b < ids.size(); ++b) {
        cross(ids[a], ids[b]) += gram(static_cast<Index>(a), static_cast<Index>(b));
        joint(ids[a], ids[b]) += n;
      }
    }
  }

  // Pairs never seen jointly are simply unobserved; pairs seen with too few
  // pooled samples are an error.
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i <= j; ++i)
      if (joint(i, j) > 0 && joint(i, j) < 2) throw DegeneratePairError(i, j, joint(i, j));

  BlockDesign design = data.design();
  Vector<Scalar> means(p);
  for (Index i = 0; i < p; ++i) means(i) = sums(i) / static_cast<Scalar>(counts(i));

  Matrix<Scalar> values = Matrix<Scalar>::Constant(p, p, std::numeric_limits<Scalar>::quiet_NaN());
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i <= j; ++i) {
      if (joint(i, j) == 0) continue;
      const Scalar v = cross(i, j) / static_cast<Scalar>(joint(i, j)) - means(i) * means(j);
      values(i, j) = v;
      values(j, i) = v;
    }

  std::vector<Index> zero_variance;
  for (Index i = 0; i < p; ++i) {
    const Scalar scale = std::max(Scalar(1), cross(i, i) / static_cast<Scalar>(joint(i, i)));
    if (values(i, i) <= std::numeric_limits<Scalar>::epsilon() * Scalar(16) * scale)
      zero_variance.push_back(i);
  }
  return ObservedCovariance<Scalar>(std::move(values), std::move(design))
      .with_audit(std::move(means), std::move(zero_variance));
}

/// Moment-form (1/n) sample covariance of a fully observed n x p matrix.
template <typename Derived>
Matrix<typename Derived::Scalar> sample_covariance(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.rows() < 1) throw PreconditionError("sample covariance needs at least one row");
  const Matrix<Scalar> centered = x.rowwise() - x.colwise().mean();
  return symmetrize(Matrix<Scalar>(centered.transpose() * centered / static_cast<Scalar>(x.rows())));
}

/// Restricts a full covariance to the observed set of `design`; observed
/// entries are copied bit-for-bit.
template <typename Derived>
ObservedCovariance<typename Derived::Scalar> mask_covariance(const Eigen::MatrixBase<Derived>& full,
                                                             const BlockDesign& design) {
  require_square(full, "mask_covariance");
  if (!is_exactly_symmetric(full)) throw InvariantError("mask_covariance: input not symmetric");
  return ObservedCovariance<typename Derived::Scalar>(full, design);
}

/// sigma^2 estimate for the spiked model: median of the diagonal.
template <typename Scalar>
Scalar estimate_noise_variance(const ObservedCovariance<Scalar>& obs) {
  const Vector<Scalar> d = obs.values().diagonal();
  return median(std::vector<Scalar>(d.data(), d.data() + d.size()));
}

/// tr(S) / lambda_1(S).
template <typename Derived>
typename Derived::Scalar effective_rank(const Eigen::MatrixBase<Derived>& cov) {
  require_square(cov, "effective_rank");
  using Scalar = typename Derived::Scalar;
  const Scalar top = symmetric_eigenvalues(cov).maxCoeff();
  if (!(top > Scalar(0))) throw PreconditionError("effective rank undefined for a zero matrix");
  return cov.trace() / top;
}

template <typename Scalar>
Scalar default_psd_floor(const ObservedCovariance<Scalar>& obs) {
  return Scalar(1e-6) * obs.values().diagonal().mean();
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> clip_eigenvalues(const Matrix<Scalar>& m, Scalar floor) {
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(m);
  const Vector<Scalar> clipped = es.eigenvalues().cwiseMax(floor);
  return symmetrize(Matrix<Scalar>(es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose()));
}

}  // namespace detail

/// Repairs an indefinite observed covariance so that its zero-filled version
/// has smallest eigenvalue >= floor.
///
/// Dykstra's alternating projections between {X : lambda_min(X) >= floor} and
/// {X : X = 0 off the mask}, started from the zero-filled input; this
/// approximates the Frobenius-nearest feasible point. Capped at `max_iter`
/// rounds, after which a diagonal shift closes any remaining gap (the
/// diagonal is always observed, so the shift stays on the mask).
template <typename Scalar>
ObservedCovariance<Scalar> project_psd(const ObservedCovariance<Scalar>& obs, Scalar floor, int max_iter = 200) {
  if (!(floor >= Scalar(0))) throw PreconditionError("project_psd: floor must be nonnegative");
  const Matrix<Scalar> start = obs.zero_filled();
  if (min_eigenvalue(start) >= floor) return obs;

  const Index p = obs.p();
  const Matrix<Scalar> zero = Matrix<Scalar>::Zero(p, p);
  Matrix<Scalar> x = start;
  Matrix<Scalar> psd_correction = zero, mask_correction = zero;
  for (int it = 0; it < max_iter; ++it) {
    const Matrix<Scalar> y = detail::clip_eigenvalues(Matrix<Scalar>(x + psd_correction), floor);
    psd_correction = x + psd_correction - y;
    const Matrix<Scalar> x_next = obs.mask().select(y + mask_correction, zero);
    mask_correction = y + mask_correction - x_next;
    const Scalar change = (x_next - x).cwiseAbs().maxCoeff();
    x = x_next;
    if (change <= Scalar(1e-13) * std::max(Scalar(1), x.cwiseAbs().maxCoeff())) break;
  }
  x = symmetrize(x);
  const Scalar gap = floor - min_eigenvalue(x);
  if (gap > Scalar(0)) x.diagonal().array() += gap * Scalar(1 + 1e-9) + std::numeric_limits<Scalar>::min();
  return obs.with_values(x);
}

template <typename Scalar>
ObservedCovariance<Scalar> project_psd(const ObservedCovariance<Scalar>& obs) {
  return project_psd(obs, default_psd_floor(obs));
}

}  // namespace lrgq
