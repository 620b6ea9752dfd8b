#pragma once

// Shared domain types for low-rank graph quilting.
//
// Every type here is validated on construction and immutable afterwards.
// Numeric types are templated on the scalar; node indices are 0-based in
// memory and 1-based in every file format.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lrgq {

using Rng = std::mt19937_64;

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using MaskMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error("dimension", w) {}
};
struct InvariantError : Error {
  explicit InvariantError(const std::string& w) : Error("invariant", w) {}
};
struct DesignError : Error {
  explicit DesignError(const std::string& w) : Error("design", w) {}
};
struct DegeneratePairError : Error {
  DegeneratePairError(Index i, Index j, Index count)
      : Error("degenerate-pair",
              "pair (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                  ") has " + std::to_string(count) +
                  " pooled joint samples; at least 2 required"),
        i_(i), j_(j) {}
  Index i() const { return i_; }
  Index j() const { return j_; }

 private:
  Index i_, j_;
};
struct InsufficientOverlapError : Error {
  InsufficientOverlapError(Index block, Index overlap, Index rank)
      : Error("insufficient-overlap",
              "block " + std::to_string(block + 1) + " overlaps the assembled nodes in " +
                  std::to_string(overlap) + " nodes; rank " + std::to_string(rank) +
                  " requires at least " + std::to_string(rank)),
        block_(block) {}
  Index block() const { return block_; }

 private:
  Index block_;
};
struct PreconditionError : Error {
  explicit PreconditionError(const std::string& w) : Error("precondition", w) {}
};

// ---------------------------------------------------------------------------
// Small matrix helpers

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << what << ": expected a square matrix, got " << m.rows() << "x" << m.cols();
    throw DimensionError(os.str());
  }
}

/// (m + m^T) / 2.
template <typename Derived>
Matrix<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived>& m) {
  require_square(m, "symmetrize");
  return (m + m.transpose()) / typename Derived::Scalar(2);
}

template <typename Derived>
bool is_exactly_symmetric(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols()) return false;
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = j + 1; i < m.rows(); ++i) {
      const auto a = m(i, j), b = m(j, i);
      // NaN sentinels compare unequal; treat a NaN pair as symmetric.
      if (!(a == b) && !(std::isnan(a) && std::isnan(b))) return false;
    }
  return true;
}

template <typename Derived>
typename Derived::Scalar max_asymmetry(const Eigen::MatrixBase<Derived>& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

/// Eigenvalues in ascending order. Fixed LAPACK-free algorithm, deterministic.
template <typename Derived>
Vector<typename Derived::Scalar> symmetric_eigenvalues(const Eigen::MatrixBase<Derived>& m) {
  Eigen::SelfAdjointEigenSolver<Matrix<typename Derived::Scalar>> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& m) {
  return symmetric_eigenvalues(m)(0);
}

/// Entries of `values` on the mask, zero elsewhere.
template <typename Derived>
Matrix<typename Derived::Scalar> zero_filled(const Eigen::MatrixBase<Derived>& values,
                                             const MaskMatrix& mask) {
  using Scalar = typename Derived::Scalar;
  return mask.select(values, Matrix<Scalar>::Zero(values.rows(), values.cols()));
}

template <typename Scalar>
Scalar median(std::vector<Scalar> v) {
  if (v.empty()) throw PreconditionError("median of an empty sequence");
  const std::size_t n = v.size(), mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const Scalar upper = v[mid];
  if (n % 2 == 1) return upper;
  const Scalar lower = *std::max_element(v.begin(), v.begin() + mid);
  return (lower + upper) / Scalar(2);
}

// ---------------------------------------------------------------------------
// Edges

/// Unordered node pair stored with i < j.
struct Edge {
  Index i = 0;
  Index j = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Sorted, duplicate-free list of edges.
using EdgeSet = std::vector<Edge>;

inline EdgeSet normalize_edges(EdgeSet edges) {
  for (auto& e : edges) {
    if (e.i == e.j) throw InvariantError("edge sets cannot contain self-loops");
    if (e.i > e.j) std::swap(e.i, e.j);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

/// Off-diagonal support {(i,j): i<j, |m(i,j)| > tolerance}.
template <typename Derived>
EdgeSet support_edges(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar tolerance) {
  EdgeSet out;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j)) > tolerance) out.push_back({i, j});
  return out;
}

// ---------------------------------------------------------------------------
// BlockDesign

/// K partially overlapping node sets with their sample counts.
class BlockDesign {
 public:
  BlockDesign(Index p, std::vector<std::vector<Index>> node_sets, std::vector<Index> sample_counts)
      : p_(p), node_sets_(std::move(node_sets)), sample_counts_(std::move(sample_counts)) {
    if (p_ < 1) throw DesignError("design needs at least one node");
    if (node_sets_.empty()) throw DesignError("design needs at least one block");
    if (node_sets_.size() != sample_counts_.size())
      throw DesignError("one sample count is required per block");
    std::vector<bool> covered(static_cast<std::size_t>(p_), false);
    for (std::size_t k = 0; k < node_sets_.size(); ++k) {
      const auto& nodes = node_sets_[k];
      if (nodes.empty()) throw DesignError("block " + std::to_string(k + 1) + " is empty");
      if (sample_counts_[k] < 2)
        throw DesignError("block " + std::to_string(k + 1) + " needs at least 2 samples");
      std::vector<bool> seen(static_cast<std::size_t>(p_), false);
      for (Index v : nodes) {
        if (v < 0 || v >= p_)
          throw DesignError("block " + std::to_string(k + 1) + " has node id " +
                            std::to_string(v + 1) + " outside 1.." + std::to_string(p_));
        if (seen[static_cast<std::size_t>(v)])
          throw DesignError("block " + std::to_string(k + 1) + " repeats node " +
                            std::to_string(v + 1));
        seen[static_cast<std::size_t>(v)] = true;
        covered[static_cast<std::size_t>(v)] = true;
      }
    }
    for (Index v = 0; v < p_; ++v)
      if (!covered[static_cast<std::size_t>(v)])
        throw DesignError("node " + std::to_string(v + 1) + " is not observed in any block");
  }

  /// Recovers a block design from a block-structured mask: the blocks are the
  /// maximal fully-observed neighbourhoods. Fails if they do not reproduce the mask.
  static BlockDesign from_mask(const MaskMatrix& mask, Index samples_per_block = 2) {
    const Index p = mask.rows();
    if (mask.cols() != p) throw DimensionError("mask must be square");
    std::vector<std::vector<Index>> candidates;
    for (Index i = 0; i < p; ++i) {
      std::vector<Index> nbhd;
      for (Index j = 0; j < p; ++j)
        if (mask(i, j) || i == j) nbhd.push_back(j);
      bool clique = true;
      for (Index a : nbhd) {
        for (Index b : nbhd)
          if (!mask(a, b) && a != b) {
            clique = false;
            break;
          }
        if (!clique) break;
      }
      if (clique) candidates.push_back(std::move(nbhd));
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    std::vector<std::vector<Index>> blocks;
    for (std::size_t a = 0; a < candidates.size(); ++a) {
      bool maximal = true;
      for (std::size_t b = 0; b < candidates.size() && maximal; ++b)
        if (a != b && candidates[b].size() > candidates[a].size() &&
            std::includes(candidates[b].begin(), candidates[b].end(), candidates[a].begin(),
                          candidates[a].end()))
          maximal = false;
      if (maximal) blocks.push_back(candidates[a]);
    }
    BlockDesign design(p, blocks, std::vector<Index>(blocks.size(), samples_per_block));
    MaskMatrix rebuilt = design.observed_mask();
    for (Index i = 0; i < p; ++i) rebuilt(i, i) = rebuilt(i, i) || mask(i, i);
    if ((rebuilt != mask).any()) throw DesignError("mask is not a union of principal blocks");
    return design;
  }

  Index p() const { return p_; }
  Index num_blocks() const { return static_cast<Index>(node_sets_.size()); }
  const std::vector<Index>& nodes(Index k) const { return node_sets_.at(static_cast<std::size_t>(k)); }
  Index samples(Index k) const { return sample_counts_.at(static_cast<std::size_t>(k)); }
  const std::vector<std::vector<Index>>& node_sets() const { return node_sets_; }
  const std::vector<Index>& sample_counts() const { return sample_counts_; }

  /// Indicator of O = union of V_k x V_k.
  MaskMatrix observed_mask() const {
    MaskMatrix mask = MaskMatrix::Constant(p_, p_, false);
    for (const auto& nodes : node_sets_)
      for (Index a : nodes)
        for (Index b : nodes) mask(a, b) = true;
    return mask;
  }

  bool fully_observed() const { return observed_mask().all(); }

 private:
  Index p_;
  std::vector<std::vector<Index>> node_sets_;
  std::vector<Index> sample_counts_;
};

// ---------------------------------------------------------------------------
// ObservedCovariance

/// Masked sample covariance. Unobserved entries hold NaN; the mask is authoritative.
template <typename Scalar = double>
class ObservedCovariance {
 public:
  ObservedCovariance(Matrix<Scalar> values, BlockDesign design)
      : values_(std::move(values)), mask_(design.observed_mask()), design_(std::move(design)) {
    validate();
  }

  const Matrix<Scalar>& values() const { return values_; }
  const MaskMatrix& mask() const { return mask_; }
  const BlockDesign& design() const { return design_; }
  Index p() const { return values_.rows(); }

  /// Observed entries with zeros on the complement.
  Matrix<Scalar> zero_filled() const { return lrgq::zero_filled(values_, mask_); }

  /// Number of distinct observed pairs i <= j.
  Index observed_upper_count() const {
    Index n = 0;
    for (Index j = 0; j < p(); ++j)
      for (Index i = 0; i <= j; ++i) n += mask_(i, j) ? 1 : 0;
    return n;
  }

  /// Audit data from moment pooling: pooled first moments and zero-variance nodes.
  const Vector<Scalar>& first_moments() const { return first_moments_; }
  const std::vector<Index>& zero_variance_nodes() const { return zero_variance_nodes_; }

  ObservedCovariance with_audit(Vector<Scalar> first_moments, std::vector<Index> zero_variance) const {
    ObservedCovariance copy = *this;
    copy.first_moments_ = std::move(first_moments);
    copy.zero_variance_nodes_ = std::move(zero_variance);
    return copy;
  }

  /// Same design and mask, new observed values (entries off the mask are ignored).
  ObservedCovariance with_values(const Matrix<Scalar>& values) const {
    ObservedCovariance copy = *this;
    copy.values_ = values;
    copy.validate();
    return copy;
  }

  /// Copy with the given off-diagonal pairs removed from the mask (both triangles).
  ObservedCovariance without_pairs(const EdgeSet& pairs) const {
    ObservedCovariance copy = *this;
    for (const Edge& e : pairs) {
      if (e.i == e.j) throw PreconditionError("diagonal entries cannot be held out");
      if (e.i < 0 || e.j < 0 || e.i >= p() || e.j >= p()) throw DimensionError("held-out pair out of range");
      copy.mask_(e.i, e.j) = copy.mask_(e.j, e.i) = false;
    }
    copy.validate();
    return copy;
  }

  /// True when the mask equals the design's observed-pair set.
  bool mask_matches_design() const { return (mask_ == design_.observed_mask()).all(); }

 private:
  void validate() {
    if (values_.rows() != values_.cols() || values_.rows() != design_.p())
      throw DimensionError("observed covariance must be p x p with p = design.p()");
    values_ = mask_.select(values_, Matrix<Scalar>::Constant(p(), p(), std::numeric_limits<Scalar>::quiet_NaN()));
    for (Index j = 0; j < p(); ++j)
      for (Index i = 0; i < p(); ++i)
        if (mask_(i, j) && !std::isfinite(values_(i, j)))
          throw InvariantError("observed entry (" + std::to_string(i + 1) + "," +
                               std::to_string(j + 1) + ") is not finite");
    if (!is_exactly_symmetric(values_)) throw InvariantError("observed covariance is not symmetric");
  }

  Matrix<Scalar> values_;
  MaskMatrix mask_;
  BlockDesign design_;
  Vector<Scalar> first_moments_;
  std::vector<Index> zero_variance_nodes_;
};

// ---------------------------------------------------------------------------
// Solver diagnostics shared by the completion and precision solvers.

struct SolverReport {
  bool converged = true;
  Index iterations = 0;
  double objective = 0.0;
  /// KKT / fixed-point residual or final gradient norm, depending on the solver.
  double residual = 0.0;
  std::vector<std::string> warnings;
  /// Per-iteration objective values, filled only when a solver is asked to record them.
  std::vector<double> history;
};

enum class ModelKind { exact, spiked };

inline const char* to_string(ModelKind k) { return k == ModelKind::exact ? "exact" : "spiked"; }

// ---------------------------------------------------------------------------
// CompletedCovariance

template <typename Scalar = double>
class CompletedCovariance {
 public:
  CompletedCovariance(Matrix<Scalar> sigma_tilde, ModelKind kind, Index rank_used, Scalar sigma2_hat,
                      std::optional<Matrix<Scalar>> factor = std::nullopt,
                      std::optional<Matrix<Scalar>> low_rank_part = std::nullopt,
                      SolverReport report = {})
      : sigma_tilde_(std::move(sigma_tilde)),
        kind_(kind),
        rank_used_(rank_used),
        sigma2_hat_(sigma2_hat),
        factor_(std::move(factor)),
        low_rank_part_(std::move(low_rank_part)),
        report_(std::move(report)) {
    validate();
  }

  const Matrix<Scalar>& sigma_tilde() const { return sigma_tilde_; }
  ModelKind model_kind() const { return kind_; }
  Index rank_used() const { return rank_used_; }
  Scalar sigma2_hat() const { return sigma2_hat_; }
  const std::optional<Matrix<Scalar>>& factor() const { return factor_; }
  const std::optional<Matrix<Scalar>>& low_rank_part() const { return low_rank_part_; }
  const SolverReport& report() const { return report_; }
  Index p() const { return sigma_tilde_.rows(); }

  void add_warnings(const std::vector<std::string>& notes) {
    report_.warnings.insert(report_.warnings.end(), notes.begin(), notes.end());
  }

 private:
  void validate() const {
    require_square(sigma_tilde_, "completed covariance");
    if (!sigma_tilde_.allFinite()) throw InvariantError("completed covariance has non-finite entries");
    if (!is_exactly_symmetric(sigma_tilde_)) throw InvariantError("completed covariance is not symmetric");
    if (rank_used_ < 0) throw InvariantError("rank_used must be nonnegative");
    if (!(sigma2_hat_ >= Scalar(0))) throw InvariantError("sigma2_hat must be nonnegative");
    if (kind_ == ModelKind::exact && sigma2_hat_ != Scalar(0))
      throw InvariantError("exact low-rank completions carry sigma2_hat = 0");
    if (factor_) {
      if (factor_->rows() != p()) throw DimensionError("factor must have p rows");
      Matrix<Scalar> implied = (*factor_) * factor_->transpose();
      if (kind_ == ModelKind::spiked) implied.diagonal().array() += sigma2_hat_;
      const Scalar scale = std::max(Scalar(1), sigma_tilde_.cwiseAbs().maxCoeff());
      if ((implied - sigma_tilde_).cwiseAbs().maxCoeff() > Scalar(1e-10) * scale)
        throw InvariantError("completed covariance disagrees with its factor");
    }
    if (low_rank_part_ && (low_rank_part_->rows() != p() || low_rank_part_->cols() != p()))
      throw DimensionError("low-rank part must be p x p");
  }

  Matrix<Scalar> sigma_tilde_;
  ModelKind kind_;
  Index rank_used_;
  Scalar sigma2_hat_;
  std::optional<Matrix<Scalar>> factor_;
  std::optional<Matrix<Scalar>> low_rank_part_;
  SolverReport report_;
};

// ---------------------------------------------------------------------------
// PrecisionGraph

template <typename Scalar = double>
class PrecisionGraph {
 public:
  PrecisionGraph(Matrix<Scalar> theta, Scalar lambda, Scalar edge_tolerance = Scalar(1e-8),
                 Scalar ridge = Scalar(0), SolverReport report = {})
      : theta_(std::move(theta)),
        lambda_(lambda),
        edge_tolerance_(edge_tolerance),
        ridge_(ridge),
        report_(std::move(report)) {
    require_square(theta_, "precision matrix");
    if (!is_exactly_symmetric(theta_)) throw InvariantError("precision matrix is not symmetric");
    if (!(lambda_ >= Scalar(0))) throw InvariantError("lambda must be nonnegative");
    if (!(edge_tolerance_ >= Scalar(0))) throw InvariantError("edge tolerance must be nonnegative");
    if (!theta_.allFinite() || !(min_eigenvalue(theta_) > Scalar(0)))
      throw InvariantError("precision matrix is not positive definite");
  }

  const Matrix<Scalar>& theta() const { return theta_; }
  Scalar lambda() const { return lambda_; }
  Scalar edge_tolerance() const { return edge_tolerance_; }
  /// Diagonal ridge added to the input covariance before solving.
  Scalar ridge() const { return ridge_; }
  const SolverReport& report() const { return report_; }
  Index p() const { return theta_.rows(); }

  EdgeSet edges() const { return support_edges(theta_, edge_tolerance_); }

 private:
  Matrix<Scalar> theta_;
  Scalar lambda_;
  Scalar edge_tolerance_;
  Scalar ridge_;
  SolverReport report_;
};

/// {(i,j): i<j, |theta(i,j)| > edge_tolerance}.
template <typename Scalar>
EdgeSet edge_set(const PrecisionGraph<Scalar>& graph) {
  return graph.edges();
}

// ---------------------------------------------------------------------------
// GroundTruth

template <typename Scalar = double>
struct SpikedPart {
  Matrix<Scalar> low_rank;  // L*
  Scalar sigma2 = 0;        // sigma*^2
  Index rank = 0;           // r*
};

template <typename Scalar = double>
class GroundTruth {
 public:
  GroundTruth(Matrix<Scalar> theta_star, std::optional<SpikedPart<Scalar>> spiked = std::nullopt)
      : theta_star_(symmetrize(theta_star)), spiked_(std::move(spiked)) {
    if (!is_exactly_symmetric(theta_star)) throw InvariantError("theta* must be symmetric");
    Eigen::LLT<Matrix<Scalar>> llt(theta_star_);
    if (llt.info() != Eigen::Success) throw InvariantError("theta* must be positive definite");
    sigma_star_ = symmetrize(Matrix<Scalar>(llt.solve(Matrix<Scalar>::Identity(p(), p()))));
    const Index n = p();
    const Scalar tol(1e-8);
    if ((theta_star_ * sigma_star_ - Matrix<Scalar>::Identity(n, n)).cwiseAbs().maxCoeff() > tol)
      throw InvariantError("theta* is too ill-conditioned to invert reliably");
    edges_ = support_edges(theta_star_, Scalar(0));
    if (spiked_) {
      Matrix<Scalar> implied = spiked_->low_rank;
      implied.diagonal().array() += spiked_->sigma2;
      if ((implied - sigma_star_).cwiseAbs().maxCoeff() > tol)
        throw InvariantError("sigma* differs from L* + sigma*^2 I");
      if (!(spiked_->sigma2 > Scalar(0))) throw InvariantError("sigma*^2 must be positive");
    }
  }

  const Matrix<Scalar>& theta_star() const { return theta_star_; }
  const Matrix<Scalar>& sigma_star() const { return sigma_star_; }
  const EdgeSet& edges() const { return edges_; }
  const std::optional<SpikedPart<Scalar>>& spiked() const { return spiked_; }
  Index p() const { return theta_star_.rows(); }

 private:
  Matrix<Scalar> theta_star_;
  Matrix<Scalar> sigma_star_;
  EdgeSet edges_;
  std::optional<SpikedPart<Scalar>> spiked_;
};

}  // namespace lrgq
