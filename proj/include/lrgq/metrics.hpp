#pragma once

// Estimation and graph-recovery metrics, hub analysis, and trace preprocessing.

#include "lrgq/core.hpp"

namespace lrgq {

template <typename A, typename B>
void require_same_shape(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(what) + ": shapes differ (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
}

template <typename A, typename B>
typename A::Scalar frobenius_error(const Eigen::MatrixBase<A>& estimate, const Eigen::MatrixBase<B>& truth) {
  require_same_shape(estimate, truth, "frobenius_error");
  return (estimate - truth).norm();
}

/// Largest absolute entry difference.
template <typename A, typename B>
typename A::Scalar infinity_error(const Eigen::MatrixBase<A>& estimate, const Eigen::MatrixBase<B>& truth) {
  require_same_shape(estimate, truth, "infinity_error");
  if (estimate.size() == 0) return 0;
  return (estimate - truth).cwiseAbs().maxCoeff();
}

struct F1Result {
  double f1 = 0;
  double precision = 0;
  double recall = 0;
  Index true_positives = 0;
  /// Both edge sets empty; f1 is 1 by convention.
  bool both_empty = false;
};

inline F1Result f1_detail(const EdgeSet& estimated, const EdgeSet& truth) {
  const EdgeSet est = normalize_edges(estimated), tru = normalize_edges(truth);
  for (const auto* set : {&est, &tru})
    for (const Edge& e : *set)
      if (e.i == e.j) throw PreconditionError("f1_score: self-loops are not edges");
  F1Result out;
  if (est.empty() && tru.empty()) {
    out.f1 = out.precision = out.recall = 1.0;
    out.both_empty = true;
    return out;
  }
  EdgeSet common;
  std::set_intersection(est.begin(), est.end(), tru.begin(), tru.end(), std::back_inserter(common));
  out.true_positives = static_cast<Index>(common.size());
  if (out.true_positives == 0) return out;
  out.precision = double(out.true_positives) / double(est.size());
  out.recall = double(out.true_positives) / double(tru.size());
  out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

inline double f1_score(const EdgeSet& estimated, const EdgeSet& truth) { return f1_detail(estimated, truth).f1; }

/// Node degrees from an edge list over p nodes.
inline std::vector<Index> degrees(const EdgeSet& edges, Index p) {
  std::vector<Index> deg(static_cast<std::size_t>(p), 0);
  for (const Edge& e : normalize_edges(edges)) {
    if (e.i < 0 || e.j >= p) throw DimensionError("degrees: edge endpoint out of range");
    ++deg[static_cast<std::size_t>(e.i)];
    ++deg[static_cast<std::size_t>(e.j)];
  }
  return deg;
}

/// The k nodes of largest degree; equal degrees ordered by node index.
inline std::vector<Index> top_k_hubs(const EdgeSet& edges, Index p, Index k) {
  if (k < 0 || k > p) throw PreconditionError("hub analysis: k must be in 0..p");
  const auto deg = degrees(edges, p);
  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return deg[static_cast<std::size_t>(a)] > deg[static_cast<std::size_t>(b)];
  });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

inline double hub_overlap(const EdgeSet& a, const EdgeSet& b, Index p, Index k) {
  if (k < 1) throw PreconditionError("hub_overlap: k must be positive");
  const auto ha = top_k_hubs(a, p, k), hb = top_k_hubs(b, p, k);
  std::vector<Index> common;
  std::set_intersection(ha.begin(), ha.end(), hb.begin(), hb.end(), std::back_inserter(common));
  return double(common.size()) / double(k);
}

template <typename Scalar>
double hub_overlap(const PrecisionGraph<Scalar>& a, const PrecisionGraph<Scalar>& b, Index k) {
  if (a.p() != b.p()) throw DimensionError("hub_overlap: graphs have different node counts");
  return hub_overlap(a.edges(), b.edges(), a.p(), k);
}

template <typename Scalar = double>
struct PreprocessedTraces {
  Matrix<Scalar> data;
  std::vector<Index> zero_variance;
};

/// First differences, then per-column centering and scaling to unit sample sd
/// (n-1 denominator). Zero-variance columns are centered only and reported.
template <typename Derived>
PreprocessedTraces<typename Derived::Scalar> preprocess_traces(const Eigen::MatrixBase<Derived>& raw) {
  using Scalar = typename Derived::Scalar;
  if (raw.rows() < 3) throw PreconditionError("preprocess_traces: at least 3 time points are required");
  const Index n = raw.rows() - 1, p = raw.cols();
  PreprocessedTraces<Scalar> out;
  out.data = raw.bottomRows(n) - raw.topRows(n);
  for (Index j = 0; j < p; ++j) {
    auto col = out.data.col(j);
    col.array() -= col.mean();
    const Scalar sd = std::sqrt(col.squaredNorm() / Scalar(n - 1));
    const Scalar scale = std::max(Scalar(1), col.cwiseAbs().maxCoeff());
    if (!(sd > Scalar(1e-12) * scale)) {
      out.zero_variance.push_back(j);
      continue;
    }
    col /= sd;
  }
  return out;
}

/// Scale a covariance to a correlation matrix. Zero-variance nodes keep zero rows.
template <typename Scalar>
Matrix<Scalar> to_correlation(const Matrix<Scalar>& cov) {
  require_square(cov, "to_correlation");
  Vector<Scalar> inv_sd = cov.diagonal().cwiseMax(Scalar(0)).cwiseSqrt();
  for (Index i = 0; i < inv_sd.size(); ++i) inv_sd(i) = inv_sd(i) > Scalar(0) ? Scalar(1) / inv_sd(i) : Scalar(0);
  Matrix<Scalar> out = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
  return symmetrize(out);
}

}  // namespace lrgq
