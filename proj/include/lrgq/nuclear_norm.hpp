#pragma once

// Nuclear-norm penalized completion by proximal gradient.
//
//   exact:  min_S   1/2 ||(S - S_obs)_O||_F^2 + nu ||S||_*
//   spiked: min_{L, s2 >= 0} 1/2 ||(L + s2 I - S_obs)_O||_F^2 + nu ||L||_*
//
// The masked quadratic has a 1-Lipschitz gradient, so a unit step is used
// and the objective is non-increasing. Iterates stay symmetric because the
// prox is applied through a symmetric eigendecomposition.

#include "lrgq/core.hpp"

namespace lrgq {

template <typename Scalar>
struct SvtResult {
  Matrix<Scalar> value;
  Scalar nuclear_norm = 0;  // ||value||_*
  Index rank = 0;           // eigenvalues that survived the shrinkage
};

/// Prox of threshold * ||.||_* for symmetric input: eigenvalues moved toward
/// zero by `threshold`, magnitudes floored at zero.
template <typename Derived>
SvtResult<typename Derived::Scalar> svt_full(const Eigen::MatrixBase<Derived>& m,
                                             typename Derived::Scalar threshold) {
  using Scalar = typename Derived::Scalar;
  require_square(m, "svt");
  if (!(threshold >= Scalar(0))) throw PreconditionError("svt: threshold must be nonnegative");
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(m);
  Vector<Scalar> w = es.eigenvalues();
  SvtResult<Scalar> out;
  for (Index i = 0; i < w.size(); ++i) {
    const Scalar mag = std::max(std::abs(w(i)) - threshold, Scalar(0));
    w(i) = w(i) < 0 ? -mag : mag;
    out.nuclear_norm += mag;
    out.rank += mag > 0 ? 1 : 0;
  }
  out.value = symmetrize(Matrix<Scalar>(es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose()));
  return out;
}

template <typename Derived>
Matrix<typename Derived::Scalar> svt(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar threshold) {
  return svt_full(m, threshold).value;
}

template <typename Derived>
typename Derived::Scalar nuclear_norm_symmetric(const Eigen::MatrixBase<Derived>& m) {
  return symmetric_eigenvalues(m).cwiseAbs().sum();
}

template <typename Scalar>
Index numerical_rank(const Matrix<Scalar>& m, Scalar relative_tol = Scalar(1e-10)) {
  const Vector<Scalar> w = symmetric_eigenvalues(m).cwiseAbs();
  const Scalar top = w.maxCoeff();
  if (!(top > Scalar(0))) return 0;
  return (w.array() > relative_tol * top).count();
}

struct NnOptions {
  double tol = 1e-8;
  Index max_iter = 10000;
  bool record_history = false;
};

template <typename Scalar>
Scalar nn_objective(const ObservedCovariance<Scalar>& obs, const Matrix<Scalar>& sigma, Scalar nu) {
  const Matrix<Scalar> resid = zero_filled(Matrix<Scalar>(sigma - obs.zero_filled()), obs.mask());
  return Scalar(0.5) * resid.squaredNorm() + nu * nuclear_norm_symmetric(sigma);
}

template <typename Scalar>
Scalar nn_spiked_objective(const ObservedCovariance<Scalar>& obs, const Matrix<Scalar>& low_rank, Scalar sigma2,
                           Scalar nu) {
  Matrix<Scalar> full = low_rank;
  full.diagonal().array() += sigma2;
  const Matrix<Scalar> resid = zero_filled(Matrix<Scalar>(full - obs.zero_filled()), obs.mask());
  return Scalar(0.5) * resid.squaredNorm() + nu * nuclear_norm_symmetric(low_rank);
}

namespace detail {

inline bool relative_decrease_below(double previous, double current, double tol) {
  if (previous == 0.0) return true;
  return (previous - current) / std::abs(previous) < tol;
}

}  // namespace detail

template <typename Scalar>
CompletedCovariance<Scalar> nn_complete_exact(const ObservedCovariance<Scalar>& obs, Scalar nu,
                                              const NnOptions& opts = {}) {
  if (!(nu >= Scalar(0))) throw PreconditionError("nn_complete: nu must be nonnegative");
  const MaskMatrix& mask = obs.mask();
  const Matrix<Scalar> target = obs.zero_filled();
  const Index p = obs.p();
  const Matrix<Scalar> zero = Matrix<Scalar>::Zero(p, p);

  Matrix<Scalar> x = target;
  double objective = static_cast<double>(nn_objective(obs, x, nu));
  SolverReport report;
  report.converged = false;
  if (opts.record_history) report.history.push_back(objective);
  Scalar step_change = 0;
  Index it = 0;
  while (it < opts.max_iter) {
    ++it;
    const Matrix<Scalar> grad = mask.select(x - target, zero);
    SvtResult<Scalar> next = svt_full(Matrix<Scalar>(x - grad), nu);
    const Matrix<Scalar> resid = mask.select(next.value - target, zero);
    const double next_objective = static_cast<double>(Scalar(0.5) * resid.squaredNorm() + nu * next.nuclear_norm);
    step_change = (next.value - x).cwiseAbs().maxCoeff();
    x = std::move(next.value);
    if (opts.record_history) report.history.push_back(next_objective);
    const bool done = detail::relative_decrease_below(objective, next_objective, opts.tol);
    objective = next_objective;
    if (done) {
      report.converged = true;
      break;
    }
  }
  report.iterations = it;
  report.objective = objective;
  report.residual = static_cast<double>(step_change);
  if (!report.converged)
    report.warnings.push_back("nn_complete_exact: max_iter reached; fixed-point residual " +
                              std::to_string(report.residual));
  const Index rank = numerical_rank(x);
  return CompletedCovariance<Scalar>(std::move(x), ModelKind::exact, rank, Scalar(0), std::nullopt,
                                     std::nullopt, std::move(report));
}

/// Exact minimizer of the spiked objective over s2 >= 0 with L fixed: only
/// the (always observed) diagonal depends on s2.
template <typename Scalar>
Scalar sigma2_update(const Matrix<Scalar>& target, const Matrix<Scalar>& low_rank) {
  return std::max(Scalar(0), (target.diagonal() - low_rank.diagonal()).mean());
}

template <typename Scalar>
CompletedCovariance<Scalar> nn_complete_spiked(const ObservedCovariance<Scalar>& obs, Scalar nu,
                                               const NnOptions& opts = {}) {
  if (!(nu >= Scalar(0))) throw PreconditionError("nn_complete: nu must be nonnegative");
  const MaskMatrix& mask = obs.mask();
  const Matrix<Scalar> target = obs.zero_filled();
  const Index p = obs.p();
  const Matrix<Scalar> zero = Matrix<Scalar>::Zero(p, p);

  Matrix<Scalar> low_rank = target;
  Scalar sigma2 = sigma2_update(target, low_rank);
  double objective = static_cast<double>(nn_spiked_objective(obs, low_rank, sigma2, nu));
  SolverReport report;
  report.converged = false;
  if (opts.record_history) report.history.push_back(objective);
  Scalar step_change = 0;
  Index it = 0;
  while (it < opts.max_iter) {
    ++it;
    Matrix<Scalar> fitted = low_rank;
    fitted.diagonal().array() += sigma2;
    const Matrix<Scalar> grad = mask.select(fitted - target, zero);
    SvtResult<Scalar> next = svt_full(Matrix<Scalar>(low_rank - grad), nu);
    const Scalar next_sigma2 = sigma2_update(target, next.value);

    fitted = next.value;
    fitted.diagonal().array() += next_sigma2;
    const Matrix<Scalar> resid = mask.select(fitted - target, zero);
    const double next_objective = static_cast<double>(Scalar(0.5) * resid.squaredNorm() + nu * next.nuclear_norm);
    step_change = std::max((next.value - low_rank).cwiseAbs().maxCoeff(), std::abs(next_sigma2 - sigma2));
    low_rank = std::move(next.value);
    sigma2 = next_sigma2;
    if (opts.record_history) report.history.push_back(next_objective);
    const bool done = detail::relative_decrease_below(objective, next_objective, opts.tol);
    objective = next_objective;
    if (done) {
      report.converged = true;
      break;
    }
  }
  report.iterations = it;
  report.objective = objective;
  report.residual = static_cast<double>(step_change);
  if (!report.converged)
    report.warnings.push_back("nn_complete_spiked: max_iter reached; fixed-point residual " +
                              std::to_string(report.residual));
  Matrix<Scalar> sigma_tilde = low_rank;
  sigma_tilde.diagonal().array() += sigma2;
  const Index rank = numerical_rank(low_rank);
  return CompletedCovariance<Scalar>(std::move(sigma_tilde), ModelKind::spiked, rank, sigma2, std::nullopt,
                                     std::move(low_rank), std::move(report));
}

template <typename Scalar>
CompletedCovariance<Scalar> nn_complete(const ObservedCovariance<Scalar>& obs, Scalar nu, ModelKind mode,
                                        const NnOptions& opts = {}) {
  return mode == ModelKind::exact ? nn_complete_exact(obs, nu, opts) : nn_complete_spiked(obs, nu, opts);
}

}  // namespace lrgq
