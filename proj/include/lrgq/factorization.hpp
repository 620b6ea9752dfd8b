#pragma once

// Low-rank factorization completion by gradient descent on the factor.
//
//   exact:  min_U       f(U)     = 1/2 ||(U U' - S_obs)_O||_F^2
//   spiked: min_{H, s2} f(H, s2) = 1/2 ||(H H' + s2 I - S_obs)_O||_F^2
//
// grad_U f = 2 R U with R = M o (U U' - S_obs). Steps use Armijo
// backtracking; the spiked variant alternates a factor step with the closed
// form s2 = max(0, mean_i(S_ii - (H H')_ii)).

#include "lrgq/bsvd.hpp"
#include "lrgq/core.hpp"
#include "lrgq/nuclear_norm.hpp"

namespace lrgq {

struct LrfOptions {
  /// Stop once the relative objective decrease stays below `tol` for
  /// `patience` consecutive iterations.
  double tol = 1e-9;
  Index patience = 5;
  Index max_iter = 20000;
  double initial_step = 1e-2;
  double armijo = 1e-4;
  int max_halvings = 50;
  /// Gradient norm at which the current factor is accepted as stationary.
  double gradient_tol = 1e-10;
  bool record_history = false;
};

template <typename Scalar>
Scalar lrf_objective(const Matrix<Scalar>& target, const MaskMatrix& mask, const Matrix<Scalar>& factor,
                     Scalar sigma2 = Scalar(0)) {
  Matrix<Scalar> fitted = factor * factor.transpose();
  fitted.diagonal().array() += sigma2;
  return Scalar(0.5) * zero_filled(Matrix<Scalar>(fitted - target), mask).squaredNorm();
}

/// Analytic gradient 2 (M o (U U' + s2 I - S)) U.
template <typename Scalar>
Matrix<Scalar> lrf_gradient(const Matrix<Scalar>& target, const MaskMatrix& mask, const Matrix<Scalar>& factor,
                            Scalar sigma2 = Scalar(0)) {
  Matrix<Scalar> fitted = factor * factor.transpose();
  fitted.diagonal().array() += sigma2;
  const Matrix<Scalar> resid = zero_filled(Matrix<Scalar>(fitted - target), mask);
  return Scalar(2) * resid * factor;
}

/// Top-`rank` PSD factor of a completed covariance (with its noise level
/// removed in spiked mode). Reuses the stored factor when it has the right shape.
template <typename Scalar>
Matrix<Scalar> initial_factor(const CompletedCovariance<Scalar>& init, Index rank) {
  if (init.factor() && init.factor()->cols() == rank) return *init.factor();
  Matrix<Scalar> base = init.sigma_tilde();
  if (init.model_kind() == ModelKind::spiked) base.diagonal().array() -= init.sigma2_hat();
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(base);
  const Index p = base.rows();
  Matrix<Scalar> factor = Matrix<Scalar>::Zero(p, rank);
  for (Index c = 0; c < std::min(rank, p); ++c) {
    const Index src = p - 1 - c;
    factor.col(c) = es.eigenvectors().col(src) * std::sqrt(std::max(es.eigenvalues()(src), Scalar(0)));
  }
  return factor;
}

namespace detail {

template <typename Scalar>
struct LrfState {
  Matrix<Scalar> factor;
  Scalar sigma2 = 0;
  SolverReport report;
};

template <typename Scalar>
LrfState<Scalar> run_lrf(const ObservedCovariance<Scalar>& obs, Matrix<Scalar> factor, Scalar sigma2,
                         bool spiked, const LrfOptions& opts) {
  const Matrix<Scalar> target = obs.zero_filled();
  const MaskMatrix& mask = obs.mask();
  if (factor.rows() != obs.p()) throw DimensionError("lrf: initial factor must have p rows");

  LrfState<Scalar> st;
  st.report.converged = false;
  if (spiked) sigma2 = sigma2_update(target, Matrix<Scalar>(factor * factor.transpose()));
  Scalar f = lrf_objective(target, mask, factor, sigma2);
  if (opts.record_history) st.report.history.push_back(static_cast<double>(f));

  Index quiet = 0, it = 0;
  Matrix<Scalar> grad = lrf_gradient(target, mask, factor, sigma2);
  while (true) {
    if (grad.norm() <= Scalar(opts.gradient_tol) || f == Scalar(0)) {
      st.report.converged = true;
      break;
    }
    if (it >= opts.max_iter) break;
    ++it;
    const Scalar gsq = grad.squaredNorm();
    Scalar step(opts.initial_step);
    bool accepted = false;
    Matrix<Scalar> candidate;
    Scalar f_candidate = f;
    for (int h = 0; h <= opts.max_halvings; ++h, step /= Scalar(2)) {
      candidate = factor - step * grad;
      f_candidate = lrf_objective(target, mask, candidate, sigma2);
      if (f_candidate <= f - Scalar(opts.armijo) * step * gsq) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No descent along the gradient at machine precision: stationary.
      st.report.converged = true;
      st.report.warnings.push_back("lrf: line search exhausted; stopping at a numerically stationary point");
      break;
    }
    factor = std::move(candidate);
    if (spiked) {
      sigma2 = sigma2_update(target, Matrix<Scalar>(factor * factor.transpose()));
      f_candidate = lrf_objective(target, mask, factor, sigma2);
    }
    const double previous = static_cast<double>(f);
    f = f_candidate;
    if (opts.record_history) st.report.history.push_back(static_cast<double>(f));
    grad = lrf_gradient(target, mask, factor, sigma2);
    quiet = relative_decrease_below(previous, static_cast<double>(f), opts.tol) ? quiet + 1 : 0;
    if (quiet >= opts.patience) {
      st.report.converged = true;
      break;
    }
  }
  st.report.iterations = it;
  st.report.objective = static_cast<double>(f);
  st.report.residual = static_cast<double>(grad.norm());
  if (!st.report.converged)
    st.report.warnings.push_back("lrf: max_iter reached; gradient norm " + std::to_string(st.report.residual));
  st.factor = std::move(factor);
  st.sigma2 = sigma2;
  return st;
}

}  // namespace detail

template <typename Scalar>
CompletedCovariance<Scalar> lrf_complete_exact(const ObservedCovariance<Scalar>& obs, Matrix<Scalar> init_factor,
                                               const LrfOptions& opts = {}) {
  if (init_factor.cols() < 1) throw PreconditionError("lrf: rank must be positive");
  auto st = detail::run_lrf(obs, std::move(init_factor), Scalar(0), false, opts);
  Matrix<Scalar> sigma_tilde = symmetrize(Matrix<Scalar>(st.factor * st.factor.transpose()));
  const Index rank = st.factor.cols();
  return CompletedCovariance<Scalar>(std::move(sigma_tilde), ModelKind::exact, rank, Scalar(0), std::move(st.factor),
                                     std::nullopt, std::move(st.report));
}

template <typename Scalar>
CompletedCovariance<Scalar> lrf_complete_exact(const ObservedCovariance<Scalar>& obs, Index rank,
                                               const CompletedCovariance<Scalar>& init, const LrfOptions& opts = {}) {
  return lrf_complete_exact(obs, initial_factor(init, rank), opts);
}

template <typename Scalar>
CompletedCovariance<Scalar> lrf_complete_spiked(const ObservedCovariance<Scalar>& obs, Matrix<Scalar> init_factor,
                                                const LrfOptions& opts = {}) {
  if (init_factor.cols() < 1) throw PreconditionError("lrf: rank must be positive");
  auto st = detail::run_lrf(obs, std::move(init_factor), Scalar(0), true, opts);
  Matrix<Scalar> sigma_tilde = symmetrize(Matrix<Scalar>(st.factor * st.factor.transpose()));
  sigma_tilde.diagonal().array() += st.sigma2;
  const Index rank = st.factor.cols();
  return CompletedCovariance<Scalar>(std::move(sigma_tilde), ModelKind::spiked, rank, st.sigma2,
                                     std::move(st.factor), std::nullopt, std::move(st.report));
}

template <typename Scalar>
CompletedCovariance<Scalar> lrf_complete_spiked(const ObservedCovariance<Scalar>& obs, Index rank,
                                                const CompletedCovariance<Scalar>& init, const LrfOptions& opts = {}) {
  return lrf_complete_spiked(obs, initial_factor(init, rank), opts);
}

/// Default initialization: BSVD at the same rank and mode. Designs whose
/// blocks cannot be chained at this rank (or masks with held-out pairs) start
/// from the top eigenpairs of the zero-filled input instead.
template <typename Scalar>
CompletedCovariance<Scalar> lrf_default_init(const ObservedCovariance<Scalar>& obs, Index rank, ModelKind mode,
                                             std::vector<std::string>* notes = nullptr) {
  try {
    BsvdOptions<Scalar> bo;
    bo.mode = mode;
    return bsvd_complete(obs, rank, bo);
  } catch (const Error& e) {
    if (e.kind() != "insufficient-overlap" && e.kind() != "precondition") throw;
    if (notes) notes->push_back("lrf: bsvd initialization unavailable (" + std::string(e.what()) +
                                "); using the spectral start");
  }
  Matrix<Scalar> base = obs.zero_filled();
  Scalar sigma2(0);
  if (mode == ModelKind::spiked) {
    sigma2 = estimate_noise_variance(obs);
    base.diagonal().array() -= sigma2;
  }
  CompletedCovariance<Scalar> seed(symmetrize(base), ModelKind::exact, obs.p(), Scalar(0));
  Matrix<Scalar> factor = initial_factor(seed, rank);
  Matrix<Scalar> fitted = symmetrize(Matrix<Scalar>(factor * factor.transpose()));
  if (mode == ModelKind::spiked) fitted.diagonal().array() += sigma2;
  return CompletedCovariance<Scalar>(std::move(fitted), mode, rank, sigma2, std::move(factor));
}

template <typename Scalar>
CompletedCovariance<Scalar> lrf_complete(const ObservedCovariance<Scalar>& obs, Index rank, ModelKind mode,
                                         const LrfOptions& opts = {}) {
  if (rank < 1) throw PreconditionError("lrf: rank must be positive");
  std::vector<std::string> notes;
  const CompletedCovariance<Scalar> init = lrf_default_init(obs, rank, mode, &notes);
  CompletedCovariance<Scalar> out = mode == ModelKind::exact ? lrf_complete_exact(obs, rank, init, opts)
                                                             : lrf_complete_spiked(obs, rank, init, opts);
  if (!notes.empty()) out.add_warnings(notes);
  return out;
}

}  // namespace lrgq
