#pragma once

// Graphical lasso with an off-diagonal l1 penalty,
//
//   min_{Theta > 0} tr(S Theta) - log det Theta + lambda sum_{i != j} |Theta_ij|,
//
// solved by blockwise coordinate descent over columns (each column a lasso
// in the current covariance estimate W = Theta^{-1}). Columns are swept in
// index order. The solver exits once the KKT residual of the symmetrized
// precision estimate is at most `tol`.

#include "lrgq/core.hpp"

namespace lrgq {

struct GlassoOptions {
  double tol = 1e-6;
  Index max_sweeps = 1000;
  double edge_tolerance = 1e-8;
  /// Ridge floor as a fraction of the mean diagonal: the input is shifted so
  /// that its smallest eigenvalue is at least ridge_fraction * mean(diag).
  double ridge_fraction = 1e-4;
};

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

template <typename Scalar>
Scalar glasso_objective(const Matrix<Scalar>& sigma, const Matrix<Scalar>& theta, Scalar lambda) {
  Eigen::LLT<Matrix<Scalar>> llt(theta);
  if (llt.info() != Eigen::Success) return std::numeric_limits<Scalar>::infinity();
  const Scalar logdet = Scalar(2) * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  Scalar off = theta.cwiseAbs().sum() - theta.diagonal().cwiseAbs().sum();
  return (sigma.cwiseProduct(theta)).sum() - logdet + lambda * off;
}

/// Largest violation of the glasso stationarity conditions at `theta`:
/// W = theta^{-1} must satisfy W_ii = S_ii, and off the diagonal
/// W_ij = S_ij + lambda sign(theta_ij) on the support, |W_ij - S_ij| <= lambda off it.
template <typename Scalar>
Scalar glasso_kkt_residual(const Matrix<Scalar>& sigma, const Matrix<Scalar>& theta, Scalar lambda) {
  Eigen::LLT<Matrix<Scalar>> llt(theta);
  if (llt.info() != Eigen::Success) return std::numeric_limits<Scalar>::infinity();
  const Index p = theta.rows();
  const Matrix<Scalar> w = llt.solve(Matrix<Scalar>::Identity(p, p));
  Scalar worst = 0;
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < p; ++i) {
      const Scalar gap = sigma(i, j) - w(i, j);
      Scalar r;
      if (i == j)
        r = std::abs(gap);
      else if (theta(i, j) != Scalar(0))
        r = std::abs(gap + lambda * (theta(i, j) > 0 ? Scalar(1) : Scalar(-1)));
      else
        r = std::max(Scalar(0), std::abs(gap) - lambda);
      worst = std::max(worst, r);
    }
  return worst;
}

/// Diagonal ridge applied before solving: max(0, fraction * mean(diag) - lambda_min).
template <typename Scalar>
Scalar glasso_ridge(const Matrix<Scalar>& sigma, double fraction) {
  const Scalar floor = Scalar(fraction) * sigma.diagonal().mean();
  return std::max(Scalar(0), floor - min_eigenvalue(sigma));
}

/// Solver state carried between solves on the same input (e.g. along a lambda path).
template <typename Scalar>
struct GlassoState {
  Matrix<Scalar> w;
  Matrix<Scalar> beta;
  Scalar lambda = 0;
};

/// If `state` holds a state of matching size it is used as the starting point;
/// on return it holds the final state. A start from a larger lambda is shrunk
/// toward the input, S + (lambda / lambda_prev)(W - S), so that it stays feasible.
template <typename Scalar>
PrecisionGraph<Scalar> graphical_lasso(const Matrix<Scalar>& sigma_in, Scalar lambda, const GlassoOptions& opts = {},
                                       GlassoState<Scalar>* state = nullptr) {
  require_square(sigma_in, "graphical_lasso");
  if (!(lambda >= Scalar(0))) throw PreconditionError("graphical_lasso: lambda must be nonnegative");
  if (!sigma_in.allFinite()) throw InvariantError("graphical_lasso: input has non-finite entries");
  const Scalar scale = std::max(Scalar(1), sigma_in.cwiseAbs().maxCoeff());
  if (max_asymmetry(sigma_in) > Scalar(1e-12) * scale) throw InvariantError("graphical_lasso: input is not symmetric");

  const Index p = sigma_in.rows();
  Matrix<Scalar> s = symmetrize(sigma_in);
  const Scalar ridge = glasso_ridge(s, opts.ridge_fraction);
  s.diagonal().array() += ridge;

  SolverReport report;
  report.converged = false;
  Matrix<Scalar> w = s;
  Matrix<Scalar> beta = Matrix<Scalar>::Zero(p, p);  // column j: regression of j on the rest
  if (state && state->w.rows() == p && state->beta.rows() == p) {
    const Scalar shrink = state->lambda > lambda ? lambda / state->lambda : Scalar(1);
    w = s + shrink * (state->w - s);
    w.diagonal() = s.diagonal();
    beta = state->beta;
  }
  Matrix<Scalar> theta = s.diagonal().cwiseInverse().asDiagonal();
  const double inner_tol = std::max(1e-14, opts.tol * 1e-4);

  if (p == 1) {
    report.converged = true;
    report.residual = 0;
    return PrecisionGraph<Scalar>(theta, lambda, Scalar(opts.edge_tolerance), ridge, std::move(report));
  }

  Scalar kkt = std::numeric_limits<Scalar>::infinity();
  Index sweep = 0;
  Vector<Scalar> w12(p);
  std::vector<Index> active;
  for (; sweep < opts.max_sweeps;) {
    ++sweep;
    for (Index j = 0; j < p; ++j) {
      // Lasso: min_b 1/2 b' W11 b - s12' b + lambda |b|_1, with W11 = W minus row/col j.
      // w12 tracks W11 b restricted to k != j.
      w12.setZero();
      for (Index l = 0; l < p; ++l)
        if (l != j && beta(l, j) != Scalar(0)) w12 += w.col(l) * beta(l, j);
      const auto update = [&](Index k) {
        const Scalar old = beta(k, j);
        const Scalar partial = s(k, j) - (w12(k) - w(k, k) * old);
        const Scalar updated = Scalar(soft_threshold(static_cast<double>(partial), static_cast<double>(lambda))) / w(k, k);
        if (updated == old) return Scalar(0);
        const Scalar delta = updated - old;
        w12 += w.col(k) * delta;
        beta(k, j) = updated;
        return std::abs(delta) * w(k, k);
      };
      // Exact solve on the current support with its signs. If the signs disagree,
      // step toward it up to the first sign change (the objective decreases along
      // the segment); otherwise move there and accept if the lasso optimality
      // conditions hold off the support.
      const auto polish = [&]() {
        for (;;) {
          std::erase_if(active, [&](Index k) { return beta(k, j) == Scalar(0); });
          const Index m = static_cast<Index>(active.size());
          if (m == 0) return false;
          Matrix<Scalar> waa(m, m);
          Vector<Scalar> rhs(m), cur(m);
          for (Index a = 0; a < m; ++a) {
            for (Index b = 0; b < m; ++b) waa(a, b) = w(active[a], active[b]);
            cur(a) = beta(active[a], j);
            rhs(a) = s(active[a], j) - lambda * (cur(a) > 0 ? Scalar(1) : Scalar(-1));
          }
          Eigen::LLT<Matrix<Scalar>> llt(waa);
          if (llt.info() != Eigen::Success) return false;
          const Vector<Scalar> target = llt.solve(rhs);
          if (!target.allFinite()) return false;
          Scalar step = 1;
          Index blocked = -1;
          for (Index a = 0; a < m; ++a)
            if ((target(a) > 0) != (cur(a) > 0)) {
              const Scalar t = cur(a) / (cur(a) - target(a));
              if (t < step) step = t, blocked = a;
            }
          Vector<Scalar> next = cur + step * (target - cur);
          if (blocked >= 0) next(blocked) = 0;
          for (Index a = 0; a < m; ++a) {
            const Scalar delta = next(a) - cur(a);
            if (delta != Scalar(0)) w12 += w.col(active[a]) * delta;
            beta(active[a], j) = next(a);
          }
          if (blocked >= 0) continue;
          const Scalar slack = lambda * Scalar(1e-12) + Scalar(inner_tol);
          for (Index k = 0; k < p; ++k)
            if (k != j && beta(k, j) == Scalar(0) && std::abs(s(k, j) - w12(k)) > lambda + slack) return false;
          return true;
        }
      };
      // Full sweeps alternate with sweeps over the active set until a full sweep is stable.
      for (int outer = 0; outer < 1000; ++outer) {
        Scalar max_delta = 0;
        active.clear();
        for (Index k = 0; k < p; ++k) {
          if (k == j) continue;
          max_delta = std::max(max_delta, update(k));
          if (beta(k, j) != Scalar(0)) active.push_back(k);
        }
        if (max_delta <= Scalar(inner_tol) || polish()) break;
      }
      for (Index k = 0; k < p; ++k) {
        if (k == j) continue;
        w(k, j) = w12(k);
        w(j, k) = w12(k);
      }
    }

    // Precision from the regression coefficients, column by column.
    Matrix<Scalar> t = Matrix<Scalar>::Zero(p, p);
    for (Index j = 0; j < p; ++j) {
      Scalar quad = 0;
      for (Index k = 0; k < p; ++k)
        if (k != j) quad += w(k, j) * beta(k, j);
      const Scalar tjj = Scalar(1) / (w(j, j) - quad);
      t(j, j) = tjj;
      for (Index k = 0; k < p; ++k)
        if (k != j) t(k, j) = -beta(k, j) * tjj;
    }
    theta = symmetrize(t);
    kkt = glasso_kkt_residual(s, theta, lambda);
    if (kkt <= Scalar(opts.tol)) {
      report.converged = true;
      break;
    }
  }
  if (state) {
    state->w = w;
    state->beta = beta;
    state->lambda = lambda;
  }
  report.iterations = sweep;
  report.residual = static_cast<double>(kkt);
  report.objective = static_cast<double>(glasso_objective(s, theta, lambda));
  if (!report.converged)
    report.warnings.push_back("graphical_lasso: max sweeps reached; KKT residual " + std::to_string(report.residual));
  if (!(min_eigenvalue(theta) > Scalar(0))) {
    // Fall back to the current covariance estimate, which is PD by construction.
    theta = symmetrize(Matrix<Scalar>(w.inverse()));
    report.warnings.push_back("graphical_lasso: symmetrized precision not PD; using inverse of W");
  }
  return PrecisionGraph<Scalar>(std::move(theta), lambda, Scalar(opts.edge_tolerance), ridge, std::move(report));
}

/// Observed entries copied verbatim, zeros off the mask.
template <typename Scalar>
CompletedCovariance<Scalar> zero_impute(const ObservedCovariance<Scalar>& obs) {
  return CompletedCovariance<Scalar>(obs.zero_filled(), ModelKind::exact, obs.p(), Scalar(0));
}

}  // namespace lrgq
