#pragma once

// Named completion methods: {bsvd, nn, lrf} x {exact, spiked}, plus zero imputation.

#include "lrgq/bsvd.hpp"
#include "lrgq/core.hpp"
#include "lrgq/factorization.hpp"
#include "lrgq/glasso.hpp"
#include "lrgq/nuclear_norm.hpp"

namespace lrgq {

enum class Solver { bsvd, nn, lrf, zero };

struct MethodSpec {
  Solver solver = Solver::zero;
  ModelKind mode = ModelKind::exact;

  std::string name() const {
    switch (solver) {
      case Solver::zero: return "zero";
      case Solver::bsvd: return std::string("bsvd-") + to_string(mode);
      case Solver::nn: return std::string("nn-") + to_string(mode);
      case Solver::lrf: return std::string("lrf-") + to_string(mode);
    }
    return "unknown";
  }

  /// Accepts "zero", "<solver>-<mode>", and "<solver>" (exact mode).
  static MethodSpec parse(const std::string& text) {
    MethodSpec m;
    if (text == "zero") return m;
    const auto dash = text.find('-');
    const std::string head = text.substr(0, dash);
    const std::string tail = dash == std::string::npos ? "exact" : text.substr(dash + 1);
    if (head == "bsvd") m.solver = Solver::bsvd;
    else if (head == "nn") m.solver = Solver::nn;
    else if (head == "lrf") m.solver = Solver::lrf;
    else throw PreconditionError("unknown method '" + text + "'");
    if (tail == "exact") m.mode = ModelKind::exact;
    else if (tail == "spiked") m.mode = ModelKind::spiked;
    else throw PreconditionError("unknown model kind in method '" + text + "'");
    return m;
  }

  friend bool operator==(const MethodSpec&, const MethodSpec&) = default;
};

inline std::vector<MethodSpec> all_methods() {
  std::vector<MethodSpec> out;
  for (Solver s : {Solver::bsvd, Solver::nn, Solver::lrf})
    for (ModelKind k : {ModelKind::exact, ModelKind::spiked}) out.push_back({s, k});
  out.push_back({Solver::zero, ModelKind::exact});
  return out;
}

struct CompletionParams {
  Index rank = 5;
  /// Nuclear penalty; unset means default_nu(obs, rank).
  std::optional<double> nu;
  /// Noise level for bsvd-spiked; unset means the median-diagonal estimate.
  std::optional<double> sigma2;
  BlockOrder order = BlockOrder::manifest;
  /// Copy observed entries of the input over the completion (every solver).
  bool preserve_observed = false;
  NnOptions nn;
  LrfOptions lrf;
};

/// Default nuclear penalty: the (rank+1)-th largest eigenvalue of the zero-filled input.
template <typename Scalar>
Scalar default_nu(const ObservedCovariance<Scalar>& obs, Index rank) {
  const Vector<Scalar> w = symmetric_eigenvalues(obs.zero_filled()).reverse();
  if (rank >= w.size()) return Scalar(0);
  return std::max(Scalar(0), w(std::max<Index>(rank, 0)));
}

template <typename Scalar>
CompletedCovariance<Scalar> preserve_observed_entries(const ObservedCovariance<Scalar>& obs,
                                                      const CompletedCovariance<Scalar>& done) {
  Matrix<Scalar> merged = obs.mask().select(obs.values(), done.sigma_tilde());
  return CompletedCovariance<Scalar>(std::move(merged), done.model_kind(), done.rank_used(), done.sigma2_hat(),
                                     std::nullopt, done.low_rank_part(), done.report());
}

template <typename Scalar>
CompletedCovariance<Scalar> complete_covariance(const ObservedCovariance<Scalar>& obs, const MethodSpec& method,
                                                const CompletionParams& params) {
  switch (method.solver) {
    case Solver::zero:
      return zero_impute(obs);
    case Solver::bsvd: {
      BsvdOptions<Scalar> bo;
      bo.mode = method.mode;
      if (params.sigma2) bo.sigma2 = Scalar(*params.sigma2);
      bo.order = params.order;
      bo.preserve_observed = params.preserve_observed;
      return bsvd_complete(obs, params.rank, bo);
    }
    case Solver::nn: {
      const Scalar nu = params.nu ? Scalar(*params.nu) : default_nu(obs, params.rank);
      auto out = nn_complete(obs, nu, method.mode, params.nn);
      return params.preserve_observed ? preserve_observed_entries(obs, out) : out;
    }
    case Solver::lrf: {
      auto out = lrf_complete(obs, params.rank, method.mode, params.lrf);
      return params.preserve_observed ? preserve_observed_entries(obs, out) : out;
    }
  }
  throw PreconditionError("unknown solver");
}

}  // namespace lrgq
