#pragma once

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mmce/model.hpp"
#include "mmce/recovery.hpp"
#include "mmce/sdp.hpp"
#include "mmce/types.hpp"

namespace mmce {

enum class SolverPath { kPrimal, kDual, kAnm };

inline const char* to_string(SolverPath p) {
  switch (p) {
    case SolverPath::kPrimal: return "primal";
    case SolverPath::kDual: return "dual";
    case SolverPath::kAnm: return "anm";
  }
  return "?";
}

template <typename Scalar>
struct EstimateConfig {
  SolverPath path = SolverPath::kPrimal;
  SdpOptions<Scalar> sdp;
  Scalar model_order_tau = Scalar(1e-3);
  Scalar sigma_true = Scalar(-1);  // required by the ANM path only
  int max_paths = -1;              // capped at the identifiable regime if < 0
};

template <typename Scalar>
struct EstimationResult {
  CVector<Scalar> h_hat;
  CVector<Scalar> doppler_hat;  // real values stored via atoms too
  TbtDecomposition<Scalar> atoms;
  CVector<Scalar> g_hat;
  // diagnostics
  Scalar sigma_hat = Scalar(0);
  int k_hat = 0;
  Scalar objective = Scalar(0);
  Scalar gap = Scalar(0);
  double solve_time_s = 0;
  double wall_time_s = 0;
  SolverPath path = SolverPath::kPrimal;
  bool solver_converged = false;
  Scalar decomposition_residual = Scalar(0);
  Scalar ls_residual = Scalar(0);
  std::string failure;  // stage-labelled; empty when the pipeline completed

  bool ok() const { return failure.empty(); }
};

/// || h_hat - h ||^2 / || h ||^2.
template <typename Scalar>
Scalar nmse(const CVector<Scalar>& h_hat, const CVector<Scalar>& h_true) {
  if (h_hat.size() != h_true.size())
    throw std::invalid_argument("nmse: length mismatch");
  const Scalar denom = h_true.squaredNorm();
  if (!(denom > Scalar(0))) throw std::invalid_argument("nmse: zero-norm truth");
  return (h_hat - h_true).squaredNorm() / denom;
}

/// Matched-filter spectral efficiency log2(1 + snr |w^H h|^2), w = h_hat
/// normalized. Equals the ideal-CSI bound when h_hat is aligned with h.
template <typename Scalar>
Scalar spectral_efficiency(const CVector<Scalar>& h_hat,
                           const CVector<Scalar>& h_true, Scalar snr_linear) {
  const Scalar nh = h_hat.norm();
  if (!(nh > Scalar(0)))
    throw std::invalid_argument("spectral_efficiency: zero estimate");
  const Scalar gain = std::norm(h_hat.dot(h_true)) / (nh * nh);
  return std::log2(Scalar(1) + snr_linear * gain);
}

template <typename Scalar>
Scalar spectral_efficiency_ideal(const CVector<Scalar>& h_true, Scalar snr_linear) {
  return std::log2(Scalar(1) + snr_linear * h_true.squaredNorm());
}

/// The full estimation chain on one snapshot block: structured covariance by
/// SDP, atom retrieval, LS path gains, channel reconstruction over the full
/// aperture. Solver and decomposition failures surface as stage-labelled
/// messages; a best-effort estimate is still produced where possible.
template <typename Scalar>
EstimationResult<Scalar> estimate(const SnapshotBlock<Scalar>& block,
                                  const EstimateConfig<Scalar>& config) {
  const auto t_start = std::chrono::steady_clock::now();
  EstimationResult<Scalar> res;
  res.path = config.path;
  const SelectionSet& sel = block.selection;
  const Index n_full = sel.aperture();
  const Index l = block.snapshots();
  res.h_hat = CVector<Scalar>::Zero(n_full);

  auto finish = [&](EstimationResult<Scalar>& r) {
    r.wall_time_s = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t_start)
                        .count();
    return r;
  };

  const CVector<Scalar> y = vectorize(block);

  SdpSolution<Scalar> sol;
  try {
    switch (config.path) {
      case SolverPath::kPrimal:
        sol = solve_primal(y, sel, l, config.sdp);
        break;
      case SolverPath::kDual:
        sol = solve_dual(y, sel, l, config.sdp).second;
        break;
      case SolverPath::kAnm:
        if (config.sigma_true < Scalar(0))
          throw std::invalid_argument("ANM path requires the true noise power");
        sol = solve_anm_baseline(y, sel, l, config.sigma_true, config.sdp);
        break;
    }
  } catch (const std::exception& e) {
    res.failure = std::string("solver: ") + e.what();
    return finish(res);
  }
  res.objective = sol.objective;
  res.gap = sol.gap;
  res.solve_time_s = sol.wall_time_s;
  res.solver_converged = sol.converged;
  if (!sol.converged) res.failure = "solver: not converged within budget";

  res.sigma_hat = noise_floor(sol.t_hat);
  int k = model_order(sol.t_hat, res.sigma_hat, config.model_order_tau);
  const Index n_eff = sol.t_hat.spatial_size();
  const Index nl = n_eff * l;
  int cap = config.max_paths;
  if (cap < 0)
    cap = int(std::min<Index>(Index(sel.size()) * l - 1,
                              nl - std::max(n_eff, l) - 1));
  k = std::min(k, cap);
  res.k_hat = k;
  if (k < 1) {
    if (res.failure.empty()) res.failure = "";  // no paths is a valid outcome
    return finish(res);
  }

  try {
    res.atoms = md_vandermonde(sol.t_hat, k);
    res.decomposition_residual = res.atoms.residual;
  } catch (const std::exception& e) {
    if (res.failure.empty())
      res.failure = std::string("decomposition: ") + e.what();
    return finish(res);
  }
  if (res.atoms.atoms.empty()) {
    if (res.failure.empty()) res.failure = "decomposition: no positive-power atoms";
    return finish(res);
  }

  try {
    const GainFit<Scalar> fit = least_squares_gains(y, sel, l, res.atoms);
    res.g_hat = fit.gains;
    res.ls_residual = fit.residual;
  } catch (const std::exception& e) {
    if (res.failure.empty()) res.failure = std::string("gains: ") + e.what();
    return finish(res);
  }

  res.doppler_hat.resize(Index(res.atoms.atoms.size()));
  for (Index i = 0; i < res.h_hat.size(); ++i) res.h_hat(i) = Complex<Scalar>(0);
  for (std::size_t k2 = 0; k2 < res.atoms.atoms.size(); ++k2) {
    const auto& atom = res.atoms.atoms[k2];
    res.h_hat += res.g_hat(Index(k2)) * steering_vector(atom.theta, n_full);
    res.doppler_hat(Index(k2)) = atom.doppler;
  }
  return finish(res);
}

}  // namespace mmce
