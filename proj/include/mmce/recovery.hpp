#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mmce/linalg.hpp"
#include "mmce/model.hpp"
#include "mmce/rng.hpp"
#include "mmce/tbt.hpp"
#include "mmce/types.hpp"

namespace mmce {

/// Smallest eigenvalue of the materialized TBT matrix, clamped at zero.
template <typename Scalar>
Scalar noise_floor(const TbtGrid<Scalar>& t) {
  Vector<Scalar> lam;
  hermitian_eig(materialize(t), lam);
  return std::max(Scalar(0), lam(0));
}

/// Number of eigenvalues of (T - sigma_hat I) above tau * lambda_max. An
/// indefinite input (fitted covariances carry a symmetric noise shelf around
/// zero rather than a nonnegative floor) additionally rejects everything
/// below twice the most negative shifted eigenvalue; for PSD inputs that
/// guard vanishes and the plain threshold rule remains.
template <typename Scalar>
int model_order(const TbtGrid<Scalar>& t, Scalar sigma_hat,
                Scalar tau = Scalar(1e-3)) {
  Vector<Scalar> lam;
  hermitian_eig(materialize(t), lam);
  lam.array() -= sigma_hat;
  const Scalar lam_max = lam.maxCoeff();
  if (!(lam_max > Scalar(0))) return 0;
  const Scalar shelf = Scalar(2) * std::max(Scalar(0), -lam.minCoeff());
  const Scalar threshold = std::max(tau * lam_max, shelf);
  return int((lam.array() > threshold).count());
}

/// v(f) kron a(theta): entry t*N + n is v_t * a_n (snapshot-major layout).
template <typename Scalar>
CVector<Scalar> atom_vector(Scalar theta, Scalar doppler, Index n, Index l) {
  const CVector<Scalar> a = steering_vector(theta, n);
  const CVector<Scalar> v = doppler_vector(doppler, l);
  CVector<Scalar> b(n * l);
  for (Index t = 0; t < l; ++t) b.segment(t * n, n) = v(t) * a;
  return b;
}

namespace detail {

// Row subsets of the NL-dim range basis implementing the two shift pairs:
// within blocks (spatial) and across blocks (temporal).
template <typename Scalar>
void shift_rows(const CMatrix<Scalar>& u, Index n, Index l, bool spatial,
                CMatrix<Scalar>& up, CMatrix<Scalar>& dn) {
  const Index rows = spatial ? (n - 1) * l : n * (l - 1);
  up.resize(rows, u.cols());
  dn.resize(rows, u.cols());
  Index r = 0;
  for (Index t = 0; t < l; ++t)
    for (Index p = 0; p < n; ++p) {
      if (spatial) {
        if (p == n - 1) continue;
        up.row(r) = u.row(t * n + p);
        dn.row(r) = u.row(t * n + p + 1);
      } else {
        if (t == l - 1) continue;
        up.row(r) = u.row(t * n + p);
        dn.row(r) = u.row((t + 1) * n + p);
      }
      ++r;
    }
}

template <typename Scalar>
Scalar wrap_unit(Scalar f) {
  f -= std::floor(f);
  if (f >= Scalar(1)) f -= Scalar(1);
  return f;
}

}  // namespace detail

/// Retrieves the atoms of a PSD TBT matrix (Theorem-style multiple
/// Vandermonde decomposition). Shift invariance of the rank-K range space in
/// the spatial and temporal directions yields two rotation operators; their
/// joint diagonalization produces paired (theta, doppler) estimates, and the
/// powers follow from a nonnegative LS fit. The relative reconstruction
/// residual is reported, not silently accepted.
template <typename Scalar>
TbtDecomposition<Scalar> md_vandermonde(const TbtGrid<Scalar>& t, int k_hat) {
  using C = Complex<Scalar>;
  const Index n = t.spatial_size(), l = t.temporal_size();
  if (k_hat < 1) throw std::invalid_argument("md_vandermonde: K >= 1 required");
  if ((n - 1) * l < k_hat || (l > 1 && n * (l - 1) < k_hat))
    throw std::invalid_argument(
        "md_vandermonde: subspace dimension mismatch, K too large for N, L");

  Vector<Scalar> lam;
  CMatrix<Scalar> vec;
  hermitian_eig(materialize(t), lam, &vec);
  const Scalar sigma_hat = std::max(Scalar(0), lam(0));
  const CMatrix<Scalar> basis = vec.rightCols(k_hat);

  // Rotation operators from the two shift-invariance equations.
  CMatrix<Scalar> up, dn;
  detail::shift_rows(basis, n, l, true, up, dn);
  const CMatrix<Scalar> psi_sp =
      up.completeOrthogonalDecomposition().solve(dn).eval();
  CMatrix<Scalar> psi_tm = CMatrix<Scalar>::Zero(k_hat, k_hat);
  if (l > 1) {
    detail::shift_rows(basis, n, l, false, up, dn);
    psi_tm = up.completeOrthogonalDecomposition().solve(dn).eval();
  }

  // Joint diagonalization through a generic linear combination; the mixing
  // coefficient is re-drawn if the combined spectrum nearly collides.
  Rng zeta_rng(0x9d2c5680u ^ std::uint64_t(k_hat));
  CMatrix<Scalar> w;
  bool ok = false;
  for (int attempt = 0; attempt < 12 && !ok; ++attempt) {
    const Scalar ang = Scalar(zeta_rng.uniform(0.0, 2.0 * 3.14159265358979));
    const C zeta = std::polar(Scalar(1), ang);
    Eigen::ComplexEigenSolver<CMatrix<Scalar>> ces(psi_sp + zeta * psi_tm);
    if (ces.info() != Eigen::Success) continue;
    w = ces.eigenvectors();
    ok = true;
    const auto& ev = ces.eigenvalues();
    const Scalar scale = std::max(ev.cwiseAbs().maxCoeff(), Scalar(1e-12));
    for (Index i = 0; i < k_hat && ok; ++i)
      for (Index j = i + 1; j < k_hat; ++j)
        if (std::abs(ev(i) - ev(j)) < Scalar(1e-7) * scale) {
          ok = false;
          break;
        }
  }
  if (!ok && k_hat > 1)
    throw std::runtime_error("md_vandermonde: joint diagonalization failed");

  const CMatrix<Scalar> phi_sp = w.partialPivLu().solve(psi_sp * w);
  const CMatrix<Scalar> phi_tm = w.partialPivLu().solve(psi_tm * w);

  TbtDecomposition<Scalar> dec;
  dec.sigma = sigma_hat;
  dec.atoms.reserve(std::size_t(k_hat));
  for (Index k = 0; k < k_hat; ++k) {
    const Scalar sp = std::arg(phi_sp(k, k));
    const Scalar tp = std::arg(phi_tm(k, k));
    TbtAtom<Scalar> atom;
    atom.theta = std::asin(std::clamp(sp / pi<Scalar>, Scalar(-1), Scalar(1)));
    atom.doppler =
        l > 1 ? detail::wrap_unit(tp / (Scalar(2) * pi<Scalar>)) : Scalar(0);
    atom.power = Scalar(1);  // placeholder until the LS fit below
    dec.atoms.push_back(atom);
  }

  // Powers by nonnegative LS on the coefficient grid, weighted by class size
  // so the fit agrees with the Frobenius metric on materialized matrices.
  const Index cells = (2 * l - 1) * (2 * n - 1);
  const Matrix<Scalar> wgt = tbt_class_sizes<Scalar>(n, l).cwiseSqrt();
  Matrix<Scalar> a(2 * cells, k_hat);
  Vector<Scalar> rhs(2 * cells);
  Index row = 0;
  for (Index d = -(l - 1); d <= l - 1; ++d)
    for (Index m = -(n - 1); m <= n - 1; ++m) {
      const Scalar ww = wgt(d + l - 1, m + n - 1);
      C target = t(d, m);
      if (d == 0 && m == 0) target -= sigma_hat;
      for (Index k = 0; k < k_hat; ++k) {
        const auto& atom = dec.atoms[std::size_t(k)];
        const C beta = std::polar(
            Scalar(1), Scalar(2) * pi<Scalar> * atom.doppler * Scalar(d) +
                           pi<Scalar> * std::sin(atom.theta) * Scalar(m));
        a(row, k) = ww * beta.real();
        a(row + 1, k) = ww * beta.imag();
      }
      rhs(row) = ww * target.real();
      rhs(row + 1) = ww * target.imag();
      row += 2;
    }
  const Vector<Scalar> p = nnls(a, rhs);

  TbtDecomposition<Scalar> out;
  out.sigma = sigma_hat;
  for (Index k = 0; k < k_hat; ++k)
    if (p(k) > Scalar(0))
      out.atoms.push_back({dec.atoms[std::size_t(k)].theta,
                           dec.atoms[std::size_t(k)].doppler, p(k)});
  std::sort(out.atoms.begin(), out.atoms.end(),
            [](const TbtAtom<Scalar>& x, const TbtAtom<Scalar>& y) {
              return x.theta != y.theta ? x.theta < y.theta
                                        : x.doppler < y.doppler;
            });

  const Scalar t_norm =
      std::sqrt((tbt_class_sizes<Scalar>(n, l).array() *
                 t.coeffs().array().abs2())
                    .sum());
  if (out.atoms.empty()) {
    out.residual = Scalar(1);
    return out;
  }
  const TbtGrid<Scalar> recon = synthesize_tbt(out, n, l);
  const Scalar err =
      std::sqrt((tbt_class_sizes<Scalar>(n, l).array() *
                 (t.coeffs() - recon.coeffs()).array().abs2())
                    .sum());
  out.residual = t_norm > Scalar(0) ? err / t_norm : err;
  return out;
}

template <typename Scalar>
struct GainFit {
  CVector<Scalar> gains;
  Scalar residual = Scalar(0);
};

/// Least-squares path gains given the retrieved atoms: minimizes
/// || y - B g || with B's columns Gamma (v(f_k) kron a(theta_k)).
template <typename Scalar>
GainFit<Scalar> least_squares_gains(const CVector<Scalar>& y_omega,
                                    const SelectionSet& s, Index snapshots,
                                    const TbtDecomposition<Scalar>& dec) {
  const Index k = Index(dec.atoms.size());
  if (k < 1) throw std::invalid_argument("least_squares_gains: no atoms");
  if (k > Index(s.size()) * snapshots)
    throw std::invalid_argument("least_squares_gains: K exceeds ML");
  CMatrix<Scalar> b(Index(s.size()) * snapshots, k);
  for (Index j = 0; j < k; ++j) {
    const auto& atom = dec.atoms[std::size_t(j)];
    b.col(j) = expanded_select(
        s, snapshots, atom_vector(atom.theta, atom.doppler, s.aperture(), snapshots));
  }
  Eigen::ColPivHouseholderQR<CMatrix<Scalar>> qr(b);
  if (qr.rank() < k) {
    const auto diag = qr.matrixR().diagonal().cwiseAbs();
    throw std::runtime_error(
        "least_squares_gains: rank-deficient atom matrix (cond ~ " +
        std::to_string(double(diag.maxCoeff() /
                              std::max(diag.minCoeff(), Scalar(1e-300)))) +
        "), estimates likely coalesced");
  }
  GainFit<Scalar> fit;
  fit.gains = qr.solve(y_omega);
  fit.residual = (y_omega - b * fit.gains).norm();
  return fit;
}

}  // namespace mmce
