#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <stdexcept>
#include <vector>

#if defined(MMCE_HAVE_LAPACKE)
#include <lapacke.h>
#endif

#include "mmce/types.hpp"

namespace mmce {

template <typename Scalar>
CMatrix<Scalar> hermitian_part(const CMatrix<Scalar>& m) {
  return ((m + m.adjoint()) / Scalar(2)).eval();
}

/// Full Hermitian eigendecomposition, eigenvalues ascending. Uses LAPACK's
/// divide-and-conquer driver when available (several times faster than the
/// built-in QR iteration at the sizes the solvers iterate on), otherwise
/// Eigen's SelfAdjointEigenSolver.
template <typename Scalar>
void hermitian_eig(const CMatrix<Scalar>& h, Vector<Scalar>& values,
                   CMatrix<Scalar>* vectors = nullptr) {
#if defined(MMCE_HAVE_LAPACKE)
  if constexpr (std::is_same_v<Scalar, double>) {
    const lapack_int n = lapack_int(h.rows());
    CMatrix<double> work = h;
    values.resize(n);
    const lapack_int info = LAPACKE_zheevd(
        LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'L', n,
        reinterpret_cast<lapack_complex_double*>(work.data()), n, values.data());
    if (info == 0) {
      if (vectors) *vectors = std::move(work);
      return;
    }
    // fall through to the dense fallback on a LAPACK failure
  }
#endif
  Eigen::SelfAdjointEigenSolver<CMatrix<Scalar>> es(
      h, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("hermitian_eig: eigendecomposition failed");
  values = es.eigenvalues();
  if (vectors) *vectors = es.eigenvectors();
}

/// Projects a Hermitian matrix onto the PSD cone by clamping eigenvalues.
/// Optionally reports the smallest eigenvalue before clamping.
template <typename Scalar>
CMatrix<Scalar> psd_project(const CMatrix<Scalar>& h, Scalar* min_eig = nullptr) {
  Vector<Scalar> lam;
  CMatrix<Scalar> vec;
  hermitian_eig(h, lam, &vec);
  if (min_eig) *min_eig = lam(0);
  if (lam(0) >= Scalar(0)) return h;
  lam = lam.cwiseMax(Scalar(0));
  return vec * lam.asDiagonal() * vec.adjoint();
}

/// Nonnegative least squares, Lawson-Hanson active set. Suited to the small
/// systems here (a handful of atom powers).
template <typename Scalar>
Vector<Scalar> nnls(const Matrix<Scalar>& a, const Vector<Scalar>& b,
                    int max_iter = 300) {
  const Index n = a.cols();
  Vector<Scalar> x = Vector<Scalar>::Zero(n);
  std::vector<bool> passive(std::size_t(n), false);
  Vector<Scalar> w = a.transpose() * (b - a * x);
  const Scalar tol = Scalar(10) * Eigen::NumTraits<Scalar>::epsilon() *
                     a.cwiseAbs().maxCoeff() * Scalar(std::max<Index>(a.rows(), n));

  for (int iter = 0; iter < max_iter; ++iter) {
    Index best = -1;
    Scalar best_w = tol;
    for (Index j = 0; j < n; ++j)
      if (!passive[std::size_t(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    if (best < 0) break;
    passive[std::size_t(best)] = true;

    for (;;) {
      std::vector<Index> p;
      for (Index j = 0; j < n; ++j)
        if (passive[std::size_t(j)]) p.push_back(j);
      Matrix<Scalar> ap(a.rows(), Index(p.size()));
      for (std::size_t k = 0; k < p.size(); ++k) ap.col(Index(k)) = a.col(p[k]);
      Vector<Scalar> zp = ap.colPivHouseholderQr().solve(b);

      if ((zp.array() > Scalar(0)).all()) {
        x.setZero();
        for (std::size_t k = 0; k < p.size(); ++k) x(p[k]) = zp(Index(k));
        break;
      }
      // step toward zp until the first passive variable hits zero
      Scalar alpha = Scalar(1);
      for (std::size_t k = 0; k < p.size(); ++k)
        if (zp(Index(k)) <= Scalar(0)) {
          const Scalar xk = x(p[k]);
          const Scalar denom = xk - zp(Index(k));
          if (denom > Scalar(0)) alpha = std::min(alpha, xk / denom);
        }
      for (std::size_t k = 0; k < p.size(); ++k)
        x(p[k]) += alpha * (zp(Index(k)) - x(p[k]));
      for (Index j = 0; j < n; ++j)
        if (passive[std::size_t(j)] && x(j) <= tol) {
          passive[std::size_t(j)] = false;
          x(j) = Scalar(0);
        }
    }
    w = a.transpose() * (b - a * x);
  }
  return x;
}

}  // namespace mmce
