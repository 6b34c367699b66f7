#pragma once

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "mmce/selection.hpp"
#include "mmce/types.hpp"

namespace mmce {

/// Generating coefficients of a Hermitian Toeplitz-block-Toeplitz matrix of
/// size NL x NL. Block row i / block col j (temporal indices) hold the N x N
/// Toeplitz block whose (p, q) entry is c(i - j, p - q). The full coefficient
/// grid, conjugate half included, is stored as a (2L-1) x (2N-1) matrix for
/// O(1) access: row = temporal lag d + L - 1, col = spatial lag m + N - 1.
template <typename Scalar>
class TbtGrid {
 public:
  using C = Complex<Scalar>;

  TbtGrid() = default;
  TbtGrid(Index n, Index l)
      : n_(n), l_(l), coeffs_(CMatrix<Scalar>::Zero(2 * l - 1, 2 * n - 1)) {
    if (n < 1 || l < 1) throw std::invalid_argument("TbtGrid: N, L >= 1");
  }

  Index spatial_size() const { return n_; }     // N
  Index temporal_size() const { return l_; }    // L
  Index matrix_size() const { return n_ * l_; }

  C operator()(Index d, Index m) const { return coeffs_(d + l_ - 1, m + n_ - 1); }

  /// Writes c(d, m) and mirrors conj into c(-d, -m).
  void set(Index d, Index m, C value) {
    coeffs_(d + l_ - 1, m + n_ - 1) = value;
    coeffs_(-d + l_ - 1, -m + n_ - 1) = std::conj(value);
  }

  CMatrix<Scalar>& coeffs() { return coeffs_; }
  const CMatrix<Scalar>& coeffs() const { return coeffs_; }

  /// Averages the grid with its mirrored conjugate. Class sums of Hermitian
  /// matrices are symmetric already; this removes roundoff drift.
  void symmetrize() {
    CMatrix<Scalar> rev = coeffs_.reverse().conjugate();
    coeffs_ = ((coeffs_ + rev) / Scalar(2)).eval();
  }

  bool is_hermitian(Scalar tol) const {
    return (coeffs_ - coeffs_.reverse().conjugate()).cwiseAbs().maxCoeff() <= tol;
  }

 private:
  Index n_ = 0, l_ = 0;
  CMatrix<Scalar> coeffs_;
};

/// Dense Hermitian NL x NL matrix from its generating coefficients.
template <typename Scalar>
CMatrix<Scalar> materialize(const TbtGrid<Scalar>& t) {
  const Index n = t.spatial_size(), l = t.temporal_size();
  CMatrix<Scalar> out(n * l, n * l);
  for (Index i = 0; i < l; ++i)
    for (Index j = 0; j < l; ++j)
      for (Index p = 0; p < n; ++p)
        for (Index q = 0; q < n; ++q)
          out(i * n + p, j * n + q) = t(i - j, p - q);
  return out;
}

/// Adjoint of materialize under the Frobenius pairing: each coefficient
/// receives the sum of all entries of the input sharing its (d, m) lag class.
template <typename Scalar>
TbtGrid<Scalar> tbt_adjoint(const CMatrix<Scalar>& mat, Index n, Index l) {
  if (mat.rows() != n * l || mat.cols() != n * l)
    throw std::invalid_argument("tbt_adjoint: matrix must be NL x NL");
  TbtGrid<Scalar> t(n, l);
  auto& c = t.coeffs();
  for (Index i = 0; i < l; ++i)
    for (Index j = 0; j < l; ++j)
      for (Index p = 0; p < n; ++p)
        for (Index q = 0; q < n; ++q)
          c((i - j) + l - 1, (p - q) + n - 1) += mat(i * n + p, j * n + q);
  return t;
}

/// Number of matrix entries in each lag class: (L - |d|) * (N - |m|).
template <typename Scalar>
Matrix<Scalar> tbt_class_sizes(Index n, Index l) {
  Matrix<Scalar> w(2 * l - 1, 2 * n - 1);
  for (Index d = -(l - 1); d <= l - 1; ++d)
    for (Index m = -(n - 1); m <= n - 1; ++m)
      w(d + l - 1, m + n - 1) = Scalar((l - std::abs(d)) * (n - std::abs(m)));
  return w;
}

/// Least-squares nearest TBT matrix: class averages of a Hermitian input.
template <typename Scalar>
TbtGrid<Scalar> tbt_project(const CMatrix<Scalar>& mat, Index n, Index l) {
  TbtGrid<Scalar> t = tbt_adjoint(mat, n, l);
  t.coeffs() = (t.coeffs().array() /
                tbt_class_sizes<Scalar>(n, l).array().template cast<Complex<Scalar>>())
                   .matrix();
  t.symmetrize();
  return t;
}

/// Gamma * T * Gamma^H assembled directly from the coefficients: block (i, j)
/// entry (alpha, beta) is c(i - j, Omega_alpha - Omega_beta).
template <typename Scalar>
CMatrix<Scalar> selected_submatrix(const TbtGrid<Scalar>& t, const SelectionSet& s,
                                   Index snapshots) {
  if (s.aperture() != t.spatial_size() || snapshots != t.temporal_size())
    throw std::invalid_argument("selected_submatrix: selection/grid mismatch");
  const Index m = s.size(), l = snapshots;
  CMatrix<Scalar> out(m * l, m * l);
  for (Index i = 0; i < l; ++i)
    for (Index j = 0; j < l; ++j)
      for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < m; ++b)
          out(i * m + a, j * m + b) = t(i - j, s[int(a)] - s[int(b)]);
  return out;
}

/// Adjoint of selected_submatrix: class sums of an ML x ML matrix.
template <typename Scalar>
TbtGrid<Scalar> selected_adjoint(const CMatrix<Scalar>& mat, const SelectionSet& s,
                                 Index snapshots) {
  const Index m = s.size(), l = snapshots, n = s.aperture();
  if (mat.rows() != m * l || mat.cols() != m * l)
    throw std::invalid_argument("selected_adjoint: matrix must be ML x ML");
  TbtGrid<Scalar> t(n, l);
  auto& c = t.coeffs();
  for (Index i = 0; i < l; ++i)
    for (Index j = 0; j < l; ++j)
      for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < m; ++b)
          c((i - j) + l - 1, (s[int(a)] - s[int(b)]) + n - 1) +=
              mat(i * m + a, j * m + b);
  return t;
}

/// Coarray weight function: nu(m) = number of selected pairs at spatial lag m,
/// indexed m + N - 1 over m in [-(N-1), N-1].
inline Eigen::VectorXi coarray_weights(const SelectionSet& s) {
  const int n = s.aperture();
  Eigen::VectorXi nu = Eigen::VectorXi::Zero(2 * n - 1);
  for (int a = 0; a < s.size(); ++a)
    for (int b = 0; b < s.size(); ++b) nu(s[a] - s[b] + n - 1) += 1;
  return nu;
}

/// Per-class sizes of the selected submatrix: (L - |d|) * nu(m).
template <typename Scalar>
Matrix<Scalar> selected_class_sizes(const SelectionSet& s, Index snapshots) {
  const Index n = s.aperture(), l = snapshots;
  const Eigen::VectorXi nu = coarray_weights(s);
  Matrix<Scalar> w(2 * l - 1, 2 * n - 1);
  for (Index d = -(l - 1); d <= l - 1; ++d)
    for (Index m = -(n - 1); m <= n - 1; ++m)
      w(d + l - 1, m + n - 1) = Scalar((l - std::abs(d)) * nu(m + n - 1));
  return w;
}

template <typename Scalar>
struct LiftResult {
  TbtGrid<Scalar> grid;
  Scalar max_class_spread = Scalar(0);  // inconsistency diagnostic
};

/// Recovers the full TBT coefficients from a selected submatrix by averaging
/// each lag class. Requires every spatial lag 0..N-1 to appear in the coarray.
template <typename Scalar>
LiftResult<Scalar> lift_from_selected(const CMatrix<Scalar>& t_omega,
                                      const SelectionSet& s, Index snapshots) {
  const Index n = s.aperture(), l = snapshots, m = s.size();
  if (t_omega.rows() != m * l || t_omega.cols() != m * l)
    throw std::invalid_argument("lift_from_selected: matrix must be ML x ML");
  const Eigen::VectorXi nu = coarray_weights(s);
  for (int lag = 0; lag < n; ++lag)
    if (nu(lag + n - 1) == 0)
      throw std::domain_error("lift_from_selected: coarray hole at lag " +
                              std::to_string(lag) + "; lags unidentifiable");

  LiftResult<Scalar> r{TbtGrid<Scalar>(n, l), Scalar(0)};
  TbtGrid<Scalar> sums = selected_adjoint(t_omega, s, snapshots);
  const Matrix<Scalar> sizes = selected_class_sizes<Scalar>(s, snapshots);
  r.grid.coeffs() =
      (sums.coeffs().array() /
       sizes.array().max(Scalar(1)).template cast<Complex<Scalar>>())
          .matrix();
  r.grid.symmetrize();

  for (Index i = 0; i < l; ++i)
    for (Index j = 0; j < l; ++j)
      for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < m; ++b) {
          const Scalar spread =
              std::abs(t_omega(i * m + a, j * m + b) -
                       r.grid(i - j, s[int(a)] - s[int(b)]));
          if (spread > r.max_class_spread) r.max_class_spread = spread;
        }
  return r;
}

/// Atomic decomposition of a PSD TBT matrix: rank-one Kronecker atoms
/// p_k * (v(f_k) v^H) kron (a(theta_k) a^H) plus sigma * I.
template <typename Scalar>
struct TbtAtom {
  Scalar theta;
  Scalar doppler;
  Scalar power;
};

template <typename Scalar>
struct TbtDecomposition {
  std::vector<TbtAtom<Scalar>> atoms;
  Scalar sigma = Scalar(0);
  Scalar residual = Scalar(0);  // relative Frobenius reconstruction error
};

/// Debug dump of the coefficient grid: one row per temporal lag, columns are
/// interleaved re/im over spatial lags.
template <typename Scalar>
void write_tbt_csv(std::ostream& out, const TbtGrid<Scalar>& t) {
  const Index n = t.spatial_size(), l = t.temporal_size();
  out << "temporal_lag";
  for (Index m = -(n - 1); m <= n - 1; ++m)
    out << ",re_m" << m << ",im_m" << m;
  out << '\n';
  for (Index d = -(l - 1); d <= l - 1; ++d) {
    out << d;
    for (Index m = -(n - 1); m <= n - 1; ++m)
      out << ',' << t(d, m).real() << ',' << t(d, m).imag();
    out << '\n';
  }
}

/// Coefficient grid of sum_k p_k (v v^H) kron (a a^H) + sigma I:
/// c(d, m) = sum_k p_k exp(j 2 pi f_k d) exp(j pi sin(theta_k) m), plus sigma
/// on the (0, 0) class (the matrix diagonal).
template <typename Scalar>
TbtGrid<Scalar> synthesize_tbt(const TbtDecomposition<Scalar>& dec, Index n, Index l) {
  TbtGrid<Scalar> t(n, l);
  auto& c = t.coeffs();
  for (const auto& atom : dec.atoms) {
    if (!(atom.power > Scalar(0)))
      throw std::invalid_argument("synthesize_tbt: powers must be positive");
    const Scalar sp = pi<Scalar> * std::sin(atom.theta);
    const Scalar tp = Scalar(2) * pi<Scalar> * atom.doppler;
    for (Index d = -(l - 1); d <= l - 1; ++d)
      for (Index m = -(n - 1); m <= n - 1; ++m)
        c(d + l - 1, m + n - 1) +=
            atom.power * std::polar(Scalar(1), tp * Scalar(d) + sp * Scalar(m));
  }
  c(l - 1, n - 1) += dec.sigma;
  t.symmetrize();
  return t;
}

}  // namespace mmce
