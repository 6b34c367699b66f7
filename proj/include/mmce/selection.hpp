#pragma once

#include <algorithm>
#include <array>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmce/types.hpp"

namespace mmce {

/// Ordered antenna selection Omega = {Omega_1, ..., Omega_M} out of an
/// N-element ULA. Indices are 1-based, strictly increasing, Omega_1 = 1.
/// The set describes which antennas the RF switch network connects.
class SelectionSet {
 public:
  SelectionSet(std::vector<int> indices, int full_aperture)
      : indices_(std::move(indices)), aperture_(full_aperture) {
    if (indices_.empty()) throw std::invalid_argument("selection: empty set");
    if (indices_.front() != 1)
      throw std::invalid_argument("selection: first index must be 1");
    for (std::size_t i = 1; i < indices_.size(); ++i)
      if (indices_[i] <= indices_[i - 1])
        throw std::invalid_argument("selection: indices must be strictly increasing");
    if (indices_.back() > aperture_)
      throw std::invalid_argument("selection: index " +
                                  std::to_string(indices_.back()) +
                                  " exceeds aperture " + std::to_string(aperture_));
  }

  const std::vector<int>& indices() const { return indices_; }
  int aperture() const { return aperture_; }                  // N
  int size() const { return int(indices_.size()); }           // M
  int operator[](int m) const { return indices_[std::size_t(m)]; }  // 0-based access

  bool operator==(const SelectionSet& other) const {
    return aperture_ == other.aperture_ && indices_ == other.indices_;
  }

 private:
  std::vector<int> indices_;
  int aperture_;
};

/// Difference coarray summary: the sorted nonnegative lags |Omega_i - Omega_j|,
/// the largest U with {0..U} fully covered, and the missing lags below max.
struct CoarrayReport {
  std::vector<int> lags;
  int contiguous_span = 0;
  std::vector<int> holes;

  bool hole_free() const { return holes.empty(); }
};

inline CoarrayReport difference_coarray(const SelectionSet& s) {
  std::set<int> lagset;
  const auto& idx = s.indices();
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j)
      lagset.insert(std::abs(idx[i] - idx[j]));
  CoarrayReport r;
  r.lags.assign(lagset.begin(), lagset.end());
  const int max_lag = r.lags.back();
  int span = 0;
  while (span < max_lag && lagset.count(span + 1)) ++span;
  r.contiguous_span = span;
  for (int d = 0; d < max_lag; ++d)
    if (!lagset.count(d)) r.holes.push_back(d);
  return r;
}

/// Two-level nested selection: dense prefix {1..N1} plus sparse tail
/// {2*N1, 3*N1, ..., (N2+1)*N1} with N1 + N2 = M. The split maximizes the
/// virtual aperture (N2+1)*N1 subject to fitting in N; ties go to larger N1,
/// which reproduces {1..8,16,24,32} for N = 32, M = 11.
inline SelectionSet nested_array(int aperture, int rf_chains) {
  const int n = aperture, m = rf_chains;
  if (m < 2 || m > n)
    throw std::invalid_argument("nested_array: need 2 <= M <= N");
  int best_n1 = -1, best_virtual = -1;
  for (int n1 = 1; n1 <= m - 1; ++n1) {
    const int n2 = m - n1;
    const int virt = (n2 + 1) * n1;
    if (virt > n) continue;
    if (virt > best_virtual || (virt == best_virtual && n1 > best_n1)) {
      best_virtual = virt;
      best_n1 = n1;
    }
  }
  if (best_n1 < 0)
    throw std::domain_error(
        "nested_array: no feasible split; best achievable aperture " +
        std::to_string(m) + " requires N >= " + std::to_string(m));
  std::vector<int> idx;
  for (int i = 1; i <= best_n1; ++i) idx.push_back(i);
  for (int j = 2; j <= m - best_n1 + 1; ++j) idx.push_back(j * best_n1);
  return SelectionSet(std::move(idx), n);
}

namespace detail {

// Minimum-redundancy selections (0-based positions) for M = 2..10, found by
// exhaustive search; each has a hole-free coarray over its full aperture.
// MRAs have no closed form, so anything outside the table is an error.
inline const std::vector<int>& mra_table(int m) {
  static const std::array<std::vector<int>, 9> table = {{
      {0, 1},
      {0, 1, 3},
      {0, 1, 4, 6},
      {0, 1, 2, 6, 9},
      {0, 1, 2, 6, 10, 13},
      {0, 1, 2, 3, 8, 13, 17},
      {0, 1, 2, 11, 15, 18, 21, 23},
      {0, 1, 2, 14, 18, 21, 24, 27, 29},
      {0, 1, 3, 6, 13, 20, 27, 31, 35, 36},
  }};
  if (m < 2 || m > 10)
    throw std::invalid_argument("mra: no table entry for M = " + std::to_string(m) +
                                " (supported range 2..10)");
  return table[std::size_t(m - 2)];
}

}  // namespace detail

inline SelectionSet mra(int rf_chains, int aperture) {
  const auto& zero_based = detail::mra_table(rf_chains);
  if (zero_based.back() + 1 > aperture)
    throw std::domain_error("mra: aperture " + std::to_string(zero_based.back() + 1) +
                            " exceeds N = " + std::to_string(aperture));
  std::vector<int> idx(zero_based.size());
  std::transform(zero_based.begin(), zero_based.end(), idx.begin(),
                 [](int p) { return p + 1; });
  return SelectionSet(std::move(idx), aperture);
}

/// Coprime selection with the extended second subarray:
/// {1 + n*M2 : 0 <= n < M1} union {1 + m*M1 : 0 <= m < 2*M2}.
inline SelectionSet coprime_array(int m1, int m2, int aperture) {
  if (m1 < 1 || m2 < 1) throw std::invalid_argument("coprime_array: M1, M2 >= 1");
  if (std::gcd(m1, m2) != 1)
    throw std::invalid_argument("coprime_array: M1 and M2 must be coprime");
  std::set<int> idx;
  for (int n = 0; n < m1; ++n) idx.insert(1 + n * m2);
  for (int m = 0; m < 2 * m2; ++m) idx.insert(1 + m * m1);
  if (*idx.rbegin() > aperture)
    throw std::domain_error("coprime_array: max index " +
                            std::to_string(*idx.rbegin()) + " exceeds N = " +
                            std::to_string(aperture));
  return SelectionSet(std::vector<int>(idx.begin(), idx.end()), aperture);
}

inline SelectionSet ula_prefix(int rf_chains, int aperture) {
  if (rf_chains < 1 || rf_chains > aperture)
    throw std::invalid_argument("ula_prefix: need 1 <= M <= N");
  std::vector<int> idx(static_cast<std::size_t>(rf_chains));
  std::iota(idx.begin(), idx.end(), 1);
  return SelectionSet(std::move(idx), aperture);
}

/// Materialized selecting matrix W: M x N with a single 1 per row at Omega_m.
template <typename Scalar = double>
Matrix<Scalar> selection_matrix(const SelectionSet& s) {
  Matrix<Scalar> w = Matrix<Scalar>::Zero(s.size(), s.aperture());
  for (int m = 0; m < s.size(); ++m) w(m, s[m] - 1) = Scalar(1);
  return w;
}

/// Applies W to the rows of an N x L matrix (picks selected antennas).
template <typename Derived>
auto select_rows(const SelectionSet& s, const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> out(s.size(), x.cols());
  for (int m = 0; m < s.size(); ++m) out.row(m) = x.row(s[m] - 1);
  return out;
}

/// Applies the two-dimensional selector Gamma = I_L kron W to an NL-vector
/// (snapshot-major layout: temporal index outer, spatial inner).
template <typename Derived>
auto expanded_select(const SelectionSet& s, Index snapshots,
                     const Eigen::MatrixBase<Derived>& y) {
  using Scalar = typename Derived::Scalar;
  const Index n = s.aperture(), m = s.size();
  if (y.size() != n * snapshots)
    throw std::invalid_argument("expanded_select: vector length mismatch");
  Vector<Scalar> out(m * snapshots);
  for (Index t = 0; t < snapshots; ++t)
    for (Index a = 0; a < m; ++a) out(t * m + a) = y(t * n + (s[int(a)] - 1));
  return out;
}

/// Adjoint of expanded_select: scatters an ML-vector back into an NL-vector.
template <typename Derived>
auto expanded_adjoint(const SelectionSet& s, Index snapshots,
                      const Eigen::MatrixBase<Derived>& y) {
  using Scalar = typename Derived::Scalar;
  const Index n = s.aperture(), m = s.size();
  if (y.size() != m * snapshots)
    throw std::invalid_argument("expanded_adjoint: vector length mismatch");
  Vector<Scalar> out = Vector<Scalar>::Zero(n * snapshots);
  for (Index t = 0; t < snapshots; ++t)
    for (Index a = 0; a < m; ++a) out(t * n + (s[int(a)] - 1)) = y(t * m + a);
  return out;
}

/// Dense Gamma = I_L kron W, for testing against the matrix-free paths.
template <typename Scalar = double>
Matrix<Scalar> expanded_selector_matrix(const SelectionSet& s, Index snapshots) {
  const Index n = s.aperture(), m = s.size();
  Matrix<Scalar> g = Matrix<Scalar>::Zero(m * snapshots, n * snapshots);
  for (Index t = 0; t < snapshots; ++t)
    for (Index a = 0; a < m; ++a) g(t * m + a, t * n + (s[int(a)] - 1)) = Scalar(1);
  return g;
}

}  // namespace mmce
