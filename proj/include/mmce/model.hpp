#pragma once

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "mmce/rng.hpp"
#include "mmce/selection.hpp"
#include "mmce/types.hpp"

namespace mmce {

/// One propagation path: angle of arrival (radians), normalized Doppler
/// (cycles per snapshot) and complex gain. Gains are held fixed over the
/// short training window.
template <typename Scalar>
struct Path {
  Scalar theta;
  Scalar doppler;
  Complex<Scalar> gain;
};

template <typename Scalar>
struct PathSet {
  std::vector<Path<Scalar>> paths;

  int count() const { return int(paths.size()); }

  void validate() const {
    if (paths.empty()) throw std::invalid_argument("path set: K >= 1 required");
    for (std::size_t i = 0; i < paths.size(); ++i)
      for (std::size_t j = i + 1; j < paths.size(); ++j)
        if (paths[i].theta == paths[j].theta && paths[i].doppler == paths[j].doppler)
          throw std::invalid_argument("path set: duplicate (theta, doppler) pair");
  }
};

/// Per-entry complex noise variance (real and imaginary parts carry half each).
template <typename Scalar>
struct NoiseSpec {
  Scalar variance = Scalar(0);
  std::uint64_t seed = 0;
};

/// a(theta)[n] = exp(j*pi*(n-1)*sin(theta)), half-wavelength ULA response.
template <typename Scalar>
CVector<Scalar> steering_vector(Scalar theta, Index n) {
  if (!(std::abs(theta) < pi<Scalar> / Scalar(2)))
    throw std::invalid_argument("steering_vector: |theta| < pi/2 required");
  const Scalar phase = pi<Scalar> * std::sin(theta);
  CVector<Scalar> a(n);
  for (Index i = 0; i < n; ++i)
    a(i) = std::polar(Scalar(1), phase * Scalar(i));
  return a;
}

/// v(f)[t] = exp(j*2*pi*f*t) for t = 1..L. The time index starts at one.
template <typename Scalar>
CVector<Scalar> doppler_vector(Scalar f, Index len) {
  if (len < 1) throw std::invalid_argument("doppler_vector: L >= 1 required");
  CVector<Scalar> v(len);
  for (Index t = 0; t < len; ++t)
    v(t) = std::polar(Scalar(1), Scalar(2) * pi<Scalar> * f * Scalar(t + 1));
  return v;
}

/// f = T * v / lambda, Doppler shift in cycles per snapshot interval.
template <typename Scalar>
Scalar normalized_doppler(Scalar radial_velocity, Scalar sample_interval,
                          Scalar wavelength) {
  if (!(wavelength > Scalar(0)) || !(sample_interval > Scalar(0)))
    throw std::invalid_argument("normalized_doppler: T, lambda > 0 required");
  return sample_interval * radial_velocity / wavelength;
}

/// Combined training samples X = W * (sum_k g_k a(theta_k) v(f_k)^T) + noise,
/// an M x L block as seen through the switch network.
template <typename Scalar>
struct SnapshotBlock {
  CMatrix<Scalar> data;
  SelectionSet selection;

  Index snapshots() const { return data.cols(); }
  Index chains() const { return data.rows(); }
};

template <typename Scalar>
SnapshotBlock<Scalar> synthesize_snapshots(const PathSet<Scalar>& paths,
                                           const SelectionSet& s, Index snapshots,
                                           const NoiseSpec<Scalar>& noise) {
  paths.validate();
  if (noise.variance < Scalar(0))
    throw std::invalid_argument("synthesize_snapshots: variance >= 0 required");
  const Index m = s.size();
  CMatrix<Scalar> x = CMatrix<Scalar>::Zero(m, snapshots);
  for (const auto& p : paths.paths) {
    const CVector<Scalar> a_sel =
        select_rows(s, steering_vector(p.theta, s.aperture()));
    const CVector<Scalar> v = doppler_vector(p.doppler, snapshots);
    x.noalias() += p.gain * a_sel * v.transpose();
  }
  if (noise.variance > Scalar(0)) {
    Rng rng(noise.seed);
    for (Index t = 0; t < snapshots; ++t)
      for (Index i = 0; i < m; ++i)
        x(i, t) += rng.complex_gaussian<Scalar>(noise.variance);
  }
  return SnapshotBlock<Scalar>{std::move(x), s};
}

/// y = vec(X), stacking columns: snapshot-major with spatial index innermost.
template <typename Scalar>
CVector<Scalar> vectorize(const SnapshotBlock<Scalar>& block) {
  return CVector<Scalar>(
      Eigen::Map<const CVector<Scalar>>(block.data.data(), block.data.size()));
}

/// Reference-time channel h = sum_k g_k a(theta_k) over the full N antennas.
template <typename Scalar>
CVector<Scalar> true_channel(const PathSet<Scalar>& paths, Index n) {
  paths.validate();
  CVector<Scalar> h = CVector<Scalar>::Zero(n);
  for (const auto& p : paths.paths) h += p.gain * steering_vector(p.theta, n);
  return h;
}

/// Interleaved re/im dump of the combined samples, one row per RF chain, for
/// cross-checking against other implementations.
template <typename Scalar>
void write_snapshots_csv(std::ostream& out, const SnapshotBlock<Scalar>& block) {
  out << "chain";
  for (Index t = 0; t < block.snapshots(); ++t)
    out << ",re_t" << t + 1 << ",im_t" << t + 1;
  out << '\n';
  for (Index i = 0; i < block.chains(); ++i) {
    out << block.selection[int(i)];
    for (Index t = 0; t < block.snapshots(); ++t)
      out << ',' << block.data(i, t).real() << ',' << block.data(i, t).imag();
    out << '\n';
  }
}

}  // namespace mmce
