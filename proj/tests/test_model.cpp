#include <doctest.h>

#include <cmath>
#include <complex>

#include "mmce/model.hpp"
#include "mmce/rng.hpp"
#include "mmce/selection.hpp"

using namespace mmce;
using C = std::complex<double>;

TEST_CASE("steering vector values") {
  const CVector<double> a0 = steering_vector(0.0, 4);
  for (Index i = 0; i < 4; ++i) CHECK(std::abs(a0(i) - C(1, 0)) < 1e-15);

  // sin(pi/6) = 1/2: phases 0, pi/2, pi
  const CVector<double> a = steering_vector(pi<double> / 6, 3);
  CHECK(std::abs(a(0) - C(1, 0)) < 1e-15);
  CHECK(std::abs(a(1) - C(0, 1)) < 1e-15);
  CHECK(std::abs(a(2) - C(-1, 0)) < 1e-15);

  CHECK_THROWS(steering_vector(pi<double> / 2, 4));
  CHECK_THROWS(steering_vector(-pi<double> / 2, 4));
}

TEST_CASE("doppler vector values start at t = 1") {
  const CVector<double> v0 = doppler_vector(0.0, 3);
  for (Index i = 0; i < 3; ++i) CHECK(std::abs(v0(i) - C(1, 0)) < 1e-15);

  const CVector<double> vh = doppler_vector(0.5, 2);
  CHECK(std::abs(vh(0) - C(-1, 0)) < 1e-15);
  CHECK(std::abs(vh(1) - C(1, 0)) < 1e-15);

  const CVector<double> vq = doppler_vector(0.25, 4);
  CHECK(std::abs(vq(0) - C(0, 1)) < 1e-14);
  CHECK(std::abs(vq(1) - C(-1, 0)) < 1e-14);
  CHECK(std::abs(vq(2) - C(0, -1)) < 1e-14);
  CHECK(std::abs(vq(3) - C(1, 0)) < 1e-14);
}

TEST_CASE("normalized doppler arithmetic") {
  CHECK(normalized_doppler(0.0, 1e-4, 0.005) == 0.0);
  CHECK(normalized_doppler(30.0, 1e-4, 0.005) == doctest::Approx(0.6));
  CHECK(normalized_doppler(50.0, 1e-4, 50.0 * 1e-4) == doctest::Approx(1.0));
  CHECK_THROWS(normalized_doppler(1.0, 0.0, 1.0));
  CHECK_THROWS(normalized_doppler(1.0, 1.0, 0.0));
}

TEST_CASE("conjugate symmetry and energy") {
  Rng rng(42);
  for (int i = 0; i < 50; ++i) {
    const double theta = rng.uniform(-1.5, 1.5);
    const double f = rng.uniform(-2.0, 2.0);
    const Index n = 2 + Index(rng.uniform() * 14);
    const Index l = 1 + Index(rng.uniform() * 9);
    CHECK((steering_vector(-theta, n) - steering_vector(theta, n).conjugate())
              .norm() < 1e-12);
    CHECK((doppler_vector(-f, l) - doppler_vector(f, l).conjugate()).norm() <
          1e-12);
    CHECK(steering_vector(theta, n).squaredNorm() == doctest::Approx(double(n)));
    CHECK(doppler_vector(f, l).squaredNorm() == doctest::Approx(double(l)));
  }
}

TEST_CASE("noiseless synthesis hits the all-ones case") {
  PathSet<double> ps;
  ps.paths.push_back({0.0, 0.0, C(1, 0)});
  const SelectionSet s = nested_array(8, 5);
  const SnapshotBlock<double> x = synthesize_snapshots(ps, s, 4, {});
  CHECK(x.data.rows() == 5);
  CHECK(x.data.cols() == 4);
  CHECK((x.data.array() - C(1, 0)).abs().maxCoeff() < 1e-14);
}

TEST_CASE("synthesis matches an independent sum-of-outer-products oracle") {
  Rng rng(3);
  const SelectionSet s = nested_array(12, 6);
  const Index l = 5;
  PathSet<double> ps;
  for (int k = 0; k < 3; ++k)
    ps.paths.push_back({rng.uniform(-1.0, 1.0), rng.uniform(0.0, 1.0),
                        C(rng.normal(), rng.normal())});
  const SnapshotBlock<double> x = synthesize_snapshots(ps, s, l, {});

  // direct re-evaluation, entry by entry
  for (Index mi = 0; mi < s.size(); ++mi)
    for (Index t = 0; t < l; ++t) {
      C expect(0, 0);
      for (const auto& p : ps.paths) {
        const double spatial = pi<double> * (s[int(mi)] - 1) * std::sin(p.theta);
        const double temporal = 2.0 * pi<double> * p.doppler * double(t + 1);
        expect += p.gain * std::polar(1.0, spatial + temporal);
      }
      CHECK(std::abs(x.data(mi, t) - expect) < 1e-12);
    }
}

TEST_CASE("vectorize stacks columns and matches the kronecker model") {
  SnapshotBlock<double> blk{CMatrix<double>(2, 2), SelectionSet({1, 2}, 2)};
  blk.data << C(1, 0), C(3, 0), C(2, 0), C(4, 0);  // [[a, c], [b, d]]
  const CVector<double> y = vectorize(blk);
  CHECK(y(0) == C(1, 0));
  CHECK(y(1) == C(2, 0));
  CHECK(y(2) == C(3, 0));
  CHECK(y(3) == C(4, 0));

  // sigma = 0, K = 1: vec(X) = g * Gamma (v kron a)
  Rng rng(11);
  const SelectionSet s = nested_array(9, 5);
  const Index l = 3;
  PathSet<double> ps;
  ps.paths.push_back({0.4, 0.3, C(rng.normal(), rng.normal())});
  const SnapshotBlock<double> x = synthesize_snapshots(ps, s, l, {});
  const CVector<double> a = steering_vector(ps.paths[0].theta, 9);
  const CVector<double> v = doppler_vector(ps.paths[0].doppler, l);
  CVector<double> kron(9 * l);
  for (Index t = 0; t < l; ++t) kron.segment(t * 9, 9) = v(t) * a;
  const CVector<double> expect =
      ps.paths[0].gain * expanded_select(s, l, kron);
  CHECK((vectorize(x) - expect).norm() < 1e-12);
}

TEST_CASE("true channel equals the manifold-matrix product") {
  PathSet<double> ps;
  ps.paths.push_back({0.0, 0.0, C(1, 0)});
  const CVector<double> h1 = true_channel(ps, 5);
  CHECK((h1.array() - C(1, 0)).abs().maxCoeff() < 1e-15);

  Rng rng(8);
  PathSet<double> many;
  for (int k = 0; k < 4; ++k)
    many.paths.push_back({rng.uniform(-1.2, 1.2), rng.uniform(0.0, 1.0),
                          C(rng.normal(), rng.normal())});
  const Index n = 16;
  CMatrix<double> manifold(n, 4);
  CVector<double> g(4);
  for (int k = 0; k < 4; ++k) {
    manifold.col(k) = steering_vector(many.paths[std::size_t(k)].theta, n);
    g(k) = many.paths[std::size_t(k)].gain;
  }
  CHECK((true_channel(many, n) - manifold * g).norm() < 1e-12);
}

TEST_CASE("seeded noise is bit-identical and has the right variance") {
  PathSet<double> ps;
  ps.paths.push_back({0.1, 0.2, C(0, 0)});  // zero gain: pure noise block
  const SelectionSet s = ula_prefix(10, 10);
  NoiseSpec<double> noise{0.73, 424242};
  const auto x1 = synthesize_snapshots(ps, s, 100, noise);
  const auto x2 = synthesize_snapshots(ps, s, 100, noise);
  CHECK(x1.data == x2.data);
  noise.seed = 424243;
  const auto x3 = synthesize_snapshots(ps, s, 100, noise);
  CHECK(x1.data != x3.data);

  // 10^5 entries: empirical per-entry variance within 2 percent
  const auto big = synthesize_snapshots(ps, s, 10000, noise);
  const double mean_sq = big.data.squaredNorm() / double(big.data.size());
  CHECK(mean_sq == doctest::Approx(0.73).epsilon(0.02));
}

TEST_CASE("path set validation") {
  PathSet<double> empty;
  CHECK_THROWS(empty.validate());
  PathSet<double> dup;
  dup.paths.push_back({0.3, 0.4, C(1, 0)});
  dup.paths.push_back({0.3, 0.4, C(-1, 0)});
  CHECK_THROWS(dup.validate());
  PathSet<double> ok;
  ok.paths.push_back({0.3, 0.4, C(1, 0)});
  ok.paths.push_back({0.3, 0.5, C(1, 0)});
  CHECK_NOTHROW(ok.validate());
}
