#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mmce/model.hpp"
#include "mmce/recovery.hpp"
#include "mmce/sdp.hpp"

using namespace mmce;
using C = std::complex<double>;

namespace {

CVector<double> synthesize_y(const PathSet<double>& paths, const SelectionSet& s,
                             Index l, double sigma, std::uint64_t seed) {
  NoiseSpec<double> noise{sigma, seed};
  return vectorize(synthesize_snapshots(paths, s, l, noise));
}

}  // namespace

TEST_CASE("noiseless single path drives the fit to a rank-one structure") {
  const SelectionSet s = nested_array(32, 11);
  PathSet<double> ps;
  ps.paths.push_back({0.0, 0.0, C(1, 0)});
  const CVector<double> y = synthesize_y(ps, s, 3, 0.0, 0);

  SdpOptions<double> opts;
  const SdpSolution<double> sol = solve_primal(y, s, 3, opts);
  CHECK(sol.converged);
  CHECK(sol.t_hat.is_hermitian(1e-12));
  CHECK(sol.z >= 0.0);
  CHECK(sol.gap <= opts.rel_tolerance * (1.0 + std::abs(sol.objective)));

  const double sigma_hat = noise_floor(sol.t_hat);
  CHECK(sigma_hat <= 1e-6);
  CHECK(model_order(sol.t_hat, sigma_hat) == 1);
  const TbtDecomposition<double> dec = md_vandermonde(sol.t_hat, 1);
  REQUIRE(dec.atoms.size() == 1);
  CHECK(std::abs(dec.atoms[0].theta) < 1e-4);
  CHECK(std::abs(dec.atoms[0].doppler) < 1e-4);
  CHECK(dec.atoms[0].power == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("optimal covariance scales quadratically with the data") {
  const SelectionSet s = nested_array(8, 5);
  PathSet<double> ps;
  ps.paths.push_back({0.4, 0.3, C(1.0, 0.5)});
  const CVector<double> y = synthesize_y(ps, s, 2, 0.01, 99);

  SdpOptions<double> opts;
  const SdpSolution<double> a = solve_primal(y, s, 2, opts);
  const SdpSolution<double> b = solve_primal(CVector<double>(2.0 * y), s, 2, opts);
  const double rel =
      (materialize(b.t_hat) - 4.0 * materialize(a.t_hat)).norm() /
      (4.0 * materialize(a.t_hat).norm());
  CHECK(rel < 1e-4);
  CHECK(b.objective == doctest::Approx(4.0 * a.objective).epsilon(1e-4));
}

TEST_CASE("dual solve matches the primal and satisfies its constraints") {
  const SelectionSet s = nested_array(8, 5);
  const Index l = 3;
  Rng rng(1234);
  PathSet<double> ps;
  ps.paths.push_back({0.5, 0.35, C(rng.normal(), rng.normal())});
  ps.paths.push_back({-0.3, 0.62, C(rng.normal(), rng.normal())});
  const CVector<double> y = synthesize_y(ps, s, l, 0.01, 5);

  SdpOptions<double> opts;
  const SdpSolution<double> primal = solve_primal(y, s, l, opts);
  const auto [dual, via_dual] = solve_dual(y, s, l, opts);
  CHECK(primal.converged);
  CHECK(via_dual.converged);

  // same covariance from both routes
  const double rel = (materialize(primal.t_hat) - materialize(via_dual.t_hat)).norm() /
                     materialize(primal.t_hat).norm();
  CHECK(rel < 1e-3);

  // strong duality: the primal optimum equals -2 Re tr(w^H y)
  CHECK(via_dual.objective ==
        doctest::Approx(via_dual.dual_objective)
            .epsilon(1e-5 * (1 + std::abs(via_dual.objective))));
  CHECK(primal.objective ==
        doctest::Approx(via_dual.objective).epsilon(1e-3));

  // u is pinned to the data energy, Q is PSD, the TBT-adjoint constraint holds
  CHECK(dual.u == doctest::Approx(y.squaredNorm()).epsilon(1e-9));
  Eigen::SelfAdjointEigenSolver<CMatrix<double>> es(
      detail::assemble_schur(dual.u / y.squaredNorm(),
                             CVector<double>(dual.w / y.norm()), dual.v),
      Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues()(0) > -1e-6);
  const SelectionSet span = detail::rebase_to_span(s);
  TbtGrid<double> constraint = selected_adjoint(
      CMatrix<double>(CMatrix<double>::Identity(dual.v.rows(), dual.v.cols()) -
                      dual.v),
      span, l);
  CHECK(constraint.coeffs().cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("dual of a zero signal is trivial") {
  const SelectionSet s = nested_array(8, 5);
  const auto [dual, sol] = solve_dual(CVector<double>::Zero(10).eval(), s, 2);
  CHECK(dual.w.norm() == 0.0);
  CHECK(sol.objective == 0.0);
  CHECK(sol.converged);
}

TEST_CASE("primal rejects a zero signal") {
  const SelectionSet s = nested_array(8, 5);
  CHECK_THROWS(solve_primal(CVector<double>::Zero(10).eval(), s, 2));
}

TEST_CASE("dual refuses selections whose coarray has holes") {
  const SelectionSet cp = coprime_array(3, 4, 22);  // holes at 16, 19, 20
  CHECK_THROWS_AS(solve_dual(CVector<double>::Ones(20).eval(), cp, 2),
                  std::domain_error);
}

TEST_CASE("anm with zero noise recovers a single atom exactly") {
  const SelectionSet s = nested_array(8, 5);
  const Index l = 3;
  PathSet<double> ps;
  ps.paths.push_back({0.45, 0.3, C(1.2, -0.7)});
  const CVector<double> y = synthesize_y(ps, s, l, 0.0, 0);

  const SdpSolution<double> sol = solve_anm_baseline(y, s, l, 0.0);
  const double sigma_hat = noise_floor(sol.t_hat);
  const int k = model_order(sol.t_hat, sigma_hat);
  REQUIRE(k >= 1);
  const TbtDecomposition<double> dec = md_vandermonde(sol.t_hat, k);
  REQUIRE(!dec.atoms.empty());
  // strongest atom carries the path
  std::size_t best = 0;
  for (std::size_t i = 1; i < dec.atoms.size(); ++i)
    if (dec.atoms[i].power > dec.atoms[best].power) best = i;
  CHECK(std::abs(dec.atoms[best].theta - 0.45) < 1e-4);
  CHECK(std::abs(dec.atoms[best].doppler - 0.3) < 1e-4);
}

TEST_CASE("anm requires the noise power, primal does not") {
  const SelectionSet s = nested_array(8, 5);
  CHECK_THROWS(solve_anm_baseline(CVector<double>::Ones(10).eval(), s, 2, -1.0));
}

TEST_CASE("solver trace is emitted when requested") {
  const SelectionSet s = nested_array(6, 4);
  PathSet<double> ps;
  ps.paths.push_back({0.2, 0.4, C(1, 0)});
  const CVector<double> y = synthesize_y(ps, s, 2, 0.05, 3);
  SdpOptions<double> opts;
  opts.trace_path = "trace_test.csv";
  opts.max_iterations = 500;
  solve_primal(y, s, 2, opts);
  std::ifstream in(opts.trace_path);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "iteration,objective,primal_residual,dual_residual,rho");
  std::string first;
  CHECK(std::getline(in, first).good());
  in.close();
  std::remove(opts.trace_path.c_str());
}

TEST_CASE("objective settles monotonically over iteration windows") {
  const SelectionSet s = nested_array(16, 7);
  PathSet<double> ps;
  ps.paths.push_back({0.0, 0.0, C(1, 0)});
  const CVector<double> y = synthesize_y(ps, s, 3, 0.0, 0);
  SdpOptions<double> opts;
  opts.trace_path = "trace_window.csv";
  solve_primal(y, s, 3, opts);

  std::ifstream in(opts.trace_path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> obj;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    std::getline(ss, field, ',');
    obj.push_back(std::stod(field));
  }
  in.close();
  std::remove(opts.trace_path.c_str());
  REQUIRE(obj.size() > 3);

  // windowed means after the initial transient: non-increasing within jitter
  const std::size_t skip = std::min<std::size_t>(obj.size() / 4, 20);
  const std::size_t window = 5;  // trace rows are already spaced by checks
  std::vector<double> means;
  for (std::size_t i = skip; i + window <= obj.size(); i += window) {
    double sum = 0;
    for (std::size_t j = i; j < i + window; ++j) sum += obj[j];
    means.push_back(sum / double(window));
  }
  const double jitter = 0.05 * (1.0 + std::abs(obj.back()));
  for (std::size_t i = 1; i < means.size(); ++i)
    CHECK(means[i] <= means[i - 1] + jitter);
}

TEST_CASE("non-convergence within a tiny budget is flagged, not hidden") {
  const SelectionSet s = nested_array(8, 5);
  PathSet<double> ps;
  ps.paths.push_back({0.4, 0.3, C(1, 0)});
  const CVector<double> y = synthesize_y(ps, s, 2, 0.1, 8);
  SdpOptions<double> opts;
  opts.max_iterations = 4;
  const SdpSolution<double> sol = solve_primal(y, s, 2, opts);
  CHECK_FALSE(sol.converged);
  CHECK(sol.iterations == 4);
  CHECK(materialize(sol.t_hat).allFinite());
}

TEST_CASE("holey selections run the primal with the explicit PSD cone") {
  const SelectionSet cp = coprime_array(3, 4, 22);
  PathSet<double> ps;
  ps.paths.push_back({0.3, 0.25, C(1, 0)});
  const CVector<double> y = synthesize_y(ps, cp, 2, 0.01, 21);
  SdpOptions<double> opts;
  opts.max_iterations = 4000;
  opts.rel_tolerance = 1e-5;
  const SdpSolution<double> sol = solve_primal(y, cp, 2, opts);
  // the PSD cone imputes the missing lags: the materialized grid stays PSD
  CHECK(sol.min_eig_tbt > -1e-4 * materialize(sol.t_hat).norm());
}
