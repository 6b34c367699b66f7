#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "mmce/linalg.hpp"
#include "mmce/tbt.hpp"
#include "mmce/types.hpp"

namespace mmce {

enum class TbtPsdMode {
  kAuto,    // explicit T >= 0 cone only when the coarray has holes, where it
            // imputes the unobserved lag classes; hole-free selections solve
            // the plain covariance-fitting SDP (its optimum already lifts to
            // a near-PSD T, and the retrieval clamps the rest)
  kAlways,  // keep T >= 0 in the splitting unconditionally
  kOff,
};

template <typename Scalar>
struct SdpOptions {
  int max_iterations = 20000;
  Scalar abs_tolerance = Scalar(1e-8);
  Scalar rel_tolerance = Scalar(1e-6);
  TbtPsdMode tbt_psd = TbtPsdMode::kAuto;
  Scalar rho = Scalar(0);  // <= 0: per-solver default (1 primal, 0.05 dual/ANM)
  Scalar over_relaxation = Scalar(1.8);
  bool adapt_rho = true;
  Scalar rho_balance_threshold = Scalar(5);  // residual ratio triggering a change
  Scalar rho_balance_factor = Scalar(2);
  int check_every = 10;
  Scalar anm_lambda_scale = Scalar(0.8);  // multiplies sqrt(sigma NL log NL)
  std::string trace_path;               // per-iteration CSV when non-empty
};

template <typename Scalar>
struct SdpSolution {
  TbtGrid<Scalar> t_hat;
  Scalar z = Scalar(0);
  Scalar objective = Scalar(0);
  Scalar dual_objective = Scalar(0);
  Scalar gap = Scalar(0);
  int iterations = 0;
  double wall_time_s = 0;
  bool converged = false;
  Scalar primal_residual = Scalar(0);
  Scalar dual_residual = Scalar(0);
  Scalar dual_infeasibility = Scalar(0);
  Scalar min_eig_tbt = Scalar(0);
  bool tbt_cone_enforced = false;
};

template <typename Scalar>
struct DualSolution {
  Scalar u = Scalar(0);
  CVector<Scalar> w;
  CMatrix<Scalar> v;
  CMatrix<Scalar> recovered_t_omega;
  Scalar lift_class_spread = Scalar(0);
};

namespace detail {

// Solvers work on the aperture actually spanned by the selection; steering
// beyond the largest selected index is never observable from T_Omega.
inline SelectionSet rebase_to_span(const SelectionSet& s) {
  return SelectionSet(s.indices(), s.indices().back());
}

inline bool coarray_has_holes(const SelectionSet& s) {
  const Eigen::VectorXi nu = coarray_weights(s);
  const int n = s.aperture();
  for (int m = 0; m < n; ++m)
    if (nu(m + n - 1) == 0) return true;
  return false;
}

template <typename Scalar, typename DerivedT>
CMatrix<Scalar> assemble_schur(Scalar z, const CVector<Scalar>& y,
                               const Eigen::MatrixBase<DerivedT>& t_omega) {
  const Index ml = y.size();
  CMatrix<Scalar> s(ml + 1, ml + 1);
  s(0, 0) = z;
  s.col(0).tail(ml) = y;
  s.row(0).tail(ml) = y.adjoint();
  s.bottomRightCorner(ml, ml) = t_omega;
  return s;
}

template <typename Scalar>
void divide_by_classes(CMatrix<Scalar>& grid, const Matrix<Scalar>& sizes) {
  grid = (grid.array() /
          sizes.array().max(Scalar(1)).template cast<Complex<Scalar>>())
             .matrix();
}

template <typename Scalar>
class TraceWriter {
 public:
  explicit TraceWriter(const std::string& path) {
    if (!path.empty()) {
      out_.open(path);
      if (out_) out_ << "iteration,objective,primal_residual,dual_residual,rho\n";
    }
  }
  void row(int it, Scalar obj, Scalar rp, Scalar rd, Scalar rho) {
    if (out_)
      out_ << it << ',' << obj << ',' << rp << ',' << rd << ',' << rho << '\n';
  }

 private:
  std::ofstream out_;
};

}  // namespace detail

/// Covariance-fitting SDP in primal form:
///   min ||y||^2 z + tr(T_Omega)  s.t.  [[z, y^H], [y, T_Omega]] >= 0,
/// T Hermitian Toeplitz-block-Toeplitz (and T >= 0 per options). Solved by
/// ADMM on the coefficient grid; the Gram operator of the structure map is
/// diagonal per lag class, so the linear update is elementwise. The data is
/// normalized to ||y|| = 1 internally and rescaled on exit (the optimum is
/// 2-homogeneous in the data).
template <typename Scalar>
SdpSolution<Scalar> solve_primal(const CVector<Scalar>& y_omega,
                                 const SelectionSet& selection, Index snapshots,
                                 const SdpOptions<Scalar>& opts = {}) {
  using C = Complex<Scalar>;
  const auto t_start = std::chrono::steady_clock::now();

  const Scalar alpha = y_omega.norm();
  if (!(alpha > Scalar(0)))
    throw std::invalid_argument("solve_primal: zero observation vector");
  const SelectionSet s = detail::rebase_to_span(selection);
  const Index n = s.aperture(), m = s.size(), l = snapshots;
  const Index ml = m * l, nl = n * l;
  if (y_omega.size() != ml)
    throw std::invalid_argument("solve_primal: y must have length M*L");
  const CVector<Scalar> ybar = y_omega / alpha;
  const Scalar inv_a2 = Scalar(1) / (alpha * alpha);

  const bool holes = detail::coarray_has_holes(s);
  const bool full = opts.tbt_psd == TbtPsdMode::kAlways ||
                    (holes && opts.tbt_psd == TbtPsdMode::kAuto);

  const Matrix<Scalar> sel_sizes = selected_class_sizes<Scalar>(s, l);
  const Matrix<Scalar> tbt_sizes = tbt_class_sizes<Scalar>(n, l);
  CMatrix<Scalar> qc = CMatrix<Scalar>::Zero(2 * l - 1, 2 * n - 1);
  qc(l - 1, n - 1) = Scalar(ml);  // gradient of tr(T_Omega) on the grid

  TbtGrid<Scalar> c(n, l);
  {
    // sample-covariance class averages as a warm start
    c = selected_adjoint(CMatrix<Scalar>(ybar * ybar.adjoint()), s, l);
    detail::divide_by_classes(c.coeffs(), sel_sizes);
    c.symmetrize();
  }
  Scalar z = Scalar(1);

  const CMatrix<Scalar> c0 =
      detail::assemble_schur(Scalar(0), ybar, CMatrix<Scalar>::Zero(ml, ml));
  CMatrix<Scalar> s1 = detail::assemble_schur(
      Scalar(1), ybar, CMatrix<Scalar>::Identity(ml, ml));
  CMatrix<Scalar> u1 = CMatrix<Scalar>::Zero(ml + 1, ml + 1);
  CMatrix<Scalar> s2, u2;

  Scalar rho = opts.rho > Scalar(0) ? opts.rho : Scalar(1);
  const Scalar relax = opts.over_relaxation;
  detail::TraceWriter<Scalar> trace(opts.trace_path);

  SdpSolution<Scalar> sol;
  auto scaled_objective = [&] { return z + Scalar(ml) * std::real(c(0, 0)); };

  TbtGrid<Scalar> adj_prev(n, l);
  Scalar z_sproj_prev = Scalar(1);
  bool have_prev = false;
  int iter = 0;

  auto run = [&](int budget) {
    have_prev = false;
    for (; iter < budget; ++iter) {
      // linear step on (z, c)
      const CMatrix<Scalar> v1 = s1 - u1 - c0;
      TbtGrid<Scalar> g = selected_adjoint(
          CMatrix<Scalar>(v1.bottomRightCorner(ml, ml)), s, l);
      Matrix<Scalar> gram = sel_sizes;
      if (full) {
        g.coeffs() += tbt_adjoint(CMatrix<Scalar>(s2 - u2), n, l).coeffs();
        gram += tbt_sizes;
      }
      c.coeffs() = g.coeffs() - qc / rho;
      detail::divide_by_classes(c.coeffs(), gram);
      for (Index r = 0; r < gram.rows(); ++r)  // unconstrained classes stay 0
        for (Index q = 0; q < gram.cols(); ++q)
          if (gram(r, q) == Scalar(0)) c.coeffs()(r, q) = C(0);
      c.symmetrize();
      z = std::real(v1(0, 0)) - Scalar(1) / rho;

      // cone step with over-relaxation
      const CMatrix<Scalar> r1 =
          detail::assemble_schur(z, ybar, selected_submatrix(c, s, l));
      const CMatrix<Scalar> r1h = relax * r1 + (Scalar(1) - relax) * s1;
      s1 = psd_project<Scalar>(hermitian_part<Scalar>(r1h + u1));
      u1 += r1h - s1;
      CMatrix<Scalar> r2;
      if (full) {
        r2 = materialize(c);
        const CMatrix<Scalar> r2h = relax * r2 + (Scalar(1) - relax) * s2;
        s2 = psd_project<Scalar>(hermitian_part<Scalar>(r2h + u2));
        u2 += r2h - s2;
      }

      if ((iter + 1) % opts.check_every != 0 && iter + 1 != budget) continue;

      // residuals in the (z, grid) variable space
      Scalar rp2 = (r1 - s1).squaredNorm();
      if (full) rp2 += (r2 - s2).squaredNorm();
      const Scalar rp = std::sqrt(rp2);

      TbtGrid<Scalar> adj_s = selected_adjoint(
          CMatrix<Scalar>(s1.bottomRightCorner(ml, ml)), s, l);
      if (full) adj_s.coeffs() += tbt_adjoint(s2, n, l).coeffs();
      const Scalar z_sproj = std::real(s1(0, 0));
      Scalar rd = Scalar(0);
      if (have_prev) {
        const Scalar dz = z_sproj - z_sproj_prev;
        rd = rho * std::sqrt((adj_s.coeffs() - adj_prev.coeffs()).squaredNorm() +
                             dz * dz);
      }
      adj_prev = adj_s;
      z_sproj_prev = z_sproj;

      // duality gap from the cone multiplier Q = -rho * u
      const CVector<Scalar> w = -rho * u1.col(0).tail(ml);
      const Scalar dobj = -Scalar(2) * std::real(w.dot(ybar));
      const Scalar pobj = scaled_objective();
      const Scalar gap = std::abs(pobj - dobj);
      trace.row(iter + 1, alpha * alpha * pobj, rp, rd, rho);

      const Scalar dim = Scalar(ml + 1 + (full ? nl : 0));
      const Scalar eps_pri = opts.abs_tolerance * dim +
                             opts.rel_tolerance * std::max(r1.norm(), s1.norm());
      const Scalar eps_dual =
          opts.abs_tolerance * dim + opts.rel_tolerance * rho * u1.norm();
      // gate the gap in unscaled units: |obj - dobj| <= rel (1 + |obj|)
      const bool gap_ok =
          gap <= opts.rel_tolerance * (inv_a2 + std::abs(pobj));
      sol.primal_residual = rp;
      sol.dual_residual = rd;
      if (have_prev && rp <= eps_pri && rd <= eps_dual && gap_ok) {
        sol.converged = true;
        ++iter;
        return;
      }
      have_prev = true;

      if (opts.adapt_rho && iter < budget * 3 / 4 && rd > Scalar(0)) {
        const Scalar mu = opts.rho_balance_threshold;
        const Scalar fac = opts.rho_balance_factor;
        if (rp > mu * rd && rho < Scalar(1e6)) {
          rho *= fac;
          u1 /= fac;
          if (full) u2 /= fac;
        } else if (rd > mu * rp && rho > Scalar(1e-6)) {
          rho /= fac;
          u1 *= fac;
          if (full) u2 *= fac;
        }
      }
    }
  };

  if (full) {
    s2 = psd_project<Scalar>(materialize(c));
    u2 = CMatrix<Scalar>::Zero(nl, nl);
  }
  sol.tbt_cone_enforced = full;
  run(opts.max_iterations);

  // positive-semidefiniteness of the lifted T, reported as a diagnostic
  Scalar min_eig;
  {
    Vector<Scalar> lam;
    hermitian_eig(materialize(c), lam);
    min_eig = lam(0);
  }

  // honest dual-feasibility diagnostic for Q = -rho u
  const CVector<Scalar> w = -rho * u1.col(0).tail(ml);
  const Scalar dobj_scaled = -Scalar(2) * std::real(w.dot(ybar));
  const Scalar pobj_scaled = scaled_objective();
  {
    const CMatrix<Scalar> q1 = -rho * u1;
    TbtGrid<Scalar> adj_q =
        selected_adjoint(CMatrix<Scalar>(q1.bottomRightCorner(ml, ml)), s, l);
    if (full)
      adj_q.coeffs() += tbt_adjoint(CMatrix<Scalar>(-rho * u2), n, l).coeffs();
    const Scalar zpart = std::abs(std::real(q1(0, 0)) - Scalar(1));
    sol.dual_infeasibility =
        std::sqrt((adj_q.coeffs() - qc).squaredNorm() + zpart * zpart);
  }

  c.coeffs() *= alpha * alpha;
  sol.t_hat = std::move(c);
  sol.z = std::max(z, Scalar(0));
  sol.objective = alpha * alpha * pobj_scaled;
  sol.dual_objective = alpha * alpha * dobj_scaled;
  sol.gap = std::abs(sol.objective - sol.dual_objective);
  sol.iterations = iter;
  sol.min_eig_tbt = alpha * alpha * min_eig;
  sol.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return sol;
}

/// The Lagrange dual of the covariance-fitting SDP:
///   min 2 Re tr(w^H y)  s.t.  Q = [[u, w^H], [w, V]] >= 0,
///   u = ||y||^2,  adj(Gamma^H (I - V) Gamma) = 0 on the TBT structure.
/// Iterates on (M*L+1)-sized matrices only. Strong duality makes the cone
/// multiplier the primal Schur matrix, so T_Omega is read off the scaled
/// running multiplier and lifted back to the full TBT coefficients.
template <typename Scalar>
std::pair<DualSolution<Scalar>, SdpSolution<Scalar>> solve_dual(
    const CVector<Scalar>& y_omega, const SelectionSet& selection,
    Index snapshots, const SdpOptions<Scalar>& opts = {}) {
  const auto t_start = std::chrono::steady_clock::now();
  const SelectionSet s = detail::rebase_to_span(selection);
  const Index n = s.aperture(), m = s.size(), l = snapshots, ml = m * l;
  if (y_omega.size() != ml)
    throw std::invalid_argument("solve_dual: y must have length M*L");
  if (detail::coarray_has_holes(s))
    throw std::domain_error(
        "solve_dual: coarray holes prevent lifting T_Omega to T");

  DualSolution<Scalar> dual;
  SdpSolution<Scalar> sol;
  const Scalar alpha = y_omega.norm();
  if (!(alpha > Scalar(0))) {
    dual.u = Scalar(0);
    dual.w = CVector<Scalar>::Zero(ml);
    dual.v = CMatrix<Scalar>::Identity(ml, ml);
    dual.recovered_t_omega = CMatrix<Scalar>::Zero(ml, ml);
    sol.t_hat = TbtGrid<Scalar>(n, l);
    sol.converged = true;
    sol.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    return {std::move(dual), std::move(sol)};
  }
  const CVector<Scalar> ybar = y_omega / alpha;
  const Scalar inv_a2 = Scalar(1) / (alpha * alpha);
  const CMatrix<Scalar> c0 =
      detail::assemble_schur(Scalar(0), ybar, CMatrix<Scalar>::Zero(ml, ml));

  const Matrix<Scalar> sel_sizes = selected_class_sizes<Scalar>(s, l);
  CMatrix<Scalar> target = CMatrix<Scalar>::Zero(2 * l - 1, 2 * n - 1);
  target(l - 1, n - 1) = Scalar(ml);  // class sums of the identity block

  // projection onto { Q(0,0) = 1, class sums of V = class sums of I }
  auto affine_project = [&](const CMatrix<Scalar>& raw) {
    CMatrix<Scalar> q = hermitian_part<Scalar>(raw);
    q(0, 0) = Scalar(1);
    const CMatrix<Scalar> v = q.bottomRightCorner(ml, ml);
    TbtGrid<Scalar> shift = selected_adjoint(v, s, l);
    shift.coeffs() = target - shift.coeffs();
    detail::divide_by_classes(shift.coeffs(), sel_sizes);
    shift.symmetrize();
    q.bottomRightCorner(ml, ml) = v + selected_submatrix(shift, s, l);
    return q;
  };

  CMatrix<Scalar> p = CMatrix<Scalar>::Identity(ml + 1, ml + 1);
  CMatrix<Scalar> q = p, u = CMatrix<Scalar>::Zero(ml + 1, ml + 1);
  Scalar rho = opts.rho > Scalar(0) ? opts.rho : Scalar(0.05);
  const Scalar relax = opts.over_relaxation;
  detail::TraceWriter<Scalar> trace(opts.trace_path);

  CMatrix<Scalar> p_prev = p;
  bool have_prev = false;
  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    q = affine_project(p - u - c0 / rho);
    const CMatrix<Scalar> qh = relax * q + (Scalar(1) - relax) * p;
    p_prev = p;
    p = psd_project<Scalar>(hermitian_part<Scalar>(qh + u));
    u += qh - p;

    if ((iter + 1) % opts.check_every != 0 && iter + 1 != opts.max_iterations)
      continue;

    const Scalar rp = (q - p).norm();
    const Scalar rd = rho * (p - p_prev).norm();
    // recovered primal pieces from the multiplier S = -rho U
    const CMatrix<Scalar> s_cert = -rho * u;
    const Scalar pobj = std::real(s_cert(0, 0)) +
                        std::real(s_cert.bottomRightCorner(ml, ml).trace());
    const Scalar dobj = -Scalar(2) * std::real(q.col(0).tail(ml).dot(ybar));
    const Scalar gap = std::abs(pobj - dobj);
    trace.row(iter + 1, alpha * alpha * dobj, rp, rd, rho);

    const Scalar dim = Scalar(ml + 1);
    const Scalar eps_pri = opts.abs_tolerance * dim +
                           opts.rel_tolerance * std::max(q.norm(), p.norm());
    const Scalar eps_dual =
        opts.abs_tolerance * dim + opts.rel_tolerance * rho * u.norm();
    sol.primal_residual = rp;
    sol.dual_residual = rd;
    if (have_prev && rp <= eps_pri && rd <= eps_dual &&
        gap <= opts.rel_tolerance * (inv_a2 + std::abs(pobj))) {
      sol.converged = true;
      ++iter;
      break;
    }
    have_prev = true;
    if (opts.adapt_rho && iter < opts.max_iterations / 2 && rd > Scalar(0)) {
      const Scalar mu = opts.rho_balance_threshold;
      const Scalar fac = opts.rho_balance_factor;
      if (rp > mu * rd && rho < Scalar(1e6)) {
        rho *= fac;
        u /= fac;
      } else if (rd > mu * rp && rho > Scalar(1e-6)) {
        rho /= fac;
        u *= fac;
      }
    }
  }

  const CMatrix<Scalar> s_cert = -rho * u;
  sol.dual_infeasibility = (s_cert.col(0).tail(ml) - ybar).norm();

  const CMatrix<Scalar> t_omega =
      alpha * alpha * s_cert.bottomRightCorner(ml, ml);
  auto lift = lift_from_selected(t_omega, s, l);
  dual.lift_class_spread = lift.max_class_spread;
  dual.u = alpha * alpha * std::real(q(0, 0));
  dual.w = alpha * q.col(0).tail(ml);
  dual.v = q.bottomRightCorner(ml, ml);
  dual.recovered_t_omega = t_omega;

  sol.t_hat = std::move(lift.grid);
  sol.z = std::max(std::real(s_cert(0, 0)), Scalar(0));
  sol.objective = alpha * alpha * std::real(s_cert(0, 0)) +
                  std::real(t_omega.trace());
  sol.dual_objective =
      -Scalar(2) * alpha * alpha * std::real(q.col(0).tail(ml).dot(ybar));
  sol.gap = std::abs(sol.objective - sol.dual_objective);
  sol.iterations = iter;
  {
    Vector<Scalar> lam;
    hermitian_eig(materialize(sol.t_hat), lam);
    sol.min_eig_tbt = lam(0);
  }
  sol.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return {std::move(dual), std::move(sol)};
}

/// Two-dimensional atomic-norm denoising baseline. Needs the true noise power
/// for its regularization weight lambda = scale * sqrt(sigma NL log NL); with
/// sigma = 0 it degenerates to exact-interpolation atomic norm minimization.
/// The semidefinite block has size NL+1 over the spanned aperture.
template <typename Scalar>
SdpSolution<Scalar> solve_anm_baseline(const CVector<Scalar>& y_omega,
                                       const SelectionSet& selection,
                                       Index snapshots, Scalar sigma_true,
                                       const SdpOptions<Scalar>& opts = {}) {
  using C = Complex<Scalar>;
  const auto t_start = std::chrono::steady_clock::now();
  if (sigma_true < Scalar(0))
    throw std::invalid_argument("solve_anm_baseline: sigma_true >= 0 required");
  const SelectionSet s = detail::rebase_to_span(selection);
  const Index n = s.aperture(), m = s.size(), l = snapshots;
  const Index ml = m * l, nl = n * l;
  if (y_omega.size() != ml)
    throw std::invalid_argument("solve_anm_baseline: y must have length M*L");
  const Scalar alpha = y_omega.norm();
  if (!(alpha > Scalar(0)))
    throw std::invalid_argument("solve_anm_baseline: zero observation vector");
  const CVector<Scalar> ybar = y_omega / alpha;

  const Scalar lambda =
      opts.anm_lambda_scale *
      std::sqrt(sigma_true * Scalar(nl) * std::log(Scalar(nl)));
  const bool interpolate = !(lambda > Scalar(0));
  const Scalar lam = interpolate ? Scalar(1) : lambda / alpha;  // scaled weight

  // observation mask over the NL grid
  Eigen::Array<bool, Eigen::Dynamic, 1> mask =
      Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(nl, false);
  for (Index t = 0; t < l; ++t)
    for (Index a = 0; a < m; ++a) mask(t * n + (s[int(a)] - 1)) = true;
  const CVector<Scalar> yemb = expanded_adjoint(s, l, ybar);

  const Matrix<Scalar> tbt_sizes = tbt_class_sizes<Scalar>(n, l);
  CVector<Scalar> x = yemb;
  Scalar tau = Scalar(1);
  TbtGrid<Scalar> c = tbt_adjoint(CMatrix<Scalar>(x * x.adjoint()), n, l);
  detail::divide_by_classes(c.coeffs(), tbt_sizes);
  c.symmetrize();

  auto assemble = [&](const TbtGrid<Scalar>& cg, const CVector<Scalar>& xv,
                      Scalar tv) {
    CMatrix<Scalar> out(nl + 1, nl + 1);
    out.topLeftCorner(nl, nl) = materialize(cg);
    out.col(nl).head(nl) = xv;
    out.row(nl).head(nl) = xv.adjoint();
    out(nl, nl) = tv;
    return out;
  };

  CMatrix<Scalar> s3 = psd_project<Scalar>(assemble(c, x, tau));
  CMatrix<Scalar> u3 = CMatrix<Scalar>::Zero(nl + 1, nl + 1);
  // the step size tracks the scaled regularization weight: a small lambda
  // makes the problem near-degenerate and wants a correspondingly small rho
  Scalar rho = opts.rho > Scalar(0)
                   ? opts.rho
                   : (interpolate
                          ? Scalar(0.05)
                          : std::clamp(lam / Scalar(4), Scalar(0.01), Scalar(0.5)));
  const Scalar relax = opts.over_relaxation;
  detail::TraceWriter<Scalar> trace(opts.trace_path);

  SdpSolution<Scalar> sol;
  auto scaled_objective = [&] {
    const Scalar atom_part = lam * (std::real(c(0, 0)) + tau) / Scalar(2);
    if (interpolate) return atom_part;
    Scalar fit = Scalar(0);
    for (Index i = 0; i < nl; ++i)
      if (mask(i)) fit += std::norm(x(i) - yemb(i));
    return atom_part + fit / Scalar(2);
  };

  CMatrix<Scalar> s3_prev = s3;
  bool have_prev = false;
  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    const CMatrix<Scalar> v = s3 - u3;
    // elementwise linear updates: the structure Gram is diagonal here too
    TbtGrid<Scalar> g =
        tbt_adjoint(CMatrix<Scalar>(v.topLeftCorner(nl, nl)), n, l);
    g.coeffs()(l - 1, n - 1) -= lam / (Scalar(2) * rho);
    c.coeffs() = g.coeffs();
    detail::divide_by_classes(c.coeffs(), tbt_sizes);
    c.symmetrize();
    const CVector<Scalar> ax =
        v.col(nl).head(nl) + v.row(nl).head(nl).adjoint();
    for (Index i = 0; i < nl; ++i) {
      if (mask(i)) {
        x(i) = interpolate
                   ? yemb(i)
                   : (yemb(i) + rho * ax(i)) / (Scalar(1) + Scalar(2) * rho);
      } else {
        x(i) = ax(i) / Scalar(2);
      }
    }
    tau = std::real(v(nl, nl)) - lam / (Scalar(2) * rho);

    const CMatrix<Scalar> r = assemble(c, x, tau);
    const CMatrix<Scalar> rh = relax * r + (Scalar(1) - relax) * s3;
    s3_prev = s3;
    s3 = psd_project<Scalar>(hermitian_part<Scalar>(rh + u3));
    u3 += rh - s3;

    if ((iter + 1) % opts.check_every != 0 && iter + 1 != opts.max_iterations)
      continue;

    const Scalar rp = (r - s3).norm();
    const CMatrix<Scalar> ds = s3 - s3_prev;
    TbtGrid<Scalar> adj_ds =
        tbt_adjoint(CMatrix<Scalar>(ds.topLeftCorner(nl, nl)), n, l);
    const CVector<Scalar> dx =
        ds.col(nl).head(nl) + ds.row(nl).head(nl).adjoint();
    const Scalar dt = std::real(ds(nl, nl));
    const Scalar rd = rho * std::sqrt(adj_ds.coeffs().squaredNorm() +
                                      dx.squaredNorm() + dt * dt);
    trace.row(iter + 1, alpha * alpha * scaled_objective(), rp, rd, rho);

    const Scalar dim = Scalar(nl + 1);
    const Scalar eps_pri = opts.abs_tolerance * dim +
                           opts.rel_tolerance * std::max(r.norm(), s3.norm());
    const Scalar eps_dual =
        opts.abs_tolerance * dim + opts.rel_tolerance * rho * u3.norm();
    sol.primal_residual = rp;
    sol.dual_residual = rd;
    Scalar gap_now;
    {
      const CMatrix<Scalar> cert_now = -rho * u3;
      const CVector<Scalar> cx =
          (cert_now.col(nl).head(nl) + cert_now.row(nl).head(nl).adjoint()) /
          Scalar(2);
      Scalar quad = Scalar(0);
      C lin(0);
      for (Index i = 0; i < nl; ++i)
        if (mask(i)) {
          quad += std::norm(cx(i));
          lin += std::conj(cx(i)) * yemb(i);
        }
      const Scalar dnow = interpolate
                              ? -Scalar(2) * std::real(lin)
                              : -Scalar(2) * quad - Scalar(2) * std::real(lin);
      gap_now = std::abs(scaled_objective() - dnow);
    }
    const Scalar inv_a2 = Scalar(1) / (alpha * alpha);
    if (have_prev && rp <= eps_pri && rd <= eps_dual &&
        gap_now <= opts.rel_tolerance * (inv_a2 + std::abs(scaled_objective()))) {
      sol.converged = true;
      ++iter;
      break;
    }
    have_prev = true;
    if (opts.adapt_rho && iter < opts.max_iterations / 2 && rd > Scalar(0)) {
      const Scalar mu = opts.rho_balance_threshold;
      const Scalar fac = opts.rho_balance_factor;
      if (rp > mu * rd && rho < Scalar(1e6)) {
        rho *= fac;
        u3 /= fac;
      } else if (rd > mu * rp && rho > Scalar(1e-6)) {
        rho /= fac;
        u3 *= fac;
      }
    }
  }

  // honest dual value and feasibility from the cone multiplier
  const CMatrix<Scalar> cert = -rho * u3;
  Scalar dobj_scaled;
  {
    const CVector<Scalar> cx =
        (cert.col(nl).head(nl) + cert.row(nl).head(nl).adjoint()) / Scalar(2);
    Scalar quad = Scalar(0);
    C lin(0);
    for (Index i = 0; i < nl; ++i)
      if (mask(i)) {
        quad += std::norm(cx(i));
        lin += std::conj(cx(i)) * yemb(i);
      }
    dobj_scaled = interpolate ? -Scalar(2) * std::real(lin)
                              : -Scalar(2) * quad - Scalar(2) * std::real(lin);
    TbtGrid<Scalar> adj_cert =
        tbt_adjoint(CMatrix<Scalar>(cert.topLeftCorner(nl, nl)), n, l);
    adj_cert.coeffs()(l - 1, n - 1) -= lam / Scalar(2);
    const Scalar tpart = std::abs(std::real(cert(nl, nl)) - lam / Scalar(2));
    Scalar offsup = Scalar(0);  // multiplier must vanish off the observations
    for (Index i = 0; i < nl; ++i)
      if (!mask(i)) offsup += std::norm(cx(i));
    sol.dual_infeasibility = std::sqrt(adj_cert.coeffs().squaredNorm() +
                                       tpart * tpart + offsup);
  }

  const Scalar pobj_scaled = scaled_objective();
  c.coeffs() *= alpha;  // the atomic SDP variables scale linearly in the data
  sol.t_hat = std::move(c);
  sol.z = Scalar(0);
  sol.objective = alpha * alpha * pobj_scaled;
  sol.dual_objective = alpha * alpha * dobj_scaled;
  sol.gap = std::abs(sol.objective - sol.dual_objective);
  sol.iterations = iter;
  {
    Vector<Scalar> lam;
    hermitian_eig(materialize(sol.t_hat), lam);
    sol.min_eig_tbt = lam(0);
  }
  sol.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return sol;
}

}  // namespace mmce
