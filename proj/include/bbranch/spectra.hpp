#pragma once

/**
 * @file spectra.hpp
 * @brief Principal eigenvalues of the two stability forms on a branch state.
 *
 *  - classical (fourth order):  psi -> int (Delta psi)^2 - lambda int f'(u) psi^2
 *  - system form:               phi -> int |grad phi|^2 - sqrt(lambda) int sqrt(f'(u)) phi^2
 *
 * both relative to int psi^2. With W the quadrature weights on the unknown nodes and
 * S = W^{1/2} L W^{-1/2} (symmetric tridiagonal), the generalized problems become the
 * standard symmetric problems
 *   (S^2 - lambda diag f'(u)) y = mu y        (pentadiagonal)
 *   (S - sqrt(lambda) diag sqrt(f'(u))) y = nu y   (tridiagonal)
 * with eigenfunction psi = W^{-1/2} y. Only psi(1) = 0 is imposed on the fourth-order
 * form; Delta psi(1) = 0 is the natural condition.
 *
 * The principal pair is found by inverse iteration with a shift kept below the
 * principal eigenvalue; the shift is placed by bisection on LDL^T inertia counts.
 */

#include "bbranch/banded.hpp"
#include "bbranch/errors.hpp"
#include "bbranch/solve.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace bbranch {

struct EigenOptions {
  double tol = 1e-10;  ///< on relative eigenvalue increments
  int max_iter = 200;
};

struct EigenPair {
  double value = 0.0;
  std::vector<double> vector;  ///< unit 2-norm, in the symmetric (y) coordinates
  int iterations = 0;
};

/// Value of a Rayleigh quotient together with the magnitude of its positive part,
/// which sets the round-off level of the value.
struct RayleighValue {
  double value = 0.0;
  double scale = 1.0;
};

/// Smallest eigenpair of a symmetric banded matrix. `rayleigh` returns a RayleighValue
/// for y^T M y / y^T y; callers with a factored form of M pass a cancellation-free
/// evaluation. Increments are measured against max(1, |mu|, scale).
template <class Rayleigh>
EigenPair principal_eigenpair(const banded::SymmetricBand& m, Rayleigh&& rayleigh,
                              const EigenOptions& opts = {}) {
  const std::size_t n = m.n();
  std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
  auto below = [&](double s) { return banded::ShiftedLDLT(m, s).negative_pivots(); };

  // Bracket: hi >= mu_1 (Rayleigh quotient), lo < mu_1 (no negative pivots).
  double hi = rayleigh(x).value;
  const double mag = std::max(1.0, std::abs(hi));
  double width = 1e-3 * mag;
  double lo = hi - width;
  for (int k = 0; below(lo) > 0; ++k) {
    if (k > 200) throw SpectralError("could not bracket the principal eigenvalue", {hi});
    width *= 4.0;
    lo = hi - width;
  }
  for (int k = 0; k < 200 && (hi - lo) > 1e-7 * std::max(1.0, std::abs(hi)); ++k) {
    const double mid = 0.5 * (lo + hi);
    if (below(mid) > 0) hi = mid; else lo = mid;
  }

  const banded::ShiftedLDLT fact(m, lo);
  std::vector<double> history;
  double mu = rayleigh(x).value;
  history.push_back(mu);
  for (int it = 1; it <= opts.max_iter; ++it) {
    x = fact.solve(std::move(x));
    const double nrm = std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
    for (double& xi : x) xi /= nrm;
    const RayleighValue next = rayleigh(x);
    history.push_back(next.value);
    const double scale = std::max({1.0, std::abs(next.value), next.scale});
    const bool done = std::abs(next.value - mu) <= opts.tol * scale;
    mu = next.value;
    if (done && it > 1) return {mu, std::move(x), it};
  }
  throw SpectralError("inverse iteration did not converge", std::move(history));
}

inline EigenPair principal_eigenpair(const banded::SymmetricBand& m, const EigenOptions& opts = {}) {
  auto rayleigh = [&m](const std::vector<double>& y) {
    const auto my = m.multiply(y);
    double num = 0.0, den = 0.0, mag = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      num += y[i] * my[i];
      mag += std::abs(y[i] * my[i]);
      den += y[i] * y[i];
    }
    return RayleighValue{num / den, mag / den};
  };
  return principal_eigenpair(m, rayleigh, opts);
}

struct StabilityReport {
  double mu1 = 0.0;  ///< classical semi-stability eigenvalue
  double nu1 = 0.0;  ///< system-form eigenvalue
  GridFunction eigfn_mu, eigfn_nu;
  int iterations_mu = 0, iterations_nu = 0;
};

namespace detail {

inline banded::SymmetricBand classical_matrix(const SolutionState& st) {
  const auto& op = st.op();
  const std::size_t n = op.n();
  const auto off = op.symmetric_offdiag();
  const auto d = op.diag();
  banded::SymmetricBand m(n, 2);
  auto& m0 = m.diagonal(0);
  auto& m1 = m.diagonal(1);
  auto& m2 = m.diagonal(2);
  for (std::size_t i = 0; i < n; ++i) {
    double diag = d[i] * d[i];
    if (i > 0) diag += off[i - 1] * off[i - 1];
    if (i + 1 < n) diag += off[i] * off[i];
    m0[i] = diag - st.lambda * f_prime(st.nl, st.u[i]);
    if (i + 1 < n) m1[i] = off[i] * (d[i] + d[i + 1]);
    if (i + 2 < n) m2[i] = off[i] * off[i + 1];
  }
  return m;
}

inline banded::SymmetricBand system_matrix(const SolutionState& st) {
  const auto& op = st.op();
  const std::size_t n = op.n();
  const auto off = op.symmetric_offdiag();
  banded::SymmetricBand m(n, 1);
  const double rl = std::sqrt(st.lambda);
  for (std::size_t i = 0; i < n; ++i)
    m.diagonal(0)[i] = op.diag()[i] - rl * std::sqrt(f_prime(st.nl, st.u[i]));
  for (std::size_t i = 0; i + 1 < n; ++i) m.diagonal(1)[i] = off[i];
  return m;
}

/// Nodal values x = W^{-1/2} y (boundary entry zero), without normalisation.
inline GridFunction unscale(const SolutionState& st, const std::vector<double>& y) {
  const auto w = st.op().weight();
  GridFunction f(st.grid().size(), 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) f[i] = y[i] / std::sqrt(w[i]);
  return f;
}

/// Rayleigh quotient of the classical form: (|S y|^2 - lambda sum f' y^2) / |y|^2.
inline RayleighValue classical_rayleigh(const SolutionState& st, const std::vector<double>& y) {
  const auto x = unscale(st, y);
  const auto lx = st.op().apply(x);
  const auto w = st.op().weight();
  double kin = 0.0, pot = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    kin += w[i] * lx[i] * lx[i];
    pot += st.lambda * f_prime(st.nl, st.u[i]) * y[i] * y[i];
    den += y[i] * y[i];
  }
  return {(kin - pot) / den, kin / den};
}

/// Rayleigh quotient of the system form, with y^T S y taken from face fluxes.
inline RayleighValue system_rayleigh(const SolutionState& st, const std::vector<double>& y) {
  const auto x = unscale(st, y);
  const double grad = dirichlet_form(st.grid(), st.op(), x, x) / st.grid().sigma();
  const double rl = std::sqrt(st.lambda);
  double pot = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    pot += rl * std::sqrt(f_prime(st.nl, st.u[i])) * y[i] * y[i];
    den += y[i] * y[i];
  }
  return {(grad - pot) / den, grad / den};
}

/// Maps y back to nodal values, normalises to unit weighted L^2 and fixes the sign at r = 0.
inline GridFunction to_grid_function(const SolutionState& st, const std::vector<double>& y) {
  const auto& grid = st.grid();
  GridFunction f = unscale(st, y);
  GridFunction sq(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) sq[i] = f[i] * f[i];
  const double nrm = std::sqrt(integrate(grid, sq));
  const double sign = f[0] < 0.0 ? -1.0 : 1.0;
  for (double& x : f) x *= sign / nrm;
  return f;
}

}  // namespace detail

/// int (Delta_h psi)^2, summed over the unknown nodes.
inline double bilaplacian_energy(const SolutionState& st, std::span<const double> psi) {
  const auto lp = st.op().apply(psi);
  const auto w = st.grid().weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < st.grid().n(); ++i) acc += w[i] * lp[i] * lp[i];
  return st.grid().sigma() * acc;
}

/// int (Delta psi)^2 - lambda int f'(u) psi^2; psi must vanish at r = 1.
inline double classical_form(const SolutionState& st, std::span<const double> psi) {
  if (psi.size() != st.grid().size() || psi.back() != 0.0)
    throw std::invalid_argument("test function must vanish at r = 1");
  GridFunction pot(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) pot[i] = f_prime(st.nl, st.u[i]) * psi[i] * psi[i];
  return bilaplacian_energy(st, psi) - st.lambda * integrate(st.grid(), pot);
}

/// int |grad phi|^2 - sqrt(lambda) int sqrt(f'(u)) phi^2; phi must vanish at r = 1.
inline double system_form(const SolutionState& st, std::span<const double> phi) {
  GridFunction pot(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i)
    pot[i] = std::sqrt(f_prime(st.nl, st.u[i])) * phi[i] * phi[i];
  return dirichlet_form(st.grid(), st.op(), phi, phi) - std::sqrt(st.lambda) * integrate(st.grid(), pot);
}

inline double l2_squared(const RadialGrid& grid, std::span<const double> f) {
  GridFunction sq(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) sq[i] = f[i] * f[i];
  return integrate(grid, sq);
}

inline EigenPair semistability_pair(const SolutionState& st, const EigenOptions& opts = {}) {
  return principal_eigenpair(
      detail::classical_matrix(st), [&st](const auto& y) { return detail::classical_rayleigh(st, y); }, opts);
}

inline EigenPair system_stability_pair(const SolutionState& st, const EigenOptions& opts = {}) {
  return principal_eigenpair(
      detail::system_matrix(st), [&st](const auto& y) { return detail::system_rayleigh(st, y); }, opts);
}

inline double semistability_eigenvalue(const SolutionState& st, const EigenOptions& opts = {}) {
  return semistability_pair(st, opts).value;
}

inline double system_stability_eigenvalue(const SolutionState& st, const EigenOptions& opts = {}) {
  return system_stability_pair(st, opts).value;
}

inline StabilityReport stability_report(const SolutionState& st, const EigenOptions& opts = {}) {
  StabilityReport rep;
  auto mu = semistability_pair(st, opts);
  auto nu = system_stability_pair(st, opts);
  rep.mu1 = mu.value;
  rep.nu1 = nu.value;
  rep.iterations_mu = mu.iterations;
  rep.iterations_nu = nu.iterations;
  rep.eigfn_mu = detail::to_grid_function(st, mu.vector);
  rep.eigfn_nu = detail::to_grid_function(st, nu.vector);
  return rep;
}

/// Slack of the two-function stability inequality for the system with G = v, F = f(u):
///   int |grad a|^2 + int |grad b|^2 - 2 sqrt(lambda) int sqrt(f'(u)) a b.
inline double general_system_form(const SolutionState& st, std::span<const double> alpha,
                                  std::span<const double> beta) {
  const auto& grid = st.grid();
  if (alpha.size() != grid.size() || beta.size() != grid.size())
    throw std::invalid_argument("test function size does not match grid");
  if (alpha.back() != 0.0 || beta.back() != 0.0)
    throw std::invalid_argument("test functions must vanish at r = 1");
  GridFunction cross(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i)
    cross[i] = std::sqrt(f_prime(st.nl, st.u[i])) * alpha[i] * beta[i];
  return dirichlet_form(grid, st.op(), alpha, alpha) + dirichlet_form(grid, st.op(), beta, beta) -
         2.0 * std::sqrt(st.lambda) * integrate(grid, cross);
}

}  // namespace bbranch
