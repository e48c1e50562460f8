#pragma once

/**
 * @file solve.hpp
 * @brief Newton solver for the coupled system -Delta u = v, -Delta v = lambda f(u)
 * and pseudo-arclength continuation of the minimal branch through its fold.
 *
 * Unknowns are interleaved as (u_i, v_i), i = 0..n-1, so the Jacobian
 *   [[ L, -I ], [ -lambda f'(u), L ]]
 * is block tridiagonal with 2x2 blocks and is solved by block elimination in O(n).
 *
 * Convergence is measured on the Green's-function form of the residual,
 *   max( |u - L^{-1} v|_inf, |v - lambda L^{-1} f(u)|_inf ),
 * which is O(1)-scaled; the raw residual |L u - v|_inf carries round-off of order
 * eps * |L| ~ 1e-16 / h^2 and cannot resolve 1e-10 on fine grids.
 */

#include "bbranch/banded.hpp"
#include "bbranch/disc.hpp"
#include "bbranch/errors.hpp"
#include "bbranch/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bbranch {

struct SolutionState {
  double lambda = 0.0;
  GridFunction u, v;
  double newton_residual = 0.0;
  int newton_iterations = 0;
  Nonlinearity nl = Nonlinearity::exponential();
  std::shared_ptr<const Discretization> disc;

  const RadialGrid& grid() const { return disc->grid; }
  const RadialOperator& op() const { return disc->op; }
  double u0() const { return u.front(); }
  double max_u() const { return *std::max_element(u.begin(), u.end()); }
};

struct NewtonOptions {
  double tol = 1e-10;
  int max_iter = 50;
  int max_halvings = 30;
};

namespace detail {

inline void check_state_domain(const Nonlinearity& nl, const GridFunction& u) {
  if (nl.family() == Family::PowerS) {
    for (double x : u)
      if (!(x < 1.0)) throw TouchdownError("iterate reached u >= 1 (touchdown)");
  } else if (nl.family() == Family::PowerR) {
    for (double x : u)
      if (!(x > -1.0)) throw DomainError("iterate left the domain u > -1");
  }
  for (double x : u)
    if (!std::isfinite(x)) throw DomainError("non-finite iterate");
}

inline bool in_domain(const Nonlinearity& nl, const GridFunction& u) {
  try {
    check_state_domain(nl, u);
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

inline GridFunction apply_f(const Nonlinearity& nl, const GridFunction& u) {
  GridFunction out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = f_eval(nl, u[i]);
  return out;
}

}  // namespace detail

/// Green's-function residual of (u, v) at lambda; see the file comment.
inline double fixed_point_residual(const Discretization& disc, const Nonlinearity& nl, double lambda,
                                   const GridFunction& u, const GridFunction& v) {
  const std::size_t n = disc.grid.n();
  const auto lv = disc.op.solve(v);
  auto fu = detail::apply_f(nl, u);
  for (double& x : fu) x *= lambda;
  const auto lf = disc.op.solve(fu);
  double res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    res = std::max(res, std::abs(u[i] - lv[i]));
    res = std::max(res, std::abs(v[i] - lf[i]));
  }
  return res;
}

/// Raw discrete residuals (L u - v, L v - lambda f(u)) at the unknown nodes.
struct RawResidual {
  std::vector<banded::Vec2> blocks;
  double sup_u = 0, sup_v = 0;
};

inline RawResidual raw_residual(const Discretization& disc, const Nonlinearity& nl, double lambda,
                                const GridFunction& u, const GridFunction& v) {
  const std::size_t n = disc.grid.n();
  const auto lu = disc.op.apply(u);
  const auto lv = disc.op.apply(v);
  RawResidual r;
  r.blocks.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.blocks[i] = {lu[i] - v[i], lv[i] - lambda * f_eval(nl, u[i])};
    r.sup_u = std::max(r.sup_u, std::abs(r.blocks[i][0]));
    r.sup_v = std::max(r.sup_v, std::abs(r.blocks[i][1]));
  }
  return r;
}

namespace detail {

/// The raw residual blocks rebuilt as L applied to the Green's-function residual.
/// Equal to raw_residual in exact arithmetic; near a solution its round-off scales
/// with the residual itself rather than with |L| |v|, which keeps Newton from
/// stalling at a floor of order eps |L| |v| when v is large.
inline std::vector<banded::Vec2> newton_rhs(const Discretization& disc, const Nonlinearity& nl,
                                            double lambda, const GridFunction& u,
                                            const GridFunction& v) {
  const std::size_t n = disc.grid.n();
  const auto lv = disc.op.solve(v);
  auto fu = apply_f(nl, u);
  for (double& x : fu) x *= lambda;
  const auto lf = disc.op.solve(fu);
  GridFunction r1(n + 1, 0.0), r2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    r1[i] = u[i] - lv[i];
    r2[i] = v[i] - lf[i];
  }
  const auto a = disc.op.apply(r1);
  const auto b = disc.op.apply(r2);
  std::vector<banded::Vec2> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {a[i], b[i]};
  return out;
}

inline banded::BlockTridiagonal jacobian(const Discretization& disc, const Nonlinearity& nl,
                                         double lambda, const GridFunction& u) {
  const auto& op = disc.op;
  const std::size_t n = op.n();
  std::vector<banded::Mat2> lower(n), diag(n), upper(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = op.diag()[i];
    diag[i] = {d, -1.0, -lambda * f_prime(nl, u[i]), d};
    if (i > 0) lower[i] = {op.lower()[i], 0.0, 0.0, op.lower()[i]};
    if (i + 1 < n) upper[i] = {op.upper()[i], 0.0, 0.0, op.upper()[i]};
  }
  return banded::BlockTridiagonal(std::move(lower), std::move(diag), std::move(upper));
}

/// J x for x given as blocks (boundary values zero).
inline std::vector<banded::Vec2> jacobian_apply(const Discretization& disc, const Nonlinearity& nl,
                                                double lambda, const GridFunction& u,
                                                const std::vector<banded::Vec2>& x) {
  const auto& op = disc.op;
  const std::size_t n = op.n();
  std::vector<banded::Vec2> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double lu = op.diag()[i] * x[i][0];
    double lv = op.diag()[i] * x[i][1];
    if (i > 0) {
      lu += op.lower()[i] * x[i - 1][0];
      lv += op.lower()[i] * x[i - 1][1];
    }
    if (i + 1 < n) {
      lu += op.upper()[i] * x[i + 1][0];
      lv += op.upper()[i] * x[i + 1][1];
    }
    out[i] = {lu - x[i][1], lv - lambda * f_prime(nl, u[i]) * x[i][0]};
  }
  return out;
}

}  // namespace detail

/// Damped Newton at fixed lambda. Starts from init when given, from zero otherwise.
inline SolutionState newton_solve(std::shared_ptr<const Discretization> disc, const Nonlinearity& nl,
                                  double lambda, const SolutionState* init = nullptr,
                                  const NewtonOptions& opts = {}) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
  const std::size_t n = disc->grid.n();
  SolutionState st;
  st.lambda = lambda;
  st.nl = nl;
  st.disc = disc;
  if (init != nullptr) {
    if (init->u.size() != n + 1 || init->v.size() != n + 1)
      throw std::invalid_argument("initial state does not match grid");
    st.u = init->u;
    st.v = init->v;
    st.u[n] = 0.0;
    st.v[n] = 0.0;
    detail::check_state_domain(nl, st.u);
  } else {
    st.u = disc->grid.make();
    st.v = disc->grid.make();
  }

  double res = fixed_point_residual(*disc, nl, lambda, st.u, st.v);
  for (int it = 0; it < opts.max_iter; ++it) {
    if (res <= opts.tol) {
      st.newton_residual = res;
      st.newton_iterations = it;
      return st;
    }
    const auto jac = detail::jacobian(*disc, nl, lambda, st.u);
    const auto delta = jac.solve(detail::newton_rhs(*disc, nl, lambda, st.u, st.v));

    double step = 1.0;
    bool accepted = false;
    bool domain_rejections_only = true;
    for (int k = 0; k <= opts.max_halvings; ++k, step *= 0.5) {
      GridFunction u = st.u, v = st.v;
      for (std::size_t i = 0; i < n; ++i) {
        u[i] -= step * delta[i][0];
        v[i] -= step * delta[i][1];
      }
      if (!detail::in_domain(nl, u)) continue;
      domain_rejections_only = false;
      const double trial = fixed_point_residual(*disc, nl, lambda, u, v);
      if (trial <= (1.0 - 1e-4 * step) * res || trial <= opts.tol) {
        st.u = std::move(u);
        st.v = std::move(v);
        res = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (domain_rejections_only)
        throw TouchdownError("Newton step leaves the admissible range at every damping level");
      throw DivergenceError("Newton line search failed (lambda beyond the fold or bad start)", res);
    }
  }
  if (res <= opts.tol) {
    st.newton_residual = res;
    st.newton_iterations = opts.max_iter;
    return st;
  }
  throw DivergenceError("Newton did not converge within max_iter", res);
}

/// Linear constraint c_lambda * lambda + c_u0 * u(0) = target used to border the system.
struct ArcConstraint {
  double c_lambda = 0.0;
  double c_u0 = 1.0;
  double target = 0.0;
  double eval(double lambda, double u0) const { return c_lambda * lambda + c_u0 * u0 - target; }
};

namespace detail {

struct BorderedStep {
  std::vector<banded::Vec2> du;
  double dlambda = 0.0;
};

inline BorderedStep bordered_solve(const banded::BlockTridiagonal& jac, const std::vector<banded::Vec2>& jl,
                                   const std::vector<banded::Vec2>& rhs, double g,
                                   const ArcConstraint& c) {
  const auto a = jac.solve(rhs);
  const auto b = jac.solve(jl);
  BorderedStep s;
  s.dlambda = (-g + c.c_u0 * a[0][0]) / (c.c_lambda - c.c_u0 * b[0][0]);
  s.du.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    s.du[i] = {-a[i][0] - b[i][0] * s.dlambda, -a[i][1] - b[i][1] * s.dlambda};
  return s;
}

}  // namespace detail

/// Newton on the system bordered by an arclength-type constraint; lambda is an unknown.
/// Returns nullopt when the corrector fails to converge or leaves the domain.
inline std::optional<SolutionState> bordered_newton(std::shared_ptr<const Discretization> disc,
                                                    const Nonlinearity& nl, SolutionState guess,
                                                    const ArcConstraint& c, double tol = 1e-10,
                                                    int max_iter = 12) {
  const std::size_t n = disc->grid.n();
  guess.disc = disc;
  guess.nl = nl;
  guess.u[n] = 0.0;
  guess.v[n] = 0.0;
  if (!detail::in_domain(nl, guess.u)) return std::nullopt;
  const double gscale = 1.0 + std::abs(c.target);
  try {
    for (int it = 0; it <= max_iter; ++it) {
      if (!(guess.lambda >= 0.0)) return std::nullopt;
      const double res = fixed_point_residual(*disc, nl, guess.lambda, guess.u, guess.v);
      const double g = c.eval(guess.lambda, guess.u[0]);
      if (res <= tol && std::abs(g) <= 1e-12 * gscale) {
        guess.newton_residual = res;
        guess.newton_iterations = it;
        return guess;
      }
      if (it == max_iter || !std::isfinite(res)) break;
      const auto rb = detail::newton_rhs(*disc, nl, guess.lambda, guess.u, guess.v);
      const auto jac = detail::jacobian(*disc, nl, guess.lambda, guess.u);
      std::vector<banded::Vec2> jl(n);
      for (std::size_t i = 0; i < n; ++i) jl[i] = {0.0, -f_eval(nl, guess.u[i])};
      auto step = detail::bordered_solve(jac, jl, rb, g, c);
      // One sweep of iterative refinement on the bordered system.
      {
        auto jd = detail::jacobian_apply(*disc, nl, guess.lambda, guess.u, step.du);
        std::vector<banded::Vec2> rr(n);
        for (std::size_t i = 0; i < n; ++i)
          rr[i] = {jd[i][0] + jl[i][0] * step.dlambda + rb[i][0],
                   jd[i][1] + jl[i][1] * step.dlambda + rb[i][1]};
        const double rg = c.c_u0 * step.du[0][0] + c.c_lambda * step.dlambda + g;
        const auto corr = detail::bordered_solve(jac, jl, rr, rg, c);
        for (std::size_t i = 0; i < n; ++i) {
          step.du[i][0] += corr.du[i][0];
          step.du[i][1] += corr.du[i][1];
        }
        step.dlambda += corr.dlambda;
      }
      for (std::size_t i = 0; i < n; ++i) {
        guess.u[i] += step.du[i][0];
        guess.v[i] += step.du[i][1];
      }
      guess.lambda += step.dlambda;
      if (!detail::in_domain(nl, guess.u)) return std::nullopt;
    }
  } catch (const std::runtime_error&) {
    return std::nullopt;
  } catch (const std::domain_error&) {
    return std::nullopt;
  }
  return std::nullopt;
}

/// Solution of the bordered system with u(0) prescribed; lambda is solved for.
inline std::optional<SolutionState> solve_at_center_value(std::shared_ptr<const Discretization> disc,
                                                          const Nonlinearity& nl, double u0,
                                                          SolutionState guess, double tol = 1e-10) {
  return bordered_newton(std::move(disc), nl, std::move(guess), ArcConstraint{0.0, 1.0, u0}, tol, 25);
}

struct ContinuationParams {
  double lambda_start_fraction = 0.02;  ///< first state at this fraction of lambda_ref
  double ds_initial = 0.02;
  double ds_max = 0.05;
  double ds_min = 1e-12;
  double grow = 1.5;
  int fast_corrector_iters = 4;
  int corrector_max_iter = 12;
  int max_steps = 4000;
  int steps_after_fold = 3;
  double delta_touch = 1e-3;
  NewtonOptions newton{};
};

struct BranchRecord {
  std::vector<SolutionState> states;
  std::vector<double> arclength;
  double lambda_star_estimate = 0.0;
  std::optional<std::size_t> fold_index;
  std::optional<SolutionState> fold_state;  ///< refined turning point
  Nonlinearity nl = Nonlinearity::exponential();
  int dim = 0;
  std::size_t n = 0;
  double lambda_ref = 1.0;  ///< 1 / u_1(0), the linear-regime scale for lambda
  bool touchdown = false;
  bool partial = false;

  /// Last index on the pre-fold segment (inclusive).
  std::size_t prefold_end() const {
    return fold_index ? *fold_index : (states.empty() ? 0 : states.size() - 1);
  }
};

/// Continuation gave up because the step fell below ds_min; holds the partial branch.
class StallError : public std::runtime_error {
 public:
  StallError(const std::string& what, BranchRecord partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const BranchRecord& partial() const noexcept { return partial_; }

 private:
  BranchRecord partial_;
};

/// Discrete solution of the linear problem Delta^2 u1 = 1 with Navier conditions.
inline GridFunction linear_response(const Discretization& disc) {
  const auto w = disc.op.solve(disc.grid.make(1.0));
  return disc.op.solve(w);
}

namespace detail {

inline double scaled_distance(const SolutionState& a, const SolutionState& b, double lambda_ref) {
  const double dl = (a.lambda - b.lambda) / lambda_ref;
  const double du = a.u0() - b.u0();
  return std::hypot(dl, du);
}

inline SolutionState blend(const SolutionState& a, const SolutionState& b, double wt) {
  SolutionState s = a;
  s.lambda = a.lambda + wt * (b.lambda - a.lambda);
  for (std::size_t i = 0; i < s.u.size(); ++i) {
    s.u[i] = a.u[i] + wt * (b.u[i] - a.u[i]);
    s.v[i] = a.v[i] + wt * (b.v[i] - a.v[i]);
  }
  return s;
}

/// Guess for u(0) = x by linear interpolation between the two pool states nearest in u(0).
inline SolutionState guess_at_u0(const std::vector<SolutionState>& pool, double x) {
  std::vector<const SolutionState*> sorted;
  for (const auto& s : pool) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(), [x](auto* a, auto* b) {
    return std::abs(a->u0() - x) < std::abs(b->u0() - x);
  });
  const auto& a = *sorted[0];
  if (sorted.size() < 2 || sorted[1]->u0() == a.u0()) return a;
  const auto& b = *sorted[1];
  return blend(a, b, (x - a.u0()) / (b.u0() - a.u0()));
}

struct Vertex {
  double x, y;
};

/// Vertex of the parabola through three points with distinct abscissae.
inline Vertex parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
  const double d01 = (y1 - y0) / (x1 - x0);
  const double d12 = (y2 - y1) / (x2 - x1);
  const double a = (d12 - d01) / (x2 - x0);
  const double b = d01 - a * (x0 + x1);
  if (a == 0.0) return {x1, y1};
  const double xv = -b / (2.0 * a);
  const double yv = y0 + (xv - x0) * (d01 + a * (xv - x1));
  return {xv, yv};
}

/// Locates the turning point by iterated parabolic interpolation of lambda(u(0)) with
/// constrained re-solves on shrinking stencils. Falls back to the stored states on failure.
inline void refine_fold(BranchRecord& br, const ContinuationParams& params) {
  const std::size_t k = *br.fold_index;
  const auto& s = br.states;
  Vertex vx = parabola_vertex(s[k - 1].u0(), s[k - 1].lambda, s[k].u0(), s[k].lambda,
                              s[k + 1].u0(), s[k + 1].lambda);
  br.lambda_star_estimate = std::max(vx.y, s[k].lambda);
  if (!(vx.x > s[k - 1].u0() && vx.x < s[k + 1].u0())) vx.x = s[k].u0();

  auto disc = s[k].disc;
  std::vector<SolutionState> pool(s.begin() + static_cast<std::ptrdiff_t>(k - 1),
                                  s.begin() + static_cast<std::ptrdiff_t>(k + 2));
  double delta = 0.25 * std::min(s[k].u0() - s[k - 1].u0(), s[k + 1].u0() - s[k].u0());
  const double tol = params.newton.tol;
  for (int round = 0; round < 6 && delta > 1e-7 * (1.0 + std::abs(vx.x)); ++round) {
    std::vector<SolutionState> pts;
    for (double x : {vx.x - delta, vx.x, vx.x + delta}) {
      auto sol = solve_at_center_value(disc, br.nl, x, guess_at_u0(pool, x), tol);
      if (!sol) return;
      pts.push_back(*sol);
    }
    const Vertex next = parabola_vertex(pts[0].u0(), pts[0].lambda, pts[1].u0(), pts[1].lambda,
                                        pts[2].u0(), pts[2].lambda);
    pool.insert(pool.end(), pts.begin(), pts.end());
    if (!std::isfinite(next.x) || std::abs(next.x - vx.x) > 4.0 * delta) break;
    vx = next;
    br.lambda_star_estimate = std::max(next.y, pts[1].lambda);
    delta *= 0.125;
  }
  if (auto fold = solve_at_center_value(disc, br.nl, vx.x, guess_at_u0(pool, vx.x), tol))
    br.fold_state = std::move(*fold);
}

/// Splices the refined turning point into the state list so that fold_index names it.
/// Neighbours that the refinement shows to lie on the wrong side in lambda are dropped.
inline void insert_fold_state(BranchRecord& br) {
  const SolutionState& fold = *br.fold_state;
  auto& s = br.states;
  std::vector<SolutionState> pre, post;
  for (auto& st : s) {
    if (st.u0() < fold.u0()) {
      if (st.lambda < fold.lambda) pre.push_back(std::move(st));
    } else if (st.u0() > fold.u0() && st.lambda <= fold.lambda) {
      post.push_back(std::move(st));
    }
  }
  s = std::move(pre);
  br.fold_index = s.size();
  s.push_back(fold);
  for (auto& st : post) s.push_back(std::move(st));
  br.arclength.assign(1, 0.0);
  for (std::size_t k = 1; k < s.size(); ++k)
    br.arclength.push_back(br.arclength.back() + scaled_distance(s[k - 1], s[k], br.lambda_ref));
  br.lambda_star_estimate = std::max(br.lambda_star_estimate, fold.lambda);
}

}  // namespace detail

/// Traces the minimal branch from small lambda through the first fold.
inline BranchRecord continue_branch(std::shared_ptr<const Discretization> disc, const Nonlinearity& nl,
                                    const ContinuationParams& params = {}) {
  BranchRecord br;
  br.nl = nl;
  br.dim = disc->grid.dim();
  br.n = disc->grid.n();
  br.lambda_ref = 1.0 / linear_response(*disc).front();
  const double lref = br.lambda_ref;

  const double lambda0 = params.lambda_start_fraction * lref;
  auto s0 = newton_solve(disc, nl, lambda0, nullptr, params.newton);
  auto s1 = newton_solve(disc, nl, 2.0 * lambda0, &s0, params.newton);
  br.states.push_back(std::move(s0));
  br.arclength.push_back(0.0);
  br.arclength.push_back(detail::scaled_distance(br.states[0], s1, lref));
  br.states.push_back(std::move(s1));

  double ds = params.ds_initial;
  int after_fold = 0;
  for (int step = 0; step < params.max_steps; ++step) {
    const auto& prev = br.states[br.states.size() - 2];
    const auto& cur = br.states.back();
    const double span = detail::scaled_distance(prev, cur, lref);
    const double tl = (cur.lambda - prev.lambda) / lref / span;
    const double tu = (cur.u0() - prev.u0()) / span;

    std::optional<SolutionState> next;
    while (!next) {
      if (ds < params.ds_min) {
        br.partial = true;
        br.lambda_star_estimate = cur.lambda;
        throw StallError("continuation step underflow", br);
      }
      SolutionState guess = detail::blend(cur, prev, -ds / span);
      const ArcConstraint c{tl / lref, tu, tl * cur.lambda / lref + tu * cur.u0() + ds};
      next = bordered_newton(disc, nl, std::move(guess), c, params.newton.tol,
                             params.corrector_max_iter);
      if (next) {
        // The minimal branch is nonnegative; a sign change means the corrector jumped.
        const double floor = -1e-12 * (1.0 + sup_norm(next->u));
        const bool nonneg = std::all_of(next->u.begin(), next->u.end(), [&](double x) { return x >= floor; });
        if (!nonneg || next->u0() <= cur.u0()) next.reset();
      }
      if (!next) ds *= 0.5;
    }

    const int iters = next->newton_iterations;
    br.arclength.push_back(br.arclength.back() + detail::scaled_distance(cur, *next, lref));
    const bool decreasing = next->lambda < cur.lambda;
    br.states.push_back(std::move(*next));
    if (iters <= params.fast_corrector_iters) ds = std::min(ds * params.grow, params.ds_max);

    if (!br.fold_index && decreasing) br.fold_index = br.states.size() - 2;
    if (br.fold_index && ++after_fold >= params.steps_after_fold) break;
    if (nl.family() == Family::PowerS && br.states.back().max_u() > 1.0 - params.delta_touch) {
      br.touchdown = true;
      break;
    }
  }

  if (br.fold_index && *br.fold_index >= 1) {
    detail::refine_fold(br, params);
    if (br.fold_state) detail::insert_fold_state(br);
  } else {
    br.fold_index.reset();
    double best = 0.0;
    for (const auto& s : br.states) best = std::max(best, s.lambda);
    br.lambda_star_estimate = best;
    if (!br.touchdown) br.partial = true;
  }
  return br;
}

/// Centred difference (u_{k+1} - u_k)/(lambda_{k+1} - lambda_k), valid at the midpoint state.
struct BranchDerivative {
  GridFunction phi, psi;  ///< rescaled so that |phi|_inf = 1
  double scale = 1.0;     ///< sup-norm of the unscaled difference quotient
  double lambda_mid = 0.0;
  double delta_lambda = 0.0;
  GridFunction u_mid, v_mid;
};

inline BranchDerivative branch_derivative(const BranchRecord& br, std::size_t index) {
  if (index + 1 >= br.states.size()) throw std::out_of_range("branch index out of range");
  if (index + 1 > br.prefold_end())
    throw std::invalid_argument("branch derivative indices straddle the fold");
  const auto& a = br.states[index];
  const auto& b = br.states[index + 1];
  BranchDerivative d;
  d.delta_lambda = b.lambda - a.lambda;
  if (!(d.delta_lambda > 0.0)) throw std::invalid_argument("lambda not increasing between states");
  d.lambda_mid = 0.5 * (a.lambda + b.lambda);
  const std::size_t sz = a.u.size();
  d.phi.resize(sz);
  d.psi.resize(sz);
  d.u_mid.resize(sz);
  d.v_mid.resize(sz);
  for (std::size_t i = 0; i < sz; ++i) {
    d.phi[i] = (b.u[i] - a.u[i]) / d.delta_lambda;
    d.psi[i] = (b.v[i] - a.v[i]) / d.delta_lambda;
    d.u_mid[i] = 0.5 * (a.u[i] + b.u[i]);
    d.v_mid[i] = 0.5 * (a.v[i] + b.v[i]);
  }
  d.scale = sup_norm(d.phi);
  if (d.scale > 0.0) {
    for (double& x : d.phi) x /= d.scale;
    for (double& x : d.psi) x /= d.scale;
  }
  return d;
}

}  // namespace bbranch
