#pragma once

/**
 * @file disc.hpp
 * @brief Radial finite-volume discretization of -Delta on the unit ball in R^N.
 *
 * Nodes r_i = i h, i = 0..n, h = 1/n. Nodes 0..n-1 carry unknowns; node n is the
 * Dirichlet boundary r = 1. Every grid function stores all n + 1 nodal values.
 *
 * Cell i is the shell [r_{i-1/2}, r_{i+1/2}] (the ball of radius h/2 for i = 0, the
 * half shell [1 - h/2, 1] for i = n). Its reduced volume
 *   V_i = (r_{i+1/2}^N - r_{i-1/2}^N) / N
 * is the quadrature weight against r^{N-1} dr, so sum V_i = 1/N exactly. The operator
 *   (-Delta u)_i = -(1/V_i) [ r_{i+1/2}^{N-1} (u_{i+1}-u_i)/h - r_{i-1/2}^{N-1} (u_i-u_{i-1})/h ]
 * is exact on quadratics, reduces to -N u''(0) with the reflection u_{-1} = u_1 at the
 * centre, and W L is symmetric for W = diag(V).
 */

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace bbranch {

using GridFunction = std::vector<double>;

class RadialGrid {
 public:
  static constexpr std::size_t kMinNodes = 16;

  RadialGrid(std::size_t n, int dim) : n_(n), dim_(dim) {
    if (n < kMinNodes) throw std::invalid_argument("radial grid needs n >= 16");
    if (dim < 2) throw std::invalid_argument("dimension must be >= 2");
    h_ = 1.0 / static_cast<double>(n);
    r_.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) r_[i] = static_cast<double>(i) * h_;
    r_[n] = 1.0;

    weights_.resize(n + 1);
    weights_[0] = std::pow(0.5 * h_, dim) / dim;
    for (std::size_t i = 1; i < n; ++i) weights_[i] = shell_volume(r_[i] - 0.5 * h_, r_[i] + 0.5 * h_);
    weights_[n] = shell_volume(1.0 - 0.5 * h_, 1.0);

    const double half_dim = 0.5 * dim;
    sigma_ = 2.0 * std::pow(std::numbers::pi, half_dim) / std::tgamma(half_dim);
  }

  /// Number of unknown nodes (centre plus interior, boundary excluded).
  std::size_t n() const noexcept { return n_; }
  /// Number of stored nodes, n + 1.
  std::size_t size() const noexcept { return n_ + 1; }
  int dim() const noexcept { return dim_; }
  double h() const noexcept { return h_; }
  std::span<const double> r() const noexcept { return r_; }
  double r(std::size_t i) const noexcept { return r_[i]; }
  /// Quadrature weights against r^{N-1} dr on [0, 1].
  std::span<const double> weights() const noexcept { return weights_; }
  /// Surface measure of the unit sphere S^{N-1}.
  double sigma() const noexcept { return sigma_; }
  double ball_volume() const noexcept { return sigma_ / dim_; }

  GridFunction make(double value = 0.0) const { return GridFunction(size(), value); }

  template <class F>
  GridFunction sample(F&& fn) const {
    GridFunction out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = fn(r_[i]);
    return out;
  }

 private:
  // (b^N - a^N)/N = (b - a)/N * sum_k b^k a^{N-1-k}, free of cancellation.
  double shell_volume(double a, double b) const {
    double sum = 0.0;
    for (int k = 0; k < dim_; ++k) sum += std::pow(b, k) * std::pow(a, dim_ - 1 - k);
    return (b - a) * sum / dim_;
  }

  std::size_t n_;
  int dim_;
  double h_ = 0;
  double sigma_ = 0;
  std::vector<double> r_;
  std::vector<double> weights_;
};

/// Tridiagonal -Delta_h acting on the unknown nodes, with the Dirichlet value taken
/// from node n of the argument.
class RadialOperator {
 public:
  explicit RadialOperator(const RadialGrid& grid) : n_(grid.n()) {
    const int dim = grid.dim();
    const double h = grid.h();
    const auto w = grid.weights();
    lower_.assign(n_, 0.0);
    diag_.assign(n_, 0.0);
    upper_.assign(n_, 0.0);
    weight_.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(n_));
    for (std::size_t i = 0; i < n_; ++i) {
      const double ri = grid.r(i);
      const double right = std::pow(ri + 0.5 * h, dim - 1) / h;
      const double left = i == 0 ? 0.0 : std::pow(ri - 0.5 * h, dim - 1) / h;
      lower_[i] = -left / w[i];
      upper_[i] = -right / w[i];
      diag_[i] = (left + right) / w[i];
    }
  }

  std::size_t n() const noexcept { return n_; }
  std::span<const double> lower() const noexcept { return lower_; }
  std::span<const double> diag() const noexcept { return diag_; }
  std::span<const double> upper() const noexcept { return upper_; }
  /// Unknown-node quadrature weights (the W of the symmetric form W L).
  std::span<const double> weight() const noexcept { return weight_; }

  /// -Delta_h u at nodes 0..n-1; the boundary entry of the result is set to 0.
  GridFunction apply(std::span<const double> u) const {
    check_size(u.size());
    GridFunction out(n_ + 1, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = diag_[i] * u[i] + upper_[i] * u[i + 1];
      if (i > 0) acc += lower_[i] * u[i - 1];
      out[i] = acc;
    }
    return out;
  }

  /// Solves -Delta_h u = rhs with u = 0 at r = 1 (Thomas algorithm; M-matrix, no pivoting).
  GridFunction solve(std::span<const double> rhs) const {
    if (rhs.size() != n_ && rhs.size() != n_ + 1)
      throw std::invalid_argument("rhs size does not match grid");
    std::vector<double> c(n_), d(n_);
    double denom = diag_[0];
    c[0] = upper_[0] / denom;
    d[0] = rhs[0] / denom;
    for (std::size_t i = 1; i < n_; ++i) {
      denom = diag_[i] - lower_[i] * c[i - 1];
      c[i] = upper_[i] / denom;
      d[i] = (rhs[i] - lower_[i] * d[i - 1]) / denom;
    }
    GridFunction u(n_ + 1, 0.0);
    u[n_ - 1] = d[n_ - 1];
    for (std::size_t i = n_ - 1; i-- > 0;) u[i] = d[i] - c[i] * u[i + 1];
    return u;
  }

  /// Off-diagonal of the symmetric similarity transform S = W^{1/2} L W^{-1/2}.
  std::vector<double> symmetric_offdiag() const {
    std::vector<double> off(n_ > 0 ? n_ - 1 : 0);
    for (std::size_t i = 0; i + 1 < n_; ++i)
      off[i] = weight_[i] * upper_[i] / std::sqrt(weight_[i] * weight_[i + 1]);
    return off;
  }

 private:
  void check_size(std::size_t sz) const {
    if (sz != n_ + 1) throw std::invalid_argument("grid function size does not match grid");
  }

  std::size_t n_;
  std::vector<double> lower_, diag_, upper_, weight_;
};

inline RadialOperator neg_laplacian(const RadialGrid& grid) { return RadialOperator(grid); }

inline RadialGrid build_grid(std::size_t n, int dim) { return RadialGrid(n, dim); }

/// sigma_N * sum_i w_i phi_i, the integral of a radial function over the unit ball.
inline double integrate(const RadialGrid& grid, std::span<const double> phi) {
  if (phi.size() != grid.size()) throw std::invalid_argument("grid function size does not match grid");
  const auto w = grid.weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    if (!std::isfinite(phi[i])) throw std::domain_error("non-finite value in integrand");
    acc += w[i] * phi[i];
  }
  return grid.sigma() * acc;
}

/// Discrete Dirichlet form  int grad a . grad b, equal to int a (-Delta_h b) by summation
/// by parts; evaluated through the operator's face fluxes so no cancellation occurs.
/// Both arguments must vanish at r = 1.
inline double dirichlet_form(const RadialGrid& grid, const RadialOperator& op,
                             std::span<const double> a, std::span<const double> b) {
  if (a.size() != grid.size() || b.size() != grid.size())
    throw std::invalid_argument("grid function size does not match grid");
  if (a.back() != 0.0 || b.back() != 0.0)
    throw std::invalid_argument("dirichlet_form arguments must vanish at r = 1");
  const auto w = op.weight();
  const auto up = op.upper();
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.n(); ++i) {
    const double face = -w[i] * up[i];  // r_{i+1/2}^{N-1} / h
    acc += face * (a[i + 1] - a[i]) * (b[i + 1] - b[i]);
  }
  return grid.sigma() * acc;
}

/// Immutable grid + operator pair shared by every state computed on it.
struct Discretization {
  Discretization(std::size_t n, int dim) : grid(n, dim), op(grid) {}
  RadialGrid grid;
  RadialOperator op;
};

inline double sup_norm(std::span<const double> f) {
  double m = 0.0;
  for (double x : f) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace bbranch
