#pragma once

// Banded linear algebra used by the Newton solver and the eigen solvers.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace bbranch::banded {

struct Mat2 {
  double a = 0, b = 0, c = 0, d = 0;  // [[a, b], [c, d]]

  double det() const { return a * d - b * c; }
  Mat2 inverse() const {
    const double dt = det();
    if (dt == 0.0 || !std::isfinite(dt)) throw std::runtime_error("singular 2x2 pivot block");
    return {d / dt, -b / dt, -c / dt, a / dt};
  }
  friend Mat2 operator*(const Mat2& x, const Mat2& y) {
    return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c,
            x.c * y.b + x.d * y.d};
  }
  friend Mat2 operator-(const Mat2& x, const Mat2& y) {
    return {x.a - y.a, x.b - y.b, x.c - y.c, x.d - y.d};
  }
};

using Vec2 = std::array<double, 2>;

inline Vec2 operator*(const Mat2& m, const Vec2& v) {
  return {m.a * v[0] + m.b * v[1], m.c * v[0] + m.d * v[1]};
}

/// Block tridiagonal system with 2x2 blocks, factored once by block elimination
/// (no pivoting) and reusable for several right-hand sides.
class BlockTridiagonal {
 public:
  BlockTridiagonal(std::vector<Mat2> lower, std::vector<Mat2> diag, std::vector<Mat2> upper)
      : lower_(std::move(lower)), upper_(std::move(upper)) {
    const std::size_t m = diag.size();
    if (lower_.size() != m || upper_.size() != m)
      throw std::invalid_argument("block tridiagonal size mismatch");
    pivots_inv_.resize(m);
    gamma_.resize(m);
    Mat2 piv = diag[0];
    pivots_inv_[0] = piv.inverse();
    gamma_[0] = pivots_inv_[0] * upper_[0];
    for (std::size_t i = 1; i < m; ++i) {
      piv = diag[i] - lower_[i] * gamma_[i - 1];
      pivots_inv_[i] = piv.inverse();
      gamma_[i] = pivots_inv_[i] * upper_[i];
    }
  }

  std::size_t blocks() const noexcept { return pivots_inv_.size(); }

  /// Solves in place; rhs holds blocks() pairs.
  std::vector<Vec2> solve(std::vector<Vec2> rhs) const {
    const std::size_t m = blocks();
    if (rhs.size() != m) throw std::invalid_argument("rhs size mismatch");
    rhs[0] = pivots_inv_[0] * rhs[0];
    for (std::size_t i = 1; i < m; ++i) {
      const Vec2 t = lower_[i] * rhs[i - 1];
      rhs[i] = pivots_inv_[i] * Vec2{rhs[i][0] - t[0], rhs[i][1] - t[1]};
    }
    for (std::size_t i = m - 1; i-- > 0;) {
      const Vec2 t = gamma_[i] * rhs[i + 1];
      rhs[i] = {rhs[i][0] - t[0], rhs[i][1] - t[1]};
    }
    return rhs;
  }

 private:
  std::vector<Mat2> lower_, upper_;
  std::vector<Mat2> pivots_inv_, gamma_;
};

/// Symmetric banded matrix stored by diagonals: band[k][i] = M(i, i + k).
class SymmetricBand {
 public:
  SymmetricBand(std::size_t n, std::size_t bandwidth) : n_(n), band_(bandwidth + 1) {
    for (std::size_t k = 0; k <= bandwidth; ++k) band_[k].assign(n > k ? n - k : 0, 0.0);
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t bandwidth() const noexcept { return band_.size() - 1; }
  std::vector<double>& diagonal(std::size_t k) { return band_[k]; }
  const std::vector<double>& diagonal(std::size_t k) const { return band_[k]; }

  double at(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    const std::size_t k = j - i;
    return k < band_.size() ? band_[k][i] : 0.0;
  }

  std::vector<double> multiply(std::span<const double> x) const {
    std::vector<double> y(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) y[i] = band_[0][i] * x[i];
    for (std::size_t k = 1; k < band_.size(); ++k)
      for (std::size_t i = 0; i + k < n_; ++i) {
        y[i] += band_[k][i] * x[i + k];
        y[i + k] += band_[k][i] * x[i];
      }
    return y;
  }

  /// Gershgorin lower bound on the spectrum.
  double gershgorin_lower() const {
    double lo = HUGE_VAL;
    for (std::size_t i = 0; i < n_; ++i) {
      double radius = 0.0;
      for (std::size_t k = 1; k < band_.size(); ++k) {
        if (i + k < n_) radius += std::abs(band_[k][i]);
        if (i >= k) radius += std::abs(band_[k][i - k]);
      }
      lo = std::min(lo, band_[0][i] - radius);
    }
    return lo;
  }

 private:
  std::size_t n_;
  std::vector<std::vector<double>> band_;
};

/// LDL^T of (M - shift I) without pivoting. The count of negative pivots equals the
/// number of eigenvalues of M below the shift (Sylvester inertia).
class ShiftedLDLT {
 public:
  ShiftedLDLT(const SymmetricBand& m, double shift) : n_(m.n()), b_(m.bandwidth()) {
    // Row-major band of L below the diagonal: l_[i][k-1] = L(i, i - k).
    d_.assign(n_, 0.0);
    l_.assign(n_ * b_, 0.0);
    const double tiny = 1e-300;
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t jmin = i >= b_ ? i - b_ : 0;
      for (std::size_t j = jmin; j < i; ++j) {
        // L(i,j) = (M(i,j) - sum_{k<j} L(i,k) D(k) L(j,k)) / D(j)
        double acc = m.at(i, j);
        const std::size_t kmin = i >= b_ ? i - b_ : 0;
        for (std::size_t k = kmin; k < j; ++k) acc -= lij(i, k) * d_[k] * lij(j, k);
        lij_ref(i, j) = acc / d_[j];
      }
      double acc = m.at(i, i) - shift;
      for (std::size_t k = jmin; k < i; ++k) acc -= lij(i, k) * lij(i, k) * d_[k];
      if (acc == 0.0) acc = -tiny;
      d_[i] = acc;
      if (acc < 0.0) ++negatives_;
    }
  }

  std::size_t negative_pivots() const noexcept { return negatives_; }

  std::vector<double> solve(std::vector<double> x) const {
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t kmin = i >= b_ ? i - b_ : 0;
      for (std::size_t k = kmin; k < i; ++k) x[i] -= lij(i, k) * x[k];
    }
    for (std::size_t i = 0; i < n_; ++i) x[i] /= d_[i];
    for (std::size_t i = n_; i-- > 0;) {
      const std::size_t kmax = std::min(n_, i + b_ + 1);
      for (std::size_t k = i + 1; k < kmax; ++k) x[i] -= lij(k, i) * x[k];
    }
    return x;
  }

 private:
  double lij(std::size_t i, std::size_t j) const {
    if (i == j) return 1.0;
    if (i < j || i - j > b_) return 0.0;
    return l_[i * b_ + (i - j - 1)];
  }
  double& lij_ref(std::size_t i, std::size_t j) { return l_[i * b_ + (i - j - 1)]; }

  std::size_t n_, b_;
  std::vector<double> d_, l_;
  std::size_t negatives_ = 0;
};

}  // namespace bbranch::banded
