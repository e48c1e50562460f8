#pragma once

/**
 * @file model.hpp
 * @brief Nonlinearity families for Delta^2 u = lambda f(u) and the closed-form
 * critical-dimension thresholds attached to each family.
 *
 * Three families are supported:
 *  - Exponential: f(u) = e^u
 *  - PowerR:      f(u) = (1 + u)^p,   p > 1
 *  - PowerS:      f(u) = (1 - u)^(-p), p > 1, singular as u -> 1
 *
 * For each family the pointwise comparison function g with -Delta u >= sqrt(lambda) g(u)
 * and the threshold quantities (comparison coefficient s, branch exponent root
 * t* = s + sqrt(s^2 - s), dimension bound) are provided. Thresholds are evaluated in
 * long double.
 */

#include "bbranch/errors.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bbranch {

enum class Family { Exponential, PowerR, PowerS };

class Nonlinearity {
 public:
  static constexpr double kMaxExponent = 1.0e6;

  static Nonlinearity exponential() { return Nonlinearity(Family::Exponential, 0.0); }
  static Nonlinearity power_r(double p) { return Nonlinearity(Family::PowerR, p); }
  static Nonlinearity power_s(double p) { return Nonlinearity(Family::PowerS, p); }

  /// Accepts the CLI spellings "exp", "powr", "pows".
  static Nonlinearity parse(std::string_view family, double p) {
    if (family == "exp") return exponential();
    if (family == "powr") return power_r(p);
    if (family == "pows") return power_s(p);
    throw std::invalid_argument("unknown family '" + std::string(family) +
                                "' (expected exp, powr or pows)");
  }

  Family family() const noexcept { return family_; }
  /// Exponent; 0 for the exponential family.
  double p() const noexcept { return p_; }
  bool has_exponent() const noexcept { return family_ != Family::Exponential; }

  std::string tag() const {
    switch (family_) {
      case Family::Exponential: return "exp";
      case Family::PowerR: return "powr";
      case Family::PowerS: return "pows";
    }
    return "?";
  }

  /// Upper end of the admissible u range (exclusive); +inf for regular families.
  double upper_limit() const noexcept {
    return family_ == Family::PowerS ? 1.0 : HUGE_VAL;
  }

  bool operator==(const Nonlinearity&) const = default;

 private:
  Nonlinearity(Family family, double p) : family_(family), p_(p) {
    if (family_ != Family::Exponential) {
      if (!(p > 1.0)) throw std::invalid_argument("exponent p must satisfy p > 1");
      if (!(p <= kMaxExponent)) throw std::invalid_argument("exponent p must satisfy p <= 1e6");
    }
  }

  Family family_;
  double p_;
};

namespace detail {

inline void check_domain(const Nonlinearity& nl, double u) {
  if (!std::isfinite(u)) throw DomainError("non-finite argument u");
  if (nl.family() == Family::PowerS && !(u < 1.0))
    throw DomainError("singular nonlinearity evaluated at u >= 1");
  if (nl.family() == Family::PowerR && !(u > -1.0))
    throw DomainError("power nonlinearity evaluated at u <= -1");
}

}  // namespace detail

inline double f_eval(const Nonlinearity& nl, double u) {
  detail::check_domain(nl, u);
  switch (nl.family()) {
    case Family::Exponential: return std::exp(u);
    case Family::PowerR: return std::pow(1.0 + u, nl.p());
    case Family::PowerS: return std::pow(1.0 - u, -nl.p());
  }
  return 0.0;
}

inline double f_prime(const Nonlinearity& nl, double u) {
  detail::check_domain(nl, u);
  const double p = nl.p();
  switch (nl.family()) {
    case Family::Exponential: return std::exp(u);
    case Family::PowerR: return p * std::pow(1.0 + u, p - 1.0);
    case Family::PowerS: return p * std::pow(1.0 - u, -p - 1.0);
  }
  return 0.0;
}

/// Lower bound for -Delta u: sqrt(lambda) g(u) with the family's comparison function g.
inline double pointwise_g(const Nonlinearity& nl, double u, double lambda) {
  detail::check_domain(nl, u);
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
  const double p = nl.p();
  const double root_lambda = std::sqrt(lambda);
  switch (nl.family()) {
    case Family::Exponential:
      return std::sqrt(2.0 * lambda) * std::expm1(0.5 * u);
    case Family::PowerR:
      return root_lambda * std::sqrt(2.0 / (p + 1.0)) *
             std::expm1(0.5 * (p + 1.0) * std::log1p(u));
    case Family::PowerS:
      return root_lambda * std::sqrt(2.0 / (p - 1.0)) *
             std::expm1(-0.5 * (p - 1.0) * std::log1p(-u));
  }
  return 0.0;
}

/// Factor a with sqrt(f'(u)) = a * (family weight); 1 for exp, sqrt(p) otherwise.
inline double root_prime_factor(const Nonlinearity& nl) {
  return nl.has_exponent() ? std::sqrt(nl.p()) : 1.0;
}

/// Comparison coefficient s of the regrouped energy estimate:
/// sqrt(2), sqrt(2p/(p+1)) or sqrt(2p/(p-1)).
inline long double comparison_coefficient(const Nonlinearity& nl) {
  const long double p = nl.p();
  switch (nl.family()) {
    case Family::Exponential: return std::sqrt(2.0L);
    case Family::PowerR: return std::sqrt(2.0L * p / (p + 1.0L));
    case Family::PowerS: return std::sqrt(2.0L * p / (p - 1.0L));
  }
  return 0.0L;
}

/// s - t^2/(2t - 1); positive exactly between the roots s -+ sqrt(s^2 - s).
inline long double quadratic_margin(long double s, long double t) {
  if (!(t > 0.5L)) throw DomainError("quadratic_margin requires t > 1/2");
  return s - t * t / (2.0L * t - 1.0L);
}

/// Larger root of t^2 - 2 s t + s = 0.
inline long double exponent_root(long double s) { return s + std::sqrt(s * s - s); }

struct ThresholdReport {
  long double s = 0;           ///< comparison coefficient
  long double t_star = 0;      ///< t0, t_p or t~_p
  long double dim_bound = 0;   ///< theorem applies for N < dim_bound
  long double margin_fn_root_check = 0;
  int max_dimension = 0;       ///< largest integer N strictly below dim_bound
  bool theorem_applicable = true;  ///< false for the singular family at p = 3
};

inline ThresholdReport thresholds(const Nonlinearity& nl) {
  ThresholdReport rep;
  rep.s = comparison_coefficient(nl);
  rep.t_star = exponent_root(rep.s);
  rep.margin_fn_root_check = quadratic_margin(rep.s, rep.t_star);
  const long double p = nl.p();
  const long double shifted = rep.t_star - 0.5L;
  switch (nl.family()) {
    case Family::Exponential:
      rep.dim_bound = 4.0L * (rep.t_star + 0.5L);
      break;
    case Family::PowerR:
      rep.dim_bound = 4.0L * (p / (p - 1.0L) + (p + 1.0L) / (p - 1.0L) * shifted);
      break;
    case Family::PowerS:
      rep.dim_bound = 4.0L * (p / (p + 1.0L) + (p - 1.0L) / (p + 1.0L) * shifted);
      rep.theorem_applicable = (nl.p() != 3.0);
      break;
  }
  rep.max_dimension = static_cast<int>(std::ceil(rep.dim_bound)) - 1;
  return rep;
}

/// h(p) = dim_bound / 4 of the regular power family.
inline long double power_bound_h(double p) {
  return thresholds(Nonlinearity::power_r(p)).dim_bound / 4.0L;
}

/// Coefficient c = ((u+1)^p - 1)/u of the linearised rewrite, continuous at u = 0.
inline double convexity_coefficient(double u, double p) {
  if (u == 0.0) return p;
  return std::expm1(p * std::log1p(u)) / u;
}

}  // namespace bbranch
