#include "bbranch/model.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace bbranch;

namespace {

// 30-digit mpmath evaluations of the closed forms.
constexpr long double kExpBound = 10.7183217084130983690344347691L;
constexpr long double kT0 = 2.17958042710327459225860869227L;
constexpr long double kPowsP2Bound = 6.55228474983079339840225163228L;
constexpr long double kPowsP2Root = 3.41421356237309504880168872421L;
constexpr long double kPowrP2Bound = 20.928203230275509174109785366L;
constexpr long double kPowrP2Root = 1.5773502691896257645091487805L;
constexpr long double kMarginSample = 0.029700538379251529018297561004L;

const double kPs[] = {1.1, 2.0, 5.0, 100.0};

}  // namespace

TEST(Nonlinearity, ValuesAtSamplePoints) {
  auto e = Nonlinearity::exponential();
  EXPECT_DOUBLE_EQ(f_eval(e, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(f_prime(e, 0.0), 1.0);
  auto r = Nonlinearity::power_r(2.0);
  EXPECT_DOUBLE_EQ(f_eval(r, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(f_prime(r, 1.0), 4.0);
  auto s = Nonlinearity::power_s(2.0);
  EXPECT_DOUBLE_EQ(f_eval(s, 0.5), 4.0);
  EXPECT_DOUBLE_EQ(f_prime(s, 0.5), 16.0);
}

TEST(Nonlinearity, SingularDomainIsEnforced) {
  auto s = Nonlinearity::power_s(2.0);
  EXPECT_THROW(f_eval(s, 1.0), DomainError);
  EXPECT_THROW(f_prime(s, 1.5), DomainError);
  EXPECT_THROW(f_eval(Nonlinearity::exponential(), NAN), DomainError);
}

TEST(Nonlinearity, ExponentRange) {
  EXPECT_THROW(Nonlinearity::power_r(1.0), std::invalid_argument);
  EXPECT_THROW(Nonlinearity::power_s(0.5), std::invalid_argument);
  EXPECT_THROW(Nonlinearity::power_r(2e6), std::invalid_argument);
  EXPECT_NO_THROW(Nonlinearity::power_r(1e6));
  EXPECT_THROW(Nonlinearity::parse("cubic", 2.0), std::invalid_argument);
  EXPECT_EQ(Nonlinearity::parse("pows", 3.0).family(), Family::PowerS);
}

TEST(PointwiseG, Examples) {
  for (auto nl : {Nonlinearity::exponential(), Nonlinearity::power_r(3.0), Nonlinearity::power_s(2.0)})
    EXPECT_EQ(pointwise_g(nl, 0.0, 1.0), 0.0);
  EXPECT_NEAR(pointwise_g(Nonlinearity::exponential(), 2.0 * std::log(4.0), 2.0), 6.0, 1e-14);
  EXPECT_NEAR(pointwise_g(Nonlinearity::power_r(3.0), 1.0, 1.0), 3.0 / std::sqrt(2.0), 1e-14);
}

TEST(PointwiseG, IncreasingAndNonnegative) {
  for (auto nl : {Nonlinearity::exponential(), Nonlinearity::power_r(2.0), Nonlinearity::power_s(2.0)}) {
    double prev = -1.0;
    for (double u = 0.0; u < 0.99; u += 0.01) {
      const double g = pointwise_g(nl, u, 3.0);
      EXPECT_GE(g, 0.0);
      EXPECT_GT(g, prev);
      prev = g;
    }
  }
  EXPECT_THROW(pointwise_g(Nonlinearity::exponential(), 1.0, -1.0), std::invalid_argument);
}

TEST(Thresholds, ExponentialBound) {
  const auto th = thresholds(Nonlinearity::exponential());
  EXPECT_NEAR(static_cast<double>(th.dim_bound - kExpBound), 0.0, 1e-15);
  EXPECT_NEAR(static_cast<double>(th.t_star - kT0), 0.0, 1e-15);
  const long double closed = 2.0L + 4.0L * std::sqrt(2.0L) + 4.0L * std::sqrt(2.0L - std::sqrt(2.0L));
  EXPECT_NEAR(static_cast<double>(th.dim_bound - closed), 0.0, 1e-15);
  EXPECT_EQ(std::round(static_cast<double>(th.dim_bound) * 1000.0), 10718.0);
  EXPECT_EQ(th.max_dimension, 10);
}

TEST(Thresholds, PowerFamiliesAtTwo) {
  const auto s = thresholds(Nonlinearity::power_s(2.0));
  EXPECT_NEAR(static_cast<double>(s.dim_bound - kPowsP2Bound), 0.0, 1e-15);
  EXPECT_NEAR(static_cast<double>(s.t_star - kPowsP2Root), 0.0, 1e-15);
  EXPECT_EQ(s.max_dimension, 6);
  EXPECT_TRUE(s.theorem_applicable);
  const auto r = thresholds(Nonlinearity::power_r(2.0));
  EXPECT_NEAR(static_cast<double>(r.dim_bound - kPowrP2Bound), 0.0, 1e-14);
  EXPECT_NEAR(static_cast<double>(r.t_star - kPowrP2Root), 0.0, 1e-15);
}

TEST(Thresholds, SingularFamilyAtThreeIsExcluded) {
  EXPECT_FALSE(thresholds(Nonlinearity::power_s(3.0)).theorem_applicable);
  EXPECT_TRUE(thresholds(Nonlinearity::power_s(2.9)).theorem_applicable);
}

TEST(Thresholds, LargeExponentLimit) {
  const long double gap = std::abs(4.0L * power_bound_h(1e6) - kExpBound);
  EXPECT_LE(static_cast<double>(gap), 1e-3);
  EXPECT_LT(std::abs(4.0L * power_bound_h(1e6) - kExpBound), std::abs(4.0L * power_bound_h(1e3) - kExpBound));
}

TEST(Thresholds, BoundDecreasesAndDominates) {
  long double prev = HUGE_VALL;
  for (double p : {1.01, 1.1, 1.5, 2.0, 3.0, 5.0, 10.0, 100.0, 1e4, 1e6}) {
    const long double h = power_bound_h(p);
    EXPECT_LT(h, prev) << "p = " << p;
    EXPECT_LT(2.0L * p / (p - 1.0L), h) << "p = " << p;
    prev = h;
  }
}

TEST(QuadraticMargin, Examples) {
  const long double s = std::sqrt(2.0L);
  EXPECT_NEAR(static_cast<double>(quadratic_margin(s, kT0)), 0.0, 1e-15);
  EXPECT_NEAR(static_cast<double>(quadratic_margin(s, 1.0L)), std::sqrt(2.0) - 1.0, 1e-15);
  EXPECT_NEAR(static_cast<double>(quadratic_margin(std::sqrt(4.0L / 3.0L), 1.5L) - kMarginSample), 0.0, 1e-15);
  EXPECT_THROW(quadratic_margin(s, 0.5L), DomainError);
  EXPECT_THROW(quadratic_margin(s, 0.1L), DomainError);
}

TEST(QuadraticMargin, RootResidualAcrossFamilies) {
  std::vector<Nonlinearity> nls{Nonlinearity::exponential()};
  for (double p : kPs) {
    nls.push_back(Nonlinearity::power_r(p));
    nls.push_back(Nonlinearity::power_s(p));
  }
  for (const auto& nl : nls) {
    const auto th = thresholds(nl);
    EXPECT_LE(std::abs(static_cast<double>(th.margin_fn_root_check)), 1e-12) << nl.tag();
    EXPECT_LE(std::abs(static_cast<double>(quadratic_margin(th.s, th.t_star))), 1e-12) << nl.tag();
  }
}

TEST(QuadraticMargin, SignAroundRoot) {
  for (double p : kPs) {
    for (const auto& nl : {Nonlinearity::power_r(p), Nonlinearity::power_s(p), Nonlinearity::exponential()}) {
      const auto th = thresholds(nl);
      for (long double t = 1.0L; t < th.t_star - 1e-6L; t += 0.01L) EXPECT_GT(quadratic_margin(th.s, t), 0.0L);
      EXPECT_LT(quadratic_margin(th.s, th.t_star + 0.01L), 0.0L);
    }
  }
}

TEST(ConvexityCoefficient, BetweenExponentAndDerivative) {
  for (double p : kPs) {
    EXPECT_DOUBLE_EQ(convexity_coefficient(0.0, p), p);
    for (double u = 1e-3; u < 50.0; u *= 1.5) {
      const double c = convexity_coefficient(u, p);
      EXPECT_GE(c, p * (1.0 - 1e-12));
      EXPECT_LE(c, p * std::pow(1.0 + u, p - 1.0) * (1.0 + 1e-12));
    }
  }
}

// The bound p u^{p-1} fails near u = 0, where c -> p but p u^{p-1} -> 0.
TEST(ConvexityCoefficient, PowerOfUIsNotAnUpperBoundNearZero) {
  EXPECT_GT(convexity_coefficient(0.1, 2.0), 2.0 * 0.1);
  EXPECT_LE(convexity_coefficient(10.0, 2.0), 2.0 * 10.0 + 1.0);
}
