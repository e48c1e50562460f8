#include "bbranch/spectra.hpp"

#include <boost/math/special_functions/bessel.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>

using namespace bbranch;

namespace {

std::shared_ptr<const Discretization> make_disc(std::size_t n, int dim) {
  return std::make_shared<const Discretization>(n, dim);
}

const BranchRecord& branch(const std::string& fam, int dim, std::size_t n) {
  static std::map<std::tuple<std::string, int, std::size_t>, BranchRecord> cache;
  auto key = std::make_tuple(fam, dim, n);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, continue_branch(make_disc(n, dim), Nonlinearity::parse(fam, 2.0))).first;
  return it->second;
}

SolutionState zero_state(std::size_t n, int dim) {
  return newton_solve(make_disc(n, dim), Nonlinearity::exponential(), 0.0);
}

double dirichlet_reference(int dim) {
  if (dim == 3) return std::numbers::pi * std::numbers::pi;
  const double j = boost::math::cyl_bessel_j_zero(0.5 * dim - 1.0, 1);
  return j * j;
}

GridFunction random_test_function(const RadialGrid& grid, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(-1.0, 1.0);
  const double a = c(rng), b = c(rng), d = c(rng);
  auto f = grid.sample([&](double r) { return (1.0 - r) * (a + b * r + d * r * r * r); });
  f.back() = 0.0;
  return f;
}

}  // namespace

TEST(ZeroPotential, SystemEigenvalueIsDirichletEigenvalue) {
  for (int dim : {2, 3, 5}) {
    const auto st = zero_state(2000, dim);
    const double ref = dirichlet_reference(dim);
    EXPECT_NEAR(system_stability_eigenvalue(st) / ref, 1.0, 1e-3) << "N = " << dim;
  }
}

TEST(ZeroPotential, BilaplacianEigenvalueIsSquare) {
  for (int dim : {2, 3}) {
    const auto st = zero_state(2000, dim);
    const double ref = dirichlet_reference(dim);
    const double mu = semistability_eigenvalue(st);
    EXPECT_GT(mu, 0.0);
    EXPECT_NEAR(mu / (ref * ref), 1.0, 1e-3) << "N = " << dim;
  }
}

TEST(Eigenfunctions, RayleighConsistency) {
  const auto& br = branch("exp", 3, 400);
  const auto& st = br.states[br.prefold_end() / 2];
  const auto rep = stability_report(st);
  const double scale_mu = bilaplacian_energy(st, rep.eigfn_mu);
  const double scale_nu = dirichlet_form(st.grid(), st.op(), rep.eigfn_nu, rep.eigfn_nu);
  EXPECT_NEAR(l2_squared(st.grid(), rep.eigfn_mu), 1.0, 1e-12);
  EXPECT_NEAR(classical_form(st, rep.eigfn_mu), rep.mu1, 1e-8 * scale_mu);
  EXPECT_NEAR(system_form(st, rep.eigfn_nu), rep.nu1, 1e-8 * scale_nu);
}

TEST(Eigenfunctions, SignDefinite) {
  const auto& br = branch("powr", 2, 400);
  const auto rep = stability_report(br.states[br.prefold_end()]);
  EXPECT_GT(rep.eigfn_mu.front(), 0.0);
  for (double x : rep.eigfn_mu) EXPECT_GE(x, -1e-10);
  for (double x : rep.eigfn_nu) EXPECT_GE(x, -1e-10);
}

TEST(Stability, PrefoldStatesAreStable) {
  for (const char* fam : {"exp", "powr", "pows"}) {
    const auto& br = branch(fam, 3, 400);
    const double scale = semistability_eigenvalue(br.states.front());
    for (std::size_t k = 0; k <= br.prefold_end(); ++k) {
      const auto rep = stability_report(br.states[k]);
      EXPECT_GE(rep.mu1, -1e-6 * scale) << fam << " state " << k;
      EXPECT_GE(rep.nu1, -1e-6 * scale) << fam << " state " << k;
    }
  }
}

TEST(Stability, SemistabilityVanishesAtFold) {
  for (const char* fam : {"exp", "powr", "pows"}) {
    const auto& br = branch(fam, 2, 1000);
    ASSERT_TRUE(br.fold_index.has_value()) << fam;
    const double scale = semistability_eigenvalue(br.states.front());
    EXPECT_LE(std::abs(semistability_eigenvalue(br.states[*br.fold_index])), 1e-6 * scale) << fam;
    EXPECT_LT(semistability_eigenvalue(br.states.back()), 0.0) << fam;
    EXPECT_GT(system_stability_eigenvalue(br.states[*br.fold_index]), 0.0) << fam;
  }
}

TEST(Stability, SemistabilityDecreasesAlongBranch) {
  const auto& br = branch("exp", 2, 400);
  const double scale = semistability_eigenvalue(br.states.front());
  double prev = HUGE_VAL;
  for (std::size_t k = 0; k <= br.prefold_end(); ++k) {
    const double mu = semistability_eigenvalue(br.states[k]);
    EXPECT_LE(mu, prev + 1e-9 * scale) << "state " << k;
    prev = mu;
  }
}

TEST(Stability, RayleighQuotientsBoundEigenvalues) {
  const auto& br = branch("pows", 2, 400);
  const auto& st = br.states[br.prefold_end() - 2];
  const auto rep = stability_report(st);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    const auto psi = random_test_function(st.grid(), rng);
    const double den = l2_squared(st.grid(), psi);
    EXPECT_GE(classical_form(st, psi) / den, rep.mu1 - 1e-9 * bilaplacian_energy(st, psi) / den);
    EXPECT_GE(system_form(st, psi) / den, rep.nu1 - 1e-9 * dirichlet_form(st.grid(), st.op(), psi, psi) / den);
  }
}

TEST(SystemForm, EqualArgumentsGiveTwiceTheSystemForm) {
  const auto& br = branch("exp", 3, 400);
  const auto& st = br.states[br.prefold_end() - 1];
  const auto rep = stability_report(st);
  const double slack = general_system_form(st, rep.eigfn_nu, rep.eigfn_nu);
  const double grad = dirichlet_form(st.grid(), st.op(), rep.eigfn_nu, rep.eigfn_nu);
  EXPECT_GE(slack, -1e-8 * grad);
  EXPECT_NEAR(0.5 * slack, rep.nu1, 1e-8 * grad);
}

TEST(SystemForm, ZeroFirstArgument) {
  const auto& br = branch("powr", 3, 400);
  const auto& st = br.states[br.prefold_end()];
  std::mt19937_64 rng(11);
  const auto beta = random_test_function(st.grid(), rng);
  const auto zero = st.grid().make();
  EXPECT_DOUBLE_EQ(general_system_form(st, zero, beta), dirichlet_form(st.grid(), st.op(), beta, beta));
}

TEST(SystemForm, RandomPairsAreNonnegative) {
  const auto& br = branch("exp", 2, 400);
  std::mt19937_64 rng(5);
  for (std::size_t k = 0; k <= br.prefold_end(); k += 3) {
    const auto& st = br.states[k];
    for (int m = 0; m < 100; ++m) {
      const auto a = random_test_function(st.grid(), rng);
      const auto b = random_test_function(st.grid(), rng);
      const double grad = dirichlet_form(st.grid(), st.op(), a, a) + dirichlet_form(st.grid(), st.op(), b, b);
      EXPECT_GE(general_system_form(st, a, b), -1e-8 * grad);
    }
  }
}

TEST(SystemForm, BoundaryValuesMustVanish) {
  const auto st = zero_state(100, 2);
  auto a = st.grid().make(1.0);
  EXPECT_THROW(general_system_form(st, a, st.grid().make()), std::invalid_argument);
  EXPECT_THROW(classical_form(st, a), std::invalid_argument);
}

TEST(Eigensolver, NonConvergenceCarriesHistory) {
  const auto& br = branch("exp", 2, 400);
  EigenOptions opts;
  opts.max_iter = 1;
  try {
    semistability_eigenvalue(br.states[3], opts);
    FAIL() << "expected a spectral error";
  } catch (const SpectralError& e) {
    EXPECT_EQ(e.history().size(), 2u);
  }
}
