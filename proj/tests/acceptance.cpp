// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [output-dir]

#include "bbranch/pipeline.hpp"

#include <boost/math/special_functions/bessel.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

using namespace bbranch;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kThresholdTol = 1e-15;
constexpr double kThresholdSeconds = 1.0;
constexpr double kRootTol = 1e-12;
constexpr double kLinearRelTol = 1e-2;
constexpr double kOdeTol = 1e-12;
constexpr double kOrderTarget = 2.0;
constexpr double kOrderTol = 0.2;
constexpr double kEigenRelTol = 1e-3;
constexpr double kStabilityRelTol = 1e-6;
constexpr std::size_t kLemmaPairs = 100;
constexpr std::size_t kBranchNodes = 1000;

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::shared_ptr<const Discretization> make_disc(std::size_t n, int dim) {
  return std::make_shared<const Discretization>(n, dim);
}

double dirichlet_reference(int dim) {
  if (dim == 3) return std::numbers::pi * std::numbers::pi;
  const double j = boost::math::cyl_bessel_j_zero(0.5 * dim - 1.0, 1);
  return j * j;
}

// --- 1, 2, 3 -----------------------------------------------------------------

void thresholds_criteria() {
  RunConfig cfg;
  cfg.families = {"exp", "powr", "pows"};
  std::ostringstream table;
  bool checks_hold = false;
  const double t_table = seconds([&] { checks_hold = write_thresholds(table, cfg); });

  const long double bound = thresholds(Nonlinearity::exponential()).dim_bound;
  const long double closed = 2.0L + 4.0L * std::sqrt(2.0L) + 4.0L * std::sqrt(2.0L - std::sqrt(2.0L));
  const double diff = static_cast<double>(std::abs(bound - closed));
  const bool three = std::round(static_cast<double>(bound) * 1000.0) == 10718.0;
  const bool printed = table.str().find(io::fmt(bound)) != std::string::npos;
  report(1, "threshold reproduction",
         diff <= kThresholdTol && three && printed && t_table < kThresholdSeconds,
         "bound " + io::fmt(bound) + ", |bound - closed form| = " + num(diff) + ", rounds to 10.718: " +
             (three ? "yes" : "no") + ", table time " + num(t_table) + " s");

  ThresholdChecks rc;
  const double t_rem = seconds([&] { rc = threshold_checks(); });
  report(2, "consistency checks", rc.all() && checks_hold && t_rem < kThresholdSeconds,
         std::string("h decreasing ") + (rc.h_decreasing ? "yes" : "no") + ", 2p/(p-1) < h " +
             (rc.dominance ? "yes" : "no") + ", |4h(1e6) - exp bound| = " + num(static_cast<double>(rc.limit_gap)) +
             ", pows p=2 N <= " + std::to_string(rc.pows_p2_max_dim) + ", time " + num(t_rem) + " s");

  double worst = 0.0;
  std::vector<Nonlinearity> nls{Nonlinearity::exponential()};
  for (double p : {1.1, 2.0, 5.0, 100.0}) {
    nls.push_back(Nonlinearity::power_r(p));
    nls.push_back(Nonlinearity::power_s(p));
  }
  for (const auto& nl : nls) {
    const auto th = thresholds(nl);
    worst = std::max(worst, std::abs(static_cast<double>(quadratic_margin(th.s, th.t_star))));
  }
  report(3, "root identities", worst <= kRootTol, "max |quadratic_margin(s, t_star)| = " + num(worst) + " over 9 cases");
}

// --- 4 -------------------------------------------------------------------------

using Poly = std::map<int, double>;

Poly laplacian(const Poly& q, int dim) {
  Poly out;
  for (auto [k, c] : q)
    if (k >= 2) out[k - 2] += c * k * (k + dim - 2);
  return out;
}

double eval(const Poly& q, double r) {
  double s = 0.0;
  for (auto [k, c] : q) s += c * std::pow(r, k);
  return s;
}

void linear_oracle() {
  const double lambda = 1e-3;
  const auto st = newton_solve(make_disc(kBranchNodes, 2), Nonlinearity::exponential(), lambda);
  const double rel = std::abs(st.u0() / lambda / (3.0 / 64.0) - 1.0);

  double ode = 0.0;
  for (int dim = 2; dim <= 10; ++dim) {
    const double a = 1.0 / (4.0 * dim * dim), b = 1.0 / (8.0 * dim * (dim + 2));
    const Poly u1{{0, a - b}, {2, -a}, {4, b}};
    const Poly lap = laplacian(u1, dim);
    const Poly bilap = laplacian(lap, dim);
    for (int i = 0; i <= 20; ++i) ode = std::max(ode, std::abs(eval(bilap, i / 20.0) - 1.0));
    ode = std::max({ode, std::abs(eval(u1, 1.0)), std::abs(eval(lap, 1.0))});
  }
  report(4, "linear-regime oracle", rel <= kLinearRelTol && ode <= kOdeTol,
         "u(0)/lambda = " + num(st.u0() / lambda) + " vs 3/64, relative error " + num(rel) +
             "; closed form residual " + num(ode));
}

// --- 5 -------------------------------------------------------------------------

void discretization_order() {
  const std::size_t ns[] = {500, 1000, 2000};
  double lstar[3], op_err[3];
  for (int i = 0; i < 3; ++i) {
    lstar[i] = continue_branch(make_disc(ns[i], 2), Nonlinearity::exponential()).lambda_star_estimate;
    RadialGrid grid(ns[i], 2);
    RadialOperator op(grid);
    const auto lu = op.apply(grid.sample([](double r) { return 1.0 - r * r * r * r; }));
    op_err[i] = 0.0;
    for (std::size_t k = 0; k < grid.n(); ++k)
      op_err[i] = std::max(op_err[i], std::abs(lu[k] - 16.0 * grid.r(k) * grid.r(k)));
  }
  const double q_lambda = std::log2(std::abs(lstar[0] - lstar[1]) / std::abs(lstar[1] - lstar[2]));
  const double q_op1 = std::log2(op_err[0] / op_err[1]);
  const double q_op2 = std::log2(op_err[1] / op_err[2]);

  double eig_worst = 0.0;
  for (int dim : {2, 3}) {
    const auto st = newton_solve(make_disc(2000, dim), Nonlinearity::exponential(), 0.0);
    const double ref = dirichlet_reference(dim);
    eig_worst = std::max(eig_worst, std::abs(system_stability_eigenvalue(st) / ref - 1.0));
    eig_worst = std::max(eig_worst, std::abs(semistability_eigenvalue(st) / (ref * ref) - 1.0));
  }
  auto in_band = [](double q) { return std::abs(q - kOrderTarget) <= kOrderTol; };
  report(5, "discretization order",
         in_band(q_lambda) && in_band(q_op1) && in_band(q_op2) && eig_worst <= kEigenRelTol,
         "lambda* order " + num(q_lambda) + " (" + num(lstar[0]) + ", " + num(lstar[1]) + ", " + num(lstar[2]) +
             "), operator orders " + num(q_op1) + ", " + num(q_op2) + ", worst eigenvalue error " + num(eig_worst));
}

// --- 6, 7 ----------------------------------------------------------------------

struct CellRun {
  Cell cell;
  BranchRecord br;
  std::vector<StabilityReport> stab;
  std::string error;
};

std::vector<CellRun> run_cells() {
  std::vector<CellRun> runs;
  for (const char* fam : {"exp", "powr", "pows"})
    for (int dim : {2, 3, 5, 10}) runs.push_back({Cell{Nonlinearity::parse(fam, 2.0), dim, kBranchNodes}, {}, {}, {}});
  run_parallel(runs.size(), [&](std::size_t i) {
    auto& r = runs[i];
    try {
      r.br = continue_branch(make_disc(r.cell.n, r.cell.dim), r.cell.nl);
      for (const auto& st : r.br.states) r.stab.push_back(stability_report(st));
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  });
  return runs;
}

std::string cell_name(const Cell& c) { return io::cell_stem(c.nl, c.dim, c.n); }

void stability_suite(const std::vector<CellRun>& runs, double elapsed) {
  bool ok = true;
  std::string notes;
  for (const auto& r : runs) {
    const std::string name = cell_name(r.cell);
    if (!r.error.empty()) {
      ok = false;
      notes += " " + name + " error(" + r.error + ")";
      continue;
    }
    const double mu_scale = r.stab.front().mu1, nu_scale = r.stab.front().nu1;
    double worst_mu = HUGE_VAL, worst_nu = HUGE_VAL;
    for (std::size_t k = 0; k <= r.br.prefold_end(); ++k) {
      worst_mu = std::min(worst_mu, r.stab[k].mu1 / mu_scale);
      worst_nu = std::min(worst_nu, r.stab[k].nu1 / nu_scale);
    }
    const bool stable = worst_mu >= -kStabilityRelTol && worst_nu >= -kStabilityRelTol;
    bool crossing = true;
    std::string where;
    if (r.br.fold_index) {
      const std::size_t f = *r.br.fold_index;
      crossing = f >= 1 && f + 1 < r.stab.size() && r.stab[f - 1].mu1 > 0.0 && r.stab[f + 1].mu1 < 0.0;
      where = "fold mu1/scale " + num(r.stab[f].mu1 / mu_scale);
    } else if (r.br.touchdown) {
      where = "touchdown, no fold";
    } else {
      crossing = false;
      where = "no fold";
    }
    if (!stable || !crossing) ok = false;
    notes += " " + name + "[" + where + (stable ? "" : ", UNSTABLE") + (crossing ? "" : ", NO CROSSING") + "]";
  }
  report(6, "stability suite", ok, std::to_string(runs.size()) + " branches in " + num(elapsed) + " s;" + notes);
}

void inequality_suite(const std::vector<CellRun>& runs, const fs::path& out) {
  RunConfig cfg;
  cfg.verify.lemma_pairs = kLemmaPairs;
  std::size_t total = 0, failed = 0;
  std::string notes;
  for (const auto& r : runs) {
    if (!r.error.empty()) {
      ++failed;
      continue;
    }
    const auto reps = verify_branch(r.br, cfg);
    std::size_t bad = 0;
    for (const auto& rep : reps) bad += !rep.passed();
    total += reps.size();
    failed += bad;
    if (bad) notes += " " + cell_name(r.cell) + ":" + std::to_string(bad);
  }

  cfg.families = {"exp"};
  cfg.dims = {3};
  cfg.grid_sizes = {kBranchNodes};
  cfg.out = (out / "verify_clean").string();
  std::ostringstream log;
  const int branch_status = cmd_branch(cfg, log);
  const auto stem = (fs::path(cfg.out) / io::cell_stem(Nonlinearity::exponential(), 3, kBranchNodes)).string();
  const int verify_status = branch_status == 0 ? cmd_verify(cfg, {stem}, log) : -1;
  report(7, "inequality suite", failed == 0 && verify_status == 0,
         std::to_string(total) + " reports, " + std::to_string(failed) + " failed" + notes +
             "; cmd_verify on exp N=3 exit " + std::to_string(verify_status));
}

// --- 8 -------------------------------------------------------------------------

void negative_control(const fs::path& out) {
  RunConfig cfg;
  cfg.families = {"exp"};
  cfg.dims = {3};
  cfg.grid_sizes = {kBranchNodes};
  cfg.out = (out / "verify_corrupt").string();
  std::ostringstream log;
  int status = -1;
  std::size_t pointwise_failures = 0;
  if (cmd_branch(cfg, log) == 0) {
    const auto stem = (fs::path(cfg.out) / io::cell_stem(Nonlinearity::exponential(), 3, kBranchNodes)).string();
    auto lb = io::read_branch(stem);
    for (auto& st : lb.record.states)
      for (double& x : st.v) x *= 0.5;
    io::write_fields(io::files_for(stem).fields, lb.record, lb.summary.config_hash);
    std::ostringstream vlog;
    status = cmd_verify(cfg, {stem}, vlog);
    for (const auto& rep : verify_branch(lb.record, cfg))
      if (rep.name == "pointwise_bound" && !rep.passed()) ++pointwise_failures;
  }

  std::size_t grid_points = 0, admissible = 0;
  for (const auto& nl : {Nonlinearity::exponential(), Nonlinearity::power_r(1.1), Nonlinearity::power_r(2.0),
                         Nonlinearity::power_r(5.0), Nonlinearity::power_r(100.0), Nonlinearity::power_s(1.1),
                         Nonlinearity::power_s(2.0), Nonlinearity::power_s(5.0), Nonlinearity::power_s(100.0)}) {
    const double t = static_cast<double>(thresholds(nl).t_star) + 0.01;
    const double T = nl.family() == Family::PowerS ? 1.0 - 1e-12 : 1e12;
    for (int i = 1; i < 10000; ++i) {
      ++grid_points;
      if (split_coefficients(nl, {t, i / 10000.0, T, 1e12}, 1.0, 1.0).admissible()) ++admissible;
    }
  }
  report(8, "negative control", status == 1 && pointwise_failures > 0 && admissible == 0,
         "halved v: cmd_verify exit " + std::to_string(status) + ", " + std::to_string(pointwise_failures) +
             " pointwise failures; t = t_star + 0.01: " + std::to_string(admissible) + " admissible of " +
             std::to_string(grid_points) + " (family, eps) points");
}

// --- 9 -------------------------------------------------------------------------

void refinement_trends() {
  std::string notes;
  for (const char* fam : {"exp", "pows"}) {
    notes += std::string(" ") + fam + " N=10 max u near lambda*:";
    for (std::size_t n : {250, 500, 1000}) {
      const auto br = continue_branch(make_disc(n, 10), Nonlinearity::parse(fam, 2.0));
      const auto& st = br.states[br.prefold_end()];
      notes += " n=" + std::to_string(n) + " " + num(st.max_u());
    }
    notes += ";";
  }
  std::printf("[INFO] 9 sup-norm refinement trends (descriptive, no threshold):%s\n", notes.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "bbranch_acceptance";
  fs::remove_all(out);
  fs::create_directories(out);

  thresholds_criteria();
  linear_oracle();
  discretization_order();
  std::vector<CellRun> runs;
  const double elapsed = seconds([&] { runs = run_cells(); });
  stability_suite(runs, elapsed);
  inequality_suite(runs, out);
  negative_control(out);
  refinement_trends();

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
