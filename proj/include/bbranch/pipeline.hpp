#pragma once

/**
 * @file pipeline.hpp
 * @brief The work behind the CLI subcommands: tracing and storing branches, running the
 * verification suite on stored branches, the sweep runner and the thresholds table.
 *
 * Cells (family, N, n) are independent; run_cells executes them on up to BBRANCH_THREADS
 * threads (hardware concurrency when unset). Each cell writes only its own files and any
 * exception stays inside its cell.
 */

#include "bbranch/config.hpp"
#include "bbranch/io.hpp"
#include "bbranch/spectra.hpp"
#include "bbranch/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <ostream>
#include <thread>
#include <vector>

namespace bbranch {

struct Cell {
  Nonlinearity nl = Nonlinearity::exponential();
  int dim = 2;
  std::size_t n = 1000;
};

inline std::vector<Cell> cells_of(const RunConfig& cfg) {
  std::vector<Cell> out;
  for (const auto& fam : cfg.families)
    for (int d : cfg.dims)
      for (auto n : cfg.grid_sizes) out.push_back({Nonlinearity::parse(fam, cfg.p), d, n});
  return out;
}

/// BBRANCH_THREADS if set to a positive integer, else the hardware concurrency (at least 1).
inline unsigned thread_budget() {
  if (const char* env = std::getenv("BBRANCH_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs job(i) for i in [0, count) on a bounded pool. Jobs must not throw.
inline void run_parallel(std::size_t count, const std::function<void(std::size_t)>& job) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_budget(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
  for (auto& th : pool) th.join();
}

/// Table rows with both stability eigenvalues per state; NaN where inverse iteration fails.
inline std::vector<io::BranchRow> branch_rows(const BranchRecord& br) {
  std::vector<io::BranchRow> rows;
  rows.reserve(br.states.size());
  for (std::size_t k = 0; k < br.states.size(); ++k) {
    const auto& st = br.states[k];
    io::BranchRow r;
    r.index = static_cast<long>(k);
    r.arclength = k < br.arclength.size() ? br.arclength[k] : NAN;
    r.lambda = st.lambda;
    r.u0 = st.u0();
    r.max_u = st.max_u();
    r.newton_residual = st.newton_residual;
    try {
      r.mu1 = semistability_eigenvalue(st);
    } catch (const SpectralError&) {
    }
    try {
      r.nu1 = system_stability_eigenvalue(st);
    } catch (const SpectralError&) {
    }
    rows.push_back(r);
  }
  return rows;
}

struct CellOutcome {
  std::string stem;
  io::BranchSummary summary;
  bool ok = false;  ///< branch finished (fold or touchdown) without error
  std::size_t reports = 0, failures = 0;
  double worst_margin = NAN;
  bool verified = false;
};

/// Traces one branch and writes its three files under cfg.out. A stall writes the partial
/// branch; any other failure writes a summary carrying the error.
inline CellOutcome branch_cell(const Cell& cell, const RunConfig& cfg, BranchRecord* keep = nullptr) {
  namespace fs = std::filesystem;
  const std::string hash = config_hash(cfg);
  CellOutcome res;
  res.stem = (fs::path(cfg.out) / io::cell_stem(cell.nl, cell.dim, cell.n)).string();
  const auto files = io::files_for(res.stem);
  BranchRecord br;
  std::string error;
  try {
    auto disc = std::make_shared<const Discretization>(cell.n, cell.dim);
    br = continue_branch(disc, cell.nl, cfg.continuation);
  } catch (const StallError& e) {
    br = e.partial();
    error = e.what();
  } catch (const std::exception& e) {
    br = BranchRecord{};
    br.nl = cell.nl;
    br.dim = cell.dim;
    br.n = cell.n;
    br.partial = true;
    error = e.what();
  }
  res.summary = io::summarize(br, hash);
  res.summary.error = error;
  if (!error.empty()) res.summary.partial = true;
  io::write_table(files.table, branch_rows(br), hash);
  io::write_fields(files.fields, br, hash);
  io::write_summary(files.summary, res.summary);
  res.ok = error.empty() && !br.partial;
  if (keep != nullptr) *keep = std::move(br);
  return res;
}

/// Every check of the verification suite on the pre-fold segment of a branch.
inline std::vector<VerificationReport> verify_branch(const BranchRecord& br, const RunConfig& cfg) {
  std::vector<VerificationReport> out;
  if (br.states.empty()) return out;
  const auto& nl = br.nl;
  const auto& vg = cfg.verify;
  const double tol = vg.tol;
  const std::optional<double> lstar =
      br.lambda_star_estimate > 0.0 ? std::optional<double>(br.lambda_star_estimate) : std::nullopt;
  const double t_star = static_cast<double>(thresholds(nl).t_star);
  const std::vector<double> ts = vg.t.empty() ? std::vector<double>{default_exponent(nl)} : vg.t;

  std::vector<SplitParams> split;
  if (!vg.eps.empty()) {
    for (double t : ts)
      for (double e : vg.eps)
        for (double T : vg.T)
          for (double k : vg.k) split.push_back({t, e, T, k});
  } else {
    for (double t : ts)
      if (auto prm = default_split_params(nl, t, lstar.value_or(br.states[br.prefold_end()].lambda)))
        split.push_back(*prm);
  }

  auto tag = [](VerificationReport r, std::size_t k) {
    r.state.index = static_cast<long>(k);
    return r;
  };
  for (std::size_t k = 0; k <= br.prefold_end() && k < br.states.size(); ++k) {
    const auto& st = br.states[k];
    out.push_back(tag(check_pointwise_bound(st, tol, lstar), k));
    if (!(st.lambda > 0.0)) continue;
    for (double t : ts) {
      auto es = check_energy_start(st, t, tol, lstar);
      out.push_back(tag(std::move(es.inequality), k));
      out.push_back(tag(std::move(es.identity), k));
      if (t < t_star) out.push_back(tag(check_lp_conclusion(st, t, tol, lstar), k));
    }
    for (const auto& prm : split) out.push_back(tag(check_region_split(st, prm, tol, lstar), k));
    const std::uint64_t seed = cfg.seed ^ (0x9e3779b97f4a7c15ULL * (k + 1));
    out.push_back(tag(check_system_lemma(st, vg.lemma_pairs, seed, tol, lstar), k));
    if (nl.family() == Family::PowerR) {
      auto [strict, info] = check_convexity_coefficient(st, tol);
      out.push_back(tag(std::move(strict), k));
      out.push_back(tag(std::move(info), k));
    }
  }
  for (auto& r : check_branch_inequalities(br, tol)) out.push_back(std::move(r));
  return out;
}

inline void tally(CellOutcome& res, const std::vector<VerificationReport>& reps) {
  res.verified = true;
  res.reports = reps.size();
  res.failures = 0;
  res.worst_margin = HUGE_VAL;
  for (const auto& r : reps) {
    if (!r.passed()) ++res.failures;
    if (!r.informational) res.worst_margin = std::min(res.worst_margin, r.margin + r.tolerance);
  }
}

inline std::filesystem::path report_path(const std::string& stem) { return stem + ".verify.csv"; }

inline void write_combined_summary(const std::filesystem::path& path, const std::vector<CellOutcome>& cells,
                                   const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << io::header_line(config_hash) << '\n'
      << "stem,family,p,dim,n,states,lambda_star_estimate,fold_index,partial,touchdown,status,"
         "verify_reports,verify_failures\n";
  for (const auto& c : cells) {
    const auto& s = c.summary;
    out << std::filesystem::path(c.stem).filename().string() << ',' << s.family << ',' << io::fmt(s.p) << ','
        << s.dim << ',' << s.n << ',' << s.states << ',' << io::fmt(s.lambda_star_estimate) << ','
        << (s.fold_index ? std::to_string(*s.fold_index) : std::string("none")) << ','
        << (s.partial ? "true" : "false") << ',' << (s.touchdown ? "true" : "false") << ','
        << (c.ok ? "ok" : "error") << ',';
    if (c.verified) out << c.reports << ',' << c.failures;
    else out << ',';
    out << '\n';
  }
}

inline void prepare_output(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec || !fs::is_directory(cfg.out)) throw std::runtime_error("cannot create output directory " + cfg.out);
  const auto probe = fs::path(cfg.out) / "config.json";
  std::ofstream out(probe, std::ios::binary);
  if (!out) throw std::runtime_error("output directory " + cfg.out + " is not writable");
  out << config_to_json(cfg) << '\n';
}

/// Traces every cell, writes the branch files, config.json and summary.csv.
/// Returns 0 when every cell finished, 3 when some cell stalled or failed.
inline int cmd_branch(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  prepare_output(cfg);
  const auto cells = cells_of(cfg);
  std::vector<CellOutcome> results(cells.size());
  run_parallel(cells.size(), [&](std::size_t i) {
    try {
      results[i] = branch_cell(cells[i], cfg);
    } catch (const std::exception& e) {
      results[i].stem = io::cell_stem(cells[i].nl, cells[i].dim, cells[i].n);
      results[i].summary.error = e.what();
    }
  });
  write_combined_summary(std::filesystem::path(cfg.out) / "summary.csv", results, config_hash(cfg));
  int status = 0;
  for (const auto& r : results) {
    log << r.stem << ": states " << r.summary.states << ", lambda* " << io::fmt(r.summary.lambda_star_estimate)
        << ", fold " << (r.summary.fold_index ? std::to_string(*r.summary.fold_index) : std::string("none"))
        << (r.summary.touchdown ? ", touchdown" : "") << (r.ok ? "" : ", ERROR: " + r.summary.error) << '\n';
    if (!r.ok) status = 3;
  }
  return status;
}

/// Verifies stored branches; writes <stem>.verify.csv beside each. Returns 1 when any
/// report fails, 0 otherwise. Unknown schema versions throw SchemaError.
inline int cmd_verify(const RunConfig& cfg, const std::vector<std::string>& branches, std::ostream& log) {
  int status = 0;
  for (const auto& path : branches) {
    const auto lb = io::read_branch(path);
    const auto reps = verify_branch(lb.record, cfg);
    const auto stem = io::stem_of(path).string();
    io::write_reports(report_path(stem), reps, lb.summary.config_hash);
    CellOutcome res;
    tally(res, reps);
    log << stem << ": " << res.reports << " reports, " << res.failures << " failed\n";
    for (const auto& r : reps)
      if (!r.passed())
        log << "  FAIL " << r.name << " state " << r.state.index << " margin " << io::fmt(r.margin)
            << " tolerance " << io::fmt(r.tolerance) << '\n';
    if (res.failures > 0) status = 1;
  }
  return status;
}

/// Branch plus verification for every cell; combined summary in summary.csv.
/// Returns 0 when everything finished and passed, 1 on verification failures, 3 on run errors.
inline int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  prepare_output(cfg);
  const auto cells = cells_of(cfg);
  std::vector<CellOutcome> results(cells.size());
  run_parallel(cells.size(), [&](std::size_t i) {
    try {
      BranchRecord br;
      results[i] = branch_cell(cells[i], cfg, &br);
      const auto reps = verify_branch(br, cfg);
      io::write_reports(report_path(results[i].stem), reps, config_hash(cfg));
      tally(results[i], reps);
    } catch (const std::exception& e) {
      results[i].stem = io::cell_stem(cells[i].nl, cells[i].dim, cells[i].n);
      results[i].summary.error = e.what();
      results[i].ok = false;
    }
  });
  write_combined_summary(std::filesystem::path(cfg.out) / "summary.csv", results, config_hash(cfg));
  int status = 0;
  for (const auto& r : results) {
    log << r.stem << ": lambda* " << io::fmt(r.summary.lambda_star_estimate) << ", " << r.reports << " reports, "
        << r.failures << " failed" << (r.ok ? "" : ", ERROR: " + r.summary.error) << '\n';
    if (!r.ok) status = 3;
    else if (r.failures > 0 && status == 0) status = 1;
  }
  return status;
}

/// Sample exponents for the threshold table and the consistency checks.
inline const std::vector<double>& threshold_p_grid() {
  static const std::vector<double> grid{1.01, 1.1, 2.0, 5.0, 10.0, 100.0, 1e4, 1e6};
  return grid;
}

struct ThresholdChecks {
  bool h_decreasing = true;
  bool dominance = true;
  long double limit_gap = 0;  ///< |4 h(1e6) - exponential bound|
  int pows_p2_max_dim = 0;
  bool all() const { return h_decreasing && dominance && limit_gap <= 1e-3L && pows_p2_max_dim == 6; }
};

inline ThresholdChecks threshold_checks() {
  ThresholdChecks rc;
  long double prev = HUGE_VALL;
  for (double p : threshold_p_grid()) {
    const long double h = power_bound_h(p);
    if (!(h < prev)) rc.h_decreasing = false;
    prev = h;
    const long double lp = p;
    if (!(2.0L * lp / (lp - 1.0L) < h)) rc.dominance = false;
  }
  rc.limit_gap = std::abs(4.0L * power_bound_h(1e6) - thresholds(Nonlinearity::exponential()).dim_bound);
  rc.pows_p2_max_dim = thresholds(Nonlinearity::power_s(2.0)).max_dimension;
  return rc;
}

/// Threshold table for the configured families (the exponent grid plus cfg.p for the power
/// families) followed by the consistency checks. Returns true when every consistency check holds.
inline bool write_thresholds(std::ostream& os, const RunConfig& cfg) {
  os << "family,p,s,t_star,dim_bound,root_residual,max_dim,theorem_applies\n";
  auto row = [&](const Nonlinearity& nl) {
    const auto th = thresholds(nl);
    os << nl.tag() << ',' << (nl.has_exponent() ? io::fmt(nl.p()) : std::string("-")) << ',' << io::fmt(th.s) << ','
       << io::fmt(th.t_star) << ',' << io::fmt(th.dim_bound) << ',' << io::fmt(th.margin_fn_root_check) << ','
       << th.max_dimension << ',' << (th.theorem_applicable ? "yes" : "no") << '\n';
  };
  for (const auto& fam : cfg.families) {
    if (fam == "exp") {
      row(Nonlinearity::exponential());
      continue;
    }
    std::vector<double> ps = threshold_p_grid();
    if (fam == "pows") ps.insert(std::upper_bound(ps.begin(), ps.end(), 3.0), 3.0);
    if (std::find(ps.begin(), ps.end(), cfg.p) == ps.end()) ps.insert(std::upper_bound(ps.begin(), ps.end(), cfg.p), cfg.p);
    for (double p : ps) row(Nonlinearity::parse(fam, p));
  }
  const auto rc = threshold_checks();
  os << "\nconsistency checks\n"
     << "h(p) strictly decreasing on the p grid: " << (rc.h_decreasing ? "yes" : "NO") << '\n'
     << "2p/(p-1) < h(p) at every sampled p: " << (rc.dominance ? "yes" : "NO") << '\n'
     << "|4 h(1e6) - exponential bound| = " << io::fmt(rc.limit_gap) << (rc.limit_gap <= 1e-3L ? " (<= 1e-3)" : " (> 1e-3)")
     << '\n'
     << "pows p=2: theorem applies for N <= " << rc.pows_p2_max_dim << '\n';
  return rc.all();
}

}  // namespace bbranch
