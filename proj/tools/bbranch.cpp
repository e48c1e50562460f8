// bbranch: trace minimal branches, verify the energy estimates on them, print thresholds.
//
//   bbranch thresholds [--family exp,powr,pows] [--p P]
//   bbranch branch     --family exp --dims 2,3,5,10 --grid-sizes 1000 --out DIR
//   bbranch verify     [--tol TOL] [--seed S] DIR/exp_N3_n1000 ...
//   bbranch sweep      --family exp,powr,pows --dims 2,3,5,10 --out DIR
//
// Exit status: 0 success; 1 a verification margin fell below -tol (or a threshold check
// failed); 2 usage or schema error; 3 a branch run stalled or failed.

#include "bbranch/config.hpp"
#include "bbranch/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

struct Flags {
  std::string config_file;
  std::vector<std::string> families;
  std::optional<double> p;
  std::vector<int> dims;
  std::vector<std::size_t> grid_sizes;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config_file, "JSON run configuration (flags override it)");
  app->add_option("--family", f.families, "exp, powr, pows (comma list)")->delimiter(',');
  app->add_option("--p", f.p, "exponent of the power families");
  app->add_option("--dims", f.dims, "space dimensions (comma list)")->delimiter(',');
  app->add_option("--grid-sizes", f.grid_sizes, "radial grid sizes n (comma list)")->delimiter(',');
  app->add_option("--out", f.out, "output directory");
  app->add_option("--seed", f.seed, "seed for the random test functions");
  app->add_option("--tol", f.tol, "relative verification tolerance");
}

bbranch::RunConfig resolve(const Flags& f) {
  bbranch::RunConfig cfg;
  if (!f.config_file.empty()) {
    std::ifstream in(f.config_file);
    if (!in) throw std::runtime_error("cannot read " + f.config_file);
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = bbranch::config_from_json(ss.str());
  }
  if (!f.families.empty()) cfg.families = f.families;
  if (f.p) cfg.p = *f.p;
  if (!f.dims.empty()) cfg.dims = f.dims;
  if (!f.grid_sizes.empty()) cfg.grid_sizes = f.grid_sizes;
  if (f.out) cfg.out = *f.out;
  if (f.seed) cfg.seed = *f.seed;
  if (f.tol) cfg.verify.tol = *f.tol;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimal-branch continuation and inequality verification for Delta^2 u = lambda f(u)"};
  app.require_subcommand(1);

  Flags thr_f, br_f, ver_f, sw_f;
  std::vector<std::string> files;
  auto* thr = app.add_subcommand("thresholds", "print critical-dimension thresholds and consistency checks");
  add_common(thr, thr_f);
  auto* br = app.add_subcommand("branch", "trace minimal branches and write branch files");
  add_common(br, br_f);
  auto* ver = app.add_subcommand("verify", "run the inequality suite on branch files");
  add_common(ver, ver_f);
  ver->add_option("files", files, "branch stems or branch file names");
  auto* sw = app.add_subcommand("sweep", "branch and verify every (family, N, n) cell");
  add_common(sw, sw_f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*thr) {
      auto cfg = resolve(thr_f);
      if (thr_f.families.empty() && thr_f.config_file.empty()) cfg.families = {"exp", "powr", "pows"};
      return bbranch::write_thresholds(std::cout, cfg) ? 0 : 1;
    }
    if (*br) return bbranch::cmd_branch(resolve(br_f), std::cout);
    if (*ver) {
      auto cfg = resolve(ver_f);
      if (files.empty()) {
        if (ver_f.families.empty() && ver_f.config_file.empty()) cfg.families = {"exp", "powr", "pows"};
        return bbranch::write_thresholds(std::cout, cfg) ? 0 : 1;
      }
      return bbranch::cmd_verify(cfg, files, std::cout);
    }
    if (*sw) {
      auto cfg = resolve(sw_f);
      if (sw_f.families.empty() && sw_f.config_file.empty()) cfg.families = {"exp", "powr", "pows"};
      if (sw_f.dims.empty() && sw_f.config_file.empty()) cfg.dims = {2, 3, 5, 10};
      return bbranch::cmd_sweep(cfg, std::cout);
    }
  } catch (const bbranch::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
