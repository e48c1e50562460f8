#pragma once

// Run configuration shared by the CLI subcommands, with JSON round-tripping and a
// stable content hash stamped into every output file.

#include "bbranch/model.hpp"
#include "bbranch/solve.hpp"
#include "bbranch/verify.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <string>
#include <vector>

namespace bbranch {

struct VerifyGrid {
  std::vector<double> t;    ///< empty: midpoint of (1, t_star)
  std::vector<double> eps;  ///< empty (with T, k): default admissible parameters
  std::vector<double> T;
  std::vector<double> k;
  std::size_t lemma_pairs = 100;
  double tol = kDefaultVerifyTol;
};

struct RunConfig {
  std::vector<std::string> families{"exp"};
  double p = 2.0;
  std::vector<int> dims{2};
  std::vector<std::size_t> grid_sizes{1000};
  ContinuationParams continuation{};
  VerifyGrid verify{};
  std::string out = "out";
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when a parameter violates a module precondition.
  void validate() const {
    if (families.empty()) throw std::invalid_argument("no family given");
    for (const auto& f : families) (void)Nonlinearity::parse(f, p);
    for (const auto& f : families)
      if (f != "exp" && !(p > 1.0 && p <= Nonlinearity::kMaxExponent))
        throw std::invalid_argument("exponent p must satisfy 1 < p <= 1e6");
    if (dims.empty()) throw std::invalid_argument("no dimension given");
    for (int d : dims)
      if (d < 2) throw std::invalid_argument("dimension must be >= 2");
    if (grid_sizes.empty()) throw std::invalid_argument("no grid size given");
    for (auto n : grid_sizes)
      if (n < RadialGrid::kMinNodes) throw std::invalid_argument("grid size must be >= 16");
    for (double t : verify.t)
      if (!(t > 1.0)) throw std::invalid_argument("verification exponent t must exceed 1");
    const bool any_split = !verify.eps.empty() || !verify.T.empty() || !verify.k.empty();
    if (any_split && (verify.eps.empty() || verify.T.empty() || verify.k.empty()))
      throw std::invalid_argument("eps, T and k grids must be given together");
    if (!(verify.tol >= 0.0)) throw std::invalid_argument("tolerance must be nonnegative");
    const auto& c = continuation;
    if (!(c.ds_min > 0.0 && c.ds_initial >= c.ds_min && c.ds_max >= c.ds_initial))
      throw std::invalid_argument("continuation steps must satisfy 0 < ds_min <= ds_initial <= ds_max");
    if (!(c.lambda_start_fraction > 0.0)) throw std::invalid_argument("lambda_start_fraction must be positive");
    if (!(c.delta_touch > 0.0 && c.delta_touch < 1.0)) throw std::invalid_argument("delta_touch must lie in (0, 1)");
    if (c.max_steps <= 0 || c.corrector_max_iter <= 0) throw std::invalid_argument("iteration limits must be positive");
  }
};

inline void to_json(nlohmann::json& j, const ContinuationParams& c) {
  j = {{"lambda_start_fraction", c.lambda_start_fraction},
       {"ds_initial", c.ds_initial},
       {"ds_max", c.ds_max},
       {"ds_min", c.ds_min},
       {"grow", c.grow},
       {"fast_corrector_iters", c.fast_corrector_iters},
       {"corrector_max_iter", c.corrector_max_iter},
       {"max_steps", c.max_steps},
       {"steps_after_fold", c.steps_after_fold},
       {"delta_touch", c.delta_touch},
       {"newton_tol", c.newton.tol},
       {"newton_max_iter", c.newton.max_iter},
       {"newton_max_halvings", c.newton.max_halvings}};
}

inline void from_json(const nlohmann::json& j, ContinuationParams& c) {
  const ContinuationParams d{};
  c.lambda_start_fraction = j.value("lambda_start_fraction", d.lambda_start_fraction);
  c.ds_initial = j.value("ds_initial", d.ds_initial);
  c.ds_max = j.value("ds_max", d.ds_max);
  c.ds_min = j.value("ds_min", d.ds_min);
  c.grow = j.value("grow", d.grow);
  c.fast_corrector_iters = j.value("fast_corrector_iters", d.fast_corrector_iters);
  c.corrector_max_iter = j.value("corrector_max_iter", d.corrector_max_iter);
  c.max_steps = j.value("max_steps", d.max_steps);
  c.steps_after_fold = j.value("steps_after_fold", d.steps_after_fold);
  c.delta_touch = j.value("delta_touch", d.delta_touch);
  c.newton.tol = j.value("newton_tol", d.newton.tol);
  c.newton.max_iter = j.value("newton_max_iter", d.newton.max_iter);
  c.newton.max_halvings = j.value("newton_max_halvings", d.newton.max_halvings);
}

inline void to_json(nlohmann::json& j, const VerifyGrid& v) {
  j = {{"t", v.t}, {"eps", v.eps}, {"T", v.T}, {"k", v.k}, {"lemma_pairs", v.lemma_pairs}, {"tol", v.tol}};
}

inline void from_json(const nlohmann::json& j, VerifyGrid& v) {
  const VerifyGrid d{};
  v.t = j.value("t", d.t);
  v.eps = j.value("eps", d.eps);
  v.T = j.value("T", d.T);
  v.k = j.value("k", d.k);
  v.lemma_pairs = j.value("lemma_pairs", d.lemma_pairs);
  v.tol = j.value("tol", d.tol);
}

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"families", c.families}, {"p", c.p},     {"dims", c.dims},         {"grid_sizes", c.grid_sizes},
       {"continuation", c.continuation},        {"verify", c.verify},     {"out", c.out},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  const RunConfig d{};
  c.families = j.value("families", d.families);
  c.p = j.value("p", d.p);
  c.dims = j.value("dims", d.dims);
  c.grid_sizes = j.value("grid_sizes", d.grid_sizes);
  c.continuation = j.value("continuation", d.continuation);
  c.verify = j.value("verify", d.verify);
  c.out = j.value("out", d.out);
  c.seed = j.value("seed", d.seed);
}

inline std::string config_to_json(const RunConfig& c) { return nlohmann::json(c).dump(2); }

inline RunConfig config_from_json(const std::string& text) {
  RunConfig c = nlohmann::json::parse(text).get<RunConfig>();
  c.validate();
  return c;
}

/// FNV-1a 64 of the canonical JSON (sorted keys) without the output directory, in hex.
inline std::string config_hash(const RunConfig& c) {
  nlohmann::json j = c;
  j.erase("out");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  auto res = std::to_chars(buf, buf + sizeof buf, h, 16);
  std::string hex(buf, res.ptr);
  return std::string(16 - hex.size(), '0') + hex;
}

}  // namespace bbranch
