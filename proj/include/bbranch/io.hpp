#pragma once

/**
 * @file io.hpp
 * @brief Branch files and verification reports on disk.
 *
 * A branch with stem S is stored as three files:
 *  - S.csv          one row per state: index, arclength, lambda, u0, max_u, mu1, nu1, newton_residual
 *  - S.fields.csv   one row per (state, node): state, node, r, u, v
 *  - S.summary      "key: value" lines, first line "schema: 1"
 * Both CSV files start with "# bbranch schema: 1 config_hash: <hex>". Reals are written
 * with std::to_chars in shortest round-trip form, so reading a file back reproduces
 * every state bit for bit. Readers reject any schema other than 1.
 */

#include "bbranch/errors.hpp"
#include "bbranch/solve.hpp"
#include "bbranch/verify.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace bbranch::io {

inline constexpr int kSchemaVersion = 1;

inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string fmt(long double x) {
  char buf[96];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  if (s == "nan") return NAN;
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  double x = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw SchemaError("malformed number '" + std::string(s) + "'");
  return x;
}

inline long parse_long(std::string_view s) {
  long x = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw SchemaError("malformed integer '" + std::string(s) + "'");
  return x;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i)
    if (i == line.size() || line[i] == sep) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  return out;
}

inline std::string header_line(const std::string& config_hash) {
  return "# bbranch schema: " + std::to_string(kSchemaVersion) + " config_hash: " + config_hash;
}

/// Parses a CSV comment header; returns the config hash.
inline std::string check_header(const std::string& line, const std::string& file) {
  const std::string tag = "# bbranch schema: ";
  if (line.rfind(tag, 0) != 0) throw SchemaError(file + ": missing schema header");
  std::istringstream rest(line.substr(tag.size()));
  std::string version, key, hash;
  rest >> version >> key >> hash;
  if (version != std::to_string(kSchemaVersion))
    throw SchemaError(file + ": unsupported schema version " + version + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  return hash;
}

struct BranchRow {
  long index = 0;
  double arclength = 0, lambda = 0, u0 = 0, max_u = 0, mu1 = NAN, nu1 = NAN, newton_residual = 0;
};

inline constexpr const char* kBranchColumns = "index,arclength,lambda,u0,max_u,mu1,nu1,newton_residual";
inline constexpr const char* kFieldColumns = "state,node,r,u,v";

struct BranchFiles {
  std::filesystem::path table, fields, summary;
};

inline BranchFiles files_for(const std::filesystem::path& stem) {
  const std::string s = stem.string();
  return {s + ".csv", s + ".fields.csv", s + ".summary"};
}

/// Accepts a stem or any of the three file names and returns the stem.
inline std::filesystem::path stem_of(const std::filesystem::path& path) {
  std::string s = path.string();
  for (const char* suffix : {".fields.csv", ".summary", ".csv"}) {
    const std::string suf(suffix);
    if (s.size() > suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0)
      return s.substr(0, s.size() - suf.size());
  }
  return path;
}

/// File stem of a (family, p, N, n) cell, e.g. "powr_p2_N3_n1000".
inline std::string cell_stem(const Nonlinearity& nl, int dim, std::size_t n) {
  std::string s = nl.tag();
  if (nl.has_exponent()) s += "_p" + fmt(nl.p());
  return s + "_N" + std::to_string(dim) + "_n" + std::to_string(n);
}

struct BranchSummary {
  std::string family;
  double p = 0;
  int dim = 0;
  std::size_t n = 0;
  double lambda_star_estimate = 0;
  std::optional<long> fold_index;
  bool fold_refined = false;
  bool partial = false;
  bool touchdown = false;
  std::size_t states = 0;
  double lambda_ref = 0;
  std::string config_hash;
  std::string error;  ///< empty unless the run stopped early
};

inline BranchSummary summarize(const BranchRecord& br, const std::string& config_hash) {
  BranchSummary s;
  s.family = br.nl.tag();
  s.p = br.nl.p();
  s.dim = br.dim;
  s.n = br.n;
  s.lambda_star_estimate = br.lambda_star_estimate;
  if (br.fold_index) s.fold_index = static_cast<long>(*br.fold_index);
  s.fold_refined = br.fold_state.has_value();
  s.partial = br.partial;
  s.touchdown = br.touchdown;
  s.states = br.states.size();
  s.lambda_ref = br.lambda_ref;
  s.config_hash = config_hash;
  return s;
}

inline void write_summary(const std::filesystem::path& path, const BranchSummary& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "schema: " << kSchemaVersion << '\n'
      << "family: " << s.family << '\n'
      << "p: " << fmt(s.p) << '\n'
      << "dim: " << s.dim << '\n'
      << "n: " << s.n << '\n'
      << "lambda_star_estimate: " << fmt(s.lambda_star_estimate) << '\n'
      << "fold_index: " << (s.fold_index ? std::to_string(*s.fold_index) : std::string("none")) << '\n'
      << "fold_refined: " << (s.fold_refined ? "true" : "false") << '\n'
      << "partial: " << (s.partial ? "true" : "false") << '\n'
      << "touchdown: " << (s.touchdown ? "true" : "false") << '\n'
      << "states: " << s.states << '\n'
      << "lambda_ref: " << fmt(s.lambda_ref) << '\n'
      << "config_hash: " << s.config_hash << '\n';
  if (!s.error.empty()) out << "error: " << s.error << '\n';
}

inline std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw SchemaError(path.string() + ": malformed line '" + line + "'");
    std::string value = line.substr(colon + 1);
    if (!value.empty() && value.front() == ' ') value.erase(0, 1);
    kv[line.substr(0, colon)] = value;
  }
  return kv;
}

inline BranchSummary read_summary(const std::filesystem::path& path) {
  const auto kv = read_key_values(path);
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw SchemaError(path.string() + ": missing field '" + key + "'");
    return it->second;
  };
  const auto sch = kv.find("schema");
  if (sch == kv.end()) throw SchemaError(path.string() + ": missing schema version");
  if (sch->second != std::to_string(kSchemaVersion))
    throw SchemaError(path.string() + ": unsupported schema version " + sch->second + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  BranchSummary s;
  s.family = get("family");
  s.p = parse_double(get("p"));
  s.dim = static_cast<int>(parse_long(get("dim")));
  s.n = static_cast<std::size_t>(parse_long(get("n")));
  s.lambda_star_estimate = parse_double(get("lambda_star_estimate"));
  const auto& fi = get("fold_index");
  if (fi != "none") s.fold_index = parse_long(fi);
  s.fold_refined = get("fold_refined") == "true";
  s.partial = get("partial") == "true";
  s.touchdown = get("touchdown") == "true";
  s.states = static_cast<std::size_t>(parse_long(get("states")));
  s.lambda_ref = parse_double(get("lambda_ref"));
  s.config_hash = get("config_hash");
  if (auto it = kv.find("error"); it != kv.end()) s.error = it->second;
  return s;
}

inline void write_table(const std::filesystem::path& path, const std::vector<BranchRow>& rows,
                        const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header_line(config_hash) << '\n' << kBranchColumns << '\n';
  for (const auto& r : rows)
    out << r.index << ',' << fmt(r.arclength) << ',' << fmt(r.lambda) << ',' << fmt(r.u0) << ','
        << fmt(r.max_u) << ',' << fmt(r.mu1) << ',' << fmt(r.nu1) << ',' << fmt(r.newton_residual) << '\n';
}

inline std::vector<BranchRow> read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path.string() + ": empty file");
  check_header(line, path.string());
  if (!std::getline(in, line) || line != kBranchColumns)
    throw SchemaError(path.string() + ": unexpected column header");
  std::vector<BranchRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != 8) throw SchemaError(path.string() + ": expected 8 columns");
    rows.push_back({parse_long(c[0]), parse_double(c[1]), parse_double(c[2]), parse_double(c[3]),
                    parse_double(c[4]), parse_double(c[5]), parse_double(c[6]), parse_double(c[7])});
  }
  return rows;
}

inline void write_fields(const std::filesystem::path& path, const BranchRecord& br, const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header_line(config_hash) << '\n' << kFieldColumns << '\n';
  std::string line;
  for (std::size_t k = 0; k < br.states.size(); ++k) {
    const auto& st = br.states[k];
    const auto r = st.grid().r();
    for (std::size_t i = 0; i < st.u.size(); ++i) {
      line.clear();
      line += std::to_string(k);
      line += ',';
      line += std::to_string(i);
      line += ',';
      line += fmt(r[i]);
      line += ',';
      line += fmt(st.u[i]);
      line += ',';
      line += fmt(st.v[i]);
      line += '\n';
      out << line;
    }
  }
}

struct LoadedBranch {
  BranchRecord record;
  BranchSummary summary;
  std::vector<BranchRow> rows;
};

/// Rebuilds a BranchRecord from its three files. The grid is reconstructed from (dim, n)
/// and must match the stored node positions.
inline LoadedBranch read_branch(const std::filesystem::path& stem_path) {
  const auto stem = stem_of(stem_path);
  const auto files = files_for(stem);
  LoadedBranch lb;
  lb.summary = read_summary(files.summary);
  lb.rows = read_table(files.table);
  const auto& s = lb.summary;
  if (lb.rows.size() != s.states)
    throw SchemaError(files.table.string() + ": row count does not match the summary");
  auto& br = lb.record;
  br.nl = Nonlinearity::parse(s.family, s.p);
  br.dim = s.dim;
  br.n = s.n;
  br.lambda_star_estimate = s.lambda_star_estimate;
  br.lambda_ref = s.lambda_ref;
  br.partial = s.partial;
  br.touchdown = s.touchdown;
  if (s.fold_index) br.fold_index = static_cast<std::size_t>(*s.fold_index);
  auto disc = std::make_shared<const Discretization>(s.n, s.dim);
  br.states.resize(s.states);
  for (std::size_t k = 0; k < s.states; ++k) {
    auto& st = br.states[k];
    st.lambda = lb.rows[k].lambda;
    st.newton_residual = lb.rows[k].newton_residual;
    st.nl = br.nl;
    st.disc = disc;
    st.u.assign(s.n + 1, NAN);
    st.v.assign(s.n + 1, NAN);
    br.arclength.push_back(lb.rows[k].arclength);
  }

  std::ifstream in(files.fields, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + files.fields.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(files.fields.string() + ": empty file");
  check_header(line, files.fields.string());
  if (!std::getline(in, line) || line != kFieldColumns)
    throw SchemaError(files.fields.string() + ": unexpected column header");
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != 5) throw SchemaError(files.fields.string() + ": expected 5 columns");
    const long k = parse_long(c[0]);
    const long i = parse_long(c[1]);
    if (k < 0 || static_cast<std::size_t>(k) >= s.states || i < 0 || static_cast<std::size_t>(i) > s.n)
      throw SchemaError(files.fields.string() + ": state or node index out of range");
    if (std::abs(parse_double(c[2]) - disc->grid.r(static_cast<std::size_t>(i))) > 1e-12)
      throw SchemaError(files.fields.string() + ": node positions do not match the grid");
    br.states[static_cast<std::size_t>(k)].u[static_cast<std::size_t>(i)] = parse_double(c[3]);
    br.states[static_cast<std::size_t>(k)].v[static_cast<std::size_t>(i)] = parse_double(c[4]);
    ++count;
  }
  if (count != s.states * (s.n + 1)) throw SchemaError(files.fields.string() + ": incomplete field data");
  if (br.fold_index && s.fold_refined) br.fold_state = br.states.at(*br.fold_index);
  return lb;
}

inline constexpr const char* kReportColumns =
    "check,state,lambda,t,eps,T,k,lhs,rhs,margin,tolerance,admissible,restricted_range,informational,passed";

inline void write_reports(const std::filesystem::path& path, const std::vector<VerificationReport>& reps,
                          const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header_line(config_hash) << '\n' << kReportColumns << '\n';
  auto b = [](bool x) { return x ? "true" : "false"; };
  for (const auto& r : reps) {
    const SplitParams prm = r.params.value_or(SplitParams{NAN, NAN, NAN, NAN});
    out << r.name << ',' << r.state.index << ',' << fmt(r.state.lambda) << ',' << fmt(prm.t) << ','
        << fmt(prm.eps) << ',' << fmt(prm.T) << ',' << fmt(prm.k) << ',' << fmt(r.lhs) << ',' << fmt(r.rhs)
        << ',' << fmt(r.margin) << ',' << fmt(r.tolerance) << ',' << b(r.admissible) << ','
        << b(r.restricted_range) << ',' << b(r.informational) << ',' << b(r.passed()) << '\n';
  }
}

}  // namespace bbranch::io
