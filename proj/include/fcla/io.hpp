#ifndef FCLA_IO_HPP
#define FCLA_IO_HPP

#include "fcla/metrics.hpp"
#include "fcla/scenario.hpp"
#include "fcla/types.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fcla::io {

// Grammar, one entry per line:
//   key = value
// Blank lines and lines starting with '#' are ignored. Keys are
// [A-Za-z0-9_.]+. Lists are comma separated. Complex numbers are written
// re+imi or re-imi (e.g. 1.5e-3-2i). Matrices are stored row-major with the
// shape in a companion key. Later duplicates are an error.

class KeyValueFile {
public:
  std::map<std::string, std::string> entries;

  static KeyValueFile parse(std::istream& is)
  {
    KeyValueFile f;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("line " + std::to_string(lineno) + ": expected 'key = value'");
      const std::string key = trim(t.substr(0, eq));
      const std::string val = trim(t.substr(eq + 1));
      if (key.empty()) throw std::invalid_argument("line " + std::to_string(lineno) + ": empty key");
      for (char ch : key)
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.'))
          throw std::invalid_argument("line " + std::to_string(lineno) + ": invalid key '" + key + "'");
      if (!f.entries.emplace(key, val).second)
        throw std::invalid_argument("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return f;
  }

  static KeyValueFile load(const std::string& path)
  {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return parse(is);
  }

  bool has(const std::string& key) const { return entries.count(key) != 0; }

  const std::string& raw(const std::string& key) const
  {
    auto it = entries.find(key);
    if (it == entries.end()) throw std::invalid_argument("missing key '" + key + "'");
    return it->second;
  }

  double real(const std::string& key) const { return parse_real(raw(key)); }

  long long integer(const std::string& key) const
  {
    const std::string& s = raw(key);
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("bad integer for '" + key + "'");
    return v;
  }

  Vec real_list(const std::string& key) const
  {
    const auto parts = split(raw(key));
    Vec v(static_cast<Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) v(static_cast<Index>(i)) = parse_real(parts[i]);
    return v;
  }

  CVec complex_list(const std::string& key) const
  {
    const auto parts = split(raw(key));
    CVec v(static_cast<Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) v(static_cast<Index>(i)) = parse_complex(parts[i]);
    return v;
  }

  void set(const std::string& key, const std::string& value) { entries[key] = value; }

  void write(std::ostream& os) const
  {
    for (const auto& [k, v] : entries) os << k << " = " << v << "\n";
  }

  static std::string trim(const std::string& s)
  {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static std::vector<std::string> split(const std::string& s)
  {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
  }

  static double parse_real(const std::string& s)
  {
    const std::string t = trim(s);
    if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || t.empty())
      throw std::invalid_argument("bad number '" + t + "'");
    return v;
  }

  static cdouble parse_complex(const std::string& s)
  {
    const std::string t = trim(s);
    if (t.empty()) throw std::invalid_argument("empty complex value");
    if (t.back() != 'i') return {parse_real(t), 0.0};
    const std::string body = t.substr(0, t.size() - 1);
    for (std::size_t i = body.size(); i-- > 1;) {
      const char c = body[i];
      if ((c == '+' || c == '-') && body[i - 1] != 'e' && body[i - 1] != 'E')
        return {parse_real(body.substr(0, i)), parse_real(body.substr(c == '+' ? i + 1 : i))};
    }
    return {0.0, parse_real(body)};
  }
};

inline std::string fmt(double x)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string fmt(cdouble z)
{
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.17g%+.17gi", z.real(), z.imag());
  return buf;
}

template <class Derived>
std::string fmt_list(const Eigen::DenseBase<Derived>& v)
{
  std::string out;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt(v.derived().coeff(i));
  }
  return out;
}

template <class Derived>
std::string fmt_rowmajor(const Eigen::DenseBase<Derived>& m)
{
  std::string out;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      if (i || j) out += ", ";
      out += fmt(m.derived().coeff(i, j));
    }
  return out;
}

inline void put_scenario(KeyValueFile& f, const Scenario& s)
{
  const ArrayConfig& c = s.config;
  f.set("array.M", std::to_string(c.M));
  f.set("array.N", std::to_string(c.N));
  f.set("array.rho", fmt(c.rho));
  f.set("array.lambda", fmt(c.lambda));
  f.set("array.phi_th", fmt(c.phi_th));
  f.set("array.z_th", fmt(c.z_th));
  f.set("array.A", fmt(c.A));
  f.set("K", std::to_string(s.K()));
  f.set("P", fmt(s.P));
  f.set("gamma_th_e", s.secrecy_active() ? fmt(s.gamma_th_e()) : "inf");
  f.set("sigma2_ir", fmt_list(s.sigma2_ir));
  f.set("sigma2_eve", fmt(s.sigma2_eve));
  auto put_paths = [&](const std::string& prefix, const PathSet& p) {
    f.set(prefix + ".theta", fmt_list(p.theta));
    f.set(prefix + ".phi_az", fmt_list(p.phi_az));
    f.set(prefix + ".beta", fmt_list(p.beta));
  };
  for (Index k = 0; k < s.K(); ++k) put_paths("ir" + std::to_string(k + 1), s.ir_paths[static_cast<std::size_t>(k)]);
  put_paths("eve", s.eve_paths);
}

inline Scenario get_scenario(const KeyValueFile& f)
{
  Scenario s;
  ArrayConfig& c = s.config;
  c.M = f.integer("array.M");
  c.N = f.integer("array.N");
  c.rho = f.real("array.rho");
  c.lambda = f.real("array.lambda");
  c.phi_th = f.real("array.phi_th");
  c.z_th = f.real("array.z_th");
  c.A = f.real("array.A");
  const long long K = f.integer("K");
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  s.P = f.real("P");
  s.set_gamma_th_e(f.real("gamma_th_e"));
  s.sigma2_ir = f.real_list("sigma2_ir");
  s.sigma2_eve = f.real("sigma2_eve");
  auto get_paths = [&](const std::string& prefix) {
    PathSet p;
    p.theta = f.real_list(prefix + ".theta");
    p.phi_az = f.real_list(prefix + ".phi_az");
    p.beta = f.complex_list(prefix + ".beta");
    return p;
  };
  for (long long k = 0; k < K; ++k) s.ir_paths.push_back(get_paths("ir" + std::to_string(k + 1)));
  s.eve_paths = get_paths("eve");
  s.validate();
  return s;
}

inline void put_solution(KeyValueFile& f, const Placement& p, const BeamSolution& sol)
{
  f.set("placement.phi", fmt_rowmajor(p.phi));
  f.set("placement.z", fmt_list(p.z));
  f.set("beams.rows", std::to_string(sol.W.rows()));
  f.set("beams.cols", std::to_string(sol.W.cols()));
  f.set("beams.W", fmt_rowmajor(sol.W));
  f.set("beams.R_e", fmt_rowmajor(sol.R_e));
}

struct SolutionFile {
  Scenario scenario;
  Placement placement;
  BeamSolution beams;
};

inline SolutionFile get_solution(const KeyValueFile& f)
{
  SolutionFile out;
  out.scenario = get_scenario(f);
  const ArrayConfig& c = out.scenario.config;
  const Vec phi = f.real_list("placement.phi");
  if (phi.size() != c.M * c.N) throw std::invalid_argument("placement.phi must have M*N entries");
  out.placement.phi = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      phi.data(), c.M, c.N);
  out.placement.z = f.real_list("placement.z");
  if (out.placement.z.size() != c.M) throw std::invalid_argument("placement.z must have M entries");
  const Index rows = f.integer("beams.rows");
  const Index cols = f.integer("beams.cols");
  if (rows != c.num_antennas() || cols != out.scenario.K())
    throw std::invalid_argument("beam dimensions do not match the scenario");
  const CVec W = f.complex_list("beams.W");
  const CVec Re = f.complex_list("beams.R_e");
  if (W.size() != rows * cols || Re.size() != rows * rows) throw std::invalid_argument("beam entry count mismatch");
  using RowMajor = Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  out.beams.W = Eigen::Map<const RowMajor>(W.data(), rows, cols);
  out.beams.R_e = Eigen::Map<const RowMajor>(Re.data(), rows, rows);
  return out;
}

inline void save_solution(const std::string& path, const Scenario& s, const Placement& p, const BeamSolution& sol)
{
  KeyValueFile f;
  put_scenario(f, s);
  put_solution(f, p, sol);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  f.write(os);
}

inline SolutionFile load_solution(const std::string& path)
{
  return get_solution(KeyValueFile::load(path));
}

} // namespace fcla::io

#endif // FCLA_IO_HPP
