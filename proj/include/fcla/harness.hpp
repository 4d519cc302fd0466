#ifndef FCLA_HARNESS_HPP
#define FCLA_HARNESS_HPP

#include "fcla/bcd.hpp"
#include "fcla/io.hpp"
#include "fcla/metrics.hpp"
#include "fcla/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fcla {

enum class Scheme { fpa, fcla_phi, fcla_phi_z };
enum class ExperimentKind { convergence, power_sweep, region_sweep };

inline const char* to_string(Scheme s)
{
  switch (s) {
  case Scheme::fpa: return "FPA";
  case Scheme::fcla_phi: return "FCLA_phi";
  case Scheme::fcla_phi_z: return "FCLA_phi_z";
  }
  return "unknown";
}

inline Scheme parse_scheme(const std::string& s)
{
  if (s == "FPA") return Scheme::fpa;
  if (s == "FCLA_phi") return Scheme::fcla_phi;
  if (s == "FCLA_phi_z") return Scheme::fcla_phi_z;
  throw std::invalid_argument("unknown scheme: " + s);
}

inline const char* to_string(ExperimentKind k)
{
  switch (k) {
  case ExperimentKind::convergence: return "convergence";
  case ExperimentKind::power_sweep: return "power_sweep";
  case ExperimentKind::region_sweep: return "region_sweep";
  }
  return "unknown";
}

/// Grid from "a:step:b" or a comma separated list.
inline std::vector<double> parse_grid(const std::string& text)
{
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ':')) parts.push_back(io::KeyValueFile::parse_real(tok));
    if (parts.size() != 3 || !(parts[1] > 0.0) || parts[2] < parts[0])
      throw std::invalid_argument("grid range must be start:step:stop with step > 0");
    const auto n = static_cast<long long>(std::floor((parts[2] - parts[0]) / parts[1] + 1e-9));
    for (long long i = 0; i <= n; ++i) out.push_back(parts[0] + static_cast<double>(i) * parts[1]);
  } else {
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(io::KeyValueFile::parse_real(tok));
  }
  if (out.empty()) throw std::invalid_argument("empty grid");
  return out;
}

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::power_sweep;
  std::vector<Scheme> schemes{Scheme::fpa, Scheme::fcla_phi, Scheme::fcla_phi_z};
  std::vector<double> grid;    // P_t in dBW, z_D / lambda, or N_t
  int trials = 50;
  std::uint64_t base_seed = 1;
  SamplingParams params;
  BcdOptions bcd;
  std::string out;             // CSV path; empty writes nothing

  static ExperimentSpec defaults(ExperimentKind kind)
  {
    ExperimentSpec s;
    s.kind = kind;
    switch (kind) {
    case ExperimentKind::convergence:
      s.schemes = {Scheme::fcla_phi_z};
      s.grid = {6, 8, 12};
      s.trials = 1;
      break;
    case ExperimentKind::power_sweep: s.grid = parse_grid("-10:2:14"); break;
    case ExperimentKind::region_sweep: s.grid = parse_grid("1:1:8"); break;
    }
    return s;
  }

  void validate() const
  {
    if (schemes.empty()) throw std::invalid_argument("ExperimentSpec: no schemes");
    if (grid.empty()) throw std::invalid_argument("ExperimentSpec: empty grid");
    if (trials < 1) throw std::invalid_argument("ExperimentSpec: trials must be >= 1");
    for (double g : grid) {
      if (!std::isfinite(g)) throw std::invalid_argument("ExperimentSpec: grid values must be finite");
      if (kind == ExperimentKind::convergence && (g < 2 || std::fmod(g, 2.0) != 0.0))
        throw std::invalid_argument("ExperimentSpec: N_t must be an even number >= 2");
      if (kind == ExperimentKind::region_sweep && !(g > 0.0))
        throw std::invalid_argument("ExperimentSpec: z_D / lambda must be positive");
    }
    bcd.validate();
    params.validate();
  }
};

/// Fixed layout: uniform angles 2 pi n / N, rings lambda / 2 apart and centred in [0, A].
inline Placement fpa_layout(const ArrayConfig& cfg)
{
  const double dz = cfg.lambda / 2.0;
  if (cfg.A < static_cast<double>(cfg.M - 1) * dz)
    throw std::invalid_argument("fpa_layout: A < (M - 1) lambda / 2");
  Placement p;
  p.phi.resize(cfg.M, cfg.N);
  p.z.resize(cfg.M);
  for (Index m = 0; m < cfg.M; ++m) {
    for (Index n = 0; n < cfg.N; ++n) p.phi(m, n) = kTwoPi * static_cast<double>(n) / static_cast<double>(cfg.N);
    p.z(m) = 0.5 * cfg.A + (static_cast<double>(m) - 0.5 * static_cast<double>(cfg.M - 1)) * dz;
  }
  return p;
}

struct ResultRow {
  std::string experiment;
  std::string scheme;
  double grid_value = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  int iters = 0;
  double sum_rate = 0.0;
  double eve_rate = 0.0;
  double power_used = 0.0;
  std::string status;
};

struct AggregateRow {
  std::string experiment;
  std::string scheme;
  double grid_value = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
  int n_ok = 0;
};

inline std::string fmt12(double x)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline const char* kCsvHeader = "experiment,scheme,grid_value,trial,seed,iters,sum_rate_bits,eve_rate_bits,power_used,status";
inline const char* kAggregateHeader = "experiment,scheme,grid_value,mean,stderr,n_ok";

inline void write_rows(std::ostream& os, const std::vector<ResultRow>& rows)
{
  os << kCsvHeader << '\n';
  for (const auto& r : rows)
    os << r.experiment << ',' << r.scheme << ',' << fmt12(r.grid_value) << ',' << r.trial << ',' << r.seed << ','
       << r.iters << ',' << fmt12(r.sum_rate) << ',' << fmt12(r.eve_rate) << ',' << fmt12(r.power_used) << ','
       << r.status << '\n';
}

inline void write_aggregate(std::ostream& os, const std::vector<AggregateRow>& rows)
{
  os << kAggregateHeader << '\n';
  for (const auto& r : rows)
    os << r.experiment << ',' << r.scheme << ',' << fmt12(r.grid_value) << ',' << fmt12(r.mean) << ','
       << fmt12(r.stderr_) << ',' << r.n_ok << '\n';
}

/// Means over rows with status "ok", grouped by (experiment, scheme, grid value) in first-seen order.
inline std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows)
{
  std::vector<AggregateRow> out;
  std::vector<std::vector<double>> samples;
  for (const auto& r : rows) {
    std::size_t idx = out.size();
    for (std::size_t i = 0; i < out.size(); ++i)
      if (out[i].experiment == r.experiment && out[i].scheme == r.scheme && out[i].grid_value == r.grid_value) {
        idx = i;
        break;
      }
    if (idx == out.size()) {
      out.push_back({r.experiment, r.scheme, r.grid_value, 0.0, 0.0, 0});
      samples.emplace_back();
    }
    if (r.status == "ok") samples[idx].push_back(r.sum_rate);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& v = samples[i];
    const auto n = static_cast<double>(v.size());
    out[i].n_ok = static_cast<int>(v.size());
    if (v.empty()) {
      out[i].mean = std::nan("");
      out[i].stderr_ = std::nan("");
      continue;
    }
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    out[i].mean = mean;
    out[i].stderr_ = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  }
  return out;
}

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<AggregateRow> summary;
  int failures = 0;
  std::vector<std::string> log;
};

namespace detail {

inline SamplingParams params_for(const ExperimentSpec& spec, double g)
{
  SamplingParams p = spec.params;
  switch (spec.kind) {
  case ExperimentKind::power_sweep: p.power_dbw = g; break;
  case ExperimentKind::region_sweep: p.config.A = g * p.config.lambda; break;
  case ExperimentKind::convergence:
    p.config.N = 2;
    p.config.M = static_cast<Index>(g) / 2;
    break;
  }
  return p;
}

inline BcdOptions options_for(const ExperimentSpec& spec, Scheme s)
{
  BcdOptions o = spec.bcd;
  o.angles = s != Scheme::fpa;
  o.heights = s == Scheme::fcla_phi_z;
  return o;
}

inline std::string label(const ExperimentSpec& spec)
{
  std::string l = to_string(spec.kind);
  if (spec.kind == ExperimentKind::region_sweep) l += ":gamma_db=" + fmt12(spec.params.Gamma_db);
  return l;
}

} // namespace detail

/// Starting layout, shared by all schemes: the FPA layout. Over a region
/// sweep it is the one centred in the smallest region of the grid, so every
/// grid point starts from the same physical array.
inline Placement scheme_layout(const ExperimentSpec& spec, const ArrayConfig& cfg)
{
  if (spec.kind != ExperimentKind::region_sweep) return fpa_layout(cfg);
  ArrayConfig ref = cfg;
  double gmin = spec.grid.front();
  for (double g : spec.grid) gmin = std::min(gmin, g);
  ref.A = gmin * cfg.lambda;
  return fpa_layout(ref);
}

/// Key-value sidecar: spec, defaults and modelling assumptions.
inline io::KeyValueFile metadata(const ExperimentSpec& spec)
{
  io::KeyValueFile f;
  f.set("experiment", detail::label(spec));
  std::string schemes, grid;
  for (auto s : spec.schemes) schemes += std::string(schemes.empty() ? "" : ",") + to_string(s);
  for (double g : spec.grid) grid += (grid.empty() ? "" : ",") + fmt12(g);
  f.set("schemes", schemes);
  f.set("grid", grid);
  f.set("trials", std::to_string(spec.trials));
  f.set("base_seed", std::to_string(spec.base_seed));
  f.set("seed_rule", "base_seed + trial");
  const auto& p = spec.params;
  f.set("params.M", std::to_string(p.config.M));
  f.set("params.N", std::to_string(p.config.N));
  f.set("params.lambda", fmt12(p.config.lambda));
  f.set("params.rho", fmt12(p.config.rho));
  f.set("params.A", fmt12(p.config.A));
  f.set("params.K", std::to_string(p.K));
  f.set("params.L", std::to_string(p.L));
  f.set("params.power_dbw", fmt12(p.power_dbw));
  f.set("params.noise_dbm", fmt12(p.noise_dbm));
  f.set("params.Gamma_db", fmt12(p.Gamma_db));
  f.set("params.C0_db", fmt12(p.C0_db));
  f.set("params.alpha", fmt12(p.alpha));
  f.set("bcd.max_outer_iters", std::to_string(spec.bcd.max_outer_iters));
  f.set("bcd.stall_tol", fmt12(spec.bcd.stall_tol));
  f.set("bcd.conic_tol", fmt12(spec.bcd.conic_tol));
  f.set("bcd.saturate_power", spec.bcd.saturate_power ? "1" : "0");
  f.set("assumption.fpa_layout", "uniform angles, rings lambda/2 apart centred in the smallest region of the grid");
  f.set("assumption.region", "z_D sets the height range A");
  f.set("assumption.start_layout", "every scheme starts from the FPA layout");
  f.set("assumption.convergence_nt", "N_t = 2 M with N = 2");
  return f;
}

/// Run every (grid value, trial, scheme) in that order. The convergence
/// experiment emits one row per outer iteration (iters = iteration index).
inline ExperimentResult run_experiment(const ExperimentSpec& spec)
{
  spec.validate();
  ExperimentResult res;
  const std::string label = detail::label(spec);
  for (double g : spec.grid) {
    const SamplingParams params = detail::params_for(spec, g);
    params.validate();
    for (int t = 0; t < spec.trials; ++t) {
      const std::uint64_t seed = spec.base_seed + static_cast<std::uint64_t>(t);
      const Scenario sc = sample_scenario(seed, params);
      for (Scheme s : spec.schemes) {
        ResultRow row{label, to_string(s), g, t, seed, 0, 0.0, 0.0, 0.0, "error"};
        try {
          const BcdResult r = run(sc, scheme_layout(spec, sc.config), detail::options_for(spec, s));
          const Audit a = audit(sc, r.placement, r.beams);
          const bool feasible = a.feasible(1e-6);
          std::string status = !feasible ? "audit_failed" : r.status == BcdStatus::subproblem_failure ? "subproblem_failure" : "ok";
          if (spec.kind == ExperimentKind::convergence) {
            for (const auto& tr : r.trace)
              res.rows.push_back({label, to_string(s), g, t, seed, tr.iteration, tr.sum_rate, tr.eve_rate, tr.power_used, status});
          } else {
            row.iters = r.iterations;
            row.sum_rate = a.sum_rate;
            row.eve_rate = a.eve_rate;
            row.power_used = a.power_used;
            row.status = status;
            res.rows.push_back(row);
          }
          if (status != "ok") {
            ++res.failures;
            res.log.push_back(label + " " + to_string(s) + " grid " + fmt12(g) + " trial " + std::to_string(t) + ": " + status);
          }
        } catch (const std::exception& e) {
          ++res.failures;
          res.rows.push_back(row);
          res.log.push_back(label + " " + to_string(s) + " grid " + fmt12(g) + " trial " + std::to_string(t) + ": " + e.what());
        }
      }
    }
  }
  if (spec.kind == ExperimentKind::convergence) {
    // final iterate of each run
    std::vector<ResultRow> last;
    for (std::size_t i = 0; i < res.rows.size(); ++i)
      if (i + 1 == res.rows.size() || res.rows[i + 1].grid_value != res.rows[i].grid_value ||
          res.rows[i + 1].trial != res.rows[i].trial || res.rows[i + 1].scheme != res.rows[i].scheme)
        last.push_back(res.rows[i]);
    res.summary = aggregate(last);
  } else {
    res.summary = aggregate(res.rows);
  }
  return res;
}

inline std::string aggregate_path(const std::string& out)
{
  const auto dot = out.rfind('.');
  const auto slash = out.rfind('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return out + "_aggregate.csv";
  return out.substr(0, dot) + "_aggregate" + out.substr(dot);
}

inline void write_outputs(const ExperimentSpec& spec, const ExperimentResult& res)
{
  if (spec.out.empty()) return;
  auto open = [](const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    return os;
  };
  {
    std::ofstream os = open(spec.out);
    write_rows(os, res.rows);
  }
  {
    std::ofstream os = open(aggregate_path(spec.out));
    write_aggregate(os, res.summary);
  }
  {
    std::ofstream os = open(spec.out + ".meta");
    metadata(spec).write(os);
  }
}

} // namespace fcla

#endif // FCLA_HARNESS_HPP
