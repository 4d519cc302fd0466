#ifndef FCLA_CLI_HPP
#define FCLA_CLI_HPP

#include "fcla/fcla.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fcla::cli {

enum ExitCode { kOk = 0, kTrialFailure = 1, kSpecError = 2 };

/// Flags shared by the experiment subcommands. Unset flags fall back to the
/// config file, then to the built-in defaults.
struct ExperimentFlags {
  std::string config;
  std::optional<std::string> grid, schemes, out, gamma_db;
  std::optional<int> trials, K, L, M, N, max_iters;
  std::optional<std::uint64_t> seed;
  std::optional<double> power_dbw, noise_dbm, stall_tol, conic_tol, lambda;
  bool no_saturate = false;

  void attach(CLI::App* app)
  {
    app->add_option("--config", config, "key = value file with the same names as the flags");
    app->add_option("--grid", grid, "sweep grid, start:step:stop or a comma list");
    app->add_option("--schemes", schemes, "comma list of FPA, FCLA_phi, FCLA_phi_z");
    app->add_option("--out", out, "CSV output path");
    app->add_option("--trials", trials, "Monte Carlo trials per grid point");
    app->add_option("--seed", seed, "base seed; trial t uses seed + t");
    app->add_option("--K", K, "number of information receivers");
    app->add_option("--L", L, "paths per link");
    app->add_option("--M", M, "rings");
    app->add_option("--N", N, "elements per ring");
    app->add_option("--lambda", lambda, "wavelength [m]");
    app->add_option("--power-dbw", power_dbw, "transmit power [dBW]");
    app->add_option("--noise-dbm", noise_dbm, "noise power [dBm]");
    app->add_option("--gamma-db", gamma_db, "eavesdropper SINR threshold [dB], comma list for sweep-region");
    app->add_option("--max-iters", max_iters, "outer BCD iterations");
    app->add_option("--stall-tol", stall_tol, "relative sum-rate stall tolerance");
    app->add_option("--conic-tol", conic_tol, "conic solver tolerance");
    app->add_flag("--no-saturate", no_saturate, "keep recovered beams at their own power");
  }
};

namespace detail {

template <class T>
T pick(const std::optional<T>& flag, const io::KeyValueFile& cfg, const std::string& key, T fallback)
{
  if (flag) return *flag;
  if (!cfg.has(key)) return fallback;
  if constexpr (std::is_same_v<T, std::string>)
    return cfg.raw(key);
  else if constexpr (std::is_floating_point_v<T>)
    return static_cast<T>(cfg.real(key));
  else
    return static_cast<T>(cfg.integer(key));
}

inline std::vector<Scheme> parse_schemes(const std::string& text)
{
  std::vector<Scheme> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_scheme(io::KeyValueFile::trim(tok)));
  return out;
}

inline std::vector<double> default_gammas(ExperimentKind kind)
{
  return kind == ExperimentKind::region_sweep ? std::vector<double>{-10.0, -5.0} : std::vector<double>{-10.0};
}

} // namespace detail

/// Build one spec per Gamma value.
inline std::vector<ExperimentSpec> build_specs(ExperimentKind kind, const ExperimentFlags& f)
{
  const io::KeyValueFile cfg = f.config.empty() ? io::KeyValueFile{} : io::KeyValueFile::load(f.config);
  static const std::vector<std::string> known{"grid", "schemes", "out", "trials", "seed", "K", "L", "M", "N",
                                              "lambda", "power_dbw", "noise_dbm", "gamma_db", "max_iters",
                                              "stall_tol", "conic_tol", "saturate_power"};
  for (const auto& [k, v] : cfg.entries)
    if (std::find(known.begin(), known.end(), k) == known.end()) throw std::invalid_argument("unknown config key: " + k);

  ExperimentSpec base = ExperimentSpec::defaults(kind);
  if (const std::string g = detail::pick<std::string>(f.grid, cfg, "grid", ""); !g.empty()) base.grid = parse_grid(g);
  if (const std::string s = detail::pick<std::string>(f.schemes, cfg, "schemes", ""); !s.empty())
    base.schemes = detail::parse_schemes(s);
  base.out = detail::pick<std::string>(f.out, cfg, "out", "");
  base.trials = detail::pick<int>(f.trials, cfg, "trials", base.trials);
  base.base_seed = detail::pick<std::uint64_t>(f.seed, cfg, "seed", base.base_seed);
  auto& p = base.params;
  const double lambda = detail::pick<double>(f.lambda, cfg, "lambda", p.config.lambda);
  const Index M = detail::pick<int>(f.M, cfg, "M", static_cast<int>(p.config.M));
  const Index N = detail::pick<int>(f.N, cfg, "N", static_cast<int>(p.config.N));
  if (M < 1 || N < 1 || !(lambda > 0.0)) throw std::invalid_argument("M, N and lambda must be positive");
  p.config = ArrayConfig::with_wavelength(lambda, M, N);
  p.K = detail::pick<int>(f.K, cfg, "K", static_cast<int>(p.K));
  p.L = detail::pick<int>(f.L, cfg, "L", static_cast<int>(p.L));
  p.power_dbw = detail::pick<double>(f.power_dbw, cfg, "power_dbw", p.power_dbw);
  p.noise_dbm = detail::pick<double>(f.noise_dbm, cfg, "noise_dbm", p.noise_dbm);
  base.bcd.max_outer_iters = detail::pick<int>(f.max_iters, cfg, "max_iters", base.bcd.max_outer_iters);
  base.bcd.stall_tol = detail::pick<double>(f.stall_tol, cfg, "stall_tol", base.bcd.stall_tol);
  base.bcd.conic_tol = detail::pick<double>(f.conic_tol, cfg, "conic_tol", base.bcd.conic_tol);
  base.bcd.saturate_power = f.no_saturate ? false : cfg.has("saturate_power") ? cfg.integer("saturate_power") != 0 : true;

  std::vector<double> gammas = detail::default_gammas(kind);
  if (const std::string g = detail::pick<std::string>(f.gamma_db, cfg, "gamma_db", ""); !g.empty()) gammas = parse_grid(g);
  if (kind != ExperimentKind::region_sweep && gammas.size() != 1)
    throw std::invalid_argument("--gamma-db takes a single value for this experiment");

  std::vector<ExperimentSpec> specs;
  for (double g : gammas) {
    ExperimentSpec s = base;
    s.params.Gamma_db = g;
    s.validate();
    specs.push_back(s);
  }
  return specs;
}

inline int run_experiments(ExperimentKind kind, const ExperimentFlags& f, std::ostream& out, std::ostream& err)
{
  std::vector<ExperimentSpec> specs;
  try {
    specs = build_specs(kind, f);
  } catch (const std::exception& e) {
    err << "spec error: " << e.what() << '\n';
    return kSpecError;
  }
  ExperimentResult all;
  for (const auto& s : specs) {
    ExperimentResult r = run_experiment(s);
    all.rows.insert(all.rows.end(), r.rows.begin(), r.rows.end());
    all.summary.insert(all.summary.end(), r.summary.begin(), r.summary.end());
    all.failures += r.failures;
    all.log.insert(all.log.end(), r.log.begin(), r.log.end());
  }
  try {
    write_outputs(specs.front(), all);
    if (specs.size() > 1 && !specs.front().out.empty()) {
      io::KeyValueFile meta = metadata(specs.front());
      std::string gl;
      for (const auto& s : specs) gl += (gl.empty() ? "" : ",") + fmt12(s.params.Gamma_db);
      meta.set("params.Gamma_db", gl);
      std::ofstream os(specs.front().out + ".meta", std::ios::binary);
      meta.write(os);
    }
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << '\n';
    return kSpecError;
  }
  if (specs.front().out.empty()) {
    write_rows(out, all.rows);
    write_aggregate(out, all.summary);
  }
  for (const auto& l : all.log) err << "failure: " << l << '\n';
  return all.failures > 0 ? kTrialFailure : kOk;
}

inline int run_audit(const std::string& path, std::ostream& out, std::ostream& err)
{
  io::SolutionFile sf;
  try {
    sf = io::load_solution(path);
  } catch (const std::exception& e) {
    err << "cannot load " << path << ": " << e.what() << '\n';
    return kSpecError;
  }
  try {
    const Audit a = audit(sf.scenario, sf.placement, sf.beams);
    out << "sum_rate_bits = " << io::fmt(a.sum_rate) << '\n'
        << "eve_rate_bits = " << io::fmt(a.eve_rate) << '\n'
        << "power_used = " << io::fmt(a.power_used) << '\n'
        << "secrecy_residual = " << io::fmt(a.secrecy_residual) << '\n'
        << "power_residual = " << io::fmt(a.power_residual) << '\n'
        << "an_psd_residual = " << io::fmt(a.an_psd_residual) << '\n'
        << "placement_residual = " << io::fmt(a.placement_residual) << '\n';
    const bool ok = a.feasible(1e-6);
    out << "status = " << (ok ? "feasible" : "infeasible") << '\n';
    return ok ? kOk : kTrialFailure;
  } catch (const std::exception& e) {
    err << "audit error: " << e.what() << '\n';
    return kSpecError;
  }
}

/// Invariant checks on three fixed seeds.
inline int run_selftest(std::ostream& out)
{
  int failed = 0;
  auto report = [&](const std::string& name, bool ok) {
    out << (ok ? "PASS " : "FAIL ") << name << '\n';
    if (!ok) ++failed;
  };
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const std::string tag = " seed " + std::to_string(seed);
    SamplingParams sp;
    const Scenario s = sample_scenario(seed, sp);
    const Placement p = initial_placement(s.config);
    const Channels ch = compute_channels(s, p);
    BeamSolution b = initialize_beams(s, ch);
    const FpState fp = update_fp(ch, b, s.sigma2_ir);
    const double rate = sum_rate(ch, b, s.sigma2_ir);
    const double ia = eval_Ia(ch, b, s.sigma2_ir, fp.eta);
    const double ib = eval_Ib(ch, b, s.sigma2_ir, fp.eta, fp.varpi);
    const double ratio = ratio_term(ch, b, s.sigma2_ir, fp.eta);
    report("fp tightness" + tag, std::abs(ia - rate) <= 1e-8 * std::max(1.0, rate) &&
                                     std::abs(ib - ratio) <= 1e-8 * std::max(1.0, ratio));

    const Vec g = grad_objective(s, p, b, fp.eta, fp.varpi, Block::heights);
    const Vec z = p.z;
    bool grad_ok = true;
    for (Index m = 0; m < z.size(); ++m) {
      Placement pp = p, pm = p;
      pp.z(m) += 1e-6;
      pm.z(m) -= 1e-6;
      const double fd = (eval_Ib(compute_channels(s, pp), b, s.sigma2_ir, fp.eta, fp.varpi) -
                         eval_Ib(compute_channels(s, pm), b, s.sigma2_ir, fp.eta, fp.varpi)) / 2e-6;
      grad_ok = grad_ok && std::abs(fd - g(m)) <= 1e-5 * std::max({std::abs(fd), std::abs(g(m)), 1e-6 * g.cwiseAbs().maxCoeff()});
    }
    report("height gradient" + tag, grad_ok);

    const SdrSolution sdr = solve_sdr(s, ch, fp.eta, fp.varpi);
    bool cert_ok = sdr.ok();
    if (cert_ok) {
      RecoveredSolution rec = recover(sdr, ch, s.sigma2_ir);
      cert_ok = verify_appendix_a(sdr, rec, s, ch, fp.eta, fp.varpi).passed();
    }
    report("recovery certificate" + tag, cert_ok);

    BcdOptions o;
    o.max_outer_iters = 5;
    const BcdResult r = run(s, p, o);
    bool mono = true;
    for (std::size_t t = 1; t < r.trace.size(); ++t) mono = mono && r.trace[t].sum_rate >= r.trace[t - 1].sum_rate - 1e-6;
    report("bcd monotone and feasible" + tag, mono && audit(s, r.placement, r.beams).feasible(1e-6));
  }
  return failed == 0 ? kOk : kTrialFailure;
}

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
  CLI::App app{"Secure multi-user beamforming and antenna placement for flexible cylindrical arrays"};
  app.require_subcommand(1);
  ExperimentFlags conv_f, power_f, region_f;
  auto* conv = app.add_subcommand("convergence", "BCD trace per iteration for several N_t");
  conv_f.attach(conv);
  auto* power = app.add_subcommand("sweep-power", "mean sum rate against transmit power");
  power_f.attach(power);
  auto* region = app.add_subcommand("sweep-region", "mean sum rate against the height range z_D / lambda");
  region_f.attach(region);
  std::string audit_path;
  auto* aud = app.add_subcommand("audit", "recompute residuals of a saved solution");
  aud->add_option("file", audit_path, "solution file")->required();
  auto* self = app.add_subcommand("selftest", "invariant checks on fixed seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n' << app.help();
    return kSpecError;
  }
  if (*conv) return run_experiments(ExperimentKind::convergence, conv_f, out, err);
  if (*power) return run_experiments(ExperimentKind::power_sweep, power_f, out, err);
  if (*region) return run_experiments(ExperimentKind::region_sweep, region_f, out, err);
  if (*aud) return run_audit(audit_path, out, err);
  if (*self) return run_selftest(out);
  return kSpecError;
}

} // namespace fcla::cli

#endif // FCLA_CLI_HPP
