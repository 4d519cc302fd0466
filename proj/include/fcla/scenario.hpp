#ifndef FCLA_SCENARIO_HPP
#define FCLA_SCENARIO_HPP

#include "fcla/types.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fcla {

/// Cylindrical array geometry: M rings of N elements at radius rho, rings
/// sliding along z within [0, A].
struct ArrayConfig {
  Index M = 3;
  Index N = 2;
  double rho = 0.1;
  double lambda = 0.1;
  double phi_th = 2.0 * std::asin(0.25);
  double z_th = 0.05;
  double A = 0.6;

  Index num_antennas() const { return M * N; }

  /// Defaults tied to the wavelength: rho = lambda, adjacent chord >= lambda/2,
  /// z_th = lambda/2, A = 6 lambda.
  static ArrayConfig with_wavelength(double lambda, Index M = 3, Index N = 2)
  {
    ArrayConfig c;
    c.M = M;
    c.N = N;
    c.lambda = lambda;
    c.rho = lambda;
    c.phi_th = 2.0 * std::asin(lambda / (4.0 * c.rho));
    c.z_th = lambda / 2.0;
    c.A = 6.0 * lambda;
    return c;
  }

  void validate() const
  {
    if (M < 1 || N < 1) throw std::invalid_argument("ArrayConfig: M and N must be >= 1");
    if (!(rho > 0.0) || !(lambda > 0.0) || !(phi_th > 0.0) || !(z_th > 0.0))
      throw std::invalid_argument("ArrayConfig: rho, lambda, phi_th and z_th must be positive");
    if (!(A >= 0.0)) throw std::invalid_argument("ArrayConfig: A must be nonnegative");
    if (static_cast<double>(N) * phi_th > kTwoPi * (1.0 + 1e-12))
      throw std::invalid_argument("ArrayConfig: N * phi_th exceeds 2 pi, no feasible angular layout");
    if (static_cast<double>(M - 1) * z_th > A * (1.0 + 1e-12) + 1e-15)
      throw std::invalid_argument("ArrayConfig: (M-1) * z_th exceeds A, no feasible vertical layout");
  }
};

/// Element angles phi(m, n) and ring heights z(m).
struct Placement {
  Mat phi;
  Vec z;

  bool operator==(const Placement&) const = default;
};

/// Multipath description of one receiver link.
struct PathSet {
  Vec theta;  // elevation, [0, pi]
  Vec phi_az; // azimuth, [0, 2 pi]
  CVec beta;  // complex path gains

  Index size() const { return theta.size(); }

  void validate() const
  {
    const Index L = theta.size();
    if (L < 1) throw std::invalid_argument("PathSet: at least one path required");
    if (phi_az.size() != L || beta.size() != L) throw std::invalid_argument("PathSet: field lengths differ");
    for (Index l = 0; l < L; ++l) {
      if (!(theta(l) >= 0.0 && theta(l) <= kPi)) throw std::invalid_argument("PathSet: elevation outside [0, pi]");
      if (!(phi_az(l) >= 0.0 && phi_az(l) <= kTwoPi)) throw std::invalid_argument("PathSet: azimuth outside [0, 2 pi]");
      if (!std::isfinite(beta(l).real()) || !std::isfinite(beta(l).imag()))
        throw std::invalid_argument("PathSet: non-finite path gain");
    }
  }

  bool operator==(const PathSet&) const = default;
};

/// Full system description. Gamma_th_e is always derived from gamma_th_e.
class Scenario {
public:
  ArrayConfig config;
  std::vector<PathSet> ir_paths;
  PathSet eve_paths;
  Vec sigma2_ir;
  double sigma2_eve = 1e-12;
  double P = 2.0;

  Index K() const { return static_cast<Index>(ir_paths.size()); }

  double gamma_th_e() const { return gamma_th_e_; }
  double Gamma_th_e() const { return Gamma_th_e_; }

  /// Secrecy cap in bits; infinity disables the constraint.
  void set_gamma_th_e(double bits)
  {
    if (!(bits >= 0.0)) throw std::invalid_argument("Scenario: secrecy rate cap must be >= 0");
    gamma_th_e_ = bits;
    Gamma_th_e_ = std::isinf(bits) ? std::numeric_limits<double>::infinity() : std::exp2(bits) - 1.0;
  }

  /// Set the cap from the linear SINR threshold, storing gamma = log2(1 + Gamma).
  void set_Gamma_th_e(double linear)
  {
    if (!(linear >= 0.0)) throw std::invalid_argument("Scenario: SINR cap must be >= 0");
    set_gamma_th_e(std::isinf(linear) ? linear : std::log2(1.0 + linear));
  }

  bool secrecy_active() const { return std::isfinite(Gamma_th_e_); }

  void validate() const
  {
    config.validate();
    if (K() < 1) throw std::invalid_argument("Scenario: K must be >= 1");
    for (const auto& p : ir_paths) p.validate();
    eve_paths.validate();
    if (sigma2_ir.size() != K()) throw std::invalid_argument("Scenario: sigma2_ir length must equal K");
    if (!((sigma2_ir.array() > 0.0).all()) || !(sigma2_eve > 0.0))
      throw std::invalid_argument("Scenario: noise powers must be positive");
    if (!(P >= 0.0) || !std::isfinite(P)) throw std::invalid_argument("Scenario: power budget must be >= 0");
  }

  bool operator==(const Scenario& o) const
  {
    return config.M == o.config.M && config.N == o.config.N && config.rho == o.config.rho &&
           config.lambda == o.config.lambda && config.phi_th == o.config.phi_th && config.z_th == o.config.z_th &&
           config.A == o.config.A && ir_paths == o.ir_paths && eve_paths == o.eve_paths &&
           sigma2_ir == o.sigma2_ir && sigma2_eve == o.sigma2_eve && P == o.P && gamma_th_e_ == o.gamma_th_e_;
  }

private:
  double gamma_th_e_ = std::log2(1.1);
  double Gamma_th_e_ = 0.1;
};

/// Parameters of the randomized simulation setup.
struct SamplingParams {
  ArrayConfig config;
  double alice_x = 0.0;
  double alice_y = 0.0;
  double disk_x = 40.0;
  double disk_y = 0.0;
  double disk_radius = 10.0;
  Index K = 3;
  Index L = 4;
  double C0_db = -30.0;
  double alpha = 2.3;
  double theta_min = kPi / 6.0;
  double theta_max = 5.0 * kPi / 6.0;
  double phi_min = 0.0;
  double phi_max = kTwoPi;
  double noise_dbm = -90.0;
  double power_dbw = 3.0;
  double Gamma_db = -10.0;

  void validate() const
  {
    config.validate();
    if (!(disk_radius >= 0.0)) throw std::invalid_argument("SamplingParams: disk radius must be >= 0");
    if (K < 1) throw std::invalid_argument("SamplingParams: K must be >= 1");
    if (L < 1) throw std::invalid_argument("SamplingParams: L must be >= 1");
    if (!(alpha >= 0.0)) throw std::invalid_argument("SamplingParams: path-loss exponent must be >= 0");
    if (!(theta_min >= 0.0 && theta_max <= kPi && theta_min <= theta_max))
      throw std::invalid_argument("SamplingParams: elevation range invalid");
    if (!(phi_min >= 0.0 && phi_max <= kTwoPi && phi_min <= phi_max))
      throw std::invalid_argument("SamplingParams: azimuth range invalid");
  }
};

/// Drawn user position and its large-scale gain, kept for reporting.
struct LinkGeometry {
  double x = 0.0;
  double y = 0.0;
  double distance = 0.0;
  double path_gain = 0.0; // c_u^2 = C0 d^-alpha
};

/// Random scenario; a pure function of (seed, params). Receivers are drawn in
/// order IR 1..K then Eve, each as position then per-path (theta, phi, beta).
inline Scenario sample_scenario(std::uint64_t seed, const SamplingParams& params,
                                std::vector<LinkGeometry>* geometry = nullptr)
{
  params.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double c0 = db_to_linear(params.C0_db);
  if (geometry) geometry->clear();

  auto draw_link = [&]() {
    const double r = params.disk_radius * std::sqrt(unit(rng));
    const double a = kTwoPi * unit(rng);
    LinkGeometry g;
    g.x = params.disk_x + r * std::cos(a);
    g.y = params.disk_y + r * std::sin(a);
    g.distance = std::hypot(g.x - params.alice_x, g.y - params.alice_y);
    if (!(g.distance > 0.0)) throw std::invalid_argument("sample_scenario: receiver coincides with the transmitter");
    g.path_gain = c0 * std::pow(g.distance, -params.alpha);
    const double sd = std::sqrt(g.path_gain / static_cast<double>(params.L) / 2.0);
    PathSet ps;
    ps.theta.resize(params.L);
    ps.phi_az.resize(params.L);
    ps.beta.resize(params.L);
    for (Index l = 0; l < params.L; ++l) {
      ps.theta(l) = params.theta_min + (params.theta_max - params.theta_min) * unit(rng);
      ps.phi_az(l) = params.phi_min + (params.phi_max - params.phi_min) * unit(rng);
      const double re = sd * normal(rng);
      const double im = sd * normal(rng);
      ps.beta(l) = cdouble(re, im);
    }
    if (geometry) geometry->push_back(g);
    return ps;
  };

  Scenario s;
  s.config = params.config;
  for (Index k = 0; k < params.K; ++k) s.ir_paths.push_back(draw_link());
  s.eve_paths = draw_link();
  const double noise = db_to_linear(params.noise_dbm - 30.0);
  s.sigma2_ir = Vec::Constant(params.K, noise);
  s.sigma2_eve = noise;
  s.P = db_to_linear(params.power_dbw);
  s.set_Gamma_th_e(db_to_linear(params.Gamma_db));
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Placement feasibility

struct Violation {
  std::string constraint; // "11c", "11d", "11e" or "11f"
  Index ring = 0;
  Index index = 0;        // element (angles) or lower ring of the pair (heights)
  double slack = 0.0;     // signed, negative when violated
};

struct FeasibilityReport {
  std::vector<Violation> violations;
  double min_slack = std::numeric_limits<double>::infinity();

  bool feasible() const { return violations.empty(); }
};

/// Check spacing and range constraints; entries with slack < -tol are reported.
inline FeasibilityReport validate_placement(const ArrayConfig& cfg, const Placement& p, double tol = 1e-9)
{
  if (p.phi.rows() != cfg.M || p.phi.cols() != cfg.N || p.z.size() != cfg.M)
    throw std::invalid_argument("validate_placement: placement dimensions do not match the array");
  FeasibilityReport rep;
  auto check = [&](const char* name, Index ring, Index idx, double slack) {
    rep.min_slack = std::min(rep.min_slack, slack);
    if (slack < -tol) rep.violations.push_back({name, ring, idx, slack});
  };
  for (Index m = 0; m < cfg.M; ++m) {
    for (Index n = 0; n + 1 < cfg.N; ++n) check("11c", m, n, p.phi(m, n + 1) - p.phi(m, n) - cfg.phi_th);
    check("11c", m, cfg.N - 1, p.phi(m, 0) + kTwoPi - p.phi(m, cfg.N - 1) - cfg.phi_th);
    for (Index n = 0; n < cfg.N; ++n) {
      check("11d", m, n, p.phi(m, n));
      check("11d", m, n, kTwoPi - p.phi(m, n));
    }
  }
  for (Index m = 0; m + 1 < cfg.M; ++m) check("11e", m, m, p.z(m + 1) - p.z(m) - cfg.z_th);
  for (Index m = 0; m < cfg.M; ++m) {
    check("11f", m, m, p.z(m));
    check("11f", m, m, cfg.A - p.z(m));
  }
  return rep;
}

/// Uniform angles per ring, ring m (1-based) rotated by m pi / (M N), heights
/// equally spread over [0, A].
inline Placement initial_placement(const ArrayConfig& cfg)
{
  cfg.validate();
  Placement p;
  p.phi.resize(cfg.M, cfg.N);
  p.z.resize(cfg.M);
  const double MN = static_cast<double>(cfg.M * cfg.N);
  for (Index m = 0; m < cfg.M; ++m) {
    const double offset = static_cast<double>(m + 1) * kPi / MN;
    for (Index n = 0; n < cfg.N; ++n) p.phi(m, n) = offset + kTwoPi * static_cast<double>(n) / static_cast<double>(cfg.N);
    p.z(m) = cfg.M == 1 ? 0.0 : cfg.A * static_cast<double>(m) / static_cast<double>(cfg.M - 1);
  }
  return p;
}

} // namespace fcla

#endif // FCLA_SCENARIO_HPP
