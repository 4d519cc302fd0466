#ifndef FCLA_CHANNEL_HPP
#define FCLA_CHANNEL_HPP

#include "fcla/scenario.hpp"
#include "fcla/types.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fcla {

/// Unit direction of a path: (sin t cos p, sin t sin p, cos t).
struct Direction {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;

  static Direction from_angles(double theta, double phi_az)
  {
    return {std::sin(theta) * std::cos(phi_az), std::sin(theta) * std::sin(phi_az), std::cos(theta)};
  }
};

/// Path-length difference of an element at (rho cos phi, rho sin phi, z)
/// relative to the origin, along direction d.
inline double propagation_delta(double phi_mn, double z_m, double rho, const Direction& d)
{
  return rho * std::cos(phi_mn) * d.x + rho * std::sin(phi_mn) * d.y + z_m * d.z;
}

inline double propagation_delta(double phi_mn, double z_m, double rho, double theta, double phi_az)
{
  return propagation_delta(phi_mn, z_m, rho, Direction::from_angles(theta, phi_az));
}

/// exp(j x) with x reduced to [-pi, pi] first.
inline cdouble unit_phasor(double x)
{
  const double r = std::remainder(x, kTwoPi);
  return {std::cos(r), std::sin(r)};
}

/// Field response of one element: entry l = exp(j 2pi/lambda chi_l).
inline CVec frv(double phi_mn, double z_m, const PathSet& paths, const ArrayConfig& cfg)
{
  const Index L = paths.size();
  CVec out(L);
  const double k0 = kTwoPi / cfg.lambda;
  for (Index l = 0; l < L; ++l)
    out(l) = unit_phasor(k0 * propagation_delta(phi_mn, z_m, cfg.rho, paths.theta(l), paths.phi_az(l)));
  return out;
}

/// Channel h with received scalar h^H x; entry i = m N + n is
/// sum_l conj(beta_l) exp(-j 2pi/lambda chi_l(phi_mn, z_m)).
inline CVec channel_vector(const ArrayConfig& cfg, const Placement& p, const PathSet& paths)
{
  if (p.phi.rows() != cfg.M || p.phi.cols() != cfg.N || p.z.size() != cfg.M)
    throw std::invalid_argument("channel_vector: placement dimensions do not match the array");
  CVec h(cfg.num_antennas());
  for (Index m = 0; m < cfg.M; ++m) {
    for (Index n = 0; n < cfg.N; ++n) {
      const CVec a = frv(p.phi(m, n), p.z(m), paths, cfg);
      h(antenna_index(m, n, cfg.N)) = std::conj((a.array() * paths.beta.array()).sum());
    }
  }
  return h;
}

/// All receiver channels at one placement.
struct Channels {
  std::vector<CVec> ir;
  CVec eve;

  Index K() const { return static_cast<Index>(ir.size()); }
  Index num_antennas() const { return eve.size(); }
};

inline Channels compute_channels(const Scenario& s, const Placement& p)
{
  Channels ch;
  ch.ir.reserve(s.ir_paths.size());
  for (const auto& ps : s.ir_paths) ch.ir.push_back(channel_vector(s.config, p, ps));
  ch.eve = channel_vector(s.config, p, s.eve_paths);
  return ch;
}

} // namespace fcla

#endif // FCLA_CHANNEL_HPP
