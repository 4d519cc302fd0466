#ifndef FCLA_METRICS_HPP
#define FCLA_METRICS_HPP

#include "fcla/channel.hpp"
#include "fcla/conic.hpp"
#include "fcla/scenario.hpp"
#include "fcla/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace fcla {

/// Beamformers W (columns w_k) and artificial-noise covariance R_e.
struct BeamSolution {
  CMat W;
  CMat R_e;

  Index num_antennas() const { return W.rows(); }
  Index K() const { return W.cols(); }

  static BeamSolution zeros(Index nt, Index K)
  {
    return {CMat::Zero(nt, K), CMat::Zero(nt, nt)};
  }

  double power() const { return W.squaredNorm() + R_e.trace().real(); }

  /// R_k = w_k w_k^H.
  CMat R_k(Index k) const { return W.col(k) * W.col(k).adjoint(); }

  /// R = sum_k R_k + R_e.
  CMat R() const { return W * W.adjoint() + R_e; }
};

namespace detail {

inline void check_dims(const Channels& ch, const BeamSolution& sol)
{
  if (sol.W.rows() != ch.num_antennas() || sol.R_e.rows() != ch.num_antennas() || sol.R_e.cols() != ch.num_antennas())
    throw std::invalid_argument("metrics: beam solution does not match the antenna count");
  if (sol.W.cols() != ch.K()) throw std::invalid_argument("metrics: beam count does not match the user count");
  for (const auto& h : ch.ir)
    if (h.size() != ch.num_antennas()) throw std::invalid_argument("metrics: channel lengths differ");
}

inline double quad(const CVec& h, const CMat& X)
{
  return h.dot(X * h).real();
}

} // namespace detail

/// Per-user terms at receiver k: |h_k^H w_j|^2 for all j, and h_k^H R_e h_k.
struct LinkTerms {
  Vec gains;   // |h_k^H w_j|^2
  double an = 0.0;
  double noise = 0.0;

  double signal(Index k) const { return gains(k); }
  double total() const { return gains.sum() + an + noise; }
  double interference_plus_noise(Index k) const
  {
    double acc = an + noise;
    for (Index j = 0; j < gains.size(); ++j)
      if (j != k) acc += gains(j);
    return acc;
  }
};

inline LinkTerms link_terms(const CVec& h, const BeamSolution& sol, double noise)
{
  LinkTerms t;
  t.gains = (h.adjoint() * sol.W).cwiseAbs2().transpose();
  t.an = std::max(0.0, detail::quad(h, sol.R_e));
  t.noise = noise;
  return t;
}

/// SINR at IR k (0-based).
inline double sinr_ir(Index k, const Channels& ch, const BeamSolution& sol, const Vec& sigma2)
{
  detail::check_dims(ch, sol);
  if (k < 0 || k >= ch.K()) throw std::out_of_range("sinr_ir: user index out of range");
  const LinkTerms t = link_terms(ch.ir[static_cast<std::size_t>(k)], sol, sigma2(k));
  return t.signal(k) / t.interference_plus_noise(k);
}

/// SINR at Eve for the confidential stream of IR 1.
inline double sinr_eve(const Channels& ch, const BeamSolution& sol, double sigma2_eve)
{
  detail::check_dims(ch, sol);
  const LinkTerms t = link_terms(ch.eve, sol, sigma2_eve);
  return t.signal(0) / t.interference_plus_noise(0);
}

inline Vec all_sinr_ir(const Channels& ch, const BeamSolution& sol, const Vec& sigma2)
{
  Vec g(ch.K());
  for (Index k = 0; k < ch.K(); ++k) g(k) = sinr_ir(k, ch, sol, sigma2);
  return g;
}

/// Sum rate in bits.
inline double sum_rate(const Channels& ch, const BeamSolution& sol, const Vec& sigma2)
{
  return all_sinr_ir(ch, sol, sigma2).array().log1p().sum() / std::log(2.0);
}

struct Audit {
  double sum_rate = 0.0;
  Vec sinr;
  double sinr_eve = 0.0;
  double eve_rate = 0.0;
  double power_used = 0.0;
  double secrecy_residual = 0.0;  // gamma_th - log2(1 + gamma_e)
  double power_residual = 0.0;    // P - tr(W^H W) - tr(R_e)
  double an_psd_residual = 0.0;   // min_eig(R_e)
  double placement_residual = 0.0;
  FeasibilityReport placement;

  double min_residual() const
  {
    return std::min({secrecy_residual, power_residual, an_psd_residual, placement_residual});
  }

  bool feasible(double tol = 1e-6) const { return min_residual() >= -tol; }
};

/// Recompute channels at the placement and evaluate the objective and every
/// constraint. Residuals are signed, negative when violated.
inline Audit audit(const Scenario& s, const Placement& p, const BeamSolution& sol)
{
  const Channels ch = compute_channels(s, p);
  detail::check_dims(ch, sol);
  Audit a;
  a.sinr = all_sinr_ir(ch, sol, s.sigma2_ir);
  a.sum_rate = a.sinr.array().log1p().sum() / std::log(2.0);
  a.sinr_eve = sinr_eve(ch, sol, s.sigma2_eve);
  a.eve_rate = std::log1p(a.sinr_eve) / std::log(2.0);
  a.power_used = sol.power();
  a.secrecy_residual = s.secrecy_active() ? s.gamma_th_e() - a.eve_rate : std::numeric_limits<double>::infinity();
  a.power_residual = s.P - a.power_used;
  a.an_psd_residual = sol.R_e.size() == 0 ? 0.0 : std::min(0.0, conic::min_eig(sol.R_e));
  a.placement = validate_placement(s.config, p, 0.0);
  a.placement_residual = std::min(0.0, a.placement.min_slack);
  return a;
}

} // namespace fcla

#endif // FCLA_METRICS_HPP
