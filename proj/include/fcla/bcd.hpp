#ifndef FCLA_BCD_HPP
#define FCLA_BCD_HPP

#include "fcla/beamform.hpp"
#include "fcla/channel.hpp"
#include "fcla/fp.hpp"
#include "fcla/metrics.hpp"
#include "fcla/placement.hpp"
#include "fcla/scenario.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace fcla {

struct BcdOptions {
  int max_outer_iters = 30;
  double stall_tol = 1e-3;     // relative sum-rate change
  double move_tol = 1e-6;      // meters
  double conic_tol = 1e-8;
  PgdOptions pgd;
  bool angles = true;
  bool heights = true;
  bool saturate_power = true;  // rescale recovered beams up to the budget

  void validate() const
  {
    if (max_outer_iters < 1) throw std::invalid_argument("BcdOptions: max_outer_iters must be >= 1");
    if (!(stall_tol > 0.0) || !(move_tol > 0.0) || !(conic_tol > 0.0))
      throw std::invalid_argument("BcdOptions: tolerances must be positive");
    pgd.validate();
  }
};

struct BcdTraceRow {
  int iteration = 0;
  double sum_rate = 0.0;
  double Ia = 0.0;
  double Ib = 0.0;
  double eve_rate = 0.0;
  double power_used = 0.0;
  double time_fp = 0.0;      // seconds
  double time_beams = 0.0;
  double time_placement = 0.0;
  double min_residual = 0.0;
  double moved = 0.0;        // placement movement, meters
  bool beams_accepted = false;
  bool certificate_passed = false;
};

enum class BcdStatus { converged, max_iterations, subproblem_failure };

inline const char* to_string(BcdStatus s)
{
  switch (s) {
  case BcdStatus::converged: return "ok";
  case BcdStatus::max_iterations: return "max_iterations";
  case BcdStatus::subproblem_failure: return "subproblem_failure";
  }
  return "unknown";
}

struct BcdResult {
  BeamSolution beams;
  Placement placement;
  std::vector<BcdTraceRow> trace;
  BcdStatus status = BcdStatus::max_iterations;
  std::vector<std::string> events;
  int iterations = 0;
};

/// Rotate every w_k so h_k^H w_k is real and nonnegative. No SINR changes.
inline void phase_align(BeamSolution& sol, const Channels& ch)
{
  for (Index k = 0; k < sol.K(); ++k) {
    const cdouble hw = ch.ir[static_cast<std::size_t>(k)].dot(sol.W.col(k));
    if (std::abs(hw) > 0.0) sol.W.col(k) *= std::conj(hw) / std::abs(hw);
  }
}

/// Largest common scale c of (W, R_e) allowed by the eavesdropper constraint.
inline double secrecy_scale_limit(const Scenario& s, const Channels& ch, const BeamSolution& sol)
{
  if (!s.secrecy_active()) return std::numeric_limits<double>::infinity();
  const LinkTerms t = link_terms(ch.eve, sol, s.sigma2_eve);
  const double a = t.signal(0);
  const double b = t.total() - a - t.noise;
  const double G = s.Gamma_th_e();
  if (a <= G * b) return std::numeric_limits<double>::infinity();
  return G * s.sigma2_eve / (a - G * b);
}

/// Scale (W, R_e) by c = min(P / power, secrecy limit), capped at 1 unless
/// `grow` is set. Every IR SINR is nondecreasing in c.
inline BeamSolution rescale_beams(const Scenario& s, const Channels& ch, const BeamSolution& sol, bool grow)
{
  const double power = sol.power();
  if (!(power > 0.0)) return sol;
  double c = std::min(s.P / power, secrecy_scale_limit(s, ch, sol));
  if (!grow) c = std::min(c, 1.0);
  c *= 1.0 - 1e-12;
  BeamSolution out = sol;
  out.W *= std::sqrt(c);
  out.R_e *= c;
  return out;
}

/// Drop negative eigenvalues of R_e left over from the recovery subtraction.
inline void clip_an(BeamSolution& sol)
{
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (sol.R_e + sol.R_e.adjoint()));
  const Vec ev = es.eigenvalues().cwiseMax(0.0);
  sol.R_e = es.eigenvectors() * ev.cast<cdouble>().asDiagonal() * es.eigenvectors().adjoint();
  sol.R_e = 0.5 * (sol.R_e + sol.R_e.adjoint()).eval();
}

/// Clip R_e to the PSD cone and rescale. With `saturate`, also try keeping
/// only part of the AN (t R_e for t in {1, 3/4, 1/2, 1/4, 0}) and keep the
/// feasible candidate with the highest sum rate.
inline BeamSolution polish_beams(const Scenario& s, const Channels& ch, BeamSolution sol, bool saturate)
{
  clip_an(sol);
  if (!saturate) return rescale_beams(s, ch, sol, false);
  BeamSolution best = rescale_beams(s, ch, sol, true);
  double best_rate = sum_rate(ch, best, s.sigma2_ir);
  for (double t : {0.75, 0.5, 0.25, 0.0}) {
    BeamSolution c = sol;
    c.R_e *= t;
    c = rescale_beams(s, ch, c, true);
    if (s.secrecy_active() && sinr_eve(ch, c, s.sigma2_eve) > s.Gamma_th_e()) continue;
    const double r = sum_rate(ch, c, s.sigma2_ir);
    if (r > best_rate) {
      best = c;
      best_rate = r;
    }
  }
  return best;
}

/// Matched filters with an equal split of P over K + 1 shares (the last one
/// isotropic AN), then w_1 shrunk until the eavesdropper constraint holds.
inline BeamSolution initialize_beams(const Scenario& s, const Channels& ch)
{
  const Index nt = ch.num_antennas();
  const Index K = ch.K();
  BeamSolution sol = BeamSolution::zeros(nt, K);
  const double share = s.P / static_cast<double>(K + 1);
  for (Index k = 0; k < K; ++k) {
    const CVec& h = ch.ir[static_cast<std::size_t>(k)];
    const double n = h.norm();
    if (n > 0.0) sol.W.col(k) = h * (std::sqrt(share) / n);
  }
  sol.R_e = CMat::Identity(nt, nt) * (share / static_cast<double>(nt));
  if (s.secrecy_active()) {
    const LinkTerms t = link_terms(ch.eve, sol, s.sigma2_eve);
    const double a = t.signal(0);
    const double rest = t.total() - a;
    if (a > s.Gamma_th_e() * rest) sol.W.col(0) *= std::sqrt(s.Gamma_th_e() * rest / a) * (1.0 - 1e-12);
  }
  return sol;
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline double placement_distance(const ArrayConfig& cfg, const Placement& a, const Placement& b)
{
  const double da = (to_block(cfg, a, Block::angles) - to_block(cfg, b, Block::angles)).cwiseAbs().maxCoeff();
  const double dz = (a.z - b.z).cwiseAbs().maxCoeff();
  return std::max(da, dz);
}

inline bool acceptable(const Audit& a)
{
  return a.feasible(1e-9);
}

} // namespace detail

/// Block coordinate ascent: eta, varpi, beams (SDR and recovery), placement.
inline BcdResult run(const Scenario& s, const Placement& init, const BcdOptions& opt = {})
{
  s.validate();
  opt.validate();
  if (!validate_placement(s.config, init).feasible()) throw std::invalid_argument("bcd::run: infeasible initial placement");

  BcdResult res;
  res.placement = init;
  Channels ch = compute_channels(s, init);
  res.beams = initialize_beams(s, ch);
  double rate = sum_rate(ch, res.beams, s.sigma2_ir);
  bool failed = false;

  for (int it = 1; it <= opt.max_outer_iters; ++it) {
    BcdTraceRow row;
    row.iteration = it;
    const double rate_before = rate;
    const Placement place_before = res.placement;

    auto t0 = std::chrono::steady_clock::now();
    phase_align(res.beams, ch);
    FpState fp = update_fp(ch, res.beams, s.sigma2_ir);
    row.time_fp = detail::seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    const SdrSolution sdr = solve_sdr(s, ch, fp.eta, fp.varpi, opt.conic_tol);
    if (sdr.ok()) {
      RecoveredSolution rec = recover(sdr, ch, s.sigma2_ir);
      const CertificateReport cert = verify_appendix_a(sdr, rec, s, ch, fp.eta, fp.varpi);
      row.certificate_passed = cert.passed();
      if (!cert.passed()) res.events.push_back("iteration " + std::to_string(it) + ": certificate " + cert.failures());
      const BeamSolution cand = polish_beams(s, ch, rec.beams, opt.saturate_power);
      const double r = sum_rate(ch, cand, s.sigma2_ir);
      if (detail::acceptable(audit(s, res.placement, cand)) && r >= rate) {
        res.beams = cand;
        rate = r;
        row.beams_accepted = true;
      } else {
        res.events.push_back("iteration " + std::to_string(it) + ": beam update rejected");
      }
    } else {
      failed = true;
      res.events.push_back("iteration " + std::to_string(it) + ": SDR " + conic::to_string(sdr.status));
    }
    row.time_beams = detail::seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    if (opt.angles || opt.heights) {
      // fresh transforms at the current beams so the placement objective is tight
      phase_align(res.beams, ch);
      fp = update_fp(ch, res.beams, s.sigma2_ir);
      const PgdResult pg = pgd_optimize(res.placement, s, res.beams, fp.eta, fp.varpi, opt.pgd, opt.angles, opt.heights);
      for (const auto& e : pg.events) res.events.push_back("iteration " + std::to_string(it) + ": " + e);
      const Channels ch_new = compute_channels(s, pg.placement);
      const double r = sum_rate(ch_new, res.beams, s.sigma2_ir);
      if (detail::acceptable(audit(s, pg.placement, res.beams)) && r >= rate) {
        res.placement = pg.placement;
        ch = ch_new;
        rate = r;
      }
    }
    row.time_placement = detail::seconds_since(t0);

    const Audit a = audit(s, res.placement, res.beams);
    fp = update_fp(ch, res.beams, s.sigma2_ir);
    row.sum_rate = rate;
    row.Ia = eval_Ia(ch, res.beams, s.sigma2_ir, fp.eta);
    row.Ib = eval_Ib(ch, res.beams, s.sigma2_ir, fp.eta, fp.varpi);
    row.eve_rate = a.eve_rate;
    row.power_used = a.power_used;
    row.min_residual = a.min_residual();
    row.moved = detail::placement_distance(s.config, place_before, res.placement);
    res.trace.push_back(row);
    res.iterations = it;

    const double change = std::abs(rate - rate_before) / std::max(std::abs(rate_before), 1e-12);
    if (change < opt.stall_tol && row.moved < opt.move_tol) {
      res.status = failed ? BcdStatus::subproblem_failure : BcdStatus::converged;
      return res;
    }
  }
  res.status = failed ? BcdStatus::subproblem_failure : BcdStatus::max_iterations;
  return res;
}

} // namespace fcla

#endif // FCLA_BCD_HPP
