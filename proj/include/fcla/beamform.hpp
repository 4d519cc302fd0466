#ifndef FCLA_BEAMFORM_HPP
#define FCLA_BEAMFORM_HPP

#include "fcla/channel.hpp"
#include "fcla/conic.hpp"
#include "fcla/fp.hpp"
#include "fcla/metrics.hpp"
#include "fcla/scenario.hpp"
#include "fcla/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace fcla {

/// Conic form of the relaxed beamforming problem plus what is needed to map
/// the solver vector back to covariances.
///
/// Variables are X_k = R_k / P (k = 1..K), X_e = R_e / P, each as n^2 Hermitian
/// parameters, followed by one auxiliary s_k per user. Channels enter
/// noise-normalised, g_k = h_k sqrt(P) / sigma_k, so every quadratic form is an
/// SNR. Cone order: nonneg (power, then secrecy if active), one SOC of size 3
/// per user, then K + 1 PSD blocks of order 2n.
struct SdrModel {
  conic::ConicProblem problem;
  Index n = 0;
  Index K = 0;
  double P = 0.0;
  double objective_scale = 1.0; // solver c = scale * (-objective)
  bool trivial = false;         // P = 0, nothing to solve

  Index block_offset(Index b) const { return b * n * n; }
  Index aux_offset() const { return (K + 1) * n * n; }
};

namespace detail {

inline void check_channels(const Scenario& s, const Channels& ch)
{
  if (ch.K() != s.K()) throw std::invalid_argument("beamform: channel count does not match K");
  const Index nt = s.config.num_antennas();
  if (ch.eve.size() != nt) throw std::invalid_argument("beamform: eve channel length mismatch");
  for (const auto& h : ch.ir)
    if (h.size() != nt) throw std::invalid_argument("beamform: channel length mismatch");
}

} // namespace detail

/// Relaxed problem: maximise
///   sum_k 2(1+eta_k) varpi_k s_k - (1+eta_k) varpi_k^2 (h_k^H R h_k + sigma_k^2)
/// s.t. s_k^2 <= h_k^H R_k h_k, h_e^H R_1 h_e <= Gamma (h_e^H (R - R_1) h_e + sigma_e^2),
/// tr R <= P, R_k >= 0, R - sum_k R_k >= 0.
inline SdrModel build_sdr(const Scenario& s, const Channels& ch, const Vec& eta, const Vec& varpi)
{
  detail::check_channels(s, ch);
  const Index K = s.K();
  const Index n = s.config.num_antennas();
  if (eta.size() != K || varpi.size() != K) throw std::invalid_argument("build_sdr: FP state length must equal K");

  SdrModel m;
  m.n = n;
  m.K = K;
  m.P = s.P;
  if (!(s.P > 0.0)) {
    m.trivial = true;
    return m;
  }

  const Index np = n * n;
  const Index nvars = (K + 1) * np + K;
  const bool secrecy = s.secrecy_active();
  const Index n_lin = secrecy ? 2 : 1;
  const Index psd_size = conic::svec_size(2 * n);
  const Index rows = n_lin + 3 * K + (K + 1) * psd_size;

  conic::ConicProblem& p = m.problem;
  p.c = Vec::Zero(nvars);
  p.G = Mat::Zero(rows, nvars);
  p.h = Vec::Zero(rows);
  p.A = Mat::Zero(0, nvars);
  p.b = Vec::Zero(0);

  const double sqrtP = std::sqrt(s.P);
  std::vector<Vec> qk(static_cast<std::size_t>(K));
  Vec a(K);
  for (Index k = 0; k < K; ++k) {
    const CVec g = ch.ir[static_cast<std::size_t>(k)] * (sqrtP / std::sqrt(s.sigma2_ir(k)));
    qk[static_cast<std::size_t>(k)] = conic::quadratic_form_coefficients(g);
    const double nrm = g.squaredNorm();
    a(k) = nrm > 0.0 ? nrm : 1.0;
  }

  // objective, as a minimisation of its negative
  for (Index k = 0; k < K; ++k) {
    const double wk = 1.0 + eta(k);
    const double vh = varpi(k) * std::sqrt(s.sigma2_ir(k));
    p.c(m.aux_offset() + k) = -2.0 * wk * vh;
    for (Index b = 0; b <= K; ++b)
      p.c.segment(m.block_offset(b), np) += wk * vh * vh * qk[static_cast<std::size_t>(k)];
  }
  const double cmax = p.c.cwiseAbs().maxCoeff();
  m.objective_scale = cmax > 0.0 ? 1.0 / cmax : 1.0;
  p.c *= m.objective_scale;

  Index r = 0;
  // power: sum_b tr X_b <= 1
  const Vec tr = conic::trace_coefficients(CMat::Identity(n, n));
  for (Index b = 0; b <= K; ++b) p.G.row(r).segment(m.block_offset(b), np) = tr.transpose();
  p.h(r) = 1.0;
  ++r;

  if (secrecy) {
    const double G = s.Gamma_th_e();
    const CVec ge = ch.eve * (sqrtP / std::sqrt(s.sigma2_eve));
    const Vec qe = conic::quadratic_form_coefficients(ge);
    p.G.row(r).segment(m.block_offset(0), np) = qe.transpose();
    for (Index b = 1; b <= K; ++b) p.G.row(r).segment(m.block_offset(b), np) = -G * qe.transpose();
    p.h(r) = G;
    const double rn = std::max(p.G.row(r).cwiseAbs().maxCoeff(), std::abs(p.h(r)));
    if (rn > 0.0) {
      p.G.row(r) /= rn;
      p.h(r) /= rn;
    }
    ++r;
  }
  p.cones.push_back({conic::ConeKind::nonneg, n_lin});

  // s_k^2 <= q_k  <=>  || (2 s_k / sqrt(a), q_k / a - 1) || <= q_k / a + 1
  for (Index k = 0; k < K; ++k) {
    const Vec& q = qk[static_cast<std::size_t>(k)];
    p.G.row(r).segment(m.block_offset(k), np) = -q.transpose() / a(k);
    p.h(r) = 1.0;
    p.G(r + 1, m.aux_offset() + k) = -2.0 / std::sqrt(a(k));
    p.G.row(r + 2).segment(m.block_offset(k), np) = -q.transpose() / a(k);
    p.h(r + 2) = -1.0;
    r += 3;
    p.cones.push_back({conic::ConeKind::soc, 3});
  }

  const Mat E = conic::embedding_map(n);
  for (Index b = 0; b <= K; ++b) {
    p.G.block(r, m.block_offset(b), psd_size, np) = -E;
    r += psd_size;
    p.cones.push_back({conic::ConeKind::psd, 2 * n});
  }
  return m;
}

struct SdrSolution {
  std::vector<CMat> R_tilde_k;
  CMat R_tilde_e;
  CMat R_tilde;
  double objective = 0.0;  // I_b at the relaxed point, s_k = sqrt(h_k^H R_k h_k)
  conic::SolveStatus status = conic::SolveStatus::numerical_error;
  int iterations = 0;

  bool ok() const { return status == conic::SolveStatus::optimal; }
};

/// I_b of relaxed covariances with s_k at its tight value.
inline double relaxed_objective(const Scenario& s, const Channels& ch, const Vec& eta, const Vec& varpi,
                                const std::vector<CMat>& Rk, const CMat& R)
{
  double acc = 0.0;
  for (Index k = 0; k < s.K(); ++k) {
    const CVec& h = ch.ir[static_cast<std::size_t>(k)];
    const double sig = std::max(0.0, detail::quad(h, Rk[static_cast<std::size_t>(k)]));
    const double tot = std::max(0.0, detail::quad(h, R)) + s.sigma2_ir(k);
    const double wk = 1.0 + eta(k);
    acc += 2.0 * wk * varpi(k) * std::sqrt(sig) - wk * varpi(k) * varpi(k) * tot;
  }
  return acc;
}

inline SdrSolution solve_sdr(const Scenario& s, const Channels& ch, const Vec& eta, const Vec& varpi,
                             double tol = 1e-8)
{
  const SdrModel m = build_sdr(s, ch, eta, varpi);
  const Index n = m.n;
  SdrSolution out;
  if (m.trivial) {
    out.R_tilde_k.assign(static_cast<std::size_t>(m.K), CMat::Zero(n, n));
    out.R_tilde_e = CMat::Zero(n, n);
    out.R_tilde = CMat::Zero(n, n);
    out.status = conic::SolveStatus::optimal;
    out.objective = relaxed_objective(s, ch, eta, varpi, out.R_tilde_k, out.R_tilde);
    return out;
  }
  const conic::ConicSolution cs = conic::solve(m.problem, tol);
  out.iterations = cs.iterations;
  out.status = cs.status;
  if (cs.status != conic::SolveStatus::optimal && cs.acceptable(std::sqrt(tol) * 1e-2))
    out.status = conic::SolveStatus::optimal;
  if (cs.x.size() != m.problem.num_vars()) return out;

  const Index np = n * n;
  out.R_tilde = CMat::Zero(n, n);
  for (Index k = 0; k < m.K; ++k) {
    out.R_tilde_k.push_back(m.P * conic::hermitian_from_params(cs.x.segment(m.block_offset(k), np), n));
    out.R_tilde += out.R_tilde_k.back();
  }
  out.R_tilde_e = m.P * conic::hermitian_from_params(cs.x.segment(m.block_offset(m.K), np), n);
  out.R_tilde += out.R_tilde_e;
  out.objective = relaxed_objective(s, ch, eta, varpi, out.R_tilde_k, out.R_tilde);
  return out;
}

// ---------------------------------------------------------------------------
// Rank-one recovery

struct Certificate {
  Vec objective_delta;      // per user, |h^H R_k* h - h^H R~_k h| / sigma^2 / (1 + |.|)
  Vec min_eig_gap;          // per user, min_eig(R~_k - R_k*)
  double min_eig_an = 0.0;  // min_eig(R_e*)
  double secrecy_residual = 0.0;
  double power_delta = 0.0; // |tr(sum R_k* + R_e*) - tr(R~)|
  double power_residual = 0.0;
  double objective_gap = 0.0; // |I_b(recovered) - I_b(relaxed)| / (1 + |I_b(relaxed)|)
};

struct RecoveredSolution {
  BeamSolution beams;
  std::vector<CMat> R_k_star;
  CMat R_e_star;
  std::vector<Index> unserved;
  Certificate certificate;
};

/// w_k = (h_k^H R~_k h_k)^(-1/2) R~_k h_k, phase-fixed so h_k^H w_k >= 0.
/// Users with h_k^H R~_k h_k / sigma_k^2 <= 1e-12 get w_k = 0.
inline RecoveredSolution recover(const SdrSolution& sdr, const Channels& ch, const Vec& sigma2)
{
  const Index K = static_cast<Index>(sdr.R_tilde_k.size());
  if (K != ch.K()) throw std::invalid_argument("recover: user count mismatch");
  const Index n = sdr.R_tilde.rows();
  RecoveredSolution rec;
  rec.beams = BeamSolution::zeros(n, K);
  CMat sum = CMat::Zero(n, n);
  for (Index k = 0; k < K; ++k) {
    const CVec& h = ch.ir[static_cast<std::size_t>(k)];
    const CMat& Rk = sdr.R_tilde_k[static_cast<std::size_t>(k)];
    const double q = detail::quad(h, Rk);
    CVec w = CVec::Zero(n);
    if (q / sigma2(k) > 1e-12) {
      w = Rk * h / std::sqrt(q);
      const cdouble hw = h.dot(w);
      if (std::abs(hw) > 0.0) w *= std::conj(hw) / std::abs(hw);
    } else {
      rec.unserved.push_back(k);
    }
    rec.beams.W.col(k) = w;
    rec.R_k_star.push_back(w * w.adjoint());
    sum += rec.R_k_star.back();
  }
  rec.R_e_star = sdr.R_tilde - sum;
  rec.R_e_star = 0.5 * (rec.R_e_star + rec.R_e_star.adjoint()).eval();
  rec.beams.R_e = rec.R_e_star;
  return rec;
}

struct CertificateReport {
  bool objective_preserved = false;
  bool dominated = false;     // R~_k - R_k* >= 0
  bool an_psd = false;        // R_e* >= 0
  bool secrecy = false;
  bool power = false;
  bool value_equal = false;
  Certificate values;
  double tol = 1e-7;

  bool passed() const { return objective_preserved && dominated && an_psd && secrecy && power && value_equal; }

  std::string failures() const
  {
    std::string out;
    auto add = [&](bool ok, const char* name) {
      if (!ok) out += (out.empty() ? "" : ",") + std::string(name);
    };
    add(objective_preserved, "objective_preserved");
    add(dominated, "dominated");
    add(an_psd, "an_psd");
    add(secrecy, "secrecy");
    add(power, "power");
    add(value_equal, "value_equal");
    return out;
  }
};

/// Numerical form of the optimality argument for the recovered point.
/// Quadratic forms are compared in noise-normalised units.
inline CertificateReport verify_appendix_a(const SdrSolution& sdr, RecoveredSolution& rec, const Scenario& s,
                                           const Channels& ch, const Vec& eta, const Vec& varpi, double tol = 1e-7)
{
  const Index K = s.K();
  CertificateReport rep;
  rep.tol = tol;
  Certificate& c = rep.values;
  c.objective_delta = Vec::Zero(K);
  c.min_eig_gap = Vec::Zero(K);
  for (Index k = 0; k < K; ++k) {
    const CVec& h = ch.ir[static_cast<std::size_t>(k)];
    const double relaxed = detail::quad(h, sdr.R_tilde_k[static_cast<std::size_t>(k)]) / s.sigma2_ir(k);
    const double recovered = detail::quad(h, rec.R_k_star[static_cast<std::size_t>(k)]) / s.sigma2_ir(k);
    const bool unserved = std::find(rec.unserved.begin(), rec.unserved.end(), k) != rec.unserved.end();
    c.objective_delta(k) = unserved ? 0.0 : std::abs(recovered - relaxed) / (1.0 + std::abs(relaxed));
    c.min_eig_gap(k) = conic::min_eig(CMat(sdr.R_tilde_k[static_cast<std::size_t>(k)] -
                                           rec.R_k_star[static_cast<std::size_t>(k)]));
  }
  c.min_eig_an = conic::min_eig(rec.R_e_star);

  CMat total = rec.R_e_star;
  for (const auto& R : rec.R_k_star) total += R;
  const double qe1 = detail::quad(ch.eve, rec.R_k_star.front()) / s.sigma2_eve;
  const double qe = detail::quad(ch.eve, total) / s.sigma2_eve;
  const double ratio = s.secrecy_active() ? s.Gamma_th_e() / (1.0 + s.Gamma_th_e()) : 1.0;
  c.secrecy_residual = (ratio * (qe + 1.0) - qe1) / (1.0 + qe);
  c.power_delta = std::abs(total.trace().real() - sdr.R_tilde.trace().real());
  c.power_residual = s.P - total.trace().real();

  const double relaxed_obj = sdr.objective;
  const double recovered_obj = eval_Ib(ch, rec.beams, s.sigma2_ir, eta, varpi);
  c.objective_gap = std::abs(recovered_obj - relaxed_obj) / (1.0 + std::abs(relaxed_obj));
  rec.certificate = c;

  rep.objective_preserved = c.objective_delta.size() == 0 || c.objective_delta.maxCoeff() <= tol;
  rep.dominated = c.min_eig_gap.size() == 0 || c.min_eig_gap.minCoeff() >= -tol;
  rep.an_psd = c.min_eig_an >= -tol;
  rep.secrecy = c.secrecy_residual >= -tol;
  rep.power = c.power_delta <= tol * (1.0 + s.P) && c.power_residual >= -tol * (1.0 + s.P);
  rep.value_equal = c.objective_gap <= 1e-6;
  return rep;
}

} // namespace fcla

#endif // FCLA_BEAMFORM_HPP
