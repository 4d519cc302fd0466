#ifndef FCLA_FP_HPP
#define FCLA_FP_HPP

#include "fcla/channel.hpp"
#include "fcla/metrics.hpp"
#include "fcla/types.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fcla {

/// Slack eta and quadratic-transform auxiliaries varpi, one per IR.
struct FpState {
  Vec eta;
  Vec varpi;
};

namespace detail {

inline void check_fp(const Channels& ch, const Vec& v, const char* what)
{
  if (v.size() != ch.K()) throw std::invalid_argument(std::string("fp: ") + what + " length must equal K");
}

} // namespace detail

/// eta_k = gamma_k.
inline Vec update_eta(const Channels& ch, const BeamSolution& sol, const Vec& sigma2)
{
  return all_sinr_ir(ch, sol, sigma2);
}

/// varpi_k = |h_k^H w_k| / (sum_j |h_k^H w_j|^2 + h_k^H R_e h_k + sigma_k^2).
/// The denominator keeps the j = k term.
inline Vec update_varpi(const Channels& ch, const BeamSolution& sol, const Vec& sigma2, const Vec& /*eta*/ = Vec())
{
  detail::check_dims(ch, sol);
  Vec v(ch.K());
  for (Index k = 0; k < ch.K(); ++k) {
    const LinkTerms t = link_terms(ch.ir[static_cast<std::size_t>(k)], sol, sigma2(k));
    v(k) = std::sqrt(t.signal(k)) / t.total();
  }
  return v;
}

/// gamma~_k = |h_k^H w_k|^2 / (full sum + AN + noise).
inline Vec ratio_gamma(const Channels& ch, const BeamSolution& sol, const Vec& sigma2)
{
  detail::check_dims(ch, sol);
  Vec g(ch.K());
  for (Index k = 0; k < ch.K(); ++k) {
    const LinkTerms t = link_terms(ch.ir[static_cast<std::size_t>(k)], sol, sigma2(k));
    g(k) = t.signal(k) / t.total();
  }
  return g;
}

/// sum_k (1 + eta_k) gamma~_k, the fractional part of I_a.
inline double ratio_term(const Channels& ch, const BeamSolution& sol, const Vec& sigma2, const Vec& eta)
{
  detail::check_fp(ch, eta, "eta");
  return ((1.0 + eta.array()) * ratio_gamma(ch, sol, sigma2).array()).sum();
}

/// Lagrangian dual transform in bits:
/// (1/ln 2) sum_k [ln(1 + eta_k) - eta_k + (1 + eta_k) gamma~_k].
inline double eval_Ia(const Channels& ch, const BeamSolution& sol, const Vec& sigma2, const Vec& eta)
{
  detail::check_fp(ch, eta, "eta");
  const Vec g = ratio_gamma(ch, sol, sigma2);
  double acc = 0.0;
  for (Index k = 0; k < ch.K(); ++k) acc += std::log1p(eta(k)) - eta(k) + (1.0 + eta(k)) * g(k);
  return acc / std::log(2.0);
}

/// Quadratic transform with the constant dropped:
/// sum_k 2(1+eta_k) varpi_k |h_k^H w_k| - (1+eta_k) varpi_k^2 (full sum + AN + noise).
inline double eval_Ib(const Channels& ch, const BeamSolution& sol, const Vec& sigma2, const Vec& eta, const Vec& varpi)
{
  detail::check_dims(ch, sol);
  detail::check_fp(ch, eta, "eta");
  detail::check_fp(ch, varpi, "varpi");
  double acc = 0.0;
  for (Index k = 0; k < ch.K(); ++k) {
    const LinkTerms t = link_terms(ch.ir[static_cast<std::size_t>(k)], sol, sigma2(k));
    const double a = 1.0 + eta(k);
    acc += 2.0 * a * varpi(k) * std::sqrt(t.signal(k)) - a * varpi(k) * varpi(k) * t.total();
  }
  return acc;
}

inline FpState update_fp(const Channels& ch, const BeamSolution& sol, const Vec& sigma2)
{
  FpState st;
  st.eta = update_eta(ch, sol, sigma2);
  st.varpi = update_varpi(ch, sol, sigma2, st.eta);
  return st;
}

} // namespace fcla

#endif // FCLA_FP_HPP
