#ifndef FCLA_TESTS_SUPPORT_HPP
#define FCLA_TESTS_SUPPORT_HPP

#include "fcla/channel.hpp"
#include "fcla/metrics.hpp"
#include "fcla/scenario.hpp"

#include <cstdint>
#include <random>

namespace fcla::test {

inline SamplingParams small_params(Index M = 3, Index N = 2, Index K = 3, Index L = 4)
{
  SamplingParams sp;
  sp.config = ArrayConfig::with_wavelength(0.1, M, N);
  sp.K = K;
  sp.L = L;
  return sp;
}

inline Scenario random_scenario(std::uint64_t seed, Index M = 3, Index N = 2, Index K = 3, Index L = 4)
{
  return sample_scenario(seed, small_params(M, N, K, L));
}

inline CMat random_complex(std::mt19937_64& rng, Index r, Index c)
{
  std::normal_distribution<double> nd;
  CMat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = cdouble(nd(rng), nd(rng));
  return m;
}

/// Random beams using a fraction of the budget P, with a rank-deficient AN part.
inline BeamSolution random_beams(std::mt19937_64& rng, Index nt, Index K, double P, double fill = 0.8)
{
  BeamSolution b;
  b.W = random_complex(rng, nt, K);
  const CMat B = random_complex(rng, nt, 2);
  b.R_e = B * B.adjoint();
  b.R_e *= 0.2;
  const double scale = fill * P / b.power();
  b.W *= std::sqrt(scale);
  b.R_e *= scale;
  return b;
}

/// Rotate each w_k so h_k^H w_k is real and positive.
inline void phase_align(BeamSolution& b, const Channels& ch)
{
  for (Index k = 0; k < b.K(); ++k) {
    const cdouble hw = ch.ir[static_cast<std::size_t>(k)].dot(b.W.col(k));
    if (std::abs(hw) > 0.0) b.W.col(k) *= std::conj(hw) / std::abs(hw);
  }
}

/// A feasible placement with random per-ring rotations and random heights.
inline Placement random_placement(std::mt19937_64& rng, const ArrayConfig& cfg)
{
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Placement p;
  p.phi.resize(cfg.M, cfg.N);
  p.z.resize(cfg.M);
  for (Index m = 0; m < cfg.M; ++m) {
    // random gaps >= phi_th summing to at most 2 pi
    const double spare = kTwoPi - static_cast<double>(cfg.N) * cfg.phi_th;
    Vec w(cfg.N + 1);
    for (Index i = 0; i <= cfg.N; ++i) w(i) = -std::log(1.0 - u(rng));
    w *= spare / w.sum();
    double a = w(0) * 0.5;
    for (Index n = 0; n < cfg.N; ++n) {
      p.phi(m, n) = a;
      a += cfg.phi_th + w(n + 1);
    }
  }
  const double spare = cfg.A - static_cast<double>(cfg.M - 1) * cfg.z_th;
  Vec w(cfg.M + 1);
  for (Index i = 0; i <= cfg.M; ++i) w(i) = -std::log(1.0 - u(rng));
  w *= spare / w.sum();
  double z = w(0);
  for (Index m = 0; m < cfg.M; ++m) {
    p.z(m) = z;
    z += cfg.z_th + w(m + 1);
  }
  return p;
}

} // namespace fcla::test

#endif // FCLA_TESTS_SUPPORT_HPP
