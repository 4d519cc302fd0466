#include "fcla/beamform.hpp"
#include "fcla/fp.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fcla;

namespace {

struct Instance {
  Scenario s;
  Placement p;
  Channels ch;
  BeamSolution b;
  FpState fp;
};

Instance make_instance(std::uint64_t seed, Index K = 3)
{
  std::mt19937_64 rng(seed);
  Instance in;
  in.s = test::random_scenario(seed, 3, 2, K, 4);
  in.p = test::random_placement(rng, in.s.config);
  in.ch = compute_channels(in.s, in.p);
  in.b = test::random_beams(rng, 6, K, in.s.P, 0.5);
  // shrink w_1 until the eavesdropper constraint holds
  while (sinr_eve(in.ch, in.b, in.s.sigma2_eve) > in.s.Gamma_th_e()) in.b.W.col(0) *= 0.5;
  in.fp = update_fp(in.ch, in.b, in.s.sigma2_ir);
  return in;
}

} // namespace

TEST(Sdr, ProblemShape)
{
  const Instance in = make_instance(1);
  const SdrModel m = build_sdr(in.s, in.ch, in.fp.eta, in.fp.varpi);
  EXPECT_NO_THROW(m.problem.validate());
  EXPECT_EQ(m.problem.num_vars(), 4 * 36 + 3);
  ASSERT_EQ(m.problem.cones.size(), 1u + 3u + 4u);
  EXPECT_EQ(m.problem.cones[0].dim, 2);
  Scenario open = in.s;
  open.set_gamma_th_e(std::numeric_limits<double>::infinity());
  EXPECT_EQ(build_sdr(open, in.ch, in.fp.eta, in.fp.varpi).problem.cones[0].dim, 1);
  EXPECT_THROW(build_sdr(in.s, in.ch, Vec::Zero(2), in.fp.varpi), std::invalid_argument);
}

TEST(Sdr, SingleUserMrt)
{
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Instance in = make_instance(seed, 1);
    in.s.set_gamma_th_e(std::numeric_limits<double>::infinity());
    const CVec& h = in.ch.ir[0];
    // moderate SNR of 10 so the optimum is well conditioned in q
    in.s.sigma2_ir(0) = in.s.P * h.squaredNorm() / 10.0;
    // full-power matched filter: the relaxed optimum keeps all power on h
    BeamSolution mrt = BeamSolution::zeros(6, 1);
    mrt.W.col(0) = h * std::sqrt(in.s.P) / h.norm();
    const FpState fp = update_fp(in.ch, mrt, in.s.sigma2_ir);
    const SdrSolution sdr = solve_sdr(in.s, in.ch, fp.eta, fp.varpi);
    ASSERT_TRUE(sdr.ok()) << conic::to_string(sdr.status);
    const double q = detail::quad(h, sdr.R_tilde_k[0]);
    const double ref = in.s.P * h.squaredNorm();
    EXPECT_NEAR(q / ref, 1.0, 1e-6);
    EXPECT_LT(std::abs(sdr.R_tilde_e.trace()), 1e-6 * in.s.P);
  }
}

TEST(Sdr, ZeroPower)
{
  Instance in = make_instance(2);
  in.s.P = 0.0;
  const SdrSolution sdr = solve_sdr(in.s, in.ch, in.fp.eta, in.fp.varpi);
  ASSERT_TRUE(sdr.ok());
  EXPECT_EQ(sdr.R_tilde.norm(), 0.0);
  const double expect = -((1.0 + in.fp.eta.array()) * in.fp.varpi.array().square() * in.s.sigma2_ir.array()).sum();
  EXPECT_NEAR(sdr.objective, expect, 1e-12 * std::abs(expect));
}

TEST(Sdr, ForcedInfeasibility)
{
  Instance in = make_instance(3, 1);
  in.s.eve_paths = in.s.ir_paths[0];
  in.s.sigma2_eve = in.s.sigma2_ir(0);
  in.s.set_gamma_th_e(0.0);
  in.ch = compute_channels(in.s, in.p);
  SdrModel m = build_sdr(in.s, in.ch, in.fp.eta, in.fp.varpi);
  // prepend q_1 >= a / 10 (a received-power floor for IR 1, a = |g_1|^2);
  // with Gamma = 0 and h_e = h_1 the secrecy row forces q_1 <= 0
  conic::ConicProblem& p = m.problem;
  const CVec g = in.ch.ir[0] * std::sqrt(in.s.P / in.s.sigma2_ir(0));
  const Vec q = conic::quadratic_form_coefficients(g);
  Mat G(p.G.rows() + 1, p.G.cols());
  G.setZero();
  const double a = g.squaredNorm();
  G.row(0).segment(0, 36) = -q.transpose() / a;
  G.bottomRows(p.G.rows()) = p.G;
  Vec h(p.h.size() + 1);
  h(0) = -0.1;
  h.tail(p.h.size()) = p.h;
  p.G = G;
  p.h = h;
  p.cones[0].dim += 1;
  const conic::ConicSolution cs = conic::solve(p, 1e-8);
  EXPECT_EQ(cs.status, conic::SolveStatus::infeasible);
}

TEST(Sdr, ImprovesOverCurrentPoint)
{
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    const Instance in = make_instance(seed);
    const double before = eval_Ib(in.ch, in.b, in.s.sigma2_ir, in.fp.eta, in.fp.varpi);
    const SdrSolution sdr = solve_sdr(in.s, in.ch, in.fp.eta, in.fp.varpi);
    ASSERT_TRUE(sdr.ok());
    EXPECT_GE(sdr.objective, before - 1e-6 * std::abs(before));
    const RecoveredSolution rec = recover(sdr, in.ch, in.s.sigma2_ir);
    EXPECT_GE(eval_Ib(in.ch, rec.beams, in.s.sigma2_ir, in.fp.eta, in.fp.varpi), before - 1e-6);
  }
}

TEST(Recovery, RankOneIdempotent)
{
  std::mt19937_64 rng(4);
  const Instance in = make_instance(4);
  SdrSolution sdr;
  sdr.R_tilde = CMat::Zero(6, 6);
  std::vector<CVec> v;
  for (Index k = 0; k < 3; ++k) {
    v.push_back(test::random_complex(rng, 6, 1) * 1e-1);
    sdr.R_tilde_k.push_back(v.back() * v.back().adjoint());
    sdr.R_tilde += sdr.R_tilde_k.back();
  }
  sdr.R_tilde_e = CMat::Zero(6, 6);
  const RecoveredSolution rec = recover(sdr, in.ch, in.s.sigma2_ir);
  for (Index k = 0; k < 3; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    EXPECT_LT((rec.R_k_star[ku] - sdr.R_tilde_k[ku]).norm(), 1e-12 * sdr.R_tilde_k[ku].norm());
    const cdouble ratio = rec.beams.W(0, k) / v[ku](0);
    EXPECT_NEAR(std::abs(ratio), 1.0, 1e-12);
    EXPECT_LT((rec.beams.W.col(k) - ratio * v[ku]).norm(), 1e-12 * v[ku].norm());
    const cdouble hw = in.ch.ir[ku].dot(rec.beams.W.col(k));
    EXPECT_GE(hw.real(), 0.0);
    EXPECT_LT(std::abs(hw.imag()), 1e-12 * std::abs(hw));
  }
  EXPECT_LT(rec.R_e_star.norm(), 1e-12);
}

TEST(Recovery, UnservedUser)
{
  const Instance in = make_instance(5);
  SdrSolution sdr;
  sdr.R_tilde_k.assign(3, CMat::Zero(6, 6));
  sdr.R_tilde_k[1] = in.ch.ir[1] * in.ch.ir[1].adjoint() * (1e-3 / in.ch.ir[1].squaredNorm());
  sdr.R_tilde_e = CMat::Identity(6, 6) * 0.1;
  sdr.R_tilde = sdr.R_tilde_k[1] + sdr.R_tilde_e;
  const RecoveredSolution rec = recover(sdr, in.ch, in.s.sigma2_ir);
  EXPECT_EQ(rec.unserved, (std::vector<Index>{0, 2}));
  EXPECT_EQ(rec.beams.W.col(0).norm(), 0.0);
  EXPECT_TRUE(rec.beams.W.allFinite());
}

TEST(Recovery, CertificateOnSolvedInstances)
{
  for (std::uint64_t seed = 20; seed < 26; ++seed) {
    const Instance in = make_instance(seed);
    const SdrSolution sdr = solve_sdr(in.s, in.ch, in.fp.eta, in.fp.varpi);
    ASSERT_TRUE(sdr.ok());
    RecoveredSolution rec = recover(sdr, in.ch, in.s.sigma2_ir);
    const CertificateReport rep = verify_appendix_a(sdr, rec, in.s, in.ch, in.fp.eta, in.fp.varpi);
    EXPECT_TRUE(rep.passed()) << "seed " << seed << ": " << rep.failures();
    for (Index k = 0; k < 3; ++k) {
      const cdouble hw = in.ch.ir[static_cast<std::size_t>(k)].dot(rec.beams.W.col(k));
      EXPECT_GE(hw.real(), 0.0);
      EXPECT_LE(std::abs(hw.imag()), 1e-12 * std::abs(hw) + 1e-300);
    }
    // value equality between relaxed and recovered points
    const double lhs = detail::quad(in.ch.ir[0], rec.R_k_star[0]);
    const double rhs = detail::quad(in.ch.ir[0], sdr.R_tilde_k[0]);
    EXPECT_NEAR(lhs / in.s.sigma2_ir(0), rhs / in.s.sigma2_ir(0), 1e-9 * (1.0 + rhs / in.s.sigma2_ir(0)));
  }
}

TEST(Recovery, CertificateCatchesInflation)
{
  const Instance in = make_instance(30);
  const SdrSolution sdr = solve_sdr(in.s, in.ch, in.fp.eta, in.fp.varpi);
  ASSERT_TRUE(sdr.ok());
  RecoveredSolution rec = recover(sdr, in.ch, in.s.sigma2_ir);
  rec.R_k_star[1] *= 2.0;
  const CertificateReport rep = verify_appendix_a(sdr, rec, in.s, in.ch, in.fp.eta, in.fp.varpi);
  EXPECT_FALSE(rep.dominated);
  EXPECT_LT(rep.values.min_eig_gap(1), -1e-7);
}

TEST(Recovery, CertificateOnZeroSolution)
{
  Instance in = make_instance(31);
  in.s.P = 0.0;
  const SdrSolution sdr = solve_sdr(in.s, in.ch, in.fp.eta, in.fp.varpi);
  RecoveredSolution rec = recover(sdr, in.ch, in.s.sigma2_ir);
  EXPECT_TRUE(verify_appendix_a(sdr, rec, in.s, in.ch, in.fp.eta, in.fp.varpi).passed());
}
