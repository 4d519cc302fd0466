#include "fcla/fp.hpp"
#include "fcla/placement.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fcla;

namespace {

struct State {
  Scenario s;
  Placement p;
  Channels ch;
  BeamSolution b;
  FpState fp;
};

State random_state(std::uint64_t seed, Index M = 3, Index N = 2, Index K = 3, Index L = 4)
{
  std::mt19937_64 rng(seed);
  State st;
  st.s = test::random_scenario(seed, M, N, K, L);
  st.p = test::random_placement(rng, st.s.config);
  st.ch = compute_channels(st.s, st.p);
  st.b = test::random_beams(rng, st.s.config.num_antennas(), K, st.s.P, 0.6);
  test::phase_align(st.b, st.ch);
  st.fp = update_fp(st.ch, st.b, st.s.sigma2_ir);
  return st;
}

double ib_at(const State& st, const Placement& p)
{
  return eval_Ib(compute_channels(st.s, p), st.b, st.s.sigma2_ir, st.fp.eta, st.fp.varpi);
}

PathSet single_path(double theta, double phi_az, cdouble beta)
{
  PathSet ps;
  ps.theta = Vec::Constant(1, theta);
  ps.phi_az = Vec::Constant(1, phi_az);
  ps.beta = CVec::Constant(1, beta);
  return ps;
}

double rel_err(double a, double b, double floor)
{
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

} // namespace

TEST(Xi, Examples)
{
  BeamSolution b = BeamSolution::zeros(3, 2);
  b.R_e = CMat::Identity(3, 3);
  auto [xs, xe] = build_xi_matrices(b, 0.3);
  EXPECT_LT((xs - CMat::Identity(3, 3)).norm(), 1e-15);
  EXPECT_LT((xe - 0.3 * CMat::Identity(3, 3)).norm(), 1e-15);

  std::mt19937_64 rng(1);
  BeamSolution one = BeamSolution::zeros(3, 1);
  one.W = test::random_complex(rng, 3, 1);
  std::tie(xs, xe) = build_xi_matrices(one, 0.5);
  EXPECT_LT((xe + one.W * one.W.adjoint()).norm(), 1e-14);
  EXPECT_GT(conic::min_eig(-xe), -1e-12);
}

TEST(Xi, TermByTerm)
{
  std::mt19937_64 rng(2);
  const BeamSolution b = test::random_beams(rng, 4, 3, 1.0);
  const double G = 0.2;
  const auto [xs, xe] = build_xi_matrices(b, G);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) {
      cdouble s = b.R_e(i, j), e = G * b.R_e(i, j);
      for (Index k = 0; k < 3; ++k) {
        const cdouble t = b.W(i, k) * std::conj(b.W(j, k));
        s += t;
        e += k == 0 ? -t : G * t;
      }
      EXPECT_LT(std::abs(xs(i, j) - s), 1e-14);
      EXPECT_LT(std::abs(xe(i, j) - e), 1e-14);
    }
  EXPECT_GT(conic::min_eig(xs), -1e-12);
}

TEST(Expansion, MatchesDirectForms)
{
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const State st = random_state(seed);
    const auto [xs, xe] = build_xi_matrices(st.b, st.s.Gamma_th_e());
    for (Index k = 0; k < 3; ++k) {
      const auto& ps = st.s.ir_paths[static_cast<std::size_t>(k)];
      const CVec& h = st.ch.ir[static_cast<std::size_t>(k)];
      const double direct = (h.adjoint() * xs * h)(0, 0).real();
      EXPECT_LT(rel_err(expand_quadratic(ps, xs).value(st.s.config, st.p), direct, 0.0), 1e-9);
      const double re = h.dot(st.b.W.col(k)).real();
      EXPECT_LT(rel_err(expand_linear(ps, st.b.W.col(k)).value(st.s.config, st.p), re, 0.0), 1e-9);
    }
    const double scale = st.ch.eve.squaredNorm() * xe.norm();
    const double direct = (st.ch.eve.adjoint() * xe * st.ch.eve)(0, 0).real();
    EXPECT_LT(std::abs(expand_quadratic(st.s.eve_paths, xe).value(st.s.config, st.p) - direct), 1e-9 * scale);
  }
}

TEST(Gradient, MatchesFiniteDifferences)
{
  const double step = 1e-6;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const State st = random_state(seed, 2, 2, 2, 4);
    for (Block b : {Block::angles, Block::heights}) {
      const Vec g = grad_objective(st.s, st.p, st.b, st.fp.eta, st.fp.varpi, b);
      const Vec x = to_block(st.s.config, st.p, b);
      for (Index v = 0; v < x.size(); ++v) {
        Vec xp = x, xm = x;
        xp(v) += step;
        xm(v) -= step;
        const double fd = (ib_at(st, from_block(st.s.config, st.p, b, xp)) -
                           ib_at(st, from_block(st.s.config, st.p, b, xm))) /
                          (2.0 * step);
        EXPECT_LT(rel_err(g(v), fd, 1e-6 * g.cwiseAbs().maxCoeff()), 1e-5)
            << "seed " << seed << " " << to_string(b) << " entry " << v;
      }
    }
  }
}

TEST(Gradient, EveTermMatchesFiniteDifferences)
{
  const double step = 1e-6;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const State st = random_state(seed);
    const PlacementModel model(st.s, st.b, st.fp.eta, st.fp.varpi);
    for (Block b : {Block::angles, Block::heights}) {
      const Vec g = model.eve().gradient(st.s.config, st.p, b);
      const Vec x = to_block(st.s.config, st.p, b);
      for (Index v = 0; v < x.size(); ++v) {
        Vec xp = x, xm = x;
        xp(v) += step;
        xm(v) -= step;
        const double fd = (model.eve().value(st.s.config, from_block(st.s.config, st.p, b, xp)) -
                           model.eve().value(st.s.config, from_block(st.s.config, st.p, b, xm))) /
                          (2.0 * step);
        EXPECT_LT(rel_err(g(v), fd, 1e-6 * g.cwiseAbs().maxCoeff()), 1e-5);
      }
    }
  }
}

TEST(Gradient, VerticalPathHasNoAngleGradient)
{
  State st = random_state(3, 2, 2, 1, 1);
  st.s.ir_paths[0] = single_path(0.0, 1.0, cdouble(1e-3, 2e-4));
  st.s.eve_paths = single_path(0.0, 0.3, cdouble(1e-3, 0.0));
  st.ch = compute_channels(st.s, st.p);
  EXPECT_EQ(grad_objective(st.s, st.p, st.b, st.fp.eta, st.fp.varpi, Block::angles).norm(), 0.0);
  EXPECT_EQ(hessian_Fee(st.s, st.p, st.b, Block::angles).norm(), 0.0);
}

TEST(Gradient, HeightSingleTerm)
{
  // one user, one path: d/dz_m of Re{h^H w} is -(2 pi / lambda) cos(theta) sum_n mu sin(kappa)
  State st = random_state(4, 3, 2, 1, 1);
  st.s.ir_paths[0] = single_path(0.7, 2.0, std::polar(1e-3, 0.4));
  const ArrayConfig& cfg = st.s.config;
  const LinExpansion lin = expand_linear(st.s.ir_paths[0], st.b.W.col(0));
  const Vec g = lin.gradient(cfg, st.p, Block::heights);
  const double k0 = kTwoPi / cfg.lambda;
  for (Index m = 0; m < cfg.M; ++m) {
    double ref = 0.0;
    for (Index n = 0; n < cfg.N; ++n) {
      const Index i = antenna_index(m, n, cfg.N);
      const cdouble w = st.b.W(i, 0);
      const double chi = propagation_delta(st.p.phi(m, n), st.p.z(m), cfg.rho, 0.7, 2.0);
      ref += 1e-3 * std::abs(w) * std::sin(k0 * chi + 0.4 + std::arg(w));
    }
    ref *= -k0 * std::cos(0.7);
    EXPECT_NEAR(g(m), ref, 1e-12 * std::abs(ref) + 1e-300);
  }
}

TEST(Hessian, SingleElementSecondDifference)
{
  State st = random_state(5, 1, 1, 1, 3);
  for (Block b : {Block::angles, Block::heights}) {
    const double h = 1e-4;
    const PlacementModel model(st.s, st.b, st.fp.eta, st.fp.varpi);
    const Mat H = hessian_Fee(st.s, st.p, st.b, b);
    const Vec x = to_block(st.s.config, st.p, b);
    auto f = [&](double d) {
      Vec y = x;
      y(0) += d;
      return model.eve().value(st.s.config, from_block(st.s.config, st.p, b, y));
    };
    const double fd = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
    EXPECT_LT(rel_err(H(0, 0), fd, 0.0), 1e-4) << to_string(b);
  }
}

TEST(Hessian, SymmetricAndMatchesGradientDifferences)
{
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const State st = random_state(seed);
    const PlacementModel model(st.s, st.b, st.fp.eta, st.fp.varpi);
    for (Block b : {Block::angles, Block::heights}) {
      const Mat H = hessian_Fee(st.s, st.p, st.b, b);
      EXPECT_LT((H - H.transpose()).cwiseAbs().maxCoeff(), 1e-12 * H.cwiseAbs().maxCoeff());
      const Vec x = to_block(st.s.config, st.p, b);
      const double step = 1e-7;
      for (Index v = 0; v < x.size(); ++v) {
        Vec xp = x, xm = x;
        xp(v) += step;
        xm(v) -= step;
        const Vec col = (model.eve().gradient(st.s.config, from_block(st.s.config, st.p, b, xp), b) -
                         model.eve().gradient(st.s.config, from_block(st.s.config, st.p, b, xm), b)) /
                        (2.0 * step);
        EXPECT_LT((col - H.col(v)).norm(), 1e-5 * H.norm());
      }
    }
  }
}

TEST(Delta, SingleCosineIsExact)
{
  // one element, two paths: only the height coordinate moves the phase difference
  ArrayConfig cfg = ArrayConfig::with_wavelength(0.1, 1, 1);
  PathSet ps;
  ps.theta = Vec(2);
  ps.theta << 0.4, 1.9;
  ps.phi_az = Vec::Zero(2);
  ps.beta = CVec(2);
  ps.beta << cdouble(0.3, 0.1), cdouble(-0.2, 0.5);
  const QuadExpansion e = expand_quadratic(ps, CMat::Constant(1, 1, cdouble(-0.7, 0.0)));
  ASSERT_EQ(e.terms.size(), 1u);
  const double c = kTwoPi / cfg.lambda * (std::cos(0.4) - std::cos(1.9));
  EXPECT_NEAR(spectral_bound_delta(e, cfg, Block::heights), e.terms[0].mu * c * c, 1e-12 * e.terms[0].mu * c * c);
  EXPECT_EQ(spectral_bound_delta(expand_quadratic(ps, CMat::Zero(1, 1)), cfg, Block::heights), kDeltaFloor);
}

TEST(Delta, BoundsSampledHessians)
{
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const State st = random_state(seed);
    std::mt19937_64 rng(seed + 50);
    const PlacementModel model(st.s, st.b, st.fp.eta, st.fp.varpi);
    for (Block b : {Block::angles, Block::heights}) {
      const double delta = spectral_bound_delta(model.eve(), st.s.config, b);
      for (int t = 0; t < 100; ++t) {
        const Placement q = test::random_placement(rng, st.s.config);
        const Mat H = model.eve().hessian(st.s.config, q, b);
        const double lmax = Eigen::SelfAdjointEigenSolver<Mat>(H).eigenvalues().maxCoeff();
        EXPECT_GE(delta, lmax);
      }
    }
  }
}

TEST(Sca, SurrogateMinorises)
{
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const State st = random_state(seed);
    std::mt19937_64 rng(seed + 80);
    const PlacementModel model(st.s, st.b, st.fp.eta, st.fp.varpi);
    const ArrayConfig& cfg = st.s.config;
    for (Block b : {Block::angles, Block::heights}) {
      const double delta = spectral_bound_delta(model.eve(), cfg, b);
      for (int r = 0; r < 3; ++r) {
        const Placement pr = test::random_placement(rng, cfg);
        const Vec xr = to_block(cfg, pr, b);
        const double f0 = model.eve().value(cfg, pr);
        const Vec g = model.eve().gradient(cfg, pr, b);
        for (int t = 0; t < 100; ++t) {
          const Placement q = from_block(cfg, pr, b, to_block(cfg, test::random_placement(rng, cfg), b));
          const Vec x = to_block(cfg, q, b);
          const double lb = f0 + g.dot(x - xr) - 0.5 * delta * (x - xr).squaredNorm();
          EXPECT_LE(lb, model.eve().value(cfg, q) + 1e-12 * std::abs(f0));
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

/// Projection by enumerating every active set.
Vec brute_projection(const Vec& c, const Mat& C, const Vec& d)
{
  const Index m = C.rows();
  Vec best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<Index> rows;
    for (Index r = 0; r < m; ++r)
      if (mask & (1u << r)) rows.push_back(r);
    Vec x = c;
    if (!rows.empty()) {
      Mat Cw(static_cast<Index>(rows.size()), C.cols());
      Vec dw(static_cast<Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        Cw.row(static_cast<Index>(r)) = C.row(rows[r]);
        dw(static_cast<Index>(r)) = d(rows[r]);
      }
      Eigen::FullPivLU<Mat> lu(Cw * Cw.transpose());
      if (lu.rank() < Cw.rows()) continue;
      x = c + Cw.transpose() * lu.solve(dw - Cw * c);
    }
    if (((C * x - d).array() < -1e-12).any()) continue;
    const double dist = (x - c).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = x;
    }
  }
  return best;
}

} // namespace

TEST(Projection, FeasiblePointIsFixed)
{
  const State st = random_state(6);
  const PlacementModel model(st.s, st.b, st.fp.eta, st.fp.varpi);
  const ArrayConfig& cfg = st.s.config;
  std::mt19937_64 rng(6);
  for (Block b : {Block::angles, Block::heights}) {
    const Vec x0 = to_block(cfg, st.p, b);
    const Placement other = test::random_placement(rng, cfg);
    const Vec zeta = to_block(cfg, other, b);
    if (model.eve_slack(from_block(cfg, st.p, b, zeta)) < 0.0) continue;
    const ProjectionResult r = sca_project(zeta, x0, model, st.p, b, spectral_bound_delta(model.eve(), cfg, b));
    EXPECT_LT((r.xi - zeta).norm(), 1e-12);
  }
}

TEST(Projection, MatchesActiveSetEnumeration)
{
  ArrayConfig cfg = ArrayConfig::with_wavelength(0.1, 3, 3);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (Block b : {Block::heights, Block::angles}) {
    const auto groups = linear_constraints(cfg, b);
    const LinearGroup& g = groups.front();
    const Index n = static_cast<Index>(g.vars.size());
    ASSERT_EQ(n, 3);
    const Placement p0 = initial_placement(cfg);
    const Vec full0 = to_block(cfg, p0, b);
    Vec x0(n);
    for (Index i = 0; i < n; ++i) x0(i) = full0(g.vars[static_cast<std::size_t>(i)]);
    const double spread = b == Block::heights ? cfg.A : cfg.rho * kTwoPi;
    for (int t = 0; t < 200; ++t) {
      Vec c(n);
      for (Index i = 0; i < n; ++i) c(i) = x0(i) + 0.5 * spread * nd(rng);
      const Vec ref = brute_projection(c, g.C, g.d);
      const Vec got = project_polytope(c, g.C, g.d, x0);
      EXPECT_LT((got - ref).norm(), 1e-10 * spread) << to_string(b) << " trial " << t;
    }
  }
}

TEST(Projection, SecrecyInactiveUsesPolytopeOnly)
{
  State st = random_state(8);
  st.s.set_gamma_th_e(std::numeric_limits<double>::infinity());
  const PlacementModel model(st.s, st.b, st.fp.eta, st.fp.varpi);
  const ArrayConfig& cfg = st.s.config;
  const Vec x0 = to_block(cfg, st.p, Block::heights);
  const Vec zeta = x0 + Vec::Constant(x0.size(), 10.0);
  const ProjectionResult r = sca_project(zeta, x0, model, st.p, Block::heights, 1.0);
  EXPECT_TRUE(validate_placement(cfg, from_block(cfg, st.p, Block::heights, r.xi)).feasible());
  EXPECT_NEAR(r.xi(cfg.M - 1), cfg.A, 1e-12);
}

TEST(Projection, BallConstraintKkt)
{
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 30 && checked < 5; ++seed) {
    State st = random_state(seed);
    // weak side streams so that h_e^H Xi_e h_e < 0
    st.b.W.rightCols(2) *= 1e-2;
    st.b.R_e *= 1e-4;
    const ArrayConfig& cfg = st.s.config;
    const Block b = Block::heights;
    const Vec x0 = to_block(cfg, st.p, b);
    const auto [xs, xe] = build_xi_matrices(st.b, st.s.Gamma_th_e());
    (void)xs;
    const QuadExpansion eve = expand_quadratic(st.s.eve_paths, xe);
    const Vec g0 = eve.gradient(cfg, st.p, b);
    const Vec zeta = x0 - 1e-3 * g0.normalized();
    const double f0 = eve.value(cfg, st.p);
    const double fz = eve.value(cfg, from_block(cfg, st.p, b, zeta));
    if (!(f0 < 0.0 && fz < f0)) continue;
    if (!validate_placement(cfg, from_block(cfg, st.p, b, zeta)).feasible()) continue;
    // bound halfway between the two values: x0 feasible, zeta not
    st.s.sigma2_eve = -0.5 * (f0 + fz) / st.s.Gamma_th_e();
    const PlacementModel model(st.s, st.b, st.fp.eta, st.fp.varpi);
    const double delta = spectral_bound_delta(model.eve(), cfg, b);
    const ProjectionResult r = sca_project(zeta, x0, model, st.p, b, delta, 1);
    ASSERT_FALSE(r.stalled);

    // oracle: bisection on the multiplier of the ball alone
    const double c = -model.eve_bound();
    auto point = [&](double nu) {
      return Vec((zeta + 0.5 * nu * g0 + 0.5 * nu * delta * x0) / (1.0 + 0.5 * nu * delta));
    };
    auto lb = [&](const Vec& x) { return f0 + g0.dot(x - x0) - 0.5 * delta * (x - x0).squaredNorm() + c; };
    double lo = 0.0, hi = 1.0;
    while (lb(point(hi)) < 0.0) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (lb(point(mid)) < 0.0 ? lo : hi) = mid;
    }
    const Vec ref = point(hi);
    EXPECT_LT((r.xi - ref).norm(), 1e-8 * (r.xi - zeta).norm());
    // stationarity: xi - zeta parallel to the surrogate gradient, on the boundary
    const Vec grad = g0 - delta * (r.xi - x0);
    const Vec diff = r.xi - zeta;
    const double nu_half = diff.dot(grad) / grad.squaredNorm();
    EXPECT_GE(nu_half, 0.0);
    EXPECT_LT((diff - nu_half * grad).norm() / diff.norm(), 1e-6);
    EXPECT_LT(std::abs(lb(r.xi)) / std::abs(c), 1e-6);
    EXPECT_GE(model.eve_slack(from_block(cfg, st.p, b, r.xi)), 0.0);
    ++checked;
  }
  EXPECT_GE(checked, 3);
}

// ---------------------------------------------------------------------------

TEST(Pgd, ZeroGradientLeavesPlacement)
{
  State st = random_state(9, 2, 2, 1, 1);
  st.s.ir_paths[0] = single_path(0.0, 0.0, cdouble(1e-3, 0.0));
  st.s.eve_paths = single_path(0.0, 0.0, cdouble(1e-4, 0.0));
  st.ch = compute_channels(st.s, st.p);
  test::phase_align(st.b, st.ch);
  st.fp = update_fp(st.ch, st.b, st.s.sigma2_ir);
  const PgdResult r = pgd_optimize(st.p, st.s, st.b, st.fp.eta, st.fp.varpi, {}, true, false);
  EXPECT_EQ(r.placement, st.p);
}

TEST(Pgd, MonotoneAndFeasible)
{
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const State st = random_state(seed);
    const double before = ib_at(st, st.p);
    const bool secure_before = sinr_eve(st.ch, st.b, st.s.sigma2_eve) <= st.s.Gamma_th_e();
    const PgdResult r = pgd_optimize(st.p, st.s, st.b, st.fp.eta, st.fp.varpi);
    EXPECT_NEAR(r.objective_before, before, 1e-9 * std::abs(before));
    EXPECT_GE(ib_at(st, r.placement), before - 1e-8);
    EXPECT_GE(r.objective_after, r.objective_before);
    const Audit a = audit(st.s, r.placement, st.b);
    EXPECT_GE(a.placement_residual, -1e-9);
    if (secure_before) {
      EXPECT_GE(a.secrecy_residual, -1e-9);
    }
    for (std::size_t t = 1; t < r.trace.size(); ++t)
      if (r.trace[t].block == r.trace[t - 1].block && !r.trace[t].restarted && !r.trace[t - 1].restarted &&
          r.trace[t].iteration > r.trace[t - 1].iteration) {
        EXPECT_GE(r.trace[t].objective, r.trace[t - 1].objective);
      }
  }
}

TEST(Pgd, SingleElementGridOracle)
{
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    State st = random_state(seed, 1, 1, 1, 1);
    const ArrayConfig& cfg = st.s.config;
    PgdOptions opt;
    opt.angle_restarts = 0;
    const PgdResult r = pgd_optimize(st.p, st.s, st.b, st.fp.eta, st.fp.varpi, opt, true, false);
    const PlacementModel model(st.s, st.b, st.fp.eta, st.fp.varpi);
    const int n = 100000;
    double best = -std::numeric_limits<double>::infinity();
    Placement q = st.p;
    for (int i = 0; i < n; ++i) {
      q.phi(0, 0) = kTwoPi * i / n;
      best = std::max(best, model.objective(q));
    }
    // grid resolution: slope bound times half a cell
    const double slope = 2.0 * (1.0 + st.fp.eta(0)) * st.fp.varpi(0) * std::abs(st.s.ir_paths[0].beta(0)) *
                         std::abs(st.b.W(0, 0)) * kTwoPi / cfg.lambda * cfg.rho;
    const double res = slope * kPi / n;
    EXPECT_GE(r.objective_after, best - res) << "seed " << seed;
    EXPECT_LE(r.objective_after, best + res) << "seed " << seed;
  }
}

TEST(Pgd, RestartsNeverLoseGround)
{
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const State st = random_state(seed);
    PgdOptions opt;
    const double plain = pgd_optimize(st.p, st.s, st.b, st.fp.eta, st.fp.varpi, opt, true, false).objective_after;
    opt.angle_restarts = 3;
    const PgdResult r = pgd_optimize(st.p, st.s, st.b, st.fp.eta, st.fp.varpi, opt, true, false);
    EXPECT_GE(r.objective_after, plain - 1e-12 * std::abs(plain));
    EXPECT_TRUE(validate_placement(st.s.config, r.placement).feasible());
  }
}
