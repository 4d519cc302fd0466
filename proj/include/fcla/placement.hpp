#ifndef FCLA_PLACEMENT_HPP
#define FCLA_PLACEMENT_HPP

#include "fcla/channel.hpp"
#include "fcla/metrics.hpp"
#include "fcla/scenario.hpp"
#include "fcla/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fcla {

/// Variable block: element angles (in arc length rho * phi) or ring heights.
enum class Block { angles, heights };

inline const char* to_string(Block b)
{
  return b == Block::angles ? "angles" : "heights";
}

inline Index block_size(const ArrayConfig& cfg, Block b)
{
  return b == Block::angles ? cfg.num_antennas() : cfg.M;
}

/// Block coordinates: xi_i = rho * phi_{m,n} with i = m N + n, or xi_m = z_m.
inline Vec to_block(const ArrayConfig& cfg, const Placement& p, Block b)
{
  if (b == Block::heights) return p.z;
  Vec x(cfg.num_antennas());
  for (Index m = 0; m < cfg.M; ++m)
    for (Index n = 0; n < cfg.N; ++n) x(antenna_index(m, n, cfg.N)) = cfg.rho * p.phi(m, n);
  return x;
}

inline Placement from_block(const ArrayConfig& cfg, const Placement& base, Block b, const Vec& x)
{
  Placement p = base;
  if (b == Block::heights) {
    p.z = x;
    return p;
  }
  for (Index m = 0; m < cfg.M; ++m)
    for (Index n = 0; n < cfg.N; ++n) p.phi(m, n) = x(antenna_index(m, n, cfg.N)) / cfg.rho;
  return p;
}

/// Variable of the block that moves antenna i.
inline Index block_var(const ArrayConfig& cfg, Block b, Index i)
{
  return b == Block::angles ? i : ring_of(i, cfg.N);
}

// ---------------------------------------------------------------------------
// Phases and their derivatives

/// chi(i, l) and its first and second derivative along the block coordinate
/// that moves antenna i.
struct AntennaPhases {
  Mat chi;
  Mat d1;
  Mat d2;
};

inline AntennaPhases antenna_phases(const ArrayConfig& cfg, const Placement& p, const PathSet& paths, Block b)
{
  const Index nt = cfg.num_antennas();
  const Index L = paths.size();
  AntennaPhases ph{Mat(nt, L), Mat(nt, L), Mat(nt, L)};
  for (Index l = 0; l < L; ++l) {
    const Direction d = Direction::from_angles(paths.theta(l), paths.phi_az(l));
    for (Index m = 0; m < cfg.M; ++m)
      for (Index n = 0; n < cfg.N; ++n) {
        const Index i = antenna_index(m, n, cfg.N);
        const double c = std::cos(p.phi(m, n)), s = std::sin(p.phi(m, n));
        ph.chi(i, l) = cfg.rho * (c * d.x + s * d.y) + p.z(m) * d.z;
        if (b == Block::angles) {
          ph.d1(i, l) = -s * d.x + c * d.y;
          ph.d2(i, l) = -(c * d.x + s * d.y) / cfg.rho;
        } else {
          ph.d1(i, l) = d.z;
          ph.d2(i, l) = 0.0;
        }
      }
  }
  return ph;
}

namespace detail {

/// Bound on |d chi / d x| for a path, and on |d2 chi / dx2|.
inline std::pair<double, double> rate_bounds(const ArrayConfig& cfg, Block b, const Direction& d)
{
  if (b == Block::heights) return {std::abs(d.z), 0.0};
  const double r = std::hypot(d.x, d.y);
  return {r, r / cfg.rho};
}

/// Same bounds for the difference chi_l - chi_p at one antenna.
inline std::pair<double, double> diff_rate_bounds(const ArrayConfig& cfg, Block b, const Direction& a,
                                                  const Direction& c)
{
  if (b == Block::heights) return {std::abs(a.z - c.z), 0.0};
  const double r = std::hypot(a.x - c.x, a.y - c.y);
  return {r, r / cfg.rho};
}

inline double gershgorin(const Mat& B)
{
  double best = 0.0;
  for (Index r = 0; r < B.rows(); ++r) best = std::max(best, B.row(r).sum());
  return best;
}

} // namespace detail

inline constexpr double kDeltaFloor = 1e-12;

// ---------------------------------------------------------------------------
// Expansions

struct CosTerm {
  double mu;     // amplitude, factor 2 included
  double phase;  // angle(beta_l) - angle(beta_p) + angle(Xi_ij)
  Index i, j, l, p;
};

/// h^H Xi h written as constant + sum mu cos(kappa) with
/// kappa = phase + 2pi/lambda (chi_l(i) - chi_p(j)).
struct QuadExpansion {
  double constant = 0.0;
  std::vector<CosTerm> terms;
  PathSet paths;

  double kappa(const AntennaPhases& ph, const CosTerm& t, double k0) const
  {
    return t.phase + k0 * (ph.chi(t.i, t.l) - ph.chi(t.j, t.p));
  }

  double value(const ArrayConfig& cfg, const Placement& p) const
  {
    const AntennaPhases ph = antenna_phases(cfg, p, paths, Block::heights);
    const double k0 = kTwoPi / cfg.lambda;
    double acc = constant;
    for (const auto& t : terms) acc += t.mu * std::cos(kappa(ph, t, k0));
    return acc;
  }

  Vec gradient(const ArrayConfig& cfg, const Placement& p, Block b) const
  {
    const AntennaPhases ph = antenna_phases(cfg, p, paths, b);
    const double k0 = kTwoPi / cfg.lambda;
    Vec g = Vec::Zero(block_size(cfg, b));
    for (const auto& t : terms) {
      const double s = -t.mu * std::sin(kappa(ph, t, k0)) * k0;
      g(block_var(cfg, b, t.i)) += s * ph.d1(t.i, t.l);
      g(block_var(cfg, b, t.j)) -= s * ph.d1(t.j, t.p);
    }
    return g;
  }

  Mat hessian(const ArrayConfig& cfg, const Placement& p, Block b) const
  {
    const AntennaPhases ph = antenna_phases(cfg, p, paths, b);
    const double k0 = kTwoPi / cfg.lambda;
    const Index nv = block_size(cfg, b);
    Mat H = Mat::Zero(nv, nv);
    for (const auto& t : terms) {
      const double kap = kappa(ph, t, k0);
      const double c = t.mu * std::cos(kap), s = t.mu * std::sin(kap);
      const Index a = block_var(cfg, b, t.i), v = block_var(cfg, b, t.j);
      const double ra = k0 * ph.d1(t.i, t.l), rv = -k0 * ph.d1(t.j, t.p);
      H(a, a) -= c * ra * ra + s * k0 * ph.d2(t.i, t.l);
      H(v, v) -= c * rv * rv - s * k0 * ph.d2(t.j, t.p);
      H(a, v) -= c * ra * rv;
      H(v, a) -= c * ra * rv;
    }
    return H;
  }

  /// delta with delta I >= Hessian for every placement: each term's second
  /// derivative is bounded by mu times (rate^2 + curvature), rows summed.
  double spectral_bound(const ArrayConfig& cfg, Block b) const
  {
    const double k0 = kTwoPi / cfg.lambda;
    const Index nv = block_size(cfg, b);
    std::vector<Direction> dir;
    for (Index l = 0; l < paths.size(); ++l) dir.push_back(Direction::from_angles(paths.theta(l), paths.phi_az(l)));
    Mat B = Mat::Zero(nv, nv);
    for (const auto& t : terms) {
      const Index a = block_var(cfg, b, t.i), v = block_var(cfg, b, t.j);
      const Direction& dl = dir[static_cast<std::size_t>(t.l)];
      const Direction& dp = dir[static_cast<std::size_t>(t.p)];
      if (a == v) {
        // same variable: heights on one ring, or the same element for angles
        const auto [r, s] = detail::diff_rate_bounds(cfg, b, dl, dp);
        B(a, a) += t.mu * (k0 * k0 * r * r + k0 * s);
      } else {
        const auto [ra, sa] = detail::rate_bounds(cfg, b, dl);
        const auto [rv, sv] = detail::rate_bounds(cfg, b, dp);
        B(a, a) += t.mu * (k0 * k0 * ra * ra + k0 * sa);
        B(v, v) += t.mu * (k0 * k0 * rv * rv + k0 * sv);
        B(a, v) += t.mu * k0 * k0 * ra * rv;
        B(v, a) += t.mu * k0 * k0 * ra * rv;
      }
    }
    return std::max(detail::gershgorin(B), kDeltaFloor);
  }
};

inline QuadExpansion expand_quadratic(const PathSet& paths, const CMat& Xi)
{
  const Index nt = Xi.rows();
  const Index L = paths.size();
  QuadExpansion e;
  e.paths = paths;
  double b2 = 0.0;
  for (Index l = 0; l < L; ++l) b2 += std::norm(paths.beta(l));
  for (Index i = 0; i < nt; ++i) {
    e.constant += b2 * Xi(i, i).real();
    const double xi_abs = std::abs(Xi(i, i).real());
    const double xi_arg = Xi(i, i).real() < 0.0 ? kPi : 0.0;
    if (xi_abs > 0.0)
      for (Index l = 0; l + 1 < L; ++l)
        for (Index p = l + 1; p < L; ++p) {
          const double mu = 2.0 * std::abs(paths.beta(l)) * std::abs(paths.beta(p)) * xi_abs;
          if (mu > 0.0)
            e.terms.push_back({mu, std::arg(paths.beta(l)) - std::arg(paths.beta(p)) + xi_arg, i, i, l, p});
        }
  }
  for (Index i = 0; i < nt; ++i)
    for (Index j = i + 1; j < nt; ++j) {
      const double xi_abs = std::abs(Xi(i, j));
      if (xi_abs == 0.0) continue;
      const double xi_arg = std::arg(Xi(i, j));
      for (Index l = 0; l < L; ++l)
        for (Index p = 0; p < L; ++p) {
          const double mu = 2.0 * std::abs(paths.beta(l)) * std::abs(paths.beta(p)) * xi_abs;
          if (mu > 0.0)
            e.terms.push_back({mu, std::arg(paths.beta(l)) - std::arg(paths.beta(p)) + xi_arg, i, j, l, p});
        }
    }
  return e;
}

struct LinTerm {
  double mu;    // |beta_l| |w_i|
  double phase; // angle(beta_l) + angle(w_i)
  Index i, l;
};

/// Re{h^H w} written as sum mu cos(phase + 2pi/lambda chi_l(i)).
struct LinExpansion {
  std::vector<LinTerm> terms;
  PathSet paths;

  double value(const ArrayConfig& cfg, const Placement& p) const
  {
    const AntennaPhases ph = antenna_phases(cfg, p, paths, Block::heights);
    const double k0 = kTwoPi / cfg.lambda;
    double acc = 0.0;
    for (const auto& t : terms) acc += t.mu * std::cos(t.phase + k0 * ph.chi(t.i, t.l));
    return acc;
  }

  Vec gradient(const ArrayConfig& cfg, const Placement& p, Block b) const
  {
    const AntennaPhases ph = antenna_phases(cfg, p, paths, b);
    const double k0 = kTwoPi / cfg.lambda;
    Vec g = Vec::Zero(block_size(cfg, b));
    for (const auto& t : terms)
      g(block_var(cfg, b, t.i)) -= t.mu * std::sin(t.phase + k0 * ph.chi(t.i, t.l)) * k0 * ph.d1(t.i, t.l);
    return g;
  }

  double spectral_bound(const ArrayConfig& cfg, Block b) const
  {
    const double k0 = kTwoPi / cfg.lambda;
    Vec B = Vec::Zero(block_size(cfg, b));
    for (const auto& t : terms) {
      const auto [r, s] =
          detail::rate_bounds(cfg, b, Direction::from_angles(paths.theta(t.l), paths.phi_az(t.l)));
      B(block_var(cfg, b, t.i)) += t.mu * (k0 * k0 * r * r + k0 * s);
    }
    return std::max(B.size() ? B.maxCoeff() : 0.0, kDeltaFloor);
  }
};

inline LinExpansion expand_linear(const PathSet& paths, const CVec& w)
{
  LinExpansion e;
  e.paths = paths;
  for (Index i = 0; i < w.size(); ++i) {
    if (std::abs(w(i)) == 0.0) continue;
    for (Index l = 0; l < paths.size(); ++l) {
      const double mu = std::abs(paths.beta(l)) * std::abs(w(i));
      if (mu > 0.0) e.terms.push_back({mu, std::arg(paths.beta(l)) + std::arg(w(i)), i, l});
    }
  }
  return e;
}

/// Xi_s = sum_k w_k w_k^H + R_e and Xi_e = Gamma (sum_{k>1} w_k w_k^H + R_e) - w_1 w_1^H.
inline std::pair<CMat, CMat> build_xi_matrices(const BeamSolution& sol, double Gamma)
{
  const CMat others = sol.W.rightCols(sol.K() - 1) * sol.W.rightCols(sol.K() - 1).adjoint() + sol.R_e;
  const CMat w1 = sol.W.col(0) * sol.W.col(0).adjoint();
  CMat xs = others + w1;
  CMat xe = Gamma * others - w1;
  xs = 0.5 * (xs + xs.adjoint()).eval();
  xe = 0.5 * (xe + xe.adjoint()).eval();
  return {xs, xe};
}

// ---------------------------------------------------------------------------
// Placement subproblem

/// Objective of the placement step,
///   J = sum_k (1+eta_k) varpi_k (2 Re{h_k^H w_k} - varpi_k (h_k^H Xi_s h_k + sigma_k^2)),
/// and the eavesdropper term h_e^H Xi_e h_e with its bound -Gamma sigma_e^2.
/// J equals I_b whenever every h_k^H w_k is real and nonnegative.
class PlacementModel {
public:
  PlacementModel(const Scenario& s, const BeamSolution& sol, const Vec& eta, const Vec& varpi)
      : cfg_(s.config), sigma2_(s.sigma2_ir), eta_(eta), varpi_(varpi)
  {
    if (eta.size() != s.K() || varpi.size() != s.K()) throw std::invalid_argument("PlacementModel: FP state length");
    if (sol.W.cols() != s.K() || sol.W.rows() != cfg_.num_antennas())
      throw std::invalid_argument("PlacementModel: beam dimensions");
    secrecy_ = s.secrecy_active();
    const auto [xs, xe] = build_xi_matrices(sol, secrecy_ ? s.Gamma_th_e() : 0.0);
    for (Index k = 0; k < s.K(); ++k) {
      const auto& ps = s.ir_paths[static_cast<std::size_t>(k)];
      quad_.push_back(expand_quadratic(ps, xs));
      lin_.push_back(expand_linear(ps, sol.W.col(k)));
    }
    if (secrecy_) {
      eve_ = expand_quadratic(s.eve_paths, xe);
      bound_ = -s.Gamma_th_e() * s.sigma2_eve;
    }
  }

  const ArrayConfig& config() const { return cfg_; }
  bool secrecy_active() const { return secrecy_; }
  const QuadExpansion& eve() const { return eve_; }
  const QuadExpansion& quad(Index k) const { return quad_[static_cast<std::size_t>(k)]; }
  const LinExpansion& lin(Index k) const { return lin_[static_cast<std::size_t>(k)]; }
  double eve_bound() const { return bound_; }

  double objective(const Placement& p) const
  {
    double acc = 0.0;
    for (std::size_t k = 0; k < quad_.size(); ++k) {
      const auto ki = static_cast<Index>(k);
      const double a = (1.0 + eta_(ki)) * varpi_(ki);
      if (a == 0.0) continue;
      acc += a * (2.0 * lin_[k].value(cfg_, p) - varpi_(ki) * (quad_[k].value(cfg_, p) + sigma2_(ki)));
    }
    return acc;
  }

  Vec gradient(const Placement& p, Block b) const
  {
    Vec g = Vec::Zero(block_size(cfg_, b));
    for (std::size_t k = 0; k < quad_.size(); ++k) {
      const auto ki = static_cast<Index>(k);
      const double a = (1.0 + eta_(ki)) * varpi_(ki);
      if (a == 0.0) continue;
      g += a * (2.0 * lin_[k].gradient(cfg_, p, b) - varpi_(ki) * quad_[k].gradient(cfg_, p, b));
    }
    return g;
  }

  /// Curvature bound of J over the block, used for the first trial step.
  double objective_bound(Block b) const
  {
    double d = 0.0;
    for (std::size_t k = 0; k < quad_.size(); ++k) {
      const auto ki = static_cast<Index>(k);
      const double a = (1.0 + eta_(ki)) * varpi_(ki);
      d += a * (2.0 * lin_[k].spectral_bound(cfg_, b) + varpi_(ki) * quad_[k].spectral_bound(cfg_, b));
    }
    return std::max(d, kDeltaFloor);
  }

  /// Slack of the eavesdropper constraint, h_e^H Xi_e h_e + Gamma sigma_e^2.
  double eve_slack(const Placement& p) const
  {
    return secrecy_ ? eve_.value(cfg_, p) - bound_ : std::numeric_limits<double>::infinity();
  }

private:
  ArrayConfig cfg_;
  Vec sigma2_;
  Vec eta_;
  Vec varpi_;
  bool secrecy_ = false;
  std::vector<QuadExpansion> quad_;
  std::vector<LinExpansion> lin_;
  QuadExpansion eve_;
  double bound_ = 0.0;
};

/// Gradient of I_b over a block (Re form, tight at phase-aligned beams).
inline Vec grad_objective(const Scenario& s, const Placement& p, const BeamSolution& sol, const Vec& eta,
                          const Vec& varpi, Block b)
{
  return PlacementModel(s, sol, eta, varpi).gradient(p, b);
}

inline Mat hessian_Fee(const Scenario& s, const Placement& p, const BeamSolution& sol, Block b)
{
  const auto [xs, xe] = build_xi_matrices(sol, s.secrecy_active() ? s.Gamma_th_e() : 0.0);
  (void)xs;
  return expand_quadratic(s.eve_paths, xe).hessian(s.config, p, b);
}

inline double spectral_bound_delta(const QuadExpansion& e, const ArrayConfig& cfg, Block b)
{
  return e.spectral_bound(cfg, b);
}

// ---------------------------------------------------------------------------
// Projection

/// min 1/2 |x - c|^2 s.t. C x >= d by a primal active-set method started
/// from a feasible x0. Exact up to round-off for the small systems used here.
inline Vec project_polytope(const Vec& c, const Mat& C, const Vec& d, Vec x, double tol = 1e-12)
{
  const Index m = C.rows();
  std::vector<Index> work;
  const double scale = 1.0 + c.cwiseAbs().maxCoeff() + x.cwiseAbs().maxCoeff();
  for (Index r = 0; r < m; ++r)
    if (C.row(r).dot(x) - d(r) <= tol * scale) work.push_back(r);

  // keep a linearly independent working set
  auto independent = [&](std::vector<Index>& w) {
    std::vector<Index> keep;
    Mat rows(0, C.cols());
    for (Index r : w) {
      Mat trial(rows.rows() + 1, C.cols());
      trial << rows, C.row(r);
      Eigen::ColPivHouseholderQR<Mat> qr(trial);
      qr.setThreshold(1e-10);
      if (qr.rank() == trial.rows()) {
        rows = trial;
        keep.push_back(r);
      }
    }
    w = keep;
  };
  independent(work);

  for (int iter = 0; iter < 50 * static_cast<int>(m + x.size() + 1); ++iter) {
    Vec target = c;
    Vec mult;
    if (!work.empty()) {
      Mat Cw(static_cast<Index>(work.size()), C.cols());
      Vec dw(static_cast<Index>(work.size()));
      for (std::size_t r = 0; r < work.size(); ++r) {
        Cw.row(static_cast<Index>(r)) = C.row(work[r]);
        dw(static_cast<Index>(r)) = d(work[r]);
      }
      mult = (Cw * Cw.transpose()).ldlt().solve(dw - Cw * c);
      target = c + Cw.transpose() * mult;
    }
    const Vec step = target - x;
    if (step.norm() <= tol * scale) {
      if (work.empty()) return target;
      Index worst = -1;
      double most = -tol;
      for (Index r = 0; r < mult.size(); ++r)
        if (mult(r) < most) {
          most = mult(r);
          worst = r;
        }
      if (worst < 0) return x;
      work.erase(work.begin() + worst);
      continue;
    }
    double alpha = 1.0;
    Index block = -1;
    for (Index r = 0; r < m; ++r) {
      if (std::find(work.begin(), work.end(), r) != work.end()) continue;
      const double cp = C.row(r).dot(step);
      if (cp < 0.0) {
        const double a = (d(r) - C.row(r).dot(x)) / cp;
        if (a < alpha) {
          alpha = std::max(a, 0.0);
          block = r;
        }
      }
    }
    x += alpha * step;
    if (block >= 0) work.push_back(block);
  }
  return x;
}

/// Linear constraints of one ring (angles, arc length) or of the height chain,
/// as C x >= d over that group's variables.
struct LinearGroup {
  std::vector<Index> vars;
  Mat C;
  Vec d;
};

inline std::vector<LinearGroup> linear_constraints(const ArrayConfig& cfg, Block b)
{
  std::vector<LinearGroup> groups;
  auto chain = [](Index n, double gap, double upper, bool wrap) {
    const Index rows = (n - 1) + 2 + (wrap && n > 1 ? 1 : 0);
    LinearGroup g;
    g.C = Mat::Zero(rows, n);
    g.d = Vec::Zero(rows);
    Index r = 0;
    for (Index i = 0; i + 1 < n; ++i, ++r) {
      g.C(r, i + 1) = 1.0;
      g.C(r, i) = -1.0;
      g.d(r) = gap;
    }
    g.C(r, 0) = 1.0;
    g.d(r++) = 0.0;
    g.C(r, n - 1) = -1.0;
    g.d(r++) = -upper;
    if (wrap && n > 1) {
      // x_1 + upper - x_n >= gap
      g.C(r, 0) = 1.0;
      g.C(r, n - 1) = -1.0;
      g.d(r++) = gap - upper;
    }
    return g;
  };
  if (b == Block::angles) {
    for (Index m = 0; m < cfg.M; ++m) {
      LinearGroup g = chain(cfg.N, cfg.rho * cfg.phi_th, cfg.rho * kTwoPi, true);
      for (Index n = 0; n < cfg.N; ++n) g.vars.push_back(antenna_index(m, n, cfg.N));
      groups.push_back(std::move(g));
    }
  } else {
    LinearGroup g = chain(cfg.M, cfg.z_th, cfg.A, false);
    for (Index m = 0; m < cfg.M; ++m) g.vars.push_back(m);
    groups.push_back(std::move(g));
  }
  return groups;
}

/// Euclidean projection onto the spacing/box polytope of a block, warm
/// started from a feasible point.
inline Vec project_linear(const ArrayConfig& cfg, Block b, const Vec& c, const Vec& feasible)
{
  Vec out(c.size());
  for (const auto& g : linear_constraints(cfg, b)) {
    const Index n = static_cast<Index>(g.vars.size());
    Vec cg(n), xg(n);
    for (Index i = 0; i < n; ++i) {
      cg(i) = c(g.vars[static_cast<std::size_t>(i)]);
      xg(i) = feasible(g.vars[static_cast<std::size_t>(i)]);
    }
    const Vec r = project_polytope(cg, g.C, g.d, xg);
    for (Index i = 0; i < n; ++i) out(g.vars[static_cast<std::size_t>(i)]) = r(i);
  }
  return out;
}

struct ProjectionResult {
  Vec xi;
  bool stalled = false;
  int rounds = 0;
  double t = 0.0; // ball weight in [0, 1]; 0 when the ball is inactive
};

/// Project zeta onto {linear constraints} intersected with the SCA surrogate
/// F_lb(xi) >= bound around the feasible point xi_prev. For a surrogate
/// multiplier nu the minimiser is the polytope projection of
/// (1 - t) zeta + t (xi_r + grad / delta), t = nu delta / (2 + nu delta),
/// and t is found by bisection. Later rounds re-linearise at the new point.
inline ProjectionResult sca_project(const Vec& zeta, const Vec& xi_prev, const PlacementModel& model,
                                    const Placement& base, Block b, double delta, int max_rounds = 5)
{
  const ArrayConfig& cfg = model.config();
  ProjectionResult res;
  const Vec lin = project_linear(cfg, b, zeta, xi_prev);
  if (!model.secrecy_active() || model.eve_slack(from_block(cfg, base, b, lin)) >= 0.0) {
    res.xi = lin;
    return res;
  }
  Vec xr = xi_prev;
  res.xi = xi_prev;
  for (int r = 0; r < std::max(1, max_rounds); ++r) {
    const Placement pr = from_block(cfg, base, b, xr);
    const double f0 = model.eve().value(cfg, pr) - model.eve_bound();
    if (f0 < 0.0) {
      res.stalled = true;
      break;
    }
    const Vec g = model.eve().gradient(cfg, pr, b);
    const Vec peak = xr + g / delta;
    auto point = [&](double t) { return project_linear(cfg, b, (1.0 - t) * zeta + t * peak, xr); };
    auto surrogate = [&](const Vec& x) { return f0 + g.dot(x - xr) - 0.5 * delta * (x - xr).squaredNorm(); };

    double lo = 0.0, hi = 1.0;
    Vec best = point(hi);
    if (surrogate(best) < 0.0) {
      // the surrogate peak over the polytope is no better than xr itself
      best = xr;
    } else if (surrogate(point(lo)) >= 0.0) {
      best = point(lo);
      hi = 0.0;
    } else {
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const Vec x = point(mid);
        if (surrogate(x) >= 0.0) {
          hi = mid;
          best = x;
        } else {
          lo = mid;
        }
      }
    }
    const Placement pb = from_block(cfg, base, b, best);
    if (model.eve_slack(pb) < 0.0) {
      res.stalled = r == 0;
      break;
    }
    res.rounds = r + 1;
    res.t = hi;
    const double moved = (best - xr).norm();
    res.xi = best;
    xr = best;
    if (hi == 0.0 || moved <= 1e-14 * (1.0 + best.norm())) break;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Projected gradient ascent

struct PgdOptions {
  int max_iters = 50;
  double tau0 = 0.0;          // 0 selects 1 / delta of the objective
  double shrink = 0.5;
  double armijo = 1e-4;
  int max_halvings = 30;
  double stall_tol = 1e-9;    // on |xi^{t+1} - xi^t|, meters
  int max_sca_rounds = 5;
  int angle_restarts = 0;     // extra starts from rotated rings (angles only)

  void validate() const
  {
    if (max_iters < 0 || !(shrink > 0.0 && shrink < 1.0) || !(armijo > 0.0 && armijo <= 0.5) || max_halvings < 1 ||
        !(stall_tol > 0.0) || max_sca_rounds < 1 || !(tau0 >= 0.0) || angle_restarts < 0)
      throw std::invalid_argument("PgdOptions: invalid settings");
  }
};

struct PgdTraceRow {
  Block block = Block::angles;
  int iteration = 0;
  double step = 0.0;
  double objective = 0.0;
  bool feasible = true;
  bool restarted = false;
};

struct PgdResult {
  Placement placement;
  double objective_before = 0.0;
  double objective_after = 0.0;
  std::vector<PgdTraceRow> trace;
  std::vector<std::string> events;
};

namespace detail {

struct BlockRun {
  Vec xi;
  double value = 0.0;
};

inline BlockRun pgd_block(const PlacementModel& model, const Placement& base, Block b, const Vec& start,
                          const PgdOptions& opt, PgdResult& out)
{
  const ArrayConfig& cfg = model.config();
  const double delta_obj = model.objective_bound(b);
  const double delta_eve = model.secrecy_active() ? model.eve().spectral_bound(cfg, b) : kDeltaFloor;
  const double tau0 = opt.tau0 > 0.0 ? opt.tau0 : 1.0 / delta_obj;
  auto J = [&](const Vec& x) { return model.objective(from_block(cfg, base, b, x)); };

  Vec xi = start;
  double jx = J(xi);
  Vec iota = xi;
  double q = 1.0;
  bool momentum = false;
  for (int t = 0; t < opt.max_iters; ++t) {
    const Placement pi = from_block(cfg, base, b, iota);
    const Vec g = model.gradient(pi, b);
    if (!(g.norm() > 0.0)) break;
    const double ji = momentum ? model.objective(pi) : jx;
    double tau = tau0;
    bool accepted = false;
    Vec cand;
    double jc = 0.0;
    for (int h = 0; h < opt.max_halvings; ++h, tau *= opt.shrink) {
      const ProjectionResult pr = sca_project(iota + tau * g, xi, model, base, b, delta_eve, opt.max_sca_rounds);
      if (pr.stalled) continue;
      cand = pr.xi;
      jc = J(cand);
      if (jc >= ji + opt.armijo * g.dot(cand - iota) && jc >= jx) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (momentum) {
        // fall back to a plain gradient step from the current iterate
        iota = xi;
        q = 1.0;
        momentum = false;
        out.trace.push_back({b, t, 0.0, jx, true, true});
        continue;
      }
      break;
    }
    const Vec prev = xi;
    xi = cand;
    jx = jc;
    out.trace.push_back({b, t, tau, jx, true, false});
    const double q_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * q * q));
    const double alpha = (q_next - 1.0) / q_next;
    q = q_next;
    iota = xi + alpha * (xi - prev);
    momentum = alpha > 0.0;
    if ((xi - prev).norm() < opt.stall_tol) break;
  }
  return {xi, jx};
}

/// Rotate every ring by `shift` radians, keeping the cyclic order.
inline Placement rotate_rings(const ArrayConfig& cfg, const Placement& p, double shift)
{
  Placement r = p;
  for (Index m = 0; m < cfg.M; ++m) {
    std::vector<double> a;
    for (Index n = 0; n < cfg.N; ++n) a.push_back(wrap_two_pi(p.phi(m, n) + shift));
    std::sort(a.begin(), a.end());
    for (Index n = 0; n < cfg.N; ++n) r.phi(m, n) = a[static_cast<std::size_t>(n)];
  }
  return r;
}

} // namespace detail

/// One pass of accelerated projected gradient ascent per enabled block,
/// angles first. The result is feasible and never has a lower J.
inline PgdResult pgd_optimize(const Placement& start, const Scenario& s, const BeamSolution& sol, const Vec& eta,
                              const Vec& varpi, const PgdOptions& opt = {}, bool angles = true, bool heights = true)
{
  opt.validate();
  const PlacementModel model(s, sol, eta, varpi);
  const ArrayConfig& cfg = s.config;
  PgdResult out;
  out.placement = start;
  out.objective_before = model.objective(start);
  out.objective_after = out.objective_before;
  if (!validate_placement(cfg, start).feasible()) {
    out.events.push_back("start placement infeasible, placement step skipped");
    return out;
  }

  for (Block b : {Block::angles, Block::heights}) {
    if ((b == Block::angles && !angles) || (b == Block::heights && !heights)) continue;
    if (model.eve_slack(out.placement) < 0.0) {
      out.events.push_back(std::string("eavesdropper constraint violated at start, ") + to_string(b) + " skipped");
      continue;
    }
    const Placement base = out.placement;
    detail::BlockRun best = detail::pgd_block(model, base, b, to_block(cfg, base, b), opt, out);
    if (b == Block::angles) {
      for (int r = 1; r <= opt.angle_restarts; ++r) {
        const double shift = kTwoPi * r / (opt.angle_restarts + 1) / static_cast<double>(cfg.N);
        const Placement rot = detail::rotate_rings(cfg, base, shift);
        if (!validate_placement(cfg, rot).feasible() || model.eve_slack(rot) < 0.0) continue;
        const detail::BlockRun run = detail::pgd_block(model, rot, b, to_block(cfg, rot, b), opt, out);
        if (run.value > best.value) best = run;
      }
    }
    Placement next = from_block(cfg, base, b, best.xi);
    if (best.value >= out.objective_after && validate_placement(cfg, next).feasible() && model.eve_slack(next) >= 0.0) {
      out.placement = next;
      out.objective_after = best.value;
    }
  }
  return out;
}

} // namespace fcla

#endif // FCLA_PLACEMENT_HPP
