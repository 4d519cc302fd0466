#ifndef FCLA_CONIC_HPP
#define FCLA_CONIC_HPP

// Hermitian linear algebra helpers and a dense primal-dual interior-point
// solver for mixed nonnegative / second-order / semidefinite cone programs.
//
// Problem form (all real):
//
//     minimize    c'x
//     subject to  G x + s = h,   A x = b,   s in K
//
// where K is a product of cones listed in ConicProblem::cones, in order.
// Semidefinite blocks are stored as svec (lower triangle, column-major,
// off-diagonals scaled by sqrt(2)) so the Euclidean inner product of two
// svec vectors equals the trace inner product of the matrices.
//
// The solver runs Mehrotra predictor-corrector steps on the homogeneous
// self-dual embedding with Nesterov-Todd scaling, which yields either an
// optimal pair or an infeasibility certificate.

#include "fcla/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fcla::conic {

// ---------------------------------------------------------------------------
// Hermitian helpers

/// Hermitian matrix with H == H^H enforced at construction.
class HermitianMatrix {
public:
  HermitianMatrix() = default;

  explicit HermitianMatrix(const CMat& m, double tol = 1e-9)
  {
    if (m.rows() != m.cols()) throw std::invalid_argument("HermitianMatrix: matrix is not square");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > tol * scale)
      throw std::invalid_argument("HermitianMatrix: matrix is not Hermitian");
    data_ = 0.5 * (m + m.adjoint());
  }

  Index dim() const { return data_.rows(); }
  const CMat& matrix() const { return data_; }
  cdouble operator()(Index i, Index j) const { return data_(i, j); }

private:
  CMat data_;
};

/// Smallest eigenvalue of a Hermitian matrix.
inline double min_eig(const CMat& h)
{
  if (h.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline double min_eig(const HermitianMatrix& h)
{
  return min_eig(h.matrix());
}

inline double min_eig_real(const Mat& h)
{
  if (h.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

/// [[Re H, -Im H], [Im H, Re H]]. Eigenvalues are those of H, each doubled.
inline Mat complex_to_real_embedding(const CMat& h)
{
  const Index n = h.rows();
  Mat e(2 * n, 2 * n);
  e.topLeftCorner(n, n) = h.real();
  e.topRightCorner(n, n) = -h.imag();
  e.bottomLeftCorner(n, n) = h.imag();
  e.bottomRightCorner(n, n) = h.real();
  return e;
}

inline Mat complex_to_real_embedding(const HermitianMatrix& h)
{
  return complex_to_real_embedding(h.matrix());
}

/// Stack (Re v, Im v). For Hermitian X, v^H X v = r' E(X) r with r the stacked
/// vector and E the real embedding.
inline Vec complex_to_real_vector(const CVec& v)
{
  Vec r(2 * v.size());
  r.head(v.size()) = v.real();
  r.tail(v.size()) = v.imag();
  return r;
}

/// Number of real parameters of an n x n Hermitian matrix.
constexpr Index hermitian_param_count(Index n)
{
  return n * n;
}

/// Parameter layout: the n real diagonal entries, then (Re, Im) of each
/// strictly-upper entry in row-major order.
inline Vec params_from_hermitian(const CMat& h)
{
  const Index n = h.rows();
  Vec p(n * n);
  for (Index i = 0; i < n; ++i) p(i) = h(i, i).real();
  Index k = n;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      p(k++) = h(i, j).real();
      p(k++) = h(i, j).imag();
    }
  return p;
}

inline CMat hermitian_from_params(const Eigen::Ref<const Vec>& p, Index n)
{
  if (p.size() != n * n) throw std::invalid_argument("hermitian_from_params: size mismatch");
  CMat h(n, n);
  for (Index i = 0; i < n; ++i) h(i, i) = p(i);
  Index k = n;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const cdouble v(p(k), p(k + 1));
      h(i, j) = v;
      h(j, i) = std::conj(v);
      k += 2;
    }
  return h;
}

/// Coefficients a with a' params(X) = tr(C X) for Hermitian C and X.
inline Vec trace_coefficients(const CMat& c)
{
  const Index n = c.rows();
  Vec a(n * n);
  for (Index i = 0; i < n; ++i) a(i) = c(i, i).real();
  Index k = n;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      a(k++) = 2.0 * c(i, j).real();
      a(k++) = 2.0 * c(i, j).imag();
    }
  return a;
}

/// Coefficients of the quadratic form h^H X h in the Hermitian parameters.
inline Vec quadratic_form_coefficients(const CVec& h)
{
  return trace_coefficients(h * h.adjoint());
}

// ---------------------------------------------------------------------------
// svec

constexpr Index svec_size(Index order)
{
  return order * (order + 1) / 2;
}

inline Vec svec(const Mat& m)
{
  const Index p = m.rows();
  Vec v(svec_size(p));
  Index k = 0;
  for (Index j = 0; j < p; ++j)
    for (Index i = j; i < p; ++i) v(k++) = (i == j) ? m(i, i) : std::numbers::sqrt2 * m(i, j);
  return v;
}

inline Mat smat(const Eigen::Ref<const Vec>& v, Index p)
{
  if (v.size() != svec_size(p)) throw std::invalid_argument("smat: size mismatch");
  Mat m(p, p);
  Index k = 0;
  for (Index j = 0; j < p; ++j)
    for (Index i = j; i < p; ++i) {
      if (i == j) {
        m(i, i) = v(k++);
      } else {
        const double x = v(k++) / std::numbers::sqrt2;
        m(i, j) = x;
        m(j, i) = x;
      }
    }
  return m;
}

/// Linear map E with svec(embedding(X)) = E * params(X) for n x n Hermitian X.
inline Mat embedding_map(Index n)
{
  const Index np = hermitian_param_count(n);
  Mat e(svec_size(2 * n), np);
  Vec unit = Vec::Zero(np);
  for (Index k = 0; k < np; ++k) {
    unit.setZero();
    unit(k) = 1.0;
    e.col(k) = svec(complex_to_real_embedding(hermitian_from_params(unit, n)));
  }
  return e;
}

// ---------------------------------------------------------------------------
// Problem / solution types

enum class ConeKind { nonneg, soc, psd };

struct Cone {
  ConeKind kind = ConeKind::nonneg;
  /// Length for nonneg and soc; matrix order for psd.
  Index dim = 0;

  Index size() const { return kind == ConeKind::psd ? svec_size(dim) : dim; }
  Index degree() const { return kind == ConeKind::soc ? 1 : dim; }
};

struct ConicProblem {
  Vec c;
  Mat G;
  Vec h;
  Mat A;
  Vec b;
  std::vector<Cone> cones;

  Index num_vars() const { return c.size(); }

  Index slack_dim() const
  {
    Index d = 0;
    for (const auto& k : cones) d += k.size();
    return d;
  }

  void validate() const
  {
    const Index n = num_vars();
    if (n == 0) throw std::invalid_argument("ConicProblem: no variables");
    if (G.cols() != n || G.rows() != slack_dim() || h.size() != slack_dim())
      throw std::invalid_argument("ConicProblem: G/h do not match the cone list");
    if (A.rows() != b.size() || (A.rows() > 0 && A.cols() != n))
      throw std::invalid_argument("ConicProblem: A/b dimension mismatch");
    for (const auto& k : cones)
      if (k.dim <= 0) throw std::invalid_argument("ConicProblem: empty cone");
    if (!c.allFinite() || !G.allFinite() || !h.allFinite() || !A.allFinite() || !b.allFinite())
      throw std::invalid_argument("ConicProblem: non-finite data");
  }

  /// Sparse triplet dump: header lines then "G i j v", "A i j v", "c i v",
  /// "h i v", "b i v" with 0-based indices and 17 significant digits.
  void write_triplets(std::ostream& os) const
  {
    os.precision(17);
    os << "conic_problem vars " << num_vars() << " slack " << slack_dim() << " eq " << A.rows() << "\n";
    for (const auto& k : cones) {
      const char* name = k.kind == ConeKind::nonneg ? "nonneg" : (k.kind == ConeKind::soc ? "soc" : "psd");
      os << "cone " << name << " " << k.dim << "\n";
    }
    for (Index i = 0; i < c.size(); ++i)
      if (c(i) != 0.0) os << "c " << i << " " << c(i) << "\n";
    for (Index j = 0; j < G.cols(); ++j)
      for (Index i = 0; i < G.rows(); ++i)
        if (G(i, j) != 0.0) os << "G " << i << " " << j << " " << G(i, j) << "\n";
    for (Index i = 0; i < h.size(); ++i)
      if (h(i) != 0.0) os << "h " << i << " " << h(i) << "\n";
    for (Index j = 0; j < A.cols(); ++j)
      for (Index i = 0; i < A.rows(); ++i)
        if (A(i, j) != 0.0) os << "A " << i << " " << j << " " << A(i, j) << "\n";
    for (Index i = 0; i < b.size(); ++i)
      if (b(i) != 0.0) os << "b " << i << " " << b(i) << "\n";
  }
};

enum class SolveStatus { optimal, infeasible, unbounded, max_iterations, numerical_error };

inline const char* to_string(SolveStatus s)
{
  switch (s) {
  case SolveStatus::optimal: return "optimal";
  case SolveStatus::infeasible: return "infeasible";
  case SolveStatus::unbounded: return "unbounded";
  case SolveStatus::max_iterations: return "max_iterations";
  case SolveStatus::numerical_error: return "numerical_error";
  }
  return "unknown";
}

struct ConicSolution {
  Vec x;
  Vec s;
  Vec y;
  Vec z;
  SolveStatus status = SolveStatus::numerical_error;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;
  double relative_gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;

  /// Optimal, or stopped early with every measure below `loose_tol`.
  bool acceptable(double loose_tol) const
  {
    if (status == SolveStatus::optimal) return true;
    if (status != SolveStatus::max_iterations && status != SolveStatus::numerical_error) return false;
    const bool gap_ok = gap <= loose_tol || relative_gap <= loose_tol;
    return x.size() > 0 && primal_residual <= loose_tol && dual_residual <= loose_tol && gap_ok;
  }
};

struct SolverOptions {
  double tol = 1e-8;
  int max_iters = 200;
  double step_fraction = 0.99;
};

namespace detail {

struct Block {
  ConeKind kind;
  Index order; // psd order, or vector length
  Index offset;
  Index size;
  std::vector<Index> cols; // columns of G that touch this block
};

struct BlockScaling {
  Vec d;          // nonneg: W = diag(d)
  double beta = 1.0;
  Vec v;          // soc: W = beta (2 v v' - J)
  Mat r, rinv;    // psd: W(Z) = R' Z R
  Vec eig;        // psd: diagonal of the scaled point
};

inline std::vector<Block> make_blocks(const ConicProblem& p)
{
  std::vector<Block> blocks;
  Index off = 0;
  for (const auto& k : p.cones) {
    Block b{k.kind, k.dim, off, k.size(), {}};
    for (Index j = 0; j < p.G.cols(); ++j)
      if (p.G.block(off, j, b.size, 1).cwiseAbs().maxCoeff() > 0.0) b.cols.push_back(j);
    blocks.push_back(std::move(b));
    off += k.size();
  }
  return blocks;
}

inline Index total_degree(const std::vector<Block>& blocks)
{
  Index d = 0;
  for (const auto& b : blocks) d += b.kind == ConeKind::soc ? 1 : b.order;
  return d;
}

inline double soc_jnorm2(const Eigen::Ref<const Vec>& x)
{
  return x(0) * x(0) - x.tail(x.size() - 1).squaredNorm();
}

/// Identity element of the cone product.
inline Vec identity(const std::vector<Block>& blocks, Index dim)
{
  Vec e = Vec::Zero(dim);
  for (const auto& b : blocks) {
    switch (b.kind) {
    case ConeKind::nonneg: e.segment(b.offset, b.size).setOnes(); break;
    case ConeKind::soc: e(b.offset) = 1.0; break;
    case ConeKind::psd: e.segment(b.offset, b.size) = svec(Mat::Identity(b.order, b.order)); break;
    }
  }
  return e;
}

/// Largest t such that x - t e stays in the cone; equivalently min "eigenvalue".
inline double min_cone_value(const std::vector<Block>& blocks, const Vec& x)
{
  double m = std::numeric_limits<double>::infinity();
  for (const auto& b : blocks) {
    auto seg = x.segment(b.offset, b.size);
    switch (b.kind) {
    case ConeKind::nonneg: m = std::min(m, seg.minCoeff()); break;
    case ConeKind::soc: m = std::min(m, seg(0) - seg.tail(b.size - 1).norm()); break;
    case ConeKind::psd: m = std::min(m, min_eig_real(smat(seg, b.order))); break;
    }
  }
  return m;
}

inline Vec jordan_product(const std::vector<Block>& blocks, const Vec& x, const Vec& y)
{
  Vec r(x.size());
  for (const auto& b : blocks) {
    auto xs = x.segment(b.offset, b.size);
    auto ys = y.segment(b.offset, b.size);
    switch (b.kind) {
    case ConeKind::nonneg: r.segment(b.offset, b.size) = xs.cwiseProduct(ys); break;
    case ConeKind::soc:
      r(b.offset) = xs.dot(ys);
      r.segment(b.offset + 1, b.size - 1) = xs(0) * ys.tail(b.size - 1) + ys(0) * xs.tail(b.size - 1);
      break;
    case ConeKind::psd: {
      const Mat X = smat(xs, b.order);
      const Mat Y = smat(ys, b.order);
      r.segment(b.offset, b.size) = svec(0.5 * (X * Y + Y * X));
      break;
    }
    }
  }
  return r;
}

/// Solve lambda o v = rhs for v, with lambda the scaled point (diagonal on psd blocks).
inline Vec jordan_divide(const std::vector<Block>& blocks, const std::vector<BlockScaling>& sc, const Vec& lambda,
                         const Vec& rhs)
{
  Vec v(rhs.size());
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& b = blocks[bi];
    auto l = lambda.segment(b.offset, b.size);
    auto r = rhs.segment(b.offset, b.size);
    switch (b.kind) {
    case ConeKind::nonneg: v.segment(b.offset, b.size) = r.cwiseQuotient(l); break;
    case ConeKind::soc: {
      const Index m = b.size - 1;
      const double det = soc_jnorm2(l);
      const double v0 = (l(0) * r(0) - l.tail(m).dot(r.tail(m))) / det;
      v(b.offset) = v0;
      v.segment(b.offset + 1, m) = (r.tail(m) - v0 * l.tail(m)) / l(0);
      break;
    }
    case ConeKind::psd: {
      const Vec& e = sc[bi].eig;
      Index k = 0;
      for (Index j = 0; j < b.order; ++j)
        for (Index i = j; i < b.order; ++i, ++k) v(b.offset + k) = 2.0 * r(k) / (e(i) + e(j));
      break;
    }
    }
  }
  return v;
}

/// Largest alpha with lambda + alpha d in the cone (lambda in the interior).
inline double max_step(const std::vector<Block>& blocks, const std::vector<BlockScaling>& sc, const Vec& lambda,
                       const Vec& d)
{
  double alpha = std::numeric_limits<double>::infinity();
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& b = blocks[bi];
    auto l = lambda.segment(b.offset, b.size);
    auto ds = d.segment(b.offset, b.size);
    switch (b.kind) {
    case ConeKind::nonneg:
      for (Index i = 0; i < b.size; ++i)
        if (ds(i) < 0.0) alpha = std::min(alpha, -l(i) / ds(i));
      break;
    case ConeKind::soc: {
      const Index m = b.size - 1;
      const double qa = soc_jnorm2(ds);
      const double qb = 2.0 * (l(0) * ds(0) - l.tail(m).dot(ds.tail(m)));
      const double qc = soc_jnorm2(l);
      double root = std::numeric_limits<double>::infinity();
      if (qa == 0.0) {
        if (qb < 0.0) root = -qc / qb;
      } else {
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc >= 0.0) {
          const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
          for (double r : {q / qa, q != 0.0 ? qc / q : std::numeric_limits<double>::infinity()})
            if (r > 0.0) root = std::min(root, r);
        }
      }
      alpha = std::min(alpha, root);
      break;
    }
    case ConeKind::psd: {
      const Vec isq = sc[bi].eig.cwiseSqrt().cwiseInverse();
      const Mat t = isq.asDiagonal() * smat(ds, b.order) * isq.asDiagonal();
      const double m = min_eig_real(t);
      if (m < 0.0) alpha = std::min(alpha, -1.0 / m);
      break;
    }
    }
  }
  return alpha;
}

/// Nesterov-Todd scaling at (s, z); returns lambda = W z = W^{-T} s.
inline bool compute_scaling(const std::vector<Block>& blocks, const Vec& s, const Vec& z,
                            std::vector<BlockScaling>& sc, Vec& lambda)
{
  sc.assign(blocks.size(), BlockScaling{});
  lambda.resize(s.size());
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& b = blocks[bi];
    auto ss = s.segment(b.offset, b.size);
    auto zs = z.segment(b.offset, b.size);
    auto& w = sc[bi];
    switch (b.kind) {
    case ConeKind::nonneg:
      if ((ss.array() <= 0.0).any() || (zs.array() <= 0.0).any()) return false;
      w.d = (ss.array() / zs.array()).sqrt();
      lambda.segment(b.offset, b.size) = (ss.array() * zs.array()).sqrt();
      break;
    case ConeKind::soc: {
      const Index m = b.size - 1;
      const double sn = soc_jnorm2(ss);
      const double zn = soc_jnorm2(zs);
      if (!(sn > 0.0) || !(zn > 0.0) || ss(0) <= 0.0 || zs(0) <= 0.0) return false;
      const Vec sb = ss / std::sqrt(sn);
      const Vec zb = zs / std::sqrt(zn);
      const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
      Vec wb(b.size);
      wb(0) = (sb(0) + zb(0)) / (2.0 * gamma);
      wb.tail(m) = (sb.tail(m) - zb.tail(m)) / (2.0 * gamma);
      w.beta = std::pow(sn / zn, 0.25);
      w.v = wb;
      w.v(0) += 1.0;
      w.v /= std::sqrt(2.0 * (wb(0) + 1.0));
      // lambda = W z with W = beta (2 v v' - J)
      Vec jz = zs;
      jz.tail(m) *= -1.0;
      lambda.segment(b.offset, b.size) = w.beta * (2.0 * w.v * w.v.dot(zs) - jz);
      break;
    }
    case ConeKind::psd: {
      Eigen::LLT<Mat> ls(smat(ss, b.order));
      Eigen::LLT<Mat> lz(smat(zs, b.order));
      if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
      const Mat L = ls.matrixL();
      const Mat Lz = lz.matrixL();
      Eigen::JacobiSVD<Mat> svd(Lz.transpose() * L, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const Vec sv = svd.singularValues();
      if (!(sv.minCoeff() > 0.0)) return false;
      w.r = L * svd.matrixV() * sv.cwiseSqrt().cwiseInverse().asDiagonal();
      w.rinv = sv.cwiseSqrt().asDiagonal() * svd.matrixV().transpose() *
               L.triangularView<Eigen::Lower>().solve(Mat::Identity(b.order, b.order));
      w.eig = sv;
      lambda.segment(b.offset, b.size) = svec(Mat(sv.asDiagonal()));
      break;
    }
    }
  }
  return true;
}

enum class ScaleOp { w, w_t, w_inv, w_inv_t };

/// Apply W, W', W^{-1} or W^{-T} block-wise to the rows of x (x has slack_dim rows).
inline void apply_scaling(const Block& b, const BlockScaling& w, ScaleOp op, Eigen::Ref<Mat> x)
{
  switch (b.kind) {
  case ConeKind::nonneg:
    if (op == ScaleOp::w || op == ScaleOp::w_t)
      x = w.d.asDiagonal() * x;
    else
      x = w.d.cwiseInverse().asDiagonal() * x;
    break;
  case ConeKind::soc: {
    const Index m = b.size - 1;
    const bool inverse = (op == ScaleOp::w_inv || op == ScaleOp::w_inv_t);
    Vec u = w.v;
    if (inverse) u.tail(m) *= -1.0; // J v
    const double f = inverse ? 1.0 / w.beta : w.beta;
    for (Index c = 0; c < x.cols(); ++c) {
      Vec col = x.col(c);
      const double proj = u.dot(col);
      Vec jc = col;
      jc.tail(m) *= -1.0;
      x.col(c) = f * (2.0 * proj * u - jc);
    }
    break;
  }
  case ConeKind::psd: {
    // W(Z) = R' Z R, W'(Y) = R Y R', W^{-1}(Y) = R^{-T} Y R^{-1}, W^{-T}(S) = R^{-1} S R^{-T}
    Mat t;
    switch (op) {
    case ScaleOp::w: t = w.r.transpose(); break;
    case ScaleOp::w_t: t = w.r; break;
    case ScaleOp::w_inv: t = w.rinv.transpose(); break;
    case ScaleOp::w_inv_t: t = w.rinv; break;
    }
    for (Index c = 0; c < x.cols(); ++c) {
      const Mat m = smat(x.col(c), b.order);
      x.col(c) = svec(t * m * t.transpose());
    }
    break;
  }
  }
}

inline Vec apply_scaling(const std::vector<Block>& blocks, const std::vector<BlockScaling>& sc, ScaleOp op,
                         const Vec& x)
{
  Vec r = x;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& b = blocks[bi];
    Mat seg = r.segment(b.offset, b.size);
    apply_scaling(b, sc[bi], op, seg);
    r.segment(b.offset, b.size) = seg.col(0);
  }
  return r;
}

/// Factorized KKT system
///   [0  A'  G'  ] [dx]   [r1]
///   [A  0   0   ] [dy] = [r2]
///   [G  0  -W'W ] [dz]   [r3]
/// in terms of the scaled right-hand side r3s = W^{-T} r3; returns dz~ = W dz.
class KktSolver {
public:
  bool factor(const ConicProblem& p, const std::vector<Block>& blocks, const std::vector<BlockScaling>* sc)
  {
    p_ = &p;
    blocks_ = &blocks;
    sc_ = sc;
    const Index n = p.num_vars();
    scaled_.assign(blocks.size(), Mat{});
    Mat H = Mat::Zero(n, n);
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      const auto& b = blocks[bi];
      const Index nc = static_cast<Index>(b.cols.size());
      Mat m(b.size, nc);
      for (Index k = 0; k < nc; ++k) m.col(k) = p.G.block(b.offset, b.cols[k], b.size, 1);
      if (sc) apply_scaling(b, (*sc)[bi], ScaleOp::w_inv_t, m);
      const Mat mtm = m.transpose() * m;
      for (Index a = 0; a < nc; ++a)
        for (Index c = 0; c < nc; ++c) H(b.cols[a], b.cols[c]) += mtm(a, c);
      scaled_[bi] = std::move(m);
    }
    llt_.compute(H);
    if (llt_.info() != Eigen::Success) {
      // tiny regularization for numerically semidefinite H
      const double reg = 1e-13 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
      H.diagonal().array() += reg;
      llt_.compute(H);
      if (llt_.info() != Eigen::Success) return false;
    }
    if (p.A.rows() > 0) {
      hinv_at_ = llt_.solve(p.A.transpose());
      schur_.compute(p.A * hinv_at_);
      if (schur_.info() != Eigen::Success) return false;
    }
    return true;
  }

  /// Solve with two rounds of iterative refinement on the scaled system.
  void solve(const Vec& r1, const Vec& r2, const Vec& r3s, Vec& dx, Vec& dy, Vec& dzs) const
  {
    solve_once(r1, r2, r3s, dx, dy, dzs);
    for (int round = 0; round < refinement_rounds_; ++round) {
      Vec e1, e2, e3;
      residual(r1, r2, r3s, dx, dy, dzs, e1, e2, e3);
      Vec cx, cy, cz;
      solve_once(e1, e2, e3, cx, cy, cz);
      dx += cx;
      dy += cy;
      dzs += cz;
    }
  }

  void set_refinement_rounds(int r) { refinement_rounds_ = r; }

private:
  void residual(const Vec& r1, const Vec& r2, const Vec& r3s, const Vec& dx, const Vec& dy, const Vec& dzs, Vec& e1,
                Vec& e2, Vec& e3) const
  {
    const auto& blocks = *blocks_;
    e1 = r1;
    if (p_->A.rows() > 0) e1 -= p_->A.transpose() * dy;
    e2 = r2;
    if (p_->A.rows() > 0) e2 -= p_->A * dx;
    e3 = r3s + dzs;
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      const auto& b = blocks[bi];
      Vec xs(static_cast<Index>(b.cols.size()));
      for (std::size_t k = 0; k < b.cols.size(); ++k) xs(static_cast<Index>(k)) = dx(b.cols[k]);
      e3.segment(b.offset, b.size) -= scaled_[bi] * xs;
      // G' dz = M' dz~ on the columns of this block
      const Vec t = scaled_[bi].transpose() * dzs.segment(b.offset, b.size);
      for (std::size_t k = 0; k < b.cols.size(); ++k) e1(b.cols[k]) -= t(static_cast<Index>(k));
    }
  }

  void solve_once(const Vec& r1, const Vec& r2, const Vec& r3s, Vec& dx, Vec& dy, Vec& dzs) const
  {
    const auto& blocks = *blocks_;
    Vec rt = r1;
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      const auto& b = blocks[bi];
      const Vec t = scaled_[bi].transpose() * r3s.segment(b.offset, b.size);
      for (std::size_t k = 0; k < b.cols.size(); ++k) rt(b.cols[k]) += t(static_cast<Index>(k));
    }
    if (p_->A.rows() > 0) {
      const Vec hr = llt_.solve(rt);
      dy = schur_.solve(p_->A * hr - r2);
      dx = hr - hinv_at_ * dy;
    } else {
      dy.resize(0);
      dx = llt_.solve(rt);
    }
    dzs = -r3s;
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      const auto& b = blocks[bi];
      Vec xs(static_cast<Index>(b.cols.size()));
      for (std::size_t k = 0; k < b.cols.size(); ++k) xs(static_cast<Index>(k)) = dx(b.cols[k]);
      dzs.segment(b.offset, b.size) += scaled_[bi] * xs;
    }
  }

  const ConicProblem* p_ = nullptr;
  const std::vector<Block>* blocks_ = nullptr;
  const std::vector<BlockScaling>* sc_ = nullptr;
  std::vector<Mat> scaled_;
  Eigen::LLT<Mat> llt_;
  Mat hinv_at_;
  Eigen::LLT<Mat> schur_;
  int refinement_rounds_ = 2;
};

/// Drop linearly dependent equality rows (rank-revealing QR on A').
inline void presolve_equalities(ConicProblem& p, double threshold = 1e-10)
{
  if (p.A.rows() == 0) return;
  Eigen::ColPivHouseholderQR<Mat> qr(p.A.transpose());
  qr.setThreshold(threshold);
  const Index rank = qr.rank();
  if (rank == p.A.rows()) return;
  Mat a(rank, p.A.cols());
  Vec b(rank);
  const auto& perm = qr.colsPermutation().indices();
  std::vector<Index> keep(perm.data(), perm.data() + rank);
  std::sort(keep.begin(), keep.end());
  for (Index k = 0; k < rank; ++k) {
    a.row(k) = p.A.row(keep[static_cast<std::size_t>(k)]);
    b(k) = p.b(keep[static_cast<std::size_t>(k)]);
  }
  // inconsistent dependent rows make the problem infeasible; the solver reports it
  p.A = std::move(a);
  p.b = std::move(b);
}

} // namespace detail

/// Solve a conic program. Deterministic for a given problem.
inline ConicSolution solve(const ConicProblem& problem_in, const SolverOptions& opt = {})
{
  using namespace detail;
  problem_in.validate();
  if (!(opt.tol > 0.0) || opt.tol > 1e-2) throw std::invalid_argument("conic::solve: tol must lie in (0, 1e-2]");

  ConicProblem p = problem_in;
  if (p.A.rows() == 0) {
    p.A.resize(0, p.num_vars());
    p.b.resize(0);
  }
  presolve_equalities(p);

  const Index n = p.num_vars();
  const Index ms = p.slack_dim();
  const auto blocks = make_blocks(p);
  const double degree = static_cast<double>(total_degree(blocks));
  const Vec e = identity(blocks, ms);

  ConicSolution out;
  out.status = SolveStatus::numerical_error;

  // Initial point from two least-squares KKT solves with W = I.
  KktSolver kkt;
  if (!kkt.factor(p, blocks, nullptr)) return out;
  Vec x, y, z, s, dzs;
  {
    Vec x0, y0, zs0;
    kkt.solve(Vec::Zero(n), p.b, p.h, x0, y0, zs0);
    x = x0;
    s = -zs0; // s = h - G x
    Vec x1, y1, z1;
    kkt.solve(-p.c, Vec::Zero(p.b.size()), Vec::Zero(ms), x1, y1, z1);
    y = y1;
    z = z1;
    const double ts = -min_cone_value(blocks, s);
    const double tz = -min_cone_value(blocks, z);
    if (ts >= -1e-8 * std::max(1.0, s.norm())) s += (1.0 + std::max(ts, 0.0)) * e;
    if (tz >= -1e-8 * std::max(1.0, z.norm())) z += (1.0 + std::max(tz, 0.0)) * e;
  }
  double tau = 1.0;
  double kappa = 1.0;

  const double resx0 = std::max(1.0, p.c.norm());
  const double resy0 = std::max(1.0, p.b.norm());
  const double resz0 = std::max(1.0, p.h.norm());

  std::vector<BlockScaling> sc;
  Vec lambda;

  auto fill = [&](ConicSolution& sol, SolveStatus st, int it, double pres, double dres, double gap, double relgap,
                  double pcost, double dcost) {
    sol.status = st;
    sol.iterations = it;
    sol.primal_residual = pres;
    sol.dual_residual = dres;
    sol.gap = gap;
    sol.relative_gap = relgap;
    sol.primal_objective = pcost;
    sol.dual_objective = dcost;
  };

  double best_score = std::numeric_limits<double>::infinity();
  ConicSolution best;

  bool exhausted = false;
  for (int it = 0; it <= opt.max_iters; ++it) {
    const Vec gx = p.G * x;
    const Vec hrx = -(p.A.transpose() * y) - p.G.transpose() * z;
    const Vec hry = p.A * x;
    const Vec hrz = s + gx;
    const double cx = p.c.dot(x);
    const double by = p.b.dot(y);
    const double hz = p.h.dot(z);

    const Vec rx = -hrx + p.c * tau;        // A'y + G'z + c tau
    const Vec ry = p.b * tau - hry;         // b tau - A x
    const Vec rz = p.h * tau - hrz;         // h tau - G x - s
    const double rtau = -cx - by - hz - kappa;

    const double sz = s.dot(z);
    const double mu = (sz + tau * kappa) / (degree + 1.0);
    const double pcost = cx / tau;
    const double dcost = -(by + hz) / tau;
    const double gap = sz / (tau * tau);
    double relgap = std::numeric_limits<double>::infinity();
    if (pcost < 0.0)
      relgap = gap / -pcost;
    else if (dcost > 0.0)
      relgap = gap / dcost;
    const double pres = std::max(ry.norm() / tau / resy0, rz.norm() / tau / resz0);
    const double dres = rx.norm() / tau / resx0;

    if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(mu)) break;

    const double score = std::max({pres, dres, std::min(gap, relgap)});
    if (score < best_score) {
      best_score = score;
      best.x = x / tau;
      best.s = s / tau;
      best.y = y / tau;
      best.z = z / tau;
      fill(best, SolveStatus::max_iterations, it, pres, dres, gap, relgap, pcost, dcost);
    }

    if (pres <= opt.tol && dres <= opt.tol && (gap <= opt.tol || relgap <= opt.tol)) {
      out.x = x / tau;
      out.s = s / tau;
      out.y = y / tau;
      out.z = z / tau;
      fill(out, SolveStatus::optimal, it, pres, dres, gap, relgap, pcost, dcost);
      return out;
    }
    if (hz + by < 0.0) {
      const double pinf = hrx.norm() / resx0 / -(hz + by);
      if (pinf <= opt.tol) {
        out.x = Vec::Zero(n);
        out.s = Vec::Zero(ms);
        out.y = y / -(hz + by);
        out.z = z / -(hz + by);
        fill(out, SolveStatus::infeasible, it, pres, dres, gap, relgap, pcost, dcost);
        return out;
      }
    }
    if (cx < 0.0) {
      const double dinf = std::max(hry.norm() / resy0, hrz.norm() / resz0) / -cx;
      if (dinf <= opt.tol) {
        out.x = x / -cx;
        out.s = s / -cx;
        out.y = Vec::Zero(p.b.size());
        out.z = Vec::Zero(ms);
        fill(out, SolveStatus::unbounded, it, pres, dres, gap, relgap, pcost, dcost);
        return out;
      }
    }
    if (it == opt.max_iters) {
      exhausted = true;
      break;
    }

    if (!compute_scaling(blocks, s, z, sc, lambda)) break;
    if (!kkt.factor(p, blocks, &sc)) break;

    const Vec hs = apply_scaling(blocks, sc, ScaleOp::w_inv_t, p.h);
    Vec dx1, dy1, dzs1;
    kkt.solve(-p.c, p.b, hs, dx1, dy1, dzs1);
    const Vec dz1 = apply_scaling(blocks, sc, ScaleOp::w_inv, dzs1);
    const double den1 = -p.c.dot(dx1) - p.b.dot(dy1) - p.h.dot(dz1) + kappa / tau;

    const Vec lsq = jordan_product(blocks, lambda, lambda);
    const Vec rzs = apply_scaling(blocks, sc, ScaleOp::w_inv_t, rz);

    struct Dir {
      Vec dx, dy, dz, dzs, dss;
      double dtau = 0.0, dkappa = 0.0;
    };
    auto direction = [&](double eta, const Vec& rc, double rt) {
      Dir d;
      const Vec v = jordan_divide(blocks, sc, lambda, rc);
      Vec dx0, dy0, dzs0;
      kkt.solve(-eta * rx, eta * ry, eta * rzs - v, dx0, dy0, dzs0);
      const Vec dz0 = apply_scaling(blocks, sc, ScaleOp::w_inv, dzs0);
      const double num = -eta * rtau + p.c.dot(dx0) + p.b.dot(dy0) + p.h.dot(dz0) + rt / tau;
      d.dtau = num / den1;
      d.dx = dx0 + d.dtau * dx1;
      d.dy = dy0 + d.dtau * dy1;
      d.dzs = dzs0 + d.dtau * dzs1;
      d.dz = dz0 + d.dtau * dz1;
      d.dss = v - d.dzs;
      d.dkappa = (rt - kappa * d.dtau) / tau;
      return d;
    };
    auto step_to_boundary = [&](const Dir& d) {
      double a = std::min(max_step(blocks, sc, lambda, d.dss), max_step(blocks, sc, lambda, d.dzs));
      if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
      if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
      return a;
    };

    const Dir aff = direction(1.0, -lsq, -tau * kappa);
    const double a_aff = std::min(1.0, step_to_boundary(aff));
    const double sigma = std::pow(1.0 - a_aff, 3);
    const Vec corr = jordan_product(blocks, aff.dss, aff.dzs);
    const Vec rc = sigma * mu * e - lsq - corr;
    const double rt = sigma * mu - tau * kappa - aff.dtau * aff.dkappa;
    const Dir d = direction(1.0 - sigma, rc, rt);
    const double amax = step_to_boundary(d);
    const double alpha = std::min(1.0, opt.step_fraction * amax);
    if (!std::isfinite(alpha) || alpha <= 0.0) break;

    const Vec ds = apply_scaling(blocks, sc, ScaleOp::w_t, d.dss);
    x += alpha * d.dx;
    y += alpha * d.dy;
    z += alpha * d.dz;
    s += alpha * ds;
    tau += alpha * d.dtau;
    kappa += alpha * d.dkappa;
    if (!(tau > 0.0) || !(kappa > 0.0)) break;
  }

  if (best.x.size() == 0) return out;
  best.status = exhausted ? SolveStatus::max_iterations : SolveStatus::numerical_error;
  return best;
}

inline ConicSolution solve(const ConicProblem& problem, double tol)
{
  SolverOptions o;
  o.tol = tol;
  return solve(problem, o);
}

} // namespace fcla::conic

#endif // FCLA_CONIC_HPP
