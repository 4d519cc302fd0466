#ifndef FCLA_TYPES_HPP
#define FCLA_TYPES_HPP

#include <Eigen/Dense>

#include <complex>
#include <numbers>

namespace fcla {

using Index = Eigen::Index;
using cdouble = std::complex<double>;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Ring-major antenna flattening shared by every module: i = m*N + n (0-based).
constexpr Index antenna_index(Index ring, Index element, Index elements_per_ring)
{
  return ring * elements_per_ring + element;
}

/// Ring that owns flattened antenna i.
constexpr Index ring_of(Index i, Index elements_per_ring)
{
  return i / elements_per_ring;
}

inline double db_to_linear(double db)
{
  return std::pow(10.0, db / 10.0);
}

inline double linear_to_db(double x)
{
  return 10.0 * std::log10(x);
}

/// Reduce an angle to [0, 2pi).
inline double wrap_two_pi(double a)
{
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r;
}

} // namespace fcla

#endif // FCLA_TYPES_HPP
