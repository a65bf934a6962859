#pragma once

// Special functions and constants: Gauss hypergeometric 2F1 on [0,1], the
// fractional p-Laplacian normalization constant, unit-ball volume, the radial
// interaction kernel Theta_{N,s,p} and the fractional perimeter of a ball.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "fracsym/error.hpp"

namespace fracsym::specialfn {

struct HypergeometricParams {
  double a = 0.0;
  double b = 0.0;
  double c = 1.0;
  double x = 0.0;
};

struct SeriesOptions {
  double rel_tol = 1e-16;
  std::size_t max_terms = 200000;
  /// Above this argument the 1-x connection formulas are used.
  double near_one_switch = 0.95;
  /// c-a-b closer than this to an integer takes the logarithmic branch
  /// (exactly integer) or the slow direct series (nearly integer).
  double integer_snap = 1e-5;
  std::size_t max_terms_slow = 4000000;
};

namespace detail {

inline bool is_nonpositive_integer(double z) {
  return z <= 0.0 && z == std::nearbyint(z);
}

inline double gamma_fn(double z) { return boost::math::tgamma(z); }

inline double rgamma(double z) {
  if (is_nonpositive_integer(z)) return 0.0;
  return 1.0 / boost::math::tgamma(z);
}

inline double digamma_fn(double z) { return boost::math::digamma(z); }

// Direct power series sum_n (a)_n (b)_n / ((c)_n n!) x^n. Throws if the
// tolerance is not met within max_terms.
inline double power_series(double a, double b, double c, double x, double rel_tol,
                           std::size_t max_terms) {
  double sum = 1.0;
  double term = 1.0;
  for (std::size_t n = 0; n < max_terms; ++n) {
    const double dn = static_cast<double>(n);
    term *= (a + dn) * (b + dn) / ((c + dn) * (dn + 1.0)) * x;
    sum += term;
    if (term == 0.0) return sum;
    if (std::abs(term) <= rel_tol * std::abs(sum) && n > 2) return sum;
  }
  std::ostringstream os;
  os << "2F1 power series did not converge: a=" << a << " b=" << b << " c=" << c
     << " x=" << x;
  throw ConvergenceError(os.str(), std::abs(term));
}

// c = a + b exactly (A&S 15.3.10).
inline double near_one_log0(double a, double b, double y, const SeriesOptions& opt) {
  const double pre = gamma_fn(a + b) * rgamma(a) * rgamma(b);
  const double log_y = std::log(y);
  double sum = 0.0;
  double coef = 1.0;
  for (std::size_t n = 0; n < opt.max_terms; ++n) {
    const double dn = static_cast<double>(n);
    const double term = coef * (2.0 * digamma_fn(dn + 1.0) - digamma_fn(a + dn) -
                                digamma_fn(b + dn) - log_y);
    sum += term;
    if (n > 4 && std::abs(term) <= opt.rel_tol * std::abs(sum)) return pre * sum;
    coef *= (a + dn) * (b + dn) / ((dn + 1.0) * (dn + 1.0)) * y;
    if (coef == 0.0) return pre * sum;
  }
  throw ConvergenceError("2F1 logarithmic connection series did not converge");
}

// c = a + b + m, m a positive integer (A&S 15.3.11).
inline double near_one_logm(double a, double b, int m, double y, const SeriesOptions& opt) {
  const double dm = static_cast<double>(m);
  double finite_sum = 0.0;
  double t = 1.0;
  for (int n = 0; n < m; ++n) {
    finite_sum += t;
    const double dn = static_cast<double>(n);
    if (n + 1 < m) t *= (a + dn) * (b + dn) / ((dn + 1.0) * (1.0 - dm + dn)) * y;
  }
  const double part1 = gamma_fn(dm) * gamma_fn(a + b + dm) * rgamma(a + dm) *
                       rgamma(b + dm) * finite_sum;

  const double pre2 = std::pow(-y, m) * gamma_fn(a + b + dm) * rgamma(a) * rgamma(b);
  if (pre2 == 0.0) return part1;
  const double log_y = std::log(y);
  double sum = 0.0;
  double coef = rgamma(dm + 1.0);
  for (std::size_t n = 0; n < opt.max_terms; ++n) {
    const double dn = static_cast<double>(n);
    const double term = coef * (log_y - digamma_fn(dn + 1.0) - digamma_fn(dn + dm + 1.0) +
                                digamma_fn(a + dn + dm) + digamma_fn(b + dn + dm));
    sum += term;
    if (n > 4 && std::abs(term) <= opt.rel_tol * std::abs(sum)) return part1 - pre2 * sum;
    coef *= (a + dm + dn) * (b + dm + dn) / ((dn + 1.0) * (dn + dm + 1.0)) * y;
    if (coef == 0.0) return part1 - pre2 * sum;
  }
  throw ConvergenceError("2F1 logarithmic connection series did not converge");
}

// 0 < 1-x small. Euler's transformation first makes c-a-b positive.
inline double near_one(double a, double b, double c, double x, const SeriesOptions& opt) {
  const double d = c - a - b;
  const double y = 1.0 - x;
  if (d < 0.0) return std::pow(y, d) * near_one(c - a, c - b, c, x, opt);

  const double m = std::nearbyint(d);
  const double dist = std::abs(d - m);
  if (dist == 0.0) {
    if (m == 0.0) return near_one_log0(a, b, y, opt);
    return near_one_logm(a, b, static_cast<int>(m), y, opt);
  }
  if (dist < opt.integer_snap) return power_series(a, b, c, x, opt.rel_tol, opt.max_terms_slow);

  // A&S 15.3.6
  const double t1 = gamma_fn(c) * gamma_fn(d) * rgamma(c - a) * rgamma(c - b) *
                    power_series(a, b, a + b - c + 1.0, y, opt.rel_tol, opt.max_terms);
  const double pre2 = gamma_fn(c) * gamma_fn(-d) * rgamma(a) * rgamma(b);
  const double t2 =
      pre2 == 0.0 ? 0.0
                  : std::pow(y, d) * pre2 *
                        power_series(c - a, c - b, d + 1.0, y, opt.rel_tol, opt.max_terms);
  return t1 + t2;
}

} // namespace detail

/// Gauss hypergeometric function 2F1(a,b;c;x) for real parameters and
/// x in [0,1]. x = 1 requires c > a + b and returns the Gauss summation value.
inline double gauss_2f1(const HypergeometricParams& hp, const SeriesOptions& opt = {}) {
  const auto [a, b, c, x] = hp;
  if (!(x >= 0.0 && x <= 1.0)) {
    std::ostringstream os;
    os << "2F1 argument x=" << x << " outside [0,1]";
    throw DomainError(os.str());
  }
  if (detail::is_nonpositive_integer(c))
    throw DomainError("2F1 parameter c must not be zero or a negative integer");
  if (x == 0.0) return 1.0;

  const bool terminating =
      detail::is_nonpositive_integer(a) || detail::is_nonpositive_integer(b);
  if (x == 1.0) {
    if (!(c > a + b)) throw DomainError("2F1 at x=1 requires c > a + b");
    return detail::gamma_fn(c) * detail::gamma_fn(c - a - b) * detail::rgamma(c - a) *
           detail::rgamma(c - b);
  }
  if (terminating || x <= opt.near_one_switch)
    return detail::power_series(a, b, c, x, opt.rel_tol, opt.max_terms);
  return detail::near_one(a, b, c, x, opt);
}

/// Derivative d/dx 2F1(a,b;c;x) = (ab/c) 2F1(a+1,b+1;c+1;x).
inline double gauss_2f1_derivative(const HypergeometricParams& hp, const SeriesOptions& opt = {}) {
  return hp.a * hp.b / hp.c * gauss_2f1({hp.a + 1.0, hp.b + 1.0, hp.c + 1.0, hp.x}, opt);
}

/// Normalization constant gamma(N,s,p) of the fractional p-Laplacian.
inline double gamma_norm_const(int N, double s, double p) {
  if (N < 1) throw DomainError("dimension N must be >= 1");
  if (!(s > 0.0 && s < 1.0)) throw DomainError("s must lie in (0,1)");
  if (!(p >= 2.0)) throw DomainError("p must be >= 2 (degenerate case)");
  const double dN = static_cast<double>(N);
  return s * p * std::pow(2.0, 2.0 * s - 2.0) * (1.0 - s) /
         std::pow(std::numbers::pi, (dN - 1.0) / 2.0) * detail::gamma_fn((dN + s * p) / 2.0) /
         (detail::gamma_fn((p + 1.0) / 2.0) * detail::gamma_fn(2.0 - s));
}

/// Lebesgue measure of the unit ball in R^N.
inline double unit_ball_volume(int N) {
  if (N < 1) throw DomainError("dimension N must be >= 1");
  // omega_N = 2 pi / N * omega_{N-2}, exact in the lowest dimensions
  double w = N % 2 == 0 ? 1.0 : 2.0;
  for (int k = N % 2 == 0 ? 2 : 3; k <= N; k += 2) w *= 2.0 * std::numbers::pi / k;
  return w;
}

/// Surface measure of the unit sphere S^{N-1}, i.e. N * omega_N.
inline double unit_sphere_area(int N) { return static_cast<double>(N) * unit_ball_volume(N); }

struct KernelParams {
  int N = 1;
  double s = 0.5;
  double p = 2.0;
  /// Angular constant 2 pi^{(N-1)/2} / Gamma((N-1)/2) for N >= 2. Set to 1
  /// for N = 1, where the kernel is the plain two-point angular average.
  double alpha_N = 1.0;

  static KernelParams make(int N, double s, double p) {
    if (N < 1) throw DomainError("dimension N must be >= 1");
    if (!(s > 0.0 && s < 1.0)) throw DomainError("s must lie in (0,1)");
    if (!(p >= 2.0)) throw DomainError("p must be >= 2");
    KernelParams kp{N, s, p, 1.0};
    if (N >= 2) {
      const double dN = static_cast<double>(N);
      kp.alpha_N = 2.0 * std::pow(std::numbers::pi, (dN - 1.0) / 2.0) /
                   detail::gamma_fn((dN - 1.0) / 2.0);
    }
    return kp;
  }
};

struct KernelOptions {
  /// |r - rho| below this fraction of max(r, rho) is treated as the diagonal.
  double min_relative_separation = 1e-14;
  SeriesOptions series{};
};

namespace detail {

// Spherical average of |lo x' - hi y'|^{-(N+sigma)} over x', y' in S^{N-1},
// multiplied by gap^{1+sigma} where gap = hi - lo > 0 is supplied separately
// to avoid cancellation. Bounded and positive for all 0 <= lo <= hi.
inline double sphere_average_regular(int N, double sigma, double lo, double hi, double gap,
                                     const SeriesOptions& opt = {}) {
  const double q1 = 1.0 + sigma;
  if (N == 1) return 0.5 * (1.0 + std::pow(gap / (hi + lo), q1));
  const double dN = static_cast<double>(N);
  const double ratio = lo / hi;
  const double f = gauss_2f1({-sigma / 2.0, dN / 2.0 - sigma / 2.0 - 1.0, dN / 2.0, ratio * ratio},
                             opt);
  return std::pow(hi, 2.0 + sigma - dN) * std::pow(hi + lo, -q1) * f;
}

} // namespace detail

/// Theta_{N,s,p}(r,rho) * |r - rho|^{1+sp}: the bounded factor of the kernel,
/// finite on the diagonal r = rho > 0.
inline double radial_kernel_regular(const KernelParams& kp, double r, double rho,
                                    const KernelOptions& opt = {}) {
  if (!(r >= 0.0 && rho >= 0.0)) throw DomainError("kernel radii must be nonnegative");
  const double lo = std::min(r, rho);
  const double hi = std::max(r, rho);
  if (hi == 0.0) throw DomainError("kernel undefined at r = rho = 0");
  return kp.alpha_N *
         detail::sphere_average_regular(kp.N, kp.s * kp.p, lo, hi, hi - lo, opt.series);
}

/// Radial kernel Theta_{N,s,p}(r,rho); singular on the diagonal.
inline double radial_kernel_theta(const KernelParams& kp, double r, double rho,
                                  const KernelOptions& opt = {}) {
  const double gap = std::abs(r - rho);
  if (!(gap > opt.min_relative_separation * std::max(r, rho))) {
    std::ostringstream os;
    os << "radial kernel is singular at r = rho (r=" << r << ", rho=" << rho << ")";
    throw DomainError(os.str());
  }
  const double q = 1.0 + kp.s * kp.p;
  // S^0 = {-1, 1}: average of |r x' - rho y'|^{-q} over the two values of x'y'
  if (kp.N == 1) return kp.alpha_N * 0.5 * (std::pow(gap, -q) + std::pow(r + rho, -q));
  return radial_kernel_regular(kp, r, rho, opt) * std::pow(gap, -q);
}

struct QuadratureOptions {
  double rel_tol = 1e-11;
  std::size_t max_refinements = 15;
};

/// Fractional s-perimeter of the ball B_R in R^N,
/// int_{B_R} int_{B_R^c} |x-y|^{-(N+s)} dx dy.
///
/// Reduced to radial coordinates with the spherical-average kernel. The
/// substitutions rho - r = (R - r) v^{-1/s} and R - r = R w^{1/(1-s)} absorb
/// both interface singularities, leaving a bounded integrand on [0,1]^2.
inline double frac_perimeter(int N, double s, double R, const QuadratureOptions& opt = {}) {
  if (N < 1) throw DomainError("dimension N must be >= 1");
  if (!(s > 0.0 && s < 1.0)) throw DomainError("s must lie in (0,1)");
  if (!(R > 0.0)) throw DomainError("ball radius must be positive");

  const double dN = static_cast<double>(N);
  boost::math::quadrature::tanh_sinh<double> integrator(opt.max_refinements);

  auto inner = [&](double r, double outer_gap) {
    auto psi = [&](double v) {
      if (v <= 0.0) return 1.0;
      const double gap = outer_gap * std::pow(v, -1.0 / s);
      if (!std::isfinite(gap)) return 1.0;
      const double hi = r + gap;
      if (N == 1) return 0.5 * (1.0 + std::pow(gap / (hi + r), 1.0 + s));
      const double ratio = r / hi;
      const double f =
          gauss_2f1({-s / 2.0, dN / 2.0 - s / 2.0 - 1.0, dN / 2.0, ratio * ratio});
      return std::pow(hi / (hi + r), 1.0 + s) * f;
    };
    return integrator.integrate(psi, 0.0, 1.0, opt.rel_tol);
  };

  auto outer = [&](double w) {
    const double outer_gap = R * std::pow(w, 1.0 / (1.0 - s));
    const double r = std::max(0.0, R - outer_gap);
    return std::pow(r, dN - 1.0) * inner(r, outer_gap);
  };

  double err = 0.0;
  double l1 = 0.0;
  const double integral = integrator.integrate(outer, 0.0, 1.0, opt.rel_tol, &err, &l1);
  if (!(err <= 1e3 * opt.rel_tol * std::abs(integral)) || !std::isfinite(integral))
    throw ConvergenceError("fractional perimeter quadrature did not converge", err);
  const double sphere = unit_sphere_area(N);
  return sphere * sphere * std::pow(R, 1.0 - s) / (s * (1.0 - s)) * integral;
}

} // namespace fracsym::specialfn
