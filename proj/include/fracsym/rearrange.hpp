#pragma once

// Rearrangements of grid functions and the mass concentration order.
//
// Rearranging a grid function permutes its cell averages: f* sorts |f| in
// non-increasing order on (0, |Omega|), and the Schwarz profile f# places the
// sorted values on the centered interval Omega# by increasing distance from
// the origin. Both are exactly equimeasurable with f.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "fracsym/error.hpp"
#include "fracsym/grid_function.hpp"

namespace fracsym::rearrange {

/// |{ |f| > t }|
inline double distribution_function(const GridFunction& f, double t) {
  if (!(t >= 0.0)) throw DomainError("distribution function needs t >= 0");
  std::size_t count = 0;
  for (double v : f.values())
    if (std::abs(v) > t) ++count;
  return static_cast<double>(count) * f.cell_width();
}

namespace detail {

// Cell indices ordered by non-increasing |value|; ties keep index order.
inline std::vector<std::size_t> sorted_order(const GridFunction& f) {
  std::vector<std::size_t> idx(f.n_cells());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto vals = f.values();
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(vals[a]) > std::abs(vals[b]);
  });
  return idx;
}

// Cells of an n-cell centered grid ordered by distance from the origin.
// Equidistant pairs list the left cell first.
inline std::vector<std::size_t> centered_cell_order(std::size_t n) {
  std::vector<std::size_t> order;
  order.reserve(n);
  if (n % 2 == 1) {
    const std::size_t c = n / 2;
    order.push_back(c);
    for (std::size_t k = 1; k <= c; ++k) {
      order.push_back(c - k);
      order.push_back(c + k);
    }
  } else {
    const std::size_t c = n / 2;
    for (std::size_t k = 0; k < c; ++k) {
      order.push_back(c - 1 - k);
      order.push_back(c + k);
    }
  }
  return order;
}

} // namespace detail

/// One-dimensional decreasing rearrangement f* on (0, |Omega|).
inline GridFunction decreasing_rearrangement(const GridFunction& f) {
  const auto order = detail::sorted_order(f);
  std::vector<double> out(f.n_cells());
  for (std::size_t k = 0; k < order.size(); ++k) out[k] = std::abs(f[order[k]]);
  return GridFunction(0.0, f.measure(), std::move(out));
}

/// Schwarz (symmetric decreasing) rearrangement on Omega# = (-|Omega|/2, |Omega|/2).
inline GridFunction schwarz_profile(const GridFunction& f) {
  const auto order = detail::sorted_order(f);
  const auto cells = detail::centered_cell_order(f.n_cells());
  std::vector<double> out(f.n_cells());
  for (std::size_t k = 0; k < order.size(); ++k) out[cells[k]] = std::abs(f[order[k]]);
  const double half = f.measure() / 2.0;
  return GridFunction(-half, half, std::move(out));
}

struct ConcentrationCurve {
  std::vector<double> radii;
  std::vector<double> masses;
};

/// r -> int_{-r}^{r} f, by exact integration of the cell averages.
inline ConcentrationCurve concentration_function(const GridFunction& f,
                                                 std::span<const double> radii) {
  ConcentrationCurve curve;
  curve.radii.assign(radii.begin(), radii.end());
  curve.masses.reserve(radii.size());
  for (double r : radii) {
    if (!(r >= 0.0)) throw DomainError("concentration radius must be nonnegative");
    curve.masses.push_back(r == 0.0 ? 0.0 : f.integral_over(-r, r));
  }
  return curve;
}

/// Radii at which a centered grid's concentration curve has its kinks: 0 and
/// every |cell boundary|, sorted and deduplicated.
inline std::vector<double> boundary_radii(const GridFunction& f) {
  std::vector<double> radii{0.0};
  for (std::size_t i = 0; i < f.n_cells(); ++i) {
    radii.push_back(std::abs(f.cell_left(i)));
    radii.push_back(std::abs(f.cell_right(i)));
  }
  std::sort(radii.begin(), radii.end());
  const double eps = 1e-12 * std::max(1.0, radii.back());
  radii.erase(std::unique(radii.begin(), radii.end(),
                          [eps](double a, double b) { return std::abs(a - b) <= eps; }),
              radii.end());
  return radii;
}

enum class Concentration { less_or_equal, greater_or_equal, equal, incomparable };

inline const char* to_string(Concentration c) {
  switch (c) {
    case Concentration::less_or_equal: return "LESS_OR_EQUAL";
    case Concentration::greater_or_equal: return "GREATER_OR_EQUAL";
    case Concentration::equal: return "EQUAL";
    case Concentration::incomparable: return "INCOMPARABLE";
  }
  return "?";
}

struct ConcentrationComparison {
  Concentration relation = Concentration::equal;
  /// Signed margin against the returned relation: for LESS_OR_EQUAL the
  /// largest conc_f - conc_g, for GREATER_OR_EQUAL the largest conc_g - conc_f,
  /// for EQUAL the largest |difference|, for INCOMPARABLE the smaller of the two
  /// one-sided violations.
  double worst_violation = 0.0;
  double max_difference = 0.0;  ///< max_r conc_f(r) - conc_g(r)
  double min_difference = 0.0;  ///< min_r conc_f(r) - conc_g(r)
  double tolerance = 0.0;
  std::vector<double> radii;
};

/// Decides f < g (f less concentrated) in the mass concentration order.
inline ConcentrationComparison concentration_compare(const GridFunction& f, const GridFunction& g,
                                                     double tol) {
  if (!(tol >= 0.0)) throw DomainError("comparison tolerance must be nonnegative");
  const double width = std::max(f.cell_width(), g.cell_width());
  if (std::abs(f.measure() - g.measure()) > width)
    throw GridMismatchError("concentration_compare: domains differ in measure");

  std::vector<double> radii = boundary_radii(f);
  const auto rg = boundary_radii(g);
  radii.insert(radii.end(), rg.begin(), rg.end());
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());

  const auto cf = concentration_function(f, radii);
  const auto cg = concentration_function(g, radii);
  ConcentrationComparison out;
  out.tolerance = tol;
  out.max_difference = -std::numeric_limits<double>::infinity();
  out.min_difference = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double d = cf.masses[i] - cg.masses[i];
    out.max_difference = std::max(out.max_difference, d);
    out.min_difference = std::min(out.min_difference, d);
  }
  const bool le = out.max_difference <= tol;
  const bool ge = out.min_difference >= -tol;
  if (le && ge) {
    out.relation = Concentration::equal;
    out.worst_violation = std::max(out.max_difference, -out.min_difference);
  } else if (le) {
    out.relation = Concentration::less_or_equal;
    out.worst_violation = out.max_difference;
  } else if (ge) {
    out.relation = Concentration::greater_or_equal;
    out.worst_violation = -out.min_difference;
  } else {
    out.relation = Concentration::incomparable;
    out.worst_violation = std::min(out.max_difference, -out.min_difference);
  }
  out.radii = std::move(radii);
  return out;
}

struct TruncationParams {
  double t = 0.0;
  double h = 1.0;
};

/// G_{t,h}(theta): theta clamped to [t, t+h], shifted to start at 0.
inline double truncation_g(const TruncationParams& tp, double theta) {
  if (theta > tp.t + tp.h) return tp.h;
  if (theta > tp.t) return theta - tp.t;
  return 0.0;
}

/// |x|^{q-1} x, finite at 0 for every q >= 0.
inline double signed_pow(double x, double q) {
  return std::copysign(std::pow(std::abs(x), q), x);
}

/// F(u,v) = u^p + v^p - |u-v|^{p-2}(u-v)(G(u) - G(v)); nonnegative and
/// supermodular for p >= 2.
inline double riesz_f(double p, const TruncationParams& tp, double u, double v) {
  if (!(u >= 0.0 && v >= 0.0)) throw DomainError("riesz_f takes nonnegative arguments");
  return std::pow(u, p) + std::pow(v, p) -
         signed_pow(u - v, p - 1.0) * (truncation_g(tp, u) - truncation_g(tp, v));
}

/// sum |f_i|^p h
inline double lp_sum(const GridFunction& f, double p) {
  double acc = 0.0;
  for (double v : f.values()) acc += std::pow(std::abs(v), p);
  return acc * f.cell_width();
}

/// ||f||_{L^q}; q = infinity gives the max norm.
inline double lp_norm(const GridFunction& f, double q) {
  if (std::isinf(q)) {
    double m = 0.0;
    for (double v : f.values()) m = std::max(m, std::abs(v));
    return m;
  }
  return std::pow(lp_sum(f, q), 1.0 / q);
}

/// Lorentz quasi-norm ||f||_{p,q} built on the running average of f*.
/// q may be +infinity.
inline double lorentz_norm(const GridFunction& f, double p, double q) {
  if (!(p > 1.0)) throw DomainError("Lorentz norm needs p > 1");
  if (!(q > 0.0)) throw DomainError("Lorentz norm needs q > 0");
  const GridFunction fs = decreasing_rearrangement(f);
  const double h = fs.cell_width();
  const std::size_t n = fs.n_cells();
  const double inv_p = 1.0 / p;

  if (std::isinf(q)) {
    // On cell k the running average is (A + v sigma)/sigma with A = prefix - v sigma_k,
    // so sigma^{1/p} * average peaks at sigma = (p-1) A / v when that is inside.
    double best = 0.0;
    double prefix = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double v = fs[k];
      const double s0 = static_cast<double>(k) * h;
      const double s1 = static_cast<double>(k + 1) * h;
      const double A = prefix - v * s0;
      auto value = [&](double sig) { return (A + v * sig) * std::pow(sig, inv_p - 1.0); };
      best = std::max(best, value(s1));
      if (v > 0.0 && A > 0.0) {
        const double sig = (p - 1.0) * A / v;
        if (sig > s0 && sig < s1) best = std::max(best, value(sig));
      }
      prefix += v * h;
    }
    return best;
  }

  // First cell: the average is constant, integrate sigma^{q/p-1} exactly.
  double total = std::pow(fs[0], q) * std::pow(h, q * inv_p) * p / q;
  // Later cells: the integrand is analytic with its nearest singularity at
  // sigma = 0, at least one cell width away, so 10 Gauss points suffice.
  using GL = boost::math::quadrature::gauss<double, 10>;
  double prefix = fs[0] * h;
  for (std::size_t k = 1; k < n; ++k) {
    const double v = fs[k];
    const double s0 = static_cast<double>(k) * h;
    auto integrand = [&](double sig) {
      const double avg = (prefix + v * (sig - s0)) / sig;
      return std::pow(avg, q) * std::pow(sig, q * inv_p - 1.0);
    };
    total += GL::integrate(integrand, s0, s0 + h);
    prefix += v * h;
  }
  return std::pow(total, 1.0 / q);
}

/// Integral mean U(r) = r^{-N} int_0^r u(rho) rho^{N-1} d rho of a radial
/// profile stored on [0, R) (cell averages, zero beyond R).
inline double integral_mean(const GridFunction& profile, int N, double r) {
  if (!(r > 0.0)) throw DomainError("integral mean needs r > 0");
  if (N < 1) throw DomainError("dimension N must be >= 1");
  if (profile.domain_left() != 0.0)
    throw DomainError("integral mean expects a radial profile starting at 0");
  const double dN = static_cast<double>(N);
  double acc = 0.0;
  for (std::size_t i = 0; i < profile.n_cells(); ++i) {
    const double a = profile.cell_left(i);
    if (a >= r) break;
    const double b = std::min(r, profile.cell_right(i));
    acc += profile[i] * (std::pow(b, dN) - std::pow(a, dN)) / dN;
  }
  return acc / std::pow(r, dN);
}

/// The radial profile [0, R) of a centered, even grid function.
inline GridFunction radial_half(const GridFunction& centered) {
  const std::size_t n = centered.n_cells();
  if (n % 2 != 0) throw DomainError("radial_half needs an even number of cells");
  std::vector<double> half(centered.values().begin() + static_cast<std::ptrdiff_t>(n / 2),
                           centered.values().end());
  return GridFunction(0.0, centered.domain_right(), std::move(half));
}

} // namespace fracsym::rearrange
