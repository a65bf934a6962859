#pragma once

// The symmetrized linear problem and the comparison u# < v in concentration.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "fracsym/error.hpp"
#include "fracsym/grid_function.hpp"
#include "fracsym/nonlocal_op.hpp"
#include "fracsym/rearrange.hpp"
#include "fracsym/specialfn.hpp"

namespace fracsym::symmetrize {

/// H(N,s,p) = gamma(N,s,2)/(N omega_N) * P_s(B_1)^{(p-2)/(p-1)} / gamma(N,s,p)^{1/(p-1)}
inline double h_const(int N, double s, double p, const specialfn::QuadratureOptions& opt = {}) {
  if (!(p >= 2.0)) throw DomainError("h_const requires p >= 2");
  const double area = specialfn::unit_sphere_area(N);
  // gamma(N,s,2) cancels at p = 2
  if (p == 2.0) return 1.0 / area;
  const double base = specialfn::gamma_norm_const(N, s, 2.0) / area;
  const double per = specialfn::frac_perimeter(N, s, 1.0, opt);
  return base * std::pow(per, (p - 2.0) / (p - 1.0)) /
         std::pow(specialfn::gamma_norm_const(N, s, p), 1.0 / (p - 1.0));
}

/// Exponent (N-s)(p-2)/(p-1) of r in the datum.
inline double datum_exponent(int N, double s, double p) {
  return (static_cast<double>(N) - s) * (p - 2.0) / (p - 1.0);
}

/// Pointwise datum g(r) given the running mass M(r) = int_{B_r} f# and f#(r).
/// Zero mass gives zero.
inline double g_pointwise(int N, double s, double p, double H, double r, double mass,
                          double fsharp) {
  if (!(r > 0.0)) throw DomainError("g_pointwise needs r > 0");
  if (mass <= 0.0) return 0.0;
  const double e = datum_exponent(N, s, p);
  const double q = 1.0 / (p - 1.0);
  const double dN = static_cast<double>(N);
  return H * std::pow(r, e) *
         (e * std::pow(r, -dN) * std::pow(mass, q) +
          specialfn::unit_sphere_area(N) * q * std::pow(mass, (2.0 - p) * q) * fsharp);
}

struct SymmetrizedDatum {
  GridFunction g;
  double H = 0.0;
  double perimeter = 0.0;            ///< P_s(B_1); zero when p = 2 (not needed)
  bool zero_mass_triggered = false;  ///< some cell fell under the zero-mass convention
};

/// Cell averages of g on the centered grid of f#. Uses the exact primitive
///   int_{B_r} g = N omega_N H r^e M(r)^{1/(p-1)},
/// so the mass of g is preserved near the possible singularity at r = 0.
inline SymmetrizedDatum build_g(const GridFunction& f_sharp, int N, double s, double p,
                                const specialfn::QuadratureOptions& opt = {}) {
  if (N != 1) throw ConfigError("build_g supports N = 1 only");
  const double R = f_sharp.domain_right();
  if (std::abs(f_sharp.domain_left() + R) > 1e-12 * std::max(1.0, R))
    throw DomainError("build_g expects a profile on a centered interval");
  for (double v : f_sharp.values())
    if (v < 0.0) throw DomainError("build_g expects a nonnegative rearranged profile");

  SymmetrizedDatum out;
  out.H = h_const(N, s, p, opt);
  if (p == 2.0) {
    out.g = f_sharp;
    return out;
  }
  out.perimeter = specialfn::frac_perimeter(N, s, 1.0, opt);
  const double e = datum_exponent(N, s, p);
  const double q = 1.0 / (p - 1.0);
  // Half of int_{B_r} g, i.e. int_0^r g.
  auto primitive = [&](double r) {
    if (r <= 0.0) return 0.0;
    const double mass = f_sharp.integral_over(-r, r);
    return mass > 0.0 ? out.H * std::pow(r, e) * std::pow(mass, q) : 0.0;
  };
  out.g = GridFunction(f_sharp.domain_left(), R, f_sharp.n_cells());
  const double h = f_sharp.cell_width();
  for (std::size_t i = 0; i < f_sharp.n_cells(); ++i) {
    const double a = f_sharp.cell_left(i);
    const double b = f_sharp.cell_right(i);
    double value = 0.0;
    if (a < 0.0 && b > 0.0) {
      value = (primitive(-a) + primitive(b)) / h;
    } else {
      const double lo = std::min(std::abs(a), std::abs(b));
      const double hi = std::max(std::abs(a), std::abs(b));
      value = (primitive(hi) - primitive(lo)) / h;
    }
    if (f_sharp.integral_over(-std::max(std::abs(a), std::abs(b)),
                              std::max(std::abs(a), std::abs(b))) <= 0.0)
      out.zero_mass_triggered = true;
    out.g[i] = value;
  }
  return out;
}

namespace detail {

// Cells of a centered grid whose centers lie in B_r.
inline bool inside(const GridFunction& f, std::size_t i, double r) {
  return std::abs(f.center(i)) < r;
}

} // namespace detail

/// gamma int_{B_r} int_{B_r^c} |u#(x)-u#(y)|^{p-1} / |x-y|^{1+sp} with the
/// operator's cell weights; u_sharp lives on the operator grid.
inline double key_lhs(const nonlocal::DiscreteOperator& op, const GridFunction& u_sharp, double r) {
  const double p = op.p();
  const double h = op.cell_width();
  double acc = 0.0;
  for (std::size_t i = 0; i < u_sharp.n_cells(); ++i) {
    if (!detail::inside(u_sharp, i, r)) continue;
    double row = op.tail(i) * std::pow(std::abs(u_sharp[i]), p - 1.0);
    for (std::size_t j = 0; j < u_sharp.n_cells(); ++j)
      if (!detail::inside(u_sharp, j, r))
        row += op.weight(i, j) * std::pow(std::abs(u_sharp[i] - u_sharp[j]), p - 1.0);
    acc += h * row;
  }
  return op.gamma() * acc;
}

/// Per-radius slack int_{B_r} f# - LHS of the key inequality. u and f are
/// on the same grid; both are rearranged internally.
inline std::vector<double> key_inequality_check(const GridFunction& u, const GridFunction& f,
                                                double s, double p,
                                                std::span<const double> radii) {
  require_same_grid(u, f, "key_inequality_check");
  const GridFunction u_sharp = rearrange::schwarz_profile(u);
  const GridFunction f_sharp = rearrange::schwarz_profile(f);
  const nonlocal::DiscreteOperator op(u_sharp.domain_left(), u_sharp.domain_right(),
                                      u_sharp.n_cells(), s, p);
  const auto rhs = rearrange::concentration_function(f_sharp, radii);
  std::vector<double> slack(radii.size());
  for (std::size_t k = 0; k < radii.size(); ++k)
    slack[k] = radii[k] == 0.0 ? 0.0 : rhs.masses[k] - key_lhs(op, u_sharp, radii[k]);
  return slack;
}

struct HolderTerms {
  double lhs = 0.0;          ///< int int |du| / |x-y|^{1+2s}
  double power_term = 0.0;   ///< int int |du|^{p-1} / |x-y|^{1+sp}
  double perimeter = 0.0;    ///< int int 1 / |x-y|^{1+s}, same quadrature
};

// Midpoint in both variables inside the domain, exact in y outside it. The
// three kernels then factor pointwise, so the discrete Holder inequality is
// exact, and by convexity the discrete perimeter never exceeds the true one.
inline HolderTerms holder_terms(const GridFunction& u_sharp, double s, double p, double r) {
  const double h = u_sharp.cell_width();
  const double L = u_sharp.domain_left();
  const double R = u_sharp.domain_right();
  auto exterior = [&](double x, double a) {
    return (std::pow(x - L, 1.0 - a) + std::pow(R - x, 1.0 - a)) / (a - 1.0);
  };
  HolderTerms t;
  for (std::size_t i = 0; i < u_sharp.n_cells(); ++i) {
    if (!detail::inside(u_sharp, i, r)) continue;
    const double x = u_sharp.center(i);
    const double ui = std::abs(u_sharp[i]);
    t.lhs += h * ui * exterior(x, 1.0 + 2.0 * s);
    t.power_term += h * std::pow(ui, p - 1.0) * exterior(x, 1.0 + s * p);
    t.perimeter += h * exterior(x, 1.0 + s);
    for (std::size_t j = 0; j < u_sharp.n_cells(); ++j) {
      if (detail::inside(u_sharp, j, r)) continue;
      const double d = std::abs(x - u_sharp.center(j));
      const double du = std::abs(u_sharp[i] - u_sharp[j]);
      t.lhs += h * h * du * std::pow(d, -1.0 - 2.0 * s);
      t.power_term += h * h * std::pow(du, p - 1.0) * std::pow(d, -1.0 - s * p);
      t.perimeter += h * h * std::pow(d, -1.0 - s);
    }
  }
  return t;
}

/// Per-radius slack of the Holder step: r^{(1-s)(p-2)/(p-1)} P_s(B_1)^{(p-2)/(p-1)}
/// (power term)^{1/(p-1)} - lhs. Nonnegative up to round-off.
inline std::vector<double> holder_check(const GridFunction& u, double s, double p,
                                        std::span<const double> radii,
                                        const specialfn::QuadratureOptions& opt = {}) {
  const GridFunction u_sharp = rearrange::schwarz_profile(u);
  const double per = specialfn::frac_perimeter(1, s, 1.0, opt);
  const double e = datum_exponent(1, s, p);
  std::vector<double> slack(radii.size(), 0.0);
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (radii[k] <= 0.0) continue;
    const HolderTerms t = holder_terms(u_sharp, s, p, radii[k]);
    const double bound = std::pow(radii[k], e) * std::pow(per, (p - 2.0) / (p - 1.0)) *
                         std::pow(t.power_term, 1.0 / (p - 1.0));
    slack[k] = bound - t.lhs;
  }
  return slack;
}

struct SolveDiagnostics {
  std::size_t iterations = 0;
  double rel_grad_norm = 0.0;
  double weak_residual = 0.0;
};

inline SolveDiagnostics diagnostics_of(const nonlocal::SolveResult& r) {
  return {r.iterations, r.rel_grad_norm, r.weak_residual};
}

struct ComparisonReport {
  std::vector<double> radii;
  std::vector<double> conc_u_sharp;
  std::vector<double> conc_v;
  double worst_violation = 0.0;  ///< max_r conc_u_sharp - conc_v
  double tolerance_used = 0.0;
  SolveDiagnostics u_solve;
  SolveDiagnostics v_solve;
  double H = 0.0;
  bool zero_mass_triggered = false;

  bool passed() const noexcept { return worst_violation <= tolerance_used; }
};

/// Fills radii, curves and worst_violation for conc(a) <= conc(b).
inline void fill_curves(ComparisonReport& rep, const GridFunction& a, const GridFunction& b) {
  if (std::abs(a.measure() - b.measure()) > std::min(a.cell_width(), b.cell_width()))
    throw GridMismatchError("comparison needs domains of equal measure");
  rep.radii = rearrange::boundary_radii(a);
  rep.conc_u_sharp = rearrange::concentration_function(a, rep.radii).masses;
  rep.conc_v = rearrange::concentration_function(b, rep.radii).masses;
  rep.worst_violation = 0.0;
  for (std::size_t k = 0; k < rep.radii.size(); ++k)
    rep.worst_violation = std::max(rep.worst_violation, rep.conc_u_sharp[k] - rep.conc_v[k]);
}

/// h^{min(1,2s)} ||f||_1^{1/(p-1)}
inline double default_tolerance(const GridFunction& f, double s, double p) {
  double l1 = 0.0;
  for (double v : f.values()) l1 += std::abs(v);
  l1 *= f.cell_width();
  return std::pow(f.cell_width(), std::min(1.0, 2.0 * s)) * std::pow(l1, 1.0 / (p - 1.0));
}

struct VerifyOptions {
  double tolerance = -1.0;  ///< negative selects default_tolerance
  bool flip_g_sign = false; ///< test hook: negates the symmetrized datum
  specialfn::QuadratureOptions quadrature{};
};

struct VerifyArtifacts {
  GridFunction u, u_sharp, f_sharp, g, v;
};

/// Solves for u, symmetrizes, solves the linear problem for v with datum g on
/// Omega#, and compares the concentration curves of u# and v.
inline ComparisonReport verify_theorem(const nonlocal::ProblemSpec& spec,
                                       const nonlocal::SolverConfig& cfg = {},
                                       const VerifyOptions& vo = {},
                                       VerifyArtifacts* artifacts = nullptr) {
  if (spec.N != 1) throw ConfigError("verify_theorem supports N = 1 only");
  const auto u_res = nonlocal::solve_nonlinear(spec, cfg);
  const GridFunction u_sharp = rearrange::schwarz_profile(u_res.u);
  const GridFunction f_sharp = rearrange::schwarz_profile(spec.f);
  SymmetrizedDatum datum = build_g(f_sharp, spec.N, spec.s, spec.p, vo.quadrature);
  if (vo.flip_g_sign) datum.g *= -1.0;

  const nonlocal::DiscreteOperator op2(f_sharp.domain_left(), f_sharp.domain_right(),
                                       f_sharp.n_cells(), spec.s, 2.0);
  const auto v_res = nonlocal::solve_linear(op2, datum.g);

  ComparisonReport rep;
  fill_curves(rep, u_sharp, v_res.u);
  rep.tolerance_used = vo.tolerance >= 0.0 ? vo.tolerance : default_tolerance(spec.f, spec.s, spec.p);
  rep.u_solve = diagnostics_of(u_res);
  rep.v_solve = diagnostics_of(v_res);
  rep.H = datum.H;
  rep.zero_mass_triggered = datum.zero_mass_triggered;
  if (artifacts) *artifacts = {u_res.u, u_sharp, f_sharp, datum.g, v_res.u};
  return rep;
}

/// Concentration of (u#)^{p-1} against v_nl^{p-1}. Reported, never asserted.
inline ComparisonReport power_comparison(const GridFunction& u, const GridFunction& v_nl, double p,
                                         double tolerance = 0.0) {
  auto power = [p](GridFunction g) {
    for (double& x : g.values()) x = std::pow(std::abs(x), p - 1.0);
    return g;
  };
  ComparisonReport rep;
  fill_curves(rep, power(rearrange::schwarz_profile(u)), power(v_nl));
  rep.tolerance_used = tolerance;
  return rep;
}

// CSV: header r,conc_u_sharp,conc_v,slack then one row per radius, closed by
// a '#' summary line.
inline void write_report_csv(std::ostream& os, const ComparisonReport& rep) {
  os << "r,conc_u_sharp,conc_v,slack\n";
  char buf[128];
  for (std::size_t k = 0; k < rep.radii.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", rep.radii[k], rep.conc_u_sharp[k],
                  rep.conc_v[k], rep.conc_v[k] - rep.conc_u_sharp[k]);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "# worst_violation=%.17g tolerance=%.17g status=%s\n",
                rep.worst_violation, rep.tolerance_used, rep.passed() ? "pass" : "fail");
  os << buf;
}

} // namespace fracsym::symmetrize
