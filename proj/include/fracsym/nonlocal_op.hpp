#pragma once

// Discrete fractional p-Laplacian on an interval with zero exterior data.
//
// Collocation at cell centers with u piecewise constant:
//
//   A(u)_i = gamma [ sum_{j != i} w_{|i-j|} phi(u_i - u_j) + T_i phi(u_i) ],
//   phi(t) = |t|^{p-2} t,
//
// where w_k = int_{cell_j} |x_i - y|^{-(1+sp)} dy for |i-j| = k and
// T_i = int_{R \ Omega} |x_i - y|^{-(1+sp)} dy. The own-cell part of the
// principal value is dropped. All weights are positive, so A is monotone and
// (p-1)-homogeneous, and A = h^{-1} grad J for the discrete energy
//
//   J(u) = (gamma h / 2p) [ sum_{i,j} w_{|i-j|} |u_i-u_j|^p + 2 sum_i T_i |u_i|^p ]
//          - h sum_i f_i u_i.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "fracsym/error.hpp"
#include "fracsym/grid_function.hpp"
#include "fracsym/specialfn.hpp"

namespace fracsym::nonlocal {

struct ProblemSpec {
  int N = 1;
  double s = 0.5;
  double p = 2.0;
  GridFunction f;  ///< source term; its grid is the computational grid
  double m = 2.0;  ///< summability index of f

  /// Throws ConfigError naming the violated condition.
  void validate() const {
    if (N < 1) throw ConfigError("dimension N must be >= 1");
    if (!(s > 0.0 && s < 1.0)) throw ConfigError("s must lie in (0,1)");
    if (!(p >= 2.0))
      throw ConfigError("p must satisfy p >= 2 (only the degenerate case is supported)");
    const double sp = s * p;
    const double dN = static_cast<double>(N);
    const double eps = 1e-12;
    if (sp < dN - eps) {
      const double lower = p * dN / ((p - 1.0) * dN + sp);
      if (m < lower - eps) {
        std::ostringstream os;
        os << "summability index m=" << m << " violates m >= pN/((p-1)N+sp) = " << lower
           << " required when sp < N";
        throw ConfigError(os.str());
      }
    } else if (std::abs(sp - dN) <= eps) {
      if (!(m > 1.0)) throw ConfigError("summability index must satisfy m > 1 when sp = N");
    } else if (!(m >= 1.0)) {
      throw ConfigError("summability index must satisfy m >= 1 when sp > N");
    }
  }
};

/// Builds the source grid function from cell averages of fn on (left, right).
inline ProblemSpec make_problem(int N, double s, double p, double left, double right,
                                std::size_t n_cells, const std::function<double(double)>& fn,
                                double m = 2.0) {
  return ProblemSpec{N, s, p, GridFunction::cell_averages(left, right, n_cells, fn), m};
}

/// |t|^{p-2} t with fast paths for the common integer exponents.
inline double phi(double t, double p) {
  if (p == 2.0) return t;
  if (p == 3.0) return std::abs(t) * t;
  if (p == 4.0) return t * t * t;
  return std::copysign(std::pow(std::abs(t), p - 1.0), t);
}

/// |t|^{p-2}
inline double phi_slope(double t, double p) {
  if (p == 2.0) return 1.0;
  if (p == 3.0) return std::abs(t);
  if (p == 4.0) return t * t;
  return std::pow(std::abs(t), p - 2.0);
}

inline double abs_pow(double t, double p) {
  if (p == 2.0) return t * t;
  if (p == 3.0) return std::abs(t) * t * t;
  if (p == 4.0) return t * t * t * t;
  return std::pow(std::abs(t), p);
}

/// Geometry-only weights of the discrete operator; immutable after construction.
class DiscreteOperator {
public:
  DiscreteOperator(double left, double right, std::size_t n_cells, double s, double p)
      : left_(left), right_(right), n_(n_cells), s_(s), p_(p) {
    if (n_cells < 8) throw ConfigError("the discrete operator needs at least 8 cells");
    if (!(left < right)) throw ConfigError("domain requires left < right");
    h_ = (right - left) / static_cast<double>(n_cells);
    const double sp = s * p;
    gamma_ = specialfn::gamma_norm_const(1, s, p);

    // w_k = int_{(k-1/2)h}^{(k+1/2)h} z^{-(1+sp)} dz, written with expm1 to
    // avoid cancellation at large k.
    weights_.assign(n_, 0.0);
    for (std::size_t k = 1; k < n_; ++k) {
      const double dk = static_cast<double>(k);
      const double d = dk * h_;
      const double lo = std::expm1(-sp * std::log1p(-0.5 / dk));
      const double hi = std::expm1(-sp * std::log1p(0.5 / dk));
      weights_[k] = std::pow(d, -sp) * (lo - hi) / sp;
    }
    tail_.resize(n_);
    row_sum_.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const double x = center(i);
      tail_[i] = (std::pow(x - left_, -sp) + std::pow(right_ - x, -sp)) / sp;
      double acc = 0.0;
      for (std::size_t j = 0; j < n_; ++j)
        if (j != i) acc += weight(i, j);
      row_sum_[i] = acc;
    }
  }

  double domain_left() const noexcept { return left_; }
  double domain_right() const noexcept { return right_; }
  std::size_t n_cells() const noexcept { return n_; }
  double cell_width() const noexcept { return h_; }
  double s() const noexcept { return s_; }
  double p() const noexcept { return p_; }
  double gamma() const noexcept { return gamma_; }
  double center(std::size_t i) const noexcept {
    return left_ + (static_cast<double>(i) + 0.5) * h_;
  }

  /// w_ij; zero on the diagonal.
  double weight(std::size_t i, std::size_t j) const noexcept {
    return weights_[i > j ? i - j : j - i];
  }
  double tail(std::size_t i) const noexcept { return tail_[i]; }
  /// sum_{j != i} w_ij
  double row_sum(std::size_t i) const noexcept { return row_sum_[i]; }

  GridFunction zero() const { return GridFunction(left_, right_, n_); }

  bool matches(const GridFunction& g) const noexcept {
    return g.same_grid(GridFunction(left_, right_, n_));
  }

private:
  double left_, right_;
  std::size_t n_;
  double s_, p_;
  double h_ = 0.0;
  double gamma_ = 0.0;
  std::vector<double> weights_;
  std::vector<double> tail_;
  std::vector<double> row_sum_;
};

inline DiscreteOperator build_operator(const ProblemSpec& spec) {
  if (spec.N != 1) throw ConfigError("the nonlocal solver supports N = 1 only");
  return DiscreteOperator(spec.f.domain_left(), spec.f.domain_right(), spec.f.n_cells(), spec.s,
                          spec.p);
}

/// A(u), the discrete (-Delta_p)^s u at the cell centers.
inline GridFunction apply(const DiscreteOperator& op, const GridFunction& u) {
  if (!op.matches(u)) throw GridMismatchError("apply: u is not on the operator grid");
  const std::size_t n = op.n_cells();
  const double p = op.p();
  GridFunction out = op.zero();
  const auto uv = u.values();
  auto ov = out.values();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) acc += op.weight(i, j) * phi(uv[i] - uv[j], p);
    acc += op.tail(i) * phi(uv[i], p);
    ov[i] = op.gamma() * acc;
  }
  return out;
}

inline double energy(const DiscreteOperator& op, const GridFunction& f, const GridFunction& u) {
  if (!op.matches(u) || !op.matches(f)) throw GridMismatchError("energy: grid mismatch");
  const std::size_t n = op.n_cells();
  const double p = op.p();
  const auto uv = u.values();
  double pair = 0.0;
  double tail = 0.0;
  double source = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) row += op.weight(i, j) * abs_pow(uv[i] - uv[j], p);
    pair += 2.0 * row;  // ordered pairs
    tail += op.tail(i) * abs_pow(uv[i], p);
    source += f[i] * uv[i];
  }
  const double h = op.cell_width();
  return op.gamma() * h / (2.0 * p) * (pair + 2.0 * tail) - h * source;
}

/// grad J(u) = h (A(u) - f)
inline GridFunction energy_gradient(const DiscreteOperator& op, const GridFunction& f,
                                    const GridFunction& u) {
  if (!op.matches(f)) throw GridMismatchError("energy_gradient: f is not on the operator grid");
  GridFunction g = apply(op, u);
  const double h = op.cell_width();
  for (std::size_t i = 0; i < g.n_cells(); ++i) g[i] = h * (g[i] - f[i]);
  return g;
}

/// max_i h |A(u)_i - f_i|
inline double weak_residual(const DiscreteOperator& op, const GridFunction& f,
                            const GridFunction& u) {
  const GridFunction g = energy_gradient(op, f, u);
  double worst = 0.0;
  for (double v : g.values()) worst = std::max(worst, std::abs(v));
  return worst;
}

/// Jacobian of A at u (dense, symmetric, positive semidefinite).
inline Eigen::MatrixXd jacobian(const DiscreteOperator& op, const GridFunction& u) {
  const std::size_t n = op.n_cells();
  const double p = op.p();
  const double scale = op.gamma() * (p - 1.0);
  const auto uv = u.values();
  Eigen::MatrixXd jac(n, n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    double diag = op.tail(i) * phi_slope(uv[i], p);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double w = op.weight(i, j) * phi_slope(uv[i] - uv[j], p);
      jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = -scale * w;
      diag += w;
    }
    jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = scale * diag;
  }
  return jac;
}

/// Matrix of the p = 2 structure: gamma [diag(row_sum + T) - W].
inline Eigen::MatrixXd linear_matrix(const DiscreteOperator& op) {
  const std::size_t n = op.n_cells();
  Eigen::MatrixXd mat(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      mat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          i == j ? op.gamma() * (op.row_sum(i) + op.tail(i)) : -op.gamma() * op.weight(i, j);
  return mat;
}

enum class SolverMethod { newton, barzilai_borwein };

struct SolverConfig {
  double grad_tol = 1e-8;
  std::size_t max_iters = 50000;
  double line_search_shrink = 0.5;
  double initial_step = 1.0;
  double armijo_c = 1e-4;
  SolverMethod method = SolverMethod::newton;
};

struct SolveResult {
  GridFunction u;
  std::size_t iterations = 0;
  double rel_grad_norm = 0.0;  ///< ||grad J|| / max(h ||f||, eps)
  double weak_residual = 0.0;
  double energy = 0.0;
};

namespace detail {

inline double l2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

inline double gradient_scale(const DiscreteOperator& op, const GridFunction& f) {
  return std::max(op.cell_width() * l2(f.values()), std::numeric_limits<double>::epsilon());
}

inline GridFunction solve_dense(const DiscreteOperator& op, const Eigen::MatrixXd& mat,
                                const GridFunction& rhs) {
  Eigen::LLT<Eigen::MatrixXd> llt(mat);
  if (llt.info() != Eigen::Success)
    throw ConvergenceError("Cholesky factorization of the linear operator failed");
  Eigen::Map<const Eigen::VectorXd> b(rhs.values().data(),
                                      static_cast<Eigen::Index>(rhs.n_cells()));
  const Eigen::VectorXd x = llt.solve(b);
  GridFunction out = op.zero();
  for (std::size_t i = 0; i < out.n_cells(); ++i) out[i] = x(static_cast<Eigen::Index>(i));
  return out;
}

inline SolveResult finish(const DiscreteOperator& op, const GridFunction& f, GridFunction u,
                          std::size_t iters) {
  SolveResult res;
  const GridFunction g = energy_gradient(op, f, u);
  res.rel_grad_norm = l2(g.values()) / gradient_scale(op, f);
  double worst = 0.0;
  for (double v : g.values()) worst = std::max(worst, std::abs(v));
  res.weak_residual = worst;
  res.energy = energy(op, f, u);
  res.iterations = iters;
  res.u = std::move(u);
  return res;
}

// Minimizer of J along the ray {c v : c >= 0}.
inline GridFunction scaled_ray_minimizer(const DiscreteOperator& op, const GridFunction& f,
                                         GridFunction v) {
  const double h = op.cell_width();
  double lin = 0.0;
  for (std::size_t i = 0; i < v.n_cells(); ++i) lin += h * f[i] * v[i];
  // J(v) = S/p - lin  =>  S = p (J(v) + lin)
  const double S = op.p() * (energy(op, f, v) + lin);
  if (!(lin > 0.0) || !(S > 0.0)) return op.zero();
  return std::pow(lin / S, 1.0 / (op.p() - 1.0)) * std::move(v);
}

inline SolveResult solve_newton(const DiscreteOperator& op, const GridFunction& f,
                                const SolverConfig& cfg) {
  const std::size_t n = op.n_cells();
  const double scale = gradient_scale(op, f);
  GridFunction u = scaled_ray_minimizer(op, f, solve_dense(op, linear_matrix(op), f));
  double current = energy(op, f, u);
  double rel = 0.0;
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const GridFunction grad = energy_gradient(op, f, u);
    rel = l2(grad.values()) / scale;
    if (rel <= cfg.grad_tol) return finish(op, f, std::move(u), it);

    Eigen::MatrixXd jac = jacobian(op, u);
    const double diag_max = jac.diagonal().cwiseAbs().maxCoeff();
    Eigen::Map<const Eigen::VectorXd> g(grad.values().data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd dir;
    double shift = 0.0;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::MatrixXd shifted = jac;
      shifted.diagonal().array() += shift;
      Eigen::LLT<Eigen::MatrixXd> llt(shifted);
      if (llt.info() == Eigen::Success) {
        // Jacobian of A is h^{-1} times the Hessian of J.
        dir = -llt.solve(g) / op.cell_width();
        if (dir.allFinite()) break;
      }
      shift = shift == 0.0 ? 1e-12 * std::max(diag_max, 1.0) : shift * 10.0;
      dir.resize(0);
    }
    double slope = dir.size() > 0 ? g.dot(dir) : 0.0;
    if (!(slope < 0.0)) {
      dir = -g;
      slope = -g.squaredNorm();
    }

    // Once the predicted decrease drops to the round-off level of J, the
    // energy can no longer rank trial points and the residual norm takes over.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                         (std::abs(current) + op.cell_width() * l2(f.values()) * l2(u.values()));
    const bool by_residual = -slope <= noise;
    double t = 1.0;
    GridFunction trial = u;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = u[i] + t * dir(static_cast<Eigen::Index>(i));
      if (by_residual) {
        if (l2(energy_gradient(op, f, trial).values()) / scale < rel) {
          accepted = true;
          break;
        }
      } else if (energy(op, f, trial) <= current + cfg.armijo_c * t * slope) {
        accepted = true;
        break;
      }
      t *= cfg.line_search_shrink;
    }
    if (!accepted) {
      std::ostringstream os;
      os << "Newton iteration stagnated at relative gradient norm " << rel;
      throw ConvergenceError(os.str(), rel);
    }
    current = energy(op, f, trial);
    u = std::move(trial);
  }
  std::ostringstream os;
  os << "Newton iteration reached max_iters=" << cfg.max_iters
     << " with relative gradient norm " << rel;
  throw ConvergenceError(os.str(), rel);
}

inline SolveResult solve_bb(const DiscreteOperator& op, const GridFunction& f,
                            const SolverConfig& cfg) {
  const std::size_t n = op.n_cells();
  const double scale = gradient_scale(op, f);
  GridFunction u = op.zero();
  GridFunction grad = energy_gradient(op, f, u);
  double current = energy(op, f, u);
  double step = cfg.initial_step;
  GridFunction prev_u = u;
  GridFunction prev_grad = grad;
  double rel = 0.0;
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    rel = l2(grad.values()) / scale;
    if (rel <= cfg.grad_tol) return finish(op, f, std::move(u), it);
    if (it > 0) {
      double ss = 0.0;
      double sy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double ds = u[i] - prev_u[i];
        const double dy = grad[i] - prev_grad[i];
        ss += ds * ds;
        sy += ds * dy;
      }
      if (sy > 0.0) step = ss / sy;
    }
    const double gnorm2 = l2(grad.values()) * l2(grad.values());
    // Below the round-off level of J the Armijo test is meaningless; take the
    // plain BB step there, as in nonmonotone BB near a minimum.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                         (std::abs(current) + op.cell_width() * l2(f.values()) * l2(u.values()));
    GridFunction trial = u;
    double t = step;
    bool accepted = false;
    for (int k = 0; k < 80; ++k) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = u[i] - t * grad[i];
      const double e = energy(op, f, trial);
      if (t * gnorm2 <= noise ? std::isfinite(e) : e <= current - cfg.armijo_c * t * gnorm2) {
        current = e;
        accepted = true;
        break;
      }
      t *= cfg.line_search_shrink;
    }
    if (!accepted) {
      std::ostringstream os;
      os << "gradient descent line search failed at relative gradient norm " << rel;
      throw ConvergenceError(os.str(), rel);
    }
    prev_u = std::move(u);
    prev_grad = std::move(grad);
    u = std::move(trial);
    grad = energy_gradient(op, f, u);
  }
  std::ostringstream os;
  os << "gradient descent reached max_iters=" << cfg.max_iters << " with relative gradient norm "
     << rel;
  throw ConvergenceError(os.str(), rel);
}

} // namespace detail

/// Direct solve of the p = 2 problem on a prebuilt operator.
inline SolveResult solve_linear(const DiscreteOperator& op, const GridFunction& f) {
  if (op.p() != 2.0) throw ConfigError("solve_linear requires p = 2");
  if (!op.matches(f)) throw GridMismatchError("solve_linear: f is not on the operator grid");
  return detail::finish(op, f, detail::solve_dense(op, linear_matrix(op), f), 1);
}

inline SolveResult solve_linear(const ProblemSpec& spec) {
  if (spec.p != 2.0) throw ConfigError("solve_linear requires p = 2");
  spec.validate();
  return solve_linear(build_operator(spec), spec.f);
}

/// Minimizes the discrete energy J. Throws ConvergenceError when the relative
/// gradient norm stays above cfg.grad_tol.
inline SolveResult solve_nonlinear(const ProblemSpec& spec, const SolverConfig& cfg = {}) {
  spec.validate();
  const DiscreteOperator op = build_operator(spec);
  bool zero_source = true;
  for (double v : spec.f.values()) zero_source = zero_source && v == 0.0;
  if (zero_source) return detail::finish(op, spec.f, op.zero(), 0);
  if (spec.p == 2.0) return solve_linear(op, spec.f);
  return cfg.method == SolverMethod::newton ? detail::solve_newton(op, spec.f, cfg)
                                            : detail::solve_bb(op, spec.f, cfg);
}

} // namespace fracsym::nonlocal
