#include <cmath>
#include <random>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <gtest/gtest.h>

#include "fracsym/nonlocal_op.hpp"

using namespace fracsym;
using namespace fracsym::nonlocal;

namespace {

GridFunction random_u(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  GridFunction g(-1.0, 1.0, n);
  for (auto& v : g.values()) v = u(rng);
  return g;
}

double dot(const GridFunction& a, const GridFunction& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.n_cells(); ++i) acc += a[i] * b[i];
  return acc;
}

const auto abs_x = [](double x) { return std::abs(x); };
const auto one = [](double) { return 1.0; };

// Interior sup error of the p = 2, s = 1/2 solution against sqrt(1 - x^2).
double half_laplacian_error(std::size_t n) {
  const auto res = solve_linear(make_problem(1, 0.5, 2.0, -1.0, 1.0, n, one));
  double err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = res.u.center(i);
    if (std::abs(x) <= 0.9) err = std::max(err, std::abs(res.u[i] - std::sqrt(1.0 - x * x)));
  }
  return err;
}

} // namespace

TEST(ProblemSpec, SummabilityBounds) {
  const GridFunction f(-1, 1, 8, 1.0);
  EXPECT_NO_THROW((ProblemSpec{1, 0.5, 3.0, f, 1.0}.validate()));  // sp > N
  EXPECT_THROW((ProblemSpec{1, 0.5, 3.0, f, 0.5}.validate()), ConfigError);
  EXPECT_THROW((ProblemSpec{1, 0.5, 2.0, f, 1.0}.validate()), ConfigError);  // sp = N needs m > 1
  // sp < N: m >= pN/((p-1)N+sp) = 3/2.75
  EXPECT_THROW((ProblemSpec{1, 0.25, 3.0, f, 1.05}.validate()), ConfigError);
  EXPECT_NO_THROW((ProblemSpec{1, 0.25, 3.0, f, 1.1}.validate()));
  EXPECT_THROW((ProblemSpec{1, 1.2, 3.0, f, 2.0}.validate()), ConfigError);
  EXPECT_THROW((ProblemSpec{1, 0.5, 1.5, f, 2.0}.validate()), ConfigError);
}

TEST(Operator, WeightsSymmetricPositiveAndGeometric) {
  const DiscreteOperator op(-1.0, 1.0, 64, 0.4, 3.0);
  for (std::size_t i = 0; i < 64; ++i) {
    EXPECT_EQ(op.weight(i, i), 0.0);
    EXPECT_GT(op.tail(i), 0.0);
    for (std::size_t j = 0; j < 64; ++j) {
      EXPECT_EQ(op.weight(i, j), op.weight(j, i));
      if (i != j) EXPECT_GT(op.weight(i, j), 0.0);
    }
  }
  EXPECT_THROW(DiscreteOperator(-1.0, 1.0, 7, 0.5, 2.0), ConfigError);
}

TEST(Operator, WeightsAreExactCellIntegrals) {
  const double s = 0.3, p = 2.5, sp = s * p;
  const DiscreteOperator op(-1.0, 1.0, 40, s, p);
  boost::math::quadrature::tanh_sinh<double> ts;
  for (std::size_t j : {1u, 2u, 7u, 39u}) {
    const double xi = op.center(0);
    const double a = -1.0 + j * op.cell_width(), b = a + op.cell_width();
    const double oracle = ts.integrate([&](double y) { return std::pow(y - xi, -1.0 - sp); }, a, b);
    EXPECT_NEAR(op.weight(0, j), oracle, 1e-11 * oracle) << j;
  }
}

TEST(Operator, TailClosedForm) {
  // s = 1/2, p = 2, x = 0 on (-1,1): int_{|y|>1} |y|^{-2} dy = 2
  const DiscreteOperator op(-1.0, 1.0, 65, 0.5, 2.0);
  EXPECT_NEAR(op.tail(32), 2.0, 1e-14);
  // fixed physical point under refinement
  const DiscreteOperator a(-1.0, 1.0, 10, 0.7, 3.0), b(-1.0, 1.0, 30, 0.7, 3.0);
  EXPECT_NEAR(a.tail(2), b.tail(7), 1e-12);  // both at x = -0.5
}

TEST(Apply, ZeroAndHomogeneity) {
  std::mt19937_64 rng(1);
  const DiscreteOperator op(-1.0, 1.0, 48, 0.5, 3.0);
  const GridFunction az = apply(op, op.zero());
  for (double v : az.values()) EXPECT_EQ(v, 0.0);
  for (double p : {2.0, 2.5, 3.0, 4.0}) {
    const DiscreteOperator opp(-1.0, 1.0, 48, 0.5, p);
    const GridFunction u = random_u(rng, 48);
    const GridFunction a = apply(opp, u), b = apply(opp, 2.0 * u);
    for (std::size_t i = 0; i < 48; ++i)
      EXPECT_NEAR(b[i], std::pow(2.0, p - 1.0) * a[i], 1e-12 * (1.0 + std::abs(b[i])));
  }
}

TEST(Apply, HalfLaplacianOfSemicircle) {
  // (-Delta)^{1/2} (1-x^2)_+^{1/2} = 1 on (-1,1)
  double prev = INFINITY;
  for (std::size_t n : {128u, 256u, 512u, 1024u}) {
    const DiscreteOperator op(-1.0, 1.0, n, 0.5, 2.0);
    const auto u = GridFunction::cell_averages(-1, 1, n, [](double x) { return std::sqrt(std::max(0.0, 1 - x * x)); });
    const GridFunction a = apply(op, u);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (std::abs(op.center(i)) <= 0.5) err = std::max(err, std::abs(a[i] - 1.0));
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 2e-2);
}

TEST(Apply, Monotone) {
  std::mt19937_64 rng(2);
  for (double p : {2.0, 3.0, 4.0}) {
    const DiscreteOperator op(-1.0, 1.0, 40, 0.6, p);
    for (int k = 0; k < 100; ++k) {
      const GridFunction u = random_u(rng, 40), w = random_u(rng, 40);
      GridFunction d = u;
      const GridFunction au = apply(op, u), aw = apply(op, w);
      GridFunction da = au;
      for (std::size_t i = 0; i < 40; ++i) {
        d[i] = u[i] - w[i];
        da[i] = au[i] - aw[i];
      }
      EXPECT_GE(dot(da, d), -1e-12);
    }
  }
}

TEST(Energy, ZeroHomogeneityAndConvexity) {
  std::mt19937_64 rng(3);
  const DiscreteOperator op(-1.0, 1.0, 32, 0.5, 3.0);
  const GridFunction f = random_u(rng, 32);
  EXPECT_EQ(energy(op, f, op.zero()), 0.0);

  const GridFunction u = random_u(rng, 32);
  const GridFunction zero_f(-1, 1, 32);
  const double e1 = energy(op, zero_f, u);
  EXPECT_NEAR(energy(op, zero_f, 1.7 * u), std::pow(1.7, 3.0) * e1, 1e-12 * e1);

  std::uniform_real_distribution<double> ut(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const GridFunction a = random_u(rng, 32), b = random_u(rng, 32);
    const double t = ut(rng);
    GridFunction mix = a;
    for (std::size_t i = 0; i < 32; ++i) mix[i] = t * a[i] + (1 - t) * b[i];
    EXPECT_LE(energy(op, f, mix), t * energy(op, f, a) + (1 - t) * energy(op, f, b) + 1e-10);
  }
}

TEST(Energy, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> ui(0, 63);
  for (double p : {2.0, 3.0, 3.5}) {
    const DiscreteOperator op(-1.0, 1.0, 64, 0.45, p);
    const GridFunction f = random_u(rng, 64), u = random_u(rng, 64);
    const GridFunction g = energy_gradient(op, f, u);
    const double eps = 1e-5;
    for (int k = 0; k < 20; ++k) {
      const std::size_t i = ui(rng);
      GridFunction up = u, um = u;
      up[i] += eps;
      um[i] -= eps;
      const double fd = (energy(op, f, up) - energy(op, f, um)) / (2 * eps);
      EXPECT_LE(std::abs(fd - g[i]), 1e-6 * (1 + std::abs(g[i])));
    }
  }
}

TEST(Energy, TaylorRemainderIsQuadratic) {
  std::mt19937_64 rng(5);
  const DiscreteOperator op(-1.0, 1.0, 32, 0.5, 3.0);
  const GridFunction f = random_u(rng, 32), u = random_u(rng, 32), phi = random_u(rng, 32);
  const GridFunction g = energy_gradient(op, f, u);
  auto remainder = [&](double eps) {
    GridFunction w = u;
    for (std::size_t i = 0; i < 32; ++i) w[i] += eps * phi[i];
    return std::abs(energy(op, f, w) - energy(op, f, u) - eps * dot(g, phi));
  };
  EXPECT_NEAR(remainder(1e-3) / remainder(1e-4), 100.0, 5.0);
}

TEST(WeakResidual, Examples) {
  const DiscreteOperator op(-1.0, 1.0, 32, 0.5, 3.0);
  const GridFunction f(-1, 1, 32, 1.0);
  EXPECT_NEAR(weak_residual(op, f, op.zero()), op.cell_width(), 1e-15);

  const auto sol = solve_nonlinear(ProblemSpec{1, 0.5, 3.0, f, 2.0});
  const double r0 = weak_residual(op, f, sol.u);
  EXPECT_LT(r0, 1e-8);
  for (double delta : {1e-2, 1e-1}) {
    GridFunction w = sol.u;
    w[10] += delta;
    EXPECT_GT(weak_residual(op, f, w), 0.1 * op.cell_width() * op.gamma() * delta);
  }
}

TEST(SolveLinear, SemicircleConvergesMonotonically) {
  double prev = INFINITY;
  for (std::size_t n : {64u, 128u, 256u, 512u}) {
    const double err = half_laplacian_error(n);
    EXPECT_LT(err, prev) << n;
    prev = err;
  }
  EXPECT_LE(prev, 5e-2);
  const auto res = solve_linear(make_problem(1, 0.5, 2.0, -1.0, 1.0, 512, one));
  EXPECT_NEAR(res.u[256], 1.0, 2e-3);
}

TEST(SolveLinear, ZeroAndLinearity) {
  std::mt19937_64 rng(6);
  const GridFunction z(-1, 1, 64);
  const auto zero = solve_linear(ProblemSpec{1, 0.3, 2.0, z, 2.0});
  for (double v : zero.u.values()) EXPECT_EQ(v, 0.0);
  const GridFunction f1 = random_u(rng, 64), f2 = random_u(rng, 64);
  GridFunction f12 = f1;
  for (std::size_t i = 0; i < 64; ++i) f12[i] += f2[i];
  const auto a = solve_linear(ProblemSpec{1, 0.3, 2.0, f1, 2.0}).u;
  const auto b = solve_linear(ProblemSpec{1, 0.3, 2.0, f2, 2.0}).u;
  const auto c = solve_linear(ProblemSpec{1, 0.3, 2.0, f12, 2.0}).u;
  for (std::size_t i = 0; i < 64; ++i) EXPECT_NEAR(c[i], a[i] + b[i], 1e-10);
  EXPECT_THROW(solve_linear(ProblemSpec{1, 0.3, 3.0, f1, 2.0}), ConfigError);
}

TEST(SolveLinear, MatrixSymmetricPositiveDefinite) {
  std::mt19937_64 rng(7);
  const DiscreteOperator op(-1.0, 1.0, 128, 0.5, 2.0);
  const Eigen::MatrixXd m = linear_matrix(op);
  EXPECT_EQ((m - m.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(m).info(), Eigen::Success);
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd x = Eigen::VectorXd::Random(128);
    EXPECT_GT(x.dot(m * x), 0.0);
  }
}

TEST(SolveNonlinear, ZeroSource) {
  const auto res = solve_nonlinear(ProblemSpec{1, 0.5, 3.0, GridFunction(-1, 1, 32), 2.0});
  for (double v : res.u.values()) EXPECT_EQ(v, 0.0);
}

TEST(SolveNonlinear, ScalingLaw) {
  for (double p : {2.0, 2.5, 3.0, 4.0}) {
    const auto a = solve_nonlinear(make_problem(1, 0.5, p, -1, 1, 128, abs_x, 10.0));
    const auto b = solve_nonlinear(make_problem(1, 0.5, p, -1, 1, 128, [](double x) { return 8 * std::abs(x); }, 10.0));
    const double k = std::pow(8.0, 1.0 / (p - 1.0));
    for (std::size_t i = 0; i < 128; ++i) EXPECT_NEAR(b.u[i], k * a.u[i], 1e-6 * k * std::abs(a.u[i])) << p;
  }
}

TEST(SolveNonlinear, StoppingCriterionHolds) {
  SolverConfig cfg;
  const auto spec = make_problem(1, 0.5, 3.0, -1, 1, 128, abs_x);
  const auto res = solve_nonlinear(spec, cfg);
  EXPECT_LE(res.rel_grad_norm, cfg.grad_tol);
  const DiscreteOperator op = build_operator(spec);
  const GridFunction g = energy_gradient(op, spec.f, res.u);
  double gn = 0.0, fn = 0.0;
  for (std::size_t i = 0; i < 128; ++i) {
    gn += g[i] * g[i];
    fn += spec.f[i] * spec.f[i];
  }
  EXPECT_LE(std::sqrt(gn), cfg.grad_tol * std::sqrt(fn) * op.cell_width());
}

TEST(SolveNonlinear, GradientDescentAgreesWithNewton) {
  SolverConfig bb;
  bb.method = SolverMethod::barzilai_borwein;
  bb.grad_tol = 1e-9;
  const auto spec = make_problem(1, 0.5, 3.0, -1, 1, 32, abs_x);
  const auto a = solve_nonlinear(spec, bb);
  const auto b = solve_nonlinear(spec);
  for (std::size_t i = 0; i < 32; ++i) EXPECT_NEAR(a.u[i], b.u[i], 1e-6 * std::abs(b.u[i]));
}

TEST(SolveNonlinear, NonConvergenceReportsResidual) {
  SolverConfig cfg;
  cfg.max_iters = 1;
  cfg.grad_tol = 1e-14;
  try {
    solve_nonlinear(make_problem(1, 0.5, 3.0, -1, 1, 64, abs_x), cfg);
    FAIL();
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.last_residual(), 0.0);
  }
}

TEST(SolveNonlinear, MaximumPrinciple) {
  for (double p : {2.0, 3.0, 4.0})
    for (double s : {0.25, 0.75}) {
      const auto res = solve_nonlinear(make_problem(1, s, p, -1, 1, 128, [](double x) { return x > 0.3 ? 1.0 : 0.0; }, 10.0));
      for (double v : res.u.values()) EXPECT_GE(v, -1e-10);
    }
}

TEST(SolveNonlinear, ComparisonPrinciple) {
  std::mt19937_64 rng(8);
  for (double p : {2.0, 3.0}) {
    const GridFunction f = random_u(rng, 256);
    GridFunction af = f;
    for (auto& v : af.values()) v = std::abs(v);
    const auto u = solve_nonlinear(ProblemSpec{1, 0.5, p, f, 10.0});
    const auto w = solve_nonlinear(ProblemSpec{1, 0.5, p, af, 10.0});
    for (std::size_t i = 0; i < 256; ++i) EXPECT_LE(std::abs(u.u[i]), w.u[i] + 1e-9);
  }
}

TEST(SolveNonlinear, Deterministic) {
  const auto spec = make_problem(1, 0.5, 3.0, -1, 1, 96, abs_x);
  const auto a = solve_nonlinear(spec), b = solve_nonlinear(spec);
  for (std::size_t i = 0; i < 96; ++i) EXPECT_EQ(a.u[i], b.u[i]);
}
