#pragma once

// Experiment configuration, the named experiments, and report emission for
// the fracsym command-line tool.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "fracsym/error.hpp"
#include "fracsym/grid_function.hpp"
#include "fracsym/nonlocal_op.hpp"
#include "fracsym/rearrange.hpp"
#include "fracsym/specialfn.hpp"
#include "fracsym/svg_plot.hpp"
#include "fracsym/symmetrize.hpp"

namespace fracsym::cli {

enum ExitCode : int { pass = 0, assertion_failure = 1, config_error = 2, non_convergence = 3 };

enum class Experiment { verify, figure1, regularity, specialfn_check };

inline const char* to_string(Experiment e) {
  switch (e) {
  case Experiment::verify: return "verify";
  case Experiment::figure1: return "figure1";
  case Experiment::regularity: return "regularity";
  case Experiment::specialfn_check: return "specialfn-check";
  }
  return "?";
}

inline Experiment parse_experiment(const std::string& s) {
  for (auto e : {Experiment::verify, Experiment::figure1, Experiment::regularity,
                 Experiment::specialfn_check})
    if (s == to_string(e)) return e;
  throw ConfigError("unknown experiment '" + s +
                    "' (expected verify | figure1 | regularity | specialfn-check)");
}

struct ExperimentConfig {
  Experiment experiment = Experiment::verify;
  int N = 1;
  double s = 0.5;
  double p = 3.0;
  double m = 2.0;
  double domain_left = -1.0;
  double domain_right = 1.0;
  std::string source = "abs_x";
  std::size_t n_cells = 256;
  double grad_tol = 1e-8;
  std::size_t max_iters = 50000;
  double line_search_shrink = 0.5;
  double initial_step = 1.0;
  std::string solver = "newton";
  double tolerance = -1.0;  // negative: h^{min(1,2s)} ||f||_1^{1/(p-1)}
  std::string output_dir;   // empty: FRACSYM_OUTPUT_DIR, then ./fracsym_out
  bool emit_plots = false;
  unsigned jobs = 1;
  bool flip_g_sign = false;  // test hook

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
}

inline long long to_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

} // namespace detail

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "experiment", "N", "s", "p", "m", "domain_left", "domain_right", "source", "n_cells",
      "grad_tol", "max_iters", "line_search_shrink", "initial_step", "solver", "tolerance",
      "output_dir", "emit_plots", "jobs", "flip_g_sign"};
  return keys;
}

/// Sets one key. Unknown keys and malformed values throw ConfigError.
inline void set_value(ExperimentConfig& c, const std::string& key, const std::string& v) {
  using namespace detail;
  if (key == "experiment") c.experiment = parse_experiment(v);
  else if (key == "N") {
    const auto n = to_integer(key, v);
    if (n < 1) throw ConfigError("N must be a positive integer");
    c.N = static_cast<int>(n);
  } else if (key == "s") c.s = to_double(key, v);
  else if (key == "p") c.p = to_double(key, v);
  else if (key == "m") c.m = to_double(key, v);
  else if (key == "domain_left") c.domain_left = to_double(key, v);
  else if (key == "domain_right") c.domain_right = to_double(key, v);
  else if (key == "source") c.source = v;
  else if (key == "n_cells") {
    const auto n = to_integer(key, v);
    if (n < 1) throw ConfigError("n_cells must be positive");
    c.n_cells = static_cast<std::size_t>(n);
  } else if (key == "grad_tol") c.grad_tol = to_double(key, v);
  else if (key == "max_iters") {
    const auto n = to_integer(key, v);
    if (n < 1) throw ConfigError("max_iters must be positive");
    c.max_iters = static_cast<std::size_t>(n);
  } else if (key == "line_search_shrink") c.line_search_shrink = to_double(key, v);
  else if (key == "initial_step") c.initial_step = to_double(key, v);
  else if (key == "solver") c.solver = v;
  else if (key == "tolerance") c.tolerance = to_double(key, v);
  else if (key == "output_dir") c.output_dir = v;
  else if (key == "emit_plots") c.emit_plots = to_bool(key, v);
  else if (key == "jobs") {
    const auto n = to_integer(key, v);
    if (n < 1) throw ConfigError("jobs must be at least 1");
    c.jobs = static_cast<unsigned>(n);
  } else if (key == "flip_g_sign") c.flip_g_sign = to_bool(key, v);
  else throw ConfigError("unknown key '" + key + "'");
}

/// Flat key=value text; '#' starts a comment.
inline void parse_config(std::istream& is, ExperimentConfig& c) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    try {
      set_value(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline void load_config_file(const std::string& path, ExperimentConfig& c) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  parse_config(is, c);
}

inline std::string dump_config(const ExperimentConfig& c) {
  using detail::fmt;
  std::ostringstream os;
  os << "experiment=" << to_string(c.experiment) << '\n'
     << "N=" << c.N << '\n'
     << "s=" << fmt(c.s) << '\n'
     << "p=" << fmt(c.p) << '\n'
     << "m=" << fmt(c.m) << '\n'
     << "domain_left=" << fmt(c.domain_left) << '\n'
     << "domain_right=" << fmt(c.domain_right) << '\n'
     << "source=" << c.source << '\n'
     << "n_cells=" << c.n_cells << '\n'
     << "grad_tol=" << fmt(c.grad_tol) << '\n'
     << "max_iters=" << c.max_iters << '\n'
     << "line_search_shrink=" << fmt(c.line_search_shrink) << '\n'
     << "initial_step=" << fmt(c.initial_step) << '\n'
     << "solver=" << c.solver << '\n'
     << "tolerance=" << fmt(c.tolerance) << '\n'
     << "output_dir=" << c.output_dir << '\n'
     << "emit_plots=" << (c.emit_plots ? "true" : "false") << '\n'
     << "jobs=" << c.jobs << '\n'
     << "flip_g_sign=" << (c.flip_g_sign ? "true" : "false") << '\n';
  return os.str();
}

inline nonlocal::SolverConfig solver_config(const ExperimentConfig& c) {
  nonlocal::SolverConfig sc;
  sc.grad_tol = c.grad_tol;
  sc.max_iters = c.max_iters;
  sc.line_search_shrink = c.line_search_shrink;
  sc.initial_step = c.initial_step;
  sc.method = c.solver == "bb" ? nonlocal::SolverMethod::barzilai_borwein
                               : nonlocal::SolverMethod::newton;
  return sc;
}

inline GridFunction make_source(const ExperimentConfig& c) {
  const std::string& src = c.source;
  auto build = [&](auto fn) {
    return GridFunction::cell_averages(c.domain_left, c.domain_right, c.n_cells, fn);
  };
  if (src == "abs_x") return build([](double x) { return std::abs(x); });
  if (src == "const") return build([](double) { return 1.0; });
  if (src == "tent") return build([](double x) { return std::max(0.0, 1.0 - std::abs(x)); });
  if (src.rfind("csv:", 0) == 0) {
    const std::string path = src.substr(4);
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open source CSV '" + path + "'");
    try {
      return read_csv(is);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  throw ConfigError("unknown source '" + src + "' (expected abs_x | const | tent | csv:<path>)");
}

/// Range checks with messages naming the violated condition.
inline void validate(const ExperimentConfig& c) {
  if (!(c.s > 0.0 && c.s < 1.0)) throw ConfigError("s must lie in (0,1), got " + detail::fmt(c.s));
  if (!(c.p >= 2.0))
    throw ConfigError("p must satisfy p >= 2 (only the degenerate case is supported), got " +
                      detail::fmt(c.p));
  if (c.experiment == Experiment::specialfn_check) return;
  if (c.N != 1) throw ConfigError("the solver experiments support N = 1 only");
  if (!(c.domain_left < c.domain_right)) throw ConfigError("domain requires domain_left < domain_right");
  if (c.n_cells < 8) throw ConfigError("n_cells must be at least 8");
  if (!(c.grad_tol > 0.0)) throw ConfigError("grad_tol must be positive");
  if (!(c.line_search_shrink > 0.0 && c.line_search_shrink < 1.0))
    throw ConfigError("line_search_shrink must lie in (0,1)");
  if (!(c.initial_step > 0.0)) throw ConfigError("initial_step must be positive");
  if (c.solver != "newton" && c.solver != "bb") throw ConfigError("solver must be newton or bb");
  if (c.experiment != Experiment::regularity) {
    nonlocal::ProblemSpec probe{c.N, c.s, c.p, GridFunction(c.domain_left, c.domain_right, 8), c.m};
    probe.validate();
  }
}

inline std::filesystem::path output_dir(const ExperimentConfig& c) {
  if (!c.output_dir.empty()) return c.output_dir;
  if (const char* env = std::getenv("FRACSYM_OUTPUT_DIR"); env && *env) return env;
  return "fracsym_out";
}

// Regularity

struct RegularityRecord {
  double m = 0.0;
  double q = 0.0;              ///< target exponent; infinity in the bounded case
  double lorentz_index = 0.0;  ///< second Lorentz index; m itself in the bounded case
  double ratio = 0.0;          ///< ||u||_q / ||f||^{1/(p-1)} at unit amplitude
  double ratio_spread = 0.0;   ///< max/min of the ratio over the amplitude sweep
  bool bounded_case = false;
};

/// Three points of [pN/((p-1)N+sp), N/(sp)). Requires sp < N.
inline std::vector<double> regularity_m_grid(int N, double s, double p) {
  const double dN = static_cast<double>(N);
  if (!(s * p < dN))
    throw ConfigError("regularity requires sp < N; got sp=" + detail::fmt(s * p) +
                      " and N=" + std::to_string(N));
  const double lo = p * dN / ((p - 1.0) * dN + s * p);
  const double hi = dN / (s * p);
  return {lo, lo + (hi - lo) / 3.0, lo + 2.0 * (hi - lo) / 3.0};
}

inline RegularityRecord regularity_record(const ExperimentConfig& c, const GridFunction& shape,
                                          double m) {
  const double dN = static_cast<double>(c.N);
  const double sp = c.s * c.p;
  const double lo = c.p * dN / ((c.p - 1.0) * dN + sp);
  const double hi = dN / sp;
  RegularityRecord rec;
  rec.m = m;
  if (m < lo - 1e-12)
    throw ConfigError("regularity: m=" + detail::fmt(m) + " is below pN/((p-1)N+sp)=" +
                      detail::fmt(lo));
  if (m < hi) {
    rec.q = dN * m * (c.p - 1.0) / (dN - c.s * m * c.p);
    rec.lorentz_index = dN * m / (dN + c.s * m * (c.p - 2.0));
  } else if (m > hi) {
    rec.bounded_case = true;
    rec.q = std::numeric_limits<double>::infinity();
    rec.lorentz_index = m;
  } else {
    throw ConfigError("regularity: m = N/(sp) is not covered by either case");
  }
  const auto sc = solver_config(c);
  double rmin = INFINITY, rmax = 0.0;
  for (double amp : {1.0, std::sqrt(10.0), 10.0}) {
    const GridFunction f = amp * shape;
    const auto u = nonlocal::solve_nonlinear(nonlocal::ProblemSpec{c.N, c.s, c.p, f, m}, sc);
    const double fnorm = rec.bounded_case ? rearrange::lp_norm(f, m)
                                          : rearrange::lorentz_norm(f, m, rec.lorentz_index);
    const double ratio = rearrange::lp_norm(u.u, rec.q) / std::pow(fnorm, 1.0 / (c.p - 1.0));
    if (amp == 1.0) rec.ratio = ratio;
    rmin = std::min(rmin, ratio);
    rmax = std::max(rmax, ratio);
  }
  rec.ratio_spread = rmax / rmin;
  return rec;
}

/// Runs task(i) for i in [0, count) on at most `jobs` threads.
inline void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& task) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Special-function anchors

struct AnchorResult {
  std::string name;
  double value = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  bool passed() const { return std::abs(value - expected) <= tolerance * std::max(1.0, std::abs(expected)); }
};

inline std::vector<AnchorResult> specialfn_anchors() {
  using namespace specialfn;
  const double pi = std::acos(-1.0);
  std::vector<AnchorResult> out;
  out.push_back({"2F1(0.7,1.3;2.1;0)", gauss_2f1({0.7, 1.3, 2.1, 0.0}), 1.0, 0.0});
  out.push_back({"2F1(0.5,0.5;2;1)", gauss_2f1({0.5, 0.5, 2.0, 1.0}), 4.0 / pi, 1e-10});
  out.push_back({"2F1(1,1;2;0.5)", gauss_2f1({1.0, 1.0, 2.0, 0.5}), 2.0 * std::log(2.0), 1e-12});
  out.push_back({"2F1(0.5,1.5;2;0.9999)", gauss_2f1({0.5, 1.5, 2.0, 0.9999}),
                 6.3557749076938489154, 1e-10});
  out.push_back({"gamma(1,0.5,2)", gamma_norm_const(1, 0.5, 2.0), 1.0 / pi, 1e-14});
  {
    const double s = 0.5, N = 2.0;
    const double classical =
        std::pow(4.0, s) * s * std::tgamma((N + 2.0 * s) / 2.0) /
        (std::pow(pi, N / 2.0) * std::tgamma(1.0 - s));
    out.push_back({"gamma(2,0.5,2) classical", gamma_norm_const(2, 0.5, 2.0), classical, 1e-12});
  }
  out.push_back({"omega_3", unit_ball_volume(3), 4.0 * pi / 3.0, 1e-14});
  out.push_back({"P_1/2(B_1), N=1", frac_perimeter(1, 0.5, 1.0), 8.0 * std::sqrt(2.0), 1e-8});
  out.push_back({"P_1/2(B_1), N=2", frac_perimeter(2, 0.5, 1.0), 62.1306387777798, 1e-8});
  out.push_back({"P_1/2(B_2)/P_1/2(B_1), N=3",
                 frac_perimeter(3, 0.5, 2.0) / frac_perimeter(3, 0.5, 1.0), std::pow(2.0, 2.5),
                 1e-8});
  out.push_back({"Theta_{3,0.5,2}(0.3,0.7)",
                 radial_kernel_theta(KernelParams::make(3, 0.5, 2.0), 0.3, 0.7),
                 39.269908169872431558, 1e-10});
  out.push_back({"Theta_{2,0.4,3}(0.3,0.7)",
                 radial_kernel_theta(KernelParams::make(2, 0.4, 3.0), 0.3, 0.7),
                 10.438283417039512355, 1e-10});
  return out;
}

// Report writing

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw Error("write failed: " + path.string());
}

inline void write_grid(const std::filesystem::path& path, const GridFunction& f) {
  std::ostringstream os;
  write_csv(os, f);
  write_text(path, os.str());
}

inline void write_report(const std::filesystem::path& path, const symmetrize::ComparisonReport& r) {
  std::ostringstream os;
  symmetrize::write_report_csv(os, r);
  write_text(path, os.str());
}

inline plot::Series grid_series(const std::string& label, const GridFunction& f) {
  plot::Series s{label, {}, {}};
  for (std::size_t i = 0; i < f.n_cells(); ++i) {
    s.x.push_back(f.center(i));
    s.y.push_back(f[i]);
  }
  return s;
}

inline void plot_concentration(const std::filesystem::path& path, const std::string& title,
                               const symmetrize::ComparisonReport& r, const std::string& a,
                               const std::string& b) {
  plot::write_svg(path.string(), title,
                  {{a, r.radii, r.conc_u_sharp}, {b, r.radii, r.conc_v}});
}

// Experiments

struct Outcome {
  int code = ExitCode::pass;
  std::vector<std::string> failures;
  void fail(const std::string& what) {
    code = ExitCode::assertion_failure;
    failures.push_back(what);
  }
};

inline std::string report_summary(const symmetrize::ComparisonReport& r) {
  std::ostringstream os;
  os << "worst_violation=" << detail::fmt(r.worst_violation)
     << " tolerance=" << detail::fmt(r.tolerance_used)
     << " u_iterations=" << r.u_solve.iterations
     << " u_rel_grad=" << detail::fmt(r.u_solve.rel_grad_norm)
     << " v_weak_residual=" << detail::fmt(r.v_solve.weak_residual);
  return os.str();
}

inline void run_comparison(const ExperimentConfig& c, const std::filesystem::path& dir,
                           std::ostream& log, Outcome& out,
                           symmetrize::VerifyArtifacts& art) {
  nonlocal::ProblemSpec spec{c.N, c.s, c.p, make_source(c), c.m};
  symmetrize::VerifyOptions vo;
  vo.tolerance = c.tolerance;
  vo.flip_g_sign = c.flip_g_sign;
  const auto rep = symmetrize::verify_theorem(spec, solver_config(c), vo, &art);
  write_report(dir / "comparison.csv", rep);
  log << "comparison: " << report_summary(rep) << (rep.zero_mass_triggered ? " zero_mass=1" : "")
      << '\n';
  if (!rep.passed())
    out.fail("concentration comparison u# < v violated: " + report_summary(rep));

  // Key inequality and the Holder step, on the same radii.
  const double h = spec.f.cell_width();
  const auto radii = rearrange::boundary_radii(art.u_sharp);
  const auto key = symmetrize::key_inequality_check(art.u, spec.f, c.s, c.p, radii);
  const auto hold = symmetrize::holder_check(art.u, c.s, c.p, radii);
  std::ostringstream os;
  os << "r,key_slack,holder_slack\n";
  double key_min = 0.0, hold_min = 0.0;
  char buf[96];
  for (std::size_t k = 0; k < radii.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", radii[k], key[k], hold[k]);
    os << buf;
    key_min = std::min(key_min, key[k]);
    hold_min = std::min(hold_min, hold[k]);
  }
  write_text(dir / "inequalities.csv", os.str());
  log << "inequalities: key_min_slack=" << detail::fmt(key_min)
      << " holder_min_slack=" << detail::fmt(hold_min) << '\n';
  if (key_min < -h) out.fail("key inequality slack " + detail::fmt(key_min) + " below -h");
  if (hold_min < -1e-9) out.fail("Holder step slack " + detail::fmt(hold_min) + " negative");

  if (c.emit_plots) {
    plot_concentration(dir / "comparison.svg", "concentration of u# and v", rep, "u#", "v");
    plot::write_svg((dir / "profiles.svg").string(), "profiles",
                    {grid_series("u", art.u), grid_series("u#", art.u_sharp),
                     grid_series("v", art.v), grid_series("g", art.g)});
  }
}

inline void run_verify(const ExperimentConfig& c, const std::filesystem::path& dir,
                       std::ostream& log, Outcome& out) {
  symmetrize::VerifyArtifacts art;
  run_comparison(c, dir, log, out, art);
}

inline bool radially_nonincreasing(const GridFunction& f, double tol) {
  const std::size_t n = f.n_cells();
  for (std::size_t i = n / 2; i + 1 < n; ++i)
    if (f[i + 1] > f[i] + tol) return false;
  for (std::size_t i = (n - 1) / 2; i > 0; --i)
    if (f[i - 1] > f[i] + tol) return false;
  return true;
}

inline void run_figure1(const ExperimentConfig& c, const std::filesystem::path& dir,
                        std::ostream& log, Outcome& out) {
  symmetrize::VerifyArtifacts art;
  run_comparison(c, dir, log, out, art);

  // Nonlinear radial problem with datum f#.
  const auto vnl = nonlocal::solve_nonlinear(
      nonlocal::ProblemSpec{c.N, c.s, c.p, art.f_sharp, c.m}, solver_config(c));
  const double tol = c.tolerance >= 0.0
                         ? c.tolerance
                         : symmetrize::default_tolerance(make_source(c), c.s, c.p);
  const auto power = symmetrize::power_comparison(art.u, vnl.u, c.p, tol);

  write_grid(dir / "panel_u.csv", art.u);
  write_grid(dir / "panel_v.csv", vnl.u);
  write_report(dir / "panel_power_concentration.csv", power);
  {
    std::ostringstream os;
    os << "x,f,f_sharp,u,u_sharp,v_nl\n";
    const GridFunction f = make_source(c);
    char buf[160];
    for (std::size_t i = 0; i < f.n_cells(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", art.f_sharp.center(i),
                    f[i], art.f_sharp[i], art.u[i], art.u_sharp[i], vnl.u[i]);
      os << buf;
    }
    write_text(dir / "profiles.csv", os.str());
  }
  log << "power comparison (recorded, not asserted): worst_violation="
      << detail::fmt(power.worst_violation) << " tolerance=" << detail::fmt(tol)
      << (power.passed() ? " consistent" : " NOT consistent") << '\n';

  double scale = 0.0;
  for (double v : vnl.u.values()) scale = std::max(scale, std::abs(v));
  for (double v : art.u.values()) scale = std::max(scale, std::abs(v));
  const double ptol = 1e-9 * std::max(scale, 1e-300);
  for (const GridFunction* g : std::initializer_list<const GridFunction*>{&art.u, &art.u_sharp, &vnl.u})
    for (double v : g->values())
      if (v < -ptol) {
        out.fail("profile has a negative value " + detail::fmt(v));
        break;
      }
  if (!radially_nonincreasing(art.u_sharp, ptol)) out.fail("u# is not radially non-increasing");
  if (!radially_nonincreasing(vnl.u, ptol)) out.fail("v_nl is not radially non-increasing");

  if (c.emit_plots) {
    plot::write_svg((dir / "panel_u.svg").string(), "u", {grid_series("u", art.u)});
    plot::write_svg((dir / "panel_v.svg").string(), "v", {grid_series("v", vnl.u)});
    plot_concentration(dir / "panel_power_concentration.svg",
                       "concentration of (p-1) powers", power, "(u#)^(p-1)", "v^(p-1)");
  }
}

inline void run_regularity(const ExperimentConfig& c, const std::filesystem::path& dir,
                           std::ostream& log, Outcome& out) {
  std::vector<double> ms = regularity_m_grid(c.N, c.s, c.p);
  const double lo = ms.front();
  if (c.m < lo - 1e-12)
    throw ConfigError("regularity: m=" + detail::fmt(c.m) + " is below pN/((p-1)N+sp)=" +
                      detail::fmt(lo));
  if (std::none_of(ms.begin(), ms.end(), [&](double x) { return std::abs(x - c.m) < 1e-12; }))
    ms.push_back(c.m);

  const GridFunction shape = make_source(c);
  std::vector<RegularityRecord> recs(ms.size());
  parallel_for(ms.size(), c.jobs, [&](std::size_t i) { recs[i] = regularity_record(c, shape, ms[i]); });

  std::ostringstream os;
  os << "m,q,lorentz_index,ratio,ratio_spread,case\n";
  char buf[200];
  for (const auto& r : recs) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%s\n", r.m, r.q,
                  r.lorentz_index, r.ratio, r.ratio_spread, r.bounded_case ? "bounded" : "lorentz");
    os << buf;
    log << "regularity: m=" << detail::fmt(r.m) << " q=" << detail::fmt(r.q)
        << " ratio=" << detail::fmt(r.ratio) << " spread-1=" << detail::fmt(r.ratio_spread - 1.0)
        << '\n';
    if (!std::isfinite(r.ratio) || !(r.ratio > 0.0))
      out.fail("regularity ratio not finite at m=" + detail::fmt(r.m));
    if (!(r.ratio_spread <= 1.0 + 1e-6))
      out.fail("regularity ratio varies with amplitude at m=" + detail::fmt(r.m));
  }
  write_text(dir / "regularity.csv", os.str());
}

inline void run_specialfn_check(const std::filesystem::path& dir, std::ostream& log, Outcome& out) {
  std::ostringstream os;
  os << "name,value,expected,tolerance,status\n";
  char buf[256];
  for (const auto& a : specialfn_anchors()) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.3g,%s\n", a.name.c_str(), a.value,
                  a.expected, a.tolerance, a.passed() ? "pass" : "fail");
    os << buf;
    std::snprintf(buf, sizeof buf, "%-34s %-22.15g %-22.15g %s\n", a.name.c_str(), a.value,
                  a.expected, a.passed() ? "PASS" : "FAIL");
    log << buf;
    if (!a.passed()) out.fail("anchor " + a.name);
  }
  write_text(dir / "specialfn_check.csv", os.str());
}

/// Runs one experiment and returns its exit status. Errors are reported on
/// `err`; every run ends with one machine-readable result line on `log`.
inline int run_experiment(const ExperimentConfig& c, std::ostream& log, std::ostream& err) {
  Outcome out;
  try {
    validate(c);
    const auto dir = output_dir(c);
    ensure_dir(dir);
    log << "# fracsym " << to_string(c.experiment) << " (output_dir=" << dir.string() << ")\n";
    std::istringstream header(dump_config(c));
    for (std::string line; std::getline(header, line);) log << "#   " << line << '\n';
    switch (c.experiment) {
    case Experiment::verify: run_verify(c, dir, log, out); break;
    case Experiment::figure1: run_figure1(c, dir, log, out); break;
    case Experiment::regularity: run_regularity(c, dir, log, out); break;
    case Experiment::specialfn_check: run_specialfn_check(dir, log, out); break;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    out.code = ExitCode::config_error;
    out.failures.push_back(e.what());
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << '\n';
    out.code = ExitCode::config_error;
    out.failures.push_back(e.what());
  } catch (const ConvergenceError& e) {
    err << "solver did not converge: " << e.what() << '\n';
    out.code = ExitCode::non_convergence;
    out.failures.push_back(e.what());
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    out.code = ExitCode::config_error;
    out.failures.push_back(e.what());
  }
  for (const auto& f : out.failures)
    if (out.code == ExitCode::assertion_failure) err << "assertion failed: " << f << '\n';
  log << "result experiment=" << to_string(c.experiment)
      << " status=" << (out.code == ExitCode::pass ? "pass" : "fail") << " exit=" << out.code
      << " failures=" << out.failures.size() << '\n';
  return out.code;
}

/// Command-line entry: fracsym <experiment> [--config path] [--key value ...].
/// Flags override the config file.
inline int main_entry(int argc, char** argv, std::ostream& log = std::cout,
                      std::ostream& err = std::cerr) {
  CLI::App app{"fracsym: symmetrization experiments for the fractional p-Laplacian"};
  std::string experiment;
  std::string config_path;
  bool dump = false;
  app.add_option("experiment", experiment, "verify | figure1 | regularity | specialfn-check")
      ->required();
  app.add_option("--config", config_path, "flat key=value config file");
  app.add_flag("--dump-config", dump, "print the effective config and exit");
  std::map<std::string, std::string> flags;
  for (const auto& key : config_keys())
    if (key != "experiment") app.add_option("--" + key, flags[key], "config key " + key);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, log, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, log, err);
    return ExitCode::config_error;
  }

  ExperimentConfig cfg;
  try {
    if (!config_path.empty()) load_config_file(config_path, cfg);
    cfg.experiment = parse_experiment(experiment);
    for (const auto& key : config_keys())
      if (key != "experiment" && app.count("--" + key) > 0) set_value(cfg, key, flags[key]);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return ExitCode::config_error;
  }
  if (dump) {
    log << dump_config(cfg);
    return ExitCode::pass;
  }
  return run_experiment(cfg, log, err);
}

} // namespace fracsym::cli
