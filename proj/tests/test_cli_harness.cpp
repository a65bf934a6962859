#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "fracsym/cli_harness.hpp"

using namespace fracsym;
using namespace fracsym::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fracsym_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

int run(ExperimentConfig c, std::string* log_out = nullptr, std::string* err_out = nullptr) {
  std::ostringstream log, err;
  const int code = run_experiment(c, log, err);
  if (log_out) *log_out = log.str();
  if (err_out) *err_out = err.str();
  return code;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(FRACSYM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig parse_text(const std::string& text) {
  ExperimentConfig c;
  std::istringstream is(text);
  parse_config(is, c);
  return c;
}

} // namespace

TEST(Config, MinimalConfigUsesDefaults) {
  const auto c = parse_text("experiment=verify\n");
  EXPECT_EQ(c.experiment, Experiment::verify);
  EXPECT_EQ(c.N, 1);
  EXPECT_EQ(c.s, 0.5);
  EXPECT_EQ(c.p, 3.0);
  EXPECT_EQ(c.domain_left, -1.0);
  EXPECT_EQ(c.domain_right, 1.0);
  EXPECT_EQ(c.n_cells, 256u);
  EXPECT_EQ(c.source, "abs_x");
}

TEST(Config, UnknownKeyAndMalformedLinesReportLineNumbers) {
  try {
    parse_text("# comment\ns=0.3\nwidth=2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("width"), std::string::npos);
  }
  EXPECT_THROW(parse_text("s 0.3\n"), ConfigError);
  EXPECT_THROW(parse_text("n_cells=abc\n"), ConfigError);
  EXPECT_THROW(parse_text("experiment=plot\n"), ConfigError);
}

TEST(Config, RangeErrorsNameTheCondition) {
  ExperimentConfig c;
  c.s = 1.2;
  try {
    validate(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("(0,1)"), std::string::npos);
  }
  c.s = 0.5;
  c.p = 1.5;
  try {
    validate(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate"), std::string::npos);
  }
  c.p = 3.0;
  c.s = 0.25;
  c.m = 1.0;  // below pN/((p-1)N+sp)
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, DumpConfigRoundTrips) {
  ExperimentConfig c;
  c.experiment = Experiment::figure1;
  c.s = 0.1 + 0.2;  // not exactly representable in short form
  c.p = 2.75;
  c.source = "tent";
  c.n_cells = 333;
  c.tolerance = 1.0 / 3.0;
  c.output_dir = "/tmp/x y";
  c.emit_plots = true;
  c.jobs = 4;
  c.solver = "bb";
  const auto back = parse_text(dump_config(c));
  EXPECT_TRUE(back == c);
  EXPECT_EQ(dump_config(back), dump_config(c));
}

TEST(Config, FlagsOverrideFile) {
  const fs::path dir = scratch("flags");
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "run.cfg");
    os << "s=0.3\np=4\nn_cells=64\n";
  }
  std::string cfg = (dir / "run.cfg").string();
  std::string outdir = (dir / "out").string();
  const char* argv[] = {"fracsym", "verify", "--config", cfg.c_str(), "--p", "2.5",
                        "--dump-config", "--output_dir", outdir.c_str()};
  std::ostringstream log, err;
  EXPECT_EQ(main_entry(9, const_cast<char**>(argv), log, err), 0);
  const auto c = parse_text(log.str());
  EXPECT_EQ(c.s, 0.3);
  EXPECT_EQ(c.p, 2.5);
  EXPECT_EQ(c.n_cells, 64u);
  EXPECT_EQ(c.output_dir, outdir);
}

TEST(Verify, WritesComparisonCsvAndPasses) {
  ExperimentConfig c;
  c.output_dir = scratch("verify").string();
  c.n_cells = 128;
  c.emit_plots = true;
  std::string log;
  EXPECT_EQ(run(c, &log), ExitCode::pass) << log;
  const std::string csv = slurp(fs::path(c.output_dir) / "comparison.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "r,conc_u_sharp,conc_v,slack");
  EXPECT_NE(csv.find("status=pass"), std::string::npos);
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "inequalities.csv"));
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "comparison.svg"));
  EXPECT_NE(log.find("n_cells=128"), std::string::npos);  // run header lists the config
  EXPECT_NE(log.find("result experiment=verify status=pass exit=0"), std::string::npos);
}

TEST(Verify, IdenticalRunsGiveIdenticalBytes) {
  ExperimentConfig c;
  c.n_cells = 96;
  c.output_dir = scratch("det_a").string();
  ASSERT_EQ(run(c), 0);
  const std::string a = slurp(fs::path(c.output_dir) / "comparison.csv");
  c.output_dir = scratch("det_b").string();
  ASSERT_EQ(run(c), 0);
  EXPECT_EQ(a, slurp(fs::path(c.output_dir) / "comparison.csv"));
}

TEST(Verify, SignFlipHookFails) {
  ExperimentConfig c;
  c.n_cells = 64;
  c.output_dir = scratch("flip").string();
  c.flip_g_sign = true;
  std::string err;
  EXPECT_EQ(run(c, nullptr, &err), ExitCode::assertion_failure);
  EXPECT_NE(err.find("assertion failed"), std::string::npos);
}

TEST(Verify, NonConvergenceExitCode) {
  ExperimentConfig c;
  c.n_cells = 64;
  c.output_dir = scratch("nonconv").string();
  c.max_iters = 1;
  c.grad_tol = 1e-15;
  EXPECT_EQ(run(c), ExitCode::non_convergence);
}

TEST(Verify, OutputDirFromEnvironment) {
  const fs::path dir = scratch("env");
  ::setenv("FRACSYM_OUTPUT_DIR", dir.c_str(), 1);
  ExperimentConfig c;
  c.n_cells = 32;
  EXPECT_EQ(output_dir(c), dir);
  EXPECT_EQ(run(c), 0);
  ::unsetenv("FRACSYM_OUTPUT_DIR");
  EXPECT_TRUE(fs::exists(dir / "comparison.csv"));
}

TEST(Verify, CsvSource) {
  const fs::path dir = scratch("csvsrc");
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "f.csv");
    write_csv(os, GridFunction::cell_averages(-1, 1, 48, [](double x) { return x * x; }));
  }
  ExperimentConfig c;
  c.source = "csv:" + (dir / "f.csv").string();
  c.output_dir = (dir / "out").string();
  EXPECT_EQ(run(c), 0);
  c.source = "csv:" + (dir / "missing.csv").string();
  EXPECT_EQ(run(c), ExitCode::config_error);
}

TEST(Figure1, ProfilesAndPanels) {
  ExperimentConfig c;
  c.experiment = Experiment::figure1;
  c.output_dir = scratch("fig1").string();
  c.emit_plots = true;
  std::string log;
  ASSERT_EQ(run(c, &log), ExitCode::pass) << log;
  const fs::path d(c.output_dir);
  for (const char* f : {"panel_u.csv", "panel_v.csv", "panel_power_concentration.csv",
                        "profiles.csv", "panel_u.svg", "panel_v.svg",
                        "panel_power_concentration.svg"})
    EXPECT_TRUE(fs::exists(d / f)) << f;
  std::istringstream is(slurp(d / "profiles.csv"));
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "x,f,f_sharp,u,u_sharp,v_nl");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    double x, f, fsharp;
    ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &f, &fsharp), 3);
    EXPECT_NEAR(fsharp, 1.0 - std::abs(x), 1e-14);
    ++rows;
  }
  EXPECT_EQ(rows, 256u);
  EXPECT_NE(log.find("power comparison (recorded, not asserted)"), std::string::npos);
}

TEST(Regularity, RejectsWithoutSpBelowN) {
  ExperimentConfig c;
  c.experiment = Experiment::regularity;
  c.output_dir = scratch("reg_bad").string();
  c.m = 1.0;
  std::string err;
  EXPECT_EQ(run(c, nullptr, &err), ExitCode::config_error);
  EXPECT_NE(err.find("sp < N"), std::string::npos);
}

TEST(Regularity, ExponentsAndBranchSelection) {
  ExperimentConfig c;
  c.experiment = Experiment::regularity;
  c.s = 0.25;
  c.p = 3.0;
  c.n_cells = 64;
  const GridFunction shape = make_source(c);
  // m = 1.5 > N/(sp) = 4/3: bounded case
  const auto b = regularity_record(c, shape, 1.5);
  EXPECT_TRUE(b.bounded_case);
  EXPECT_TRUE(std::isinf(b.q));
  // m = 1.2 in [12/11, 4/3): q = Nm(p-1)/(N-smp) = 2.4/0.1
  const auto r = regularity_record(c, shape, 1.2);
  EXPECT_FALSE(r.bounded_case);
  EXPECT_NEAR(r.q, 24.0, 1e-12);
  EXPECT_NEAR(r.lorentz_index, 1.2 / 1.3, 1e-12);
  EXPECT_LE(r.ratio_spread, 1.0 + 1e-6);
  EXPECT_THROW(regularity_record(c, shape, 1.0), ConfigError);
}

TEST(Regularity, SweepRecordsAndJobsAgree) {
  ExperimentConfig c;
  c.experiment = Experiment::regularity;
  c.s = 0.25;
  c.p = 3.0;
  c.m = 1.2;
  c.n_cells = 64;
  c.output_dir = scratch("reg_1").string();
  ASSERT_EQ(run(c), 0);
  const std::string a = slurp(fs::path(c.output_dir) / "regularity.csv");
  EXPECT_EQ(a.substr(0, a.find('\n')), "m,q,lorentz_index,ratio,ratio_spread,case");
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 5);  // header + 3 grid points + configured m
  c.jobs = 3;
  c.output_dir = scratch("reg_3").string();
  ASSERT_EQ(run(c), 0);
  EXPECT_EQ(a, slurp(fs::path(c.output_dir) / "regularity.csv"));
}

TEST(SpecialfnCheck, AllAnchorsPass) {
  for (const auto& a : specialfn_anchors()) EXPECT_TRUE(a.passed()) << a.name;
  ExperimentConfig c;
  c.experiment = Experiment::specialfn_check;
  c.output_dir = scratch("sfc").string();
  EXPECT_EQ(run(c), 0);
}

TEST(Binary, ExitCodes) {
  const std::string out = scratch("bin").string();
  EXPECT_EQ(run_binary("verify --n_cells 32 --output_dir " + out), 0);
  EXPECT_EQ(run_binary("verify --n_cells 32 --flip_g_sign true --output_dir " + out), 1);
  EXPECT_EQ(run_binary("verify --s 1.2 --output_dir " + out), 2);
  EXPECT_EQ(run_binary("verify --bogus 1"), 2);
  EXPECT_EQ(run_binary("nonsense"), 2);
  EXPECT_EQ(run_binary("verify --n_cells 32 --max_iters 1 --grad_tol 1e-15 --output_dir " + out), 3);
  EXPECT_EQ(run_binary("specialfn-check --output_dir " + out), 0);
}
