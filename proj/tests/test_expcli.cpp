#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "adjoint_flow/experiments.hpp"

using namespace adjoint_flow;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() / ("adjoint_flow_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string str() const { return path_.string(); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ADJOINT_FLOW_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config_path(const std::string& name) { return std::string(ADJOINT_FLOW_CONFIGS) + "/" + name; }

const char* small_run_config = R"(
[grid]
dim = 1
n_interior = 15
[source]
kind = linear-sine
d = 2
theta_true = 1, -0.5
theta0 = 0, 0
gamma = 0.01
[run]
horizon = 20
log_per_decade = 20
fit_lo = 1
fit_hi = 20
)";

TraceRecord decaying_trace() {
  TraceRecord tr;
  tr.theta_dim = 1;
  for (int i = 0; i <= 40; ++i) {
    TraceRow r;
    r.t = std::pow(10.0, i / 10.0);
    r.theta = {1.0 / r.t};
    r.theta_err = 2.0 / r.t;
    r.J = 1.0 / std::sqrt(r.t);
    tr.rows.push_back(r);
  }
  return tr;
}

}  // namespace

TEST(Config, UnknownAndMissingKeysListed) {
  try {
    load_config("run", "[grid]\nn_interior = 7\nbogus = 1\n[run]\nalso_bogus = 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("grid.bogus"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("run.also_bogus"), std::string::npos);
  }
  try {
    load_config("run", "[grid]\ndim = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("grid.n_interior"), std::string::npos);
  }
  EXPECT_THROW(load_config("rates", ""), ConfigError);
  EXPECT_NO_THROW(load_config("schedule", ""));
}

TEST(Config, SyntaxAndTypeErrors) {
  EXPECT_THROW(parse_ini("[grid\nx = 1\n"), ConfigError);
  EXPECT_THROW(parse_ini("x = 1\n"), ConfigError);
  EXPECT_THROW(parse_ini("[grid]\njunk\n"), ConfigError);
  const Config c = load_config("run", "[grid]\nn_interior = 7\nlo = abc\n[output]\nsvg = maybe\n");
  EXPECT_THROW(c.number("grid.lo"), ConfigError);
  EXPECT_THROW(c.flag("output.svg"), ConfigError);
  EXPECT_THROW(c.str("grid.nothing"), ConfigError);
}

TEST(Config, OverridesAndRoundTrip) {
  const Config c = load_config("run", "# comment\n[grid]\nn_interior = 7 ; trailing\n", {"run.horizon=5", "source.d = 2"});
  EXPECT_EQ(c.count("grid.n_interior"), 7u);
  EXPECT_EQ(c.number("run.horizon"), 5.0);
  EXPECT_EQ(c.count("source.d"), 2u);
  EXPECT_EQ(c.numbers("source.theta_true"), std::vector<double>{1.0});
  const Config back = load_config("run", c.effective_text());
  EXPECT_EQ(back.effective_text(), c.effective_text());
  EXPECT_THROW(load_config("run", "[grid]\nn_interior = 7\n", {"no_equals_sign"}), ConfigError);
  EXPECT_THROW(load_config("run", "[grid]\nn_interior = 7\n", {"grid.typo=1"}), ConfigError);
}

TEST(Svg, OnePolylinePerColumnAndLegend) {
  const std::string s = emit_svg(decaying_trace(), {"theta_0", "theta_err"}, Axes::log_log, {}, "a < b");
  std::size_t count = 0;
  for (std::size_t pos = s.find("<polyline"); pos != std::string::npos; pos = s.find("<polyline", pos + 1)) ++count;
  EXPECT_EQ(count, 2u);
  EXPECT_NE(s.find(">theta_err</text>"), std::string::npos);
  EXPECT_NE(s.find("a &lt; b"), std::string::npos);
  EXPECT_EQ(s, emit_svg(decaying_trace(), {"theta_0", "theta_err"}, Axes::log_log, {}, "a < b"));
}

TEST(Svg, GuideHasRequestedSlope) {
  const TraceRecord tr = decaying_trace();
  const std::string s = emit_svg(tr, {"J"}, Axes::log_log, {{-0.5, "J", "half"}});
  // The guide anchored on J = t^-1/2 coincides with the data line, so its
  // pixel slope equals the polyline's end-to-end pixel slope.
  const auto grab = [&](const std::string& key, std::size_t from) {
    const std::size_t p = s.find(key + "=\"", from) + key.size() + 2;
    return std::stod(s.substr(p));
  };
  const std::size_t line = s.find("stroke-dasharray=\"4 3\"/>");
  const std::size_t start = s.rfind("<line", line);
  const double x1 = grab("x1", start), y1 = grab("y1", start), x2 = grab("x2", start), y2 = grab("y2", start);
  const std::size_t poly = s.find("points=\"", s.find("<polyline")) + 8;
  const std::string pts = s.substr(poly, s.find('"', poly) - poly);
  const double px1 = std::stod(pts), py1 = std::stod(pts.substr(pts.find(',') + 1));
  const std::string last = pts.substr(pts.rfind(' ') + 1);
  const double px2 = std::stod(last), py2 = std::stod(last.substr(last.find(',') + 1));
  EXPECT_NEAR((y2 - y1) / (x2 - x1), (py2 - py1) / (px2 - px1), 0.01);
  EXPECT_NE(s.find(">half</text>"), std::string::npos);
}

TEST(Svg, ErrorsLeaveNoFile) {
  TempDir d("svg");
  EXPECT_THROW(write_svg(d / "empty.svg", TraceRecord{}, {"J"}, Axes::linear), Error);
  EXPECT_FALSE(fs::exists(d / "empty.svg"));
  EXPECT_THROW(write_svg(d / "guide.svg", decaying_trace(), {"J"}, Axes::linear, {{-1.0, "J", ""}}), Error);
  EXPECT_FALSE(fs::exists(d / "guide.svg"));
  EXPECT_THROW(emit_svg(decaying_trace(), {"nope"}, Axes::linear), Error);
}

TEST(Io, AtomicWriteReplacesWithoutTempLeftovers) {
  TempDir d("io");
  write_file_atomic(d / "sub/x.txt", "one");
  write_file_atomic(d / "sub/x.txt", "two");
  EXPECT_EQ(read_file(d / "sub/x.txt"), "two");
  EXPECT_FALSE(fs::exists(d / "sub/x.txt.tmp"));
  EXPECT_EQ(hex64(fnv1a64("")), "cbf29ce484222325");
  EXPECT_EQ(hex64(fnv1a64("a")), "af63dc4c8601ec8c");
}

TEST(Experiments, ScheduleReportAndRunDirectory) {
  TempDir d("sched");
  const std::string text = read_file(config_path("schedule_constant.ini"));
  const ExperimentResult r = run_experiment("schedule", text, {}, d.str());
  EXPECT_EQ(r.exit_code, exit_threshold);
  EXPECT_EQ(r.report.get("schedule.alpha_vanishes"), std::optional<std::string>("FAIL"));
  const std::string effective = load_config("schedule", text).effective_text();
  EXPECT_EQ(fs::path(r.run_dir).filename().string(), "schedule-" + hex64(fnv1a64("schedule\n" + effective)));
  EXPECT_EQ(read_file(r.run_dir + "/config.ini"), effective);
  EXPECT_EQ(read_file(r.run_dir + "/report.txt"), r.report.str());
  EXPECT_EQ(run_experiment("schedule", read_file(config_path("schedule_inverse_linear.ini")), {}, d.str()).exit_code,
            exit_ok);
}

TEST(Experiments, OnlineRunWritesArtifactsDeterministically) {
  TempDir a("run_a"), b("run_b");
  const ExperimentResult ra = run_experiment("run", small_run_config, {}, a.str());
  const ExperimentResult rb = run_experiment("run", small_run_config, {}, b.str());
  EXPECT_NE(ra.exit_code, exit_error);
  for (const char* f : {"config.ini", "report.txt", "trace.csv", "theta.svg", "theta_err.svg", "u_final.csv", "u_hat_final.csv"}) {
    ASSERT_TRUE(fs::exists(ra.run_dir + "/" + f)) << f;
    EXPECT_EQ(read_file(ra.run_dir + "/" + f), read_file(rb.run_dir + "/" + f)) << f;
  }
  EXPECT_TRUE(fs::exists(ra.run_dir + "/timing.txt"));
  EXPECT_EQ(fs::path(ra.run_dir).filename(), fs::path(rb.run_dir).filename());

  const std::string rates_cfg = "[rates]\ntrace = " + ra.run_dir + "/trace.csv\ncolumn = theta_err\nt_lo = 1\nt_hi = 20\n";
  const ExperimentResult rr = run_experiment("rates", rates_cfg, {}, a.str());
  EXPECT_NE(rr.exit_code, exit_error);
  EXPECT_TRUE(rr.report.get("rate.exponent").has_value());
}

TEST(Experiments, DivergedRunKeepsPartialTrace) {
  TempDir d("diverge");
  const ExperimentResult r =
      run_experiment("run", small_run_config, {"run.dt=0.01", "run.allow_unstable=true", "run.horizon=100"}, d.str());
  EXPECT_EQ(r.exit_code, exit_error);
  EXPECT_EQ(r.report.get("status"), std::optional<std::string>("diverged"));
  EXPECT_TRUE(fs::exists(r.run_dir + "/trace.csv"));
  EXPECT_THROW(run_experiment("run", small_run_config, {"run.dt=0.01"}, d.str()), StabilityError);
}

TEST(Cli, ExitCodes) {
  TempDir d("cli");
  EXPECT_EQ(run_cli("schedule --config " + config_path("schedule_constant.ini") + " --out " + d.str()), 2);
  EXPECT_EQ(run_cli("schedule --config " + config_path("schedule_inverse_linear.ini") + " --out " + d.str()), 0);
  EXPECT_EQ(run_cli("gradcheck --config " + config_path("gradcheck.ini") + " --out " + d.str()), 0);
  EXPECT_EQ(run_cli("schedule --config " + config_path("schedule_constant.ini") + " --override schedule.typo=1 --out " +
                    d.str()),
            1);
  EXPECT_NE(run_cli("nonsense"), 0);
}

TEST(Cli, JobsAndEnvironmentOutputRoot) {
  TempDir d("cli_env");
  const std::string cmd = "ADJOINT_FLOW_OUT=" + d.str() + " " + ADJOINT_FLOW_CLI + " schedule --jobs 2 --config " +
                          config_path("schedule_constant.ini") + " --config " +
                          config_path("schedule_inverse_linear.ini") + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 2);
  std::size_t dirs = 0;
  for (const auto& e : fs::directory_iterator(d.str())) {
    EXPECT_EQ(e.path().filename().string().rfind("schedule-", 0), 0u);
    EXPECT_TRUE(fs::exists(e.path() / "report.txt"));
    ++dirs;
  }
  EXPECT_EQ(dirs, 2u);
}
