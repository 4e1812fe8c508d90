#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pzo/cli.hpp"

using namespace pzo;
namespace fs = std::filesystem;

namespace {

const std::string kDir = PZO_SCENARIO_DIR;

const char* kShipped[] = {"example1_static.ini", "example1_tracking.ini", "example1_tracking_paper.ini",
                          "example2_box.ini",    "desk_kkt.ini",          "switching.ini",
                          "regional.ini"};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pzo_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path.string();
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string with_replaced(const std::string& text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.substr(0, pos) + to + text.substr(pos + from.size());
}

std::vector<std::string> csv_column(const std::string& csv, const std::string& name) {
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  std::vector<std::string> header;
  {
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) header.push_back(c);
  }
  const auto idx = static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  std::vector<std::string> out;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (idx < cells.size()) out.push_back(cells[idx]);
  }
  return out;
}

double report_value(const std::string& text, const std::string& key) {
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);)
    if (line.rfind(key + ": ", 0) == 0) return std::stod(line.substr(key.size() + 2));
  FAIL("missing key " << key);
  return 0.0;
}

}  // namespace

TEST_CASE("every shipped scenario validates and round-trips") {
  for (const char* name : kShipped) {
    CAPTURE(name);
    CommandOptions opt;
    opt.config = kDir + "/" + name;
    std::ostringstream out, err;
    CHECK(cmd_check(opt, out, err) == kExitOk);
    const Scenario s = load_scenario(opt.config);
    std::stringstream text;
    save_scenario(text, s);
    CHECK(parse_scenario(text) == s);
  }
}

TEST_CASE("round trip of a scenario using every block") {
  const std::string text = R"(
[problem]
name = quadratic
Q = 2, 0.5; 0.5, 1
c = 0.1, -0.3
k = 1.25
G = 1, 1
h = 1

[exosystem]
kind = static

[set]
kind = polytope
A = 1, 0; 0, 1; -1, -1
b = 2, 2, 2
shrink = true

[algorithm]
name = ppdzo
k_x = 1.5
alpha_x = 0.3
k_lambda = 2
alpha_lambda = 0.2
eps_xi = 0.1
eps_a = 0.02
eps_omega = 0.03
lambda_max = 100
x0 = 0.1, 0.2
xi0 = 0, 1
lambda0 = 0.5
xi2_0 = 0.25

[dither]
kappa = 1/2, 3/4
mu0 = 0, -1, 1, 0

[sim]
t_end = 3
h = 0.0001
integrator = euler
guard = false
seed = 42

[noise]
bound = 0.001
mode = constant_direction
target = both
seed = 9

[output]
name = everything
stride = 7
plots = false

[compare]
algorithms = ppdzo, target_saddle
)";
  std::istringstream in(text);
  const Scenario s = parse_scenario(in);
  CHECK(s.dither.kappa[0] == Rational(1, 2));
  CHECK(s.noise.mode == NoiseMode::constant_direction);
  CHECK(s.sim.config.stride == 7);
  std::stringstream again;
  save_scenario(again, s);
  CHECK(parse_scenario(again) == s);
  CHECK_NOTHROW(build_scenario(s));

  std::istringstream bad_key("[algorithm]\nname = pgzo\nk_y = 1\n");
  CHECK_THROWS_AS(parse_scenario(bad_key), ValidationError);
  std::istringstream bad_section("[plant]\nmass = 1\n");
  CHECK_THROWS_AS(parse_scenario(bad_section), ValidationError);
}

TEST_CASE("run command writes its artifacts") {
  const fs::path dir = scratch("run");
  CommandOptions opt;
  opt.config = kDir + "/example1_tracking.ini";
  opt.out_dir = dir.string();
  std::ostringstream out, err;
  REQUIRE(cmd_run(opt, out, err) == kExitOk);
  for (const char* suffix : {"_trajectory.csv", "_report.txt", "_summary.csv", "_plot.csv", "_phase.svg"})
    CHECK_MESSAGE(fs::exists(dir / (std::string("example1_tracking") + suffix)), suffix);
  const auto in_set = csv_column(read_file(dir / "example1_tracking_trajectory.csv"), "in_set");
  REQUIRE(in_set.size() > 100);
  CHECK(std::all_of(in_set.begin(), in_set.end(), [](const std::string& v) { return v == "1"; }));
  const std::string report = read_file(dir / "example1_tracking_report.txt");
  CHECK(report.find("all_in_set: true") != std::string::npos);
  CHECK(report_value(report, "limsup_tracking_error") <= 0.1);
  CHECK(read_file(dir / "example1_tracking_phase.svg").find("<circle") != std::string::npos);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("codes");
  const std::string base = read_file(kDir + "/example1_static.ini");
  std::ostringstream out, err;
  CommandOptions opt;
  opt.out_dir = dir.string();

  SUBCASE("frequencies violating the separation assumption") {
    opt.config = write_file(dir / "kappa.ini", with_replaced(base, "kappa = 2, 3", "kappa = 1, 2"));
    CHECK(cmd_run(opt, out, err) == kExitValidation);
    CHECK(err.str().find("separation assumption") != std::string::npos);
    CHECK(err.str().find("kappa_2 = 2 = 2 * kappa_1") != std::string::npos);
  }
  SUBCASE("initial state outside the feasible set") {
    opt.config = write_file(dir / "outside.ini", with_replaced(base, "x0 = 0.5, 0", "x0 = -0.5, 0"));
    CHECK(cmd_run(opt, out, err) == kExitValidation);
    CHECK(err.str().find("outside") != std::string::npos);
  }
  SUBCASE("unreadable config") {
    opt.config = (dir / "missing.ini").string();
    CHECK(cmd_check(opt, out, err) == kExitIo);
  }
  SUBCASE("unwritable output directory") {
    const std::string blocker = write_file(dir / "blocker", "x");
    opt.config = kDir + "/example1_static.ini";
    opt.out_dir = blocker + "/sub";
    CHECK(cmd_run(opt, out, err) == kExitIo);
  }
  SUBCASE("divergence") {
    std::string text = with_replaced(base, "alpha_x = 0.5", "alpha_x = 0.5\nk_x = 1e13");
    text = with_replaced(text, "k_x = 1\n", "");
    text = with_replaced(text, "[set]\nkind = ball\ncenter = 1.5, 0\nradius = 1.5", "[set]\nkind = whole");
    text = with_replaced(text, "t_end = 10", "t_end = 0.01");
    opt.config = write_file(dir / "diverge.ini", text);
    CHECK(cmd_run(opt, out, err) == kExitDivergence);
  }
  SUBCASE("sweep over an unknown parameter") {
    opt.config = kDir + "/example1_static.ini";
    opt.param = "eps_zeta";
    opt.values = "1";
    CHECK(cmd_sweep(opt, out, err) == kExitValidation);
  }
  SUBCASE("compare needs two algorithms") {
    opt.config = kDir + "/regional.ini";
    CHECK(cmd_compare(opt, out, err) == kExitValidation);
  }
}

TEST_CASE("output directory precedence") {
  Scenario s;
  CommandOptions opt;
  ::unsetenv("PZO_OUT_DIR");
  CHECK(resolve_out_dir(opt, s) == "out");
  ::setenv("PZO_OUT_DIR", "/tmp/from_env", 1);
  CHECK(resolve_out_dir(opt, s) == "/tmp/from_env");
  s.output.dir = "from_config";
  CHECK(resolve_out_dir(opt, s) == "from_config");
  opt.out_dir = "from_flag";
  CHECK(resolve_out_dir(opt, s) == "from_flag");
  ::unsetenv("PZO_OUT_DIR");
}

TEST_CASE("amplitude sweep on the static problem refines the terminal error") {
  const Scenario base = load_scenario(kDir + "/example1_static.ini");
  const auto rows = run_sweep(base, "eps_a", {0.04, 0.02, 0.01}, 0, 0.05);
  REQUIRE(rows.size() == 3);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CAPTURE(k);
    CHECK(rows[k].status == "ok");
    CHECK(rows[k].all_in_set);
    CHECK(rows[k].gradient_calls == 0);
    if (k > 0) CHECK(rows[k].terminal_error <= 1.2 * rows[k - 1].terminal_error);
  }
  std::ostringstream csv;
  write_sweep_csv(csv, "eps_a", rows);
  CHECK(csv.str().rfind("eps_a,status,terminal_error,limsup_tracking_error,max_constraint_violation,", 0) == 0);
}

TEST_CASE("single-value sweep reproduces the run summary") {
  const fs::path dir = scratch("single");
  CommandOptions opt;
  opt.config = kDir + "/regional.ini";
  opt.out_dir = dir.string();
  std::ostringstream out, err;
  REQUIRE(cmd_run(opt, out, err) == kExitOk);
  const std::string report = read_file(dir / "regional_report.txt");

  const Scenario base = load_scenario(opt.config);
  const auto rows = run_sweep(base, "eps_a", {base.algorithm.gains.eps_a}, 1, 0.05);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].terminal_error == doctest::Approx(report_value(report, "terminal_error")).epsilon(1e-9));
  CHECK(rows[0].limsup_tracking_error ==
        doctest::Approx(report_value(report, "limsup_tracking_error")).epsilon(1e-9));
  CHECK(static_cast<double>(rows[0].oracle_calls) == report_value(report, "calls_f") + report_value(report, "calls_g"));

  opt.param = "eps_a";
  opt.values = "0.01";
  std::ostringstream sweep_out;
  CHECK(cmd_sweep(opt, sweep_out, err) == kExitOk);
  CHECK(fs::exists(dir / "regional_sweep_eps_a.csv"));
}

TEST_CASE("dwell-time sweep on the switching scenario") {
  const Scenario base = load_scenario(kDir + "/switching.ini");
  const auto rows = run_sweep(base, "tau_d", {1, 5, 20}, 0, 0.05);
  REQUIRE(rows.size() == 3);
  CHECK(rows[2].converged);
  for (std::size_t k = 1; k < rows.size(); ++k)
    if (rows[k - 1].converged) CHECK(rows[k].converged);
}

TEST_CASE("tracking error is monotone in the drift rate") {
  // The static baseline sits on the boundary, so it is not comparable; only moving targets are swept.
  const Scenario base = load_scenario(kDir + "/example1_tracking.ini");
  const auto rows = run_sweep(base, "eps_theta", {5e-3, 1e-2, 2e-2}, 0, 0.05);
  REQUIRE(rows.size() == 3);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CAPTURE(k);
    CHECK(rows[k].all_in_set);
    CHECK(rows[k].limsup_tracking_error <= 0.1);
    if (k > 0) CHECK(rows[k].limsup_tracking_error >= rows[k - 1].limsup_tracking_error);
  }
}

TEST_CASE("compare command") {
  const fs::path dir = scratch("compare");
  std::ostringstream out, err;
  CommandOptions opt;
  opt.out_dir = dir.string();

  SUBCASE("averaged and model flows on the static problem") {
    opt.config = kDir + "/example1_static.ini";
    REQUIRE(cmd_compare(opt, out, err) == kExitOk);
    const std::string text = out.str();
    const double zo_avg = report_value(text, "sup_distance.1_pgzo.2_average_gzo");
    const double zo_target = report_value(text, "sup_distance.1_pgzo.3_target_grad");
    const double avg_target = report_value(text, "sup_distance.2_average_gzo.3_target_grad");
    CHECK(zo_avg < zo_target);
    CHECK(zo_avg < avg_target);
    CHECK(report_value(text, "1_pgzo.calls_grad_f") == 0.0);
    CHECK(report_value(text, "3_target_grad.calls_grad_f") > 0.0);
    CHECK(fs::exists(dir / "example1_static_compare.txt"));
    CHECK(fs::exists(dir / "example1_static_compare.csv"));
  }
  SUBCASE("an algorithm against itself") {
    std::string text = read_file(kDir + "/example1_static.ini");
    text = with_replaced(text, "algorithms = pgzo, average_gzo, target_grad", "algorithms = pgzo, pgzo");
    text = with_replaced(text, "t_end = 10", "t_end = 1");
    opt.config = write_file(dir / "twice.ini", text);
    REQUIRE(cmd_compare(opt, out, err) == kExitOk);
    CHECK(report_value(out.str(), "sup_distance.1_pgzo.2_pgzo") == 0.0);
  }
  SUBCASE("primal-dual against the saddle flow") {
    opt.config = kDir + "/desk_kkt.ini";
    REQUIRE(cmd_compare(opt, out, err) == kExitOk);
    CHECK(report_value(out.str(), "terminal_distance.1_ppdzo.2_target_saddle") <= 0.05);
  }
}
