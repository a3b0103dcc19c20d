#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "swopt/config.hpp"
#include "swopt/expression.hpp"
#include "swopt/output.hpp"
#include "swopt/scenarios.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

using namespace swopt;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("swopt_test_cli_io") / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string error_of(const std::string& text) {
  try {
    parse_config_string(text).validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

// coarse half circle, short horizon
const char* kCoarse =
    "[mesh]\nh = 0.6\n"
    "[discretization]\nT = 0.02\ndt = 2e-3\n";

}  // namespace

TEST_CASE("empty config gives the half-circle defaults") {
  const RunConfig c = parse_config_string("");
  CHECK(c.scenario == Scenario::Forward);
  CHECK(c.physics.g == 9.81);
  CHECK(c.physics.phi_omega == 1.0);
  CHECK(c.physics.phi_obstacle == 0.4);
  CHECK(c.physics.mu_f == 1e-2);
  CHECK(c.discretization.c_ip == 20.0);
  CHECK(c.discretization.T == 2.0);
  CHECK(c.discretization.dt == 2e-3);
  CHECK(c.discretization.theta == 1.0);
  CHECK(c.objective.nu2 == 1e-4);
  CHECK(c.objective.nu3 == 1e-4);
  CHECK(c.objective.nu4 == 1e-2);
  CHECK(c.optimizer.rho0 == 1.5);
  CHECK(c.optimizer.mu_min == 10.0);
  CHECK(c.optimizer.mu_max == 100.0);
  CHECK(c.optimizer.max_iterations == 25);
  CHECK(c.mesh.radius == 2.5);
  CHECK(c.mesh.obstacle_radius == 0.25);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("validation errors name the key") {
  CHECK(error_of("[discretization]\ndt = 0\n").find("discretization.dt") != std::string::npos);
  CHECK(error_of("[discretization]\ndt = 3e-3\nT = 0.01\n").find("must divide T") != std::string::npos);
  const std::string typo = error_of("[physics]\nporsity = 0.4\n");
  CHECK(typo.find("porsity") != std::string::npos);
  CHECK(error_of("[quantum]\nx = 1\n").find("quantum") != std::string::npos);
  CHECK(error_of("[physics]\ng = fast\n").find("physics.g") != std::string::npos);
  CHECK(error_of("[physics]\nsediment = 1 + (x\n").find("physics.sediment") != std::string::npos);
  CHECK(error_of("[optimizer]\nshrink = 1.5\n").find("optimizer") != std::string::npos);
  CHECK(error_of("[run]\nscenario = fly\n") != "");
  CHECK(error_of("[physics]\ng = 9.81\n") == "");
}

TEST_CASE("config echo round trips") {
  RunConfig c = parse_config_string(
      "[run]\nscenario = smoothing-study\n"
      "[physics]\nmu_f = 0.0125\nsediment = 0.5 - 0.25*y\n"
      "[smoothing]\nalphas = 0.06, 0.01\n"
      "[objective]\nnu4 = 0.1\n");
  CHECK(c.scenario == Scenario::SmoothingStudy);
  CHECK(c.physics.mu_f == 0.0125);
  REQUIRE(c.smoothing.alphas.size() == 2);
  CHECK(c.smoothing.alphas[1] == 0.01);
  const std::string e1 = config_echo(c);
  const std::string e2 = config_echo(parse_config_string(e1));
  CHECK(e1 == e2);
  // the echo of the defaults is itself a full default config
  CHECK(config_echo(parse_config_string(config_echo(RunConfig{}))) == config_echo(RunConfig{}));
  // 17 significant digits survive
  c.physics.mu_f = 0.1 + 0.2;
  CHECK(parse_config_string(config_echo(c)).physics.mu_f == 0.1 + 0.2);
}

TEST_CASE("expression parser") {
  CHECK(Expression("1 + 2*3")(0, 0) == 7);
  CHECK(Expression("2^3^2")(0, 0) == 512);
  CHECK(Expression("-2^2")(0, 0) == -4);
  CHECK(Expression("(1 + 2)*3")(0, 0) == 9);
  CHECK(Expression("8/2/2")(0, 0) == 2);
  CHECK(Expression("x - y")(3, 5) == -2);
  CHECK(Expression("0.5 - 0.25*y")(7, 2) == 0.0);
  CHECK(Expression("exp(0) + cos(0) + sin(0)")(0, 0) == 2);
  CHECK(Expression("sqrt(abs(-16))")(0, 0) == 4);
  CHECK(Expression("step(x - 0.5)")(0.5, 0) == 1);
  CHECK(Expression("step(x - 0.5)")(0.49, 0) == 0);
  CHECK(Expression("1e-3*x")(2, 0) == doctest::Approx(2e-3).epsilon(1e-15));
  const Expression g("1 + exp(-15*x^2 - 15*(y - 1)^2)");
  CHECK(g(0.3, 0.7) == doctest::Approx(1 + std::exp(-15 * 0.09 - 15 * 0.09)).epsilon(1e-15));
  CHECK(Expression()(1, 2) == 0);
  for (const char* bad : {"", "1 +", "(1", "1)", "foo(1)", "z", "2 ** 3", "exp 1"})
    CHECK_THROWS_AS(Expression{bad}, ConfigError);
}

TEST_CASE("csv and number formatting") {
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(format_number(1.0) == "1");
  const fs::path d = scratch("csv");
  {
    CsvWriter w((d / "t.csv").string(), {"a", "b"});
    w.row({1.0, 0.5});
    CHECK_THROWS_AS(w.row({1.0}), Error);
  }
  CHECK(slurp(d / "t.csv") == "a,b\n1,0.5\n");
}

TEST_CASE("vtk writer") {
  const Mesh m = build_half_circle(2.5, Vec2(2.5, 0.5), 0.25, 0.8);
  const fs::path d = scratch("vtk");
  Eigen::MatrixXd p(1, m.n_vertices());
  p.setConstant(2.0);
  Eigen::MatrixXd v(2, m.n_cells());
  v.setZero();
  write_vtk((d / "m.vtk").string(), m, {{"p", p}}, {{"v", v}});
  std::istringstream in(slurp(d / "m.vtk"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "# vtk DataFile Version 3.0");
  int points = -1, cells = -1, types = -1, pd = -1, cd = -1;
  bool scalars = false, vectors = false;
  std::vector<int> cell_types;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string w;
    ls >> w;
    if (w == "POINTS") ls >> points;
    if (w == "CELLS") ls >> cells;
    if (w == "CELL_TYPES") {
      ls >> types;
      for (int k = 0; k < types; ++k) {
        std::getline(in, line);
        cell_types.push_back(std::stoi(line));
      }
    }
    if (w == "POINT_DATA") ls >> pd;
    if (w == "CELL_DATA") ls >> cd;
    if (line == "SCALARS p double 1") scalars = true;
    if (line == "VECTORS v double") vectors = true;
  }
  CHECK(points == m.n_vertices());
  CHECK(cells == m.n_cells());
  CHECK(types == m.n_cells());
  CHECK(pd == m.n_vertices());
  CHECK(cd == m.n_cells());
  CHECK(scalars);
  CHECK(vectors);
  for (int t : cell_types) CHECK(t == 5);

  CHECK_THROWS_AS(write_vtk((d / "bad.vtk").string(), m, {{"p", v}}), Error);

  const Mesh l = build_interval(4, 1.0);
  write_vtk((d / "l.vtk").string(), l);
  CHECK(slurp(d / "l.vtk").find("CELL_TYPES 4\n3\n3\n3\n3\n") != std::string::npos);
}

TEST_CASE("wellbalance-check scenario passes") {
  RunConfig c = parse_config_string(std::string(kCoarse) + "[run]\nscenario = wellbalance-check\n");
  c.output_dir = scratch("wb").string();
  std::ostringstream log;
  CHECK(run_scenario(c, log) == 0);
  MESSAGE(log.str());
  CHECK(log.str().find("max |uh|") != std::string::npos);
  CHECK(fs::exists(fs::path(c.output_dir) / "summary.json"));
  CHECK(fs::exists(fs::path(c.output_dir) / "config_echo.ini"));
  CHECK(slurp(fs::path(c.output_dir) / "summary.json").find("\"passed\": true") != std::string::npos);
}

TEST_CASE("identical configs give byte-identical csv") {
  const RunConfig base = parse_config_string(kCoarse);
  std::string first;
  for (int k = 0; k < 2; ++k) {
    RunConfig c = base;
    c.output_dir = scratch("det" + std::to_string(k)).string();
    std::ostringstream log;
    REQUIRE(run_scenario(c, log) == 0);
    const std::string csv = slurp(fs::path(c.output_dir) / "forward_series.csv");
    CHECK(csv.find("step,t,mass,energy,max_speed,newton_iterations\n") == 0);
    if (k == 0) first = csv;
    else CHECK(csv == first);
  }
}

TEST_CASE("solver failures exit with status 3 and name the stage") {
  RunConfig c = parse_config_string(kCoarse);
  c.mesh.file = "/nonexistent/mesh.msh";
  c.output_dir = scratch("fail").string();
  std::ostringstream log;
  CHECK(run_scenario(c, log) == 3);
  CHECK(log.str().find("error in stage mesh") != std::string::npos);
  CHECK(slurp(fs::path(c.output_dir) / "summary.json").find("failed_stage") != std::string::npos);
}

#ifdef SWOPT_CLI
TEST_CASE("command line exit codes") {
  const fs::path d = scratch("cli");
  std::ofstream(d / "ok.ini") << kCoarse;
  std::ofstream(d / "typo.ini") << "[physics]\nporsity = 0.4\n";
  const std::string cli = SWOPT_CLI;
  auto run = [&](const std::string& args) {
    const int s = std::system((cli + " " + args + " > " + (d / "log.txt").string() + " 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  CHECK(run("wellbalance-check --config " + (d / "ok.ini").string() + " --out " + (d / "wb").string()) == 0);
  CHECK(run("forward --config " + (d / "typo.ini").string()) == 2);
  CHECK(slurp(d / "log.txt").find("porsity") != std::string::npos);
  CHECK(run("teleport") == 2);
  CHECK(run("forward --config " + (d / "missing.ini").string()) == 2);
}
#endif
