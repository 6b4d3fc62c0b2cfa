#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sqrtdiff/cli.hpp"
#include "sqrtdiff/error.hpp"

#include <clocale>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

using namespace sqrtdiff;
using namespace sqrtdiff::cli;
namespace fs = std::filesystem;

namespace {

std::string scratch(const std::string& name)
{
  const auto dir = fs::temp_directory_path() / "sqrtdiff_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* minimal =
  R"({"model": {"family": "constant", "a": 1.0, "b": 1.0, "gamma": 1.0, "alpha": 0.5},
      "task": {"command": "classify"}})";

ErrorKind kind_of(const std::string& text, std::string* message = nullptr)
{
  try {
    parse_config(text);
  } catch (const Error& e) {
    if (message)
      *message = e.what();
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::invalid_argument;
}

} // namespace

TEST_CASE("minimal config gets the documented defaults")
{
  const auto c = parse_config(minimal);
  CHECK(c.numerics.steps == 512);
  CHECK(c.numerics.paths == 100000);
  CHECK(c.numerics.gamma0 == 0.25);
  CHECK(c.numerics.kappa == 1.0);
  CHECK(c.seed == 0);
  CHECK(c.task.command == "classify");
  CHECK(c.task.params["cpoint"] == 1.0);
}

TEST_CASE("config round-trips through its canonical form")
{
  const auto c = parse_config(
    R"({"model": {"family": "tabulated", "knots": [0, 1, 2, 4], "a": [1, 1, 2, 2],
                  "b": [1, 1, 1, 1], "gamma": [1, 1.5, 1.5, 1], "alpha": 0.6},
        "task": {"command": "simulate", "scheme": "euler", "x0": 2},
        "numerics": {"steps": 64, "paths": 1e3}, "seed": 18446744073709551615,
        "output": "somewhere"})");
  CHECK(c.seed == std::numeric_limits<std::uint64_t>::max());
  CHECK(c.numerics.paths == 1000);
  const auto j = to_json(c);
  const auto again = config_from_json(j);
  CHECK(to_json(again) == j);
  CHECK(config_hash(again) == config_hash(c));
  CHECK(config_hash(c).size() == 16);
  auto other = c;
  other.seed = 1;
  CHECK(config_hash(other) != config_hash(c));
}

TEST_CASE("validation errors name the field")
{
  std::string msg;
  CHECK(kind_of(R"({"model": {"alpha": 1.5}, "task": {"command": "classify"}})", &msg) ==
        ErrorKind::validation_error);
  CHECK(msg.find("alpha must lie in [0.5, 1)") != std::string::npos);

  CHECK(kind_of(R"({"foo": 1, "task": {"command": "classify"}})", &msg) == ErrorKind::validation_error);
  CHECK(msg.find("foo") != std::string::npos);
  CHECK(kind_of(R"({"task": {"command": "classify", "foo": 1}})", &msg) == ErrorKind::validation_error);
  CHECK(msg.find("task.foo") != std::string::npos);
  CHECK(kind_of(R"({"task": {"command": "bounds", "m": 1.5}})", &msg) == ErrorKind::validation_error);
  CHECK(msg.find("task.m") != std::string::npos);
  CHECK(kind_of(R"({"task": {"command": "nope"}})") == ErrorKind::validation_error);
  CHECK(kind_of(R"({"model": {"a": 1}})", &msg) == ErrorKind::validation_error);
  CHECK(msg.find("task") != std::string::npos);
  CHECK(kind_of(R"({"numerics": {"steps": 0}, "task": {"command": "classify"}})", &msg) ==
        ErrorKind::validation_error);
  CHECK(msg.find("numerics.steps") != std::string::npos);
}

TEST_CASE("parse errors carry line and column")
{
  std::string msg;
  CHECK(kind_of("{\n  \"task\": {\"command\": \"classify\"},\n  oops\n}", &msg) == ErrorKind::parse_error);
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("column") != std::string::npos);
}

TEST_CASE("csv: header-only, exact round trip, locale independence")
{
  const auto dir = scratch("csv");
  const std::string empty = dir + "/empty.csv";
  write_csv({}, {}, {"y", "pdf"}, empty);
  CHECK(slurp(empty) == "y,pdf\n");

  std::vector<double> x = {0.0, 1.0 / 3.0, -2.5e-300, 1e300, 0.1, 6.02214076e23};
  std::vector<double> y = {std::nextafter(1.0, 2.0), M_PI, -0.0, 5e-324, 123456789.125, 2.0 / 3.0};
  const std::string path = dir + "/values.csv";
  write_csv(x, y, {"grid", "value"}, path, {"hello"});
  const auto t = read_csv(path);
  REQUIRE(t.columns.size() == 2);
  CHECK(t.header == std::vector<std::string>{"grid", "value"});
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(t.columns[0][i] == x[i]);
    CHECK(t.columns[1][i] == y[i]);
  }
  CHECK(slurp(path).rfind("# hello\n", 0) == 0);

  const auto before = slurp(path);
  if (std::setlocale(LC_ALL, "de_DE.UTF-8") || std::setlocale(LC_ALL, "fr_FR.UTF-8")) {
    write_csv(x, y, {"grid", "value"}, path, {"hello"});
    CHECK(slurp(path) == before);
    std::setlocale(LC_ALL, "C");
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");

  CHECK_THROWS_AS(write_csv(x, std::vector<double>{1.0}, {"a", "b"}, path), Error);
  try {
    write_csv(x, y, {"a", "b"}, "/proc/nonexistent/x.csv");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::io_error);
  }
}

TEST_CASE("classify reports the Feller case as unattainable")
{
  auto c = parse_config(minimal);
  c.output = scratch("classify");
  const auto r = run(c);
  CHECK(r.exit_code == 0);
  CHECK(r.report["classification"] == "unattainable");
  const auto written = nlohmann::json::parse(slurp(c.output + "/classify.json"));
  CHECK(written["classification"] == "unattainable");
  CHECK(written["config_hash"] == config_hash(c));
  CHECK(written["version"] == std::string(version));
  CHECK(config_from_json(written["config"]).task.command == "classify");
  CHECK(!fs::exists(c.output + "/classify.json.tmp"));
}

TEST_CASE("bounds with unit norms")
{
  auto c = parse_config(R"({"task": {"command": "bounds", "m": 1, "k": 3}})");
  c.output = scratch("bounds");
  const auto r = run(c);
  CHECK(r.exit_code == 0);
  CHECK(r.report["values"]["phi_k"] == 147);
  CHECK(r.report["values"]["phi_prime_k"] == 0);
  CHECK(r.report["values"]["q_prime_k"].get<double>() == 832.0);
  // 1 + 5^1 + 2^4 with every norm 1
  CHECK(r.report["values"]["K_m"]["value"].get<double>() == doctest::Approx(22.0).epsilon(1e-12));
  CHECK(r.report["saturated"].contains("any"));
  CHECK(r.report["inputs"]["m"] == 1);
}

TEST_CASE("reruns give byte-identical artifacts")
{
  auto c = parse_config(R"({"task": {"command": "estimate", "method": "fourier-local", "n": 41,
                                      "y_min": 0.2, "y_max": 1.8},
                            "numerics": {"steps": 32, "paths": 4000, "xi_max": 64}, "seed": 5})");
  c.output = scratch("rerun");
  const auto first = run(c);
  REQUIRE(first.exit_code == 0);
  REQUIRE(first.artifacts.size() == 2);
  std::vector<std::string> bytes;
  for (const auto& a : first.artifacts)
    bytes.push_back(slurp(a));
  const auto second = run(c);
  REQUIRE(second.artifacts == first.artifacts);
  for (std::size_t i = 0; i < bytes.size(); ++i)
    CHECK(slurp(second.artifacts[i]) == bytes[i]);
  CHECK(bytes[1].find("config_hash " + config_hash(c)) != std::string::npos);
}

TEST_CASE("module errors become exit code 3 with a structured error")
{
  auto c = parse_config(R"({"model": {"alpha": 0.75}, "task": {"command": "cir-density"}})");
  c.output = scratch("error");
  const auto r = run(c);
  CHECK(r.exit_code == 3);
  CHECK(r.report["error"]["kind"] == "OutOfRegime");
  const auto written = nlohmann::json::parse(slurp(c.output + "/error.json"));
  CHECK(written["error"]["kind"] == "OutOfRegime");
  CHECK(written["config_hash"] == config_hash(c));

  auto s = parse_config(R"({"model": {"alpha": 0.75}, "task": {"command": "simulate", "scheme": "exact"},
                            "numerics": {"paths": 10}})");
  s.output = c.output;
  CHECK(run(s).report["error"]["kind"] == "SchemeMismatch");
}

TEST_CASE("every subcommand runs on a small unit CIR")
{
  const auto dir = scratch("all");
  const std::vector<std::pair<std::string, int>> cases = {
    {R"({"command": "cir-density", "n": 101})", 0},
    {R"({"command": "simulate", "write_paths": true, "record_points": 5})", 0},
    {R"({"command": "estimate", "method": "kde"})", 0},
    {R"({"command": "estimate", "method": "kde-log", "scheme": "exact"})", 0},
    {R"({"command": "verify-tail"})", 0},
    {R"({"command": "verify-zero"})", 0},
  };
  for (const auto& [task, expected] : cases) {
    auto j = nlohmann::json::parse(R"({"numerics": {"steps": 64, "paths": 2000}})");
    j["task"] = nlohmann::json::parse(task);
    j["output"] = dir;
    const auto r = run(config_from_json(j));
    INFO(task, " -> ", r.report.dump());
    CHECK(r.exit_code == expected);
    for (const auto& a : r.artifacts)
      CHECK(fs::exists(a));
  }
  const auto mean = read_csv(dir + "/simulate_mean.csv");
  CHECK(mean.columns[0].size() == 5);
  const auto paths = read_csv(dir + "/simulate_paths.csv");
  CHECK(paths.columns[0].size() == 2000);
  CHECK(paths.header.size() == 9);
  const auto density = read_csv(dir + "/cir_density.csv");
  CHECK(density.header == std::vector<std::string>{"y", "pdf"});
}
