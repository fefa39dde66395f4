#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fbflow/cli.hpp"
#include "fbflow/expr.hpp"

using namespace fbflow;
namespace fs = std::filesystem;

namespace {
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string config_error(const nlohmann::json& j) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    return e.what();
  }
  return "";
}
}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("expression evaluation") {
    CHECK(expression_eval("y^3*(1-y^2)^3", 0.0, 0.5) == 0.052734375);
    CHECK(std::abs(expression_eval("sin(pi*y)", 0.0, 1.0)) <= 1e-15);
    CHECK(expression_eval("-2^2", 0, 0) == -4.0);
    CHECK(expression_eval("2^3^2", 0, 0) == 512.0);
    CHECK(expression_eval("exp(0) + cos(0)*e - x/4", 2.0, 0.0) == doctest::Approx(1.0 + 2.718281828459045 - 0.5));
    try {
      expression_eval("x*", 0, 0);
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Config);
      CHECK(std::string(e.what()).find("position 2") != std::string::npos);
    }
    CHECK_THROWS_AS(expression_eval("sin(x", 0, 0), Error);
    CHECK_THROWS_AS(expression_eval("foo", 0, 0), Error);
  }

  TEST_CASE("config hash") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    const nlohmann::json a = nlohmann::json::parse(R"({"grid": {"nx": 9, "ny": 9}, "data": {"preset": "zero"}})");
    const nlohmann::json b = nlohmann::json::parse(R"({"data": {"preset": "zero"}, "grid": {"ny": 9, "nx": 9}})");
    CHECK(parse_config(a).hash == parse_config(b).hash);
  }

  TEST_CASE("schema validation") {
    CHECK(config_error(nlohmann::json::parse(R"({"data": {}})")).find("'grid'") != std::string::npos);
    CHECK(config_error(nlohmann::json::parse(R"({"grid": {"nx": 9}, "bogus": 1})")).find("'bogus'") !=
          std::string::npos);
    CHECK(config_error(nlohmann::json::parse(R"({"grid": {"nx": 9, "spacing": 2}})")).find("grid.spacing") !=
          std::string::npos);
    CHECK(config_error(nlohmann::json::parse(R"({"grid": {"nx": 9}, "data": {"f": "x*"}})")).find("data.f") !=
          std::string::npos);
    CHECK(config_error(nlohmann::json::parse(R"({"grid": {"nx": 9}, "problem": "heat"})")).find("problem") !=
          std::string::npos);
    CHECK(config_error(nlohmann::json::parse(R"({"grid": {"nx": "9"}})")).find("grid.nx") != std::string::npos);
  }

  TEST_CASE("zero data run writes a zero field") {
    const fs::path out = fs::temp_directory_path() / "fbflow_cli_zero";
    fs::remove_all(out);
    std::ostringstream log;
    RunOptions o{"solve-linear", std::string(FBFLOW_SOURCE_DIR) + "/configs/zero_linear.json", out.string(), true, 1};
    CHECK(run(o, log) == 0);
    const Field u = read_field_csv((out / "u.csv").string(), load_config(o.config_path).grid());
    CHECK(u.max_abs() == 0.0);
    const auto rep = nlohmann::json::parse(slurp(out / "report.json"));
    CHECK(rep["config_hash"] == load_config(o.config_path).hash);
    CHECK(slurp(out / "u.csv").find("# config_hash=" + rep["config_hash"].get<std::string>()) != std::string::npos);
  }

  TEST_CASE("missing grid exits with a config error") {
    std::ostringstream log;
    RunOptions o{"solve-linear", std::string(FBFLOW_SOURCE_DIR) + "/configs/missing_grid.json",
                 (fs::temp_directory_path() / "fbflow_cli_missing").string(), true, 1};
    CHECK(run(o, log) == 1);
    CHECK(log.str().find("'grid'") != std::string::npos);
  }

  TEST_CASE("subcommand and problem kind must agree") {
    std::ostringstream log;
    RunOptions o{"dual", std::string(FBFLOW_SOURCE_DIR) + "/configs/zero_linear.json",
                 (fs::temp_directory_path() / "fbflow_cli_mismatch").string(), true, 1};
    CHECK(run(o, log) == 1);
  }

  TEST_CASE("numerical failure exits with 2") {
    const fs::path dir = fs::temp_directory_path() / "fbflow_cli_bad";
    fs::create_directories(dir);
    {
      std::ofstream c(dir / "bad.json");
      c << R"({"grid": {"nx": 33, "ny": 33}, "coefficients": {"alpha": "-1"}, "data": {"preset": "zero"}})";
    }
    std::ostringstream log;
    RunOptions o{"solve-linear", (dir / "bad.json").string(), (dir / "out").string(), true, 1};
    const int code = run(o, log);
    CHECK((code == 1 || code == 2));
    CHECK(log.str().find("degenerate") != std::string::npos);
  }

  TEST_CASE("decompose config on the singular source") {
    const fs::path out = fs::temp_directory_path() / "fbflow_cli_decompose";
    std::ostringstream log;
    RunOptions o{"decompose", std::string(FBFLOW_SOURCE_DIR) + "/configs/decompose_fbar0.json", out.string(), true, 1};
    CHECK(run(o, log) == 0);
    const auto rep = nlohmann::json::parse(slurp(out / "report.json"));
    CHECK(rep["c0"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(rep["c1"].get<double>()) <= 1e-6);
  }

  TEST_CASE("reference mode artifacts are bitwise reproducible") {
    const std::string cfg = std::string(FBFLOW_SOURCE_DIR) + "/configs/nonlinear_random.json";
    std::ostringstream log;
    const fs::path a = fs::temp_directory_path() / "fbflow_cli_det_a", b = fs::temp_directory_path() / "fbflow_cli_det_b";
    CHECK(run({"solve-nonlinear", cfg, a.string(), true, 1}, log) == 0);
    CHECK(run({"solve-nonlinear", cfg, b.string(), true, 1}, log) == 0);
    for (const char* f : {"u.csv", "report.json", "iterations.jsonl"}) CHECK(slurp(a / f) == slurp(b / f));
  }
}
