#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fbflow/nonlinear.hpp"
#include "fbflow/verify.hpp"

namespace fbflow {

enum class ProblemKind { LinearShear, LinearGeneral, Nonlinear, Dual, Profiles, Decompose, Verify };

std::string to_string(ProblemKind k);
ProblemKind problem_kind_from_string(const std::string& s);

/// Field data: closed-form expression or a CSV file (x,y,value per node).
struct FieldSpec {
  std::string expression;
  std::string csv;
};

struct DataSpec {
  std::string preset = "expressions";  // expressions | zero | fbar0 | fbar1 | random | smooth
  FieldSpec f;
  std::string delta0 = "0";  // expression in y
  std::string delta1 = "0";
  std::uint64_t seed = 1;
  double scale = 1.0;
};

struct CoefficientSpec {
  std::string alpha = "1", gamma1 = "0", gamma2 = "0";
};

struct Tolerances {
  double nonlinear_tol = 1e-9;
  std::size_t maxit = 30;
  double eta = 0.05;
  double dual_refresh_ratio = 0.1;
  double max_mn_cond = 1e6;
  double jump_tol = 1e-6;
  double compat_tol = 1e-3;
};

struct ProfileSpec {
  int k = 0;
  double T = 8.0;
  std::size_t n = 4000;
  double cutoff_radius = 0.45;
};

struct VerifySpec {
  std::vector<std::size_t> sizes{33, 65, 129};
  std::vector<std::size_t> dichotomy_sizes{129, 257, 513};
  std::vector<std::string> studies{"shear", "variable", "nonlinear", "functionals", "symmetry", "dichotomy"};
  double floor = 0.9;
};

struct RunConfig {
  std::optional<ProblemKind> problem;
  Domain domain{0.0, 1.0};
  std::size_t nx = 0, ny = 0;
  Grading grading = Grading::corner();
  DataSpec data;
  std::optional<CoefficientSpec> coefficients;
  Tolerances tol;
  ProfileSpec profiles;
  VerifySpec verify;
  double fit_rmin = 0.05, fit_rmax = 0.15;
  std::string output_dir = "fbflow-out";
  std::string base_dir;  // directory of the config file, for relative CSV paths
  std::string hash;      // FNV-1a of the canonical JSON

  GridPtr grid() const;
  DataTriple triple(const GridPtr& grid) const;
  CoefficientSet coefficient_set(const GridPtr& grid) const;
  NonlinearOptions nonlinear_options() const;
};

/// Validates the JSON against the schema; unknown or malformed keys raise a config Error naming the field.
RunConfig parse_config(const nlohmann::json& j, const std::string& base_dir = "");
RunConfig load_config(const std::string& path);

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace fbflow
