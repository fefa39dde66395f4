#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fbflow/nonlinear.hpp"

namespace fbflow {

struct PointValue {
  double u = 0.0, ux = 0.0, uy = 0.0, uyy = 0.0;
};

struct ManufacturedCase {
  enum class Kind { Shear, Variable, Nonlinear };

  std::string name;
  Kind kind = Kind::Shear;
  std::function<PointValue(double, double)> exact;
  // coefficients for the variable case: alpha, gamma1, gamma2 as functions of (x, z)
  std::function<double(double, double)> alpha, gamma1, gamma2;

  DataTriple triple(const GridPtr& grid) const;
  CoefficientSet coefficients(const GridPtr& grid) const;
  Field exact_field(const GridPtr& grid) const;
};

/// u* = y^3 (1-y^2)^3 (1+x)
ManufacturedCase shear_case();
/// same u*, alpha = 1 + 0.1 x (1-y^2), gamma1 = 0.1 cos x, gamma2 = 0.05 x
ManufacturedCase variable_case();
/// u* = eps y^3 (1-y^2)^3 (1 + x/4) for (y+u) u_x - u_yy
ManufacturedCase nonlinear_case(double eps = 1e-2);
ManufacturedCase zero_case();

struct StudyLevel {
  nlohmann::json grid;
  double h = 0.0;
  double err_l2 = 0.0;
  double err_h1y = 0.0;
  nlohmann::json extra = nlohmann::json::object();
};

struct StudyReport {
  std::string name;
  std::vector<StudyLevel> levels;
  double order = 0.0;     // fitted L2 order
  double order_h1 = 0.0;  // fitted L2_x H1_y order
  double floor = 0.9;
  bool pass = false;
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
  void write_csv(const std::string& path) const;
};

/// Least-squares slope of log(err) against log(h).
double fitted_order(const std::vector<double>& h, const std::vector<double>& err);

StudyReport run_manufactured(const ManufacturedCase& c, const std::vector<GridPtr>& grids, double floor = 0.9);

/// Functionals of the manufactured data under refinement (decay expected for regular u*). The fitted
/// order uses the direct route; the dual route converges more slowly on this cancellation.
StudyReport functional_study(const ManufacturedCase& c, const std::vector<GridPtr>& grids, double floor = 0.9);

/// Mirrored data for the involution (x, y) -> (x0 + x1 - x, -y).
DataTriple involute(const DataTriple& t);
double symmetry_check(const DataTriple& triple);

struct DichotomyLevel {
  double h = 0.0;
  std::array<double, 2> ell{};
  std::array<double, 2> raw_strength{};
  std::array<double, 2> reg_strength{};
  double raw_dxdy = 0.0;
  double reg_dxdy = 0.0;
};

/// Singular strengths and mixed-derivative growth with and without the corrector subtraction.
StudyReport dichotomy_experiment(const std::vector<GridPtr>& grids, bool use_fbar = false);

/// Smooth source with zero traces and generically nonzero functionals.
DataTriple smooth_singular_data(const GridPtr& grid);

/// Mixed derivative norm |d_x d_y u|_{L2}.
double mixed_derivative_norm(const Field& u);

/// Grids n x n with the default corner grading.
std::vector<GridPtr> graded_grids(const Domain& d, const std::vector<std::size_t>& sizes, double q = 1.0);

}  // namespace fbflow
