#pragma once

#include <array>
#include <memory>
#include <vector>

#include "fbflow/ortho.hpp"

namespace fbflow {

/// u0 = delta0(y) chi((x-x0)/L) + delta1(y) chi((x1-x)/L), chi = 1 on [0,1/3], 0 beyond 1/2.
Field initial_guess(const Trace& delta0, const Trace& delta1, const GridPtr& grid);

/// Cubic Hermite interpolation of one grid line with five-point slopes.
class LineInterpolant {
 public:
  LineInterpolant(std::vector<double> s, std::vector<double> v);
  double operator()(double t) const;
  double front() const { return s_.front(); }
  double back() const { return s_.back(); }

 private:
  std::vector<double> s_, v_, d_;
};

struct ChangeOfVariables {
  GridPtr grid;
  Field u;  // u_n on the (x,y) grid
  Field Y;  // Y(x,z) with Y + u(x,Y) = z
  CoefficientSet coeffs;
  bool identity = false;
  double root_residual = 0.0;  // max |Y + u(x,Y) - z|
  double min_slope = 1.0;      // min (1 + d_y u)

  /// F(x, y) -> F(x, Y(x,z))
  Field pullback(const Field& f) const;
  /// Trace on Sigma_i composed with Y(x_i, .)
  Trace pullback(const Trace& t) const;
  /// G(x, z) -> G(x, y + u(x,y))
  Field pushforward(const Field& g) const;
};

ChangeOfVariables change_of_variables(const Field& u_n);

struct NonlinearOptions {
  double tol = 1e-9;
  std::size_t maxit = 30;
  double eta = 0.05;              // smallness threshold on the data norm (warning above)
  double dual_refresh_ratio = 0.1;
  double max_mn_cond = 1e6;
  bool zero_initial_guess = false;
};

struct StepRecord {
  std::size_t n = 0;
  double diff_qhalf = 0.0;
  double diff_l2 = 0.0;
  double nu0 = 0.0;
  double nu1 = 0.0;
  double mn_cond = 0.0;
  double mn_dev = 0.0;  // max |M_n - I|
  std::array<double, 2> ell_post{};
  bool fresh_dual = true;

  nlohmann::json to_json() const;
};

struct IterationState {
  std::size_t n = 0;
  Field u;
  double nu0 = 0.0;
  double nu1 = 0.0;
  std::vector<StepRecord> history;
  bool converged = false;
  std::shared_ptr<const FunctionalEvaluator> evaluator;  // functionals of the last step
  double last_refresh_diff = -1.0;  // step difference when the dual was last solved
  bool force_fresh = false;

  std::vector<double> ratios() const;
};

/// Corrector sources f^i evaluated at a point (analytic, no interpolation).
double corrector_source(const CorrectorBasis& basis, int i, double x, double y);

/// One step of the scheme: functionals at u_n, corrector coefficients, solve, push forward.
IterationState iterate_step(const IterationState& state, const DataTriple& triple, const CorrectorBasis& basis,
                            const NonlinearOptions& opt = {});

struct NonlinearResult {
  Field u;
  double nu0 = 0.0;
  double nu1 = 0.0;
  IterationState state;
  double residual_l2 = 0.0;
  double residual_inf = 0.0;

  nlohmann::json report() const;
};

NonlinearResult nonlinear_solve(const DataTriple& triple, const CorrectorBasis& basis,
                                const NonlinearOptions& opt = {});

/// Interior residual of (y+u) u_x - u_yy - rhs with the solver's upwind stencils.
Field nonlinear_residual(const Field& u, const Field& rhs);

/// f + nu0 f^0 + nu1 f^1 on the grid.
Field total_source(const DataTriple& triple, const CorrectorBasis& basis, double nu0, double nu1);

struct ManifoldPoint {
  DataTriple xi_perp;
  DataTriple xi;
  double nu0 = 0.0;
  double nu1 = 0.0;
  NonlinearResult solution;
  std::array<double, 2> inner{};          // <Xi^k, Xi>_H
  double invariant_gap = 0.0;             // max_k |<Xi^k,Xi> - sum_j G_kj nu^j|
  double unit_gram_gap = 0.0;             // max_k |<Xi^k,Xi> - nu^k|
  bool projected = false;
};

/// Removes the span of the corrector triples in the data inner product.
DataTriple project_perp(const DataTriple& xi, const CorrectorBasis& basis);

ManifoldPoint manifold_point(const DataTriple& xi_perp, const CorrectorBasis& basis,
                             const NonlinearOptions& opt = {});

/// Unit direction with <Xi^k, .> = 0 and shear functionals zero, built from a random triple.
DataTriple tangent_direction(const CorrectorBasis& basis, const FunctionalEvaluator& shear, std::uint64_t seed);

}  // namespace fbflow
