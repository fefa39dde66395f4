#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "fbflow/domain.hpp"

namespace fbflow {

/// Coefficients of z U_x + gamma U_z - alpha U_zz = g with gamma = z gamma1 + gamma2.
struct CoefficientSet {
  enum class Provenance { Shear, FromIterate, Custom };

  Field alpha;
  Field gamma1;
  Field gamma2;
  Provenance provenance = Provenance::Custom;

  static CoefficientSet shear(GridPtr grid);
  const GridPtr& grid() const { return alpha.grid(); }
  Field gamma() const;
  bool is_shear() const;
  /// Throws "degenerate diffusion" when alpha <= 0 somewhere.
  void validate() const;

  struct Smallness {
    double alpha_dev = 0.0;  // sup |alpha - 1|
    double gamma1_sup = 0.0;
    double gamma2_sup = 0.0;
    bool within(double eps) const { return alpha_dev <= eps && gamma1_sup <= eps && gamma2_sup <= eps; }
  };
  Smallness smallness() const;
};

struct LinearProblem {
  CoefficientSet coeffs;
  DataTriple data;
};

struct SparseSystem {
  std::size_t n = 0;
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs;
  std::vector<char> dirichlet;  // 1 on identity rows
  std::string ordering = "x-outer,y-inner";

  Eigen::SparseMatrix<double> matrix() const;
};

SparseSystem assemble(const LinearProblem& problem);
/// Adjoint operator -z d_x - d_z(gamma .) - d_zz(alpha .) with Dirichlet rows at x1 (z>0), x0 (z<0), z=+-1.
SparseSystem assemble_adjoint(const CoefficientSet& coeffs);

struct SolveStats {
  double residual_inf = 0.0;
  double zdxu_l2 = 0.0;
  double dzz_l2 = 0.0;
  std::size_t n_unknowns = 0;
  double factor_time_ms = 0.0;

  nlohmann::json to_json() const;
};

/// Factorized operator for one coefficient set, reused across right-hand sides.
class LinearOperator {
 public:
  explicit LinearOperator(const CoefficientSet& coeffs, bool adjoint = false);
  ~LinearOperator();
  LinearOperator(const LinearOperator&) = delete;
  LinearOperator& operator=(const LinearOperator&) = delete;

  const CoefficientSet& coeffs() const { return coeffs_; }
  bool adjoint() const { return adjoint_; }
  double factor_time_ms() const { return factor_ms_; }

  /// Solves the forward problem with data (g, delta0, delta1).
  Field solve(const DataTriple& data, SolveStats* stats = nullptr) const;
  /// Solves with a full right-hand side; Dirichlet rows carry boundary values.
  Eigen::VectorXd solve_rhs(const Eigen::VectorXd& rhs, double* residual_inf = nullptr) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::VectorXd rhs_for(const DataTriple& data) const;

 private:
  struct Impl;
  CoefficientSet coeffs_;
  bool adjoint_;
  double factor_ms_ = 0.0;
  std::unique_ptr<Impl> impl_;
};

struct LinearSolution {
  Field u;
  SolveStats stats;
};

LinearSolution solve_linear(const LinearProblem& problem);

/// Adjoint solution with prescribed jumps across y = 0. phi_plus is meaningful for y >= 0 and
/// phi_minus for y <= 0; both are stored on the whole grid as smooth extensions.
struct DualProfile {
  int j = 0;
  Field psi;        // continuous remainder
  Field phi_plus;   // psi + lifting on the upper side
  Field phi_minus;  // psi + lifting on the lower side
  std::vector<double> jump_target;        // prescribed [phi] along y = 0
  std::vector<double> slope_jump_target;  // prescribed [d_y phi]
  std::vector<double> jump;               // measured
  std::vector<double> slope_jump;
  double jump_error = 0.0;
  double residual_inf = 0.0;
};

/// Septic cutoff used for the jump lifting: 1 for |y| <= 0.05, 0 for |y| >= 1/4.
double lifting_cutoff(double y);

DualProfile solve_adjoint_with_jumps(int j, const CoefficientSet& coeffs, double jump_tol = 1e-6);
/// Reuses a factorized adjoint operator.
DualProfile solve_adjoint_with_jumps(int j, const LinearOperator& adjoint_op, double jump_tol = 1e-6);

namespace detail {
/// Doubled-unknown variant: separate values above and below y = 0 tied by the jump conditions.
/// Used only for cross-validation.
DualProfile solve_adjoint_doubled(int j, const CoefficientSet& coeffs);
}  // namespace detail

/// z u_x + gamma u_z - alpha u_zz - g at non-Dirichlet nodes, zero elsewhere.
Field residual(const Field& u, const LinearProblem& problem);
/// Discrete adjoint operator applied to phi at non-Dirichlet adjoint nodes.
Field adjoint_residual(const Field& phi, const CoefficientSet& coeffs);

/// Weak form of the shear problem tested against v (v must vanish off the inflow boundary).
double weak_residual(const Field& u, const LinearProblem& problem, const Field& v);

}  // namespace fbflow
