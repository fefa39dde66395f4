#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>

#include <Eigen/Dense>

#include "fbflow/linearfb.hpp"
#include "fbflow/profiles.hpp"

namespace fbflow {

struct DerivedData {
  Trace Delta0;  // on Sigma0
  Trace Delta1;  // on Sigma1
  Field h0;      // used on y >= 0
  Field h1;      // used on y <= 0
};

/// Quotients Delta_i and sources h_i of the x-differentiated problem.
DerivedData derived_data(const DataTriple& triple, const CoefficientSet& coeffs, double tol = 1e-2);

/// Both functional routes for one coefficient set. Factorizations and dual profiles are built on
/// first use and shared afterwards (write-once, safe for concurrent readers).
class FunctionalEvaluator {
 public:
  explicit FunctionalEvaluator(CoefficientSet coeffs);
  ~FunctionalEvaluator();

  const CoefficientSet& coeffs() const { return coeffs_; }
  const GridPtr& grid() const { return coeffs_.grid(); }

  double ell_dual(int j, const DataTriple& triple) const;
  double ell_direct(int j, const DataTriple& triple) const;
  std::array<double, 2> ell(const DataTriple& triple) const { return {ell_dual(0, triple), ell_dual(1, triple)}; }

  const DualProfile& dual(int j) const;
  const LinearOperator& forward() const;
  /// Replaces the cached dual profiles (used when reusing a stale dual across iterates).
  void adopt_duals(const FunctionalEvaluator& other);

  /// Picard iterations used by the last general-coefficient direct evaluation.
  int last_picard_iterations() const { return picard_its_; }

 private:
  double dual_formula(int j, const DataTriple& triple, const DerivedData& dd) const;

  CoefficientSet coeffs_;
  bool has_nonlocal_ = false;
  mutable std::mutex mutex_;
  mutable std::unique_ptr<LinearOperator> fwd_, adj_;
  mutable std::array<std::shared_ptr<const DualProfile>, 2> dual_;
  mutable int picard_its_ = 0;
};

double ell_dual(int j, const DataTriple& triple, const CoefficientSet& coeffs);
double ell_direct(int j, const DataTriple& triple, const CoefficientSet& coeffs);

/// Corrector triples with ell^i(Xi^j) = delta_ij, generated by the singular sources.
struct CorrectorBasis {
  std::array<SingularProfile, 2> profiles;
  std::array<DataTriple, 2> candidates;  // (fbar_j, 0, 0)
  std::array<DataTriple, 2> xi;
  Eigen::Matrix2d A;     // A_ij = ell^i(candidate_j)
  Eigen::Matrix2d Ainv;
  Eigen::Matrix2d gram;  // <Xi^k, Xi^j>_H
  double cond = 0.0;
  double normalization_error = 0.0;
};

CorrectorBasis build_corrector_basis(const FunctionalEvaluator& ev, const Cutoff& cutoff = {});
CorrectorBasis build_corrector_basis(const GridPtr& grid, const Cutoff& cutoff = {});

struct Decomposition {
  double c0 = 0.0;
  double c1 = 0.0;
  Field u;      // solution for the input triple
  Field u_reg;  // solution for the regularized triple
  std::array<double, 2> ell_pre{}, ell_post{};
  std::array<FitResult, 2> fit_pre{}, fit_post{};
  double reconstruction_error = 0.0;  // sup |u - c0 ubar0 - c1 ubar1 - u_reg|

  nlohmann::json report() const;
};

Decomposition decompose(const DataTriple& triple, const FunctionalEvaluator& shear_ev, const CorrectorBasis& basis,
                        double fit_rmin = 0.05, double fit_rmax = 0.15);
Decomposition decompose(const DataTriple& triple);

struct LipschitzProbe {
  double gap = 0.0;             // sup |ell - ell'| over the sampled unit triples
  double coeff_distance = 0.0;  // |a-a'|_{Linf_y H^{7/12}_x} + |g1-g1'|_{Linf_y L2_x} + |g2-g2'|_{H^{1/2}_x L2_y}
  double ratio = 0.0;
};

LipschitzProbe ell_lipschitz_probe(const CoefficientSet& a, const CoefficientSet& b, std::size_t samples,
                                   std::uint64_t seed = 7);

/// Smooth triple satisfying the compatibility conditions, normalized to unit data norm.
DataTriple random_admissible_triple(const GridPtr& grid, std::uint64_t seed);

}  // namespace fbflow
