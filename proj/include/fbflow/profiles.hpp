#pragma once

#include <complex>
#include <vector>

#include "fbflow/domain.hpp"

namespace fbflow {

/// r_i = (y^2 + |x - x_i|^{2/3})^{1/2}
double r_coordinate(int corner, const Domain& d, double x, double y);
/// t_i = (-1)^i y |x - x_i|^{-1/3}; infinite on the line x = x_i.
double t_coordinate(int corner, const Domain& d, double x, double y);

/// Coefficients of G ~ sum a_n t^{-n} as t -> -infinity, a_0 = 1.
std::vector<double> asymptotic_coefficients(double lambda, int count);

/// Tabulated solution of the self-similar profile ODE with G(-inf) = 1, G(+inf) = 0.
struct ProfileFunction {
  int k = 0;
  double lambda = 0.5;
  double T = 8.0;
  std::vector<double> t, G, Gp, Gpp;
  std::vector<double> series;  // asymptotic coefficients for t < -T
  double tail_power = 0.0;     // G ~ t^p exp(-t^3/9) for t > T
  double derivative_mismatch = 0.0;

  double value(double s) const;
  double derivative(double s) const;
  void eval(double s, double& g, double& gp) const;
};

/// Two-sided shooting with asymptotic starts; throws when the halves fail to match.
ProfileFunction g0_ode_solve(int k, double T = 8.0, std::size_t n = 4000);

/// Shared k = 0 profile (T = 8, n = 4000), built once.
const ProfileFunction& g0_default();

/// Max |ODE residual| on the table, with G'' from fourth-order differences of G'.
double ode_residual(const ProfileFunction& p);

/// Closed form of the constant linking the Tricomi route to the normalized profile.
double kummer_normalization(int k);

double g0_kummer(int k, double t);

/// Tricomi's confluent hypergeometric function on the principal branch.
std::complex<double> tricomi_u(double a, double b, std::complex<double> z);

/// Kummer M(a,b,z) by direct series.
std::complex<long double> kummer_m(long double a, long double b, std::complex<long double> z);

struct SelfSimilarValue {
  double v = 0.0;
  double dv_deta = 0.0;
};

/// v0(xi, eta) = r^{1/2} G(t) with xi >= 0 the distance from the corner along x.
SelfSimilarValue v0_eval(const ProfileFunction& G, double xi, double eta);

/// Value and y-derivative of the uncut self-similar solution attached to corner i.
SelfSimilarValue corner_profile(const ProfileFunction& G, int corner, const Domain& d, double x, double y);

/// Smooth radial cutoff: 1 for rho <= R/3, 0 for rho >= R/2 (rho = Euclidean distance to the corner).
struct Cutoff {
  double radius = 0.45;

  double plateau() const { return radius / 3.0; }
  double support() const { return radius / 2.0; }
  /// chi and its radial derivatives
  void radial(double rho, double& chi, double& d1, double& d2) const;
};

/// C-infinity step on [0,1] with derivatives.
void smooth_step(double s, double& S, double& S1, double& S2);

struct SingularProfile {
  int corner = 0;
  Cutoff cutoff;
  Field u;           // cut-off self-similar solution
  Field f;           // analytic source
  Field f_discrete;  // discrete operator applied to u
};

SingularProfile singular_profile(int corner, const GridPtr& grid, const Cutoff& cutoff = {},
                                 const ProfileFunction& G = g0_default());

/// Analytic source of the singular profile at one point.
double singular_source(int corner, const Domain& d, const Cutoff& cutoff, const ProfileFunction& G, double x,
                       double y);

struct FitResult {
  double c = 0.0;
  double std_error = 0.0;
  double quality = 0.0;  // relative least-squares residual over the samples
  std::size_t samples = 0;
  bool singular_content = false;
};

/// Least-squares fit of u ~ c v_i + smooth background over r_i in [rmin, rmax].
FitResult fit_singular_strength(const Field& u, int corner, double rmin = 0.05, double rmax = 0.15,
                                const ProfileFunction& G = g0_default());

}  // namespace fbflow
