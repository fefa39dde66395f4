#include "fbflow/profiles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include "fbflow/linearfb.hpp"

namespace fbflow {

double r_coordinate(int corner, const Domain& d, double x, double y) {
  const double xi = std::abs(x - (corner == 0 ? d.x0 : d.x1));
  return std::sqrt(y * y + std::cbrt(xi * xi));
}

double t_coordinate(int corner, const Domain& d, double x, double y) {
  const double xi = std::abs(x - (corner == 0 ? d.x0 : d.x1));
  const double s = corner == 0 ? y : -y;
  if (xi == 0.0) return s == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), s);
  return s / std::cbrt(xi);
}

std::vector<double> asymptotic_coefficients(double lam, int count) {
  std::vector<double> a(std::size_t(std::max(count, 1)), 0.0);
  a[0] = 1.0;
  auto g = [&](int j) { return j >= 0 ? a[std::size_t(j)] : 0.0; };
  for (int m = 1; m < count; ++m) {
    const double dm = m;
    a[std::size_t(m)] =
        (3.0 / dm) * (-((2.0 * (dm - 2.0) + lam) / 3.0) * g(m - 2) - ((dm - 4.0 + lam) / 3.0) * g(m - 4) +
                      (lam * (lam - 1.0) + (dm - 3.0) * (dm - 2.0) - 2.0 * lam * (dm - 3.0)) * g(m - 3) +
                      (lam + 2.0 * (dm - 5.0) * (dm - 4.0) - 2.0 * lam * (dm - 5.0)) * g(m - 5) +
                      (dm - 7.0) * (dm - 6.0) * g(m - 7));
  }
  return a;
}

namespace {

// Optimally truncated series for t << 0. Terms are not monotone (period three in n), so the
// cut is placed at the smallest block of three consecutive terms.
void series_eval(const std::vector<double>& a, double t, double& g, double& gp) {
  const std::size_t n = a.size();
  std::vector<double> term(n);
  double tp = 1.0;
  for (std::size_t m = 0; m < n; ++m) {
    term[m] = a[m] * tp;
    tp /= t;
  }
  std::size_t cut = n;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t m = 3; m + 3 <= n; m += 3) {
    const double blk = std::abs(term[m]) + std::abs(term[m + 1]) + std::abs(term[m + 2]);
    if (blk < best) {
      best = blk;
      cut = m + 3;
    } else if (blk > 10.0 * best) {
      break;
    }
  }
  g = 0.0;
  gp = 0.0;
  for (std::size_t m = 0; m < cut; ++m) {
    g += term[m];
    gp += -double(m) * term[m] / t;
  }
}

using State = std::array<double, 2>;

struct ProfileOde {
  double lam;
  void operator()(const State& s, State& ds, double t) const {
    const double q = 1.0 + t * t;
    ds[0] = s[1];
    ds[1] = -(t * t / 3.0 + 2.0 * lam * t / q) * s[1] -
            lam * (-t / (3.0 * q) + (1.0 + (lam - 1.0) * t * t) / (q * q)) * s[0];
  }
};

double second_derivative(double lam, double t, double g, double gp) {
  State s{g, gp}, ds;
  ProfileOde{lam}(s, ds, t);
  return ds[1];
}

// Quintic Hermite on [t0, t1] from values, slopes and curvatures.
void hermite5(double h, double s, const double* y0, const double* y1, double& v, double& d) {
  // y = {f, f', f''}
  const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
  const double h00 = 1 - 10 * s3 + 15 * s4 - 6 * s5, h01 = 10 * s3 - 15 * s4 + 6 * s5;
  const double h10 = s - 6 * s3 + 8 * s4 - 3 * s5, h11 = -4 * s3 + 7 * s4 - 3 * s5;
  const double h20 = 0.5 * (s2 - 3 * s3 + 3 * s4 - s5), h21 = 0.5 * (s3 - 2 * s4 + s5);
  v = h00 * y0[0] + h01 * y1[0] + h * (h10 * y0[1] + h11 * y1[1]) + h * h * (h20 * y0[2] + h21 * y1[2]);
  const double d00 = -30 * s2 + 60 * s3 - 30 * s4, d01 = -d00;
  const double d10 = 1 - 18 * s2 + 32 * s3 - 15 * s4, d11 = -12 * s2 + 28 * s3 - 15 * s4;
  const double d20 = 0.5 * (2 * s - 9 * s2 + 12 * s3 - 5 * s4), d21 = 0.5 * (3 * s2 - 8 * s3 + 5 * s4);
  d = (d00 * y0[0] + d01 * y1[0]) / h + (d10 * y0[1] + d11 * y1[1]) + h * (d20 * y0[2] + d21 * y1[2]);
}

}  // namespace

void ProfileFunction::eval(double s, double& g, double& gp) const {
  if (s <= -T) {
    series_eval(series, s, g, gp);
    return;
  }
  if (s >= T) {
    const double gT = G.back();
    const double e = std::exp(-(s * s * s - T * T * T) / 9.0) * std::pow(s / T, tail_power);
    g = gT * e;
    gp = g * (-s * s / 3.0 + tail_power / s);
    return;
  }
  const double h = t[1] - t[0];
  std::size_t i = std::min(std::size_t((s - t[0]) / h), t.size() - 2);
  const double u = (s - t[i]) / h;
  const double y0[3] = {G[i], Gp[i], Gpp[i]};
  const double y1[3] = {G[i + 1], Gp[i + 1], Gpp[i + 1]};
  hermite5(h, u, y0, y1, g, gp);
}

double ProfileFunction::value(double s) const {
  double g, gp;
  eval(s, g, gp);
  return g;
}

double ProfileFunction::derivative(double s) const {
  double g, gp;
  eval(s, g, gp);
  return gp;
}

ProfileFunction g0_ode_solve(int k, double T, std::size_t n) {
  if (T < 6.0) fail_config("profile: T must be >= 6");
  if (n < 1000) fail_config("profile: n must be >= 1000");
  if (k < 0) fail_config("profile: k must be >= 0");
  if (n % 2) ++n;
  ProfileFunction p;
  p.k = k;
  p.lambda = 0.5 + 3.0 * k;
  p.T = T;
  p.series = asymptotic_coefficients(p.lambda, 80);
  p.tail_power = -2.0 - 2.0 * p.lambda;
  const std::size_t half = n / 2;
  p.t.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) p.t[i] = -T + 2.0 * T * double(i) / double(n);
  p.t[half] = 0.0;
  p.G.assign(n + 1, 0.0);
  p.Gp.assign(n + 1, 0.0);

  namespace odeint = boost::numeric::odeint;
  using Stepper = odeint::runge_kutta_dopri5<State>;
  const ProfileOde ode{p.lambda};

  // left half, forward from -T; the unwanted solution decays in this direction
  State s;
  series_eval(p.series, -T, s[0], s[1]);
  {
    std::vector<double> times(p.t.begin(), p.t.begin() + long(half) + 1);
    std::size_t idx = 0;
    odeint::integrate_times(odeint::make_controlled<Stepper>(1e-14, 1e-13), ode, s, times.begin(), times.end(),
                            1e-4, [&](const State& x, double) {
                              p.G[idx] = x[0];
                              p.Gp[idx] = x[1];
                              ++idx;
                            });
  }
  // right half, backward from +T with the decaying WKB start
  State r{1.0, -T * T / 3.0 + p.tail_power / T};
  std::vector<double> rg(n + 1), rgp(n + 1);
  {
    std::vector<double> times;
    for (std::size_t i = n + 1; i-- > half;) times.push_back(p.t[i]);
    std::size_t idx = n;
    odeint::integrate_times(odeint::make_controlled<Stepper>(1e-14, 1e-13), ode, r, times.begin(), times.end(),
                            -1e-4, [&](const State& x, double) {
                              rg[idx] = x[0];
                              rgp[idx] = x[1];
                              --idx;
                            });
  }
  const double scale = p.G[half] / rg[half];
  const double dl = p.Gp[half], dr = scale * rgp[half];
  p.derivative_mismatch = std::abs(dl - dr) / std::max(std::abs(dl), 1e-300);
  if (!std::isfinite(scale) || p.derivative_mismatch > 1e-6) {
    std::ostringstream os;
    os << "profile shooting did not match at t = 0: relative derivative mismatch " << p.derivative_mismatch
       << " (lambda = " << p.lambda << ")";
    fail_numerical(os.str());
  }
  for (std::size_t i = half; i <= n; ++i) {
    p.G[i] = scale * rg[i];
    p.Gp[i] = scale * rgp[i];
  }
  p.Gp[half] = 0.5 * (dl + dr);
  p.Gpp.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) p.Gpp[i] = second_derivative(p.lambda, p.t[i], p.G[i], p.Gp[i]);
  if (std::abs(p.G[n]) > 1e-6) emit_warning("profile: G(T) not small, T may be too small");
  return p;
}

const ProfileFunction& g0_default() {
  static const ProfileFunction p = g0_ode_solve(0, 8.0, 4000);
  return p;
}

double ode_residual(const ProfileFunction& p) {
  const std::size_t n = p.t.size();
  const double h = p.t[1] - p.t[0];
  double worst = 0.0;
  for (std::size_t i = 2; i + 2 < n; ++i) {
    const double gpp = (p.Gp[i - 2] - 8.0 * p.Gp[i - 1] + 8.0 * p.Gp[i + 1] - p.Gp[i + 2]) / (12.0 * h);
    const double t = p.t[i], q = 1.0 + t * t, lam = p.lambda;
    const double res = gpp + (t * t / 3.0 + 2.0 * lam * t / q) * p.Gp[i] +
                       lam * (-t / (3.0 * q) + (1.0 + (lam - 1.0) * t * t) / (q * q)) * p.G[i];
    worst = std::max(worst, std::abs(res));
  }
  return worst;
}

// ---------------------------------------------------------------- Tricomi route

namespace {

bool is_nonpositive_integer(long double a) { return a <= 0 && std::floor(a) == a; }

long double rgamma(long double a) { return is_nonpositive_integer(a) ? 0.0L : 1.0L / std::tgamma(a); }

}  // namespace

std::complex<long double> kummer_m(long double a, long double b, std::complex<long double> z) {
  if (is_nonpositive_integer(b)) fail_config("kummer_m: b must not be a nonpositive integer");
  std::complex<long double> sum = 1.0L, term = 1.0L;
  for (int n = 0; n < 2000; ++n) {
    term *= (a + n) / ((b + n) * (n + 1.0L)) * z;
    sum += term;
    if (std::abs(term) < 1e-22L * std::abs(sum) && n > std::abs(z)) break;
    if (term == std::complex<long double>(0.0L)) break;
  }
  return sum;
}

std::complex<double> tricomi_u(double a, double b, std::complex<double> zd) {
  if (std::floor(b) == b) fail_config("tricomi_u: integer b makes the connection formula degenerate");
  const std::complex<long double> z(zd.real(), zd.imag());
  const long double A = a, B = b;
  if (a == 0.0) return 1.0;
  const long double az = std::abs(z);
  if (az >= 22.0L) {
    // z^{-a} sum (a)_n (a-b+1)_n / n! (-z)^{-n}, truncated at the smallest term
    std::complex<long double> sum = 1.0L, term = 1.0L;
    const std::complex<long double> w = -1.0L / z;
    long double prev = 1.0L;
    for (int n = 0; n < 200; ++n) {
      std::complex<long double> next = term * (A + n) * (A - B + 1.0L + n) / (n + 1.0L) * w;
      const long double m = std::abs(next);
      if (m > prev || m < 1e-21L * std::abs(sum)) {
        if (m < prev) sum += next;
        break;
      }
      term = next;
      sum += term;
      prev = m;
    }
    const std::complex<long double> r = std::pow(z, -A) * sum;
    return {double(r.real()), double(r.imag())};
  }
  const std::complex<long double> m1 = kummer_m(A, B, z);
  std::complex<long double> r = std::tgamma(1.0L - B) * rgamma(A - B + 1.0L) * m1;
  if (az > 0.0L) {
    const std::complex<long double> m2 = kummer_m(A - B + 1.0L, 2.0L - B, z);
    r += std::tgamma(B - 1.0L) * rgamma(A) * std::pow(z, 1.0L - B) * m2;
  }
  return {double(r.real()), double(r.imag())};
}

double kummer_normalization(int k) {
  const double lam = 0.5 + 3.0 * k;
  return 2.0 * std::pow(9.0, lam / 3.0);
}

double g0_kummer(int k, double t) {
  const double lam = 0.5 + 3.0 * k;
  const std::complex<double> zeta(-t * t * t / 9.0, 0.0);
  std::complex<double> U = std::abs(zeta) < 1e-12 ? tricomi_u(-lam / 3.0, 2.0 / 3.0, 0.0)
                                                  : tricomi_u(-lam / 3.0, 2.0 / 3.0, zeta);
  const std::complex<double> rot(0.5, std::sqrt(3.0) / 2.0);
  return kummer_normalization(k) * std::pow(1.0 + t * t, -lam / 2.0) * (rot * U).real();
}

// ---------------------------------------------------------------- singular profiles

SelfSimilarValue v0_eval(const ProfileFunction& G, double xi, double eta) {
  if (xi <= 0.0) {
    if (eta >= 0.0) return {0.0, 0.0};
    const double s = std::sqrt(-eta);
    return {s, -0.5 / s};
  }
  const double c = std::cbrt(xi);
  const double t = eta / c;
  const double r = std::sqrt(eta * eta + c * c);
  double g, gp;
  G.eval(t, g, gp);
  const double sq = std::sqrt(1.0 + t * t);
  const double rs = std::sqrt(r);
  return {rs * g, 0.5 * (t / sq) * g / rs + sq * gp / rs};
}

SelfSimilarValue corner_profile(const ProfileFunction& G, int corner, const Domain& d, double x, double y) {
  if (corner == 0) return v0_eval(G, x - d.x0, y);
  auto v = v0_eval(G, d.x1 - x, -y);
  return {v.v, -v.dv_deta};
}

void smooth_step(double s, double& S, double& S1, double& S2) {
  if (s <= 0.0) {
    S = S1 = S2 = 0.0;
    return;
  }
  if (s >= 1.0) {
    S = 1.0;
    S1 = S2 = 0.0;
    return;
  }
  // S = sigmoid(g), g = 1/(1-s) - 1/s
  const double g = 1.0 / (1.0 - s) - 1.0 / s;
  const double g1 = 1.0 / ((1.0 - s) * (1.0 - s)) + 1.0 / (s * s);
  const double g2 = 2.0 / std::pow(1.0 - s, 3) - 2.0 / (s * s * s);
  const double sig = g >= 0.0 ? 1.0 / (1.0 + std::exp(-g)) : std::exp(g) / (1.0 + std::exp(g));
  const double ds = sig * (1.0 - sig);
  S = sig;
  S1 = ds * g1;
  S2 = ds * (1.0 - 2.0 * sig) * g1 * g1 + ds * g2;
}

void Cutoff::radial(double rho, double& chi, double& d1, double& d2) const {
  const double w = support() - plateau();
  double S, S1, S2;
  smooth_step((rho - plateau()) / w, S, S1, S2);
  chi = 1.0 - S;
  d1 = -S1 / w;
  d2 = -S2 / (w * w);
}

double singular_source(int corner, const Domain& d, const Cutoff& cut, const ProfileFunction& G, double x, double y) {
  const double xi = x - (corner == 0 ? d.x0 : d.x1);
  const double rho = std::hypot(xi, y);
  if (rho <= cut.plateau() || rho >= cut.support()) return 0.0;
  double chi, c1, c2;
  cut.radial(rho, chi, c1, c2);
  const double chx = c1 * xi / rho;
  const double chy = c1 * y / rho;
  const double chyy = c2 * y * y / (rho * rho) + c1 * (1.0 / rho - y * y / (rho * rho * rho));
  const auto v = corner_profile(G, corner, d, x, y);
  return v.v * (y * chx - chyy) - 2.0 * v.dv_deta * chy;
}

SingularProfile singular_profile(int corner, const GridPtr& grid, const Cutoff& cutoff, const ProfileFunction& G) {
  if (corner != 0 && corner != 1) fail_config("singular profile corner must be 0 or 1");
  const Domain& d = grid->domain();
  const double limit = 0.5 * std::min(1.0, d.length());
  if (!(cutoff.radius < limit)) {
    std::ostringstream os;
    os << "cutoff radius " << cutoff.radius << " violates R < min(1, x1 - x0)/2 = " << limit;
    fail_config(os.str());
  }
  SingularProfile sp;
  sp.corner = corner;
  sp.cutoff = cutoff;
  sp.u = Field::from_function(grid, [&](double x, double y) {
    const double xi = x - (corner == 0 ? d.x0 : d.x1);
    double chi, c1, c2;
    cutoff.radial(std::hypot(xi, y), chi, c1, c2);
    return chi == 0.0 ? 0.0 : chi * corner_profile(G, corner, d, x, y).v;
  });
  sp.f = Field::from_function(grid, [&](double x, double y) { return singular_source(corner, d, cutoff, G, x, y); });
  LinearProblem lp{CoefficientSet::shear(grid), DataTriple::zero(grid)};
  sp.f_discrete = residual(sp.u, lp);
  return sp;
}

FitResult fit_singular_strength(const Field& u, int corner, double rmin, double rmax, const ProfileFunction& G) {
  if (corner != 0 && corner != 1) fail_config("fit corner must be 0 or 1");
  const Grid& g = *u.grid();
  const Domain& d = g.domain();
  struct Sample {
    double xi, y, v, u;
  };
  std::vector<Sample> smp;
  for (std::size_t i = 0; i < g.nx(); ++i)
    for (std::size_t k = 0; k < g.ny(); ++k) {
      const double x = g.x()[i], y = g.y()[k];
      const double r = r_coordinate(corner, d, x, y);
      if (r < rmin || r > rmax) continue;
      const double xi = std::abs(x - (corner == 0 ? d.x0 : d.x1));
      smp.push_back({xi, corner == 0 ? y : -y, corner_profile(G, corner, d, x, y).v, u.at(i, k)});
    }
  if (smp.size() < 20) {
    std::ostringstream os;
    os << "window unresolved: " << smp.size() << " samples in r in [" << rmin << ", " << rmax << "]";
    fail_numerical(os.str());
  }
  // smooth background y^a xi^b with a + 3b <= 4
  static const int mono[][2] = {{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}, {0, 1}, {1, 1}};
  const long m = long(smp.size()), p = 1 + long(std::size(mono));
  Eigen::MatrixXd X(m, p);
  Eigen::VectorXd b(m);
  for (long s = 0; s < m; ++s) {
    const auto& q = smp[std::size_t(s)];
    X(s, 0) = q.v;
    for (long c = 1; c < p; ++c)
      X(s, c) = std::pow(q.y, mono[c - 1][0]) * std::pow(q.xi, mono[c - 1][1]);
    b[s] = q.u;
  }
  Eigen::VectorXd scale = X.colwise().norm().transpose();
  for (long c = 0; c < p; ++c)
    if (scale[c] > 0.0) X.col(c) /= scale[c];
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  Eigen::VectorXd coef = qr.solve(b);
  const Eigen::VectorXd res = b - X * coef;
  FitResult fr;
  fr.samples = smp.size();
  fr.c = coef[0] / scale[0];
  const double bn = b.norm();
  fr.quality = bn > 0.0 ? res.norm() / bn : 0.0;
  const double sigma2 = res.squaredNorm() / double(std::max<long>(1, m - p));
  Eigen::MatrixXd cov = (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fr.std_error = std::sqrt(std::max(0.0, sigma2 * cov(0, 0))) / scale[0];
  const double vnorm = scale[0];
  fr.singular_content = bn > 0.0 && std::abs(fr.c) > 3.0 * fr.std_error && std::abs(fr.c) * vnorm > 1e-3 * bn;
  return fr;
}

}  // namespace fbflow
