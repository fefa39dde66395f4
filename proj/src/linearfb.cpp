#include "fbflow/linearfb.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <Eigen/SparseLU>

namespace fbflow {

CoefficientSet CoefficientSet::shear(GridPtr grid) {
  CoefficientSet c;
  c.alpha = Field(grid, 1.0);
  c.gamma1 = Field(grid, 0.0);
  c.gamma2 = Field(grid, 0.0);
  c.provenance = Provenance::Shear;
  return c;
}

Field CoefficientSet::gamma() const {
  const Grid& g = *grid();
  Field out = gamma2;
  for (std::size_t i = 0; i < g.nx(); ++i)
    for (std::size_t k = 0; k < g.ny(); ++k) out.at(i, k) += g.y()[k] * gamma1.at(i, k);
  return out;
}

bool CoefficientSet::is_shear() const {
  if (provenance == Provenance::Shear) return true;
  auto s = smallness();
  return s.alpha_dev == 0.0 && s.gamma1_sup == 0.0 && s.gamma2_sup == 0.0;
}

void CoefficientSet::validate() const {
  for (double a : alpha.values())
    if (!(a > 0.0)) fail_numerical("degenerate diffusion: alpha <= 0 at some node");
  if (!alpha.finite() || !gamma1.finite() || !gamma2.finite()) fail_numerical("non-finite coefficient values");
}

CoefficientSet::Smallness CoefficientSet::smallness() const {
  Smallness s;
  for (double a : alpha.values()) s.alpha_dev = std::max(s.alpha_dev, std::abs(a - 1.0));
  s.gamma1_sup = gamma1.max_abs();
  s.gamma2_sup = gamma2.max_abs();
  return s;
}

Eigen::SparseMatrix<double> SparseSystem::matrix() const {
  Eigen::SparseMatrix<double> A(static_cast<long>(n), static_cast<long>(n));
  A.setFromTriplets(triplets.begin(), triplets.end());
  A.makeCompressed();
  return A;
}

namespace {

using Trip = Eigen::Triplet<double>;

bool forward_dirichlet(const Grid& g, std::size_t i, std::size_t k) {
  const double z = g.y()[k];
  return k == 0 || k + 1 == g.ny() || (i == 0 && z > 0.0) || (i + 1 == g.nx() && z < 0.0);
}

bool adjoint_dirichlet(const Grid& g, std::size_t i, std::size_t k) {
  const double z = g.y()[k];
  return k == 0 || k + 1 == g.ny() || (i + 1 == g.nx() && z > 0.0) || (i == 0 && z < 0.0);
}

void forward_pattern(const CoefficientSet& c, std::vector<Trip>& t, std::vector<char>& dir) {
  const Grid& g = *c.grid();
  const auto& x = g.x();
  const auto& y = g.y();
  const std::size_t nx = g.nx(), ny = g.ny();
  t.reserve(g.size() * 5);
  dir.assign(g.size(), 0);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t k = 0; k < ny; ++k) {
      const int p = int(g.index(i, k));
      if (forward_dirichlet(g, i, k)) {
        t.emplace_back(p, p, 1.0);
        dir[std::size_t(p)] = 1;
        continue;
      }
      const double z = y[k];
      const double hm = y[k] - y[k - 1], hp = y[k + 1] - y[k];
      const double a = c.alpha.at(i, k);
      const double gam = z * c.gamma1.at(i, k) + c.gamma2.at(i, k);
      double cm = -2.0 * a / (hm * (hm + hp));
      double c0 = 2.0 * a / (hm * hp);
      double cp = -2.0 * a / (hp * (hm + hp));
      if (gam > 0.0) {
        c0 += gam / hm;
        cm -= gam / hm;
      } else if (gam < 0.0) {
        cp += gam / hp;
        c0 -= gam / hp;
      }
      if (z > 0.0) {
        const double h = x[i] - x[i - 1];
        c0 += z / h;
        t.emplace_back(p, int(g.index(i - 1, k)), -z / h);
      } else if (z < 0.0) {
        const double h = x[i + 1] - x[i];
        c0 -= z / h;
        t.emplace_back(p, int(g.index(i + 1, k)), z / h);
      }
      t.emplace_back(p, p - 1, cm);
      t.emplace_back(p, p, c0);
      t.emplace_back(p, p + 1, cp);
    }
}

void adjoint_pattern(const CoefficientSet& c, std::vector<Trip>& t, std::vector<char>& dir) {
  const Grid& g = *c.grid();
  const auto& x = g.x();
  const auto& y = g.y();
  const std::size_t nx = g.nx(), ny = g.ny();
  const Field gamma = c.gamma();
  t.reserve(g.size() * 5);
  dir.assign(g.size(), 0);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t k = 0; k < ny; ++k) {
      const int p = int(g.index(i, k));
      if (adjoint_dirichlet(g, i, k)) {
        t.emplace_back(p, p, 1.0);
        dir[std::size_t(p)] = 1;
        continue;
      }
      const double z = y[k];
      const double hm = y[k] - y[k - 1], hp = y[k + 1] - y[k];
      double cm = -2.0 * c.alpha.at(i, k - 1) / (hm * (hm + hp));
      double c0 = 2.0 * c.alpha.at(i, k) / (hm * hp);
      double cp = -2.0 * c.alpha.at(i, k + 1) / (hp * (hm + hp));
      const double gk = gamma.at(i, k);
      if (gk > 0.0) {
        c0 += gk / hp;
        cp -= gamma.at(i, k + 1) / hp;
      } else if (gk < 0.0) {
        c0 -= gk / hm;
        cm += gamma.at(i, k - 1) / hm;
      }
      if (z > 0.0) {
        const double h = x[i + 1] - x[i];
        c0 += z / h;
        t.emplace_back(p, int(g.index(i + 1, k)), -z / h);
      } else if (z < 0.0) {
        const double h = x[i] - x[i - 1];
        c0 -= z / h;
        t.emplace_back(p, int(g.index(i - 1, k)), z / h);
      }
      t.emplace_back(p, p - 1, cm);
      t.emplace_back(p, p, c0);
      t.emplace_back(p, p + 1, cp);
    }
}

Eigen::VectorXd forward_rhs(const Grid& g, const DataTriple& d) {
  Eigen::VectorXd b(long(g.size()));
  const std::size_t k0 = g.k0();
  for (std::size_t i = 0; i < g.nx(); ++i)
    for (std::size_t k = 0; k < g.ny(); ++k) {
      const std::size_t p = g.index(i, k);
      double v = d.f.values()[p];
      if (forward_dirichlet(g, i, k)) {
        v = 0.0;
        if (k != 0 && k + 1 != g.ny()) v = (i == 0) ? d.delta0.values[k - k0] : d.delta1.values[k];
      }
      b[long(p)] = v;
    }
  return b;
}

Eigen::Map<const Eigen::VectorXd> as_vec(const Field& u) {
  return Eigen::Map<const Eigen::VectorXd>(u.values().data(), long(u.size()));
}

Field to_field(const GridPtr& g, const Eigen::VectorXd& v) {
  return Field(g, std::vector<double>(v.data(), v.data() + v.size()));
}

double l2_of(const Field& u) { return norm(u, NormKind::L2); }

}  // namespace

SparseSystem assemble(const LinearProblem& problem) {
  problem.coeffs.validate();
  const Grid& g = *problem.coeffs.grid();
  SparseSystem s;
  s.n = g.size();
  forward_pattern(problem.coeffs, s.triplets, s.dirichlet);
  s.rhs = forward_rhs(g, problem.data);
  return s;
}

SparseSystem assemble_adjoint(const CoefficientSet& coeffs) {
  coeffs.validate();
  SparseSystem s;
  s.n = coeffs.grid()->size();
  adjoint_pattern(coeffs, s.triplets, s.dirichlet);
  s.rhs = Eigen::VectorXd::Zero(long(s.n));
  return s;
}

nlohmann::json SolveStats::to_json() const {
  return {{"residual_inf", residual_inf},
          {"z0_components", {{"zdxu_l2", zdxu_l2}, {"dzz_l2", dzz_l2}}},
          {"n_unknowns", n_unknowns},
          {"factor_time_ms", factor_time_ms}};
}

struct LinearOperator::Impl {
  Eigen::SparseMatrix<double> A;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  double a_norm = 0.0;
};

LinearOperator::LinearOperator(const CoefficientSet& coeffs, bool adjoint)
    : coeffs_(coeffs), adjoint_(adjoint), impl_(std::make_unique<Impl>()) {
  coeffs_.validate();
  std::vector<Trip> t;
  std::vector<char> dir;
  if (adjoint)
    adjoint_pattern(coeffs_, t, dir);
  else
    forward_pattern(coeffs_, t, dir);
  const long n = long(coeffs_.grid()->size());
  impl_->A.resize(n, n);
  impl_->A.setFromTriplets(t.begin(), t.end());
  impl_->A.makeCompressed();
  {
    Eigen::VectorXd rs = Eigen::VectorXd::Zero(n);
    for (long c = 0; c < impl_->A.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(impl_->A, c); it; ++it) rs[it.row()] += std::abs(it.value());
    impl_->a_norm = rs.maxCoeff();
  }
  auto t0 = std::chrono::steady_clock::now();
  impl_->lu.analyzePattern(impl_->A);
  impl_->lu.factorize(impl_->A);
  auto t1 = std::chrono::steady_clock::now();
  factor_ms_ = std::chrono::duration<double, std::milli>(t1 - t0).count();
  if (impl_->lu.info() != Eigen::Success) {
    std::ostringstream os;
    os << "sparse factorization failed (" << impl_->lu.lastErrorMessage() << "), n = " << n
       << ", |A|_inf = " << impl_->a_norm;
    fail_numerical(os.str());
  }
}

LinearOperator::~LinearOperator() = default;

Eigen::VectorXd LinearOperator::apply(const Eigen::VectorXd& v) const { return impl_->A * v; }

Eigen::VectorXd LinearOperator::rhs_for(const DataTriple& data) const {
  if (adjoint_) fail_config("rhs_for is defined for the forward operator only");
  return forward_rhs(*coeffs_.grid(), data);
}

Eigen::VectorXd LinearOperator::solve_rhs(const Eigen::VectorXd& b, double* residual_inf) const {
  Eigen::VectorXd x = impl_->lu.solve(b);
  Eigen::VectorXd r = b - impl_->A * x;
  auto rel = [&](const Eigen::VectorXd& res, const Eigen::VectorXd& sol) {
    double scale = impl_->a_norm * sol.lpNorm<Eigen::Infinity>() + b.lpNorm<Eigen::Infinity>();
    return scale > 0.0 ? res.lpNorm<Eigen::Infinity>() / scale : 0.0;
  };
  if (rel(r, x) > 1e-12) {
    x += impl_->lu.solve(r);
    r = b - impl_->A * x;
  }
  if (!x.allFinite()) fail_numerical("linear solve produced non-finite values (singular matrix?)");
  if (rel(r, x) > 1e-10) {
    std::ostringstream os;
    os << "linear solve residual " << r.lpNorm<Eigen::Infinity>() << " exceeds the relative target 1e-10";
    fail_numerical(os.str());
  }
  if (residual_inf) *residual_inf = r.lpNorm<Eigen::Infinity>();
  return x;
}

Field LinearOperator::solve(const DataTriple& data, SolveStats* stats) const {
  if (adjoint_) fail_config("solve(DataTriple) is defined for the forward operator only");
  const GridPtr& g = coeffs_.grid();
  double res = 0.0;
  Field u = to_field(g, solve_rhs(rhs_for(data), &res));
  if (stats) {
    stats->residual_inf = res;
    stats->n_unknowns = g->size();
    stats->factor_time_ms = factor_ms_;
    Field ux = diff(u, Axis::X, 1);
    for (std::size_t i = 0; i < g->nx(); ++i)
      for (std::size_t k = 0; k < g->ny(); ++k) ux.at(i, k) *= g->y()[k];
    stats->zdxu_l2 = l2_of(ux);
    stats->dzz_l2 = l2_of(diff(u, Axis::Y, 2));
  }
  return u;
}

LinearSolution solve_linear(const LinearProblem& problem) {
  LinearOperator op(problem.coeffs);
  LinearSolution s;
  s.u = op.solve(problem.data, &s.stats);
  return s;
}

double lifting_cutoff(double y) {
  const double s = std::clamp((std::abs(y) - 0.05) / 0.2, 0.0, 1.0);
  const double s4 = s * s * s * s;
  return 1.0 - s4 * (35.0 - 84.0 * s + 70.0 * s * s - 20.0 * s * s * s);
}

namespace {

struct JumpData {
  std::vector<double> J0, J1;
};

JumpData jump_data(int j, const CoefficientSet& c) {
  const Grid& g = *c.grid();
  const std::size_t k0 = g.k0();
  const Field ay = diff(c.alpha, Axis::Y, 1);
  JumpData d;
  d.J0.resize(g.nx());
  d.J1.resize(g.nx());
  for (std::size_t i = 0; i < g.nx(); ++i) {
    const double a = c.alpha.at(i, k0);
    const double gam = c.gamma2.at(i, k0);
    if (j == 1) {
      d.J0[i] = 1.0 / a;
      d.J1[i] = -(ay.at(i, k0) + gam) / (a * a);
    } else {
      d.J0[i] = 0.0;
      d.J1[i] = -1.0 / a;
    }
  }
  return d;
}

void measure_jumps(DualProfile& d, const Grid& g, double tol) {
  const std::size_t k0 = g.k0();
  const auto& y = g.y();
  d.jump.resize(g.nx());
  d.slope_jump.resize(g.nx());
  d.jump_error = 0.0;
  const double hm = y[k0] - y[k0 - 1], hp = y[k0 + 1] - y[k0];
  auto slope = [&](const Field& f, std::size_t i) {
    // centered three-point derivative at y = 0
    return (-hp / (hm * (hm + hp))) * f.at(i, k0 - 1) + ((hp - hm) / (hm * hp)) * f.at(i, k0) +
           (hm / (hp * (hm + hp))) * f.at(i, k0 + 1);
  };
  for (std::size_t i = 0; i < g.nx(); ++i) {
    d.jump[i] = d.phi_plus.at(i, k0) - d.phi_minus.at(i, k0);
    d.slope_jump[i] = slope(d.phi_plus, i) - slope(d.phi_minus, i);
    d.jump_error = std::max({d.jump_error, std::abs(d.jump[i] - d.jump_target[i]),
                             std::abs(d.slope_jump[i] - d.slope_jump_target[i])});
  }
  if (tol > 0.0 && d.jump_error > tol) {
    std::ostringstream os;
    os << "dual profile jump violation: max error " << d.jump_error << " > " << tol;
    fail_numerical(os.str());
  }
}

}  // namespace

DualProfile solve_adjoint_with_jumps(int j, const LinearOperator& op, double jump_tol) {
  if (j != 0 && j != 1) fail_config("dual profile index must be 0 or 1");
  if (!op.adjoint()) fail_config("solve_adjoint_with_jumps needs the adjoint operator");
  const CoefficientSet& c = op.coeffs();
  const GridPtr& gp = c.grid();
  const Grid& g = *gp;
  const std::size_t k0 = g.k0();
  const double L = g.domain().length();
  auto jd = jump_data(j, c);

  Field lp(gp), lm(gp);
  for (std::size_t i = 0; i < g.nx(); ++i) {
    const double s = (g.x()[i] - g.domain().x0) / L;
    for (std::size_t k = 0; k < g.ny(); ++k) {
      const double y = g.y()[k];
      const double core = lifting_cutoff(y) * (jd.J0[i] + y * jd.J1[i]);
      lp.at(i, k) = (1.0 - s) * core;
      lm.at(i, k) = -s * core;
    }
  }
  // Dirichlet rows of the adjoint operator see lp = 0 (x1, y>0) and lm = 0 (x0, y<0)
  const Eigen::VectorXd rp = op.apply(as_vec(lp));
  const Eigen::VectorXd rm = op.apply(as_vec(lm));
  Eigen::VectorXd b(long(g.size()));
  for (std::size_t i = 0; i < g.nx(); ++i)
    for (std::size_t k = 0; k < g.ny(); ++k) {
      const long p = long(g.index(i, k));
      if (adjoint_dirichlet(g, i, k))
        b[p] = 0.0;
      else if (k > k0)
        b[p] = -rp[p];
      else if (k < k0)
        b[p] = -rm[p];
      else
        b[p] = -0.5 * (rp[p] + rm[p]);
    }
  DualProfile d;
  d.j = j;
  d.psi = to_field(gp, op.solve_rhs(b, &d.residual_inf));
  d.phi_plus = d.psi + lp;
  d.phi_minus = d.psi + lm;
  d.jump_target = jd.J0;
  d.slope_jump_target = jd.J1;
  measure_jumps(d, g, jump_tol);
  return d;
}

DualProfile solve_adjoint_with_jumps(int j, const CoefficientSet& coeffs, double jump_tol) {
  LinearOperator op(coeffs, true);
  return solve_adjoint_with_jumps(j, op, jump_tol);
}

namespace detail {

DualProfile solve_adjoint_doubled(int j, const CoefficientSet& c) {
  if (j != 0 && j != 1) fail_config("dual profile index must be 0 or 1");
  c.validate();
  const GridPtr& gp = c.grid();
  const Grid& g = *gp;
  const auto& x = g.x();
  const auto& y = g.y();
  const std::size_t nx = g.nx(), ny = g.ny(), k0 = g.k0();
  const std::size_t nup = ny - k0, nlo = k0 + 1;
  const std::size_t NU = nx * nup;
  auto up = [&](std::size_t i, std::size_t k) { return int(i * nup + (k - k0)); };
  auto lo = [&](std::size_t i, std::size_t k) { return int(NU + i * nlo + k); };
  const Field gamma = c.gamma();
  auto jd = jump_data(j, c);
  std::vector<Trip> t;
  const std::size_t n = NU + nx * nlo;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(long(n));

  auto interior = [&](std::size_t i, std::size_t k, auto idx) {
    const int p = idx(i, k);
    const double z = y[k];
    const double hm = y[k] - y[k - 1], hp = y[k + 1] - y[k];
    double cm = -2.0 * c.alpha.at(i, k - 1) / (hm * (hm + hp));
    double c0 = 2.0 * c.alpha.at(i, k) / (hm * hp);
    double cp = -2.0 * c.alpha.at(i, k + 1) / (hp * (hm + hp));
    const double gk = gamma.at(i, k);
    if (gk > 0.0) {
      c0 += gk / hp;
      cp -= gamma.at(i, k + 1) / hp;
    } else if (gk < 0.0) {
      c0 -= gk / hm;
      cm += gamma.at(i, k - 1) / hm;
    }
    if (z > 0.0) {
      const double h = x[i + 1] - x[i];
      c0 += z / h;
      t.emplace_back(p, idx(i + 1, k), -z / h);
    } else {
      const double h = x[i] - x[i - 1];
      c0 -= z / h;
      t.emplace_back(p, idx(i - 1, k), z / h);
    }
    t.emplace_back(p, idx(i, k - 1), cm);
    t.emplace_back(p, p, c0);
    t.emplace_back(p, idx(i, k + 1), cp);
  };

  const double h1 = y[k0 + 1] - y[k0], h2 = y[k0 + 2] - y[k0];
  const double l1 = y[k0] - y[k0 - 1], l2 = y[k0] - y[k0 - 2];
  // one-sided second-order first derivatives at y = 0
  const double u0 = -(h1 + h2) / (h1 * h2), u1 = h2 / (h1 * (h2 - h1)), u2 = -h1 / (h2 * (h2 - h1));
  const double d0 = (l1 + l2) / (l1 * l2), d1 = -l2 / (l1 * (l2 - l1)), d2 = l1 / (l2 * (l2 - l1));

  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t k = k0; k < ny; ++k) {
      const int p = up(i, k);
      if (k == k0) {
        t.emplace_back(p, up(i, k0), 1.0);
        t.emplace_back(p, lo(i, k0), -1.0);
        b[p] = jd.J0[i];
      } else if (k + 1 == ny || i + 1 == nx) {
        t.emplace_back(p, p, 1.0);
      } else {
        interior(i, k, up);
      }
    }
    for (std::size_t k = 0; k <= k0; ++k) {
      const int p = lo(i, k);
      if (k == k0) {
        t.emplace_back(p, up(i, k0), u0);
        t.emplace_back(p, up(i, k0 + 1), u1);
        t.emplace_back(p, up(i, k0 + 2), u2);
        t.emplace_back(p, lo(i, k0), -d0);
        t.emplace_back(p, lo(i, k0 - 1), -d1);
        t.emplace_back(p, lo(i, k0 - 2), -d2);
        b[p] = jd.J1[i];
      } else if (k == 0 || i == 0) {
        t.emplace_back(p, p, 1.0);
      } else {
        interior(i, k, lo);
      }
    }
  }
  Eigen::SparseMatrix<double> A(static_cast<long>(n), static_cast<long>(n));
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success) fail_numerical("doubled dual factorization failed");
  Eigen::VectorXd v = lu.solve(b);
  DualProfile d;
  d.j = j;
  d.psi = Field(gp);
  d.phi_plus = Field(gp);
  d.phi_minus = Field(gp);
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t k = k0; k < ny; ++k) d.phi_plus.at(i, k) = v[up(i, k)];
    for (std::size_t k = 0; k <= k0; ++k) d.phi_minus.at(i, k) = v[lo(i, k)];
  }
  d.residual_inf = (A * v - b).lpNorm<Eigen::Infinity>();
  d.jump_target = jd.J0;
  d.slope_jump_target = jd.J1;
  d.jump.resize(nx);
  d.slope_jump.resize(nx);
  for (std::size_t i = 0; i < nx; ++i) {
    d.jump[i] = d.phi_plus.at(i, k0) - d.phi_minus.at(i, k0);
    d.slope_jump[i] = u0 * d.phi_plus.at(i, k0) + u1 * d.phi_plus.at(i, k0 + 1) + u2 * d.phi_plus.at(i, k0 + 2) -
                      (d0 * d.phi_minus.at(i, k0) + d1 * d.phi_minus.at(i, k0 - 1) + d2 * d.phi_minus.at(i, k0 - 2));
    d.jump_error = std::max({d.jump_error, std::abs(d.jump[i] - jd.J0[i]), std::abs(d.slope_jump[i] - jd.J1[i])});
  }
  return d;
}

}  // namespace detail

Field residual(const Field& u, const LinearProblem& problem) {
  auto sys = assemble(problem);
  Eigen::VectorXd r = sys.matrix() * as_vec(u) - sys.rhs;
  for (std::size_t p = 0; p < sys.n; ++p)
    if (sys.dirichlet[p]) r[long(p)] = 0.0;
  return to_field(u.grid(), r);
}

Field adjoint_residual(const Field& phi, const CoefficientSet& coeffs) {
  auto sys = assemble_adjoint(coeffs);
  Eigen::VectorXd r = sys.matrix() * as_vec(phi);
  for (std::size_t p = 0; p < sys.n; ++p)
    if (sys.dirichlet[p]) r[long(p)] = 0.0;
  return to_field(phi.grid(), r);
}

double weak_residual(const Field& u, const LinearProblem& problem, const Field& v) {
  const Grid& g = *u.grid();
  const std::size_t nx = g.nx(), ny = g.ny(), k0 = g.k0();
  const double tol = 1e-12 * std::max(1.0, v.max_abs());
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t k = 0; k < ny; ++k) {
      const double y = g.y()[k];
      const bool forbidden = k == 0 || k + 1 == ny || (i == 0 && y < 0.0) || (i + 1 == nx && y > 0.0);
      if (forbidden && std::abs(v.at(i, k)) > tol)
        fail_numerical("weak_residual: test function does not vanish on the non-inflow boundary");
    }
  const Field vx = diff(v, Axis::X, 1);
  const Field uy = diff(u, Axis::Y, 1);
  const Field vy = diff(v, Axis::Y, 1);
  const Field& f = problem.data.f;
  double acc = 0.0;
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t k = 0; k < ny; ++k) {
      const double w = g.wx()[i] * g.wy()[k];
      acc += w * (-g.y()[k] * u.at(i, k) * vx.at(i, k) + uy.at(i, k) * vy.at(i, k) - f.at(i, k) * v.at(i, k));
    }
  const auto& d0 = problem.data.delta0;
  const auto& d1 = problem.data.delta1;
  auto w0 = trapezoid_weights(d0.s);
  auto w1 = trapezoid_weights(d1.s);
  for (std::size_t m = 0; m < d0.s.size(); ++m) acc -= w0[m] * d0.s[m] * d0.values[m] * v.at(0, k0 + m);
  for (std::size_t m = 0; m < d1.s.size(); ++m) acc += w1[m] * d1.s[m] * d1.values[m] * v.at(nx - 1, m);
  return acc;
}

}  // namespace fbflow
