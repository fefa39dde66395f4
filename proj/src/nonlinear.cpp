#include "fbflow/nonlinear.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/tools/toms748_solve.hpp>

namespace fbflow {

namespace {

double relative_cutoff(double s) {
  double S, S1, S2;
  smooth_step((s - 1.0 / 3.0) * 6.0, S, S1, S2);
  return 1.0 - S;
}

std::vector<double> column(const Field& f, std::size_t i) {
  const std::size_t ny = f.grid()->ny();
  return {f.values().begin() + long(i * ny), f.values().begin() + long((i + 1) * ny)};
}

double clamp_with_warning(double t, double lo, double hi, const char* where) {
  constexpr double slack = 1e-8;
  if (t < lo - slack || t > hi + slack) {
    std::ostringstream os;
    os << where << ": evaluation point " << t << " outside [" << lo << ", " << hi << "], clamped";
    emit_warning(os.str());
  }
  return std::clamp(t, lo, hi);
}

}  // namespace

Field initial_guess(const Trace& delta0, const Trace& delta1, const GridPtr& grid) {
  const Grid& g = *grid;
  const double x0 = g.domain().x0, L = g.domain().length();
  const std::size_t k0 = g.k0();
  Field u(grid);
  for (std::size_t i = 0; i < g.nx(); ++i) {
    const double s = (g.x()[i] - x0) / L;
    const double c0 = relative_cutoff(s), c1 = relative_cutoff(1.0 - s);
    for (std::size_t m = 0; m < delta0.values.size(); ++m) u.at(i, k0 + m) += delta0.values[m] * c0;
    for (std::size_t k = 0; k < delta1.values.size(); ++k) u.at(i, k) += delta1.values[k] * c1;
  }
  return u;
}

// ---------------------------------------------------------------- interpolation

LineInterpolant::LineInterpolant(std::vector<double> s, std::vector<double> v)
    : s_(std::move(s)), v_(std::move(v)) {
  if (s_.size() != v_.size() || s_.size() < 5) fail_config("interpolant needs at least five matching nodes");
  d_ = diff1d_width(s_, v_, 1, 5);
}

double LineInterpolant::operator()(double t) const {
  t = std::clamp(t, s_.front(), s_.back());
  auto it = std::upper_bound(s_.begin(), s_.end(), t);
  std::size_t j = it == s_.begin() ? 0 : std::size_t(it - s_.begin()) - 1;
  if (j + 1 >= s_.size()) j = s_.size() - 2;
  const double h = s_[j + 1] - s_[j];
  const double r = (t - s_[j]) / h;
  if (r == 0.0) return v_[j];
  const double r2 = r * r, r3 = r2 * r;
  return (2 * r3 - 3 * r2 + 1) * v_[j] + (r3 - 2 * r2 + r) * h * d_[j] + (-2 * r3 + 3 * r2) * v_[j + 1] +
         (r3 - r2) * h * d_[j + 1];
}

// ---------------------------------------------------------------- change of variables

ChangeOfVariables change_of_variables(const Field& u_n) {
  const GridPtr& gp = u_n.grid();
  const Grid& g = *gp;
  const std::size_t nx = g.nx(), ny = g.ny(), k0 = g.k0();
  ChangeOfVariables cov;
  cov.grid = gp;
  cov.u = u_n;
  cov.Y = Field(gp);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t k = 0; k < ny; ++k) cov.Y.at(i, k) = g.y()[k];

  if (u_n.max_abs() == 0.0) {
    cov.identity = true;
    cov.coeffs = CoefficientSet::shear(gp);
    cov.coeffs.provenance = CoefficientSet::Provenance::FromIterate;
    return cov;
  }

  Field uy(gp), uyy(gp);
  for (std::size_t i = 0; i < nx; ++i) {
    const auto line = column(u_n, i);
    const auto d1 = diff1d_width(g.y(), line, 1, 5);
    const auto d2 = diff1d_width(g.y(), line, 2, 5);
    std::copy(d1.begin(), d1.end(), uy.values().begin() + long(i * ny));
    std::copy(d2.begin(), d2.end(), uyy.values().begin() + long(i * ny));
  }
  const Field ux = diff(u_n, Axis::X, 1);
  if (uy.max_abs() >= 1.0) {
    std::ostringstream os;
    os << "change of variables not invertible: max |d_y u| = " << uy.max_abs();
    fail_numerical(os.str());
  }
  cov.min_slope = 1.0;
  for (double v : uy.values()) cov.min_slope = std::min(cov.min_slope, 1.0 + v);

  CoefficientSet& c = cov.coeffs;
  c.alpha = Field(gp);
  c.gamma1 = Field(gp);
  c.gamma2 = Field(gp);
  c.provenance = CoefficientSet::Provenance::FromIterate;
  Field gamma(gp);

  for (std::size_t i = 0; i < nx; ++i) {
    const LineInterpolant U(g.y(), column(u_n, i));
    const LineInterpolant Uy(g.y(), column(uy, i));
    const LineInterpolant Uyy(g.y(), column(uyy, i));
    const LineInterpolant Ux(g.y(), column(ux, i));
    for (std::size_t k = 1; k + 1 < ny; ++k) {
      const double z = g.y()[k];
      auto F = [&](double Y) { return Y + U(Y) - z; };
      double lo = -1.0, hi = 1.0;
      boost::uintmax_t it = 200;
      auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-14; };
      auto r = boost::math::tools::toms748_solve(F, lo, hi, F(lo), F(hi), tol, it);
      const double Y = 0.5 * (r.first + r.second);
      cov.Y.at(i, k) = Y;
      cov.root_residual = std::max(cov.root_residual, std::abs(F(Y)));
    }
    for (std::size_t k = 0; k < ny; ++k) {
      const double Y = cov.Y.at(i, k), z = g.y()[k];
      const double a = 1.0 + Uy(Y);
      c.alpha.at(i, k) = a * a;
      gamma.at(i, k) = z * Ux(Y) - Uyy(Y);
    }
    const double g0 = -Uyy(cov.Y.at(i, k0));
    auto line = column(gamma, i);
    line[k0] = g0;
    const double slope0 = diff1d_width(g.y(), line, 1, 5)[k0];
    for (std::size_t k = 0; k < ny; ++k) {
      c.gamma2.at(i, k) = g0;
      c.gamma1.at(i, k) = k == k0 ? slope0 : (line[k] - g0) / g.y()[k];
    }
  }
  c.validate();
  return cov;
}

Field ChangeOfVariables::pullback(const Field& f) const {
  if (identity) return f;
  const Grid& g = *grid;
  Field out(grid);
  for (std::size_t i = 0; i < g.nx(); ++i) {
    const LineInterpolant F(g.y(), column(f, i));
    for (std::size_t k = 0; k < g.ny(); ++k)
      out.at(i, k) = F(clamp_with_warning(Y.at(i, k), -1.0, 1.0, "pullback"));
  }
  return out;
}

Trace ChangeOfVariables::pullback(const Trace& t) const {
  if (identity) return t;
  const Grid& g = *grid;
  const bool front = t.edge == Edge::Sigma0;
  const std::size_t i = front ? 0 : g.nx() - 1;
  const std::size_t offset = front ? g.k0() : 0;
  const LineInterpolant D(t.s, t.values);
  Trace out = t;
  for (std::size_t m = 0; m < t.s.size(); ++m)
    out.values[m] = D(clamp_with_warning(Y.at(i, offset + m), D.front(), D.back(), "trace pullback"));
  return out;
}

Field ChangeOfVariables::pushforward(const Field& G) const {
  if (identity) return G;
  const Grid& g = *grid;
  Field out(grid);
  for (std::size_t i = 0; i < g.nx(); ++i) {
    const LineInterpolant F(g.y(), column(G, i));
    for (std::size_t k = 0; k < g.ny(); ++k)
      out.at(i, k) = F(clamp_with_warning(g.y()[k] + u.at(i, k), -1.0, 1.0, "pushforward"));
  }
  return out;
}

// ---------------------------------------------------------------- iteration

nlohmann::json StepRecord::to_json() const {
  return {{"n", n},         {"diff_qhalf", diff_qhalf}, {"nu0", nu0},
          {"nu1", nu1},     {"Mn_cond", mn_cond},       {"ell_post", {ell_post[0], ell_post[1]}}};
}

std::vector<double> IterationState::ratios() const {
  std::vector<double> r;
  for (std::size_t k = 1; k < history.size(); ++k)
    r.push_back(history[k - 1].diff_qhalf > 0.0 ? history[k].diff_qhalf / history[k - 1].diff_qhalf : 0.0);
  return r;
}

double corrector_source(const CorrectorBasis& basis, int i, double x, double y) {
  double acc = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double w = basis.Ainv(k, i);
    if (w == 0.0) continue;
    const auto& p = basis.profiles[std::size_t(k)];
    acc += w * singular_source(k, p.u.grid()->domain(), p.cutoff, g0_default(), x, y);
  }
  return acc;
}

Field total_source(const DataTriple& triple, const CorrectorBasis& basis, double nu0, double nu1) {
  Field f = triple.f;
  if (nu0 != 0.0) f += nu0 * basis.xi[0].f;
  if (nu1 != 0.0) f += nu1 * basis.xi[1].f;
  return f;
}

IterationState iterate_step(const IterationState& state, const DataTriple& triple, const CorrectorBasis& basis,
                            const NonlinearOptions& opt) {
  const GridPtr& gp = triple.grid();
  const Grid& g = *gp;
  const ChangeOfVariables cov = change_of_variables(state.u);
  auto ev = std::make_shared<FunctionalEvaluator>(cov.coeffs);

  bool fresh = true;
  if (state.evaluator && !state.force_fresh && state.history.size() >= 2) {
    const double d = state.history.back().diff_qhalf;
    if (d <= opt.dual_refresh_ratio * state.last_refresh_diff) {
      ev->adopt_duals(*state.evaluator);
      fresh = false;
    }
  }

  DataTriple fixed = DataTriple::zero(gp);
  fixed.f = cov.pullback(triple.f);
  fixed.delta0 = cov.pullback(triple.delta0);
  fixed.delta1 = cov.pullback(triple.delta1);

  std::array<DataTriple, 2> corr{DataTriple::zero(gp), DataTriple::zero(gp)};
  for (int i = 0; i < 2; ++i) {
    if (cov.identity) {
      corr[std::size_t(i)].f = basis.xi[std::size_t(i)].f;
      continue;
    }
    Field& f = corr[std::size_t(i)].f;
    for (std::size_t a = 0; a < g.nx(); ++a)
      for (std::size_t k = 0; k < g.ny(); ++k) f.at(a, k) = corrector_source(basis, i, g.x()[a], cov.Y.at(a, k));
  }

  Eigen::Matrix2d M;
  Eigen::Vector2d b;
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) M(j, i) = ev->ell_dual(j, corr[std::size_t(i)]);
    b[j] = -ev->ell_dual(j, fixed);
  }
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(M);
  const auto sv = svd.singularValues();
  const double cond = sv[1] > 0.0 ? sv[0] / sv[1] : std::numeric_limits<double>::infinity();
  if (!(cond <= opt.max_mn_cond)) {
    std::ostringstream os;
    os << "corrector system ill-conditioned: cond(M_n) = " << cond;
    fail_numerical(os.str());
  }
  const Eigen::Vector2d nu = M.partialPivLu().solve(b);

  DataTriple data = fixed;
  data.f += nu[0] * corr[0].f;
  data.f += nu[1] * corr[1].f;
  const Field U = ev->forward().solve(data);
  Field next = cov.pushforward(U);

  StepRecord rec;
  rec.n = state.n + 1;
  rec.nu0 = nu[0];
  rec.nu1 = nu[1];
  rec.mn_cond = cond;
  rec.mn_dev = (M - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff();
  rec.ell_post = ev->ell(data);
  rec.fresh_dual = fresh;
  const Field w = next - state.u;
  rec.diff_qhalf = norm(w, NormKind::Qhalf);
  rec.diff_l2 = norm(w, NormKind::L2);

  IterationState out;
  out.n = state.n + 1;
  out.u = std::move(next);
  out.nu0 = nu[0];
  out.nu1 = nu[1];
  out.history = state.history;
  out.history.push_back(rec);
  out.evaluator = ev;
  out.last_refresh_diff = fresh ? rec.diff_qhalf : state.last_refresh_diff;
  return out;
}

Field nonlinear_residual(const Field& u, const Field& rhs) {
  const Grid& g = *u.grid();
  const std::size_t nx = g.nx(), ny = g.ny();
  const auto& x = g.x();
  const auto& y = g.y();
  Field r(u.grid());
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t k = 1; k + 1 < ny; ++k) {
      const double a = y[k] + u.at(i, k);
      double adv = 0.0;
      if (a > 0.0) {
        if (i == 0) continue;
        adv = a * (u.at(i, k) - u.at(i - 1, k)) / (x[i] - x[i - 1]);
      } else if (a < 0.0) {
        if (i + 1 == nx) continue;
        adv = a * (u.at(i + 1, k) - u.at(i, k)) / (x[i + 1] - x[i]);
      }
      const double hm = y[k] - y[k - 1], hp = y[k + 1] - y[k];
      const double uyy =
          2.0 * (hm * u.at(i, k + 1) - (hm + hp) * u.at(i, k) + hp * u.at(i, k - 1)) / (hm * hp * (hm + hp));
      r.at(i, k) = adv - uyy - rhs.at(i, k);
    }
  return r;
}

nlohmann::json NonlinearResult::report() const {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : state.history) hist.push_back(h.to_json());
  return {{"nu0", nu0},
          {"nu1", nu1},
          {"iterations", state.n},
          {"converged", state.converged},
          {"residual_l2", residual_l2},
          {"residual_inf", residual_inf},
          {"history", hist}};
}

NonlinearResult nonlinear_solve(const DataTriple& triple, const CorrectorBasis& basis, const NonlinearOptions& opt) {
  const GridPtr& gp = triple.grid();
  const double size = norm(triple, NormKind::Hdata, false);
  if (size > opt.eta) {
    std::ostringstream os;
    os << "nonlinear_solve: data norm " << size << " exceeds smallness threshold " << opt.eta;
    emit_warning(os.str());
  }
  IterationState state;
  state.u = opt.zero_initial_guess ? Field(gp) : initial_guess(triple.delta0, triple.delta1, gp);

  int growing = 0;
  while (state.n < opt.maxit) {
    state = iterate_step(state, triple, basis, opt);
    const StepRecord& last = state.history.back();
    if (state.history.size() >= 2) {
      const double prev = state.history[state.history.size() - 2].diff_qhalf;
      growing = prev > 0.0 && last.diff_qhalf >= prev ? growing + 1 : 0;
      if (growing >= 3) {
        nlohmann::json hist = nlohmann::json::array();
        for (const auto& h : state.history) hist.push_back(h.to_json());
        fail_numerical("iteration not contracting: " + hist.dump());
      }
    }
    if (last.diff_qhalf < opt.tol) {
      if (last.fresh_dual) {
        state.converged = true;
        break;
      }
      state.force_fresh = true;  // the last functionals used a stale dual; confirm with a fresh one
    } else {
      state.force_fresh = false;
    }
  }
  if (!state.converged) {
    std::ostringstream os;
    os << "nonlinear iteration did not converge in " << opt.maxit << " steps (last diff "
       << (state.history.empty() ? 0.0 : state.history.back().diff_qhalf) << ")";
    fail_numerical(os.str());
  }

  NonlinearResult res;
  res.u = state.u;
  res.nu0 = state.nu0;
  res.nu1 = state.nu1;
  const Field r = nonlinear_residual(res.u, total_source(triple, basis, res.nu0, res.nu1));
  res.residual_l2 = norm(r, NormKind::L2);
  res.residual_inf = r.max_abs();
  res.state = std::move(state);
  return res;
}

// ---------------------------------------------------------------- manifold

DataTriple project_perp(const DataTriple& xi, const CorrectorBasis& basis) {
  const Eigen::Vector2d r(inner_product_H(basis.xi[0], xi, false), inner_product_H(basis.xi[1], xi, false));
  const Eigen::Vector2d c = basis.gram.fullPivLu().solve(r);
  DataTriple out = xi;
  out += (-c[0]) * basis.xi[0];
  out += (-c[1]) * basis.xi[1];
  return out;
}

ManifoldPoint manifold_point(const DataTriple& xi_perp, const CorrectorBasis& basis, const NonlinearOptions& opt) {
  ManifoldPoint p;
  p.xi_perp = xi_perp;
  const double nperp = norm(xi_perp, NormKind::Hdata, false);
  for (int k = 0; k < 2; ++k) {
    const double nk = std::sqrt(basis.gram(k, k));
    if (std::abs(inner_product_H(basis.xi[std::size_t(k)], xi_perp, false)) > 1e-8 * nk * nperp) {
      p.projected = true;
    }
  }
  if (p.projected) {
    emit_warning("manifold_point: base triple not orthogonal to the corrector triples, projected");
    p.xi_perp = project_perp(xi_perp, basis);
  }
  p.solution = nonlinear_solve(p.xi_perp, basis, opt);
  p.nu0 = p.solution.nu0;
  p.nu1 = p.solution.nu1;
  p.xi = p.xi_perp;
  p.xi += p.nu0 * basis.xi[0];
  p.xi += p.nu1 * basis.xi[1];
  const double nxi = norm(p.xi, NormKind::Hdata, false);
  for (int k = 0; k < 2; ++k) {
    p.inner[std::size_t(k)] = inner_product_H(basis.xi[std::size_t(k)], p.xi, false);
    if (nxi == 0.0) continue;
    const double scale = std::sqrt(basis.gram(k, k)) * nxi;
    const double expect = basis.gram(k, 0) * p.nu0 + basis.gram(k, 1) * p.nu1;
    p.invariant_gap = std::max(p.invariant_gap, std::abs(p.inner[std::size_t(k)] - expect) / scale);
    const double nu = k == 0 ? p.nu0 : p.nu1;
    p.unit_gram_gap = std::max(p.unit_gram_gap, std::abs(p.inner[std::size_t(k)] - nu) / scale);
  }
  return p;
}

DataTriple tangent_direction(const CorrectorBasis& basis, const FunctionalEvaluator& shear, std::uint64_t seed) {
  const GridPtr& gp = shear.grid();
  const DataTriple R = random_admissible_triple(gp, seed);
  const std::array<DataTriple, 2> P{random_admissible_triple(gp, seed + 1), random_admissible_triple(gp, seed + 2)};
  // unknowns (a0, a1, b0, b1): R + a.Xi + b.P with ell(.) = 0 and <Xi^k, .> = 0
  Eigen::Matrix4d A;
  Eigen::Vector4d rhs;
  for (int j = 0; j < 2; ++j) {
    A(j, 0) = j == 0 ? 1.0 : 0.0;
    A(j, 1) = j == 1 ? 1.0 : 0.0;
    for (int m = 0; m < 2; ++m) A(j, 2 + m) = shear.ell_dual(j, P[std::size_t(m)]);
    rhs[j] = -shear.ell_dual(j, R);
  }
  for (int k = 0; k < 2; ++k) {
    for (int i = 0; i < 2; ++i) A(2 + k, i) = basis.gram(k, i);
    for (int m = 0; m < 2; ++m) A(2 + k, 2 + m) = inner_product_H(basis.xi[std::size_t(k)], P[std::size_t(m)], false);
    rhs[2 + k] = -inner_product_H(basis.xi[std::size_t(k)], R, false);
  }
  for (int r = 0; r < 4; ++r) {
    const double s = A.row(r).cwiseAbs().maxCoeff();
    A.row(r) /= s;
    rhs[r] /= s;
  }
  const Eigen::Vector4d c = A.fullPivLu().solve(rhs);
  DataTriple t = R;
  t += c[0] * basis.xi[0];
  t += c[1] * basis.xi[1];
  t += c[2] * P[0];
  t += c[3] * P[1];
  const double n = norm(t, NormKind::Hdata, false);
  if (!(n > 0.0)) fail_numerical("tangent direction degenerate");
  t *= 1.0 / n;
  return t;
}

}  // namespace fbflow
