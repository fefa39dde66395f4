#include "fbflow/ortho.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fbflow {

namespace {

// Trapezoid weights restricted to y >= 0 (upper) or y <= 0 (lower), indexed by grid k.
std::vector<double> half_weights(const Grid& g, bool upper) {
  std::vector<double> w(g.ny(), 0.0);
  const std::size_t k0 = g.k0();
  const auto& y = g.y();
  if (upper) {
    for (std::size_t k = k0 + 1; k < g.ny(); ++k) {
      const double h = y[k] - y[k - 1];
      w[k - 1] += 0.5 * h;
      w[k] += 0.5 * h;
    }
  } else {
    for (std::size_t k = 1; k <= k0; ++k) {
      const double h = y[k] - y[k - 1];
      w[k - 1] += 0.5 * h;
      w[k] += 0.5 * h;
    }
  }
  return w;
}

double trace_derivative_at_zero(const Trace& t, int j) {
  const bool front = t.edge == Edge::Sigma0;
  const std::size_t z = front ? 0 : t.s.size() - 1;
  if (j == 0) return t.values[z];
  return one_sided_derivative(t.s, t.values, z, 1, 5, !front);
}

// Coefficient column at x = x_i restricted to a trace's nodes.
std::vector<double> column_on_trace(const Field& c, std::size_t i, const Trace& t, std::size_t offset) {
  std::vector<double> out(t.s.size());
  for (std::size_t m = 0; m < t.s.size(); ++m) out[m] = c.at(i, offset + m);
  return out;
}

bool vanishes(const Field& f) { return f.max_abs() == 0.0; }

}  // namespace

DerivedData derived_data(const DataTriple& t, const CoefficientSet& c, double tol) {
  const GridPtr& gp = t.grid();
  const Grid& g = *gp;
  const std::size_t nx = g.nx(), k0 = g.k0();
  const Field gamma = c.gamma();
  DerivedData dd;

  // seven-point trace derivatives: exact through degree six
  auto width = [](const Trace& tr) { return int(std::min<std::size_t>(7, tr.s.size())); };
  auto quotient = [&](const Trace& tr, std::size_t i, std::size_t offset, const char* name) {
    auto d1 = diff1d_width(tr.s, tr.values, 1, width(tr));
    auto d2 = diff1d_width(tr.s, tr.values, 2, width(tr));
    auto a = column_on_trace(c.alpha, i, tr, offset);
    auto gm = column_on_trace(gamma, i, tr, offset);
    auto f = column_on_trace(t.f, i, tr, offset);
    const std::size_t n = tr.s.size();
    std::vector<double> num(n);
    double scale = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      num[m] = f[m] + a[m] * d2[m] - gm[m] * d1[m];
      scale = std::max(scale, std::abs(num[m]));
    }
    const bool front = tr.edge == Edge::Sigma0;
    const std::size_t z = front ? 0 : n - 1;
    if (std::abs(num[z]) > tol * scale + 1e-13) {
      std::ostringstream os;
      os << "trace incompatible with degenerate line: " << name << " numerator at y=0 is " << num[z]
         << " (scale " << scale << ")";
      fail_numerical(os.str());
    }
    Trace out = tr;
    for (std::size_t m = 0; m < n; ++m)
      out.values[m] = m == z ? one_sided_derivative(tr.s, num, z, 1, 5, !front) : num[m] / tr.s[m];
    return out;
  };
  dd.Delta0 = quotient(t.delta0, 0, k0, "delta0");
  dd.Delta1 = quotient(t.delta1, nx - 1, 0, "delta1");

  const Field fx = diff(t.f, Axis::X, 1);
  dd.h0 = fx;
  dd.h1 = fx;
  const Field ax = diff(c.alpha, Axis::X, 1);
  const Field gx = diff(gamma, Axis::X, 1);
  if (!vanishes(ax) || !vanishes(gx)) {
    auto add = [&](Field& h, const Trace& tr, std::size_t offset) {
      auto d1 = diff1d_width(tr.s, tr.values, 1, width(tr));
      auto d2 = diff1d_width(tr.s, tr.values, 2, width(tr));
      for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t m = 0; m < tr.s.size(); ++m)
          h.at(i, offset + m) += ax.at(i, offset + m) * d2[m] - gx.at(i, offset + m) * d1[m];
    };
    add(dd.h0, t.delta0, k0);
    add(dd.h1, t.delta1, 0);
  }
  return dd;
}

// ---------------------------------------------------------------- evaluator

FunctionalEvaluator::FunctionalEvaluator(CoefficientSet coeffs) : coeffs_(std::move(coeffs)) {
  coeffs_.validate();
  has_nonlocal_ = !vanishes(diff(coeffs_.alpha, Axis::X, 1)) || !vanishes(diff(coeffs_.gamma(), Axis::X, 1));
}

FunctionalEvaluator::~FunctionalEvaluator() = default;

const LinearOperator& FunctionalEvaluator::forward() const {
  std::lock_guard<std::mutex> lock(mutex_);
  if (!fwd_) fwd_ = std::make_unique<LinearOperator>(coeffs_, false);
  return *fwd_;
}

const DualProfile& FunctionalEvaluator::dual(int j) const {
  if (j != 0 && j != 1) fail_config("functional index must be 0 or 1");
  std::lock_guard<std::mutex> lock(mutex_);
  if (!dual_[std::size_t(j)]) {
    if (!adj_) adj_ = std::make_unique<LinearOperator>(coeffs_, true);
    dual_[std::size_t(j)] = std::make_shared<const DualProfile>(solve_adjoint_with_jumps(j, *adj_));
  }
  return *dual_[std::size_t(j)];
}

void FunctionalEvaluator::adopt_duals(const FunctionalEvaluator& other) {
  other.dual(0);
  other.dual(1);
  std::scoped_lock lock(mutex_, other.mutex_);
  dual_ = other.dual_;
}

double FunctionalEvaluator::dual_formula(int j, const DataTriple& t, const DerivedData& dd) const {
  const Grid& g = *grid();
  const DualProfile& phi = dual(j);
  const std::size_t nx = g.nx(), ny = g.ny(), k0 = g.k0();
  double acc = trace_derivative_at_zero(t.delta0, j) - trace_derivative_at_zero(t.delta1, j);
  const auto wup = half_weights(g, true);
  const auto wlo = half_weights(g, false);
  for (std::size_t i = 0; i < nx; ++i) {
    double col = 0.0;
    for (std::size_t k = k0; k < ny; ++k) col += wup[k] * dd.h0.at(i, k) * phi.phi_plus.at(i, k);
    for (std::size_t k = 0; k <= k0; ++k) col += wlo[k] * dd.h1.at(i, k) * phi.phi_minus.at(i, k);
    acc += g.wx()[i] * col;
  }
  const auto w0 = trapezoid_weights(dd.Delta0.s);
  for (std::size_t m = 0; m < w0.size(); ++m)
    acc += w0[m] * dd.Delta0.s[m] * dd.Delta0.values[m] * phi.phi_plus.at(0, k0 + m);
  const auto w1 = trapezoid_weights(dd.Delta1.s);
  for (std::size_t m = 0; m < w1.size(); ++m)
    acc -= w1[m] * dd.Delta1.s[m] * dd.Delta1.values[m] * phi.phi_minus.at(nx - 1, m);
  return acc;
}

double FunctionalEvaluator::ell_dual(int j, const DataTriple& t) const {
  if (j != 0 && j != 1) fail_config("functional index must be 0 or 1");
  return dual_formula(j, t, derived_data(t, coeffs_));
}

double FunctionalEvaluator::ell_direct(int j, const DataTriple& t) const {
  if (j != 0 && j != 1) fail_config("functional index must be 0 or 1");
  const GridPtr& gp = grid();
  const Grid& g = *gp;
  const std::size_t nx = g.nx(), ny = g.ny(), k0 = g.k0();
  const auto dd = derived_data(t, coeffs_);
  const LinearOperator& op = forward();

  DataTriple w_data = DataTriple::zero(gp);
  w_data.delta0 = dd.Delta0;
  w_data.delta1 = dd.Delta1;
  Field base(gp);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t k = 0; k < ny; ++k)
      base.at(i, k) = k > k0 ? dd.h0.at(i, k) : k < k0 ? dd.h1.at(i, k) : 0.5 * (dd.h0.at(i, k) + dd.h1.at(i, k));
  w_data.f = base;
  Field w = op.solve(w_data);
  picard_its_ = 0;

  if (has_nonlocal_) {
    const Field ax = diff(coeffs_.alpha, Axis::X, 1);
    const Field gx = diff(coeffs_.gamma(), Axis::X, 1);
    const auto sm = coeffs_.smallness();
    if (!sm.within(0.1)) emit_warning("ell_direct: coefficient smallness monitors exceed 0.1");
    double prev_diff = std::numeric_limits<double>::infinity();
    int growth = 0;
    bool converged = false;
    for (int it = 1; it <= 50; ++it) {
      // V+ = int_{x0}^x w, V- = int_x^{x1} w
      Field vp(gp), vm(gp);
      for (std::size_t k = 0; k < ny; ++k) {
        double run = 0.0;
        for (std::size_t i = 1; i < nx; ++i) {
          run += 0.5 * (g.x()[i] - g.x()[i - 1]) * (w.at(i, k) + w.at(i - 1, k));
          vp.at(i, k) = run;
        }
        for (std::size_t i = 0; i < nx; ++i) vm.at(i, k) = run - vp.at(i, k);
      }
      const Field vp_y = diff(vp, Axis::Y, 1), vp_yy = diff(vp, Axis::Y, 2);
      const Field vm_y = diff(vm, Axis::Y, 1), vm_yy = diff(vm, Axis::Y, 2);
      Field src = base;
      for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t k = 0; k < ny; ++k) {
          const double np = ax.at(i, k) * vp_yy.at(i, k) - gx.at(i, k) * vp_y.at(i, k);
          const double nm = -ax.at(i, k) * vm_yy.at(i, k) + gx.at(i, k) * vm_y.at(i, k);
          src.at(i, k) += k > k0 ? np : k < k0 ? nm : 0.5 * (np + nm);
        }
      w_data.f = src;
      Field next = op.solve(w_data);
      const double d = norm(next - w, NormKind::L2);
      const double scale = std::max(1.0, norm(next, NormKind::L2));
      w = std::move(next);
      picard_its_ = it;
      if (d < 1e-10 * scale) {
        converged = true;
        break;
      }
      growth = d >= prev_diff ? growth + 1 : 0;
      prev_diff = d;
      if (growth >= 3 || !std::isfinite(d)) break;
    }
    if (!converged) fail_numerical("nonlocal iteration diverged in ell_direct");
  }

  double acc = trace_derivative_at_zero(t.delta0, j) - trace_derivative_at_zero(t.delta1, j);
  for (std::size_t i = 0; i < nx; ++i) {
    double v;
    if (j == 0) {
      v = w.at(i, k0);
    } else {
      std::span<const double> line(w.values().data() + i * ny, ny);
      const double up = one_sided_derivative(g.y(), line, k0, 1, 4, false);
      const double dn = one_sided_derivative(g.y(), line, k0, 1, 4, true);
      v = 0.5 * (up + dn);
    }
    acc += g.wx()[i] * v;
  }
  return acc;
}

double ell_dual(int j, const DataTriple& triple, const CoefficientSet& coeffs) {
  return FunctionalEvaluator(coeffs).ell_dual(j, triple);
}

double ell_direct(int j, const DataTriple& triple, const CoefficientSet& coeffs) {
  return FunctionalEvaluator(coeffs).ell_direct(j, triple);
}

// ---------------------------------------------------------------- corrector basis

CorrectorBasis build_corrector_basis(const FunctionalEvaluator& ev, const Cutoff& cutoff) {
  const GridPtr& gp = ev.grid();
  CorrectorBasis b;
  for (int j = 0; j < 2; ++j) {
    b.profiles[std::size_t(j)] = singular_profile(j, gp, cutoff);
    DataTriple c = DataTriple::zero(gp);
    c.f = b.profiles[std::size_t(j)].f;
    b.candidates[std::size_t(j)] = std::move(c);
  }
  for (std::size_t p = 0; p < gp->size(); ++p)
    if (b.profiles[0].f.values()[p] != 0.0 && b.profiles[1].f.values()[p] != 0.0)
      fail_config("singular sources overlap; reduce the cutoff radius");
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) b.A(i, j) = ev.ell_dual(i, b.candidates[std::size_t(j)]);
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(b.A);
  const auto sv = svd.singularValues();
  b.cond = sv[1] > 0.0 ? sv[0] / sv[1] : std::numeric_limits<double>::infinity();
  if (!(b.cond <= 1e8)) {
    std::ostringstream os;
    os << "corrector basis degenerate: cond = " << b.cond;
    fail_numerical(os.str());
  }
  b.Ainv = b.A.inverse();
  for (int j = 0; j < 2; ++j) {
    DataTriple x = DataTriple::zero(gp);
    for (int k = 0; k < 2; ++k) x += b.Ainv(k, j) * b.candidates[std::size_t(k)];
    b.xi[std::size_t(j)] = std::move(x);
  }
  b.normalization_error = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double v = ev.ell_dual(i, b.xi[std::size_t(j)]);
      b.normalization_error = std::max(b.normalization_error, std::abs(v - (i == j ? 1.0 : 0.0)));
    }
  if (b.normalization_error > 1e-8) {
    std::ostringstream os;
    os << "corrector normalization failed: max |ell^i(Xi^j) - delta_ij| = " << b.normalization_error;
    fail_numerical(os.str());
  }
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      b.gram(i, j) = inner_product_H(b.xi[std::size_t(i)], b.xi[std::size_t(j)], false);
  return b;
}

CorrectorBasis build_corrector_basis(const GridPtr& grid, const Cutoff& cutoff) {
  FunctionalEvaluator ev(CoefficientSet::shear(grid));
  return build_corrector_basis(ev, cutoff);
}

// ---------------------------------------------------------------- decomposition

nlohmann::json Decomposition::report() const {
  auto fit = [](const FitResult& f) -> nlohmann::json {
    if (!std::isfinite(f.c)) return nullptr;
    return {{"c", f.c}, {"std_error", f.std_error}, {"quality", f.quality}, {"samples", f.samples},
            {"singular_content", f.singular_content}};
  };
  return {{"c0", c0},
          {"c1", c1},
          {"ell_pre", {ell_pre[0], ell_pre[1]}},
          {"ell_post", {ell_post[0], ell_post[1]}},
          {"singular_fit_pre", {fit(fit_pre[0]), fit(fit_pre[1])}},
          {"singular_fit_post", {fit(fit_post[0]), fit(fit_post[1])}},
          {"reconstruction_error", reconstruction_error}};
}

Decomposition decompose(const DataTriple& triple, const FunctionalEvaluator& ev, const CorrectorBasis& basis,
                        double rmin, double rmax) {
  if (!ev.coeffs().is_shear()) fail_config("decompose requires shear coefficients");
  Decomposition d;
  d.ell_pre = ev.ell(triple);
  const Eigen::Vector2d c = basis.Ainv * Eigen::Vector2d(d.ell_pre[0], d.ell_pre[1]);
  d.c0 = c[0];
  d.c1 = c[1];
  DataTriple reg = triple;
  reg.f -= d.c0 * basis.profiles[0].f;
  reg.f -= d.c1 * basis.profiles[1].f;
  d.ell_post = ev.ell(reg);
  const double tol = 1e-6 * (1.0 + std::max(std::abs(d.ell_pre[0]), std::abs(d.ell_pre[1])));
  if (std::abs(d.ell_post[0]) > tol || std::abs(d.ell_post[1]) > tol) {
    std::ostringstream os;
    os << "decomposition post-check failed: ell_post = (" << d.ell_post[0] << ", " << d.ell_post[1] << ")";
    fail_numerical(os.str());
  }
  d.u = ev.forward().solve(triple);
  d.u_reg = ev.forward().solve(reg);
  Field rec = d.u - d.u_reg;
  rec -= d.c0 * basis.profiles[0].u;
  rec -= d.c1 * basis.profiles[1].u;
  d.reconstruction_error = rec.max_abs();
  for (int i = 0; i < 2; ++i) {
    auto safe_fit = [&](const Field& u) {
      try {
        return fit_singular_strength(u, i, rmin, rmax);
      } catch (const Error& e) {
        emit_warning(std::string("decompose: ") + e.what());
        FitResult f;
        f.c = std::numeric_limits<double>::quiet_NaN();
        return f;
      }
    };
    d.fit_pre[std::size_t(i)] = safe_fit(d.u);
    d.fit_post[std::size_t(i)] = safe_fit(d.u_reg);
  }
  return d;
}

Decomposition decompose(const DataTriple& triple) {
  FunctionalEvaluator ev(CoefficientSet::shear(triple.grid()));
  auto basis = build_corrector_basis(ev);
  return decompose(triple, ev, basis);
}

// ---------------------------------------------------------------- Lipschitz probe

namespace {

double coefficient_distance(const CoefficientSet& a, const CoefficientSet& b) {
  const Grid& g = *a.grid();
  const Field da = a.alpha - b.alpha;
  const Field d1 = a.gamma1 - b.gamma1;
  const Field d2 = a.gamma2 - b.gamma2;
  double sa = 0.0, s1 = 0.0;
  std::vector<double> line(g.nx());
  for (std::size_t k = 0; k < g.ny(); ++k) {
    for (std::size_t i = 0; i < g.nx(); ++i) line[i] = da.at(i, k);
    sa = std::max(sa, std::sqrt(line_hs_sq(g.x(), line, 7.0 / 12.0)));
    for (std::size_t i = 0; i < g.nx(); ++i) line[i] = d1.at(i, k);
    s1 = std::max(s1, std::sqrt(line_hs_sq(g.x(), line, 0.0)));
  }
  return sa + s1 + std::sqrt(hs_x_sq(d2, 0.5));
}

}  // namespace

LipschitzProbe ell_lipschitz_probe(const CoefficientSet& a, const CoefficientSet& b, std::size_t samples,
                                   std::uint64_t seed) {
  LipschitzProbe p;
  p.coeff_distance = coefficient_distance(a, b);
  if (p.coeff_distance == 0.0) return p;
  FunctionalEvaluator ea(a), eb(b);
  for (std::size_t s = 0; s < samples; ++s) {
    const DataTriple t = random_admissible_triple(a.grid(), seed + s);
    for (int j = 0; j < 2; ++j) p.gap = std::max(p.gap, std::abs(ea.ell_dual(j, t) - eb.ell_dual(j, t)));
  }
  p.ratio = p.gap / p.coeff_distance;
  return p;
}

DataTriple random_admissible_triple(const GridPtr& grid, std::uint64_t seed) {
  // splitmix64 keeps the stream identical across standard libraries
  std::uint64_t state = seed * 0x9E3779B97F4A7C15ull + 0x2545F4914F6CDD1Dull;
  auto uniform = [&]() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    return double(z >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  };
  double c[8];
  for (double& v : c) v = uniform();
  double a[4];
  for (double& v : a) v = uniform();
  const Domain& d = grid->domain();
  const double L = d.length();
  const double pi = 3.14159265358979323846;
  DataTriple t = DataTriple::zero(grid);
  t.f = Field::from_function(grid, [&](double x, double y) {
    const double s = (x - d.x0) / L;
    const double bump = 4.0 * s * (1.0 - s) * (1.0 - y * y) * (1.0 - y * y);
    return bump * (c[0] + c[1] * s + c[2] * y + c[3] * s * y + c[4] * std::sin(pi * y) * std::cos(pi * s) +
                   c[5] * std::cos(2.0 * pi * s) + c[6] * y * y + c[7] * std::sin(2.0 * pi * y));
  });
  t.delta0 = Trace::from_function(*grid, Edge::Sigma0, [&](double y) {
    // supported in |y| <= 0.6, so the far-end conditions hold exactly on the grid
    const double e = std::max(0.0, 1.0 - y / 0.6);
    return 10.0 * y * y * y * std::pow(e, 6) * (a[0] + a[1] * y);
  });
  t.delta1 = Trace::from_function(*grid, Edge::Sigma1, [&](double y) {
    const double e = std::max(0.0, 1.0 + y / 0.6);
    return -10.0 * y * y * y * std::pow(e, 6) * (a[2] + a[3] * y);
  });
  const double n = norm(t, NormKind::Hdata, false);
  if (n > 0.0) t *= 1.0 / n;
  return t;
}

}  // namespace fbflow
