#include "fbflow/domain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <utility>

#include <boost/math/tools/roots.hpp>

namespace fbflow {

void fail_numerical(const std::string& what) { throw Error(ErrorKind::Numerical, what); }
void fail_config(const std::string& what) { throw Error(ErrorKind::Config, what); }

namespace {
std::mutex warn_mutex;
std::vector<std::string> warn_log;
}  // namespace

void emit_warning(const std::string& what) {
  std::lock_guard<std::mutex> lock(warn_mutex);
  warn_log.push_back(what);
}

std::vector<std::string> take_warnings() {
  std::lock_guard<std::mutex> lock(warn_mutex);
  return std::exchange(warn_log, {});
}

Domain::Domain(double a, double b) : x0(a), x1(b) {
  if (!(b - a > 0.0)) fail_config("domain: x1 must exceed x0");
}

Grading Grading::corner(double q, double fraction) {
  Grading g;
  g.kind = Kind::Corner;
  g.q = q;
  g.fraction = fraction;
  return g;
}

namespace {

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * double(i) / double(n - 1);
  v.back() = b;
  return v;
}

// Distances from a graded point to the end of a half-axis of length `half`.
// `nin` intervals fill the zone [0, rho]; the rest is uniform.
std::vector<double> graded_half(std::size_t m, double half, double rho, std::size_t nin, double q,
                                double dmin) {
  const std::size_t nout = m - nin;
  const double hout = (half - rho) / double(nout);
  std::vector<double> d(m + 1, 0.0);
  if (q >= 1.0) {
    if (dmin > 0.0) {
      // geometric: d_1 = dmin, d_nin = rho; ratio capped to keep stencils sane on coarse grids
      const double beta_cap = 1.5;
      double floor_min = rho * std::pow(beta_cap, -double(nin - 1));
      double dm = std::max(dmin, floor_min);
      double beta = std::pow(rho / dm, 1.0 / double(nin - 1));
      for (std::size_t j = 1; j <= nin; ++j) d[j] = dm * std::pow(beta, double(j - 1));
    } else {
      // exponential map whose outer spacing matches the uniform part
      auto edge = [&](double kappa) {
        return rho * kappa * std::exp(kappa) / (std::expm1(kappa) * double(nin)) - hout;
      };
      if (edge(1e-8) >= 0.0) {
        for (std::size_t j = 1; j <= nin; ++j) d[j] = rho * double(j) / double(nin);
      } else {
        boost::uintmax_t it = 200;
        auto r = boost::math::tools::toms748_solve(edge, 1e-8, 60.0,
                                                   boost::math::tools::eps_tolerance<double>(50), it);
        double kappa = 0.5 * (r.first + r.second);
        for (std::size_t j = 1; j <= nin; ++j)
          d[j] = rho * std::expm1(kappa * double(j) / double(nin)) / std::expm1(kappa);
      }
    }
  } else {
    const double p = 1.0 / (1.0 - q);
    for (std::size_t j = 1; j <= nin; ++j) d[j] = rho * std::pow(double(j) / double(nin), p);
  }
  d[nin] = rho;
  for (std::size_t j = 1; j <= nout; ++j) d[nin + j] = rho + hout * double(j);
  d[m] = half;
  return d;
}

std::size_t zone_nodes(double share, std::size_t m) {
  auto nin = std::size_t(std::lround(share * double(m)));
  return std::clamp<std::size_t>(nin, 2, m - 1);
}

}  // namespace

Grid::Grid(Domain domain, std::vector<double> x, std::vector<double> y, Grading grading)
    : domain_(domain), x_(std::move(x)), y_(std::move(y)), grading_(grading) {
  auto check = [](const std::vector<double>& v, const char* name) {
    for (std::size_t i = 1; i < v.size(); ++i)
      if (!(v[i] > v[i - 1])) fail_config(std::string("grid: ") + name + " nodes not increasing");
  };
  check(x_, "x");
  check(y_, "y");
  if (x_.front() != domain_.x0 || x_.back() != domain_.x1) fail_config("grid: x nodes must span the domain");
  if (y_.front() != -1.0 || y_.back() != 1.0) fail_config("grid: y nodes must span [-1,1]");
  auto it = std::find(y_.begin(), y_.end(), 0.0);
  if (it == y_.end()) fail_config("grid: y = 0 must be a node");
  k0_ = std::size_t(it - y_.begin());
  if (grading_.q < 0.0) fail_config("grid: grading strength must be >= 0");
  wx_ = trapezoid_weights(x_);
  wy_ = trapezoid_weights(y_);
}

double Grid::hmax() const {
  double h = 0.0;
  for (std::size_t i = 1; i < x_.size(); ++i) h = std::max(h, x_[i] - x_[i - 1]);
  for (std::size_t k = 1; k < y_.size(); ++k) h = std::max(h, y_[k] - y_[k - 1]);
  return h;
}

nlohmann::json Grid::descriptor() const {
  nlohmann::json g;
  g["kind"] = grading_.kind == Grading::Kind::Uniform ? "uniform" : "corner";
  g["q"] = grading_.q;
  g["fraction"] = grading_.fraction;
  if (grading_.kind == Grading::Kind::Corner) {
    g["radius"] = grading_.radius;
    g["x_min_spacing"] = grading_.x_min_spacing;
    g["y_min_spacing"] = grading_.y_min_spacing;
  }
  return {{"x0", domain_.x0}, {"x1", domain_.x1}, {"nx", nx()}, {"ny", ny()}, {"grading", g}};
}

GridPtr build_grid(const Domain& domain, std::size_t nx, std::size_t ny, const Grading& grading) {
  if (nx < 3 || ny < 5) fail_config("grid too coarse (need nx >= 3, ny >= 5)");
  if (grading.q < 0.0) fail_config("grid: grading strength must be >= 0");
  if (ny % 2 == 0) fail_config("grid: ny must be odd so that y = 0 is a node");
  const double L = domain.length();
  std::vector<double> x, y;
  if (grading.kind == Grading::Kind::Uniform || grading.q == 0.0) {
    x = linspace(domain.x0, domain.x1, nx);
    y = linspace(-1.0, 1.0, ny);
    y[(ny - 1) / 2] = 0.0;
  } else {
    if (nx % 2 == 0) fail_config("grid: corner grading needs odd nx");
    if (grading.fraction <= 0.0 || grading.fraction >= 0.5) fail_config("grid: fraction must lie in (0, 0.5)");
    if (grading.radius <= 0.0 || grading.radius >= 0.5) fail_config("grid: radius must lie in (0, 0.5)");
    const std::size_t mx = (nx - 1) / 2;
    const std::size_t my = (ny - 1) / 2;
    auto dx = graded_half(mx, 0.5 * L, grading.radius * L, zone_nodes(2.0 * grading.fraction, mx), grading.q,
                          grading.x_min_spacing * L);
    auto dy = graded_half(my, 1.0, grading.radius, zone_nodes(grading.fraction, my), grading.q,
                          grading.y_min_spacing);
    x.resize(nx);
    for (std::size_t j = 0; j <= mx; ++j) {
      x[j] = domain.x0 + dx[j];
      x[nx - 1 - j] = domain.x1 - dx[j];
    }
    x[mx] = domain.x0 + 0.5 * L;
    y.resize(ny);
    for (std::size_t j = 0; j <= my; ++j) {
      y[my + j] = dy[j];
      y[my - j] = -dy[j];
    }
  }
  x.front() = domain.x0;
  x.back() = domain.x1;
  return std::make_shared<const Grid>(domain, std::move(x), std::move(y), grading);
}

// ---------------------------------------------------------------- Field

Field::Field(GridPtr grid, double value) : grid_(std::move(grid)), v_(grid_->size(), value) {}

Field::Field(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), v_(std::move(values)) {
  if (v_.size() != grid_->size()) fail_config("field: value count does not match grid");
}

double Field::max_abs() const {
  double m = 0.0;
  for (double v : v_) m = std::max(m, std::abs(v));
  return m;
}

bool Field::finite() const {
  return std::all_of(v_.begin(), v_.end(), [](double v) { return std::isfinite(v); });
}

Field& Field::operator+=(const Field& o) {
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  return *this;
}
Field& Field::operator-=(const Field& o) {
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
  return *this;
}
Field& Field::operator*=(double s) {
  for (double& v : v_) v *= s;
  return *this;
}
Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }
Field operator*(const Field& a, const Field& b) {
  Field c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.values()[i] *= b.values()[i];
  return c;
}

// ---------------------------------------------------------------- Trace / DataTriple

Trace Trace::zero(const Grid& g, Edge e) {
  Trace t;
  t.edge = e;
  const auto& y = g.y();
  switch (e) {
    case Edge::Sigma0: t.s.assign(y.begin() + long(g.k0()), y.end()); break;
    case Edge::Sigma1: t.s.assign(y.begin(), y.begin() + long(g.k0()) + 1); break;
    default: t.s = g.x(); break;
  }
  t.values.assign(t.s.size(), 0.0);
  return t;
}

DataTriple DataTriple::zero(GridPtr g) {
  DataTriple t;
  t.delta0 = Trace::zero(*g, Edge::Sigma0);
  t.delta1 = Trace::zero(*g, Edge::Sigma1);
  t.f = Field(std::move(g));
  return t;
}

DataTriple& DataTriple::operator+=(const DataTriple& o) {
  f += o.f;
  for (std::size_t m = 0; m < delta0.values.size(); ++m) delta0.values[m] += o.delta0.values[m];
  for (std::size_t m = 0; m < delta1.values.size(); ++m) delta1.values[m] += o.delta1.values[m];
  return *this;
}
DataTriple& DataTriple::operator*=(double s) {
  f *= s;
  for (double& v : delta0.values) v *= s;
  for (double& v : delta1.values) v *= s;
  return *this;
}
DataTriple operator+(DataTriple a, const DataTriple& b) { return a += b; }
DataTriple operator-(DataTriple a, const DataTriple& b) { return a += -1.0 * b; }
DataTriple operator*(double s, DataTriple a) { return a *= s; }

CompatibilityReport check_compatibility(const DataTriple& t, double tol) {
  CompatibilityReport rep;
  auto probe = [&](const Trace& tr, bool zero_at_front, const char* name) {
    const auto& s = tr.s;
    const auto& v = tr.values;
    const std::size_t n = s.size();
    const std::size_t z = zero_at_front ? 0 : n - 1;
    const std::size_t far = zero_at_front ? n - 1 : 0;
    const bool lw_zero = !zero_at_front;  // stencil extends away from the end point
    double scale[3];
    for (int m = 0; m < 3; ++m) {
      auto d = m == 0 ? std::vector<double>(v.begin(), v.end()) : diff1d(s, v, m);
      scale[m] = 0.0;
      for (double x : d) scale[m] = std::max(scale[m], std::abs(x));
    }
    if (scale[0] == 0.0) return;
    auto check = [&](double value, int m, const char* where) {
      double rel = std::abs(value) / std::max(scale[m], 1e-300);
      rep.worst = std::max(rep.worst, rel);
      if (rel > tol) {
        rep.ok = false;
        std::ostringstream os;
        os << name << ": derivative " << m << " at " << where << " is " << value << "; ";
        rep.detail += os.str();
      }
    };
    check(v[z], 0, "y=0");
    check(one_sided_derivative(s, v, z, 1, 6, lw_zero), 1, "y=0");
    check(one_sided_derivative(s, v, z, 2, 6, lw_zero), 2, "y=0");
    check(v[far], 0, "far end");
    check(one_sided_derivative(s, v, far, 2, 6, !lw_zero), 2, "far end");
  };
  probe(t.delta0, true, "delta0");
  probe(t.delta1, false, "delta1");
  return rep;
}

// ---------------------------------------------------------------- stencils

std::vector<double> fd_weights(std::span<const double> z, double x0, int m) {
  // Fornberg's recursion
  const int n = int(z.size()) - 1;
  if (m > n) fail_config("stencil too small for derivative order");
  std::vector<std::vector<double>> c(std::size_t(n + 1), std::vector<double>(std::size_t(m + 1), 0.0));
  double c1 = 1.0, c4 = z[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    int mn = std::min(i, m);
    double c2 = 1.0, c5 = c4;
    c4 = z[std::size_t(i)] - x0;
    for (int j = 0; j < i; ++j) {
      double c3 = z[std::size_t(i)] - z[std::size_t(j)];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[std::size_t(i)][std::size_t(k)] =
              c1 * (k * c[std::size_t(i - 1)][std::size_t(k - 1)] - c5 * c[std::size_t(i - 1)][std::size_t(k)]) / c2;
        c[std::size_t(i)][0] = -c1 * c5 * c[std::size_t(i - 1)][0] / c2;
      }
      for (int k = mn; k >= 1; --k)
        c[std::size_t(j)][std::size_t(k)] =
            (c4 * c[std::size_t(j)][std::size_t(k)] - k * c[std::size_t(j)][std::size_t(k - 1)]) / c3;
      c[std::size_t(j)][0] = c4 * c[std::size_t(j)][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(std::size_t(n + 1));
  for (int i = 0; i <= n; ++i) w[std::size_t(i)] = c[std::size_t(i)][std::size_t(m)];
  return w;
}

namespace {

struct Window {
  std::size_t lo, len;
};

Window stencil_window(std::size_t i, std::size_t n, int order, Scheme scheme) {
  long len = 0, lo = 0;
  const long li = long(i);
  switch (scheme) {
    case Scheme::Centered:
    case Scheme::OneSidedBoundary: {
      len = order + ((order % 2) ? 2 : 1);
      lo = li - (len - 1) / 2;
      if (scheme == Scheme::OneSidedBoundary && (lo < 0 || lo + len > long(n))) ++len;
      break;
    }
    case Scheme::UpwindLeft:
      len = order + 1;
      lo = li - order;
      break;
    case Scheme::UpwindRight:
      len = order + 1;
      lo = li;
      break;
  }
  if (len > long(n)) fail_config("derivative order incompatible with grid size");
  lo = std::clamp(lo, 0L, long(n) - len);
  return {std::size_t(lo), std::size_t(len)};
}

}  // namespace

std::vector<double> diff1d(std::span<const double> s, std::span<const double> v, int order, Scheme scheme) {
  if (order < 1 || order > 5) fail_config("derivative order must be 1..5");
  const std::size_t n = s.size();
  for (std::size_t i = 1; i < n; ++i)
    if (!(s[i] > s[i - 1])) fail_config("non-monotone grid in diff");
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto w = stencil_window(i, n, order, scheme);
    auto c = fd_weights(s.subspan(w.lo, w.len), s[i], order);
    double acc = 0.0;
    for (std::size_t m = 0; m < w.len; ++m) acc += c[m] * v[w.lo + m];
    out[i] = acc;
  }
  return out;
}

std::vector<double> diff1d_width(std::span<const double> s, std::span<const double> v, int order, int width) {
  const std::size_t n = s.size(), w = std::size_t(width);
  if (width <= order || w > n) fail_config("stencil width incompatible with derivative order or grid");
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    long lo = long(i) - long(w - 1) / 2;
    lo = std::clamp(lo, 0L, long(n - w));
    auto c = fd_weights(s.subspan(std::size_t(lo), w), s[i], order);
    double acc = 0.0;
    for (std::size_t m = 0; m < w; ++m) acc += c[m] * v[std::size_t(lo) + m];
    out[i] = acc;
  }
  return out;
}

Field diff(const Field& u, Axis axis, int order, Scheme scheme) {
  const Grid& g = *u.grid();
  Field out(u.grid());
  const std::size_t nx = g.nx(), ny = g.ny();
  if (axis == Axis::Y) {
    for (std::size_t i = 0; i < nx; ++i) {
      std::span<const double> line(u.values().data() + i * ny, ny);
      auto d = diff1d(g.y(), line, order, scheme);
      std::copy(d.begin(), d.end(), out.values().begin() + long(i * ny));
    }
  } else {
    if (order < 1 || order > 5) fail_config("derivative order must be 1..5");
    // weights depend only on x, so build them once
    std::vector<Window> win(nx);
    std::vector<std::vector<double>> wts(nx);
    for (std::size_t i = 0; i < nx; ++i) {
      win[i] = stencil_window(i, nx, order, scheme);
      wts[i] = fd_weights(std::span<const double>(g.x()).subspan(win[i].lo, win[i].len), g.x()[i], order);
    }
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t k = 0; k < ny; ++k) {
        double acc = 0.0;
        for (std::size_t m = 0; m < win[i].len; ++m) acc += wts[i][m] * u.at(win[i].lo + m, k);
        out.at(i, k) = acc;
      }
  }
  return out;
}

double one_sided_derivative(std::span<const double> s, std::span<const double> v, std::size_t at, int order,
                            int width, bool leftward) {
  const std::size_t w = std::size_t(width);
  if (w > s.size()) fail_config("one-sided stencil wider than the line");
  std::size_t lo = leftward ? at + 1 - w : at;
  if (leftward && at + 1 < w) fail_config("one-sided stencil leaves the line");
  if (!leftward && at + w > s.size()) fail_config("one-sided stencil leaves the line");
  auto c = fd_weights(s.subspan(lo, w), s[at], order);
  double acc = 0.0;
  for (std::size_t m = 0; m < w; ++m) acc += c[m] * v[lo + m];
  return acc;
}

std::vector<double> trapezoid_weights(std::span<const double> s) {
  std::vector<double> w(s.size(), 0.0);
  for (std::size_t i = 1; i < s.size(); ++i) {
    double h = s[i] - s[i - 1];
    w[i - 1] += 0.5 * h;
    w[i] += 0.5 * h;
  }
  return w;
}

// ---------------------------------------------------------------- norms

NormKind norm_kind_from_string(const std::string& s) {
  if (s == "L2") return NormKind::L2;
  if (s == "L2xH1y") return NormKind::L2xH1y;
  if (s == "Z0") return NormKind::Z0;
  if (s == "Q0") return NormKind::Q0;
  if (s == "Qhalf") return NormKind::Qhalf;
  if (s == "Q1") return NormKind::Q1;
  if (s == "Hdata") return NormKind::Hdata;
  fail_config("unknown norm kind '" + s + "'");
}

namespace {

// Pair kernel w_i w_j / |s_i - s_j|^{1+2 sigma}, upper triangle, row-major.
std::vector<double> slobodeckij_kernel(std::span<const double> s, double sigma) {
  const std::size_t n = s.size();
  auto w = trapezoid_weights(s);
  std::vector<double> K(n * n, 0.0);
  const double p = 1.0 + 2.0 * sigma;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) K[i * n + j] = w[i] * w[j] * std::exp(-p * std::log(s[j] - s[i]));
  return K;
}

double slobodeckij_with(std::span<const double> s, std::span<const double> v, double sigma,
                        const std::vector<double>& K) {
  const std::size_t n = s.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = K.data() + i * n;
    double vi = v[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = vi - v[j];
      acc += row[j] * d * d;
    }
  }
  acc *= 2.0;
  // cells are excluded from the double sum; add their contribution from the local slope
  auto w = trapezoid_weights(s);
  auto dv = diff1d(s, v, 1);
  const double c = 2.0 / ((2.0 - 2.0 * sigma) * (3.0 - 2.0 * sigma));
  for (std::size_t i = 0; i < n; ++i) acc += c * dv[i] * dv[i] * std::pow(w[i], 3.0 - 2.0 * sigma);
  return acc;
}

double line_hs_with(std::span<const double> s, std::span<const double> v, double order,
                    const std::vector<double>* K) {
  const int whole = int(std::floor(order + 1e-12));
  const double frac = order - whole;
  auto w = trapezoid_weights(s);
  double acc = 0.0;
  std::vector<double> d(v.begin(), v.end());
  for (int m = 0;; ++m) {
    for (std::size_t i = 0; i < s.size(); ++i) acc += w[i] * d[i] * d[i];
    if (m == whole) break;
    d = diff1d(s, v, m + 1);
  }
  if (frac > 1e-12) acc += K ? slobodeckij_with(s, d, frac, *K) : slobodeckij_sq(s, d, frac);
  return acc;
}

}  // namespace

double slobodeckij_sq(std::span<const double> s, std::span<const double> v, double sigma) {
  return slobodeckij_with(s, v, sigma, slobodeckij_kernel(s, sigma));
}

double line_hs_sq(std::span<const double> s, std::span<const double> v, double order) {
  return line_hs_with(s, v, order, nullptr);
}

double hs_x_sq(const Field& u, double s) {
  const Grid& g = *u.grid();
  const double frac = s - std::floor(s + 1e-12);
  std::vector<double> K;
  if (frac > 1e-12) K = slobodeckij_kernel(g.x(), frac);
  double acc = 0.0;
  std::vector<double> line(g.nx());
  for (std::size_t k = 0; k < g.ny(); ++k) {
    if (g.wy()[k] == 0.0) continue;
    for (std::size_t i = 0; i < g.nx(); ++i) line[i] = u.at(i, k);
    acc += g.wy()[k] * line_hs_with(g.x(), line, s, frac > 1e-12 ? &K : nullptr);
  }
  return acc;
}

double hs_y_sq(const Field& u, double s) {
  const Grid& g = *u.grid();
  const double frac = s - std::floor(s + 1e-12);
  std::vector<double> K;
  if (frac > 1e-12) K = slobodeckij_kernel(g.y(), frac);
  double acc = 0.0;
  for (std::size_t i = 0; i < g.nx(); ++i) {
    std::span<const double> line(u.values().data() + i * g.ny(), g.ny());
    acc += g.wx()[i] * line_hs_with(g.y(), line, s, frac > 1e-12 ? &K : nullptr);
  }
  return acc;
}

namespace {

double integrate_sq(const Field& u) {
  const Grid& g = *u.grid();
  double acc = 0.0;
  for (std::size_t i = 0; i < g.nx(); ++i)
    for (std::size_t k = 0; k < g.ny(); ++k) acc += g.wx()[i] * g.wy()[k] * u.at(i, k) * u.at(i, k);
  return acc;
}

// Component list of the data norm: each entry is a weight vector and a value vector.
struct Component {
  std::vector<double> w, v;
};

std::vector<Component> hdata_components(const DataTriple& t) {
  std::vector<Component> out;
  const Grid& g = *t.grid();
  auto add_field = [&](const Field& u) {
    Component c;
    c.v = u.values();
    c.w.resize(u.size());
    for (std::size_t i = 0; i < g.nx(); ++i)
      for (std::size_t k = 0; k < g.ny(); ++k) c.w[g.index(i, k)] = g.wx()[i] * g.wy()[k];
    out.push_back(std::move(c));
  };
  const Field fx = diff(t.f, Axis::X, 1);
  add_field(t.f);
  add_field(fx);
  add_field(diff(t.f, Axis::Y, 1));
  add_field(diff(fx, Axis::Y, 1));
  add_field(diff(t.f, Axis::Y, 3));
  auto add_trace = [&](const Trace& tr, bool zero_at_front) {
    auto w = trapezoid_weights(tr.s);
    out.push_back({w, tr.values});
    for (int m = 1; m <= 5; ++m) out.push_back({w, diff1d(tr.s, tr.values, m)});
    auto d2 = diff1d(tr.s, tr.values, 2);
    const std::size_t n = tr.s.size();
    const std::size_t z = zero_at_front ? 0 : n - 1;
    std::vector<double> q(n), wy(n);
    for (std::size_t m = 0; m < n; ++m) {
      q[m] = m == z ? one_sided_derivative(tr.s, tr.values, z, 3, 5, !zero_at_front) : d2[m] / tr.s[m];
      wy[m] = w[m] * std::abs(tr.s[m]);
    }
    auto dq = diff1d(tr.s, q, 1);
    out.push_back({wy, q});
    out.push_back({wy, dq});
  };
  add_trace(t.delta0, true);
  add_trace(t.delta1, false);
  return out;
}

}  // namespace

double norm(const Field& u, NormKind kind) {
  switch (kind) {
    case NormKind::L2: return std::sqrt(integrate_sq(u));
    case NormKind::L2xH1y: return std::sqrt(integrate_sq(u) + integrate_sq(diff(u, Axis::Y, 1)));
    case NormKind::Z0: {
      Field yux = diff(u, Axis::X, 1);
      const Grid& g = *u.grid();
      for (std::size_t i = 0; i < g.nx(); ++i)
        for (std::size_t k = 0; k < g.ny(); ++k) yux.at(i, k) *= g.y()[k];
      return std::sqrt(integrate_sq(u) + integrate_sq(yux) + integrate_sq(diff(u, Axis::Y, 1)) +
                       integrate_sq(diff(u, Axis::Y, 2)));
    }
    case NormKind::Q0: return std::sqrt(hs_x_sq(u, 2.0 / 3.0) + hs_y_sq(u, 2.0));
    case NormKind::Qhalf: return std::sqrt(hs_x_sq(u, 7.0 / 6.0) + hs_y_sq(u, 3.5));
    case NormKind::Q1: return std::sqrt(hs_x_sq(u, 5.0 / 3.0) + hs_y_sq(u, 5.0));
    case NormKind::Hdata: break;
  }
  fail_config("Hdata norm applies to data triples");
}

double inner_product_H(const DataTriple& a, const DataTriple& b, bool check) {
  if (a.grid() != b.grid() && (a.grid()->x() != b.grid()->x() || a.grid()->y() != b.grid()->y()))
    fail_config("inner_product_H: triples live on different grids");
  if (check) {
    for (const DataTriple* t : {&a, &b}) {
      auto rep = check_compatibility(*t);
      if (!rep.ok) fail_numerical("incompatible boundary data: " + rep.detail);
    }
  }
  auto ca = hdata_components(a);
  auto cb = &a == &b ? ca : hdata_components(b);
  double acc = 0.0;
  for (std::size_t c = 0; c < ca.size(); ++c)
    for (std::size_t m = 0; m < ca[c].v.size(); ++m) acc += ca[c].w[m] * ca[c].v[m] * cb[c].v[m];
  return acc;
}

double norm(const DataTriple& t, NormKind kind, bool check) {
  if (kind == NormKind::Hdata) return std::sqrt(std::max(0.0, inner_product_H(t, t, check)));
  return norm(t.f, kind);
}

// ---------------------------------------------------------------- I/O

void write_field_csv(const std::string& path, const Field& u, const std::string& config_hash) {
  std::ofstream os(path);
  if (!os) fail_config("cannot write " + path);
  const Grid& g = *u.grid();
  os << "x,y,value\n";
  char buf[128];
  for (std::size_t i = 0; i < g.nx(); ++i)
    for (std::size_t k = 0; k < g.ny(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", g.x()[i], g.y()[k], u.at(i, k));
      os << buf;
    }
  if (!config_hash.empty()) os << "# config_hash=" << config_hash << "\n";
}

Field read_field_csv(const std::string& path, GridPtr grid) {
  std::ifstream is(path);
  if (!is) fail_config("cannot read field csv " + path);
  std::string line;
  std::getline(is, line);
  if (line.rfind("x,y,value", 0) != 0) fail_config(path + ": expected header x,y,value");
  Field u(grid);
  std::size_t n = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    double x, y, v;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &y, &v) != 3) fail_config(path + ": malformed row");
    if (n >= u.size()) fail_config(path + ": more rows than grid nodes");
    std::size_t i = n / grid->ny(), k = n % grid->ny();
    auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12 * (1.0 + std::abs(b)); };
    if (!near(x, grid->x()[i]) || !near(y, grid->y()[k])) fail_config(path + ": coordinates do not match grid");
    u.values()[n++] = v;
  }
  if (n != u.size()) fail_config(path + ": fewer rows than grid nodes");
  return u;
}

}  // namespace fbflow
