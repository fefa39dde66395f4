#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace fbflow {

/// Error categories map onto CLI exit codes (config = 1, numerical = 2).
enum class ErrorKind { Config, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail_numerical(const std::string& what);
[[noreturn]] void fail_config(const std::string& what);

/// Non-fatal diagnostics; collected process-wide and drained by the caller.
void emit_warning(const std::string& what);
std::vector<std::string> take_warnings();

/// Rectangle (x0,x1) x (-1,1). The inflow edges are derived from x0, x1.
struct Domain {
  double x0 = 0.0;
  double x1 = 1.0;

  Domain() = default;
  Domain(double a, double b);
  double length() const { return x1 - x0; }
};

struct Grading {
  enum class Kind { Uniform, Corner };
  Kind kind = Kind::Uniform;
  double q = 0.0;          // grading exponent, 0 means uniform
  double fraction = 0.25;  // share of axis nodes within `radius` of each corner coordinate
  double radius = 0.1;
  double x_min_spacing = 1e-6;  // relative to x1 - x0; only for q == 1
  double y_min_spacing = 0.0;   // 0 selects the spacing-matched zone

  static Grading uniform() { return {}; }
  static Grading corner(double q = 1.0, double fraction = 0.25);
};

class Grid {
 public:
  Grid(Domain domain, std::vector<double> x, std::vector<double> y, Grading grading);

  const Domain& domain() const { return domain_; }
  const std::vector<double>& x() const { return x_; }
  const std::vector<double>& y() const { return y_; }
  const Grading& grading() const { return grading_; }
  std::size_t nx() const { return x_.size(); }
  std::size_t ny() const { return y_.size(); }
  std::size_t size() const { return x_.size() * y_.size(); }
  std::size_t index(std::size_t i, std::size_t k) const { return i * y_.size() + k; }
  /// Index of the y = 0 node.
  std::size_t k0() const { return k0_; }
  double hmax() const;

  /// Trapezoid weights along each axis.
  const std::vector<double>& wx() const { return wx_; }
  const std::vector<double>& wy() const { return wy_; }

  nlohmann::json descriptor() const;

 private:
  Domain domain_;
  std::vector<double> x_, y_, wx_, wy_;
  Grading grading_;
  std::size_t k0_ = 0;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr build_grid(const Domain& domain, std::size_t nx, std::size_t ny, const Grading& grading);

/// Nodal field, x-outer / y-inner ordering.
class Field {
 public:
  Field() = default;
  explicit Field(GridPtr grid, double value = 0.0);
  Field(GridPtr grid, std::vector<double> values);

  template <class F>
  static Field from_function(GridPtr grid, F&& fn) {
    Field out(grid);
    for (std::size_t i = 0; i < grid->nx(); ++i)
      for (std::size_t k = 0; k < grid->ny(); ++k)
        out.at(i, k) = fn(grid->x()[i], grid->y()[k]);
    return out;
  }

  const GridPtr& grid() const { return grid_; }
  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }
  double& at(std::size_t i, std::size_t k) { return v_[i * grid_->ny() + k]; }
  double at(std::size_t i, std::size_t k) const { return v_[i * grid_->ny() + k]; }
  std::size_t size() const { return v_.size(); }
  double max_abs() const;
  bool finite() const;

  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(double s);

 private:
  GridPtr grid_;
  std::vector<double> v_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);
Field operator*(const Field& a, const Field& b);

enum class Edge { Sigma0, Sigma1, Top, Bottom, ZeroPlus, ZeroMinus };

/// Values along one edge. For Sigma0 the coordinates are y in [0,1], for Sigma1 y in [-1,0],
/// for horizontal edges the x nodes.
struct Trace {
  Edge edge = Edge::Sigma0;
  std::vector<double> s;
  std::vector<double> values;

  static Trace zero(const Grid& g, Edge e);
  template <class F>
  static Trace from_function(const Grid& g, Edge e, F&& fn) {
    Trace t = zero(g, e);
    for (std::size_t m = 0; m < t.s.size(); ++m) t.values[m] = fn(t.s[m]);
    return t;
  }
};

/// Source f plus inflow traces.
struct DataTriple {
  Field f;
  Trace delta0;
  Trace delta1;

  static DataTriple zero(GridPtr g);
  const GridPtr& grid() const { return f.grid(); }

  DataTriple& operator+=(const DataTriple& o);
  DataTriple& operator*=(double s);
};

DataTriple operator+(DataTriple a, const DataTriple& b);
DataTriple operator-(DataTriple a, const DataTriple& b);
DataTriple operator*(double s, DataTriple a);

struct CompatibilityReport {
  bool ok = true;
  double worst = 0.0;  // largest relative violation
  std::string detail;
};

/// Checks delta_i(0) = delta_i'(0) = delta_i''(0) = 0 and delta_i = delta_i'' = 0 at the far end.
CompatibilityReport check_compatibility(const DataTriple& t, double tol = 1e-3);

// ---------------------------------------------------------------- stencils

/// Finite-difference weights for the derivative of order `order` at `at` on `nodes`.
std::vector<double> fd_weights(std::span<const double> nodes, double at, int order);

enum class Axis { X, Y };
enum class Scheme { Centered, UpwindLeft, UpwindRight, OneSidedBoundary };

/// Derivative of a 1-D sampled function at every node.
std::vector<double> diff1d(std::span<const double> s, std::span<const double> v, int order,
                           Scheme scheme = Scheme::Centered);

/// Same with an explicit stencil width (window centered where possible).
std::vector<double> diff1d_width(std::span<const double> s, std::span<const double> v, int order, int width);

/// Orders 3 to 5 are diagnostic precision only.
Field diff(const Field& u, Axis axis, int order, Scheme scheme = Scheme::Centered);

/// Derivative at one point from the `width` nodes nearest to it on one side (inclusive).
double one_sided_derivative(std::span<const double> s, std::span<const double> v, std::size_t at,
                            int order, int width, bool leftward);

std::vector<double> trapezoid_weights(std::span<const double> s);

// ---------------------------------------------------------------- norms

enum class NormKind { L2, L2xH1y, Z0, Q0, Qhalf, Q1, Hdata };

NormKind norm_kind_from_string(const std::string& s);

double norm(const Field& u, NormKind kind);
double norm(const DataTriple& t, NormKind kind = NormKind::Hdata, bool check = true);
double inner_product_H(const DataTriple& a, const DataTriple& b, bool check = true);

/// Squared Slobodeckij seminorm of order sigma in (0,1) for one line.
double slobodeckij_sq(std::span<const double> s, std::span<const double> v, double sigma);

/// Squared H^s norm of a 1-D line (integer derivatives plus fractional part).
double line_hs_sq(std::span<const double> s, std::span<const double> v, double order);

/// ||u||^2 in H^s_x L^2_y.
double hs_x_sq(const Field& u, double s);
/// ||u||^2 in L^2_x H^s_y.
double hs_y_sq(const Field& u, double s);

// ---------------------------------------------------------------- I/O

void write_field_csv(const std::string& path, const Field& u, const std::string& config_hash = "");
Field read_field_csv(const std::string& path, GridPtr grid);

}  // namespace fbflow
