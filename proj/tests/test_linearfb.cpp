#include <doctest.h>

#include <cmath>

#include "fbflow/verify.hpp"

using namespace fbflow;

namespace {
const double kPi = 3.14159265358979323846;
GridPtr graded(std::size_t n) { return build_grid(Domain(0.0, 1.0), n, n, Grading::corner()); }
}  // namespace

TEST_SUITE("linearfb") {
  TEST_CASE("zero data gives the zero solution") {
    auto g = graded(33);
    LinearProblem p{CoefficientSet::shear(g), DataTriple::zero(g)};
    const SparseSystem s = assemble(p);
    CHECK(s.rhs.norm() == 0.0);
    CHECK(solve_linear(p).u.max_abs() == 0.0);
    CHECK(residual(Field(g), p).max_abs() == 0.0);
  }

  TEST_CASE("toy 3x5 stencil table") {
    auto g = build_grid(Domain(0.0, 1.0), 3, 5, Grading::uniform());
    LinearProblem p{CoefficientSet::shear(g), DataTriple::zero(g)};
    const Eigen::MatrixXd A = Eigen::MatrixXd(assemble(p).matrix());
    // nodes x in {0, .5, 1}, y in {-1, -.5, 0, .5, 1}; index = 5 i + k
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(15, 15);
    auto id = [](int i, int k) { return 5 * i + k; };
    for (int i = 0; i < 3; ++i) {
      E(id(i, 0), id(i, 0)) = 1.0;
      E(id(i, 4), id(i, 4)) = 1.0;
    }
    E(id(0, 3), id(0, 3)) = 1.0;  // inflow x0, y > 0
    E(id(2, 1), id(2, 1)) = 1.0;  // inflow x1, y < 0
    auto dzz = [&](int i, int k) {
      E(id(i, k), id(i, k - 1)) += -4.0;
      E(id(i, k), id(i, k)) += 8.0;
      E(id(i, k), id(i, k + 1)) += -4.0;
    };
    for (int i = 0; i < 3; ++i) dzz(i, 2);  // y = 0: no transport
    for (int i = 1; i < 3; ++i) {           // y = .5: backward difference
      dzz(i, 3);
      E(id(i, 3), id(i, 3)) += 1.0;
      E(id(i, 3), id(i - 1, 3)) += -1.0;
    }
    for (int i = 0; i < 2; ++i) {  // y = -.5: forward difference
      dzz(i, 1);
      E(id(i, 1), id(i, 1)) += 1.0;
      E(id(i, 1), id(i + 1, 1)) += -1.0;
    }
    CHECK((A - E).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("Dirichlet rows carry the traces") {
    auto g = graded(17);
    DataTriple t = DataTriple::zero(g);
    t.delta0 = Trace::from_function(*g, Edge::Sigma0, [](double y) { return y * y * y * (1 - y) * (1 - y); });
    t.delta1 = Trace::from_function(*g, Edge::Sigma1, [](double y) { return -y * y * y * (1 + y); });
    const SparseSystem s = assemble({CoefficientSet::shear(g), t});
    const std::size_t k0 = g->k0(), nx = g->nx();
    for (std::size_t m = 1; m < t.delta0.s.size() - 1; ++m) {
      const std::size_t p = g->index(0, k0 + m);
      CHECK(s.dirichlet[p] == 1);
      CHECK(s.rhs[long(p)] == t.delta0.values[m]);
    }
    for (std::size_t m = 1; m < k0; ++m) CHECK(s.rhs[long(g->index(nx - 1, m))] == t.delta1.values[m]);
  }

  TEST_CASE("manufactured shear solution converges") {
    const auto r = run_manufactured(shear_case(), graded_grids(Domain(0.0, 1.0), {33, 65, 129}));
    CHECK(r.order >= 1.0);
    CHECK(r.pass);
  }

  TEST_CASE("solve residual and truncation residual") {
    std::vector<double> h, res;
    for (std::size_t n : {33, 65, 129}) {
      auto g = graded(n);
      const ManufacturedCase c = shear_case();
      LinearProblem p{CoefficientSet::shear(g), c.triple(g)};
      const LinearSolution s = solve_linear(p);
      CHECK(residual(s.u, p).max_abs() <= 1e-9);
      h.push_back(1.0 / double(n - 1));
      res.push_back(residual(c.exact_field(g), p).max_abs());
    }
    CHECK(fitted_order(h, res) >= 0.9);
  }

  TEST_CASE("involution symmetry of the discrete problem") {
    auto g = graded(65);
    CHECK(symmetry_check(DataTriple::zero(g)) == 0.0);
    CHECK(symmetry_check(random_admissible_triple(g, 5)) <= 1e-12);
    // data equal to its own image
    DataTriple t = random_admissible_triple(g, 6);
    DataTriple s = t + involute(t);
    CHECK(symmetry_check(s) <= 1e-12);
  }

  TEST_CASE("shear dual profile jumps at 257 graded") {
    auto g = graded(257);
    for (int j = 0; j < 2; ++j) {
      const DualProfile d = solve_adjoint_with_jumps(j, CoefficientSet::shear(g));
      double value = 0.0, slope = 0.0;
      for (std::size_t i = 0; i < d.jump.size(); ++i) {
        value = std::max(value, std::abs(d.jump[i] - (j == 1 ? 1.0 : 0.0)));
        slope = std::max(slope, std::abs(d.slope_jump[i] - (j == 0 ? -1.0 : 0.0)));
      }
      CHECK(value <= 1e-6);
      CHECK(slope <= 1e-6);
      CHECK(d.residual_inf <= 1e-8);
    }
  }

  TEST_CASE("lifting cutoff plateau") {
    CHECK(lifting_cutoff(0.0) == 1.0);
    CHECK(lifting_cutoff(0.05) == 1.0);
    CHECK(lifting_cutoff(-0.25) == 0.0);
    CHECK(lifting_cutoff(0.6) == 0.0);
    double prev = 1.0;
    for (double y = 0.05; y <= 0.25; y += 0.01) {
      CHECK(lifting_cutoff(y) <= prev + 1e-15);
      prev = lifting_cutoff(y);
    }
  }

  TEST_CASE("doubled-unknown dual agrees with the lifted dual") {
    auto g = graded(65);
    for (int j = 0; j < 2; ++j) {
      const DualProfile a = solve_adjoint_with_jumps(j, CoefficientSet::shear(g));
      const DualProfile b = detail::solve_adjoint_doubled(j, CoefficientSet::shear(g));
      double d = 0.0;
      for (std::size_t i = 0; i < g->nx(); ++i)
        for (std::size_t k = 0; k < g->ny(); ++k) {
          const double y = g->y()[k];
          if (y > 0.0) d = std::max(d, std::abs(a.phi_plus.at(i, k) - b.phi_plus.at(i, k)));
          if (y < 0.0) d = std::max(d, std::abs(a.phi_minus.at(i, k) - b.phi_minus.at(i, k)));
        }
      CHECK(d <= 1e-2 * std::max(1.0, a.phi_plus.max_abs()));
    }
  }

  TEST_CASE("weak residual") {
    std::vector<double> vals;
    for (std::size_t n : {33, 65, 129}) {
      auto g = graded(n);
      const ManufacturedCase c = shear_case();
      LinearProblem p{CoefficientSet::shear(g), c.triple(g)};
      Field v = Field::from_function(g, [](double x, double y) { return std::sin(kPi * x) * (1 - y * y); });
      vals.push_back(std::abs(weak_residual(solve_linear(p).u, p, v)));
      if (n == 33) {
        LinearProblem z{CoefficientSet::shear(g), DataTriple::zero(g)};
        CHECK(weak_residual(Field(g), z, Field(g)) == 0.0);
        // u = 0 with f overlapping v: the value is the quadrature of -f v
        Field f = Field::from_function(g, [](double x, double) { return x; });
        LinearProblem q{CoefficientSet::shear(g), DataTriple::zero(g)};
        q.data.f = f;
        double expect = 0.0;
        for (std::size_t i = 0; i < g->nx(); ++i)
          for (std::size_t k = 0; k < g->ny(); ++k) expect -= g->wx()[i] * g->wy()[k] * f.at(i, k) * v.at(i, k);
        CHECK(weak_residual(Field(g), q, v) == doctest::Approx(expect).epsilon(1e-14));
      }
    }
    CHECK(vals[2] < vals[0]);
  }

  TEST_CASE("degenerate diffusion is rejected") {
    auto g = graded(17);
    CoefficientSet c = CoefficientSet::shear(g);
    c.alpha.at(3, 3) = 0.0;
    CHECK_THROWS_AS(assemble({c, DataTriple::zero(g)}), Error);
  }
}
