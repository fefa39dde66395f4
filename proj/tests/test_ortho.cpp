#include <doctest.h>

#include <cmath>

#include "fbflow/verify.hpp"

using namespace fbflow;

namespace {
GridPtr graded(std::size_t n) { return build_grid(Domain(0.0, 1.0), n, n, Grading::corner()); }

CoefficientSet shifted(const GridPtr& g, double da, double dg2) {
  CoefficientSet c = CoefficientSet::shear(g);
  c.alpha = Field::from_function(g, [&](double, double) { return 1.0 + da; });
  c.gamma2 = Field::from_function(g, [&](double x, double) { return dg2 * std::sin(3.14159265358979323846 * x); });
  c.provenance = CoefficientSet::Provenance::Custom;
  return c;
}
}  // namespace

TEST_SUITE("ortho") {
  TEST_CASE("derived data") {
    auto g = graded(129);
    const CoefficientSet shear = CoefficientSet::shear(g);
    const DerivedData z = derived_data(DataTriple::zero(g), shear);
    CHECK(z.h0.max_abs() == 0.0);
    CHECK(z.h1.max_abs() == 0.0);
    for (double v : z.Delta0.values) CHECK(v == 0.0);

    DataTriple t = DataTriple::zero(g);
    t.delta0 = Trace::from_function(*g, Edge::Sigma0, [](double y) { return y * y * y * (1 - y) * (1 - y); });
    const DerivedData d = derived_data(t, shear);
    double err = 0.0;
    for (std::size_t m = 0; m < d.Delta0.s.size(); ++m) {
      const double y = d.Delta0.s[m];
      err = std::max(err, std::abs(d.Delta0.values[m] - (6.0 - 24.0 * y + 20.0 * y * y)));
    }
    CHECK(err <= 1e-8);

    // explicit unit coefficients reduce to the shear formula
    CoefficientSet unit = CoefficientSet::shear(g);
    unit.provenance = CoefficientSet::Provenance::Custom;
    const DataTriple r = random_admissible_triple(g, 3);
    const DerivedData a = derived_data(r, shear), b = derived_data(r, unit);
    CHECK(a.Delta0.values == b.Delta0.values);
    CHECK(a.Delta1.values == b.Delta1.values);
    CHECK(a.h0.values() == b.h0.values());
  }

  TEST_CASE("incompatible trace is rejected") {
    auto g = graded(65);
    DataTriple t = DataTriple::zero(g);
    t.delta0 = Trace::from_function(*g, Edge::Sigma0, [](double y) { return y * y * (1 - y); });
    CHECK_THROWS_AS(derived_data(t, CoefficientSet::shear(g)), Error);
  }

  TEST_CASE("functionals are linear and vanish on zero data") {
    auto g = graded(65);
    FunctionalEvaluator ev(CoefficientSet::shear(g));
    const DataTriple a = random_admissible_triple(g, 1), b = random_admissible_triple(g, 2);
    for (int j = 0; j < 2; ++j) {
      CHECK(ev.ell_dual(j, DataTriple::zero(g)) == 0.0);
      CHECK(ev.ell_direct(j, DataTriple::zero(g)) == 0.0);
      const double lhs = ev.ell_dual(j, 2.5 * a + (-1.5) * b);
      const double rhs = 2.5 * ev.ell_dual(j, a) - 1.5 * ev.ell_dual(j, b);
      CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
    }
  }

  TEST_CASE("functionals of regular manufactured data vanish under refinement") {
    const auto r = functional_study(shear_case(), graded_grids(Domain(0.0, 1.0), {65, 129, 257}), 1.0);
    CHECK(r.order >= 1.0);
  }

  TEST_CASE("dual and direct routes agree on random triples") {
    auto g = graded(129);
    FunctionalEvaluator ev(CoefficientSet::shear(g));
    for (std::uint64_t s = 0; s < 3; ++s) {
      const DataTriple t = random_admissible_triple(g, 100 + s);
      for (int j = 0; j < 2; ++j) {
        const double d = ev.ell_dual(j, t), e = ev.ell_direct(j, t);
        CHECK(std::abs(d - e) / (1.0 + std::abs(d)) <= 1e-3);
      }
    }
  }

  TEST_CASE("corrector basis") {
    auto g = graded(129);
    FunctionalEvaluator ev(CoefficientSet::shear(g));
    const CorrectorBasis b = build_corrector_basis(ev);
    CHECK(b.normalization_error <= 1e-8);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(std::abs(ev.ell_dual(i, b.xi[std::size_t(j)]) - (i == j ? 1.0 : 0.0)) <= 1e-8);
    CHECK(std::abs(b.A(0, 0)) > 1e-3);
    CHECK(std::abs(b.A(1, 1)) > 1e-3);
    CHECK_THROWS_AS(build_corrector_basis(ev, Cutoff{1.2}), Error);
  }

  TEST_CASE("decomposition") {
    auto g = graded(129);
    FunctionalEvaluator ev(CoefficientSet::shear(g));
    const CorrectorBasis b = build_corrector_basis(ev);
    const Decomposition d = decompose(b.candidates[0], ev, b);
    CHECK(std::abs(d.c0 - 1.0) <= 1e-6);
    CHECK(std::abs(d.c1) <= 1e-6);
    CHECK(std::abs(d.fit_post[0].c) <= 1e-6);

    // data already satisfying both conditions
    const DataTriple r = random_admissible_triple(g, 9);
    const auto l = ev.ell(r);
    const DataTriple p = r - (l[0] * b.xi[0] + l[1] * b.xi[1]);
    const Decomposition q = decompose(p, ev, b);
    CHECK(std::abs(q.c0) <= 1e-9 * (1.0 + std::abs(l[0])));
    CHECK(std::abs(q.c1) <= 1e-9 * (1.0 + std::abs(l[1])));
  }

  TEST_CASE("regularized solution loses its singular strength") {
    auto g = graded(513);
    FunctionalEvaluator ev(CoefficientSet::shear(g));
    const CorrectorBasis b = build_corrector_basis(ev);
    const Decomposition d = decompose(smooth_singular_data(g), ev, b);
    for (int i = 0; i < 2; ++i)
      CHECK(std::abs(d.fit_post[std::size_t(i)].c) <= 10.0 * std::abs(d.fit_pre[std::size_t(i)].c) * 1e-2);
  }

  TEST_CASE("Lipschitz probe") {
    auto g = graded(65);
    const CoefficientSet s = CoefficientSet::shear(g);
    CHECK(ell_lipschitz_probe(s, s, 3).gap == 0.0);
    const LipschitzProbe a = ell_lipschitz_probe(s, shifted(g, 1e-2, 0.0), 3);
    const LipschitzProbe b = ell_lipschitz_probe(s, shifted(g, 1e-3, 0.0), 3);
    CHECK(a.ratio > 0.0);
    CHECK(a.ratio / b.ratio <= 3.0);
    CHECK(b.ratio / a.ratio <= 3.0);
    const LipschitzProbe c = ell_lipschitz_probe(s, shifted(g, 0.0, 1e-2), 3);
    const LipschitzProbe d = ell_lipschitz_probe(s, shifted(g, 0.0, 1e-3), 3);
    CHECK(d.gap / c.gap == doctest::Approx(0.1).epsilon(0.3));
  }

  TEST_CASE("random admissible triples") {
    auto g = graded(65);
    const DataTriple a = random_admissible_triple(g, 42), b = random_admissible_triple(g, 42);
    CHECK(a.f.values() == b.f.values());
    CHECK(norm(a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(check_compatibility(a).ok);
  }
}

TEST_SUITE("ortho_crosscheck") {
  TEST_CASE("singular source functionals: dual route against direct route at 257 graded") {
    auto g = graded(257);
    FunctionalEvaluator ev(CoefficientSet::shear(g));
    DataTriple t = DataTriple::zero(g);
    t.f = singular_profile(0, g).f;
    for (int j = 0; j < 2; ++j) {
      const double d = ev.ell_dual(j, t), e = ev.ell_direct(j, t);
      INFO("j = " << j << " dual " << d << " direct " << e);
      CHECK(std::abs(d - e) <= 1e-4);
    }
  }
}
