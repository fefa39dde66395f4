#include <doctest.h>

#include <cmath>

#include "fbflow/ortho.hpp"

using namespace fbflow;

// Reference values from an independent 30-digit evaluation of the rotated Tricomi representation.
namespace {
struct Ref {
  double t, G;
};
const Ref kG0[] = {{-6.0, 0.99430106433907555}, {-3.0, 0.98195505121227307}, {-1.0, 0.9217207664455711},
                   {0.0, 0.69412120140619186},  {0.5, 0.46241078560828402},  {1.0, 0.25446690986637633},
                   {2.0, 0.04248768554231971},  {3.0, 0.0021325442145575876}};
const double kG0minus8 = 0.996613784786463;
GridPtr graded(std::size_t n) { return build_grid(Domain(0.0, 1.0), n, n, Grading::corner()); }
}  // namespace

TEST_SUITE("profiles") {
  TEST_CASE("ODE profile against reference values") {
    const ProfileFunction& G = g0_default();
    for (const Ref& r : kG0) CHECK(std::abs(G.value(r.t) - r.G) <= 1e-8);
    CHECK(std::abs(G.value(-8.0) - kG0minus8) <= 1e-8);
    CHECK(std::abs(G.value(8.0)) <= 1e-6);
    CHECK(G.derivative_mismatch <= 1e-8);
  }

  TEST_CASE("ODE residual and monotone transition") {
    const ProfileFunction& G = g0_default();
    CHECK(ode_residual(G) <= 1e-7);
    for (std::size_t i = 1; i < G.G.size(); ++i) CHECK(G.G[i] <= G.G[i - 1] + 1e-14);
    CHECK(G.G.front() > 0.99);
    CHECK(G.G.back() < 1e-20);
  }

  TEST_CASE("Tricomi route agrees with the ODE route") {
    const ProfileFunction& G = g0_default();
    double gap = 0.0;
    for (double t = -6.0; t <= 6.0 + 1e-12; t += 0.05) gap = std::max(gap, std::abs(g0_kummer(0, t) - G.value(t)));
    CHECK(gap <= 1e-5);
    CHECK(std::abs(g0_kummer(0, 12.0)) <= 1e-30);
    CHECK(std::abs(g0_kummer(0, -60.0) - 1.0) < std::abs(g0_kummer(0, -8.0) - 1.0));
    CHECK(kummer_normalization(0) == doctest::Approx(2.0 * std::pow(9.0, 1.0 / 6.0)).epsilon(1e-15));
  }

  TEST_CASE("Tricomi U special values") {
    for (double z : {0.3, 2.0, 17.0}) CHECK(std::abs(tricomi_u(0.0, 2.0 / 3.0, {z, 0.0}) - 1.0) <= 1e-12);
    const std::complex<double> zeta = 1000.0 * std::polar(1.0, 3.14159265358979323846 / 3.0);
    CHECK(std::abs(tricomi_u(0.3, 1.5, zeta) * std::pow(zeta, 0.3) - 1.0) <= 1e-4);
    const std::complex<double> u = tricomi_u(-1.0 / 6.0, 2.0 / 3.0, {-1.0, 0.0});
    CHECK(std::abs(u - std::complex<double>(0.8473477741907449, 0.4677902469371447)) <= 1e-8);
    CHECK(std::abs(tricomi_u(-1.0 / 6.0, 2.0 / 3.0, {2.0, 0.0}) - 1.1355701243957917) <= 1e-10);
    CHECK(std::abs(tricomi_u(0.3, 1.5, {1.0, 2.0}) - std::complex<double>(0.7475637951578853, -0.27418205913996134)) <=
          1e-10);
    const auto m = kummer_m(0.3L, 1.5L, {1.0L, 2.0L});
    CHECK(std::abs(std::complex<double>(double(m.real()), double(m.imag())) -
                   std::complex<double>(0.9224570773919904, 0.52626195194918299)) <= 1e-12);
  }

  TEST_CASE("asymptotic coefficients start at one") {
    auto a = asymptotic_coefficients(0.5, 10);
    CHECK(a[0] == 1.0);
  }

  TEST_CASE("self-similar profile values") {
    const ProfileFunction& G = g0_default();
    const Domain d(0.0, 1.0);
    CHECK(corner_profile(G, 0, d, 0.0, 0.0).v == 0.0);
    CHECK(corner_profile(G, 1, d, 1.0, 0.0).v == 0.0);
    const double xi = 0.01;
    CHECK(corner_profile(G, 0, d, xi, 0.0).v == doctest::Approx(std::pow(xi, 1.0 / 6.0) * 0.69412120140619186).epsilon(1e-9));
    // mirrored corner
    CHECK(corner_profile(G, 1, d, 1.0 - xi, 0.0).v == doctest::Approx(corner_profile(G, 0, d, xi, 0.0).v));
  }

  TEST_CASE("singular source vanishes on the cutoff plateau") {
    const Domain d(0.0, 1.0);
    const Cutoff cut;
    const ProfileFunction& G = g0_default();
    double worst = 0.0;
    for (int c = 0; c < 2; ++c)
      for (double rho = 0.0; rho <= cut.plateau(); rho += cut.plateau() / 20)
        for (double th = -1.5; th <= 1.5; th += 0.1) {
          const double x = c == 0 ? rho * std::cos(th) : 1.0 - rho * std::cos(th);
          worst = std::max(worst, std::abs(singular_source(c, d, cut, G, x, rho * std::sin(th))));
        }
    CHECK(worst <= 1e-9);
    // disjoint supports
    CHECK(cut.support() < 0.5 * d.length());
  }

  TEST_CASE("singular strength fits") {
    auto g = graded(129);
    const SingularProfile sp = singular_profile(0, g);
    const FitResult self = fit_singular_strength(sp.u, 0);
    CHECK(self.c == doctest::Approx(1.0).epsilon(0.02));
    CHECK(self.singular_content);
    Field smooth = Field::from_function(g, [](double, double y) { return y * (1.0 - y * y); });
    const FitResult s = fit_singular_strength(smooth, 0);
    CHECK(std::abs(s.c) <= 1e-6);
    CHECK_FALSE(s.singular_content);
    const FitResult two = fit_singular_strength(2.0 * sp.u + smooth, 0);
    CHECK(two.c == doctest::Approx(2.0).epsilon(0.03));
  }
}
