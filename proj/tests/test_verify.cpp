#include <doctest.h>

#include <cmath>

#include "fbflow/verify.hpp"

using namespace fbflow;

TEST_SUITE("verify") {
  TEST_CASE("fitted order of a power law") {
    std::vector<double> h{0.1, 0.05, 0.025}, e;
    for (double v : h) e.push_back(3.0 * v * v);
    CHECK(fitted_order(h, e) == doctest::Approx(2.0).epsilon(1e-12));
  }

  TEST_CASE("zero manufactured solution") {
    const auto r = run_manufactured(zero_case(), graded_grids(Domain(0.0, 1.0), {17, 33, 65}));
    for (const auto& l : r.levels) CHECK(l.err_l2 == 0.0);
    CHECK(r.pass);
  }

  TEST_CASE("linear manufactured studies") {
    const auto grids = graded_grids(Domain(0.0, 1.0), {33, 65, 129});
    const auto s = run_manufactured(shear_case(), grids);
    const auto v = run_manufactured(variable_case(), grids);
    CHECK(s.order >= 1.0);
    CHECK(v.order >= 1.0);
    const auto j = s.to_json();
    CHECK(j["levels"].size() == 3);
    CHECK(j["levels"][0]["grid"]["nx"] == 33);
  }

  TEST_CASE("involution") {
    auto g = build_grid(Domain(0.0, 1.0), 33, 33, Grading::corner());
    const DataTriple t = random_admissible_triple(g, 12);
    const DataTriple back = involute(involute(t));
    CHECK(back.f.values() == t.f.values());
    CHECK(back.delta0.values == t.delta0.values);
    CHECK(back.delta1.values == t.delta1.values);
  }

  TEST_CASE("asymmetric grid is rejected") {
    std::vector<double> x{0.0, 0.1, 0.3, 0.6, 1.0}, y{-1.0, -0.5, 0.0, 0.5, 1.0};
    auto g = std::make_shared<const Grid>(Domain(0.0, 1.0), x, y, Grading::uniform());
    CHECK_THROWS_AS(symmetry_check(DataTriple::zero(g)), Error);
  }

  TEST_CASE("dichotomy on smooth data with nonzero functionals") {
    const auto grids = graded_grids(Domain(0.0, 1.0), {129, 257, 513});
    const auto r = dichotomy_experiment(grids, false);
    MESSAGE(r.extra.dump());
    CHECK(r.pass);
    CHECK(r.extra["raw_strength_change"].get<double>() < 0.05);
    CHECK(r.extra["reg_strength_final"].get<double>() <= 0.05);
    const auto& last = r.levels.back().extra;
    CHECK(last["reg_dxdy"].get<double>() < last["raw_dxdy"].get<double>());
  }

  TEST_CASE("singular source is removed exactly") {
    const auto r = dichotomy_experiment(graded_grids(Domain(0.0, 1.0), {65, 129}), true);
    for (const auto& l : r.levels) {
      CHECK(l.extra["c"][0].get<double>() == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(l.extra["reg_strength"][0].get<double>() == 0.0);
      CHECK(l.extra["raw_strength"][0].get<double>() != 0.0);
    }
  }
}
