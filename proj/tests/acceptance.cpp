// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed here.
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "fbflow/verify.hpp"

using namespace fbflow;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

GridPtr graded(std::size_t n) { return build_grid(Domain(0.0, 1.0), n, n, Grading::corner()); }
double nominal_h(std::size_t n) { return 1.0 / double(n - 1); }

struct Outcome {
  bool pass = false;
  std::string summary;
  json data;
};

Outcome profile_limits() {
  const ProfileFunction& G = g0_default();
  const double lo = std::abs(G.value(-8.0) - 1.0), hi = std::abs(G.value(8.0));
  const double res = ode_residual(G);
  double gap = 0.0;
  for (double t = -6.0; t <= 6.0 + 1e-12; t += 0.01) gap = std::max(gap, std::abs(G.value(t) - g0_kummer(0, t)));
  Outcome o;
  o.pass = lo <= 1e-4 && hi <= 1e-6 && res <= 1e-7 && gap <= 1e-5;
  std::ostringstream s;
  s << "|G(-8)-1|=" << lo << " (<=1e-4) |G(8)|=" << hi << " (<=1e-6) ode_residual=" << res
    << " (<=1e-7) two_route_gap=" << gap << " (<=1e-5)";
  o.summary = s.str();
  o.data = {{"G_minus_8_gap", lo}, {"G_plus_8", hi}, {"ode_residual", res}, {"two_route_gap", gap}};
  return o;
}

Outcome singular_residual() {
  const Cutoff cut;
  std::vector<double> hs, rms;
  double plateau = 0.0;
  for (std::size_t n : {129, 257, 513}) {
    const GridPtr g = graded(n);
    const SingularProfile sp = singular_profile(0, g, cut);
    const Grid& G = *g;
    double acc = 0.0, area = 0.0;
    for (std::size_t i = 1; i + 1 < G.nx(); ++i)
      for (std::size_t k = 1; k + 1 < G.ny(); ++k) {
        const double x = G.x()[i], y = G.y()[k];
        const double rho = std::hypot(x - G.domain().x0, y);
        if (rho <= cut.plateau()) plateau = std::max(plateau, std::abs(sp.f.at(i, k)));
        const double r = r_coordinate(0, G.domain(), x, y);
        if (r < 0.05 || r > 0.15 || rho > cut.plateau()) continue;
        const double w = G.wx()[i] * G.wy()[k];
        acc += w * sp.f_discrete.at(i, k) * sp.f_discrete.at(i, k);
        area += w;
      }
    hs.push_back(nominal_h(n));
    rms.push_back(std::sqrt(acc / area));
  }
  const double order = fitted_order(hs, rms);
  Outcome o;
  o.pass = order >= 0.9 && plateau <= 1e-9;
  std::ostringstream s;
  s << "annulus rms " << rms[0] << ", " << rms[1] << ", " << rms[2] << " order=" << order
    << " (>=0.9) plateau max |fbar0|=" << plateau << " (<=1e-9)";
  o.summary = s.str();
  o.data = {{"h", hs}, {"rms", rms}, {"order", order}, {"plateau_max", plateau}};
  return o;
}

Outcome dual_jumps() {
  const CoefficientSet c = CoefficientSet::shear(graded(257));
  Outcome o;
  o.pass = true;
  std::ostringstream s;
  for (int j = 0; j < 2; ++j) {
    const DualProfile d = solve_adjoint_with_jumps(j, c);
    double ej = 0.0, es = 0.0;
    for (std::size_t i = 0; i < d.jump.size(); ++i) {
      ej = std::max(ej, std::abs(d.jump[i] - d.jump_target[i]));
      es = std::max(es, std::abs(d.slope_jump[i] - d.slope_jump_target[i]));
    }
    o.pass = o.pass && ej <= 1e-6 && es <= 1e-6;
    s << "Phi" << j << " jump err=" << ej << " slope jump err=" << es << " ";
    o.data["phi" + std::to_string(j)] = {{"jump_error", ej}, {"slope_jump_error", es}, {"residual_inf", d.residual_inf}};
  }
  s << "(<=1e-6)";
  o.summary = s.str();
  return o;
}

Outcome route_equivalence() {
  const GridPtr g = graded(257);
  FunctionalEvaluator ev(CoefficientSet::shear(g));
  double worst = 0.0;
  json rows = json::array();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const DataTriple t = random_admissible_triple(g, seed);
    for (int j = 0; j < 2; ++j) {
      const double d = ev.ell_dual(j, t), e = ev.ell_direct(j, t);
      worst = std::max(worst, std::abs(d - e) / (1.0 + std::abs(d)));
      rows.push_back({{"seed", seed}, {"j", j}, {"dual", d}, {"direct", e}});
    }
  }
  Outcome o;
  o.pass = worst <= 1e-3;
  o.summary = "max relative gap over 10 triples " + std::to_string(worst) + " (<=1e-3)";
  o.data = {{"max_gap", worst}, {"samples", rows}};
  return o;
}

Outcome dichotomy() {
  const StudyReport reg = functional_study(shear_case(), {graded(129), graded(257), graded(513)});
  std::vector<double> direct, dual;
  for (std::size_t n : {257, 513, 1025}) {
    FunctionalEvaluator ev(CoefficientSet::shear(graded(n)));
    const CorrectorBasis b = build_corrector_basis(ev);
    direct.push_back(ev.ell_direct(0, b.candidates[0]));
    dual.push_back(ev.ell_dual(0, b.candidates[0]));
  }
  const double change = std::abs(direct[2] - direct[1]) / std::abs(direct[2]);
  const double change_dual = std::abs(dual[2] - dual[1]) / std::abs(dual[2]);
  Outcome o;
  o.pass = reg.order >= 0.9 && change < 0.1 && direct[2] != 0.0;
  std::ostringstream s;
  s << "regular data order=" << reg.order << " (>=0.9; dual route " << reg.extra["order_dual"].dump()
    << ") fbar0 ell0 " << direct[0] << ", " << direct[1] << ", " << direct[2] << " change=" << change
    << " (<0.1; dual " << dual[2] << ", change " << change_dual << ")";
  o.summary = s.str();
  o.data = {{"regular", reg.to_json()}, {"fbar0_direct", direct}, {"fbar0_dual", dual}, {"change", change}};
  return o;
}

Outcome decomposition(const fs::path& dir) {
  const GridPtr g = graded(257);
  FunctionalEvaluator ev(CoefficientSet::shear(g));
  const CorrectorBasis b = build_corrector_basis(ev);
  const Decomposition d = decompose(b.candidates[0], ev, b);
  double strength = 0.0;
  for (int i = 0; i < 2; ++i) strength = std::max(strength, std::abs(fit_singular_strength(d.u_reg, i).c));
  write_field_csv((dir / "decompose_u.csv").string(), d.u);
  Outcome o;
  o.pass = std::abs(d.c0 - 1.0) <= 1e-4 && std::abs(d.c1) <= 1e-4 && strength <= 1e-2;
  std::ostringstream s;
  s << "c0=" << d.c0 << " c1=" << d.c1 << " (+-1e-4) u_reg strength=" << strength << " (<=1e-2)";
  o.summary = s.str();
  o.data = d.report();
  o.data["u_reg_strength"] = strength;
  return o;
}

Outcome linear_convergence() {
  const std::vector<GridPtr> gs{graded(33), graded(65), graded(129)};
  const StudyReport a = run_manufactured(shear_case(), gs, 1.0), b = run_manufactured(variable_case(), gs, 1.0);
  Outcome o;
  o.pass = a.order >= 1.0 && b.order >= 1.0;
  o.summary = "L2 order shear=" + std::to_string(a.order) + " variable=" + std::to_string(b.order) + " (>=1.0)";
  o.data = {{"shear", a.to_json()}, {"variable", b.to_json()}};
  return o;
}

Outcome contraction(const fs::path& dir) {
  NonlinearOptions opt;
  opt.tol = 1e-9;
  opt.maxit = 30;
  Outcome o;
  o.pass = true;
  std::vector<double> res;
  std::ostringstream s;
  for (std::size_t n : {129, 257}) {
    const GridPtr g = graded(n);
    FunctionalEvaluator ev(CoefficientSet::shear(g));
    const CorrectorBasis b = build_corrector_basis(ev);
    const DataTriple xi = 1e-2 * random_admissible_triple(g, 2024);
    const NonlinearResult r = nonlinear_solve(xi, b, opt);
    const auto q = r.state.ratios();
    double worst = 0.0;
    for (double v : q) worst = std::max(worst, v);
    o.pass = o.pass && r.state.converged && r.state.n <= 12 && worst <= 0.5;
    res.push_back(r.residual_inf);
    s << n << ": iterations=" << r.state.n << " max ratio=" << worst << " residual=" << r.residual_inf << "; ";
    o.data[std::to_string(n)] = r.report();
    if (n == 257) write_field_csv((dir / "nonlinear_u.csv").string(), r.u);
  }
  const double bound = 1e-6 + res[0] * nominal_h(257) / nominal_h(129);
  o.pass = o.pass && res[1] <= bound;
  s << "(n<=12, ratio<=0.5, residual(257)<=" << bound << ")";
  o.summary = s.str();
  return o;
}

Outcome tangency() {
  const GridPtr g = graded(129);
  FunctionalEvaluator ev(CoefficientSet::shear(g));
  const CorrectorBasis b = build_corrector_basis(ev);
  const ManifoldPoint z = manifold_point(DataTriple::zero(g), b);
  const DataTriple dir = tangent_direction(b, ev, 3);
  std::vector<double> eps{1e-2, 5e-3, 2.5e-3}, n0, n1;
  for (double e : eps) {
    const ManifoldPoint p = manifold_point(e * dir, b);
    n0.push_back(std::abs(p.nu0));
    n1.push_back(std::abs(p.nu1));
  }
  const double s0 = fitted_order(eps, n0), s1 = fitted_order(eps, n1);
  Outcome o;
  o.pass = s0 >= 1.8 && s1 >= 1.8 && z.nu0 == 0.0 && z.nu1 == 0.0;
  std::ostringstream s;
  s << "slopes " << s0 << ", " << s1 << " (>=1.8) nu(0)=(" << z.nu0 << ", " << z.nu1 << ")";
  o.summary = s.str();
  o.data = {{"eps", eps}, {"nu0", n0}, {"nu1", n1}, {"slopes", {s0, s1}}};
  return o;
}

Outcome lipschitz() {
  const GridPtr g = graded(129);
  const CoefficientSet base = CoefficientSet::shear(g);
  std::vector<double> ratios;
  for (double e : {1e-2, 1e-3}) {
    CoefficientSet c = base;
    c.alpha = Field::from_function(g, [&](double x, double y) { return 1.0 + e * std::sin(kPi * x) * (1.0 - y * y); });
    c.gamma1 = Field::from_function(g, [&](double x, double) { return e * std::cos(x); });
    c.gamma2 = Field::from_function(g, [&](double x, double) { return e * x * (1.0 - x); });
    c.provenance = CoefficientSet::Provenance::Custom;
    ratios.push_back(ell_lipschitz_probe(base, c, 5).ratio);
  }
  const double q = ratios[0] / ratios[1];
  Outcome o;
  o.pass = ratios[1] > 0.0 && q <= 3.0 && q >= 1.0 / 3.0;
  std::ostringstream s;
  s << "gap ratios " << ratios[0] << " (1e-2), " << ratios[1] << " (1e-3) quotient=" << q << " (within 3x)";
  o.summary = s.str();
  o.data = {{"ratios", ratios}};
  return o;
}

using Criterion = std::function<Outcome(const fs::path&)>;

// Runs criteria 1-10, writing artifacts under dir. Returns per-criterion pass flags.
std::vector<bool> run_suite(const fs::path& dir, bool print) {
  fs::create_directories(dir);
  const std::vector<std::pair<std::string, Criterion>> items{
      {"profile limits", [](const fs::path&) { return profile_limits(); }},
      {"singular profile residual", [](const fs::path&) { return singular_residual(); }},
      {"dual profile jumps", [](const fs::path&) { return dual_jumps(); }},
      {"functional route equivalence", [](const fs::path&) { return route_equivalence(); }},
      {"dichotomy", [](const fs::path&) { return dichotomy(); }},
      {"decomposition", decomposition},
      {"linear manufactured convergence", [](const fs::path&) { return linear_convergence(); }},
      {"nonlinear contraction", contraction},
      {"manifold tangency", [](const fs::path&) { return tangency(); }},
      {"functional Lipschitz probe", [](const fs::path&) { return lipschitz(); }},
  };
  std::vector<bool> flags;
  json all = json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = items[i].second(dir);
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("error: ") + e.what();
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    flags.push_back(o.pass);
    if (print)
      std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << items[i].first << "): " << o.summary
                << " [" << std::fixed << std::setprecision(1) << sec << " s]" << std::defaultfloat
                << std::setprecision(6) << std::endl;
    all.push_back({{"criterion", i + 1}, {"name", items[i].first}, {"pass", o.pass}, {"summary", o.summary},
                   {"data", o.data}});
  }
  take_warnings();
  std::ofstream(dir / "acceptance.json") << all.dump(2) << "\n";
  return flags;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_artifacts");
  fs::remove_all(root);
  std::vector<bool> flags = run_suite(root / "run1", true);

  // determinism: a second reference run must reproduce every artifact byte for byte
  run_suite(root / "run2", false);
  std::vector<std::string> differing;
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(root / "run1")) {
    ++compared;
    const fs::path other = root / "run2" / e.path().filename();
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) differing.push_back(e.path().filename().string());
  }
  const bool same = differing.empty() && compared > 0;
  std::cout << (same ? "PASS" : "FAIL") << " criterion 11 (determinism): " << compared << " artifacts compared, "
            << differing.size() << " differ" << std::endl;
  flags.push_back(same);

  std::size_t failed = 0;
  for (bool f : flags) failed += f ? 0 : 1;
  std::cout << flags.size() - failed << "/" << flags.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
