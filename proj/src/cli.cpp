#include "fbflow/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <ostream>

namespace fbflow {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct Sink {
  fs::path dir;
  std::string hash;

  void json_file(const std::string& name, json body) const {
    body["config_hash"] = hash;
    std::ofstream os(dir / name);
    if (!os) fail_config("cannot write " + (dir / name).string());
    os << body.dump(2) << '\n';
  }
  void field(const std::string& name, const Field& u) const { write_field_csv((dir / name).string(), u, hash); }
};

ProblemKind expected_kind(const std::string& sub, const RunConfig& cfg) {
  if (sub == "solve-linear") return cfg.coefficients ? ProblemKind::LinearGeneral : ProblemKind::LinearShear;
  if (sub == "solve-nonlinear") return ProblemKind::Nonlinear;
  if (sub == "dual") return ProblemKind::Dual;
  if (sub == "profiles") return ProblemKind::Profiles;
  if (sub == "decompose") return ProblemKind::Decompose;
  if (sub == "verify") return ProblemKind::Verify;
  fail_config("unknown subcommand '" + sub + "'");
}

json warnings_json() {
  json w = json::array();
  for (auto& s : take_warnings()) w.push_back(s);
  return w;
}

json run_linear(const RunConfig& cfg, const Sink& out, bool reference) {
  const GridPtr g = cfg.grid();
  LinearProblem p{cfg.coefficient_set(g), cfg.triple(g)};
  LinearSolution s = solve_linear(p);
  if (reference) s.stats.factor_time_ms = 0.0;
  out.field("u.csv", s.u);
  json r = {{"problem", to_string(cfg.coefficients ? ProblemKind::LinearGeneral : ProblemKind::LinearShear)},
            {"grid", g->descriptor()},
            {"stats", s.stats.to_json()},
            {"u_l2", norm(s.u, NormKind::L2)},
            {"u_max", s.u.max_abs()}};
  return r;
}

json run_nonlinear(const RunConfig& cfg, const Sink& out) {
  const GridPtr g = cfg.grid();
  if (cfg.coefficients) fail_config("config field 'coefficients' is not used by solve-nonlinear");
  FunctionalEvaluator shear(CoefficientSet::shear(g));
  const CorrectorBasis basis = build_corrector_basis(shear, Cutoff{cfg.profiles.cutoff_radius});
  const NonlinearResult r = nonlinear_solve(cfg.triple(g), basis, cfg.nonlinear_options());
  out.field("u.csv", r.u);
  {
    std::ofstream log(out.dir / "iterations.jsonl");
    for (const auto& h : r.state.history) {
      json line = h.to_json();
      line["config_hash"] = out.hash;
      log << line.dump() << '\n';
    }
  }
  json rep = r.report();
  rep["grid"] = g->descriptor();
  rep["corrector_cond"] = basis.cond;
  return rep;
}

json run_dual(const RunConfig& cfg, const Sink& out) {
  const GridPtr g = cfg.grid();
  const CoefficientSet c = cfg.coefficient_set(g);
  const LinearOperator adj(c, true);
  json rep = {{"grid", g->descriptor()}, {"shear", c.is_shear()}, {"profiles", json::array()}};
  for (int j = 0; j < 2; ++j) {
    const DualProfile d = solve_adjoint_with_jumps(j, adj, cfg.tol.jump_tol);
    out.field("phi" + std::to_string(j) + "_plus.csv", d.phi_plus);
    out.field("phi" + std::to_string(j) + "_minus.csv", d.phi_minus);
    double jmax = 0.0, smax = 0.0;
    for (std::size_t i = 0; i < d.jump.size(); ++i) {
      jmax = std::max(jmax, std::abs(d.jump[i] - d.jump_target[i]));
      smax = std::max(smax, std::abs(d.slope_jump[i] - d.slope_jump_target[i]));
    }
    rep["profiles"].push_back({{"j", j},
                               {"jump_error", d.jump_error},
                               {"value_jump_error", jmax},
                               {"slope_jump_error", smax},
                               {"residual_inf", d.residual_inf}});
  }
  return rep;
}

json run_profiles(const RunConfig& cfg, const Sink& out) {
  const ProfileSpec& ps = cfg.profiles;
  const ProfileFunction G = g0_ode_solve(ps.k, ps.T, ps.n);
  double gap = 0.0;
  {
    std::ofstream os(out.dir / "profile.csv");
    os << "t,G,dG,G_tricomi\n";
    char buf[160];
    for (std::size_t i = 0; i < G.t.size(); ++i) {
      const double t = G.t[i];
      const bool inner = std::abs(t) <= 6.0;
      const double gk = inner ? g0_kummer(ps.k, t) : 0.0;
      if (inner) gap = std::max(gap, std::abs(gk - G.G[i]));
      if (inner) std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", t, G.G[i], G.Gp[i], gk);
      else std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,\n", t, G.G[i], G.Gp[i]);
      os << buf;
    }
    os << "# config_hash=" << out.hash << '\n';
  }
  const GridPtr g = cfg.grid();
  const Cutoff cut{ps.cutoff_radius};
  for (int i = 0; i < 2; ++i) {
    const SingularProfile sp = singular_profile(i, g, cut, G);
    out.field("v" + std::to_string(i) + ".csv", sp.u);
    out.field("fbar" + std::to_string(i) + ".csv", sp.f);
  }
  return {{"k", ps.k},
          {"lambda", G.lambda},
          {"T", G.T},
          {"G_minus_T", G.value(-G.T)},
          {"G_plus_T", G.value(G.T)},
          {"ode_residual", ode_residual(G)},
          {"derivative_mismatch", G.derivative_mismatch},
          {"two_route_gap", gap},
          {"kummer_normalization", kummer_normalization(ps.k)},
          {"grid", g->descriptor()}};
}

json run_decompose(const RunConfig& cfg, const Sink& out) {
  const GridPtr g = cfg.grid();
  if (cfg.coefficients) fail_config("config field 'coefficients' is not used by decompose (shear only)");
  FunctionalEvaluator shear(CoefficientSet::shear(g));
  const CorrectorBasis basis = build_corrector_basis(shear, Cutoff{cfg.profiles.cutoff_radius});
  const Decomposition d = decompose(cfg.triple(g), shear, basis, cfg.fit_rmin, cfg.fit_rmax);
  out.field("u.csv", d.u);
  out.field("u_reg.csv", d.u_reg);
  json rep = d.report();
  rep["grid"] = g->descriptor();
  rep["corrector_cond"] = basis.cond;
  return rep;
}

json run_verify(const RunConfig& cfg, const Sink& out, int threads, std::ostream& log) {
  const VerifySpec& v = cfg.verify;
  const double q = cfg.grading.kind == Grading::Kind::Corner ? cfg.grading.q : 0.0;
  const auto grids = graded_grids(cfg.domain, v.sizes, q);
  std::vector<std::function<StudyReport()>> cells;
  for (const auto& s : v.studies) {
    if (s == "shear") cells.push_back([&] { return run_manufactured(shear_case(), grids, v.floor); });
    else if (s == "variable") cells.push_back([&] { return run_manufactured(variable_case(), grids, v.floor); });
    else if (s == "nonlinear") cells.push_back([&] { return run_manufactured(nonlinear_case(), grids, v.floor); });
    else if (s == "functionals") cells.push_back([&] { return functional_study(shear_case(), grids, v.floor); });
    else if (s == "symmetry")
      cells.push_back([&] {
        StudyReport r;
        r.name = "symmetry";
        double worst = 0.0;
        for (const auto& g : grids) {
          const double d = symmetry_check(random_admissible_triple(g, cfg.data.seed));
          worst = std::max(worst, d);
          StudyLevel l;
          l.grid = g->descriptor();
          l.h = 1.0 / double(g->nx() - 1);
          l.extra = {{"gap", d}};
          r.levels.push_back(l);
        }
        r.extra = {{"max_gap", worst}};
        r.pass = worst <= 1e-12;
        return r;
      });
    else if (s == "dichotomy")
      cells.push_back([&] { return dichotomy_experiment(graded_grids(cfg.domain, v.dichotomy_sizes, q), false); });
  }
  std::vector<StudyReport> reports(cells.size());
  const std::size_t width = std::max(1, threads);
  for (std::size_t b = 0; b < cells.size(); b += width) {
    std::vector<std::future<StudyReport>> batch;
    for (std::size_t i = b; i < std::min(cells.size(), b + width); ++i)
      batch.push_back(std::async(width == 1 ? std::launch::deferred : std::launch::async, cells[i]));
    for (std::size_t i = 0; i < batch.size(); ++i) reports[b + i] = batch[i].get();
  }
  json studies = json::array();
  bool all = true;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const StudyReport& r = reports[i];
    reports[i].write_csv((out.dir / (r.name + ".csv")).string());
    studies.push_back(r.to_json());
    all = all && r.pass;
    log << (r.pass ? "PASS " : "FAIL ") << r.name << '\n';
  }
  return {{"studies", studies}, {"all_pass", all}};
}

}  // namespace

int threads_from_env() {
  const char* s = std::getenv("FBFLOW_THREADS");
  if (!s || !*s) return 1;
  char* end = nullptr;
  const long v = std::strtol(s, &end, 10);
  if (*end != '\0' || v < 1 || v > 1024) fail_config("FBFLOW_THREADS must be an integer in [1, 1024]");
  return int(v);
}

json run_config(const std::string& sub, const RunConfig& cfg, const std::string& out_dir, bool reference_mode,
                int threads, std::ostream& log) {
  const ProblemKind kind = expected_kind(sub, cfg);
  if (cfg.problem && *cfg.problem != kind)
    fail_config("config field 'problem' is '" + to_string(*cfg.problem) + "' but subcommand " + sub + " runs '" +
                to_string(kind) + "'");
  if (reference_mode) threads = 1;
  Sink out{out_dir, cfg.hash};
  std::error_code ec;
  fs::create_directories(out.dir, ec);
  if (ec) fail_config("cannot create output directory " + out_dir + ": " + ec.message());
  take_warnings();

  json rep;
  switch (kind) {
    case ProblemKind::LinearShear:
    case ProblemKind::LinearGeneral: rep = run_linear(cfg, out, reference_mode); break;
    case ProblemKind::Nonlinear: rep = run_nonlinear(cfg, out); break;
    case ProblemKind::Dual: rep = run_dual(cfg, out); break;
    case ProblemKind::Profiles: rep = run_profiles(cfg, out); break;
    case ProblemKind::Decompose: rep = run_decompose(cfg, out); break;
    case ProblemKind::Verify: rep = run_verify(cfg, out, threads, log); break;
  }
  rep["subcommand"] = sub;
  rep["reference_mode"] = reference_mode;
  rep["threads"] = threads;
  rep["warnings"] = warnings_json();
  for (const auto& w : rep["warnings"]) log << "warning: " << w.get<std::string>() << '\n';
  out.json_file("report.json", rep);
  return rep;
}

int run(const RunOptions& opt, std::ostream& log) {
  try {
    const RunConfig cfg = load_config(opt.config_path);
    const std::string dir = opt.out ? *opt.out : cfg.output_dir;
    run_config(opt.subcommand, cfg, dir, opt.reference_mode || opt.threads == 1, opt.threads, log);
    log << "wrote " << dir << " (config " << cfg.hash << ")\n";
    return 0;
  } catch (const Error& e) {
    log << (e.kind() == ErrorKind::Config ? "config error: " : "numerical failure: ") << e.what() << '\n';
    return e.kind() == ErrorKind::Config ? 1 : 2;
  } catch (const std::exception& e) {
    log << "numerical failure: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace fbflow
