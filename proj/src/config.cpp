#include "fbflow/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "fbflow/expr.hpp"

namespace fbflow {

namespace {

using json = nlohmann::json;

const std::map<std::string, ProblemKind>& kinds() {
  static const std::map<std::string, ProblemKind> m = {
      {"linear-shear", ProblemKind::LinearShear}, {"linear-general", ProblemKind::LinearGeneral},
      {"nonlinear", ProblemKind::Nonlinear},      {"dual", ProblemKind::Dual},
      {"profiles", ProblemKind::Profiles},        {"decompose", ProblemKind::Decompose},
      {"verify", ProblemKind::Verify}};
  return m;
}

void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail_config("config field '" + path + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!ok.count(it.key())) fail_config("unknown config field '" + (path.empty() ? "" : path + ".") + it.key() + "'");
}

const json& required(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) fail_config("missing required config field '" + (path.empty() ? "" : path + ".") + key + "'");
  return obj.at(key);
}

template <class T>
T get(const json& obj, const std::string& key, const std::string& path, T fallback) {
  if (!obj.contains(key)) return fallback;
  const std::string name = (path.empty() ? "" : path + ".") + key;
  const json& v = obj.at(key);
  if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) fail_config("config field '" + name + "' must be a string");
    return v.get<std::string>();
  } else if constexpr (std::is_same_v<T, double>) {
    if (!v.is_number()) fail_config("config field '" + name + "' must be a number");
    return v.get<double>();
  } else {
    if (!v.is_number_integer() || v.get<long long>() < 0)
      fail_config("config field '" + name + "' must be a non-negative integer");
    return static_cast<T>(v.get<unsigned long long>());
  }
}

std::vector<std::size_t> size_list(const json& obj, const std::string& key, const std::string& path,
                                   std::vector<std::size_t> fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  const std::string name = path + "." + key;
  if (!v.is_array() || v.size() < 3) fail_config("config field '" + name + "' must list at least 3 grid sizes");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!e.is_number_integer() || e.get<long long>() < 9 || e.get<long long>() % 2 == 0)
      fail_config("config field '" + name + "' entries must be odd integers >= 9");
    out.push_back(e.get<std::size_t>());
    if (out.size() > 1 && out.back() <= out[out.size() - 2])
      fail_config("config field '" + name + "' must be strictly increasing");
  }
  return out;
}

void check_expression(const std::string& text, const std::string& name) {
  try {
    Expression e(text);
  } catch (const Error& err) {
    fail_config("config field '" + name + "': " + err.what());
  }
}

}  // namespace

std::string to_string(ProblemKind k) {
  for (const auto& [name, v] : kinds())
    if (v == k) return name;
  return "unknown";
}

ProblemKind problem_kind_from_string(const std::string& s) {
  auto it = kinds().find(s);
  if (it == kinds().end()) fail_config("config field 'problem': unknown problem kind '" + s + "'");
  return it->second;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_config(const json& j, const std::string& base_dir) {
  only_keys(j, "", {"problem", "domain", "grid", "data", "coefficients", "tolerances", "profiles", "verify",
                    "decompose", "output"});
  RunConfig c;
  c.base_dir = base_dir;
  c.hash = fnv1a_hex(j.dump());

  if (j.contains("problem")) c.problem = problem_kind_from_string(get<std::string>(j, "problem", "", ""));

  if (j.contains("domain")) {
    const json& d = j["domain"];
    only_keys(d, "domain", {"x0", "x1"});
    const double x0 = get<double>(d, "x0", "domain", 0.0), x1 = get<double>(d, "x1", "domain", 1.0);
    if (!(x1 > x0)) fail_config("config field 'domain': need x1 > x0");
    c.domain = Domain(x0, x1);
  }

  const json& g = required(j, "grid", "");
  only_keys(g, "grid", {"nx", "ny", "grading", "q", "fraction"});
  required(g, "nx", "grid");
  c.nx = get<std::size_t>(g, "nx", "grid", 0);
  c.ny = get<std::size_t>(g, "ny", "grid", c.nx);
  if (c.nx % 2 == 0 || c.ny % 2 == 0) fail_config("config field 'grid': nx and ny must be odd");
  const std::string grading = get<std::string>(g, "grading", "grid", "corner");
  const double q = get<double>(g, "q", "grid", 1.0), fraction = get<double>(g, "fraction", "grid", 0.25);
  if (grading == "corner") c.grading = Grading::corner(q, fraction);
  else if (grading == "uniform") c.grading = Grading::uniform();
  else fail_config("config field 'grid.grading' must be 'corner' or 'uniform'");

  if (j.contains("data")) {
    const json& d = j["data"];
    only_keys(d, "data", {"preset", "f", "delta0", "delta1", "seed", "scale"});
    c.data.preset = get<std::string>(d, "preset", "data", "expressions");
    static const std::set<std::string> presets = {"expressions", "zero", "fbar0", "fbar1", "random", "smooth"};
    if (!presets.count(c.data.preset)) fail_config("config field 'data.preset': unknown preset '" + c.data.preset + "'");
    if (d.contains("f")) {
      const json& f = d["f"];
      if (f.is_string()) {
        c.data.f.expression = f.get<std::string>();
        check_expression(c.data.f.expression, "data.f");
      } else if (f.is_number()) {
        c.data.f.expression = f.dump();
      } else {
        only_keys(f, "data.f", {"csv"});
        required(f, "csv", "data.f");
        c.data.f.csv = get<std::string>(f, "csv", "data.f", "");
      }
    }
    for (const char* key : {"delta0", "delta1"}) {
      std::string& dst = std::string(key) == "delta0" ? c.data.delta0 : c.data.delta1;
      if (!d.contains(key)) continue;
      dst = d[key].is_number() ? d[key].dump() : get<std::string>(d, key, "data", "0");
      check_expression(dst, std::string("data.") + key);
    }
    c.data.seed = get<std::uint64_t>(d, "seed", "data", 1);
    c.data.scale = get<double>(d, "scale", "data", 1.0);
  }

  if (j.contains("coefficients")) {
    const json& cf = j["coefficients"];
    only_keys(cf, "coefficients", {"alpha", "gamma1", "gamma2"});
    CoefficientSpec s;
    for (const char* key : {"alpha", "gamma1", "gamma2"}) {
      std::string& dst = std::string(key) == "alpha" ? s.alpha : std::string(key) == "gamma1" ? s.gamma1 : s.gamma2;
      if (!cf.contains(key)) continue;
      dst = cf[key].is_number() ? cf[key].dump() : get<std::string>(cf, key, "coefficients", "");
      check_expression(dst, std::string("coefficients.") + key);
    }
    c.coefficients = s;
  }

  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    only_keys(t, "tolerances",
              {"nonlinear_tol", "maxit", "eta", "dual_refresh_ratio", "max_mn_cond", "jump_tol", "compat_tol"});
    c.tol.nonlinear_tol = get<double>(t, "nonlinear_tol", "tolerances", c.tol.nonlinear_tol);
    c.tol.maxit = get<std::size_t>(t, "maxit", "tolerances", c.tol.maxit);
    c.tol.eta = get<double>(t, "eta", "tolerances", c.tol.eta);
    c.tol.dual_refresh_ratio = get<double>(t, "dual_refresh_ratio", "tolerances", c.tol.dual_refresh_ratio);
    c.tol.max_mn_cond = get<double>(t, "max_mn_cond", "tolerances", c.tol.max_mn_cond);
    c.tol.jump_tol = get<double>(t, "jump_tol", "tolerances", c.tol.jump_tol);
    c.tol.compat_tol = get<double>(t, "compat_tol", "tolerances", c.tol.compat_tol);
  }

  if (j.contains("profiles")) {
    const json& p = j["profiles"];
    only_keys(p, "profiles", {"k", "T", "n", "cutoff_radius"});
    c.profiles.k = int(get<std::size_t>(p, "k", "profiles", 0));
    c.profiles.T = get<double>(p, "T", "profiles", c.profiles.T);
    c.profiles.n = get<std::size_t>(p, "n", "profiles", c.profiles.n);
    c.profiles.cutoff_radius = get<double>(p, "cutoff_radius", "profiles", c.profiles.cutoff_radius);
  }

  if (j.contains("verify")) {
    const json& v = j["verify"];
    only_keys(v, "verify", {"sizes", "dichotomy_sizes", "studies", "floor"});
    c.verify.sizes = size_list(v, "sizes", "verify", c.verify.sizes);
    c.verify.dichotomy_sizes = size_list(v, "dichotomy_sizes", "verify", c.verify.dichotomy_sizes);
    c.verify.floor = get<double>(v, "floor", "verify", c.verify.floor);
    if (v.contains("studies")) {
      static const std::set<std::string> known = {"shear", "variable", "nonlinear", "functionals", "symmetry",
                                                  "dichotomy"};
      if (!v["studies"].is_array()) fail_config("config field 'verify.studies' must be an array");
      c.verify.studies.clear();
      for (const auto& s : v["studies"]) {
        if (!s.is_string() || !known.count(s.get<std::string>()))
          fail_config("config field 'verify.studies': unknown study " + s.dump());
        c.verify.studies.push_back(s.get<std::string>());
      }
    }
  }

  if (j.contains("decompose")) {
    const json& d = j["decompose"];
    only_keys(d, "decompose", {"fit_rmin", "fit_rmax"});
    c.fit_rmin = get<double>(d, "fit_rmin", "decompose", c.fit_rmin);
    c.fit_rmax = get<double>(d, "fit_rmax", "decompose", c.fit_rmax);
    if (!(0.0 < c.fit_rmin && c.fit_rmin < c.fit_rmax)) fail_config("config field 'decompose': need 0 < fit_rmin < fit_rmax");
  }

  if (j.contains("output")) {
    const json& o = j["output"];
    only_keys(o, "output", {"dir"});
    c.output_dir = get<std::string>(o, "dir", "output", c.output_dir);
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_config("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    fail_config("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path().string());
}

GridPtr RunConfig::grid() const { return build_grid(domain, nx, ny, grading); }

DataTriple RunConfig::triple(const GridPtr& grid) const {
  DataTriple t = DataTriple::zero(grid);
  const std::string& p = data.preset;
  if (p == "zero") {
  } else if (p == "fbar0" || p == "fbar1") {
    t.f = singular_profile(p == "fbar0" ? 0 : 1, grid, Cutoff{profiles.cutoff_radius}).f;
  } else if (p == "random") {
    t = random_admissible_triple(grid, data.seed);
  } else if (p == "smooth") {
    t = smooth_singular_data(grid);
  } else {
    if (!data.f.csv.empty()) {
      std::filesystem::path path(data.f.csv);
      if (path.is_relative() && !base_dir.empty()) path = std::filesystem::path(base_dir) / path;
      t.f = read_field_csv(path.string(), grid);
    } else if (!data.f.expression.empty()) {
      const Expression e(data.f.expression);
      t.f = Field::from_function(grid, [&](double x, double y) { return e(x, y); });
    }
    const Expression d0(data.delta0), d1(data.delta1);
    const double x0 = domain.x0, x1 = domain.x1;
    t.delta0 = Trace::from_function(*grid, Edge::Sigma0, [&](double y) { return d0(x0, y); });
    t.delta1 = Trace::from_function(*grid, Edge::Sigma1, [&](double y) { return d1(x1, y); });
    const CompatibilityReport cr = check_compatibility(t, tol.compat_tol);
    if (!cr.ok) emit_warning("data traces violate the compatibility conditions: " + cr.detail);
  }
  if (data.scale != 1.0) t *= data.scale;
  return t;
}

CoefficientSet RunConfig::coefficient_set(const GridPtr& grid) const {
  if (!coefficients) return CoefficientSet::shear(grid);
  const Expression a(coefficients->alpha), g1(coefficients->gamma1), g2(coefficients->gamma2);
  CoefficientSet c;
  c.alpha = Field::from_function(grid, [&](double x, double y) { return a(x, y); });
  c.gamma1 = Field::from_function(grid, [&](double x, double y) { return g1(x, y); });
  c.gamma2 = Field::from_function(grid, [&](double x, double y) { return g2(x, y); });
  c.provenance = CoefficientSet::Provenance::Custom;
  c.validate();
  return c;
}

NonlinearOptions RunConfig::nonlinear_options() const {
  NonlinearOptions o;
  o.tol = tol.nonlinear_tol;
  o.maxit = tol.maxit;
  o.eta = tol.eta;
  o.dual_refresh_ratio = tol.dual_refresh_ratio;
  o.max_mn_cond = tol.max_mn_cond;
  return o;
}

}  // namespace fbflow
