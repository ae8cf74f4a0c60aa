#include "gconv/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace gconv {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && std::isfinite(out);
}

bool parse_int(const std::string& s, long long& out) {
  const std::string t = trim(s);
  const auto r = std::from_chars(t.data(), t.data() + t.size(), out);
  return r.ec == std::errc() && r.ptr == t.data() + t.size() && !t.empty();
}

bool parse_doubles(const std::string& s, std::vector<double>& out) {
  out.clear();
  for (const auto& item : split(s, ',')) {
    double v = 0.0;
    if (!parse_double(item, v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"experiment", {"kind", "seed", "workers"}},
      {"family", {"name"}},
      {"grid", {"box", "n"}},
      {"operator", {"kind", "p", "weight", "w1", "w2", "table", "h", "shift", "time_dependent"}},
      {"data", {"g", "f", "phi", "g_perturbation"}},
      {"data2", {"f", "phi"}},
      {"time", {"T", "K"}},
      {"solver", {"tol", "max_iter", "damping", "regularization", "max_backtracks", "apriori_slack",
                  "check_structure", "structure_pairs", "dual_modes"}},
      {"sweep", {"h_list", "problem", "reference", "dictionary", "bumps", "xi"}},
      {"thresholds", {"distance", "flux", "divcurl", "consistency", "effective"}},
      {"verify", {"pairs", "tol", "radius"}},
      {"output", {"dir"}},
  };
  return keys;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  std::vector<std::string> errors;

  bool has(const std::string& path) const { return tree_.get_optional<std::string>(path).has_value(); }

  std::string str(const std::string& path, const std::string& fallback) const {
    return has(path) ? trim(tree_.get<std::string>(path)) : fallback;
  }

  double real(const std::string& path, double fallback) {
    if (!has(path)) return fallback;
    double v = 0.0;
    if (!parse_double(tree_.get<std::string>(path), v)) {
      errors.push_back(path + ": expected a finite number, got '" + str(path, "") + "'");
      return fallback;
    }
    return v;
  }

  long long integer(const std::string& path, long long fallback) {
    if (!has(path)) return fallback;
    long long v = 0;
    if (!parse_int(tree_.get<std::string>(path), v)) {
      errors.push_back(path + ": expected an integer, got '" + str(path, "") + "'");
      return fallback;
    }
    return v;
  }

  bool boolean(const std::string& path, bool fallback) {
    if (!has(path)) return fallback;
    const auto v = str(path, "");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    errors.push_back(path + ": expected true or false, got '" + v + "'");
    return fallback;
  }

  void require(bool ok, const std::string& path, const std::string& reason) {
    if (!ok) errors.push_back(path + ": " + reason);
  }

 private:
  const pt::ptree& tree_;
};

Weight weight_of(const OperatorConfig& op) {
  if (op.kind == "p_laplacian") return parse_weight(op.weight);
  if (op.kind == "two_phase") return two_phase_weight(op.w1, op.w2);
  if (op.kind == "custom_table") return table_weight(op.table);
  throw ConfigError("operator.kind: unknown operator kind '" + op.kind + "'");
}

RunConfig parse_tree(const pt::ptree& tree) {
  Reader r(tree);
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (body.empty()) {
      r.errors.push_back(section + ": key outside of a section");
      continue;
    }
    if (it == known_keys().end()) {
      r.errors.push_back(section + ": unknown section");
      continue;
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) r.errors.push_back(section + "." + key + ": unknown key");
    }
  }

  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    for (const auto& [key, value] : body) cfg.snapshot.emplace_back(section + "." + key, trim(value.data()));
  }

  cfg.kind = r.str("experiment.kind", "");
  const auto& kinds = experiment_kinds();
  if (cfg.kind.empty()) {
    r.errors.push_back("experiment.kind: missing");
  } else if (std::find(kinds.begin(), kinds.end(), cfg.kind) == kinds.end()) {
    r.errors.push_back("experiment.kind: unknown experiment kind '" + cfg.kind + "'");
  }
  if (r.has("experiment.seed")) {
    const auto s = r.str("experiment.seed", "");
    std::uint64_t seed = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
      r.errors.push_back("experiment.seed: expected an unsigned 64-bit integer, got '" + s + "'");
    } else {
      cfg.seed = seed;
    }
  }
  cfg.workers = static_cast<int>(r.integer("experiment.workers", 1));
  r.require(cfg.workers >= 1, "experiment.workers", "must be >= 1");

  cfg.family = r.str("family.name", cfg.family);
  int n = 1;
  try {
    n = make_family(cfg.family).n();
  } catch (const std::exception& e) {
    r.errors.push_back(std::string("family.name: ") + e.what());
  }

  cfg.box = Box::unit(n);
  if (r.has("grid.box")) {
    const auto axes = split(r.str("grid.box", ""), ';');
    std::vector<std::pair<double, double>> pairs;
    bool ok = true;
    for (const auto& axis : axes) {
      std::vector<double> v;
      if (!parse_doubles(axis, v) || v.size() != 2 || !(v[0] < v[1])) {
        ok = false;
        break;
      }
      pairs.emplace_back(v[0], v[1]);
    }
    if (ok && axes.size() == 1 && n > 1) pairs.assign(static_cast<std::size_t>(n), pairs.front());
    if (!ok) {
      r.errors.push_back("grid.box: expected 'lo,hi' or 'lo,hi;lo,hi;...' with lo < hi");
    } else if (static_cast<int>(pairs.size()) != n) {
      r.errors.push_back("grid.box: " + std::to_string(pairs.size()) + " axes given, family has n = " +
                         std::to_string(n));
    } else {
      cfg.box = Box(pairs);
    }
  }
  {
    std::vector<double> v;
    const auto s = r.str("grid.n", "65");
    if (!parse_doubles(s, v)) {
      r.errors.push_back("grid.n: expected an integer or a comma list, got '" + s + "'");
    } else {
      if (v.size() == 1) v.assign(static_cast<std::size_t>(n), v.front());
      if (static_cast<int>(v.size()) != n) {
        r.errors.push_back("grid.n: " + std::to_string(v.size()) + " entries given, family has n = " +
                           std::to_string(n));
      }
      for (double x : v) {
        if (x != std::floor(x) || x < 3) {
          r.errors.push_back("grid.n: node counts must be integers >= 3");
          break;
        }
        cfg.nodes.push_back(static_cast<int>(x));
      }
    }
  }

  cfg.op.kind = r.str("operator.kind", cfg.op.kind);
  r.require(cfg.op.kind == "p_laplacian" || cfg.op.kind == "two_phase" || cfg.op.kind == "custom_table",
            "operator.kind", "unknown operator kind '" + cfg.op.kind + "'");
  cfg.op.p = r.real("operator.p", cfg.op.p);
  r.require(cfg.op.p >= 2.0, "operator.p", "must be >= 2");
  cfg.op.weight = r.str("operator.weight", cfg.op.weight);
  cfg.op.w1 = r.real("operator.w1", cfg.op.w1);
  cfg.op.w2 = r.real("operator.w2", cfg.op.w2);
  if (r.has("operator.table") && !parse_doubles(r.str("operator.table", ""), cfg.op.table)) {
    r.errors.push_back("operator.table: expected a comma list of numbers");
  }
  cfg.op.h = static_cast<int>(r.integer("operator.h", cfg.op.h));
  r.require(cfg.op.h >= 1, "operator.h", "must be >= 1");
  cfg.op.shift = r.real("operator.shift", cfg.op.shift);
  cfg.op.time_dependent = r.boolean("operator.time_dependent", cfg.op.time_dependent);
  if (cfg.op.kind == "custom_table" && cfg.op.table.empty()) {
    r.errors.push_back("operator.table: custom_table needs values");
  }
  try {
    const Weight w = weight_of(cfg.op);
    r.require(w.min > 0.0, cfg.op.kind == "p_laplacian" ? "operator.weight" : "operator." + cfg.op.kind,
              "weight must be positive");
  } catch (const std::exception& e) {
    if (cfg.op.kind == "p_laplacian") r.errors.push_back(std::string("operator.weight: ") + e.what());
  }

  cfg.data.g = r.str("data.g", cfg.data.g);
  cfg.data.f = r.str("data.f", cfg.data.f);
  cfg.data.phi = r.str("data.phi", cfg.data.phi);
  cfg.data.g_perturbation = r.str("data.g_perturbation", cfg.data.g_perturbation);
  cfg.data.f2 = r.str("data2.f", "");
  cfg.data.phi2 = r.str("data2.phi", "");
  r.require(cfg.data.g_perturbation == "none" || cfg.data.g_perturbation == "scale" ||
                cfg.data.g_perturbation == "sine",
            "data.g_perturbation", "expected none, scale or sine");
  auto check_expr = [&](const std::string& expr, const std::string& field, bool allow_elliptic) {
    if (expr.empty() || (allow_elliptic && expr == "elliptic")) return;
    try {
      build_data(expr, cfg.box, field);
    } catch (const std::exception& e) {
      r.errors.push_back(e.what());
    }
  };
  check_expr(cfg.data.g, "data.g", false);
  check_expr(cfg.data.f, "data.f", false);
  check_expr(cfg.data.phi, "data.phi", true);
  check_expr(cfg.data.f2, "data2.f", false);
  check_expr(cfg.data.phi2, "data2.phi", false);

  cfg.T = r.real("time.T", cfg.T);
  r.require(cfg.T > 0.0, "time.T", "must be positive");
  cfg.K = static_cast<int>(r.integer("time.K", cfg.K));
  r.require(cfg.K >= 1, "time.K", "must be >= 1");

  auto& so = cfg.solver;
  so.tol = r.real("solver.tol", so.tol);
  so.max_iter = static_cast<int>(r.integer("solver.max_iter", so.max_iter));
  r.require(so.max_iter >= 1, "solver.max_iter", "must be >= 1");
  so.damping = r.real("solver.damping", so.damping);
  r.require(so.damping > 0.0 && so.damping <= 1.0, "solver.damping", "must lie in (0, 1]");
  so.regularization = r.real("solver.regularization", so.regularization);
  r.require(so.regularization >= 0.0, "solver.regularization", "must be >= 0");
  so.max_backtracks = static_cast<int>(r.integer("solver.max_backtracks", so.max_backtracks));
  r.require(so.max_backtracks >= 0, "solver.max_backtracks", "must be >= 0");
  so.apriori_slack = r.real("solver.apriori_slack", so.apriori_slack);
  r.require(so.apriori_slack >= 1.0, "solver.apriori_slack", "must be >= 1");
  so.check_structure = r.boolean("solver.check_structure", so.check_structure);
  so.structure_pairs = static_cast<int>(r.integer("solver.structure_pairs", so.structure_pairs));
  r.require(so.structure_pairs >= 1, "solver.structure_pairs", "must be >= 1");
  so.dual_modes = static_cast<int>(r.integer("solver.dual_modes", so.dual_modes));
  r.require(so.dual_modes >= 1, "solver.dual_modes", "must be >= 1");

  const bool needs_sweep = cfg.kind == "sweep" || cfg.kind == "divcurl" ||
                           cfg.kind == "consistency" || cfg.kind == "data-convergence";
  if (r.has("sweep.h_list")) {
    std::vector<double> v;
    if (!parse_doubles(r.str("sweep.h_list", ""), v)) {
      r.errors.push_back("sweep.h_list: expected a comma list of integers");
    } else {
      for (double x : v) cfg.sweep.h_list.push_back(static_cast<int>(x));
    }
  }
  if (needs_sweep) {
    const auto& h = cfg.sweep.h_list;
    if (h.size() < 3) {
      r.errors.push_back("sweep.h_list: h_list needs >= 3 entries");
    } else {
      bool ok = h.front() >= 1;
      for (std::size_t i = 1; i < h.size(); ++i) ok = ok && h[i] > h[i - 1];
      r.require(ok, "sweep.h_list", "entries must be positive and strictly increasing");
      for (std::size_t d = 0; d < cfg.nodes.size(); ++d) {
        if (cfg.nodes[d] < 8 * h.back()) {
          r.errors.push_back("grid.n: " + std::to_string(cfg.nodes[d]) + " nodes on axis " +
                             std::to_string(d) + " do not resolve h = " + std::to_string(h.back()) +
                             " (need >= " + std::to_string(8 * h.back()) + ")");
          break;
        }
      }
    }
  }
  cfg.sweep.problem = r.str("sweep.problem", cfg.sweep.problem);
  r.require(cfg.sweep.problem == "elliptic" || cfg.sweep.problem == "parabolic", "sweep.problem",
            "expected elliptic or parabolic");
  cfg.sweep.reference = r.str("sweep.reference", cfg.sweep.reference);
  r.require(cfg.sweep.reference == "finest_member" || cfg.sweep.reference == "homogenized_1d",
            "sweep.reference", "expected finest_member or homogenized_1d");
  if (cfg.sweep.reference == "homogenized_1d") {
    r.require(n == 1 && cfg.family.rfind("euclidean", 0) == 0, "sweep.reference",
              "homogenized_1d needs family euclidean:1");
  }
  cfg.sweep.dictionary = static_cast<int>(r.integer("sweep.dictionary", cfg.sweep.dictionary));
  r.require(cfg.sweep.dictionary >= 1, "sweep.dictionary", "must be >= 1");
  cfg.sweep.bumps = static_cast<int>(r.integer("sweep.bumps", cfg.sweep.bumps));
  r.require(cfg.sweep.bumps >= 1, "sweep.bumps", "must be >= 1");
  if (r.has("sweep.xi") && !parse_doubles(r.str("sweep.xi", ""), cfg.sweep.xi)) {
    r.errors.push_back("sweep.xi: expected a comma list of numbers");
  }
  if (!cfg.sweep.xi.empty()) {
    r.require(n == 1 && cfg.family.rfind("euclidean", 0) == 0, "sweep.xi",
              "effective-coefficient probes need family euclidean:1");
  }

  auto& th = cfg.thresholds;
  th.distance = r.real("thresholds.distance", th.distance);
  th.flux = r.real("thresholds.flux", th.flux);
  th.divcurl = r.real("thresholds.divcurl", th.divcurl);
  th.consistency = r.real("thresholds.consistency", th.consistency);
  th.effective = r.real("thresholds.effective", th.effective);
  for (const char* key : {"distance", "flux", "divcurl", "consistency", "effective"}) {
    r.require(r.real(std::string("thresholds.") + key, 0.0) >= 0.0, std::string("thresholds.") + key,
              "must be >= 0");
  }

  cfg.verify.pairs = static_cast<int>(r.integer("verify.pairs", cfg.verify.pairs));
  r.require(cfg.verify.pairs >= 1, "verify.pairs", "must be >= 1");
  cfg.verify.tol = r.real("verify.tol", cfg.verify.tol);
  r.require(cfg.verify.tol > 0.0, "verify.tol", "must be positive");
  cfg.verify.radius = r.real("verify.radius", cfg.verify.radius);
  r.require(cfg.verify.radius > 0.0, "verify.radius", "must be positive");

  cfg.out_dir = r.str("output.dir", cfg.out_dir.string());

  if (!r.errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : r.errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

}  // namespace

Weight parse_weight(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = trim(spec.substr(0, colon));
  std::vector<double> args;
  if (colon != std::string::npos && !parse_doubles(spec.substr(colon + 1), args)) {
    throw ConfigError("cannot parse weight arguments in '" + spec + "'");
  }
  auto need = [&](std::size_t n) {
    if (args.size() != n) {
      throw ConfigError("weight '" + name + "' takes " + std::to_string(n) + " argument(s)");
    }
  };
  if (name == "constant") {
    need(1);
    return constant_weight(args[0]);
  }
  if (name == "sine") {
    need(2);
    return sine_weight(args[0], args[1]);
  }
  if (name == "two_phase") {
    need(2);
    return two_phase_weight(args[0], args[1]);
  }
  if (name == "table") {
    if (args.empty()) throw ConfigError("weight 'table' needs values");
    return table_weight(args);
  }
  throw ConfigError("unknown weight '" + name + "'");
}

RunConfig parse_config_text(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("invalid configuration:\n  line " + std::to_string(e.line()) + ": " + e.message());
  }
  return parse_tree(tree);
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

VectorFieldFamily build_family(const RunConfig& cfg) { return make_family(cfg.family); }

Grid build_grid(const RunConfig& cfg) { return Grid(cfg.box, cfg.nodes); }

MonotoneMap build_base_map(const RunConfig& cfg) {
  return make_p_laplacian(cfg.op.p, weight_of(cfg.op), cfg.op.time_dependent);
}

MonotoneMap build_map(const RunConfig& cfg) {
  MonotoneMap a = build_base_map(cfg);
  if (cfg.op.h != 1) a = make_oscillating(a, cfg.op.h);
  if (cfg.op.shift != 0.0) a = make_shifted(a, cfg.op.shift);
  return a;
}

ScalarFn build_data(const std::string& expr, const Box& box, const std::string& field) {
  const std::string e = trim(expr);
  double c = 0.0;
  if (e == "zero") return [](const Point&) { return 0.0; };
  if (parse_double(e, c)) return [c](const Point&) { return c; };
  const int n = box.dim();
  if (e == "bump") {
    return [box, n](const Point& x) {
      double v = 1.0;
      for (int d = 0; d < n; ++d) {
        const double r = (x[d] - 0.5 * (box.lower(d) + box.upper(d))) / (0.5 * box.length(d));
        if (std::abs(r) >= 1.0) return 0.0;
        const double s = 1.0 - r * r;
        v *= s * s * s;
      }
      return v;
    };
  }
  if (e.rfind("sine:", 0) == 0) {
    std::vector<double> k;
    if (parse_doubles(e.substr(5), k)) {
      if (k.size() == 1) k.assign(static_cast<std::size_t>(n), k.front());
      const bool ok = static_cast<int>(k.size()) == n &&
                      std::all_of(k.begin(), k.end(), [](double v) { return v >= 1 && v == std::floor(v); });
      if (ok) {
        return [box, k, n](const Point& x) {
          double v = 1.0;
          for (int d = 0; d < n; ++d) {
            v *= std::sin(k[static_cast<std::size_t>(d)] * std::numbers::pi * (x[d] - box.lower(d)) /
                          box.length(d));
          }
          return v;
        };
      }
    }
  }
  throw ConfigError(field + ": cannot parse data expression '" + e +
                    "' (expected a number, zero, bump or sine:<k>[,<k>...])");
}

SequenceSpec build_sequence(const RunConfig& cfg) {
  SequenceSpec spec(build_family(cfg), build_base_map(cfg));
  spec.h_list = cfg.sweep.h_list;
  spec.kind = cfg.sweep.problem == "parabolic" ? ProblemKind::parabolic : ProblemKind::elliptic;
  spec.grid = build_grid(cfg);
  spec.g = build_data(cfg.data.g, cfg.box, "data.g");
  if (!cfg.data.f.empty()) {
    auto f = build_data(cfg.data.f, cfg.box, "data.f");
    spec.f = [f](const Point& x, double) { return f(x); };
  }
  if (cfg.data.phi != "elliptic") spec.phi = build_data(cfg.data.phi, cfg.box, "data.phi");
  if (!cfg.data.f2.empty()) {
    auto f = build_data(cfg.data.f2, cfg.box, "data2.f");
    spec.f2 = [f](const Point& x, double) { return f(x); };
  }
  if (!cfg.data.phi2.empty()) spec.phi2 = build_data(cfg.data.phi2, cfg.box, "data2.phi");
  spec.T = cfg.T;
  spec.K = cfg.K;
  if (cfg.sweep.reference == "homogenized_1d") {
    spec.reference = {ReferenceSpec::Kind::analytic, "homogenized_1d"};
  }
  spec.dictionary_modes = cfg.sweep.dictionary;
  spec.divcurl_bumps = cfg.sweep.bumps;
  spec.divcurl = cfg.kind == "divcurl";
  spec.probe_xi = cfg.sweep.xi;
  spec.thresholds = cfg.thresholds;
  spec.solver = cfg.solver;
  spec.structure_pairs = cfg.solver.structure_pairs;
  spec.workers = cfg.workers;
  spec.seed = cfg.seed;
  return spec;
}

std::function<ScalarFn(int)> build_perturbation(const RunConfig& cfg) {
  const ScalarFn g = build_data(cfg.data.g, cfg.box, "data.g");
  const ScalarFn mode = build_data("sine:1", cfg.box, "data.g_perturbation");
  const std::string kind = cfg.data.g_perturbation;
  return [g, mode, kind](int h) -> ScalarFn {
    const double e = 1.0 / h;
    if (kind == "scale") return [g, e](const Point& x) { return g(x) * (1.0 + e); };
    if (kind == "sine") return [g, mode, e](const Point& x) { return g(x) + e * mode(x); };
    return g;
  };
}

}  // namespace gconv
