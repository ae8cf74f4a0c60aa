#include "gconv/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include <json.hpp>

#include "gconv/field_io.hpp"

namespace gconv {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string num(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

/// All output goes through here so that the manifest inventory is complete.
class Writer {
 public:
  explicit Writer(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec || !fs::is_directory(root_)) {
      throw Error("cannot create output directory '" + root_.string() + "': " + ec.message());
    }
  }

  const fs::path& root() const { return root_; }

  void text(const std::string& rel, const std::string& content) {
    const fs::path path = root_ / rel;
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
    out.close();
    if (!out) throw Error("cannot write '" + path.string() + "'");
    track(rel);
  }

  void track(const std::string& rel) { files_.push_back(rel); }
  const std::vector<std::string>& files() const { return files_; }

  void atomic(const std::string& rel, const std::string& content) {
    const fs::path path = root_ / rel;
    const fs::path tmp = root_ / (rel + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary);
      out << content;
      out.close();
      if (!out) throw Error("cannot write '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
  }

 private:
  fs::path root_;
  std::vector<std::string> files_;
};

json solve_json(const SolveReport& r) {
  return json{{"iterations", r.iterations},  {"steps", r.steps},
              {"converged", r.converged},    {"residual_bound", jnum(r.residual_bound)},
              {"residual_dual", jnum(r.residual_dual)}, {"tol", jnum(r.tol)},
              {"apriori_ok", r.apriori_ok},  {"norm", jnum(r.norm)},
              {"bound", jnum(r.bound)}};
}

json verdicts_json(const std::vector<Verdict>& verdicts) {
  json out = json::array();
  for (const auto& v : verdicts) {
    out.push_back(json{{"name", v.name},
                       {"passed", v.passed},
                       {"hard", v.hard},
                       {"value", jnum(v.value)},
                       {"threshold", jnum(v.threshold)},
                       {"detail", v.detail}});
  }
  return out;
}

json config_json(const RunConfig& cfg) {
  json snap = json::object();
  for (const auto& [k, v] : cfg.snapshot) snap[k] = v;
  return snap;
}

Verdict simple_verdict(std::string name, bool passed, double value, double threshold,
                       std::string detail) {
  Verdict v;
  v.name = std::move(name);
  v.passed = passed;
  v.value = value;
  v.threshold = threshold;
  v.detail = std::move(detail);
  return v;
}

struct Outcome {
  json report;
  std::vector<Verdict> verdicts;
  json timings = json::object();
};

void history_csv(Writer& w, const std::string& rel, const SolveReport& r) {
  std::string csv = "iteration,descent,certified\n";
  for (std::size_t i = 0; i < r.descent_history.size(); ++i) {
    csv += std::to_string(i) + "," + num(r.descent_history[i]) + "," + num(r.certified_history[i]) + "\n";
  }
  w.text(rel, csv);
}

Outcome run_verify(const RunConfig& cfg, Writer& w) {
  const auto family = build_family(cfg);
  const MonotoneMap a = build_map(cfg);
  StructureOptions so;
  so.n_pairs = cfg.verify.pairs;
  so.tol = cfg.verify.tol;
  so.radius = cfg.verify.radius;
  so.final_time = cfg.T;
  so.seed = cfg.seed;
  const auto rep = verify_structure(a, cfg.box, family.m(), so);
  const auto lic = lic_report(family, cfg.box, 1000, cfg.seed);

  Outcome out;
  json conds = json::array();
  std::string csv = "condition,passed,worst_margin\n";
  for (int c = 0; c < 4; ++c) {
    const auto& res = rep.conditions[static_cast<std::size_t>(c)];
    const std::string name = condition_name(Condition(c));
    json entry{{"condition", name}, {"passed", res.passed}};
    double margin = std::nan("");
    if (res.worst) {
      margin = res.worst->margin;
      auto vec = [](const auto& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
      entry["witness"] = json{{"x", vec(res.worst->x)},
                              {"t", res.worst->t},
                              {"xi", vec(res.worst->xi)},
                              {"eta", vec(res.worst->eta)},
                              {"margin", jnum(res.worst->margin)}};
    }
    conds.push_back(entry);
    csv += name + "," + (res.passed ? "1" : "0") + "," + num(margin) + "\n";
    out.verdicts.push_back(simple_verdict("condition_" + name, res.passed, margin, -cfg.verify.tol,
                                          res.passed ? "holds on all sampled pairs"
                                                     : "violated; witness recorded"));
  }
  const auto& pr = a.params();
  out.report = json{{"kind", "verify-class"},
                    {"operator", a.description()},
                    {"params", {{"alpha", pr.alpha}, {"beta", pr.beta}, {"p", pr.p}, {"beta_prime", pr.beta_prime()}}},
                    {"pairs", cfg.verify.pairs},
                    {"conditions", conds},
                    {"empirical_alpha", jnum(rep.empirical_alpha)},
                    {"empirical_beta", jnum(rep.empirical_beta)},
                    {"lic", {{"family", family.name()},
                             {"deficient_fraction", lic.deficient_fraction},
                             {"samples", lic.n_samples}}}};
  w.text("report.csv", csv);
  w.text("plotdata/conditions.csv", csv);
  return out;
}

DiscreteFunction sample(const RunConfig& cfg, const Grid& grid, const std::string& expr,
                        const std::string& field) {
  return DiscreteFunction::sample(grid, build_data(expr, cfg.box, field), true);
}

Outcome run_solve_elliptic(const RunConfig& cfg, Writer& w) {
  const auto family = build_family(cfg);
  const Grid grid = build_grid(cfg);
  const MonotoneMap a = build_map(cfg);
  MonotoneSolver solver(family, grid, cfg.solver);
  const auto g = sample(cfg, grid, cfg.data.g, "data.g");
  const auto [u, rep] = solver.solve_elliptic(a, g);

  write_csv(u, w.root() / "fields/solution.csv");
  w.track("fields/solution.csv");
  write_binary(u, w.root() / "fields/solution");
  w.track("fields/solution.bin");
  w.track("fields/solution.json");
  write_csv(momentum(solver.x_gradient(), a, u, 0.0), w.root() / "fields/flux.csv");
  w.track("fields/flux.csv");
  history_csv(w, "plotdata/residual_history.csv", rep);
  w.text("report.csv", "iterations,residual_bound,norm,bound\n" + std::to_string(rep.iterations) + "," +
                           num(rep.residual_bound) + "," + num(rep.norm) + "," + num(rep.bound) + "\n");

  Outcome out;
  out.report = json{{"kind", "solve-elliptic"},
                    {"operator", a.description()},
                    {"family", family.name()},
                    {"solve", solve_json(rep)},
                    {"max_abs", u.values().cwiseAbs().maxCoeff()},
                    {"l2_norm", lp_norm(u, 2.0)}};
  out.timings["solve"] = rep.wall_time;
  out.verdicts.push_back(simple_verdict("converged", rep.converged, rep.residual_bound, rep.tol,
                                        "certified residual below tolerance"));
  out.verdicts.push_back(simple_verdict("apriori", rep.apriori_ok, rep.norm,
                                        cfg.solver.apriori_slack * rep.bound,
                                        "||Xu||_p against the a-priori bound"));
  return out;
}

Outcome run_solve_parabolic(const RunConfig& cfg, Writer& w) {
  const auto family = build_family(cfg);
  const Grid grid = build_grid(cfg);
  const MonotoneMap a = build_map(cfg);
  MonotoneSolver solver(family, grid, cfg.solver);
  const auto g = sample(cfg, grid, cfg.data.g, "data.g");
  const auto f = cfg.data.f.empty() ? g : sample(cfg, grid, cfg.data.f, "data.f");
  const DiscreteFunction phi = cfg.data.phi == "elliptic" ? solver.solve_elliptic(a, g).first
                                                          : sample(cfg, grid, cfg.data.phi, "data.phi");
  const auto [traj, rep] = solver.solve_parabolic(a, {f}, phi, cfg.T, cfg.K);

  for (const auto& file : write_trajectory(traj, w.root() / "fields/trajectory")) {
    w.track("fields/trajectory/" + file);
  }
  std::string csv = "step,t,l2_norm\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    csv += std::to_string(k) + "," + num(traj.times[k]) + "," + num(lp_norm(traj.states[k], 2.0)) + "\n";
  }
  w.text("report.csv", csv);
  w.text("plotdata/l2_norm.csv", csv);
  history_csv(w, "plotdata/residual_history.csv", rep);

  Outcome out;
  out.report = json{{"kind", "solve-parabolic"},
                    {"operator", a.description()},
                    {"family", family.name()},
                    {"T", cfg.T},
                    {"K", cfg.K},
                    {"solve", solve_json(rep)},
                    {"final_l2_norm", lp_norm(traj.final_state(), 2.0)}};
  out.timings["solve"] = rep.wall_time;
  out.verdicts.push_back(simple_verdict("converged", rep.converged, rep.residual_bound, rep.tol,
                                        "every step certified below tolerance"));
  out.verdicts.push_back(simple_verdict("energy", rep.apriori_ok, rep.norm,
                                        cfg.solver.apriori_slack * rep.bound,
                                        "max_k ||u^k||_L2 against the discrete energy bound"));
  return out;
}

json members_json(const ConvergenceReport& r) {
  json out = json::array();
  for (const auto& m : r.members) {
    json e{{"h", m.h},
           {"distance", jnum(m.distance)},
           {"flux_residual", jnum(m.flux_residual)},
           {"flux_bound_ratio", jnum(m.flux_bound_ratio)},
           {"structure_ok", m.structure_ok},
           {"solve", solve_json(m.solve)}};
    if (m.divcurl_gap) e["divcurl_gap"] = jnum(*m.divcurl_gap);
    if (!m.divcurl_products.empty()) e["divcurl_products"] = m.divcurl_products;
    out.push_back(e);
  }
  return out;
}

Outcome sequence_outcome(const ConvergenceReport& r, Writer& w) {
  std::string csv = "h,distance,flux_residual,divcurl_gap\n";
  std::string plot = "h,distance,flux_residual,divcurl_gap,flux_bound_ratio,iterations\n";
  for (const auto& m : r.members) {
    const std::string gap = m.divcurl_gap ? num(*m.divcurl_gap) : "";
    csv += std::to_string(m.h) + "," + num(m.distance) + "," + num(m.flux_residual) + "," + gap + "\n";
    plot += std::to_string(m.h) + "," + num(m.distance) + "," + num(m.flux_residual) + "," + gap + "," +
            num(m.flux_bound_ratio) + "," + std::to_string(m.solve.iterations) + "\n";
  }
  w.text("report.csv", csv);
  w.text("plotdata/convergence.csv", plot);
  if (!r.divcurl_limits.empty()) {
    std::string dc = "h,test,product,limit\n";
    for (const auto& m : r.members) {
      for (std::size_t j = 0; j < m.divcurl_products.size(); ++j) {
        dc += std::to_string(m.h) + "," + std::to_string(j) + "," + num(m.divcurl_products[j]) + "," +
              num(r.divcurl_limits[j]) + "\n";
      }
    }
    w.text("plotdata/divcurl.csv", dc);
  }
  json eff = json::array();
  if (!r.effective.empty()) {
    std::string ec = "xi,a_eff,mean_gradient\n";
    for (const auto& s : r.effective) {
      ec += num(s.xi) + "," + num(s.a_eff) + "," + num(s.mean_gradient) + "\n";
      eff.push_back(json{{"xi", s.xi}, {"a_eff", jnum(s.a_eff)}, {"mean_gradient", jnum(s.mean_gradient)},
                         {"solves", s.solves}});
    }
    w.text("plotdata/effective.csv", ec);
  }

  Outcome out;
  out.report = json{{"kind", r.kind},
                    {"reference_norm", jnum(r.reference_norm)},
                    {"reference_flux_scale", jnum(r.reference_flux_scale)},
                    {"members", members_json(r)}};
  if (!r.divcurl_limits.empty()) out.report["divcurl_limits"] = r.divcurl_limits;
  if (!eff.empty()) out.report["effective"] = eff;
  if (r.effective_reference_weight) out.report["effective_reference_weight"] = *r.effective_reference_weight;
  for (const auto& m : r.members) out.timings["h" + std::to_string(m.h)] = m.solve.wall_time;
  out.verdicts = r.verdicts;
  return out;
}

Outcome run_consistency(const RunConfig& cfg, Writer& w) {
  const auto res = consistency_check(build_sequence(cfg));
  std::string csv = "test,elliptic,parabolic\n";
  for (std::size_t j = 0; j < res.elliptic_flux.size(); ++j) {
    csv += std::to_string(j) + "," + num(res.elliptic_flux[j]) + "," + num(res.parabolic_flux[j]) + "\n";
  }
  w.text("plotdata/flux_functionals.csv", csv);
  w.text("report.csv", "gap,max_drift\n" + num(res.gap) + "," + num(res.max_drift) + "\n");
  Outcome out;
  out.report = json{{"kind", "consistency"},
                    {"diagnostic", res.diagnostic},
                    {"gap", jnum(res.gap)},
                    {"max_drift", jnum(res.max_drift)},
                    {"elliptic_limit_flux", res.elliptic_flux},
                    {"parabolic_limit_flux", res.parabolic_flux}};
  out.verdicts = res.verdicts;
  return out;
}

Outcome dispatch(const RunConfig& cfg, Writer& w) {
  if (cfg.kind == "verify-class") return run_verify(cfg, w);
  if (cfg.kind == "solve-elliptic") return run_solve_elliptic(cfg, w);
  if (cfg.kind == "solve-parabolic") return run_solve_parabolic(cfg, w);
  if (cfg.kind == "sweep") {
    const auto spec = build_sequence(cfg);
    return sequence_outcome(spec.kind == ProblemKind::parabolic ? run_parabolic_sequence(spec)
                                                                : run_elliptic_sequence(spec),
                            w);
  }
  if (cfg.kind == "divcurl") {
    if (cfg.sweep.problem != "elliptic") throw ConfigError("sweep.problem: divcurl runs an elliptic sweep");
    return sequence_outcome(run_elliptic_sequence(build_sequence(cfg)), w);
  }
  if (cfg.kind == "consistency") return run_consistency(cfg, w);
  if (cfg.kind == "data-convergence") {
    return sequence_outcome(data_convergence_check(build_sequence(cfg), build_perturbation(cfg)), w);
  }
  throw ConfigError("experiment.kind: unknown experiment kind '" + cfg.kind + "'");
}

}  // namespace

const char* version() { return GCONV_VERSION; }

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "' for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

RunResult execute(const RunConfig& cfg, std::ostream& log) {
  RunResult result;
  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Writer w(cfg.out_dir);
    Outcome out = dispatch(cfg, w);
    out.report["seed"] = std::to_string(cfg.seed);
    out.report["verdicts"] = verdicts_json(out.verdicts);
    bool passed = true;
    for (const auto& v : out.verdicts) passed = passed && (!v.hard || v.passed);
    out.report["passed"] = passed;
    w.text("report.json", out.report.dump(2) + "\n");
    result.exit_code = passed ? kExitOk : kExitVerdict;
    result.verdicts = out.verdicts;
    result.files = w.files();

    json files = json::array();
    for (const auto& rel : w.files()) {
      files.push_back(json{{"path", rel},
                           {"sha256", sha256_file(w.root() / rel)},
                           {"bytes", fs::file_size(w.root() / rel)}});
    }
    json summary = json::array();
    for (const auto& v : out.verdicts) {
      summary.push_back(json{{"name", v.name}, {"passed", v.passed}, {"hard", v.hard}});
    }
    out.timings["total"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json manifest{{"tool", "gconv"},
                  {"version", version()},
                  {"experiment", cfg.kind},
                  {"seed", std::to_string(cfg.seed)},
                  {"workers", cfg.workers},
                  {"config", config_json(cfg)},
                  {"started", started},
                  {"finished", utc_now()},
                  {"timings", out.timings},
                  {"verdicts", summary},
                  {"passed", passed},
                  {"exit_code", result.exit_code},
                  {"files", files}};
    w.atomic("manifest.json", manifest.dump(2) + "\n");
    for (const auto& v : out.verdicts) {
      log << (v.passed ? "PASS " : "FAIL ") << v.name << (v.hard ? "" : " (diagnostic)") << ": "
          << v.detail << "\n";
    }
  } catch (const std::exception& e) {
    result.exit_code = kExitError;
    result.error = e.what();
    log << "error: " << e.what() << "\n";
  }
  return result;
}

}  // namespace gconv
