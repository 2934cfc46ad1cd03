// Experiment driver: run, sweep, verify, mc-check.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "entpia/analysis.hpp"
#include "entpia/config.hpp"
#include "entpia/log.hpp"
#include "entpia/mcoracle.hpp"
#include "entpia/parallel.hpp"
#include "entpia/pia.hpp"
#include "entpia/report.hpp"
#include "entpia/verify.hpp"

namespace fs = std::filesystem;
using namespace entpia;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kNotConverged = 2;

struct Flags {
  std::string config;
  std::string out;
  int threads = 0;
  bool strict = false;
  bool plots = false;
  std::string sweep = "rho";
};

/// Output directory staged under a sibling name and renamed into place on commit.
class ArtifactDir {
 public:
  ArtifactDir(const fs::path& final_dir, const json& echo) : final_(final_dir) {
    staging_ = final_.string() + ".partial";
    fs::remove_all(staging_);
    if (final_.has_parent_path()) fs::create_directories(final_.parent_path());
    fs::create_directory(staging_);
    write_json("config.json", echo);
    std::ofstream(staging_ / "VERSION") << kToolVersion << "\n";
  }
  ~ArtifactDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }
  fs::path path(const std::string& name) const { return staging_ / name; }
  void write_json(const std::string& name, const json& j) const {
    std::ofstream os(path(name));
    if (!os) throw Error("cannot write " + path(name).string());
    os << std::setw(2) << j << "\n";
  }
  void commit() {
    fs::remove_all(final_);
    fs::rename(staging_, final_);
    committed_ = true;
  }
  const fs::path& final_path() const { return final_; }

 private:
  fs::path final_, staging_;
  bool committed_ = false;
};

json header_json() { return {{"version", kToolVersion}}; }

ExperimentConfig load(const Flags& f) {
  if (f.config.empty()) throw ConfigError("--config is required");
  ExperimentConfig c = load_config(f.config);
  if (!f.out.empty()) c.out = f.out;
  return c;
}

/// Config echo with the resolved problem parameters included.
json full_echo(const ExperimentConfig& c, const ControlProblem& cp) {
  json e = c.echo();
  e["problem_resolved"] = {{"family", cp.family},   {"state_dim", cp.state_dim}, {"action_dim", cp.action_dim},
                           {"lambda", cp.lambda},   {"rho", cp.rho},             {"params", cp.params},
                           {"growth", {{"N", cp.growth.N}, {"A1", cp.growth.A1}, {"A2", cp.growth.A2}, {"A3", cp.growth.A3}}}};
  e["version"] = kToolVersion;
  return e;
}

void run_validation(const ControlProblem& cp, const ExperimentConfig& c, bool strict, json& summary) {
  const ValidationReport rep = validate_problem(cp, c.alpha, 1000);
  summary["validation"] = rep.to_json(cp.state_dim, cp.action_dim);
  for (const auto& chk : rep.checks)
    if (chk.status == CheckStatus::violated) {
      if (strict) throw ConfigError("assumption " + chk.name + " violated: " + chk.detail);
      log_warning("assumption " + chk.name + " violated: " + chk.detail);
    }
}

Table trace_table(const IterationTrace& t) {
  Table tab;
  tab.header = {"n",          "sup_v",      "sup_increment", "min_increment",   "hjb_residual",
                "weighted_error", "sup_error", "grad_sup_error", "holder1",      "holder2",
                "solver_residual", "m_matrix", "wall_seconds"};
  for (const auto& r : t.records)
    tab.rows.push_back({static_cast<long long>(r.n), r.sup_v, r.sup_increment, r.min_increment, r.hjb_residual,
                        r.weighted_error, r.sup_error, r.grad_sup_error, r.holder1, r.holder2, r.solver_residual,
                        r.m_matrix, r.wall_seconds});
  return tab;
}

/// Values along the first axis through the grid center.
Series value_slice(const ScalarField& v) {
  const Grid& g = v.grid;
  Series s{"v", {}, {}};
  const int j = g.dim == 2 ? g.n[1] / 2 : 0;
  for (int i = 0; i < g.n[0]; ++i) {
    s.x.push_back(g.coord(0, i));
    s.y.push_back(v[g.index(i, j)]);
  }
  return s;
}

int cmd_run(const Flags& f) {
  const ExperimentConfig c = load(f);
  const ControlProblem cp = make_problem(c);
  const Discretization disc = make_discretization(c, cp);
  ScalarField v0(disc.grid);
  if (c.v0 != "zero") {
    v0 = read_field_binary(c.v0, c.core_fraction);
    if (!v0.grid.same_shape(disc.grid)) throw ConfigError("initial field grid does not match the discretization");
  }
  ArtifactDir dir(c.out, full_echo(c, cp));
  json summary = header_json();
  summary["command"] = "run";
  run_validation(cp, c, f.strict, summary);

  std::optional<ReferenceSolution> ref;
  RunOptions opt;
  opt.alpha = c.alpha;
  opt.seminorms = true;
  if (c.reference) {
    ref = reference_solution(cp, refined(disc), disc.grid);
    opt.reference = &ref->coarse;
    summary["reference"] = {{"iterations", ref->iterations}, {"converged", ref->converged},
                            {"core_residual", ref->core_residual}};
  }
  PiaResult res;
  bool solver_failed = false;
  try {
    res = PiaSolver(cp, disc).run(v0, {c.max_iters, c.delta_tol}, opt);
  } catch (const SolverError& e) {
    solver_failed = true;
    summary["diagnosis"] = e.what();
    summary["solver_residuals"] = e.residuals();
  }
  if (!solver_failed) {
    trace_table(res.trace).write_csv(dir.path("trace.csv"));
    const auto& last = res.trace.records.back();
    summary["converged"] = res.converged;
    summary["diverged"] = res.diverged;
    summary["iterations"] = res.iterations;
    summary["diagnosis"] = res.diagnosis;
    summary["sup_v"] = last.sup_v;
    summary["sup_increment"] = last.sup_increment;
    summary["min_increment"] = last.min_increment;
    summary["hjb_residual"] = last.hjb_residual;
    summary["holder1"] = last.holder1;
    summary["holder2"] = last.holder2;
    summary["m_matrix"] = res.state.m_matrix;
    summary["solver"] = {{"method", res.state.solve.method},
                         {"iterations", res.state.solve.iterations},
                         {"relative_residual", res.state.solve.relative_residual}};
    double min_inc = std::numeric_limits<double>::infinity();
    for (const auto& r : res.trace.records)
      if (r.n >= 2) min_inc = std::min(min_inc, r.min_increment);
    summary["min_increment_from_n2"] = std::isfinite(min_inc) ? json(min_inc) : json(nullptr);
    if (opt.reference) summary["weighted_error"] = last.weighted_error;
    write_field_binary(dir.path("value.bin"), res.state.v);
    write_field_csv(dir.path("value.csv"), res.state.v);
    write_policy_csv(dir.path("policy.csv"), res.state.policy);
    write_matrix_coo(dir.path("matrix.coo"), PiaSolver(cp, disc).assemble(res.state.coeffs));
    if (f.plots) {
      Series inc{"sup increment", {}, {}}, hjb{"hjb residual", {}, {}}, err{"weighted error", {}, {}};
      for (const auto& r : res.trace.records) {
        inc.x.push_back(r.n), inc.y.push_back(r.sup_increment);
        hjb.x.push_back(r.n), hjb.y.push_back(r.hjb_residual);
        err.x.push_back(r.n), err.y.push_back(r.weighted_error);
      }
      std::vector<Series> s{inc, hjb};
      if (opt.reference) s.push_back(err);
      write_svg_plot(dir.path("convergence.svg"), "PIA convergence", "iteration", "value", s, false, true);
      write_svg_plot(dir.path("value.svg"), "value function", "x1", "v", {value_slice(res.state.v)}, false, false);
    }
  } else {
    summary["converged"] = false;
  }
  dir.write_json("summary.json", summary);
  dir.commit();
  std::cout << (summary["converged"].get<bool>() ? "converged" : "not converged") << "; artifacts in "
            << dir.final_path().string() << "\n";
  return summary["converged"].get<bool>() ? kOk : kNotConverged;
}

int cmd_sweep(const Flags& f) {
  const ExperimentConfig c = load(f);
  const ControlProblem cp = make_problem(c);
  const Discretization disc = make_discretization(c, cp);
  if (f.sweep != "rho" && f.sweep != "eps0") throw ConfigError("--sweep must be rho or eps0");
  const auto& list = f.sweep == "rho" ? c.rho_sweep : c.eps_sweep;
  if (list.empty()) throw ConfigError("sweep list for " + f.sweep + " is empty");
  ArtifactDir dir(c.out, full_echo(c, cp));
  json summary = header_json();
  summary["command"] = "sweep";
  summary["sweep"] = f.sweep;
  bool all_converged = true;
  if (f.sweep == "rho") {
    std::vector<RhoRow> rows;
    try {
      rows = rho_scaling_sweep(cp, list, disc, c.alpha, {c.max_iters, c.delta_tol});
    } catch (const SolverError&) {
      throw;
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    rho_table(rows).write_csv(dir.path("sweep_rho.csv"));
    json jr = json::array();
    for (const auto& r : rows) {
      all_converged = all_converged && r.converged;
      json row = {{"rho", r.rho}, {"converged", r.converged}, {"iterations", r.iterations}, {"sup_v", r.sup_v}};
      const auto q = r.scaled();
      for (std::size_t k = 0; k < q.size(); ++k) row[rho_quantity_names()[k]] = q[k];
      jr.push_back(row);
    }
    summary["rows"] = jr;
    if (f.plots) {
      std::vector<Series> s;
      for (std::size_t k = 0; k < 6; ++k) {
        Series se{rho_quantity_names()[k], {}, {}};
        for (const auto& r : rows) se.x.push_back(r.rho), se.y.push_back(r.scaled()[k]);
        s.push_back(se);
      }
      write_svg_plot(dir.path("sweep_rho.svg"), "scaled regularity quantities", "rho", "value", s, true, true);
    }
  } else {
    if (cp.family != "small-diffusion") throw ConfigError("eps0 sweep needs the small-diffusion family");
    std::vector<EpsRow> rows;
    try {
      rows = epsilon_floor_sweep(cp.params, list, c.eps_rho, disc, c.max_iters, f.strict, c.alpha);
    } catch (const SolverError&) {
      throw;
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    eps_table(rows).write_csv(dir.path("sweep_eps0.csv"));
    json jr = json::array();
    bool monotone = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      all_converged = all_converged && r.converged;
      if (i && !(r.fit.f >= rows[i - 1].fit.f)) monotone = false;
      jr.push_back({{"eps0", r.eps0}, {"converged", r.converged}, {"iterations", r.iterations}, {"cond3", r.cond3},
                    {"fit_ok", r.fit_ok}, {"q", r.fit.q}, {"floor", r.fit.f}, {"errors", r.errors}});
    }
    summary["rows"] = jr;
    summary["floor_monotone"] = monotone;
    if (f.plots) {
      std::vector<Series> s;
      for (const auto& r : rows) {
        Series se{"eps0=" + format_cell(r.eps0), {}, {}};
        for (std::size_t k = 0; k < r.errors.size(); ++k) se.x.push_back(k + 1.0), se.y.push_back(r.errors[k]);
        s.push_back(se);
      }
      write_svg_plot(dir.path("sweep_eps0.svg"), "weighted error by iteration", "iteration", "error", s, false, true);
    }
  }
  summary["all_converged"] = all_converged;
  dir.write_json("summary.json", summary);
  dir.commit();
  std::cout << list.size() << " rows; artifacts in " << dir.final_path().string() << "\n";
  return all_converged ? kOk : kNotConverged;
}

int cmd_verify(const Flags& f) {
  VerifyReport rep = counterexample_suite(6);
  // barrier bound on the linear-growth default, with a halved-A1 negative control
  const ControlProblem lg = builtin_problem("linear-growth", json::object());
  Discretization d = default_discretization(lg, 129);
  d.bc.kind = BcKind::bound_dirichlet;
  const PiaResult r = pia_run(lg, d, ScalarField(d.grid), {200, 1e-9});
  const BarrierReport b = barrier_check(lg, r.state.v);
  rep.checks.push_back({"growth barrier holds on linear-growth at rho = " + format_cell(lg.rho),
                        r.converged && b.pass && b.min_slack > 0.0,
                        "min slack " + format_cell(b.min_slack) + ", max |v|/bound " + format_cell(b.max_ratio)});
  ControlProblem half = lg;
  half.growth.A1 *= 0.5;
  const BarrierReport bn = barrier_check(half, r.state.v);
  rep.checks.push_back({"negative control: halved A1 bound is violated", !bn.pass,
                        std::to_string(bn.violations) + " core nodes exceed the halved bound"});

  std::cout << std::left;
  for (const auto& c : rep.checks)
    std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << "  (" << c.detail << ")\n";
  for (const auto& fl : rep.flags) std::cout << "[FLAG] " << fl << "\n";
  const std::string out = f.out.empty() ? "verify-out" : f.out;
  json echo = {{"command", "verify"}, {"max_N", 6}, {"barrier_problem", "linear-growth defaults"}, {"n", 129},
               {"bc", "bound-dirichlet"}, {"version", kToolVersion}};
  ArtifactDir dir(out, echo);
  json summary = header_json();
  summary["command"] = "verify";
  summary["report"] = rep.to_json();
  dir.write_json("summary.json", summary);
  dir.commit();
  return rep.all_pass() ? kOk : kNotConverged;
}

int cmd_mc(const Flags& f) {
  const ExperimentConfig c = load(f);
  if (c.mc.npaths < 1000) throw ConfigError("mc.npaths must be at least 1000");
  const ControlProblem cp = make_problem(c);
  const Discretization disc = make_discretization(c, cp);
  const Grid& g = disc.grid;
  std::vector<std::size_t> nodes;
  auto nearest = [&](const Vec& x) {
    std::array<int, kMaxDim> m{0, 0};
    for (int k = 0; k < g.dim; ++k)
      m[k] = std::clamp(static_cast<int>(std::lround((x[k] - g.box.lo[k]) / g.h[k])), 0, g.n[k] - 1);
    return g.index(m[0], m[1]);
  };
  if (c.mc_points.empty()) {
    for (int t = -2; t <= 2; ++t) {
      Vec x = g.core.center();
      x[0] += t * 0.25 * (g.core.hi[0] - g.core.lo[0]);
      nodes.push_back(nearest(x));
    }
  } else {
    for (const auto& x : c.mc_points) nodes.push_back(nearest(x));
  }
  for (std::size_t i : nodes)
    if (!g.in_core(i)) throw ConfigError("mc point " + format_point(g.point(i), g.dim) + " lies outside the core");
  ArtifactDir dir(c.out, full_echo(c, cp));
  const auto pts = feynman_kac_check(cp, disc, nodes, c.mc, c.mc_constant);
  Table t;
  t.header = {"x1", "x2", "pde", "mc", "stderr", "allowance", "exit_fraction", "valid", "pass"};
  json jp = json::array();
  bool all = true;
  for (const auto& p : pts) {
    all = all && p.pass;
    t.rows.push_back({p.x[0], p.x[1], p.pde, p.mc.mean, p.mc.stderr_, p.allowance, p.mc.exit_fraction, p.mc.valid,
                      p.pass});
    json e = p.mc.to_json();
    e["pde"] = p.pde;
    e["allowance"] = p.allowance;
    e["pass"] = p.pass;
    jp.push_back(e);
    std::cout << (p.pass ? "[PASS] " : "[FAIL] ") << format_point(p.x, g.dim) << " pde " << p.pde << " mc "
              << p.mc.mean << " +- " << p.mc.stderr_ << "\n";
  }
  t.write_csv(dir.path("mc.csv"));
  json summary = header_json();
  summary["command"] = "mc-check";
  summary["points"] = jp;
  summary["all_pass"] = all;
  dir.write_json("summary.json", summary);
  dir.commit();
  return all ? kOk : kNotConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropy-regularized policy iteration experiments"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  Flags f;
  auto common = [&](CLI::App* s, bool needs_config) {
    auto* o = s->add_option("--config", f.config, "experiment config (TOML or JSON)");
    if (needs_config) o->required();
    s->add_option("--out", f.out, "output directory (overrides the config)");
    s->add_option("--threads", f.threads, "worker threads (1 = bit-exact determinism)");
    s->add_flag("--strict", f.strict, "treat assumption violations as errors");
    s->add_flag("--plots", f.plots, "write SVG plots");
  };
  auto* run = app.add_subcommand("run", "run policy iteration");
  auto* sweep = app.add_subcommand("sweep", "parameter sweep");
  auto* verify = app.add_subcommand("verify", "exact counterexample and barrier checks");
  auto* mc = app.add_subcommand("mc-check", "Monte-Carlo cross-check of policy values");
  common(run, true);
  common(sweep, true);
  common(verify, false);
  common(mc, true);
  sweep->add_option("--sweep", f.sweep, "rho or eps0")->check(CLI::IsMember({"rho", "eps0"}));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  if (f.threads > 0) set_threads(f.threads);
  try {
    if (*run) return cmd_run(f);
    if (*sweep) return cmd_sweep(f);
    if (*verify) return cmd_verify(f);
    if (*mc) return cmd_mc(f);
  } catch (const InvalidArgument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kNotConverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}
