#include "qprobe/commands.hpp"

#include "qprobe/error.hpp"
#include "qprobe/oracle.hpp"
#include "qprobe/reference.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace qprobe {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw io_error("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw io_error("cannot move " + tmp.string() + " to " + path.string());
  }
}

namespace {

std::string header_lines(const Metadata& md) {
  std::string s;
  for (const auto& [k, v] : md) s += "# " + k + ": " + v + "\n";
  return s;
}

Metadata concat(Metadata a, const Metadata& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

TimeGrid grid_for(const RunConfig& cfg, const ModelSpec& spec) { return TimeGrid{cfg.horizon(spec), cfg.samples}; }

SolverSettings settings_for(const RunConfig& cfg) {
  SolverSettings s = cfg.settings;
  s.depth = cfg.depth_for(cfg.gamma_cm1);
  return s;
}

std::unique_ptr<Propagator> propagator_for(const RunConfig& cfg, const ModelSpec& spec, TrajectorySolver solver) {
  const DensityMatrix2 rho0 = initial_density(spec.phi);
  SolverSettings s = settings_for(cfg);
  switch (solver) {
    case TrajectorySolver::Heom: s.kind = SolverKind::Heom; break;
    case TrajectorySolver::Nz: s.kind = SolverKind::Nz; break;
    case TrajectorySolver::Rwa: s.kind = SolverKind::Rwa; break;
    case TrajectorySolver::Oracle: throw invalid_argument("oracle has no step-wise propagator");
  }
  return make_propagator(spec, s, rho0);
}

Metadata solver_metadata(const RunConfig& cfg, const ModelSpec& spec, TrajectorySolver solver) {
  Metadata md = {{"solver", std::string(to_string(solver))}};
  const SolverSettings s = settings_for(cfg);
  if (solver == TrajectorySolver::Heom) {
    md.emplace_back("depth", std::to_string(s.depth));
    SolverSettings h = s;
    h.kind = SolverKind::Heom;
    md.emplace_back("dt", format_number(resolved_step(spec, h)));
  } else if (solver == TrajectorySolver::Nz) {
    SolverSettings n = s;
    n.kind = SolverKind::Nz;
    md.emplace_back("dt", format_number(resolved_step(spec, n)));
    md.emplace_back("nz_kernel", std::string(to_string(s.nz_kernel)));
  } else if (solver == TrajectorySolver::Rwa) {
    md.emplace_back("rwa_variant", std::string(to_string(s.rwa_variant)));
  }
  return md;
}

double max_trace_error(const Trajectory& t) {
  double e = 0.0;
  for (const auto& r : t.states) e = std::max(e, std::abs(r.m.trace() - cplx(1.0)));
  return e;
}

double max_hermiticity_error(const Trajectory& t) {
  double e = 0.0;
  for (const auto& r : t.states) e = std::max(e, r.hermiticity_error());
  return e;
}

double sigma_z_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

Trajectory run_simulate(const RunConfig& cfg) {
  const ModelSpec& spec = cfg.spec;
  const TimeGrid grid = grid_for(cfg, spec);
  grid.validate();
  Trajectory traj;
  Metadata solver_md;
  if (cfg.solver == TrajectorySolver::Oracle) {
    OracleRun run = exact_evolve(spec, cfg.oracle, grid.times());
    traj = std::move(run.trajectory);
    solver_md = traj.metadata;
  } else {
    auto prop = propagator_for(cfg, spec, cfg.solver);
    traj = record(*prop, grid);
    solver_md = solver_metadata(cfg, spec, cfg.solver);
  }
  std::string convergence = "not checked";
  if (cfg.solver == TrajectorySolver::Heom && !cfg.convergence_depths.empty()) {
    const ConvergenceReport rep =
        convergence_scan(initial_density(spec.phi), spec, HeomConfig{0, cfg.settings.dt, 1}, grid.t_max,
                         cfg.convergence_depths);
    convergence = rep.converged ? "converged at depth " + std::to_string(rep.converged_depth) : "not converged";
  }
  Metadata md = {{"command", "simulate"}, {"version", kVersion}};
  md = concat(md, cfg.metadata());
  md = concat(md, solver_md);
  md.emplace_back("t_max", format_number(grid.t_max));
  md.emplace_back("samples", std::to_string(grid.samples));
  if (cfg.solver == TrajectorySolver::Heom) md.emplace_back("convergence", convergence);
  traj.metadata = md;
  return traj;
}

namespace {

FisherRun fisher_point(const RunConfig& cfg, const FisherResult* shared_reference) {
  if (cfg.solver == TrajectorySolver::Oracle) throw invalid_argument("the oracle cannot drive Fisher runs");
  FisherRun fr;
  fr.spec = cfg.spec;
  fr.settings = settings_for(cfg);
  fr.grid = grid_for(cfg, cfg.spec);
  fr.gamma_cm1 = cfg.gamma_cm1;
  fr.lambda_over_gamma = cfg.lambda_over_gamma;
  fr.result = optimize_fisher(fr.spec, fr.settings, fr.grid, cfg.derivative);

  fr.reference_spec = cfg.spec;
  fr.reference_spec.chi = 0.0;
  fr.reference_settings = fr.settings;
  fr.reference_settings.kind = fr.settings.kind == SolverKind::Rwa ? SolverKind::Rwa : cfg.reference_solver;
  if (shared_reference) {
    fr.reference = *shared_reference;
  } else if (fr.spec.chi == 0.0 && fr.reference_settings.kind == fr.settings.kind) {
    fr.reference = fr.result;
  } else {
    fr.reference = optimize_fisher(fr.reference_spec, fr.reference_settings, fr.grid, cfg.derivative);
  }
  fr.report = metric_report(fr.spec, fr.result, fr.reference_spec, fr.reference);
  return fr;
}

}  // namespace

FisherRun run_fisher(const RunConfig& cfg) { return fisher_point(cfg, nullptr); }

std::vector<SweepRow> run_sweep(const RunConfig& cfg, int jobs) {
  if (!cfg.axis || cfg.values.empty()) throw invalid_argument("sweep needs axis and values");
  std::vector<double> values = cfg.values;
  std::sort(values.begin(), values.end());
  std::vector<SweepRow> rows(values.size());

  // A chi sweep shares one chi = 0 reference; with a common t_max it is computed once.
  std::optional<FisherResult> shared;
  if (cfg.axis == SweepAxis::Chi) {
    RunConfig ref = cfg.at_axis(0.0);
    try {
      shared = fisher_point(ref, nullptr).result;
      if (ref.settings.kind != ref.reference_solver && ref.settings.kind != SolverKind::Rwa) shared.reset();
    } catch (const std::exception&) {
      shared.reset();
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      rows[i].value = values[i];
      try {
        rows[i].run = fisher_point(cfg.at_axis(values[i]), shared ? &*shared : nullptr);
      } catch (const std::exception& e) {
        rows[i].error = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(values.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return rows;
}

ValidationReport run_validate(const RunConfig& cfg) {
  const ModelSpec& spec = cfg.spec;
  const TimeGrid grid = grid_for(cfg, spec);
  grid.validate();
  const DensityMatrix2 rho0 = initial_density(spec.phi);
  ValidationReport rep;
  const int depth = cfg.depth_for(cfg.gamma_cm1);
  HeomConfig hc{depth, cfg.settings.dt, 1};
  hc = resolved(hc, spec);

  HeomPropagator heom_prop(spec, hc, rho0);
  const Trajectory heom = record(heom_prop, grid);
  const std::vector<double> heom_z = heom.sigma_z();

  rep.checks.push_back({"heom_trace", "max |tr rho - 1|", max_trace_error(heom), 1e-10, true, false, ""});
  rep.checks.push_back({"heom_hermiticity", "max |rho - rho^dagger|", max_hermiticity_error(heom), 1e-10, true, false,
                        ""});

  if (spec.chi == 0.0) {
    RwaPropagator rwa(spec, rho0, cfg.settings.rwa_variant);
    const Trajectory exact = record(rwa, grid);
    rep.checks.push_back({"rwa", "sup |rho_heom - rho_rwa|", sup_norm_distance(heom, exact), 1e-3, true, false,
                          "closed-form chi = 0 solution, " + std::string(to_string(cfg.settings.rwa_variant)) +
                              " Omega"});
    ModelSpec other = spec;
    other.bath = spec.bath == BathKind::Boson ? BathKind::Fermion : BathKind::Boson;
    HeomPropagator other_prop(other, hc, rho0);
    const Trajectory alt = record(other_prop, grid);
    rep.checks.push_back({"bath_equivalence", "sup |rho_boson - rho_fermion|", sup_norm_distance(heom, alt), 1e-8,
                          true, false, "chi = 0 dynamics do not depend on the bath statistics"});
  }

  if (spec.chi == 1.0 && spec.bath == BathKind::Boson) {
    SolverSettings ns = settings_for(cfg);
    ns.kind = SolverKind::Nz;
    ns.dt = cfg.settings.dt;
    auto nz = make_propagator(spec, ns, rho0);
    const Trajectory nzt = record(*nz, grid);
    const bool weak = spec.gamma <= kNzStrictCoupling * spec.delta;
    rep.checks.push_back({"nz", "sup |<sigma_z>_heom - <sigma_z>_nz|", sigma_z_distance(heom_z, nzt.sigma_z()), 0.02,
                          weak, false,
                          weak ? "weak coupling: Born-level NZ must agree"
                               : "NZ is second order in the coupling; reported only outside weak coupling"});
  }

  const bool oracle = cfg.oracle_mode == "on" || (cfg.oracle_mode == "auto" && spec.chi == 0.0);
  if (oracle) {
    const DiscretizedBath bath = DiscretizedBath::lorentzian(spec, cfg.oracle.modes, cfg.oracle.window);
    const double horizon = std::min(grid.t_max, bath.trust_horizon());
    std::vector<double> ts;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < heom.size(); ++i)
      if (heom.times[i] <= horizon) {
        ts.push_back(heom.times[i]);
        idx.push_back(i);
      }
    const OracleRun orun = exact_evolve(spec, cfg.oracle, ts);
    double d = 0.0;
    for (std::size_t j = 0; j < ts.size(); ++j)
      d = std::max(d, (orun.trajectory.states[j].m - heom.states[idx[j]].m).cwiseAbs().maxCoeff());
    rep.checks.push_back({"oracle", "sup |rho_heom - rho_oracle| for t <= " + format_number(horizon), d, 1e-2, true,
                          false,
                          "K = " + std::to_string(cfg.oracle.modes) + ", dimension " + std::to_string(orun.dimension)});
  }

  std::vector<int> depths = cfg.convergence_depths;
  if (depths.empty()) depths = {std::max(1, depth / 2), depth, depth + 10};
  rep.convergence = convergence_scan(rho0, spec, HeomConfig{depth, cfg.settings.dt, 1}, grid.t_max, depths);
  rep.checks.push_back({"heom_convergence", "sup |rho_N - rho_N'| between the last two depths",
                        rep.convergence.deviations.back(), rep.convergence.tolerance, true, false,
                        rep.convergence.converged ? "converged at depth " + std::to_string(rep.convergence.converged_depth)
                                                  : "not converged"});

  for (auto& c : rep.checks) {
    c.passed = c.deviation <= c.tolerance;
    if (c.strict && !c.passed) rep.passed = false;
  }
  rep.metadata = concat({{"command", "validate"}, {"version", kVersion}}, cfg.metadata());
  rep.metadata = concat(rep.metadata, solver_metadata(cfg, spec, TrajectorySolver::Heom));
  rep.metadata.emplace_back("t_max", format_number(grid.t_max));
  rep.metadata.emplace_back("samples", std::to_string(grid.samples));
  return rep;
}

std::string trajectory_csv(const Trajectory& traj, const Metadata& header) {
  std::string s = header_lines(header);
  s += "t,re_rho_pp,im_rho_pp,re_rho_pm,im_rho_pm,re_rho_mp,im_rho_mp,re_rho_mm,im_rho_mm,r_x,r_y,r_z\n";
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Mat2& m = traj.states[i].m;
    const BlochVector r = bloch_from_density(traj.states[i]);
    s += format_number(traj.times[i]);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) s += "," + format_number(m(a, b).real()) + "," + format_number(m(a, b).imag());
    s += "," + format_number(r.x) + "," + format_number(r.y) + "," + format_number(r.z) + "\n";
  }
  return s;
}

std::string fisher_csv(const FisherSeries& series, const Metadata& header) {
  std::string s = header_lines(header);
  s += "t,F_C,F_Q,flags\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    s += format_number(series.times[i]) + "," + format_number(series.cfi[i]) + "," + format_number(series.qfi[i]) +
         "," + std::to_string(series.flags[i]) + "\n";
  }
  return s;
}

namespace {

json optimum_json(const TimeOptimum& o) {
  return json{{"value", o.value}, {"argmax_t", o.t}, {"boundary_max", o.boundary}};
}

json metrics_object(const FisherRun& run, const RunConfig& cfg) {
  const MetricReport& r = run.report;
  json j;
  j["chi"] = run.spec.chi;
  j["gamma_cm1"] = run.gamma_cm1;
  j["lambda_over_gamma"] = run.lambda_over_gamma;
  j["bath"] = std::string(to_string(run.spec.bath));
  j["max_FQ"] = r.max_fq.value;
  j["argmax_t_FQ"] = r.max_fq.t;
  j["max_FC"] = r.max_fc.value;
  j["argmax_t_FC"] = r.max_fc.t;
  j["delta_FQ"] = r.delta_fq;
  j["delta_FC"] = r.delta_fc;
  j["R_Q"] = r.r_q;
  j["R_C"] = r.r_c;
  json flags = json::array();
  if (r.max_fq.boundary || r.max_fc.boundary) flags.push_back("boundary-max");
  if (r.rwa_fq.boundary || r.rwa_fc.boundary) flags.push_back("reference-boundary-max");
  j["flags"] = flags;
  j["reference"] = json{{"chi", 0.0},
                        {"solver", std::string(to_string(run.reference_settings.kind))},
                        {"max_FQ", optimum_json(r.rwa_fq)},
                        {"max_FC", optimum_json(r.rwa_fc)}};
  json md = json::object();
  for (const auto& [k, v] : run.result.series.metadata) md[k] = v;
  for (const auto& [k, v] : cfg.metadata()) md[k] = v;
  md["version"] = kVersion;
  j["solver_metadata"] = md;
  return j;
}

}  // namespace

std::string metrics_json(const FisherRun& run, const RunConfig& cfg) { return metrics_object(run, cfg).dump(2) + "\n"; }

std::string sweep_csv(const std::vector<SweepRow>& rows, const RunConfig& cfg) {
  const std::string axis_key = cfg.axis == SweepAxis::Chi ? "chi" : "gamma_cm1";
  Metadata md = {{"command", "sweep"}, {"version", kVersion}, {"axis", std::string(to_string(*cfg.axis))}};
  for (const auto& kv : cfg.metadata()) {
    if (kv.first == axis_key) continue;
    if (cfg.axis == SweepAxis::Gamma && (kv.first == "gamma_internal" || kv.first == "lambda_note" ||
                                         (cfg.hold_ratio && kv.first == "lambda_internal")))
      continue;
    md.push_back(kv);
  }
  md.emplace_back("solver", std::string(to_string(cfg.settings.kind)));
  md.emplace_back("reference_solver", std::string(to_string(cfg.reference_solver)));
  md.emplace_back("depth", cfg.depth_given ? std::to_string(cfg.settings.depth) : "default per point");
  md.emplace_back("t_max", cfg.t_max > 0.0 ? format_number(cfg.t_max) : "8/gamma_eff per point");
  md.emplace_back("samples", std::to_string(cfg.samples));
  md.emplace_back("delta_rel", format_number(cfg.derivative.relative_step));
  std::string s = header_lines(md);
  s += "axis_value,chi,gamma_cm1,lambda_over_gamma,bath,max_FQ,argmax_t_FQ,max_FC,argmax_t_FC,rwa_max_FQ,rwa_max_FC,"
       "delta_FQ,delta_FC,R_Q,R_C,flags,error\n";
  for (const auto& row : rows) {
    s += format_number(row.value);
    if (!row.run) {
      std::string err = row.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::replace(err.begin(), err.end(), '\n', ' ');
      s += ",,,,,,,,,,,,,,,,error: " + err + "\n";
      continue;
    }
    const FisherRun& fr = *row.run;
    const MetricReport& r = fr.report;
    std::string flags;
    if (r.max_fq.boundary || r.max_fc.boundary) flags = "boundary-max";
    if (r.rwa_fq.boundary || r.rwa_fc.boundary) flags += flags.empty() ? "reference-boundary-max" : ";reference-boundary-max";
    s += "," + format_number(fr.spec.chi) + "," + format_number(fr.gamma_cm1) + "," +
         format_number(fr.lambda_over_gamma) + "," + std::string(to_string(fr.spec.bath)) + "," +
         format_number(r.max_fq.value) + "," + format_number(r.max_fq.t) + "," + format_number(r.max_fc.value) + "," +
         format_number(r.max_fc.t) + "," + format_number(r.rwa_fq.value) + "," + format_number(r.rwa_fc.value) + "," +
         format_number(r.delta_fq) + "," + format_number(r.delta_fc) + "," + format_number(r.r_q) + "," +
         format_number(r.r_c) + "," + flags + ",\n";
  }
  return s;
}

std::string validation_json(const ValidationReport& report) {
  json j;
  j["passed"] = report.passed;
  json checks = json::array();
  for (const auto& c : report.checks) {
    checks.push_back(json{{"name", c.name},
                          {"quantity", c.quantity},
                          {"deviation", c.deviation},
                          {"tolerance", c.tolerance},
                          {"strict", c.strict},
                          {"passed", c.passed},
                          {"note", c.note}});
  }
  j["checks"] = checks;
  const ConvergenceReport& cv = report.convergence;
  j["convergence"] = json{{"depths", cv.depths},
                          {"deviations", cv.deviations},
                          {"tolerance", cv.tolerance},
                          {"dt", cv.dt},
                          {"converged", cv.converged},
                          {"converged_depth", cv.converged_depth}};
  json md = json::object();
  for (const auto& [k, v] : report.metadata) md[k] = v;
  j["metadata"] = md;
  return j.dump(2) + "\n";
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw io_error("cannot create output directory " + dir.string());
}

}  // namespace

void cmd_simulate(const RunConfig& cfg, const fs::path& out_dir) {
  const Trajectory traj = run_simulate(cfg);
  ensure_dir(out_dir);
  write_atomic(out_dir / "trajectory.csv", trajectory_csv(traj, traj.metadata));
}

void cmd_fisher(const RunConfig& cfg, const fs::path& out_dir) {
  const FisherRun run = run_fisher(cfg);
  Metadata md = concat({{"command", "fisher"}, {"version", kVersion}}, cfg.metadata());
  md = concat(md, run.result.series.metadata);
  ensure_dir(out_dir);
  write_atomic(out_dir / "fisher_series.csv", fisher_csv(run.result.series, md));
  write_atomic(out_dir / "metrics.json", metrics_json(run, cfg));
}

void cmd_sweep(const RunConfig& cfg, const fs::path& out_dir, int jobs) {
  const auto rows = run_sweep(cfg, jobs);
  ensure_dir(out_dir);
  write_atomic(out_dir / "sweep.csv", sweep_csv(rows, cfg));
}

bool cmd_validate(const RunConfig& cfg, const fs::path& out_dir) {
  const ValidationReport rep = run_validate(cfg);
  ensure_dir(out_dir);
  write_atomic(out_dir / "validation.json", validation_json(rep));
  return rep.passed;
}

}  // namespace qprobe
