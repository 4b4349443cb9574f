#include "qprobe/qprobe.h"

#include <CLI11.hpp>

#include <cstdio>
#include <string>

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  int jobs = 1;
  std::string solver;
  int depth = 0;
  double dt = 0.0;
  bool seedless = false;
};

int exit_code(qprobe_status s) {
  switch (s) {
    case QPROBE_OK: return 0;
    case QPROBE_ERR_CONFIG:
    case QPROBE_ERR_INVALID_ARGUMENT: return 2;
    case QPROBE_ERR_INVARIANT: return 3;
    case QPROBE_ERR_VALIDATION_FAILED: return 4;
    default: return 1;
  }
}

int report(qprobe_status s) {
  if (s != QPROBE_OK) std::fprintf(stderr, "qprobe: %s\n", qprobe_last_error());
  return exit_code(s);
}

void add_common(CLI::App* sub, Options& o, bool with_jobs) {
  sub->add_option("--config", o.config, "configuration file")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, "output directory");
  if (with_jobs) sub->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--solver", o.solver, "trajectory solver")->check(CLI::IsMember({"heom", "nz", "rwa"}));
  sub->add_option("--depth", o.depth, "hierarchy depth")->check(CLI::PositiveNumber);
  sub->add_option("--dt", o.dt, "time step")->check(CLI::PositiveNumber);
  sub->add_flag("--seedless", o.seedless, "accepted for scripts; every computation is deterministic");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fisher information of a dissipative two-level probe"};
  app.set_version_flag("--version", qprobe_version());
  app.require_subcommand(1);

  Options o;
  CLI::App* simulate = app.add_subcommand("simulate", "reduced dynamics to trajectory.csv");
  CLI::App* fisher = app.add_subcommand("fisher", "Fisher series and optima to fisher_series.csv and metrics.json");
  CLI::App* sweep = app.add_subcommand("sweep", "chi or gamma sweep to sweep.csv");
  CLI::App* validate = app.add_subcommand("validate", "cross-method checks to validation.json");
  add_common(simulate, o, false);
  add_common(fisher, o, false);
  add_common(sweep, o, true);
  add_common(validate, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  qprobe_config* cfg = nullptr;
  qprobe_status s = qprobe_config_load(o.config.c_str(), &cfg);
  if (s != QPROBE_OK) return report(s);
  if (!o.solver.empty() && s == QPROBE_OK) s = qprobe_config_set(cfg, "solver", o.solver.c_str());
  if (o.depth > 0 && s == QPROBE_OK) s = qprobe_config_set(cfg, "depth", std::to_string(o.depth).c_str());
  if (o.dt > 0.0 && s == QPROBE_OK) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", o.dt);
    s = qprobe_config_set(cfg, "dt", buf);
  }
  if (s == QPROBE_OK) {
    if (*simulate)
      s = qprobe_simulate(cfg, o.out.c_str());
    else if (*fisher)
      s = qprobe_fisher_run(cfg, o.out.c_str());
    else if (*sweep)
      s = qprobe_sweep(cfg, o.out.c_str(), o.jobs);
    else
      s = qprobe_validate(cfg, o.out.c_str());
  }
  const int rc = report(s);
  qprobe_config_free(cfg);
  return rc;
}
