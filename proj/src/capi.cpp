#include "qprobe/qprobe.h"

#include "qprobe/commands.hpp"
#include "qprobe/config.hpp"
#include "qprobe/error.hpp"

#include <new>
#include <string>

struct qprobe_config {
  qprobe::Config cfg;
};

struct qprobe_trajectory {
  qprobe::Trajectory traj;
};

struct qprobe_fisher {
  qprobe::FisherRun run;
};

namespace {

thread_local std::string last_error;

qprobe_status status_of(qprobe::ErrorKind kind) {
  switch (kind) {
    case qprobe::ErrorKind::InvalidArgument: return QPROBE_ERR_INVALID_ARGUMENT;
    case qprobe::ErrorKind::Config: return QPROBE_ERR_CONFIG;
    case qprobe::ErrorKind::Invariant: return QPROBE_ERR_INVARIANT;
    case qprobe::ErrorKind::Io: return QPROBE_ERR_IO;
  }
  return QPROBE_ERR_INTERNAL;
}

qprobe_status fail(qprobe_status s, const char* what) {
  last_error = what;
  return s;
}

template <class F>
qprobe_status guarded(F&& f) {
  try {
    last_error.clear();
    return f();
  } catch (const qprobe::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(QPROBE_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(QPROBE_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(QPROBE_ERR_INTERNAL, "unknown failure");
  }
}

}  // namespace

#define QPROBE_REQUIRE(cond)                                              \
  do {                                                                    \
    if (!(cond)) return fail(QPROBE_ERR_INVALID_ARGUMENT, "null " #cond); \
  } while (0)

extern "C" {

const char* qprobe_version(void) { return qprobe::kVersion; }

const char* qprobe_last_error(void) { return last_error.c_str(); }

qprobe_status qprobe_config_load(const char* path, qprobe_config** out) {
  QPROBE_REQUIRE(path);
  QPROBE_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    *out = new qprobe_config{qprobe::Config::load(path)};
    return QPROBE_OK;
  });
}

qprobe_status qprobe_config_parse(const char* text, qprobe_config** out) {
  QPROBE_REQUIRE(text);
  QPROBE_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    *out = new qprobe_config{qprobe::Config::parse(text)};
    return QPROBE_OK;
  });
}

qprobe_status qprobe_config_set(qprobe_config* cfg, const char* key, const char* value) {
  QPROBE_REQUIRE(cfg);
  QPROBE_REQUIRE(key);
  QPROBE_REQUIRE(value);
  return guarded([&] {
    cfg->cfg.set(key, value);
    return QPROBE_OK;
  });
}

qprobe_status qprobe_config_check(const qprobe_config* cfg) {
  QPROBE_REQUIRE(cfg);
  return guarded([&] {
    (void)cfg->cfg.resolve();
    return QPROBE_OK;
  });
}

void qprobe_config_free(qprobe_config* cfg) { delete cfg; }

qprobe_status qprobe_simulate(const qprobe_config* cfg, const char* out_dir) {
  QPROBE_REQUIRE(cfg);
  QPROBE_REQUIRE(out_dir);
  return guarded([&] {
    qprobe::cmd_simulate(cfg->cfg.resolve(), out_dir);
    return QPROBE_OK;
  });
}

qprobe_status qprobe_fisher_run(const qprobe_config* cfg, const char* out_dir) {
  QPROBE_REQUIRE(cfg);
  QPROBE_REQUIRE(out_dir);
  return guarded([&] {
    qprobe::cmd_fisher(cfg->cfg.resolve(), out_dir);
    return QPROBE_OK;
  });
}

qprobe_status qprobe_sweep(const qprobe_config* cfg, const char* out_dir, int jobs) {
  QPROBE_REQUIRE(cfg);
  QPROBE_REQUIRE(out_dir);
  if (jobs < 1) return fail(QPROBE_ERR_INVALID_ARGUMENT, "jobs must be at least 1");
  return guarded([&] {
    qprobe::cmd_sweep(cfg->cfg.resolve(), out_dir, jobs);
    return QPROBE_OK;
  });
}

qprobe_status qprobe_validate(const qprobe_config* cfg, const char* out_dir) {
  QPROBE_REQUIRE(cfg);
  QPROBE_REQUIRE(out_dir);
  return guarded([&] {
    if (qprobe::cmd_validate(cfg->cfg.resolve(), out_dir)) return QPROBE_OK;
    return fail(QPROBE_ERR_VALIDATION_FAILED, "validation failed: see validation.json");
  });
}

qprobe_status qprobe_trajectory_compute(const qprobe_config* cfg, qprobe_trajectory** out) {
  QPROBE_REQUIRE(cfg);
  QPROBE_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    *out = new qprobe_trajectory{qprobe::run_simulate(cfg->cfg.resolve())};
    return QPROBE_OK;
  });
}

size_t qprobe_trajectory_size(const qprobe_trajectory* traj) { return traj ? traj->traj.size() : 0; }

qprobe_status qprobe_trajectory_sample(const qprobe_trajectory* traj, size_t i, double* t, double* rho) {
  QPROBE_REQUIRE(traj);
  if (i >= traj->traj.size()) return fail(QPROBE_ERR_INVALID_ARGUMENT, "sample index out of range");
  if (t) *t = traj->traj.times[i];
  if (rho) {
    const auto& m = traj->traj.states[i].m;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        rho[4 * a + 2 * b] = m(a, b).real();
        rho[4 * a + 2 * b + 1] = m(a, b).imag();
      }
  }
  last_error.clear();
  return QPROBE_OK;
}

qprobe_status qprobe_trajectory_bloch(const qprobe_trajectory* traj, size_t i, double* r) {
  QPROBE_REQUIRE(traj);
  QPROBE_REQUIRE(r);
  if (i >= traj->traj.size()) return fail(QPROBE_ERR_INVALID_ARGUMENT, "sample index out of range");
  const qprobe::BlochVector b = qprobe::bloch_from_density(traj->traj.states[i]);
  r[0] = b.x;
  r[1] = b.y;
  r[2] = b.z;
  last_error.clear();
  return QPROBE_OK;
}

void qprobe_trajectory_free(qprobe_trajectory* traj) { delete traj; }

qprobe_status qprobe_fisher_compute(const qprobe_config* cfg, qprobe_fisher** out) {
  QPROBE_REQUIRE(cfg);
  QPROBE_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    *out = new qprobe_fisher{qprobe::run_fisher(cfg->cfg.resolve())};
    return QPROBE_OK;
  });
}

size_t qprobe_fisher_size(const qprobe_fisher* f) { return f ? f->run.result.series.size() : 0; }

qprobe_status qprobe_fisher_sample(const qprobe_fisher* f, size_t i, double* t, double* fc, double* fq,
                                   unsigned* flags) {
  QPROBE_REQUIRE(f);
  const auto& s = f->run.result.series;
  if (i >= s.size()) return fail(QPROBE_ERR_INVALID_ARGUMENT, "sample index out of range");
  if (t) *t = s.times[i];
  if (fc) *fc = s.cfi[i];
  if (fq) *fq = s.qfi[i];
  if (flags) *flags = s.flags[i];
  last_error.clear();
  return QPROBE_OK;
}

qprobe_status qprobe_fisher_metrics(const qprobe_fisher* f, qprobe_metrics* out) {
  QPROBE_REQUIRE(f);
  QPROBE_REQUIRE(out);
  const auto& r = f->run.report;
  out->chi = f->run.spec.chi;
  out->max_fq = r.max_fq.value;
  out->argmax_t_fq = r.max_fq.t;
  out->max_fc = r.max_fc.value;
  out->argmax_t_fc = r.max_fc.t;
  out->reference_max_fq = r.rwa_fq.value;
  out->reference_max_fc = r.rwa_fc.value;
  out->delta_fq = r.delta_fq;
  out->delta_fc = r.delta_fc;
  out->r_q = r.r_q;
  out->r_c = r.r_c;
  out->boundary_max = (r.max_fq.boundary || r.max_fc.boundary) ? 1 : 0;
  last_error.clear();
  return QPROBE_OK;
}

void qprobe_fisher_free(qprobe_fisher* f) { delete f; }

}  // extern "C"
